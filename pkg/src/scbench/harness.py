"""End-to-end evaluation driver.

Turns a validated :class:`~scbench.config.SuiteConfig` into a run
directory: rate-distortion records for every (codec point, corruption)
pair, difference spectra, operating-point bins, corruption band table,
optional heatmaps and synthetic-ensemble theory checks, plus audits.

Every numeric output is a pure function of (config, seed): wall-clock
timings are written as 0 unless ``record_timing`` is set, so two runs of
the same config produce byte-identical records.csv and manifest.json.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .codecs import (
    BlockDctCodec,
    CodecError,
    ExternalCodec,
    IdentityCodec,
    ZeroingCodec,
    fit_linear_ae,
)
from .config import (
    CodecConfig,
    ConfigError,
    ConstraintConfig,
    SuiteConfig,
    config_hash,
)
from .corruptions import CORRUPTION_NAMES, CorruptionSpec, fingerprint_suite
from .images import Dataset, Image, load_dataset
from .quality import psnr
from .spectral import SpectrumAccumulator, triangle_audit
from .spectrum_io import render_png, write_pfm

CSV_COLUMNS = (
    "codec", "rate_param", "dataset", "corruption", "severity", "seed",
    "bpp_exact", "bpp_entropy", "psnr_vs_input", "psnr_vs_clean",
    "clamp_frac", "wall_ms",
)

TOOL_NAME = "scbench"


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    """One codec point evaluated on one (possibly corrupted) dataset.

    ``corruption`` is the corruption name or ``"clean"`` (severity 0).
    ``psnr_vs_input`` scores the reconstruction against what the codec
    saw; ``psnr_vs_clean`` against the uncorrupted item. ``spectra`` maps
    labels (D, or G/R/corruption) to run-relative file paths.
    """

    codec: str
    rate_param: dict
    dataset: str
    corruption: str
    severity: int
    seed: int
    bpp_exact: float
    bpp_entropy: float
    psnr_vs_input: float
    psnr_vs_clean: float
    clamp_frac: float
    wall_ms: float = 0.0
    spectra: dict = field(default_factory=dict)
    tool_version: str = __version__
    config_hash: str = ""

    def __post_init__(self):
        if self.bpp_exact < 0 or self.bpp_entropy < 0:
            raise HarnessError("bpp must be nonnegative")
        for name in ("psnr_vs_input", "psnr_vs_clean"):
            if not np.isfinite(getattr(self, name)):
                raise HarnessError(f"{name} must be finite (capped)")
        if self.corruption == "clean" and self.psnr_vs_input != self.psnr_vs_clean:
            raise HarnessError(
                "clean records must have psnr_vs_input == psnr_vs_clean"
            )

    def to_row(self) -> list:
        return [
            self.codec,
            json.dumps(self.rate_param, sort_keys=True, separators=(",", ":")),
            self.dataset,
            self.corruption,
            self.severity,
            self.seed,
            float(self.bpp_exact),
            float(self.bpp_entropy),
            float(self.psnr_vs_input),
            float(self.psnr_vs_clean),
            float(self.clamp_frac),
            float(self.wall_ms),
        ]

    def to_dict(self) -> dict:
        row = dict(zip(CSV_COLUMNS, self.to_row()))
        row["spectra"] = dict(self.spectra)
        row["tool_version"] = self.tool_version
        row["config_hash"] = self.config_hash
        return row


@dataclass(frozen=True)
class OperatingPointBin:
    """Per-codec best match to one fixed-bpp or fixed-PSNR target.

    Members are chosen on clean records only; at most one per codec id,
    and every member lies within the relative tolerance of the target.
    """

    constraint: ConstraintConfig
    members: tuple[EvalRecord, ...]
    unmatched: tuple[str, ...] = ()

    def __post_init__(self):
        codecs = [m.codec for m in self.members]
        if len(set(codecs)) != len(codecs):
            raise HarnessError("operating-point bin holds duplicate codec ids")
        for member in self.members:
            value = _constraint_value(member, self.constraint.metric)
            if abs(value - self.constraint.target) > (
                self.constraint.tolerance * self.constraint.target
            ):
                raise HarnessError(
                    f"member {member.codec} at {value} outside tolerance of "
                    f"target {self.constraint.target}"
                )

    def to_dict(self) -> dict:
        return {
            "metric": self.constraint.metric,
            "target": self.constraint.target,
            "tolerance": self.constraint.tolerance,
            "members": [
                {
                    "codec": m.codec,
                    "rate_param": m.rate_param,
                    "value": _constraint_value(m, self.constraint.metric),
                }
                for m in self.members
            ],
            "unmatched": list(self.unmatched),
        }


def _constraint_value(record: EvalRecord, metric: str) -> float:
    if metric == "bpp":
        return record.bpp_exact
    if metric == "psnr":
        return record.psnr_vs_input
    raise HarnessError(f"unknown operating-point metric {metric!r}")


def evaluate_point(
    codec,
    dataset: Dataset,
    corruption: CorruptionSpec | None = None,
    *,
    codec_name: str | None = None,
    psnr_cap: float = 100.0,
    record_timing: bool = False,
    collect_spectra: bool = False,
    config_hash: str = "",
) -> tuple[EvalRecord, dict]:
    """Run one codec over one dataset and aggregate a record.

    Returns ``(record, spectra)`` where spectra maps label -> Spectrum
    (empty unless ``collect_spectra``): D for clean runs; G, R and the
    corruption fingerprint for corrupted runs.
    """
    if len(dataset) == 0:
        raise HarnessError("cannot evaluate on an empty dataset")
    name = codec_name if codec_name is not None else codec.kind
    started = time.perf_counter()

    labels = ("D",) if corruption is None else ("G", "R", "corruption")
    acc = {label: SpectrumAccumulator(label) for label in labels} \
        if collect_spectra else {}
    sum_input = 0.0
    sum_clean = 0.0
    bits_exact = 0
    bits_entropy = 0.0
    pixels = 0
    clamped = 0
    values = 0
    for index, (item_id, image) in enumerate(dataset):
        if corruption is None:
            source = image
        else:
            raw = corruption.apply_to(image, index, clamp=False)
            clipped = np.clip(raw.data, 0.0, 1.0)
            clamped += int((clipped != raw.data).sum())
            source = Image(clipped, clamped=bool((clipped != raw.data).any()))
        values += image.data.size
        try:
            recon, blob = codec.roundtrip(source)
        except Exception as exc:
            raise HarnessError(
                f"codec {name!r} failed on item {item_id!r}: {exc}"
            ) from exc
        if recon.shape != image.shape:
            raise HarnessError(
                f"codec {name!r} changed shape of item {item_id!r}: "
                f"{image.shape} -> {recon.shape}"
            )
        sum_input += psnr(recon, source, cap=psnr_cap)
        sum_clean += psnr(recon, image, cap=psnr_cap)
        bits_exact += blob.exact_bits
        bits_entropy += blob.entropy_bits
        pixels += image.h * image.w
        if collect_spectra:
            if corruption is None:
                acc["D"].add(image.data - recon.data)
            else:
                acc["G"].add(source.data - recon.data)
                acc["R"].add(image.data - recon.data)
                acc["corruption"].add(source.data - image.data)

    n = len(dataset)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    record = EvalRecord(
        codec=name,
        rate_param=dict(getattr(codec, "rate_param", {}) or {}),
        dataset=dataset.name,
        corruption="clean" if corruption is None else corruption.name,
        severity=0 if corruption is None else int(corruption.severity),
        seed=0 if corruption is None else int(corruption.seed),
        bpp_exact=bits_exact / pixels,
        bpp_entropy=bits_entropy / pixels,
        psnr_vs_input=sum_input / n,
        psnr_vs_clean=sum_clean / n if corruption is not None else sum_input / n,
        clamp_frac=clamped / values if values else 0.0,
        wall_ms=elapsed_ms if record_timing else 0.0,
        config_hash=config_hash,
    )
    spectra = {label: a.spectrum() for label, a in acc.items()}
    return record, spectra


def rd_sweep(
    codecs,
    dataset: Dataset,
    corruption: CorruptionSpec | None = None,
    *,
    codec_name: str | None = None,
    psnr_cap: float = 100.0,
    failures: list | None = None,
) -> list[EvalRecord]:
    """Evaluate a family of codec points, sorted by exact bpp.

    A point that raises is appended to ``failures`` (codec, rate_param,
    error) and the sweep continues.
    """
    records = []
    for codec in codecs:
        try:
            record, _ = evaluate_point(
                codec, dataset, corruption,
                codec_name=codec_name, psnr_cap=psnr_cap,
            )
        except Exception as exc:
            entry = {
                "codec": codec_name or getattr(codec, "kind", "?"),
                "rate_param": dict(getattr(codec, "rate_param", {}) or {}),
                "dataset": dataset.name,
                "corruption": "clean" if corruption is None else corruption.name,
                "error": str(exc),
            }
            if failures is None:
                raise
            failures.append(entry)
            continue
        records.append(record)
    records.sort(key=lambda rec: (rec.bpp_exact, json.dumps(
        rec.rate_param, sort_keys=True)))
    return records


def match_operating_points(
    records: list[EvalRecord],
    constraints: list[ConstraintConfig] | ConstraintConfig,
) -> list[OperatingPointBin]:
    """Pick, per codec id, the clean record closest to each target.

    Codecs whose best record misses the relative tolerance are listed as
    unmatched. Corrupted records are ignored: operating points are
    chosen on clean data and reused as-is downstream.
    """
    if isinstance(constraints, ConstraintConfig):
        constraints = [constraints]
    if not records:
        raise HarnessError("cannot match operating points on an empty record list")
    clean = [rec for rec in records if rec.corruption == "clean"]
    if not clean:
        raise HarnessError("no clean records to match operating points on")

    bins = []
    for constraint in constraints:
        members = []
        unmatched = []
        by_codec: dict[str, list[EvalRecord]] = {}
        for rec in clean:
            by_codec.setdefault(rec.codec, []).append(rec)
        for codec_id in sorted(by_codec):
            best = min(
                by_codec[codec_id],
                key=lambda rec: abs(
                    _constraint_value(rec, constraint.metric) - constraint.target
                ),
            )
            distance = abs(
                _constraint_value(best, constraint.metric) - constraint.target
            )
            if distance <= constraint.tolerance * constraint.target:
                members.append(best)
            else:
                unmatched.append(codec_id)
        bins.append(OperatingPointBin(
            constraint=constraint,
            members=tuple(members),
            unmatched=tuple(unmatched),
        ))
    return bins


def write_records_csv(records: list[EvalRecord], path: str | os.PathLike) -> None:
    """Frozen-schema CSV; column order is CSV_COLUMNS, stable forever."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in records:
            writer.writerow(record.to_row())


def build_codec_points(cfg: CodecConfig, dataset: Dataset) -> list:
    """Instantiate the rate points of one codec family for one dataset."""
    if cfg.kind == "identity":
        return [IdentityCodec()]
    if cfg.kind == "zeroing":
        return [ZeroingCodec()]
    if cfg.kind == "linear_ae":
        return [
            fit_linear_ae(dataset, r, delta=cfg.delta)
            for r in cfg.r
        ]
    if cfg.kind == "block_dct":
        return [
            BlockDctCodec(quality=q, block_size=cfg.block)
            for q in cfg.quality
        ]
    if cfg.kind == "external":
        return [ExternalCodec(
            name=cfg.name,
            encode_template=cfg.command,
            decode_template=cfg.decode_command,
        )]
    raise ConfigError([f"unknown codec kind {cfg.kind!r}"])


def _corruption_specs(config: SuiteConfig) -> list[CorruptionSpec]:
    specs = []
    for entry in config.corruptions:
        for severity in entry.severities:
            specs.append(CorruptionSpec(
                name=entry.name, severity=severity, seed=config.seed,
            ))
    return specs


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in text)


def _point_slug(rate_param: dict) -> str:
    if not rate_param:
        return "single"
    return _slug("_".join(f"{k}{rate_param[k]}" for k in sorted(rate_param)))


def _spectra_relpath(record: EvalRecord, label: str) -> str:
    corr = record.corruption if record.corruption == "clean" \
        else f"{record.corruption}-s{record.severity}"
    return (
        f"spectra/{_slug(record.dataset)}/{_slug(record.codec)}/"
        f"{_point_slug(record.rate_param)}/{_slug(corr)}/{label}.pfm"
    )


def _run_heatmaps(config: SuiteConfig, datasets, families, run_dir, report):
    from .heatmap import heatmap, render_heatmap_png, write_heatmap_csv

    selected = set(config.heatmap.codecs)
    summaries = []
    for dataset in datasets:
        for cfg, points in families[dataset.name]:
            if selected and cfg.name not in selected:
                continue
            for codec in points:
                both = heatmap(
                    codec, dataset,
                    eps=config.heatmap.eps, stride=config.heatmap.stride,
                    psnr_cap=config.heatmap.cap, seed=config.seed,
                )
                point = _point_slug(dict(getattr(codec, "rate_param", {}) or {}))
                for result in both:
                    stem = (f"heatmaps/{_slug(dataset.name)}/{_slug(cfg.name)}/"
                            f"{point}/{result.variant}")
                    target = run_dir / stem
                    target.parent.mkdir(parents=True, exist_ok=True)
                    write_heatmap_csv(result, target.with_suffix(".csv"))
                    render_heatmap_png(result, target.with_suffix(".png"))
                    summaries.append({
                        "dataset": dataset.name,
                        "codec": cfg.name,
                        "rate_param": dict(getattr(codec, "rate_param", {}) or {}),
                        "variant": result.variant,
                        "csv": stem + ".csv",
                        "png": stem + ".png",
                        "min_db": float(result.psnr_db.min()),
                        "max_db": float(result.psnr_db.max()),
                        "mean_db": float(result.psnr_db.mean()),
                        "flagged_cells": int(result.flagged.sum()),
                    })
    report["heatmaps"] = summaries


def _run_theory(config: SuiteConfig, run_dir, report):
    from .theory import PowerLawEnsemble, generate_powerlaw, theory_report

    tc = config.theory
    shape = (1, tc.size, tc.size)
    eval_ensemble = PowerLawEnsemble(
        shape=shape, n=tc.n, alpha=tc.alpha, beta=tc.beta,
        seed=config.seed + 1, amplitude=tc.amplitude,
    )
    eval_ds = generate_powerlaw(eval_ensemble)
    fit_ds = None
    if tc.n_fit:
        fit_ensemble = PowerLawEnsemble(
            shape=shape, n=tc.n_fit, alpha=tc.alpha, beta=tc.beta,
            seed=config.seed + 2, amplitude=tc.amplitude,
        )
        fit_ds = generate_powerlaw(fit_ensemble)
    specs = [
        CorruptionSpec(name=name, severity=tc.severity, seed=config.seed)
        for name in tc.corruptions
    ]
    report["theory"] = theory_report(
        tc.r, eval_ds, specs, alpha=tc.alpha, beta=tc.beta,
        fit_dataset=fit_ds, out_dir=run_dir / "theory",
    )
    report["theory"]["out_dir"] = "theory"


def evaluate_suite(config: SuiteConfig) -> dict:
    """Run the whole evaluation and write the run directory atomically.

    Returns the report dict (also written as report.json). The run
    passes — CLI exit code 0 — iff every audit passed and no per-point
    failure occurred.
    """
    cfg_hash = config_hash(config.raw)
    out_dir = Path(config.out)
    if out_dir.exists() and not config.overwrite:
        raise HarnessError(
            f"output directory {out_dir} already exists (set overwrite)"
        )
    tmp_dir = out_dir.parent / (out_dir.name + ".tmp")
    if tmp_dir.exists():
        shutil.rmtree(tmp_dir)
    tmp_dir.mkdir(parents=True)
    try:
        report = _run_suite(config, tmp_dir, cfg_hash)
        if out_dir.exists():
            shutil.rmtree(out_dir)
        os.replace(tmp_dir, out_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise
    report["run_dir"] = str(out_dir)
    return report


def _run_suite(config: SuiteConfig, run_dir: Path, cfg_hash: str) -> dict:
    datasets = [
        load_dataset(entry.path, entry.crop, name=entry.name)
        for entry in config.datasets
    ]
    for dataset in datasets:
        if len(dataset) == 0:
            raise HarnessError(f"dataset {dataset.name!r} is empty")

    # Fit/instantiate every codec family per dataset up front (fits are
    # deterministic and shared by all downstream tasks).
    families: dict[str, list] = {}
    for dataset in datasets:
        families[dataset.name] = [
            (cfg, build_codec_points(cfg, dataset)) for cfg in config.codecs
        ]

    specs = _corruption_specs(config)
    failures: list[dict] = []

    # One task per (dataset, family, point, corruption-or-clean).
    tasks = []
    for dataset in datasets:
        for cfg, points in families[dataset.name]:
            for codec in points:
                for corruption in [None, *specs]:
                    tasks.append((dataset, cfg, codec, corruption))

    def run_task(task):
        dataset, cfg, codec, corruption = task
        return evaluate_point(
            codec, dataset, corruption,
            codec_name=cfg.name, psnr_cap=config.psnr_cap,
            record_timing=config.record_timing,
            collect_spectra=config.write_spectra,
            config_hash=cfg_hash,
        )

    results: list = [None] * len(tasks)
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {idx: pool.submit(run_task, task)
                       for idx, task in enumerate(tasks)}
            for idx, future in futures.items():
                try:
                    results[idx] = future.result()
                except HarnessError as exc:
                    results[idx] = exc
    else:
        for idx, task in enumerate(tasks):
            try:
                results[idx] = run_task(task)
            except HarnessError as exc:
                results[idx] = exc

    records: list[EvalRecord] = []
    audits: list[dict] = []
    for task, result in zip(tasks, results):
        dataset, cfg, codec, corruption = task
        if isinstance(result, Exception):
            failures.append({
                "codec": cfg.name,
                "rate_param": dict(getattr(codec, "rate_param", {}) or {}),
                "dataset": dataset.name,
                "corruption": "clean" if corruption is None else corruption.name,
                "severity": 0 if corruption is None else corruption.severity,
                "error": str(result),
            })
            continue
        record, spectra = result
        if config.write_spectra:
            paths = {}
            for label, spectrum in spectra.items():
                rel = _spectra_relpath(record, label)
                target = run_dir / rel
                target.parent.mkdir(parents=True, exist_ok=True)
                write_pfm(spectrum, target)
                render_png(spectrum, target.with_suffix(".png"))
                paths[label] = rel
            record = replace(record, spectra=paths)
            if corruption is not None:
                audit = triangle_audit(
                    spectra["corruption"], spectra["G"], spectra["R"]
                )
                audit.update({
                    "codec": cfg.name,
                    "rate_param": record.rate_param,
                    "dataset": dataset.name,
                    "corruption": corruption.name,
                    "severity": int(corruption.severity),
                })
                audits.append(audit)
        records.append(record)

    # Stable record order: dataset, codec family, corruption, then bpp.
    dataset_order = {entry.name: i for i, entry in enumerate(config.datasets)}
    codec_order = {cfg.name: i for i, cfg in enumerate(config.codecs)}
    corruption_order = {"clean": (0, 0)}
    for i, spec in enumerate(specs):
        corruption_order[(spec.name, spec.severity)] = (1, i)
    records.sort(key=lambda rec: (
        dataset_order[rec.dataset],
        codec_order[rec.codec],
        corruption_order[
            "clean" if rec.corruption == "clean"
            else (rec.corruption, rec.severity)
        ],
        rec.bpp_exact,
        json.dumps(rec.rate_param, sort_keys=True),
    ))
    write_records_csv(records, run_dir / "records.csv")

    report: dict = {
        "tool": TOOL_NAME,
        "version": __version__,
        "config_hash": cfg_hash,
        "n_records": len(records),
        "failures": failures,
        "audits": {"triangle": audits},
    }

    clean_records = [rec for rec in records if rec.corruption == "clean"]
    if config.constraints:
        bins = match_operating_points(clean_records, list(config.constraints))
        report["operating_points"] = [b.to_dict() for b in bins]

    if config.fingerprint.enabled:
        names = config.fingerprint.names or tuple(
            name for name in CORRUPTION_NAMES if name != "identity"
        )
        fp_specs = [
            CorruptionSpec(name=name, severity=config.fingerprint.severity,
                           seed=config.seed)
            for name in names
        ]
        report["bands"] = {
            dataset.name: fingerprint_suite(dataset, fp_specs)
            for dataset in datasets
        }

    if config.heatmap.enabled:
        _run_heatmaps(config, datasets, families, run_dir, report)
    if config.theory.enabled:
        _run_theory(config, run_dir, report)

    triangle_ok = all(a.get("passed", False) for a in audits)
    report["passed"] = bool(triangle_ok and not failures)

    manifest = {
        "tool": TOOL_NAME,
        "version": __version__,
        "config_hash": cfg_hash,
        "config": config.raw,
        "datasets": [
            {
                "name": ds.name,
                "n": len(ds),
                "channels": ds.k,
                "size": list(ds.common_size) if ds.common_size else None,
                "ids": ds.ids,
            }
            for ds in datasets
        ],
        "records": [rec.to_dict() for rec in records],
        "records_csv": "records.csv",
    }
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (run_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report
