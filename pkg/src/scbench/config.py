"""Suite configuration: TOML/JSON loading, env overrides, validation.

A config file describes one evaluation run (datasets, codec families,
corruptions, operating-point constraints, optional heatmap and theory
passes). Every key can be overridden from the environment with the
``SCB_`` prefix, using ``__`` between nesting levels and values written
as JSON (bare strings pass through), e.g.::

    SCB_SEED=7 SCB_HEATMAP__STRIDE=16 SCB_CONSTRAINTS__TOLERANCE=0.1

Validation is exhaustive: every problem in the file is reported in one
:class:`ConfigError`, before any work starts.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corruptions import CORRUPTION_NAMES

ENV_PREFIX = "SCB_"

CODEC_KINDS = ("identity", "zeroing", "linear_ae", "block_dct", "external")


class ConfigError(ValueError):
    """Raised with every validation problem joined into one message."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__(
            "invalid config:\n" + "\n".join(f"  - {p}" for p in self.problems)
        )


@dataclass(frozen=True)
class DatasetConfig:
    name: str
    path: str
    crop: tuple[int, int] | None = None


@dataclass(frozen=True)
class CodecConfig:
    """One codec family: a kind plus a list of rate-parameter points."""

    kind: str
    name: str
    r: tuple[int, ...] = ()
    delta: float = 1.0 / 64.0
    block: int = 8
    quality: tuple[int, ...] = ()
    command: str = ""
    decode_command: str = ""
    suffix: str = ""

    def rate_points(self) -> list[dict]:
        if self.kind == "linear_ae":
            return [{"r": r, "delta": self.delta} for r in self.r]
        if self.kind == "block_dct":
            return [{"block": self.block, "quality": q} for q in self.quality]
        return [{}]


@dataclass(frozen=True)
class CorruptionConfig:
    name: str
    severities: tuple[int, ...] = (3,)


@dataclass(frozen=True)
class ConstraintConfig:
    metric: str  # "bpp" | "psnr"
    target: float
    tolerance: float = 0.05


@dataclass(frozen=True)
class HeatmapConfig:
    enabled: bool = False
    eps: float = 0.1
    stride: int = 8
    cap: float = 100.0
    codecs: tuple[str, ...] = ()  # empty = all configured codecs


@dataclass(frozen=True)
class TheoryConfig:
    enabled: bool = False
    r: int = 64
    n: int = 500
    size: int = 32
    alpha: float = 2.0
    beta: float = 2.0
    amplitude: float = 1.0
    n_fit: int = 0  # 0 = fit on the evaluation ensemble itself
    corruptions: tuple[str, ...] = ("gaussian_noise",)
    severity: int = 3


@dataclass(frozen=True)
class FingerprintConfig:
    enabled: bool = True
    severity: int = 5
    names: tuple[str, ...] = ()  # empty = every non-identity corruption


@dataclass(frozen=True)
class SuiteConfig:
    """Validated description of one evaluation run."""

    datasets: tuple[DatasetConfig, ...]
    codecs: tuple[CodecConfig, ...]
    corruptions: tuple[CorruptionConfig, ...] = ()
    constraints: tuple[ConstraintConfig, ...] = ()
    heatmap: HeatmapConfig = field(default_factory=HeatmapConfig)
    theory: TheoryConfig = field(default_factory=TheoryConfig)
    fingerprint: FingerprintConfig = field(default_factory=FingerprintConfig)
    seed: int = 0
    jobs: int = 1
    out: str = "run"
    overwrite: bool = False
    record_timing: bool = False
    psnr_cap: float = 100.0
    write_spectra: bool = True
    raw: dict = field(default_factory=dict, compare=False)


def read_config_file(path: str | os.PathLike) -> dict:
    """Parse a TOML or JSON config file into a plain dict."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text.decode("utf-8"))
    try:
        return tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        if path.suffix.lower() in ("", ".toml"):
            raise ConfigError([f"{path}: not valid TOML: {exc}"]) from exc
        raise ConfigError(
            [f"{path}: unsupported config format {path.suffix!r}"]
        ) from exc


def apply_env_overrides(raw: dict, environ=None) -> dict:
    """Overlay SCB_* environment variables onto a raw config dict.

    ``SCB_A__B=value`` sets raw["a"]["b"]. Values are parsed as JSON when
    possible, otherwise taken as strings. Returns a new dict.
    """
    environ = os.environ if environ is None else environ
    out = json.loads(json.dumps(raw))  # deep copy of plain data
    for key, value in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = [part.lower() for part in key[len(ENV_PREFIX):].split("__")]
        if not all(path):
            raise ConfigError([f"malformed override variable {key!r}"])
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        for part in path[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[path[-1]] = parsed
    return out


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form of the resolved config."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _expect(problems, obj, key, types, where, default=None, required=False):
    if key not in obj:
        if required:
            problems.append(f"{where}: missing required key {key!r}")
        return default
    value = obj[key]
    if isinstance(value, bool) and bool not in (
        types if isinstance(types, tuple) else (types,)
    ):
        problems.append(f"{where}.{key}: expected {types}, got bool")
        return default
    if not isinstance(value, types):
        problems.append(
            f"{where}.{key}: expected {getattr(types, '__name__', types)}, "
            f"got {type(value).__name__}"
        )
        return default
    return value


def _int_list(problems, obj, key, where, default=()):
    value = obj.get(key, list(default))
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        problems.append(f"{where}.{key}: expected an integer or list of integers")
        return tuple(default)
    return tuple(value)


def _parse_datasets(problems, raw) -> tuple[DatasetConfig, ...]:
    entries = raw.get("datasets", [])
    if not isinstance(entries, list) or not entries:
        problems.append("datasets: at least one [[datasets]] entry is required")
        return ()
    out = []
    seen = set()
    for idx, entry in enumerate(entries):
        where = f"datasets[{idx}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected a table")
            continue
        path = _expect(problems, entry, "path", str, where, required=True)
        name = _expect(problems, entry, "name", str, where,
                       default=Path(path).name if path else None)
        crop = entry.get("crop")
        if crop is not None:
            if (not isinstance(crop, list) or len(crop) != 2
                    or not all(isinstance(c, int) for c in crop)):
                problems.append(f"{where}.crop: expected [height, width]")
                crop = None
            else:
                crop = (crop[0], crop[1])
        if name in seen:
            problems.append(f"{where}.name: duplicate dataset name {name!r}")
        seen.add(name)
        if path is not None and not Path(path).is_dir():
            problems.append(f"{where}.path: not a directory: {path!r}")
        if path is not None and name is not None:
            out.append(DatasetConfig(name=name, path=path, crop=crop))
    return tuple(out)


def _parse_codecs(problems, raw) -> tuple[CodecConfig, ...]:
    entries = raw.get("codecs", [])
    if not isinstance(entries, list) or not entries:
        problems.append("codecs: at least one [[codecs]] entry is required")
        return ()
    out = []
    seen = set()
    for idx, entry in enumerate(entries):
        where = f"codecs[{idx}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected a table")
            continue
        kind = _expect(problems, entry, "kind", str, where, required=True)
        if kind is not None and kind not in CODEC_KINDS:
            problems.append(
                f"{where}.kind: unknown codec kind {kind!r}; "
                f"choose from {', '.join(CODEC_KINDS)}"
            )
            continue
        name = _expect(problems, entry, "name", str, where, default=kind)
        if name in seen:
            problems.append(f"{where}.name: duplicate codec name {name!r}")
        seen.add(name)
        r = _int_list(problems, entry, "r", where)
        quality = _int_list(problems, entry, "quality", where)
        delta = entry.get("delta", 1.0 / 64.0)
        if not isinstance(delta, (int, float)) or isinstance(delta, bool) or delta <= 0:
            problems.append(f"{where}.delta: expected a positive number")
            delta = 1.0 / 64.0
        block = entry.get("block", 8)
        if not isinstance(block, int) or isinstance(block, bool) or block < 2:
            problems.append(f"{where}.block: expected an integer >= 2")
            block = 8
        if kind == "linear_ae":
            if not r:
                problems.append(f"{where}: linear_ae requires r (rank or list)")
            if any(v < 1 for v in r):
                problems.append(f"{where}.r: ranks must be >= 1")
        if kind == "block_dct":
            if not quality:
                problems.append(f"{where}: block_dct requires quality (1..100)")
            if any(not 1 <= q <= 100 for q in quality):
                problems.append(f"{where}.quality: values must be in 1..100")
        command = _expect(problems, entry, "command", str, where, default="")
        decode_command = _expect(problems, entry, "decode_command", str, where,
                                 default="")
        suffix = _expect(problems, entry, "suffix", str, where, default="")
        if kind == "external" and not command:
            problems.append(f"{where}: external codec requires a command template")
        if kind is not None and name is not None:
            out.append(CodecConfig(
                kind=kind, name=name, r=r, delta=float(delta), block=block,
                quality=quality, command=command or "",
                decode_command=decode_command or "", suffix=suffix or "",
            ))
    return tuple(out)


def _parse_corruptions(problems, raw) -> tuple[CorruptionConfig, ...]:
    entries = raw.get("corruptions", [])
    if not isinstance(entries, list):
        problems.append("corruptions: expected a list of tables")
        return ()
    out = []
    for idx, entry in enumerate(entries):
        where = f"corruptions[{idx}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected a table")
            continue
        name = _expect(problems, entry, "name", str, where, required=True)
        if name is not None and name not in CORRUPTION_NAMES:
            problems.append(
                f"{where}.name: unknown corruption {name!r}; "
                f"choose from {', '.join(CORRUPTION_NAMES)}"
            )
            continue
        severities = _int_list(problems, entry, "severities", where, default=(3,))
        bad = [s for s in severities if not 1 <= s <= 5]
        if bad:
            problems.append(f"{where}.severities: out of range 1..5: {bad}")
        if name is not None and name != "identity":
            out.append(CorruptionConfig(name=name, severities=severities))
        elif name == "identity":
            out.append(CorruptionConfig(name=name, severities=(1,)))
    return tuple(out)


def _parse_constraints(problems, raw) -> tuple[ConstraintConfig, ...]:
    section = raw.get("constraints", {})
    if not isinstance(section, dict):
        problems.append("constraints: expected a table")
        return ()
    tolerance = section.get("tolerance", 0.05)
    if (not isinstance(tolerance, (int, float)) or isinstance(tolerance, bool)
            or not 0 < tolerance < 1):
        problems.append("constraints.tolerance: expected a number in (0, 1)")
        tolerance = 0.05
    out = []
    for key, metric in (("fixed_bpp", "bpp"), ("fixed_psnr", "psnr")):
        targets = section.get(key, [])
        if isinstance(targets, (int, float)) and not isinstance(targets, bool):
            targets = [targets]
        if not isinstance(targets, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in targets
        ):
            problems.append(f"constraints.{key}: expected a number or list")
            continue
        for t in targets:
            if t <= 0:
                problems.append(f"constraints.{key}: targets must be positive")
            else:
                out.append(ConstraintConfig(
                    metric=metric, target=float(t), tolerance=float(tolerance)
                ))
    unknown = set(section) - {"fixed_bpp", "fixed_psnr", "tolerance"}
    for key in sorted(unknown):
        problems.append(f"constraints.{key}: unknown key")
    return tuple(out)


def _parse_heatmap(problems, raw) -> HeatmapConfig:
    section = raw.get("heatmap", {})
    if not isinstance(section, dict):
        problems.append("heatmap: expected a table")
        return HeatmapConfig()
    enabled = _expect(problems, section, "enabled", bool, "heatmap", default=False)
    eps = _expect(problems, section, "eps", (int, float), "heatmap", default=0.1)
    stride = _expect(problems, section, "stride", int, "heatmap", default=8)
    cap = _expect(problems, section, "cap", (int, float), "heatmap", default=100.0)
    codecs = section.get("codecs", [])
    if not isinstance(codecs, list) or not all(isinstance(c, str) for c in codecs):
        problems.append("heatmap.codecs: expected a list of codec names")
        codecs = []
    if eps is not None and eps < 0:
        problems.append("heatmap.eps: must be nonnegative")
    if stride is not None and stride < 1:
        problems.append("heatmap.stride: must be >= 1")
    return HeatmapConfig(
        enabled=bool(enabled), eps=float(eps), stride=int(stride),
        cap=float(cap), codecs=tuple(codecs),
    )


def _parse_theory(problems, raw) -> TheoryConfig:
    section = raw.get("theory", {})
    if not isinstance(section, dict):
        problems.append("theory: expected a table")
        return TheoryConfig()
    cfg = TheoryConfig(
        enabled=bool(_expect(problems, section, "enabled", bool, "theory",
                             default=False)),
        r=int(_expect(problems, section, "r", int, "theory", default=64) or 64),
        n=int(_expect(problems, section, "n", int, "theory", default=500) or 500),
        size=int(_expect(problems, section, "size", int, "theory", default=32) or 32),
        alpha=float(_expect(problems, section, "alpha", (int, float), "theory",
                            default=2.0) or 2.0),
        beta=float(_expect(problems, section, "beta", (int, float), "theory",
                           default=2.0) or 2.0),
        amplitude=float(_expect(problems, section, "amplitude", (int, float),
                                "theory", default=1.0) or 1.0),
        n_fit=int(_expect(problems, section, "n_fit", int, "theory", default=0) or 0),
        corruptions=tuple(section.get("corruptions", ["gaussian_noise"])),
        severity=int(_expect(problems, section, "severity", int, "theory",
                             default=3) or 3),
    )
    for name in cfg.corruptions:
        if name not in CORRUPTION_NAMES:
            problems.append(f"theory.corruptions: unknown corruption {name!r}")
    if cfg.enabled:
        if cfg.r < 1:
            problems.append("theory.r: must be >= 1")
        if cfg.n < 2:
            problems.append("theory.n: must be >= 2")
        if cfg.size < 2:
            problems.append("theory.size: must be >= 2")
        if not 1 <= cfg.severity <= 5:
            problems.append("theory.severity: must be in 1..5")
        if cfg.amplitude <= 0:
            problems.append("theory.amplitude: must be positive")
        if cfg.n_fit < 0:
            problems.append("theory.n_fit: must be >= 0")
    return cfg


def _parse_fingerprint(problems, raw) -> FingerprintConfig:
    section = raw.get("fingerprint", {})
    if not isinstance(section, dict):
        problems.append("fingerprint: expected a table")
        return FingerprintConfig()
    enabled = _expect(problems, section, "enabled", bool, "fingerprint",
                      default=True)
    severity = _expect(problems, section, "severity", int, "fingerprint", default=5)
    names = section.get("names", [])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        problems.append("fingerprint.names: expected a list of corruption names")
        names = []
    for name in names:
        if name not in CORRUPTION_NAMES:
            problems.append(f"fingerprint.names: unknown corruption {name!r}")
    if severity is not None and not 1 <= severity <= 5:
        problems.append("fingerprint.severity: must be in 1..5")
        severity = 5
    return FingerprintConfig(
        enabled=bool(enabled), severity=int(severity), names=tuple(names)
    )


_TOP_LEVEL_KEYS = {
    "datasets", "codecs", "corruptions", "constraints", "heatmap", "theory",
    "fingerprint", "seed", "jobs", "out", "overwrite", "record_timing",
    "psnr_cap", "write_spectra",
}


def parse_config(raw: dict) -> SuiteConfig:
    """Validate a raw config dict; raise ConfigError listing every problem."""
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a table/object"])
    for key in sorted(set(raw) - _TOP_LEVEL_KEYS):
        problems.append(f"{key}: unknown top-level key")

    datasets = _parse_datasets(problems, raw)
    codecs = _parse_codecs(problems, raw)
    corruptions = _parse_corruptions(problems, raw)
    constraints = _parse_constraints(problems, raw)
    heatmap = _parse_heatmap(problems, raw)
    theory = _parse_theory(problems, raw)
    fingerprint = _parse_fingerprint(problems, raw)

    seed = _expect(problems, raw, "seed", int, "config", default=0)
    jobs = _expect(problems, raw, "jobs", int, "config", default=1)
    out = _expect(problems, raw, "out", str, "config", default="run")
    overwrite = _expect(problems, raw, "overwrite", bool, "config", default=False)
    record_timing = _expect(problems, raw, "record_timing", bool, "config",
                            default=False)
    psnr_cap = _expect(problems, raw, "psnr_cap", (int, float), "config",
                       default=100.0)
    write_spectra = _expect(problems, raw, "write_spectra", bool, "config",
                            default=True)
    if jobs is not None and jobs < 1:
        problems.append("config.jobs: must be >= 1")
        jobs = 1
    if seed is not None and seed < 0:
        problems.append("config.seed: must be >= 0")
        seed = 0

    known_codecs = {c.name for c in codecs}
    for name in heatmap.codecs:
        if name not in known_codecs:
            problems.append(f"heatmap.codecs: unknown codec name {name!r}")

    if problems:
        raise ConfigError(problems)
    return SuiteConfig(
        datasets=datasets, codecs=codecs, corruptions=corruptions,
        constraints=constraints, heatmap=heatmap, theory=theory,
        fingerprint=fingerprint, seed=int(seed), jobs=int(jobs), out=str(out),
        overwrite=bool(overwrite), record_timing=bool(record_timing),
        psnr_cap=float(psnr_cap), write_spectra=bool(write_spectra), raw=raw,
    )


def load_config(
    path: str | os.PathLike | None,
    *,
    environ=None,
    overrides: dict | None = None,
) -> SuiteConfig:
    """File -> env overrides -> explicit overrides -> validated SuiteConfig."""
    raw = read_config_file(path) if path is not None else {}
    raw = apply_env_overrides(raw, environ)
    if overrides:
        for key, value in overrides.items():
            if value is not None:
                raw[key] = value
    return parse_config(raw)
