"""Command-line front end: ``spectral-codec-bench``.

Thin wrappers over the library. Global options (``--config``, ``--seed``,
``--jobs``, ``--out``) sit on the group; every config file key can also
be overridden through ``SCB_*`` environment variables (see
:mod:`scbench.config`).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .codecs import (
    BlockDctCodec,
    fit_linear_ae,
    load_codec,
    prune_linear_ae,
    save_codec,
)
from .config import ConfigError, load_config
from .corruptions import CORRUPTION_NAMES, CorruptionSpec, corrupt_dataset
from .harness import evaluate_suite, rd_sweep, write_records_csv
from .images import load_dataset, write_dataset
from .spectral import dataset_spectrum, metrics_bundle, triangle_audit
from .spectrum_io import render_png, write_csv, write_pfm


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="spectral-codec-bench")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML or JSON config file.")
@click.option("--seed", type=click.IntRange(min=0), default=None,
              help="Master seed (overrides the config).")
@click.option("--jobs", type=click.IntRange(min=1), default=None,
              help="Parallel worker count (overrides the config).")
@click.option("--out", type=click.Path(), default=None,
              help="Output file or directory.")
@click.pass_context
def main(ctx, config_path, seed, jobs, out):
    """Spectral inspection and RD benchmarking for image codecs."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, seed=seed, jobs=jobs, out=out)


def _seed(ctx) -> int:
    return ctx.obj["seed"] if ctx.obj["seed"] is not None else 0


def _out(ctx, default: str) -> Path:
    return Path(ctx.obj["out"] if ctx.obj["out"] is not None else default)


def _load_codec_arg(codec_file: str | None, dct_quality: int | None,
                    dataset=None, r: int | None = None, delta: float = 1 / 64):
    """Resolve the codec selection flags shared by several commands."""
    chosen = [x is not None for x in (codec_file, dct_quality, r)]
    if sum(chosen) != 1:
        raise click.UsageError(
            "select exactly one codec: --codec FILE, --dct-quality Q, or --r RANK"
        )
    if codec_file is not None:
        return load_codec(codec_file)
    if dct_quality is not None:
        return BlockDctCodec(quality=dct_quality)
    if dataset is None:
        raise click.UsageError("--r requires --dataset to fit on")
    return fit_linear_ae(dataset, r, delta=delta)


@main.command()
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--name", "corruption_name", required=True,
              type=click.Choice(sorted(CORRUPTION_NAMES)))
@click.option("--severity", type=click.IntRange(1, 5), default=3)
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def corrupt(ctx, dataset_dir, corruption_name, severity, crop):
    """Corrupt a dataset directory and write PNGs plus a manifest."""
    dataset = load_dataset(dataset_dir, crop)
    spec = CorruptionSpec(name=corruption_name, severity=severity,
                          seed=_seed(ctx))
    out_dir = _out(ctx, f"{dataset.name}-{corruption_name}-s{severity}")
    _, manifest = corrupt_dataset(dataset, spec, out_dir)
    click.echo(f"wrote {len(manifest.entries)} items to {out_dir}")


@main.command("fit-codec")
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--r", "rank", required=True, type=click.IntRange(min=0))
@click.option("--delta", type=float, default=1.0 / 64.0, show_default=True)
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def fit_codec(ctx, dataset_dir, rank, delta, crop):
    """Fit a rank-r linear autoencoder and save it."""
    dataset = load_dataset(dataset_dir, crop)
    codec = fit_linear_ae(dataset, rank, delta=delta)
    out_file = _out(ctx, f"linear-ae-r{codec.r}.scb")
    save_codec(codec, out_file)
    click.echo(f"fitted r={codec.r} on {len(dataset)} items -> {out_file}")


@main.command()
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--codec", "codec_file", type=click.Path(exists=True), default=None)
@click.option("--dct-quality", type=click.IntRange(1, 100), default=None)
@click.option("--crop", type=(int, int), default=None)
@click.option("--write-recon", is_flag=True, help="Write reconstructed PNGs.")
@click.pass_context
def roundtrip(ctx, dataset_dir, codec_file, dct_quality, crop, write_recon):
    """Encode + decode every item; print per-item bpp and PSNR."""
    from .codecs import bpp as bpp_of
    from .images import Dataset
    from .quality import psnr

    dataset = load_dataset(dataset_dir, crop)
    codec = _load_codec_arg(codec_file, dct_quality)
    recons = []
    for item_id, image in dataset:
        recon, blob = codec.roundtrip(image)
        recons.append((item_id, recon))
        click.echo(f"{item_id}: bpp={bpp_of(blob, image):.4f} "
                   f"psnr={psnr(recon, image):.2f} dB")
    if write_recon:
        out_dir = _out(ctx, f"{dataset.name}-recon")
        write_dataset(Dataset(name=f"{dataset.name}-recon", items=tuple(recons)),
                      out_dir)
        click.echo(f"reconstructions -> {out_dir}")


@main.command()
@click.option("--codec", "codec_file", required=True, type=click.Path(exists=True))
@click.option("--target", required=True, type=click.FloatRange(0.0, 1.0, max_open=True))
@click.option("--steps", type=(int, int, int), default=(0, 1, 10),
              show_default=True, help="Schedule (t0, dt, n).")
@click.option("--refit/--no-refit", default=False,
              help="Refit surviving decoder weights after pruning.")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True),
              default=None, help="Dataset for --refit.")
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def prune(ctx, codec_file, target, steps, refit, dataset_dir, crop):
    """Prune a saved linear autoencoder to a target sparsity."""
    codec = load_codec(codec_file)
    dataset = load_dataset(dataset_dir, crop) if dataset_dir else None
    if refit and dataset is None:
        raise click.UsageError("--refit requires --dataset")
    pruned = prune_linear_ae(
        codec, target, steps=steps, refit=refit,
        training=dataset.as_array() if dataset is not None else None,
    )
    out_file = _out(ctx, Path(codec_file).stem + f"-s{target:g}.scb")
    save_codec(pruned, out_file)
    click.echo(f"sparsity {pruned.sparsity:.4f} -> {out_file}")


@main.command()
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def psd(ctx, dataset_dir, crop):
    """Mean power spectral density of a dataset (PFM + CSV + PNG)."""
    dataset = load_dataset(dataset_dir, crop)
    spectrum = dataset_spectrum(dataset)
    out_dir = _out(ctx, f"{dataset.name}-psd")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pfm(spectrum, out_dir / "psd.pfm")
    write_csv(spectrum, out_dir / "psd.csv")
    render_png(spectrum, out_dir / "psd.png")
    click.echo(f"PSD over {len(dataset)} items -> {out_dir}")


@main.command()
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--codec", "codec_file", type=click.Path(exists=True), default=None)
@click.option("--dct-quality", type=click.IntRange(1, 100), default=None)
@click.option("--r", "rank", type=click.IntRange(min=0), default=None,
              help="Fit a linear AE of this rank on the dataset.")
@click.option("--corruption", "corruption_name", required=True,
              type=click.Choice(sorted(CORRUPTION_NAMES)))
@click.option("--severity", type=click.IntRange(1, 5), default=3)
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def metrics(ctx, dataset_dir, codec_file, dct_quality, rank, corruption_name,
            severity, crop):
    """Difference spectra (D, G, R, corruption) plus the triangle audit."""
    dataset = load_dataset(dataset_dir, crop)
    codec = _load_codec_arg(codec_file, dct_quality, dataset, rank)
    spec = CorruptionSpec(name=corruption_name, severity=severity,
                          seed=_seed(ctx))
    bundle = metrics_bundle(codec, dataset, spec)
    out_dir = _out(ctx, f"{dataset.name}-metrics")
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, spectrum in bundle.items():
        write_pfm(spectrum, out_dir / f"{label}.pfm")
        render_png(spectrum, out_dir / f"{label}.png")
    audit = triangle_audit(bundle["corruption"], bundle["G"], bundle["R"])
    (out_dir / "triangle.json").write_text(
        json.dumps(audit, indent=2, sort_keys=True) + "\n")
    click.echo(f"spectra + audit -> {out_dir} "
               f"(triangle {'passed' if audit['passed'] else 'FAILED'})")
    if not audit["passed"]:
        sys.exit(1)


@main.command("heatmap")
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--codec", "codec_file", type=click.Path(exists=True), default=None)
@click.option("--dct-quality", type=click.IntRange(1, 100), default=None)
@click.option("--r", "rank", type=click.IntRange(min=0), default=None)
@click.option("--eps", type=click.FloatRange(min=0), default=0.1, show_default=True)
@click.option("--stride", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--variant", type=click.Choice(["a", "b", "both"]), default="both",
              show_default=True, help="a: vs perturbed input, b: vs original.")
@click.option("--cap", type=float, default=100.0, show_default=True)
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def heatmap_cmd(ctx, dataset_dir, codec_file, dct_quality, rank, eps, stride,
                variant, cap, crop):
    """Fourier sensitivity heatmap of a codec over a dataset."""
    from .heatmap import heatmap, render_heatmap_png, write_heatmap_csv

    dataset = load_dataset(dataset_dir, crop)
    codec = _load_codec_arg(codec_file, dct_quality, dataset, rank)
    wrt_perturbed, wrt_original = heatmap(
        codec, dataset, eps=eps, stride=stride, psnr_cap=cap, seed=_seed(ctx))
    out_dir = _out(ctx, f"{dataset.name}-heatmap")
    out_dir.mkdir(parents=True, exist_ok=True)
    wanted = {"a": [wrt_perturbed], "b": [wrt_original],
              "both": [wrt_perturbed, wrt_original]}[variant]
    for result in wanted:
        write_heatmap_csv(result, out_dir / f"{result.variant}.csv")
        render_heatmap_png(result, out_dir / f"{result.variant}.png")
        click.echo(f"{result.variant}: min={result.psnr_db.min():.2f} "
                   f"max={result.psnr_db.max():.2f} dB, "
                   f"{int(result.flagged.sum())} clamp-flagged cells "
                   f"-> {out_dir}")


@main.command()
@click.option("--r", "rank", type=click.IntRange(min=1), default=64,
              show_default=True)
@click.option("--n", type=click.IntRange(min=2), default=500, show_default=True)
@click.option("--size", type=click.IntRange(min=2), default=32, show_default=True)
@click.option("--alpha", type=float, default=2.0, show_default=True)
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--amplitude", type=click.FloatRange(min_open=True, min=0),
              default=1.0, show_default=True)
@click.option("--n-fit", type=click.IntRange(min=0), default=0,
              show_default=True, help="Extra fitting samples (0: fit on n).")
@click.option("--corruption", "corruption_names", multiple=True,
              type=click.Choice(sorted(CORRUPTION_NAMES)),
              default=("gaussian_noise",), show_default=True)
@click.option("--severity", type=click.IntRange(1, 5), default=3,
              show_default=True)
@click.pass_context
def theory(ctx, rank, n, size, alpha, beta, amplitude, n_fit,
           corruption_names, severity):
    """Closed-form vs empirical spectra on a synthetic power-law ensemble."""
    from .theory import PowerLawEnsemble, generate_powerlaw, theory_report

    seed = _seed(ctx)
    eval_ds = generate_powerlaw(PowerLawEnsemble(
        shape=(1, size, size), n=n, alpha=alpha, beta=beta, seed=seed + 1,
        amplitude=amplitude))
    fit_ds = None
    if n_fit:
        fit_ds = generate_powerlaw(PowerLawEnsemble(
            shape=(1, size, size), n=n_fit, alpha=alpha, beta=beta,
            seed=seed + 2, amplitude=amplitude))
    specs = [CorruptionSpec(name=name, severity=severity, seed=seed)
             for name in corruption_names]
    out_dir = _out(ctx, "theory-report")
    report = theory_report(rank, eval_ds, specs, alpha=alpha, beta=beta,
                           fit_dataset=fit_ds, out_dir=out_dir)
    for entry in report["corruptions"]:
        for mode, stats in entry["modes"].items():
            click.echo(
                f"{entry['name']}-s{entry['severity']} [{mode}]: "
                f"R offring max relerr {stats['relerr_R_offring']['max']:.4f}, "
                f"G {stats['relerr_G_offring']['max']:.4f}"
            )
    click.echo(f"report -> {out_dir}/report.json")


@main.command("rd-sweep")
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--kind", type=click.Choice(["linear_ae", "block_dct"]),
              required=True)
@click.option("--r", "ranks", multiple=True, type=click.IntRange(min=0),
              help="Linear-AE ranks (repeatable).")
@click.option("--delta", type=click.FloatRange(min_open=True, min=0),
              default=1.0 / 64.0, show_default=True)
@click.option("--quality", "qualities", multiple=True,
              type=click.IntRange(1, 100), help="Block-DCT qualities.")
@click.option("--corruption", "corruption_name", default=None,
              type=click.Choice(sorted(CORRUPTION_NAMES)))
@click.option("--severity", type=click.IntRange(1, 5), default=3)
@click.option("--crop", type=(int, int), default=None)
@click.pass_context
def rd_sweep_cmd(ctx, dataset_dir, kind, ranks, delta, qualities,
                 corruption_name, severity, crop):
    """Rate-distortion sweep of one codec family."""
    dataset = load_dataset(dataset_dir, crop)
    if kind == "linear_ae":
        if not ranks:
            raise click.UsageError("linear_ae sweep needs at least one --r")
        family = [fit_linear_ae(dataset, r, delta=delta) for r in ranks]
    else:
        if not qualities:
            raise click.UsageError("block_dct sweep needs at least one --quality")
        family = [BlockDctCodec(quality=q) for q in qualities]
    corruption = None
    if corruption_name is not None:
        corruption = CorruptionSpec(name=corruption_name, severity=severity,
                                    seed=_seed(ctx))
    failures: list = []
    records = rd_sweep(family, dataset, corruption, codec_name=kind,
                       failures=failures)
    for rec in records:
        click.echo(f"{json.dumps(rec.rate_param, sort_keys=True)}: "
                   f"bpp={rec.bpp_exact:.4f} "
                   f"psnr_in={rec.psnr_vs_input:.2f} "
                   f"psnr_clean={rec.psnr_vs_clean:.2f}")
    for failure in failures:
        click.echo(f"FAILED {failure['rate_param']}: {failure['error']}", err=True)
    if ctx.obj["out"] is not None:
        out_file = Path(ctx.obj["out"])
        out_file.parent.mkdir(parents=True, exist_ok=True)
        write_records_csv(records, out_file)
        click.echo(f"records -> {out_file}")


@main.command()
@click.pass_context
def suite(ctx):
    """Run the full evaluation suite described by --config."""
    overrides = {}
    for key in ("seed", "jobs", "out"):
        if ctx.obj[key] is not None:
            overrides[key] = ctx.obj[key]
    try:
        config = load_config(ctx.obj["config_path"], overrides=overrides)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    report = evaluate_suite(config)
    click.echo(f"{report['n_records']} records, "
               f"{len(report['failures'])} failures, "
               f"audits {'passed' if report['passed'] else 'FAILED'} "
               f"-> {report['run_dir']}")
    if not report["passed"]:
        sys.exit(1)


if __name__ == "__main__":
    main()
