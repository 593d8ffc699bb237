"""Spectral inspection and rate-distortion benchmarking for image codecs.

The package measures what a compressor does in frequency space: PSD
metrics of reconstruction errors on clean and corrupted data, Fourier
sensitivity heatmaps, synthetic power-law ensembles with closed-form
predictions for projection codecs, plus a deterministic evaluation
harness with a CLI front end (``spectral-codec-bench``).
"""

__version__ = "0.1.0"

from .images import (
    Dataset,
    DatasetError,
    Image,
    ImageError,
    Manifest,
    center_crop,
    load_dataset,
    read_image,
    write_dataset,
    write_image,
)
from .quality import PSNR_CAP_DB, mse, psnr
from .seeding import derive_rng, stable_hash64
from .spectral import (
    RadialProfile,
    Spectrum,
    SpectrumAccumulator,
    band_energy_fractions,
    centered_frequencies,
    classify_band,
    corruption_spectrum,
    dataset_spectrum,
    dft2,
    metric_D,
    metric_G,
    metric_R,
    metrics_bundle,
    psd,
    radial_profile,
    radius_grid,
    triangle_audit,
)
from .spectrum_io import read_pfm, render_png, write_csv, write_pfm
from .corruptions import (
    CORRUPTION_NAMES,
    SEVERITY_TABLE,
    CorruptionError,
    CorruptionSpec,
    corrupt_dataset,
    fingerprint_suite,
)
from .codecs import (
    HEADER_BITS,
    BlockDctCodec,
    CodecError,
    CompressedBlob,
    ExternalCodec,
    IdentityCodec,
    LinearAECodec,
    RangeCoderError,
    ZeroingCodec,
    bpp,
    bpp_entropy,
    decode_symbols,
    encode_symbols,
    fit_linear_ae,
    gmp_schedule,
    load_codec,
    prune_linear_ae,
    save_codec,
    stream_entropy_bits,
    zigzag_order,
)
from .theory import (
    FrequencyMask,
    MaskProjectionCodec,
    PowerLawEnsemble,
    TheoryError,
    boundary_ring,
    generate_powerlaw,
    lemma1_mask,
    mask_agreement,
    power_law_variance,
    predict_D,
    predict_G,
    predict_R,
    predict_reconstruction,
    theory_report,
)
from .heatmap import (
    FourierBasisImage,
    HeatmapError,
    HeatmapResult,
    fourier_basis,
    heatmap,
    perturb,
    render_heatmap_png,
    write_heatmap_csv,
)
from .config import (
    ConfigError,
    SuiteConfig,
    config_hash,
    load_config,
    parse_config,
    read_config_file,
)
from .harness import (
    CSV_COLUMNS,
    EvalRecord,
    HarnessError,
    OperatingPointBin,
    evaluate_point,
    evaluate_suite,
    match_operating_points,
    rd_sweep,
    write_records_csv,
)

__all__ = [
    "__version__",
    # images
    "Dataset", "DatasetError", "Image", "ImageError", "Manifest",
    "center_crop", "load_dataset", "read_image", "write_dataset",
    "write_image",
    # quality
    "PSNR_CAP_DB", "mse", "psnr",
    # seeding
    "derive_rng", "stable_hash64",
    # spectral
    "RadialProfile", "Spectrum", "SpectrumAccumulator",
    "band_energy_fractions", "centered_frequencies", "classify_band",
    "corruption_spectrum", "dataset_spectrum", "dft2",
    "metric_D", "metric_G", "metric_R", "metrics_bundle", "psd",
    "radial_profile", "radius_grid", "triangle_audit",
    # spectrum_io
    "read_pfm", "render_png", "write_csv", "write_pfm",
    # corruptions
    "CORRUPTION_NAMES", "SEVERITY_TABLE", "CorruptionError",
    "CorruptionSpec", "corrupt_dataset", "fingerprint_suite",
    # codecs
    "HEADER_BITS", "BlockDctCodec", "CodecError", "CompressedBlob",
    "ExternalCodec", "IdentityCodec", "LinearAECodec", "RangeCoderError",
    "ZeroingCodec", "bpp", "bpp_entropy", "decode_symbols",
    "encode_symbols", "fit_linear_ae", "gmp_schedule", "load_codec",
    "prune_linear_ae", "save_codec", "stream_entropy_bits", "zigzag_order",
    # theory
    "FrequencyMask", "MaskProjectionCodec", "PowerLawEnsemble",
    "TheoryError", "boundary_ring",
    "generate_powerlaw", "lemma1_mask", "mask_agreement",
    "power_law_variance", "predict_D", "predict_G", "predict_R",
    "predict_reconstruction", "theory_report",
    # heatmap
    "FourierBasisImage", "HeatmapError", "HeatmapResult", "fourier_basis",
    "heatmap", "perturb", "render_heatmap_png", "write_heatmap_csv",
    # config
    "ConfigError", "SuiteConfig", "config_hash", "load_config",
    "parse_config", "read_config_file",
    # harness
    "CSV_COLUMNS", "EvalRecord", "HarnessError", "OperatingPointBin",
    "evaluate_point", "evaluate_suite", "match_operating_points",
    "rd_sweep", "write_records_csv",
]
