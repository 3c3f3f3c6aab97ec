"""``specmix`` command line.

Exit codes: 0 success, 1 computation error, 2 usage or I/O error.
Options left unset fall back to ``--manifest`` values, then to defaults.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import CubeFormatError, SpecmixError
from .band_selection import (
    apply_mask,
    band_snr,
    read_mask,
    select_bands,
    write_mask,
    write_snr_profile,
)
from .baseline_filters import (
    METHODS,
    FourierParams,
    WaveletParams,
    compare_filters,
    write_filter_report,
)
from .io import (
    SpectralLibrary,
    cube_paths,
    read_cube,
    read_spectral_library,
    write_abundance_maps,
    write_cube,
    write_pgm,
    write_spectral_library,
)
from .metrics import match_endmembers, resample_reference, write_match_report
from .pipeline import (
    PipelineConfig,
    StageError,
    read_manifest,
    run_pipeline,
    snr_profile_image,
    write_abundance_images,
    write_manifest,
)
from .smoothing import SgParams, smooth_cube
from .synth import SynthConfig, generate
from .unmixing import (
    EndmemberSet,
    KmeansConfig,
    kmeans_endmembers,
    l2_normalize_rows,
    unmix_cube,
)

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2

_PIPELINE_DEFAULTS = {
    "filter_method": "phaselock",
    "window": 11,
    "order": 3,
    "keep_fraction": 0.25,
    "levels": 3,
    "threshold_scale": 1.0,
    "threshold_db": 15.0,
    "k": 12,
    "seed": 42,
    "max_iters": 300,
    "tol": 1e-6,
    "n_init": 10,
    "renormalize": False,
    "normalize_before_rmse": False,
    "threads": 1,
}
DEFAULTS = {
    "synth": {
        "rows": 64,
        "cols": 64,
        "bands": 100,
        "k": 4,
        "noise": 0.005,
        "junk": 0.0,
        "seed": 7,
        "mode": "one-hot-regions",
        "alpha": 1.0,
    },
    "smooth": {"window": 11, "order": 3, "threads": 1},
    "select-bands": {"threshold_db": 15.0},
    "unmix": {k: _PIPELINE_DEFAULTS[k] for k in ("k", "seed", "max_iters", "tol", "n_init", "renormalize", "threads")},
    "evaluate": {"normalize_before_rmse": False},
    "compare": {
        "methods": ",".join(METHODS),
        "threshold_db": 15.0,
        "seed": 42,
        "window": 11,
        "order": 3,
        "keep_fraction": 0.25,
        "levels": 3,
        "threshold_scale": 1.0,
        "n_init": 10,
        "threads": 1,
    },
    "pipeline": _PIPELINE_DEFAULTS,
}


class UsageError(SpecmixError):
    pass


def _bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _resolve(args, command):
    """Merge explicit options over manifest values over defaults."""
    defaults = DEFAULTS.get(command, {})
    manifest = read_manifest(args.manifest) if getattr(args, "manifest", None) else {}
    merged = {}
    for key, value in vars(args).items():
        if value is None and key in manifest:
            value = manifest[key]
        if value is None and key in defaults:
            value = defaults[key]
        if isinstance(value, str) and key in defaults and not isinstance(defaults[key], str):
            kind = type(defaults[key])
            value = _bool(value) if kind is bool else kind(value)
        merged[key] = value
    if command == "pipeline":
        for key in ("input", "library"):
            manifest_key = "cube" if key == "input" else key
            if merged.get(key) is None and manifest.get(manifest_key):
                merged[key] = manifest[manifest_key]
    return argparse.Namespace(**merged)


def _require_cube(path):
    if path is None:
        raise UsageError("no input cube given (--in)")
    header, payload = cube_paths(path)
    if not header.is_file() or not payload.is_file():
        raise UsageError(f"cube not found: {path}")
    return read_cube(path)


def _require(path, flag):
    if path is None:
        raise UsageError(f"missing required option {flag}")
    return path


# -- commands --------------------------------------------------------------------------------


def cmd_synth(a):
    config = SynthConfig(
        rows=a.rows,
        cols=a.cols,
        bands=a.bands,
        k=a.k,
        noise_sigma=a.noise,
        abundance_mode=a.mode,
        dirichlet_alpha=a.alpha,
        seed=a.seed,
        junk_band_fraction=a.junk,
    )
    cube, truth = generate(config)
    write_cube(cube, _require(a.out, "--out"))
    if a.out_truth:
        truth_dir = Path(a.out_truth)
        truth_dir.mkdir(parents=True, exist_ok=True)
        names = tuple(f"em_{j}" for j in range(config.k))
        write_spectral_library(SpectralLibrary(names, truth.endmembers), truth_dir / "endmembers.csv")
        write_abundance_maps(truth.abundances, truth_dir / "abundance")
        (truth_dir / "junk_bands.txt").write_text("".join(f"{b}\n" for b in sorted(truth.junk_bands)))
        entries = [("command", "synth")] + [
            (key, getattr(a, key)) for key in ("rows", "cols", "bands", "k", "noise", "junk", "seed", "mode", "alpha")
        ]
        write_manifest(truth_dir / "manifest.txt", entries)
    return EXIT_OK


def cmd_smooth(a):
    cube = _require_cube(a.input)
    out = smooth_cube(cube, SgParams(a.window, a.order), n_jobs=a.threads)
    write_cube(out, _require(a.out, "--out"))
    return EXIT_OK


def cmd_select_bands(a):
    cube = _require_cube(a.input)
    profile = band_snr(cube)
    mask = select_bands(profile, a.threshold_db)
    if a.out_mask:
        write_mask(mask, a.out_mask)
    if a.out_profile:
        write_snr_profile(profile, a.out_profile)
    if a.out_image:
        write_pgm(a.out_image, snr_profile_image(profile.snr_db))
    if a.out_cube:
        write_cube(apply_mask(cube, mask), a.out_cube)
    print(f"retained {mask.retained_count} of {cube.bands} bands at {a.threshold_db} dB")
    return EXIT_OK


def cmd_unmix(a):
    cube = _require_cube(a.input)
    config = KmeansConfig(a.k, a.seed, a.max_iters, a.tol, a.n_init)
    endmembers = kmeans_endmembers(l2_normalize_rows(cube.pixels), config)
    endmembers = EndmemberSet(endmembers.spectra, wavelengths=cube.wavelengths)
    if a.out_endmembers:
        write_spectral_library(endmembers.to_library(), a.out_endmembers)
    if a.out_abundance:
        abundance = unmix_cube(cube, endmembers, a.threads, a.renormalize)
        write_abundance_maps(abundance, a.out_abundance)
        write_abundance_images(abundance, a.out_abundance)
    return EXIT_OK


def cmd_evaluate(a):
    custom = EndmemberSet.from_library(read_spectral_library(_require(a.endmembers, "--endmembers")))
    library = read_spectral_library(_require(a.library, "--library"))
    mask = read_mask(a.mask) if a.mask else None
    reference = resample_reference(library, mask, custom.wavelengths)
    report = match_endmembers(custom, reference, a.normalize_before_rmse)
    if a.report:
        write_match_report(report, a.report)
    for p in report.pairs:
        print(f"{p.custom_name}\t{p.reference_name or '-'}\t{p.cosine:.4f}\t{p.rmse:.4f}")
    print(f"mean\t\t{report.mean_cosine:.4f}\t{report.mean_rmse:.4f}")
    return EXIT_OK


def cmd_compare(a):
    cube = _require_cube(a.input)
    library = read_spectral_library(_require(a.library, "--library"))
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    k = int(a.k) if a.k is not None else len(library)
    report = compare_filters(
        cube,
        library,
        methods,
        a.threshold_db,
        kmeans=KmeansConfig(k=k, seed=a.seed, n_init=a.n_init),
        sg=SgParams(a.window, a.order),
        fourier=FourierParams(a.keep_fraction),
        wavelet=WaveletParams(a.levels, a.threshold_scale),
        n_jobs=a.threads,
    )
    if a.report:
        write_filter_report(report, a.report)
    print("method\tfull_cos\tfull_rmse\tsel_cos\tsel_rmse\tbands\tmean_snr_db")
    for r in report.rows:
        print(
            f"{r.method}\t{r.full_cosine:.4f}\t{r.full_rmse:.4f}\t{r.selected_cosine:.4f}"
            f"\t{r.selected_rmse:.4f}\t{r.retained_bands}\t{r.mean_snr_db:.2f}"
        )
    return EXIT_OK


def cmd_pipeline(a):
    if a.input is None:
        raise UsageError("no input cube given (--in or --manifest)")
    _require_cube(a.input)
    if a.library is not None and not Path(a.library).is_file():
        raise UsageError(f"library not found: {a.library}")
    values = {key: getattr(a, key) for key in _PIPELINE_DEFAULTS}
    values.update(cube=a.input, library=a.library)
    config = PipelineConfig.from_mapping(values)
    result = run_pipeline(config, _require(a.out, "--out"), n_jobs=a.threads)
    line = f"retained {result.retained_bands} of {result.total_bands} bands"
    if result.mean_cosine is not None:
        line += f"; mean cosine {result.mean_cosine:.4f}, mean RMSE {result.mean_rmse:.4f}"
    print(line)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------------


def _opt(parser, command, flag, dest, help, **kwargs):
    default = DEFAULTS.get(command, {}).get(dest)
    if default is not None:
        help = f"{help} (default: {default})"
    parser.add_argument(flag, dest=dest, default=None, help=help, **kwargs)


def _add_manifest(p):
    p.add_argument("--manifest", help="key=value file supplying values for unset options")


def _add_threads(p, command):
    _opt(p, command, "--threads", "threads", "worker threads for per-pixel stages; output does not depend on it", type=int)


def _add_sg(p, command):
    _opt(p, command, "--window", "window", "Savitzky-Golay window length (odd)", type=int)
    _opt(p, command, "--order", "order", "Savitzky-Golay polynomial order", type=int)


def _add_baselines(p, command):
    _opt(p, command, "--keep-fraction", "keep_fraction", "Fourier: fraction of low frequencies kept", type=float)
    _opt(p, command, "--levels", "levels", "wavelet: Haar decomposition levels", type=int)
    _opt(p, command, "--threshold-scale", "threshold_scale", "wavelet: multiplier on the universal threshold", type=float)


def _add_kmeans(p, command):
    _opt(p, command, "--k", "k", "number of endmembers", type=int)
    _opt(p, command, "--seed", "seed", "KMeans seed", type=int)
    _opt(p, command, "--max-iters", "max_iters", "KMeans iteration cap", type=int)
    _opt(p, command, "--tol", "tol", "KMeans relative centroid-shift tolerance", type=float)
    _opt(p, command, "--n-init", "n_init", "KMeans restarts (lowest inertia kept)", type=int)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="specmix",
        description="SNR-guided band selection and KMeans/NNLS unmixing of hyperspectral cubes.",
    )
    parser.add_argument("--version", action="version", version=f"specmix {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    c = "synth"
    p = sub.add_parser(c, help="generate a synthetic cube with known ground truth")
    _opt(p, c, "--rows", "rows", "image rows", type=int)
    _opt(p, c, "--cols", "cols", "image columns", type=int)
    _opt(p, c, "--bands", "bands", "spectral bands", type=int)
    _opt(p, c, "--k", "k", "ground-truth endmembers", type=int)
    _opt(p, c, "--noise", "noise", "additive Gaussian noise std", type=float)
    _opt(p, c, "--junk", "junk", "fraction of bands replaced by zero-mean noise", type=float)
    _opt(p, c, "--seed", "seed", "generator seed", type=int)
    _opt(p, c, "--mode", "mode", "abundance mode", choices=["one-hot-regions", "dirichlet"])
    _opt(p, c, "--alpha", "alpha", "Dirichlet concentration", type=float)
    p.add_argument("--out", help="output cube stem (writes .hdr and .raw)")
    p.add_argument("--out-truth", dest="out_truth", help="directory for ground-truth endmembers, abundances, junk bands")
    _add_manifest(p)

    c = "smooth"
    p = sub.add_parser(c, help="Savitzky-Golay smooth every pixel spectrum")
    p.add_argument("--in", dest="input", help="input cube stem")
    p.add_argument("--out", help="output cube stem")
    _add_sg(p, c)
    _add_threads(p, c)
    _add_manifest(p)

    c = "select-bands"
    p = sub.add_parser(c, help="compute band SNR and write the retained-band mask")
    p.add_argument("--in", dest="input", help="input (smoothed) cube stem")
    _opt(p, c, "--threshold-db", "threshold_db", "retain bands with SNR >= this many dB", type=float)
    p.add_argument("--out-mask", dest="out_mask", help="mask file: one 0/1 per band")
    p.add_argument("--out-profile", dest="out_profile", help="CSV of band,mean,std,snr_db")
    p.add_argument("--out-image", dest="out_image", help="PGM bar chart of the SNR profile")
    p.add_argument("--out-cube", dest="out_cube", help="write the band-masked cube to this stem")
    _add_manifest(p)

    c = "unmix"
    p = sub.add_parser(c, help="extract endmembers with KMeans and unmix with NNLS")
    p.add_argument("--in", dest="input", help="input (band-masked) cube stem")
    _add_kmeans(p, c)
    p.add_argument(
        "--renormalize",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="L2-normalize centroids before NNLS (default: False)",
    )
    p.add_argument("--out-endmembers", dest="out_endmembers", help="endmember CSV (class_0..class_K-1)")
    p.add_argument("--out-abundance", dest="out_abundance", help="directory for per-class abundance maps")
    _add_threads(p, c)
    _add_manifest(p)

    c = "evaluate"
    p = sub.add_parser(c, help="match endmembers to reference spectra (cosine, RMSE)")
    p.add_argument("--endmembers", help="endmember CSV")
    p.add_argument("--library", help="reference library CSV")
    p.add_argument("--mask", help="band mask applied to the library")
    p.add_argument("--report", help="output CSV class,reference,cosine,rmse")
    p.add_argument(
        "--normalize-before-rmse",
        dest="normalize_before_rmse",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="unit-normalize both spectra before RMSE (default: False)",
    )
    _add_manifest(p)

    c = "compare"
    p = sub.add_parser(c, help="compare Fourier, wavelet and SG (phaselock) filtering")
    p.add_argument("--in", dest="input", help="input cube stem")
    p.add_argument("--library", help="reference library CSV on the cube's band grid")
    _opt(p, c, "--methods", "methods", "comma-separated subset of " + ",".join(METHODS))
    _opt(p, c, "--threshold-db", "threshold_db", "SNR threshold for the selected-band columns", type=float)
    p.add_argument("--k", dest="k", type=int, default=None, help="endmembers (default: library size)")
    _opt(p, c, "--seed", "seed", "KMeans seed", type=int)
    _opt(p, c, "--n-init", "n_init", "KMeans restarts", type=int)
    _add_sg(p, c)
    _add_baselines(p, c)
    p.add_argument("--report", help="output CSV")
    _add_threads(p, c)
    _add_manifest(p)

    c = "pipeline"
    p = sub.add_parser(c, help="run filter, band selection, unmixing and evaluation in one go")
    p.add_argument("--in", dest="input", help="input cube stem")
    p.add_argument("--library", help="reference library CSV (evaluation skipped when absent)")
    p.add_argument("--out", help="output directory")
    _opt(p, c, "--filter", "filter_method", "spectral filter", choices=list(METHODS))
    _add_sg(p, c)
    _add_baselines(p, c)
    _opt(p, c, "--threshold-db", "threshold_db", "retain bands with SNR >= this many dB", type=float)
    _add_kmeans(p, c)
    p.add_argument(
        "--renormalize",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="L2-normalize centroids before NNLS (default: False)",
    )
    p.add_argument(
        "--normalize-before-rmse",
        dest="normalize_before_rmse",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="unit-normalize both spectra before RMSE (default: False)",
    )
    _add_threads(p, c)
    _add_manifest(p)
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "smooth": cmd_smooth,
    "select-bands": cmd_select_bands,
    "unmix": cmd_unmix,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "pipeline": cmd_pipeline,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        resolved = _resolve(args, args.command)
        return COMMANDS[args.command](resolved)
    except UsageError as exc:
        print(f"specmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, CubeFormatError, OSError) as exc:
        print(f"specmix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        if isinstance(exc.error, (CubeFormatError, OSError)):
            print(f"specmix: error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"specmix: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (SpecmixError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"specmix: error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
