"""The three-stage run: filter and select bands, extract and unmix, evaluate.

:func:`run_pipeline` works on files and writes every artifact plus a
replayable ``key=value`` manifest. :func:`make_unmixing_pipeline` builds the
in-memory scikit-learn equivalent.
"""

from contextlib import contextmanager
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from sklearn.pipeline import Pipeline

from ._validation import SpecmixError
from .band_selection import (
    DEFAULT_THRESHOLD_DB,
    SNRBandSelector,
    apply_mask,
    band_snr,
    select_bands,
    write_mask,
    write_snr_profile,
)
from .baseline_filters import METHODS, FourierParams, WaveletParams, filter_cube
from .io import (
    read_cube,
    read_spectral_library,
    write_abundance_maps,
    write_pgm,
    write_spectral_library,
)
from .metrics import match_endmembers, resample_reference, write_match_report
from .smoothing import SavitzkyGolaySmoother, SgParams
from .unmixing import (
    EndmemberSet,
    KmeansConfig,
    NNLSUnmixer,
    kmeans_endmembers,
    l2_normalize_rows,
    unmix_cube,
)

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "StageError",
    "run_pipeline",
    "make_unmixing_pipeline",
    "format_value",
    "write_manifest",
    "read_manifest",
    "snr_profile_image",
    "ARTIFACTS",
]

ARTIFACTS = {
    "mask": "mask.txt",
    "profile": "snr_profile.csv",
    "profile_image": "snr_profile.pgm",
    "endmembers": "w_custom.csv",
    "abundance": "abundance",
    "evaluation": "evaluation.csv",
    "manifest": "manifest.txt",
}
SNR_IMAGE_HEIGHT = 64


class StageError(SpecmixError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, error):
        super().__init__(f"stage '{stage}' failed: {error}")
        self.stage = stage
        self.error = error


@contextmanager
def _stage(name):
    try:
        yield
    except (FileNotFoundError, StageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass(frozen=True)
class PipelineConfig:
    """Every parameter of a run; written verbatim to the run manifest."""

    cube: str
    library: str | None = None
    filter_method: str = "phaselock"
    window: int = 11
    order: int = 3
    keep_fraction: float = 0.25
    levels: int = 3
    threshold_scale: float = 1.0
    threshold_db: float = DEFAULT_THRESHOLD_DB
    k: int = 12
    seed: int = 42
    max_iters: int = 300
    tol: float = 1e-6
    n_init: int = 10
    renormalize: bool = False
    normalize_before_rmse: bool = False

    def __post_init__(self):
        if self.filter_method not in METHODS:
            raise ValueError(f"filter_method must be one of {METHODS}, got {self.filter_method!r}")
        self.filter_params()
        self.kmeans_config()

    def filter_params(self):
        if self.filter_method == "phaselock":
            return SgParams(self.window, self.order)
        if self.filter_method == "fourier":
            return FourierParams(self.keep_fraction)
        return WaveletParams(self.levels, self.threshold_scale)

    def kmeans_config(self):
        return KmeansConfig(self.k, self.seed, self.max_iters, self.tol, self.n_init)

    @classmethod
    def from_mapping(cls, values):
        """Build from string values (manifest or CLI); unknown keys are ignored."""
        kwargs = {}
        for f in fields(cls):
            if f.name not in values or values[f.name] is None:
                continue
            kwargs[f.name] = _coerce(f.type, values[f.name])
        return cls(**kwargs)


def _coerce(kind, value):
    if not isinstance(value, str):
        return value
    if kind is int:
        return int(value)
    if kind is float:
        return float(value)
    if kind is bool:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    return value or None


@dataclass(frozen=True)
class PipelineResult:
    out_dir: Path
    retained_bands: int
    total_bands: int
    mean_cosine: float | None
    mean_rmse: float | None


# -- manifest ------------------------------------------------------------------------


def format_value(value):
    """Text form used in manifests: exact float repr, without a bare ``.0``."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        text = repr(value)
        return text[:-2] if text.endswith(".0") else text
    return "" if value is None else str(value)


def write_manifest(path, entries, header="specmix run manifest"):
    lines = [f"# {header}"]
    lines += [f"{key}={format_value(value)}" for key, value in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# -- quick-look images -------------------------------------------------------------------


def snr_profile_image(snr_db, height=SNR_IMAGE_HEIGHT):
    """Bar chart of the SNR profile: column ``b`` is filled up to its SNR."""
    snr = np.asarray(snr_db, dtype=np.float64)
    low, high = float(snr.min()), float(snr.max())
    span = high - low
    level = np.full(snr.shape, height) if span == 0 else np.rint((snr - low) / span * (height - 1)) + 1
    rows = np.arange(height)[::-1, None]
    return np.where(rows < level[None, :], snr[None, :], low)


def write_abundance_images(abundance, directory):
    """One PGM per class next to the grid files; returns ``{name: (low, high)}``."""
    scaling = {}
    directory = Path(directory)
    width = max(2, len(str(abundance.classes - 1)))
    for j in range(abundance.classes):
        name = f"class_{j:0{width}d}"
        scaling[name] = write_pgm(directory / f"{name}.pgm", abundance.data[:, :, j])
    return scaling


# -- the run ------------------------------------------------------------------------------


def run_pipeline(config, out_dir, n_jobs=1):
    """Execute every stage and write the artifacts listed in ``ARTIFACTS``.

    Raises ``FileNotFoundError`` for missing inputs and :class:`StageError`
    naming the stage for any other failure. ``n_jobs`` changes speed only.
    """
    out = Path(out_dir)
    cube_path = Path(config.cube)
    with _stage("read"):
        cube = read_cube(cube_path)
        library = read_spectral_library(config.library) if config.library else None
    out.mkdir(parents=True, exist_ok=True)

    with _stage("filter"):
        filtered = filter_cube(cube, config.filter_method, config.filter_params(), n_jobs)
    with _stage("band-selection"):
        profile = band_snr(filtered)
        mask = select_bands(profile, config.threshold_db)
        write_mask(mask, out / ARTIFACTS["mask"])
        write_snr_profile(profile, out / ARTIFACTS["profile"])
        snr_scale = write_pgm(out / ARTIFACTS["profile_image"], snr_profile_image(profile.snr_db))
        working = apply_mask(filtered, mask)
    with _stage("endmember-extraction"):
        pixels = l2_normalize_rows(working.pixels)
        endmembers = kmeans_endmembers(pixels, config.kmeans_config())
        endmembers = EndmemberSet(endmembers.spectra, wavelengths=working.wavelengths)
        write_spectral_library(endmembers.to_library(), out / ARTIFACTS["endmembers"])
    with _stage("unmixing"):
        abundance = unmix_cube(working, endmembers, n_jobs, config.renormalize)
        write_abundance_maps(abundance, out / ARTIFACTS["abundance"])
        image_scale = write_abundance_images(abundance, out / ARTIFACTS["abundance"])

    mean_cos = mean_rmse = None
    if library is not None:
        with _stage("evaluation"):
            reference = resample_reference(library, mask, endmembers.wavelengths)
            report = match_endmembers(endmembers, reference, config.normalize_before_rmse)
            write_match_report(report, out / ARTIFACTS["evaluation"])
            mean_cos, mean_rmse = report.mean_cosine, report.mean_rmse

    entries = [("command", "pipeline")]
    for key, value in asdict(config).items():
        if key in ("cube", "library") and value:
            value = str(Path(value).resolve())
        entries.append((key, value))
    entries += [
        ("total_bands", cube.bands),
        ("retained_bands", mask.retained_count),
        ("pgm.snr_profile", f"{format_value(snr_scale[0])},{format_value(snr_scale[1])}"),
    ]
    for name, (low, high) in image_scale.items():
        entries.append((f"pgm.{name}", f"{format_value(low)},{format_value(high)}"))
    if mean_cos is not None:
        entries += [("mean_cosine", mean_cos), ("mean_rmse", mean_rmse)]
    write_manifest(out / ARTIFACTS["manifest"], entries)
    return PipelineResult(out, mask.retained_count, cube.bands, mean_cos, mean_rmse)


def make_unmixing_pipeline(
    window=11,
    order=3,
    threshold_db=DEFAULT_THRESHOLD_DB,
    n_endmembers=12,
    random_state=42,
    renormalize=False,
    n_jobs=1,
):
    """Smoother -> SNR band selector -> KMeans/NNLS unmixer as a scikit-learn Pipeline.

    ``fit_transform`` on a ``(rows, cols, bands)`` or ``(n_pixels, bands)``
    array returns abundances with ``n_endmembers`` channels.
    """
    return Pipeline(
        [
            ("smooth", SavitzkyGolaySmoother(window, order, n_jobs=n_jobs)),
            ("select", SNRBandSelector(threshold_db)),
            (
                "unmix",
                NNLSUnmixer(
                    n_endmembers,
                    random_state=random_state,
                    renormalize=renormalize,
                    n_jobs=n_jobs,
                ),
            ),
        ]
    )
