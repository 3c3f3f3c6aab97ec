"""Fourier and Haar-wavelet spectral denoisers, and the filter comparison run."""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import map_rows
from ._validation import as_cube_array, check_int, check_spectra
from .band_selection import DEFAULT_THRESHOLD_DB, apply_mask, band_snr, select_bands
from .io import HyperCube
from .metrics import match_endmembers, resample_reference
from .smoothing import SgParams, sg_smooth
from .unmixing import KmeansConfig, kmeans_endmembers, l2_normalize_rows

__all__ = [
    "FourierParams",
    "WaveletParams",
    "fourier_lowpass",
    "wavelet_denoise",
    "haar_decompose",
    "haar_reconstruct",
    "filter_cube",
    "FilterRow",
    "FilterReport",
    "compare_filters",
    "write_filter_report",
    "FourierLowpassFilter",
    "HaarWaveletDenoiser",
    "METHODS",
]

METHODS = ("fourier", "wavelet", "phaselock")
MAD_TO_SIGMA = 0.6745


@dataclass(frozen=True)
class FourierParams:
    keep_fraction: float = 0.25

    def __post_init__(self):
        if not 0 < self.keep_fraction <= 1:
            raise ValueError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")

    def describe(self):
        return f"keep_fraction={self.keep_fraction!r}"


@dataclass(frozen=True)
class WaveletParams:
    levels: int = 3
    threshold_scale: float = 1.0

    def __post_init__(self):
        check_int(self.levels, "levels", minimum=1)
        if not self.threshold_scale >= 0:
            raise ValueError(f"threshold_scale must be >= 0, got {self.threshold_scale}")

    def describe(self):
        return f"levels={self.levels};threshold_scale={self.threshold_scale!r};basis=haar"


def fourier_lowpass(spectrum, params=None):
    """Zero real-FFT coefficients above ``ceil(keep_fraction * B / 2)`` and invert.

    Works on a single spectrum or on the last axis of a stack of spectra.
    """
    params = params or FourierParams()
    x = np.asarray(spectrum, dtype=np.float64)
    n = x.shape[-1]
    if n < 2:
        raise ValueError(f"need at least 2 bands, got {n}")
    cutoff = math.ceil(params.keep_fraction * (n / 2))
    coeffs = np.fft.rfft(x, axis=-1)
    coeffs[..., cutoff + 1 :] = 0.0
    return np.fft.irfft(coeffs, n=n, axis=-1)


def haar_decompose(x, levels):
    """Orthonormal Haar analysis along the last axis.

    An odd-length approximation is extended by repeating its last sample
    before each split. Returns ``(approx, details, lengths)`` with details
    ordered finest first.
    """
    a = np.asarray(x, dtype=np.float64)
    details, lengths = [], []
    for _ in range(levels):
        n = a.shape[-1]
        lengths.append(n)
        if n % 2:
            a = np.concatenate([a, a[..., -1:]], axis=-1)
        even, odd = a[..., 0::2], a[..., 1::2]
        details.append((even - odd) / math.sqrt(2.0))
        a = (even + odd) / math.sqrt(2.0)
    return a, details, lengths


def haar_reconstruct(approx, details, lengths):
    a = approx
    for d, n in zip(reversed(details), reversed(lengths)):
        out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
        out[..., 0::2] = (a + d) / math.sqrt(2.0)
        out[..., 1::2] = (a - d) / math.sqrt(2.0)
        a = out[..., :n]
    return a


def wavelet_denoise(spectrum, params=None):
    """Haar soft-threshold denoising with the universal threshold.

    The noise level is ``median(|finest details|) / 0.6745`` and every
    detail coefficient is shrunk by ``threshold_scale * sigma * sqrt(2 ln B)``.
    """
    params = params or WaveletParams()
    x = np.asarray(spectrum, dtype=np.float64)
    n = x.shape[-1]
    if n < 2**params.levels:
        raise ValueError(f"{params.levels} Haar levels need at least {2**params.levels} bands, got {n}")
    approx, details, lengths = haar_decompose(x, params.levels)
    sigma = np.median(np.abs(details[0]), axis=-1, keepdims=True) / MAD_TO_SIGMA
    t = params.threshold_scale * sigma * math.sqrt(2.0 * math.log(n))
    shrunk = [np.sign(d) * np.maximum(np.abs(d) - t, 0.0) for d in details]
    return haar_reconstruct(approx, shrunk, lengths)


def _method_params(method, sg=None, fourier=None, wavelet=None):
    if method == "phaselock":
        return sg or SgParams()
    if method == "fourier":
        return fourier or FourierParams()
    if method == "wavelet":
        return wavelet or WaveletParams()
    raise ValueError(f"unknown filter method {method!r}; choose from {', '.join(METHODS)}")


def _describe(method, params):
    if method == "phaselock":
        return f"window={params.window};order={params.order}"
    return params.describe()


def filter_cube(cube, method, params=None, n_jobs=1):
    """Apply one of ``METHODS`` to every pixel spectrum of ``cube``."""
    params = params or _method_params(method)
    func = {"phaselock": sg_smooth, "fourier": fourier_lowpass, "wavelet": wavelet_denoise}[method]
    out = map_rows(lambda block: func(block, params), cube.pixels.astype(np.float64), n_jobs)
    return HyperCube.from_pixels(out, cube.rows, cube.cols, cube.wavelengths)


@dataclass(frozen=True)
class FilterRow:
    method: str
    params: str
    full_cosine: float
    full_rmse: float
    selected_cosine: float
    selected_rmse: float
    retained_bands: int
    mean_snr_db: float


@dataclass(frozen=True)
class FilterReport:
    rows: tuple
    threshold_db: float
    k: int
    seed: int

    def by_method(self, method):
        return next(r for r in self.rows if r.method == method)


def _unmix_and_match(cube, reference, kmeans):
    endmembers = kmeans_endmembers(l2_normalize_rows(cube.pixels), kmeans)
    return match_endmembers(endmembers, reference)


def compare_filters(
    cube,
    library,
    methods=METHODS,
    threshold_db=DEFAULT_THRESHOLD_DB,
    kmeans=None,
    sg=None,
    fourier=None,
    wavelet=None,
    n_jobs=1,
):
    """Run filter -> (optional SNR selection) -> KMeans -> match for each method.

    Each report row holds the mean matched cosine and RMSE on all bands, the
    same on the SNR-selected bands, the retained band count and the mean
    SNR of the retained bands.
    """
    kmeans = kmeans or KmeansConfig(k=len(library))
    reference = resample_reference(library, wavelengths=cube.wavelengths)
    if reference.n_bands != cube.bands:
        raise ValueError(f"library has {reference.n_bands} bands, cube has {cube.bands}")
    rows = []
    for method in methods:
        params = _method_params(method, sg, fourier, wavelet)
        filtered = filter_cube(cube, method, params, n_jobs)
        full = _unmix_and_match(filtered, reference, kmeans)

        profile = band_snr(filtered)
        mask = select_bands(profile, threshold_db)
        if mask.retained_count >= 1:
            selected = _unmix_and_match(
                apply_mask(filtered, mask), resample_reference(reference, mask), kmeans
            )
            sel_cos, sel_rmse = selected.mean_cosine, selected.mean_rmse
            mean_snr = float(np.mean(profile.snr_db[mask.keep]))
        else:
            sel_cos = sel_rmse = mean_snr = float("nan")
        rows.append(
            FilterRow(
                method,
                _describe(method, params),
                full.mean_cosine,
                full.mean_rmse,
                sel_cos,
                sel_rmse,
                mask.retained_count,
                mean_snr,
            )
        )
    return FilterReport(tuple(rows), float(threshold_db), kmeans.k, kmeans.seed)


def write_filter_report(report, path):
    fields = [
        "method",
        "params",
        "full_cosine",
        "full_rmse",
        "selected_cosine",
        "selected_rmse",
        "retained_bands",
        "mean_snr_db",
    ]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in report.rows:
            values = [getattr(row, f) for f in fields]
            writer.writerow([repr(v) if isinstance(v, float) else v for v in values])


class FourierLowpassFilter(TransformerMixin, BaseEstimator):
    """Per-spectrum FFT low-pass; see :func:`fourier_lowpass`."""

    def __init__(self, keep_fraction=0.25):
        self.keep_fraction = keep_fraction

    def fit(self, X, y=None):
        self.params_ = FourierParams(self.keep_fraction)
        X2, _ = as_cube_array(X)
        self.n_features_in_ = check_spectra(X2, min_bands=2).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X2, spatial = as_cube_array(X)
        out = fourier_lowpass(check_spectra(X2), self.params_)
        return out if spatial is None else out.reshape(*spatial, -1)


class HaarWaveletDenoiser(TransformerMixin, BaseEstimator):
    """Per-spectrum Haar soft-threshold denoiser; see :func:`wavelet_denoise`."""

    def __init__(self, levels=3, threshold_scale=1.0):
        self.levels = levels
        self.threshold_scale = threshold_scale

    def fit(self, X, y=None):
        self.params_ = WaveletParams(self.levels, self.threshold_scale)
        X2, _ = as_cube_array(X)
        self.n_features_in_ = check_spectra(X2, min_bands=2**self.params_.levels).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X2, spatial = as_cube_array(X)
        out = wavelet_denoise(check_spectra(X2), self.params_)
        return out if spatial is None else out.reshape(*spatial, -1)
