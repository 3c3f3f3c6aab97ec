"""Savitzky-Golay smoothing of per-pixel spectra."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import map_rows
from ._validation import as_cube_array, check_int, check_spectra, check_spectrum
from .io import HyperCube

__all__ = [
    "SgParams",
    "sg_coefficients",
    "sg_smooth_spectrum",
    "sg_smooth",
    "smooth_cube",
    "SavitzkyGolaySmoother",
]


@dataclass(frozen=True)
class SgParams:
    """Window length (odd, >= 3) and polynomial order (< window)."""

    window: int = 11
    order: int = 3

    def __post_init__(self):
        window = check_int(self.window, "window", minimum=3)
        order = check_int(self.order, "order", minimum=0)
        if window % 2 == 0:
            raise ValueError(f"window must be odd, got {window}")
        if order >= window:
            raise ValueError(f"order must be < window, got order={order}, window={window}")

    @property
    def half(self):
        return self.window // 2


@lru_cache(maxsize=64)
def _coefficients(window, order):
    half = window // 2
    # Positions are scaled to [-1, 1]; the centre weight row is scale-free.
    t = np.arange(-half, half + 1, dtype=np.float64) / half
    A = np.vander(t, order + 1, increasing=True)
    e0 = np.zeros(order + 1)
    e0[0] = 1.0
    z = np.linalg.solve(A.T @ A, e0)
    coeffs = A @ z
    coeffs = 0.5 * (coeffs + coeffs[::-1])
    coeffs.setflags(write=False)
    return coeffs


def sg_coefficients(params):
    """Weights that evaluate the windowed least-squares polynomial at the centre.

    Obtained by solving the (order+1)-square normal equations of the
    window x (order+1) Vandermonde design; cached per (window, order).

    >>> np.round(sg_coefficients(SgParams(5, 2)) * 35, 12)
    array([-3., 12., 17., 12., -3.])
    """
    if not isinstance(params, SgParams):
        params = SgParams(*params)
    return _coefficients(params.window, params.order)


def sg_smooth(X, params):
    """Smooth every row of ``X`` (n_spectra, n_bands) with mirror-reflected edges."""
    if not isinstance(params, SgParams):
        params = SgParams(*params)
    X = np.asarray(X, dtype=np.float64)
    n_bands = X.shape[-1]
    if n_bands < params.window:
        raise ValueError(f"spectrum has {n_bands} bands, fewer than window={params.window}")
    coeffs = sg_coefficients(params)
    h = params.half
    pad = [(0, 0)] * (X.ndim - 1) + [(h, h)]
    padded = np.pad(X, pad, mode="reflect")
    # Tap-by-tap accumulation keeps every output sample independent of batch size.
    out = coeffs[0] * padded[..., 0:n_bands]
    for j in range(1, params.window):
        out += coeffs[j] * padded[..., j : j + n_bands]
    return out


def sg_smooth_spectrum(spectrum, params):
    """Smooth one spectrum; output has the same length as the input."""
    spectrum = check_spectrum(spectrum)
    return sg_smooth(spectrum, params)


def smooth_cube(cube, params, n_jobs=1):
    """Smooth each pixel spectrum of ``cube`` independently."""
    if not isinstance(params, SgParams):
        params = SgParams(*params)
    smoothed = map_rows(lambda block: sg_smooth(block, params), cube.pixels, n_jobs)
    return HyperCube.from_pixels(smoothed, cube.rows, cube.cols, cube.wavelengths)


class SavitzkyGolaySmoother(TransformerMixin, BaseEstimator):
    """Per-spectrum Savitzky-Golay smoother.

    Accepts ``(n_pixels, n_bands)`` or ``(rows, cols, n_bands)`` arrays and
    returns the same shape. Fitting only validates parameters.

    Parameters
    ----------
    window : int, default=11
        Number of taps; odd and at least 3.
    order : int, default=3
        Polynomial degree, smaller than ``window``.
    n_jobs : int, default=1
        Threads used for the per-pixel loop. Results do not depend on it.
    """

    def __init__(self, window=11, order=3, n_jobs=1):
        self.window = window
        self.order = order
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self.params_ = SgParams(self.window, self.order)
        X2, _ = as_cube_array(X)
        X2 = check_spectra(X2, min_bands=self.params_.window)
        self.n_features_in_ = X2.shape[1]
        self.coef_ = sg_coefficients(self.params_)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X2, spatial = as_cube_array(X)
        X2 = check_spectra(X2)
        if X2.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X2.shape[1]} bands, expected {self.n_features_in_}")
        out = map_rows(lambda block: sg_smooth(block, self.params_), X2, self.n_jobs)
        return out if spatial is None else out.reshape(*spatial, -1)
