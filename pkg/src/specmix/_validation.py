"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class SpecmixError(Exception):
    """Base class for errors raised by specmix."""


class CubeFormatError(SpecmixError, ValueError):
    """A cube, library, or mask file is malformed."""


class ConvergenceError(SpecmixError, RuntimeError):
    """An iterative solver hit its iteration cap."""


def check_spectra(X, name="X", min_samples=1, min_bands=1):
    """Return ``X`` as a finite float64 array of shape (n_samples, n_bands)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (n_samples, n_bands), got shape {X.shape}")
    if X.shape[0] < min_samples:
        raise ValueError(f"{name} needs at least {min_samples} samples, got {X.shape[0]}")
    if X.shape[1] < min_bands:
        raise ValueError(f"{name} needs at least {min_bands} bands, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"{name} contains non-finite value at sample {bad[0]}, band {bad[1]}")
    return X


def check_spectrum(x, name="spectrum", min_length=1):
    """Return ``x`` as a finite 1-D float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if x.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_seed(seed, name="seed"):
    """Seeds must be explicit non-negative integers so runs replay exactly."""
    seed = check_int(seed, name, minimum=0)
    if seed >= 2**64:
        raise ValueError(f"{name} must fit in 64 bits, got {seed}")
    return seed


def as_cube_array(X):
    """Accept (rows, cols, bands) or (n_pixels, n_bands); return 2-D view and the spatial shape."""
    X = np.asarray(X)
    if X.ndim == 3:
        return X.reshape(-1, X.shape[2]), X.shape[:2]
    if X.ndim == 2:
        return X, None
    raise ValueError(f"expected a 2-D or 3-D array, got shape {X.shape}")
