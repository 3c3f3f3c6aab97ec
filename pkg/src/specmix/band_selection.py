"""Band-wise SNR over all pixels and threshold-based band retention."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import CubeFormatError, as_cube_array, check_spectra
from .io import HyperCube

__all__ = [
    "SNR_CAP_DB",
    "SNR_FLOOR_DB",
    "DEFAULT_THRESHOLD_DB",
    "SnrProfile",
    "BandMask",
    "band_snr",
    "select_bands",
    "apply_mask",
    "write_mask",
    "read_mask",
    "write_snr_profile",
    "read_snr_profile",
    "SNRBandSelector",
]

SNR_CAP_DB = 120.0
SNR_FLOOR_DB = -120.0
DEFAULT_THRESHOLD_DB = 15.0


@dataclass(frozen=True, eq=False)
class SnrProfile:
    """Per-band mean, population standard deviation and SNR in dB."""

    mean: np.ndarray
    std: np.ndarray
    snr_db: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, k), dtype=np.float64) for k in ("mean", "std", "snr_db")]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("mean, std and snr_db must be 1-D arrays of equal length")
        if np.any(arrays[1] < 0):
            raise ValueError("std must be non-negative")
        for key, arr in zip(("mean", "std", "snr_db"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def bands(self):
        return self.snr_db.size


@dataclass(frozen=True, eq=False)
class BandMask:
    """Retained-band indicator and the threshold that produced it."""

    keep: np.ndarray
    threshold_db: float = DEFAULT_THRESHOLD_DB

    def __post_init__(self):
        keep = np.array(self.keep, dtype=bool)
        if keep.ndim != 1:
            raise ValueError("keep must be 1-D")
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)
        object.__setattr__(self, "threshold_db", float(self.threshold_db))

    @property
    def retained_count(self):
        return int(np.count_nonzero(self.keep))

    @property
    def indices(self):
        return np.flatnonzero(self.keep)

    def __len__(self):
        return self.keep.size


def _snr_db(mean, std):
    snr = np.empty_like(mean)
    zero_mean = mean == 0
    zero_std = (std == 0) & ~zero_mean
    regular = ~(zero_mean | zero_std)
    snr[regular] = 10.0 * np.log10(mean[regular] ** 2 / std[regular] ** 2)
    snr[zero_std] = SNR_CAP_DB
    snr[zero_mean] = SNR_FLOOR_DB
    return snr


def band_snr(cube):
    """SNR of every band, statistics taken over all pixels.

    ``mean_b`` is the pixel average of band ``b``; ``std_b`` divides by the
    pixel count N (population convention). ``snr_db = 10 log10(mean^2/std^2)``
    except that a zero-variance band gets ``SNR_CAP_DB`` and a zero-mean band
    gets ``SNR_FLOOR_DB``.
    """
    X = cube.pixels if isinstance(cube, HyperCube) else as_cube_array(cube)[0]
    X = check_spectra(X, name="cube")
    if X.shape[0] < 2:
        raise ValueError(f"band SNR needs at least 2 pixels, got {X.shape[0]}")
    mean = X.mean(axis=0)
    std = np.sqrt(((X - mean) ** 2).mean(axis=0))
    return SnrProfile(mean, std, _snr_db(mean, std))


def select_bands(profile, threshold_db=DEFAULT_THRESHOLD_DB):
    """Keep band ``b`` iff ``snr_db[b] >= threshold_db`` (ties retained)."""
    return BandMask(profile.snr_db >= threshold_db, threshold_db)


def _keep_array(mask):
    return mask.keep if isinstance(mask, BandMask) else np.asarray(mask, dtype=bool)


def apply_mask(cube, mask):
    """Return the cube restricted to retained bands, band order preserved."""
    keep = _keep_array(mask)
    if keep.shape != (cube.bands,):
        raise ValueError(f"mask has {keep.size} entries but cube has {cube.bands} bands")
    if not keep.any():
        raise ValueError("mask retains no bands")
    wl = None if cube.wavelengths is None else cube.wavelengths[keep]
    return HyperCube(cube.data[:, :, keep], wl)


# -- files ------------------------------------------------------------------------


def write_mask(mask, path):
    """One ``0``/``1`` per line, one line per band."""
    keep = _keep_array(mask)
    Path(path).write_text("".join("1\n" if k else "0\n" for k in keep))


def read_mask(path, threshold_db=float("nan")):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mask file not found: {path}")
    keep = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line not in ("0", "1"):
            raise CubeFormatError(f"{path}:{lineno}: mask entries must be 0 or 1, got {line!r}")
        keep.append(line == "1")
    if not keep:
        raise CubeFormatError(f"{path}: empty mask")
    return BandMask(np.array(keep), threshold_db)


def write_snr_profile(profile, path):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["band", "mean", "std", "snr_db"])
        for b in range(profile.bands):
            writer.writerow(
                [b, repr(float(profile.mean[b])), repr(float(profile.std[b])), repr(float(profile.snr_db[b]))]
            )


def read_snr_profile(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {k: np.array([float(r[k]) for r in rows]) for k in ("mean", "std", "snr_db")}
    return SnrProfile(**cols)


class SNRBandSelector(SelectorMixin, BaseEstimator):
    """Select bands whose pixel-wise SNR reaches ``threshold_db``.

    Intended to run on smoothed spectra. ``fit`` accepts ``(n_pixels, n_bands)``
    or ``(rows, cols, n_bands)``; ``transform`` keeps the input's leading shape.

    Attributes
    ----------
    profile_ : SnrProfile
    mask_ : BandMask
    """

    def __init__(self, threshold_db=DEFAULT_THRESHOLD_DB):
        self.threshold_db = threshold_db

    def fit(self, X, y=None):
        X2, _ = as_cube_array(X)
        X2 = check_spectra(X2, min_samples=2)
        self.n_features_in_ = X2.shape[1]
        self.profile_ = band_snr(X2)
        self.mask_ = select_bands(self.profile_, float(self.threshold_db))
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "mask_")
        return np.array(self.mask_.keep)

    def transform(self, X):
        check_is_fitted(self, "mask_")
        X2, spatial = as_cube_array(X)
        X2 = check_spectra(X2)
        if X2.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X2.shape[1]} bands, expected {self.n_features_in_}")
        if self.mask_.retained_count == 0:
            raise ValueError(f"no band reaches {self.threshold_db} dB")
        out = X2[:, self.mask_.keep]
        return out if spatial is None else out.reshape(*spatial, -1)
