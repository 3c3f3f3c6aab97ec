"""Similarity between extracted endmembers and reference spectra."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import check_spectrum
from .band_selection import BandMask
from .io import SpectralLibrary
from .unmixing import EndmemberSet, l2_normalize

__all__ = [
    "MatchPair",
    "MatchReport",
    "cosine_similarity",
    "rmse",
    "cosine_matrix",
    "match_endmembers",
    "resample_reference",
    "write_match_report",
]


def cosine_similarity(a, b):
    """``<a, b> / (|a| |b|)``, clamped to [-1, 1]."""
    a = check_spectrum(a, "a")
    b = check_spectrum(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero-norm spectrum")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def rmse(a, b):
    a = check_spectrum(a, "a")
    b = check_spectrum(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def cosine_matrix(A, B):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine similarity is undefined for a zero-norm spectrum")
    return np.clip((A @ B.T) / np.outer(na, nb), -1.0, 1.0)


@dataclass(frozen=True)
class MatchPair:
    custom_index: int
    custom_name: str
    reference_name: str | None
    cosine: float
    rmse: float


@dataclass(frozen=True)
class MatchReport:
    """Optimal one-to-one pairing of endmembers with reference spectra.

    Endmembers left without a partner (more endmembers than references)
    carry ``reference_name=None`` and NaN metrics, and are excluded from the
    means.
    """

    pairs: tuple

    @property
    def assigned(self):
        return tuple(p for p in self.pairs if p.reference_name is not None)

    @property
    def mean_cosine(self):
        vals = [p.cosine for p in self.assigned]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_rmse(self):
        vals = [p.rmse for p in self.assigned]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def total_cosine(self):
        return float(sum(p.cosine for p in self.assigned))


def match_endmembers(custom, reference, normalize_before_rmse=False):
    """Pair endmembers with references to maximize the summed cosine similarity.

    ``reference`` must already be on the endmembers' band grid (see
    :func:`resample_reference`). RMSE is reported for the chosen pairs, on
    the raw vectors unless ``normalize_before_rmse``.
    """
    if isinstance(custom, EndmemberSet):
        names, C = custom.names, custom.spectra
    else:
        C = np.asarray(custom, dtype=np.float64)
        names = tuple(f"class_{j}" for j in range(C.shape[0]))
    if isinstance(reference, SpectralLibrary):
        ref_names, R = reference.names, reference.spectra
    else:
        R = np.asarray(reference, dtype=np.float64)
        ref_names = tuple(f"ref_{j}" for j in range(R.shape[0]))
    if C.shape[1] != R.shape[1]:
        raise ValueError(f"endmembers have {C.shape[1]} bands, references have {R.shape[1]}")

    S = cosine_matrix(C, R)
    rows, cols = linear_sum_assignment(S, maximize=True)
    partner = dict(zip(rows.tolist(), cols.tolist()))
    pairs = []
    for i in range(C.shape[0]):
        if i not in partner:
            pairs.append(MatchPair(i, names[i], None, float("nan"), float("nan")))
            continue
        j = partner[i]
        a, b = C[i], R[j]
        if normalize_before_rmse:
            a, b = l2_normalize(a), l2_normalize(b)
        pairs.append(MatchPair(i, names[i], ref_names[j], float(S[i, j]), rmse(a, b)))
    return MatchReport(tuple(pairs))


def resample_reference(library, mask=None, wavelengths=None):
    """Bring reference spectra onto the retained-band grid.

    With the same band count as the mask, the retained indices are selected.
    Otherwise library and target ``wavelengths`` are both required and the
    spectra are linearly interpolated.
    """
    keep = None
    if mask is not None:
        keep = mask.keep if isinstance(mask, BandMask) else np.asarray(mask, dtype=bool)
    if keep is not None and keep.size == library.n_bands:
        wl = None if library.wavelengths is None else library.wavelengths[keep]
        return SpectralLibrary(library.names, library.spectra[:, keep], wl)
    if wavelengths is None or library.wavelengths is None:
        if keep is None and (wavelengths is None or len(wavelengths) == library.n_bands):
            return library
        raise ValueError(
            f"library has {library.n_bands} bands; resampling to a different grid needs "
            "wavelengths for both the library and the endmembers"
        )
    target = np.asarray(wavelengths, dtype=np.float64)
    spectra = np.array([np.interp(target, library.wavelengths, s) for s in library.spectra])
    return SpectralLibrary(library.names, spectra, target)


def write_match_report(report, path):
    """CSV with ``class,reference,cosine,rmse`` rows and a final ``mean`` row."""

    def fmt(v):
        return "" if np.isnan(v) else repr(float(v))

    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["class", "reference", "cosine", "rmse"])
        for p in report.pairs:
            writer.writerow([p.custom_name, p.reference_name or "", fmt(p.cosine), fmt(p.rmse)])
        writer.writerow(["mean", "", fmt(report.mean_cosine), fmt(report.mean_rmse)])
