"""Endmember extraction by seeded KMeans and per-pixel NNLS abundances.

Pixels are L2-normalized before clustering and before unmixing. Abundances
are only constrained to be non-negative; they are not forced to sum to one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import map_rows
from ._validation import (
    ConvergenceError,
    as_cube_array,
    check_int,
    check_seed,
    check_spectra,
)
from .io import AbundanceCube, SpectralLibrary

__all__ = [
    "NORM_EPS",
    "EndmemberSet",
    "KmeansConfig",
    "NnlsSolution",
    "l2_normalize",
    "l2_normalize_rows",
    "kmeans_endmembers",
    "nnls_solve",
    "nnls_gram",
    "kkt_tolerance",
    "unmix_pixels",
    "unmix_cube",
    "KMeansEndmembers",
    "NNLSUnmixer",
]

NORM_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class EndmemberSet:
    """``k`` endmember spectra stored as rows of a (k, bands) matrix."""

    spectra: np.ndarray
    names: tuple = field(default=())
    wavelengths: np.ndarray | None = None

    def __post_init__(self):
        spectra = np.array(self.spectra, dtype=np.float64)
        if spectra.ndim != 2 or spectra.shape[0] < 1:
            raise ValueError(f"endmembers must be a non-empty (k, bands) matrix, got {spectra.shape}")
        if not np.all(np.isfinite(spectra)):
            raise ValueError("endmembers contain non-finite values")
        zero = np.flatnonzero(~np.any(spectra != 0, axis=1))
        if zero.size:
            raise ValueError(f"endmember row {zero[0]} is all zeros")
        spectra.setflags(write=False)
        object.__setattr__(self, "spectra", spectra)
        names = tuple(self.names) or tuple(f"class_{j}" for j in range(spectra.shape[0]))
        if len(names) != spectra.shape[0]:
            raise ValueError(f"expected {spectra.shape[0]} names, got {len(names)}")
        object.__setattr__(self, "names", names)
        if self.wavelengths is not None:
            wl = np.array(self.wavelengths, dtype=np.float64)
            if wl.shape != (spectra.shape[1],):
                raise ValueError(f"expected {spectra.shape[1]} wavelengths, got {wl.size}")
            object.__setattr__(self, "wavelengths", wl)

    @property
    def k(self):
        return self.spectra.shape[0]

    @property
    def bands(self):
        return self.spectra.shape[1]

    def normalized(self):
        return EndmemberSet(l2_normalize_rows(self.spectra), self.names, self.wavelengths)

    def to_library(self):
        return SpectralLibrary(self.names, self.spectra, self.wavelengths)

    @classmethod
    def from_library(cls, library):
        return cls(library.spectra, library.names, library.wavelengths)


@dataclass(frozen=True)
class KmeansConfig:
    k: int = 12
    seed: int = 0
    max_iters: int = 300
    tol: float = 1e-6
    n_init: int = 10

    def __post_init__(self):
        check_int(self.k, "k", minimum=1)
        check_seed(self.seed)
        check_int(self.max_iters, "max_iters", minimum=1)
        check_int(self.n_init, "n_init", minimum=1)
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True, eq=False)
class NnlsSolution:
    abundance: np.ndarray
    residual_norm: float
    iterations: int


# -- normalization -------------------------------------------------------------


def l2_normalize(spectrum):
    """Scale to unit L2 norm; a vector with norm <= 1e-12 maps to zeros."""
    x = np.asarray(spectrum, dtype=np.float64)
    norm = np.linalg.norm(x)
    if norm <= NORM_EPS:
        return np.zeros_like(x)
    return x / norm


def l2_normalize_rows(X):
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt((X * X).sum(axis=-1, keepdims=True))
    out = np.zeros_like(X)
    ok = norms[..., 0] > NORM_EPS
    out[ok] = X[ok] / norms[ok]
    return out


# -- KMeans --------------------------------------------------------------------------


def _sq_distances(X, centers):
    # Column-by-column so each entry is a plain row reduction (reproducible).
    D = np.empty((X.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        diff = X - c
        D[:, j] = (diff * diff).sum(axis=1)
    return D


def _kmeans_plusplus(X, k, rng):
    """Greedy D^2-weighted seeding; draws come from ``rng`` in a fixed order.

    Each step samples ``2 + floor(ln k)`` candidates and keeps the one that
    most reduces the potential.
    """
    n = X.shape[0]
    n_trials = 2 + int(np.log(k))
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    diff = X - centers[0]
    d2 = (diff * diff).sum(axis=1)
    for i in range(1, k):
        cum = np.cumsum(d2)
        total = cum[-1]
        if total > 0:
            picks = np.searchsorted(cum, rng.random(n_trials) * total, side="right")
            picks = np.minimum(picks, n - 1)
        else:
            picks = rng.integers(n, size=n_trials)
        best, best_d2, best_pot = -1, None, np.inf
        for idx in picks:
            diff = X - X[idx]
            cand = np.minimum(d2, (diff * diff).sum(axis=1))
            pot = cand.sum()
            if pot < best_pot:
                best, best_d2, best_pot = int(idx), cand, pot
        centers[i] = X[best]
        d2 = best_d2
    return centers


def _lloyd(X, k, seed, max_iters, tol, n_init=1):
    """Best of ``n_init`` seeded Lloyd runs by final inertia (first wins ties)."""
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd_single(X, k, rng, max_iters, tol)
        if best is None or run[2] < best[2]:
            best = run
    return best


def _lloyd_single(X, k, rng, max_iters, tol):
    centers = _kmeans_plusplus(X, k, rng)
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        D = _sq_distances(X, centers)
        new_labels = np.argmin(D, axis=1)
        closest = D[np.arange(X.shape[0]), new_labels]
        history.append(float(closest.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels.copy()

        # Empty clusters take the farthest point of a cluster that can spare one;
        # means are computed after, so centroids always match the labels.
        counts = np.bincount(labels, minlength=k)
        far_order = np.argsort(-closest, kind="stable")
        cursor = 0
        for j in np.flatnonzero(counts == 0):
            while counts[labels[far_order[cursor]]] <= 1:
                cursor += 1
            far = far_order[cursor]
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
            cursor += 1
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = X[labels == j].mean(axis=0)
        scale = max(np.linalg.norm(centers), NORM_EPS)
        shift = np.linalg.norm(new_centers - centers) / scale
        centers = new_centers
        if shift <= tol:
            break

    D = _sq_distances(X, centers)
    labels = np.argmin(D, axis=1)
    inertia = float(D[np.arange(X.shape[0]), labels].sum())
    if not history or inertia != history[-1]:
        history.append(inertia)
    return centers, labels, inertia, n_iter, history


def kmeans_endmembers(pixels, config=None):
    """Lloyd's KMeans with k-means++ seeding; centroids become endmembers.

    ``pixels`` should already be L2-normalized. The generator is numpy's
    PCG64 seeded with ``config.seed``, so a given seed and input always give
    the same centroids. A cluster that empties is re-seeded with the point
    farthest from its current centroid.
    """
    config = config or KmeansConfig()
    X = check_spectra(pixels, name="pixels")
    if config.k > X.shape[0]:
        raise ValueError(f"k={config.k} exceeds the number of pixels ({X.shape[0]})")
    centers, *_ = _lloyd(X, config.k, config.seed, config.max_iters, config.tol, config.n_init)
    return EndmemberSet(centers)


# -- NNLS ---------------------------------------------------------------------------------


def kkt_tolerance(Wx):
    return 1e-8 * (1.0 + float(np.max(np.abs(Wx), initial=0.0)))


def _solve_passive(G, c, idx):
    Gp = G[np.ix_(idx, idx)]
    try:
        factor = cho_factor(Gp, lower=True, check_finite=False)
    except LinAlgError:
        return None
    diag = np.abs(np.diag(factor[0]))
    if diag.min() ** 2 <= 1e-13 * np.max(np.diag(Gp)):
        return None
    return cho_solve(factor, c[idx], check_finite=False)


def nnls_gram(G, c, tol=None, max_iter=None):
    """Lawson-Hanson active set on the normal equations ``G a = c``.

    ``G = W W^T`` and ``c = W x`` for endmember rows ``W``; the least-squares
    subproblem on the passive set is solved by Cholesky factorization. A
    passive set that turns out singular drops the index just added.

    Returns ``(a, iterations)``. Raises :class:`ConvergenceError` when
    ``max_iter`` (default ``max(50, 5k)``) inner iterations are exceeded.
    """
    k = c.size
    tol = kkt_tolerance(c) if tol is None else tol
    max_iter = max(50, 5 * k) if max_iter is None else max_iter
    a = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    blocked = np.zeros(k, dtype=bool)
    iterations = 0
    w = c.copy()

    while True:
        candidates = ~passive & ~blocked
        if not candidates.any():
            break
        scores = np.where(candidates, w, -np.inf)
        j = int(np.argmax(scores))
        if scores[j] <= tol:
            break
        passive[j] = True
        first = True
        while True:
            iterations += 1
            if iterations > max_iter:
                raise ConvergenceError(f"NNLS did not converge in {max_iter} iterations")
            idx = np.flatnonzero(passive)
            if idx.size == 0:
                a[:] = 0.0
                break
            s = _solve_passive(G, c, idx)
            if first and (s is None or s[np.searchsorted(idx, j)] <= 0):
                passive[j] = False
                blocked[j] = True
                break
            first = False
            if np.all(s > 0):
                a[:] = 0.0
                a[idx] = s
                blocked[:] = False
                break
            ap = a[idx]
            neg = s <= 0
            ratios = ap[neg] / (ap[neg] - s[neg])
            q = int(np.argmin(ratios))
            alpha = ratios[q]
            a[idx] = ap + alpha * (s - ap)
            a[idx[np.flatnonzero(neg)[q]]] = 0.0
            leaving = idx[a[idx] <= 0]
            a[leaving] = 0.0
            passive[leaving] = False
        w = c - G @ a
    return a, iterations


def nnls_solve(endmembers, pixel, max_iter=None):
    """Minimize ``||x - W^T a||^2`` over ``a >= 0`` for one pixel.

    ``endmembers`` is an :class:`EndmemberSet` or a (k, bands) array ``W``;
    ``pixel`` is used as given (normalize it first for the unmixing model).
    """
    W = endmembers.spectra if isinstance(endmembers, EndmemberSet) else np.asarray(endmembers, float)
    x = np.asarray(pixel, dtype=np.float64)
    if x.shape != (W.shape[1],):
        raise ValueError(f"pixel has {x.size} bands, endmembers have {W.shape[1]}")
    G = W @ W.T
    c = W @ x
    a, iterations = nnls_gram(G, c, max_iter=max_iter)
    residual = float(np.linalg.norm(x - W.T @ a))
    return NnlsSolution(a, residual, iterations)


def unmix_pixels(X, W, n_jobs=1):
    """Normalize each row of ``X`` and solve its NNLS abundances against ``W``."""
    W = np.asarray(W, dtype=np.float64)
    G = W @ W.T

    def solve_block(block):
        Xn = l2_normalize_rows(block)
        out = np.zeros((block.shape[0], W.shape[0]))
        nonzero = np.any(Xn != 0, axis=1)
        for i in np.flatnonzero(nonzero):
            out[i] = nnls_gram(G, W @ Xn[i])[0]
        return out

    return map_rows(solve_block, np.asarray(X, dtype=np.float64), n_jobs)


def unmix_cube(cube, endmembers, n_jobs=1, renormalize_endmembers=False):
    """Per-pixel NNLS abundances for every pixel of ``cube``."""
    if cube.bands != endmembers.bands:
        raise ValueError(f"cube has {cube.bands} bands, endmembers have {endmembers.bands}")
    W = endmembers.normalized().spectra if renormalize_endmembers else endmembers.spectra
    A = unmix_pixels(cube.pixels, W, n_jobs)
    return AbundanceCube(A.reshape(cube.rows, cube.cols, -1), endmembers.names)


# -- estimators -----------------------------------------------------------------------------


class KMeansEndmembers(ClusterMixin, BaseEstimator):
    """Seeded KMeans whose centroids are read as endmember spectra.

    Parameters
    ----------
    n_endmembers : int, default=12
    random_state : int, default=0
        Seed for k-means++ initialization. Must be an explicit integer.
    max_iter : int, default=300
    tol : float, default=1e-6
        Stop once the relative centroid shift falls to this value.
    n_init : int, default=10
        Seeded restarts; the run with the lowest inertia is kept.
    normalize : bool, default=True
        L2-normalize input rows before clustering.

    Attributes
    ----------
    endmembers_ : EndmemberSet
    cluster_centers_ : ndarray of shape (n_endmembers, n_bands)
    labels_, inertia_, n_iter_, inertia_history_
    """

    def __init__(self, n_endmembers=12, random_state=0, max_iter=300, tol=1e-6, n_init=10, normalize=True):
        self.n_endmembers = n_endmembers
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.normalize = normalize

    def _prepare(self, X):
        X2, spatial = as_cube_array(X)
        X2 = check_spectra(X2)
        return (l2_normalize_rows(X2) if self.normalize else X2), spatial

    def fit(self, X, y=None):
        config = KmeansConfig(self.n_endmembers, self.random_state, self.max_iter, self.tol, self.n_init)
        X2, _ = self._prepare(X)
        if config.k > X2.shape[0]:
            raise ValueError(f"n_endmembers={config.k} exceeds the number of pixels ({X2.shape[0]})")
        self.n_features_in_ = X2.shape[1]
        centers, labels, inertia, n_iter, history = _lloyd(
            X2, config.k, config.seed, config.max_iters, config.tol, config.n_init
        )
        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = inertia
        self.n_iter_ = n_iter
        self.inertia_history_ = history
        self.endmembers_ = EndmemberSet(centers)
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X2, spatial = self._prepare(X)
        labels = np.argmin(_sq_distances(X2, self.cluster_centers_), axis=1)
        return labels if spatial is None else labels.reshape(spatial)


class NNLSUnmixer(TransformerMixin, BaseEstimator):
    """Non-negative abundances of each pixel against a set of endmembers.

    When ``endmembers`` is None, ``fit`` extracts them with
    :class:`KMeansEndmembers`. ``transform`` L2-normalizes every pixel and
    returns an array of shape ``(n_pixels, k)`` (or ``(rows, cols, k)``).
    """

    def __init__(
        self,
        n_endmembers=12,
        endmembers=None,
        random_state=0,
        max_iter=300,
        tol=1e-6,
        n_init=10,
        renormalize=False,
        n_jobs=1,
    ):
        self.n_endmembers = n_endmembers
        self.endmembers = endmembers
        self.random_state = random_state
        self.max_iter = max_iter
        self.tol = tol
        self.n_init = n_init
        self.renormalize = renormalize
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X2, _ = as_cube_array(X)
        X2 = check_spectra(X2)
        if self.endmembers is None:
            self.kmeans_ = KMeansEndmembers(
                self.n_endmembers, self.random_state, self.max_iter, self.tol, self.n_init
            ).fit(X2)
            endmembers = self.kmeans_.endmembers_
        elif isinstance(self.endmembers, EndmemberSet):
            endmembers = self.endmembers
        else:
            endmembers = EndmemberSet(self.endmembers)
        if endmembers.bands != X2.shape[1]:
            raise ValueError(f"X has {X2.shape[1]} bands, endmembers have {endmembers.bands}")
        self.endmembers_ = endmembers.normalized() if self.renormalize else endmembers
        self.n_features_in_ = X2.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "endmembers_")
        X2, spatial = as_cube_array(X)
        X2 = check_spectra(X2)
        if X2.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X2.shape[1]} bands, expected {self.n_features_in_}")
        A = unmix_pixels(X2, self.endmembers_.spectra, self.n_jobs)
        return A if spatial is None else A.reshape(*spatial, -1)

    def inverse_transform(self, A):
        """Reconstruct normalized spectra ``A @ W``."""
        check_is_fitted(self, "endmembers_")
        A2, spatial = as_cube_array(A)
        X = np.asarray(A2, dtype=np.float64) @ self.endmembers_.spectra
        return X if spatial is None else X.reshape(*spatial, -1)
