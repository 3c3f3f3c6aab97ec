"""Synthetic linear-mixture cubes with known endmembers and abundances."""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_seed
from .io import AbundanceCube, HyperCube

__all__ = ["SynthConfig", "SynthTruth", "generate", "make_endmembers", "junk_band_indices"]

ABUNDANCE_MODES = ("one-hot-regions", "dirichlet")
# Junk bands are zero-mean noise with this std relative to the mean
# reflectance of a unit-norm spectrum (1/sqrt(bands)).
JUNK_RELATIVE_STD = 0.27
MAX_JUNK_RUNS = 3
MAX_PAIRWISE_COSINE = 0.997


@dataclass(frozen=True)
class SynthConfig:
    rows: int = 64
    cols: int = 64
    bands: int = 100
    k: int = 4
    noise_sigma: float = 0.005
    abundance_mode: str = "one-hot-regions"
    dirichlet_alpha: float = 1.0
    seed: int = 0
    junk_band_fraction: float = 0.0

    def __post_init__(self):
        check_int(self.rows, "rows", minimum=1)
        check_int(self.cols, "cols", minimum=1)
        check_int(self.bands, "bands", minimum=2)
        check_int(self.k, "k", minimum=1)
        check_seed(self.seed)
        if self.k > self.rows * self.cols:
            raise ValueError(f"k={self.k} exceeds the pixel count {self.rows * self.cols}")
        if not self.noise_sigma >= 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.abundance_mode not in ABUNDANCE_MODES:
            raise ValueError(f"abundance_mode must be one of {ABUNDANCE_MODES}, got {self.abundance_mode!r}")
        if not self.dirichlet_alpha > 0:
            raise ValueError(f"dirichlet_alpha must be > 0, got {self.dirichlet_alpha}")
        if not 0 <= self.junk_band_fraction < 1:
            raise ValueError(f"junk_band_fraction must be in [0, 1), got {self.junk_band_fraction}")
        if self.bands - self.n_junk < 1:
            raise ValueError("junk_band_fraction leaves no clean bands")

    @property
    def n_junk(self):
        return int(round(self.junk_band_fraction * self.bands))


@dataclass(frozen=True, eq=False)
class SynthTruth:
    endmembers: np.ndarray
    abundances: AbundanceCube
    junk_bands: frozenset

    @property
    def clean_bands(self):
        return np.array([b for b in range(self.endmembers.shape[1]) if b not in self.junk_bands])


def _endmember_shape(t, rng):
    base = 1.0 + rng.uniform(-0.15, 0.15) * (t - 0.5)
    n_bumps = int(rng.integers(2, 5))
    centers = rng.uniform(0.05, 0.95, n_bumps)
    widths = rng.uniform(0.04, 0.08, n_bumps)
    heights = rng.uniform(0.05, 0.15, n_bumps) * rng.choice([-1.0, 1.0], n_bumps)
    bumps = heights[:, None] * np.exp(-0.5 * ((t[None, :] - centers[:, None]) / widths[:, None]) ** 2)
    spectrum = np.maximum(base + bumps.sum(axis=0), 0.05)
    return spectrum / np.linalg.norm(spectrum)


def make_endmembers(k, bands, rng, max_cosine=MAX_PAIRWISE_COSINE, max_tries=200):
    """Smooth positive unit-norm spectra: sloped baseline plus 2-4 Gaussian bumps.

    Bumps are shallow (at most 15% of the baseline) so every band keeps a
    high mean-to-spread ratio across endmembers. Each new endmember is
    redrawn until its cosine with the earlier ones is at most
    ``max_cosine``; after ``max_tries`` the least similar draw is kept.
    """
    t = np.linspace(0.0, 1.0, bands)
    spectra = np.empty((k, bands))
    for j in range(k):
        best, best_cos = None, np.inf
        for _ in range(max_tries):
            cand = _endmember_shape(t, rng)
            worst = float(np.max(spectra[:j] @ cand, initial=-1.0))
            if worst < best_cos:
                best, best_cos = cand, worst
            if worst <= max_cosine:
                break
        spectra[j] = best
    return spectra


def junk_band_indices(n_junk, bands, rng):
    """Place ``n_junk`` bands as up to three contiguous runs, one per band segment."""
    if n_junk == 0:
        return np.array([], dtype=int)
    n_runs = min(MAX_JUNK_RUNS, n_junk)
    lengths = [n_junk // n_runs + (1 if r < n_junk % n_runs else 0) for r in range(n_runs)]
    edges = np.linspace(0, bands, n_runs + 1).astype(int)
    junk = []
    for r, length in enumerate(lengths):
        lo, hi = edges[r], edges[r + 1]
        if hi - lo < length:
            raise ValueError("junk_band_fraction too large for contiguous placement")
        start = lo + int(rng.integers(0, hi - lo - length + 1))
        junk.extend(range(start, start + length))
    return np.array(junk, dtype=int)


def _one_hot_regions(rows, cols, k):
    labels = (np.arange(rows * cols) * k) // (rows * cols)
    return np.eye(k)[labels]


def generate(config=None):
    """Return ``(cube, truth)`` for ``config``; identical seeds give identical cubes.

    Each pixel is ``sum_j abundance_j * endmember_j`` plus N(0, noise_sigma)
    noise, clipped at zero. Junk bands are then overwritten with zero-mean
    Gaussian noise. All draws come from one PCG64 generator in a fixed
    order: endmembers, abundances, pixel noise, junk placement, junk values.
    """
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    E = make_endmembers(config.k, config.bands, rng)
    N = config.rows * config.cols

    if config.abundance_mode == "one-hot-regions":
        A = _one_hot_regions(config.rows, config.cols, config.k)
    else:
        A = rng.dirichlet(np.full(config.k, config.dirichlet_alpha), size=N)

    X = A @ E
    if config.noise_sigma > 0:
        X = np.maximum(X + config.noise_sigma * rng.standard_normal(X.shape), 0.0)

    junk = junk_band_indices(config.n_junk, config.bands, rng)
    if junk.size:
        junk_std = JUNK_RELATIVE_STD / math.sqrt(config.bands)
        X[:, junk] = junk_std * rng.standard_normal((N, junk.size))

    cube = HyperCube.from_pixels(X, config.rows, config.cols)
    truth = SynthTruth(
        endmembers=E,
        abundances=AbundanceCube(A.reshape(config.rows, config.cols, config.k)),
        junk_bands=frozenset(int(b) for b in junk),
    )
    return cube, truth
