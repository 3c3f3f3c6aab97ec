"""Row-chunked thread parallelism for per-pixel stages."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def map_rows(func, X, n_jobs=1, min_chunk=256):
    """Apply ``func`` to row blocks of ``X`` and stack the results.

    ``func`` must treat rows independently, so the output does not depend
    on how rows are split across threads.
    """
    n_jobs = 1 if n_jobs is None else int(n_jobs)
    if n_jobs < 1:
        raise ValueError(f"n_jobs must be >= 1, got {n_jobs}")
    n = X.shape[0]
    if n_jobs == 1 or n <= min_chunk:
        return func(X)
    n_chunks = min(n_jobs * 4, max(1, n // min_chunk))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    blocks = [X[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        results = list(pool.map(func, blocks))
    return np.concatenate(results, axis=0)
