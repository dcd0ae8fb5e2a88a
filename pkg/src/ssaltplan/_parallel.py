"""Deterministic work scheduling for bootstrap replicates and grid scans.

Work items are indexed and seeded independently, results are collected in
index order, so the outcome is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .errors import NonIdentifiableError
from .simulate import RngSeed, derive

__all__ = ["run_indexed", "collect_first_valid"]


def run_indexed(fn, args_list, n_jobs: int = 1):
    """Apply ``fn`` to every argument tuple, preserving list order."""
    if n_jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    out = [None] * len(args_list)
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        futures = {pool.submit(fn, *a): i for i, a in enumerate(args_list)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out


def collect_first_valid(fn, common_args: tuple, n_needed: int, seed: RngSeed,
                        tag: int, n_jobs: int = 1, max_consecutive: int | None = None):
    """First ``n_needed`` non-None results of ``fn(*common_args, seed_i)``.

    Attempt i gets the derived seed (tag, i); invalid attempts are skipped
    and replaced by later ones.  Raises once ``max_consecutive`` attempts
    in a row come back invalid.
    """
    if max_consecutive is None:
        max_consecutive = 10 * n_needed
    results = []
    consecutive = 0
    next_idx = 0
    while len(results) < n_needed:
        wave = n_needed - len(results)
        if n_jobs > 1:
            wave = max(wave, 4 * n_jobs)
        args = [common_args + (derive(seed, tag, i),)
                for i in range(next_idx, next_idx + wave)]
        for res in run_indexed(fn, args, n_jobs):
            if res is None:
                consecutive += 1
                if consecutive >= max_consecutive:
                    raise NonIdentifiableError(
                        f"{consecutive} consecutive bootstrap replicates were "
                        "degenerate (a cause-stress cell with no failures)"
                    )
            else:
                consecutive = 0
                if len(results) < n_needed:
                    results.append(res)
        next_idx += wave
    return results
