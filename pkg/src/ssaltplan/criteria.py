"""Preposterior design criteria and grid-based optimal design search.

A candidate design is scored by simulating datasets from pre-fixed
generating parameters, sampling each posterior, and averaging the
posterior variance of the use-stress quantile (criterion 1) or of its log
(criterion 2).  The raw grid values are noisy, so a standard-normal-kernel
Nadaraya-Watson smoother with bandwidth equal to the grid spacing is laid
over them and the optimum is read off a fine grid, ties resolving toward
the smaller coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CriterionError
from .mcmc import SamplerConfig, sample_with_refit
from .model import DesignSpec, ModelParams, StressFrame
from .priors import GammaPrior
from .simulate import RngSeed, derive, simulate_dataset
from ._parallel import run_indexed

__all__ = [
    "CriterionPoint",
    "CriterionSurface",
    "criterion_at",
    "smooth_1d",
    "smooth_2d",
    "optimise_1d",
    "optimise_2d",
]

_TAG_REPLICATE = 0x524550
_TAG_GRID = 0x475244

FINE_GRID_1D = 500
FINE_GRID_TAU = 100
FINE_GRID_X1 = 50


@dataclass(frozen=True)
class CriterionPoint:
    """Raw Monte Carlo criterion values at one design-grid point."""

    x1: float
    tau: float
    c1_raw: float
    c2_raw: float
    n_used: int
    n_discarded: int

    @property
    def missing(self) -> bool:
        return self.n_used == 0


@dataclass(frozen=True)
class Optimum:
    criterion: str
    x1: float | None
    tau: float
    value: float


@dataclass(frozen=True)
class CriterionSurface:
    """Raw grid plus the smoothed evaluator and located optima.

    One-dimensional scans have ``x1_grid`` None and a fixed ``x1``.
    """

    points: tuple
    tau_grid: np.ndarray
    h_tau: float
    x1_grid: np.ndarray | None
    h_x1: float | None
    optima: dict

    def raw_matrix(self, criterion: str) -> np.ndarray:
        """Raw values shaped (len(x1_grid) or 1, len(tau_grid)); NaN where
        a grid point is missing."""
        vals = np.array(
            [getattr(p, f"{criterion}_raw") if not p.missing else np.nan
             for p in self.points]
        )
        n_tau = len(self.tau_grid)
        return vals.reshape(-1, n_tau)

    def smoothed(self, criterion: str, tau, x1=None):
        mat = self.raw_matrix(criterion)
        if self.x1_grid is None:
            return smooth_1d(self.tau_grid, mat[0], self.h_tau, tau)
        if x1 is None:
            raise ValueError("two-dimensional surface needs an x1 query")
        return smooth_2d(
            self.x1_grid, self.tau_grid, mat, self.h_x1, self.h_tau, x1, tau
        )


def _gauss(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def smooth_1d(grid: np.ndarray, values: np.ndarray, h: float, query):
    """Kernel-weighted average of the raw curve at the query point(s).

    NaN entries (grid points whose replicates were all discarded) drop out
    of both sums.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = ~np.isnan(values)
    if not np.any(keep):
        raise CriterionError("no usable grid points to smooth")
    g, v = grid[keep], values[keep]
    q = np.atleast_1d(np.asarray(query, dtype=float))
    w = _gauss((q[:, None] - g[None, :]) / h)
    out = (w * v).sum(axis=1) / w.sum(axis=1)
    return float(out[0]) if np.isscalar(query) or np.ndim(query) == 0 else out


def smooth_2d(x1_grid, tau_grid, values, h_x1: float, h_tau: float, x1_query, tau_query):
    """Product-kernel smoother over the (x1, tau) design grid.

    ``values`` is shaped (len(x1_grid), len(tau_grid)); queries broadcast.
    """
    x1_grid = np.asarray(x1_grid, dtype=float)
    tau_grid = np.asarray(tau_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = ~np.isnan(values)
    if not np.any(keep):
        raise CriterionError("no usable grid points to smooth")
    xq = np.atleast_1d(np.asarray(x1_query, dtype=float))
    tq = np.atleast_1d(np.asarray(tau_query, dtype=float))
    if xq.shape != tq.shape:
        xq, tq = np.broadcast_arrays(xq, tq)
    wx = _gauss((xq.ravel()[:, None] - x1_grid[None, :]) / h_x1)
    wt = _gauss((tq.ravel()[:, None] - tau_grid[None, :]) / h_tau)
    w = wx[:, :, None] * wt[:, None, :]
    w = np.where(keep[None, :, :], w, 0.0)
    num = (w * np.where(keep, values, 0.0)[None, :, :]).sum(axis=(1, 2))
    den = w.sum(axis=(1, 2))
    out = num / den
    scalar = np.ndim(x1_query) == 0 and np.ndim(tau_query) == 0
    return float(out[0]) if scalar else out.reshape(xq.shape)


def _replicate(truth_arr, design, prior, p, config, seed):
    """One Monte Carlo replicate: simulate, sample, read both variances."""
    data = simulate_dataset(ModelParams.from_array(truth_arr), design, seed)
    draws, _, status = sample_with_refit(data, prior, p, replace(config, seed=seed))
    if status == "discarded":
        return None
    var_tp = float(np.var(draws.pooled("t_p"), ddof=1))
    var_log = float(np.var(draws.pooled("log_t_p"), ddof=1))
    return var_tp, var_log


def criterion_at(design: DesignSpec, prior: GammaPrior, truth: ModelParams,
                 p: float, B: int, config: SamplerConfig, seed: RngSeed,
                 n_jobs: int = 1) -> CriterionPoint:
    """Monte Carlo preposterior variances at one design.

    Replicates whose sampler run is discarded by the diagnostic gate are
    dropped from the average (no regeneration); an all-discarded point is
    an error so the smoother can skip it.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    args = [
        (truth.as_array(), design, prior, p, config, derive(seed, _TAG_REPLICATE, b))
        for b in range(B)
    ]
    results = run_indexed(_replicate, args, n_jobs)
    kept = [r for r in results if r is not None]
    n_used = len(kept)
    if n_used == 0:
        raise CriterionError(
            f"all {B} replicates were discarded at design tau={design.tau}, "
            f"x1={design.x1:.3f}"
        )
    arr = np.asarray(kept)
    return CriterionPoint(
        x1=design.x1,
        tau=design.tau,
        c1_raw=float(arr[:, 0].mean()),
        c2_raw=float(arr[:, 1].mean()),
        n_used=n_used,
        n_discarded=B - n_used,
    )


def _criterion_point_safe(design, prior, truth, p, B, config, seed):
    """criterion_at, flattened for the grid scheduler; missing on error."""
    try:
        return criterion_at(design, prior, truth, p, B, config, seed)
    except CriterionError:
        return CriterionPoint(
            x1=design.x1, tau=design.tau, c1_raw=np.nan, c2_raw=np.nan,
            n_used=0, n_discarded=B,
        )


def _scan_grid(designs, prior, truth, p, B, config, seed, n_jobs):
    """Evaluate all (grid point, replicate) work items, grouped by point."""
    tasks = []
    for k, design in enumerate(designs):
        for b in range(B):
            tasks.append(
                (truth.as_array(), design, prior, p, config,
                 derive(seed, _TAG_GRID, k, _TAG_REPLICATE, b))
            )
    flat = run_indexed(_replicate, tasks, n_jobs)
    points = []
    for k, design in enumerate(designs):
        kept = [r for r in flat[k * B : (k + 1) * B] if r is not None]
        if kept:
            arr = np.asarray(kept)
            points.append(CriterionPoint(
                x1=design.x1, tau=design.tau,
                c1_raw=float(arr[:, 0].mean()), c2_raw=float(arr[:, 1].mean()),
                n_used=len(kept), n_discarded=B - len(kept),
            ))
        else:
            points.append(CriterionPoint(
                x1=design.x1, tau=design.tau, c1_raw=np.nan, c2_raw=np.nan,
                n_used=0, n_discarded=B,
            ))
    return points


def _minimise_curve(tau_fine, values):
    # argmin takes the first minimum, i.e. the smallest tau on ties
    idx = int(np.argmin(values))
    return tau_fine[idx], float(values[idx])


def optimise_1d(frame: StressFrame, tc: float, n: int, tau_range, m1: int,
                prior: GammaPrior, truth: ModelParams, p: float, B: int,
                config: SamplerConfig, seed: RngSeed, n_jobs: int = 1,
                raw_points=None):
    """Optimal stress-change time for a fixed lower stress.

    Evaluates the criteria on ``m1`` equally spaced grid points spanning
    ``tau_range`` (chosen interior to (0, tc)), smooths both curves, and
    minimises them on a 500-point fine grid.  ``raw_points`` injects
    precomputed grid values, bypassing the Monte Carlo stage (used for
    smoother verification).

    Returns ``(optima, surface)`` with optima keyed "c1"/"c2".
    """
    tau_lo, tau_hi = float(tau_range[0]), float(tau_range[1])
    if not (0.0 < tau_lo <= tau_hi < tc):
        raise ValueError("tau range must be interior to (0, tc)")
    if m1 < 1:
        raise ValueError("m1 must be at least 1")
    tau_grid = np.linspace(tau_lo, tau_hi, m1)
    h = (tau_hi - tau_lo) / (m1 - 1) if m1 > 1 else 1.0
    if raw_points is None:
        designs = [DesignSpec(frame=frame, tau=float(t), tc=tc, n=n) for t in tau_grid]
        points = _scan_grid(designs, prior, truth, p, B, config, seed, n_jobs)
    else:
        points = list(raw_points)
        if len(points) != m1:
            raise ValueError("raw_points must match the grid size")

    optima = {}
    if m1 == 1:
        for crit in ("c1", "c2"):
            val = getattr(points[0], f"{crit}_raw")
            optima[crit] = Optimum(criterion=crit, x1=None,
                                   tau=float(tau_grid[0]), value=float(val))
        surface = CriterionSurface(points=tuple(points), tau_grid=tau_grid,
                                   h_tau=h, x1_grid=None, h_x1=None, optima=optima)
        return optima, surface

    tau_fine = np.linspace(tau_lo, tau_hi, FINE_GRID_1D)
    for crit in ("c1", "c2"):
        raw = np.array([getattr(pt, f"{crit}_raw") if not pt.missing else np.nan
                        for pt in points])
        smooth = smooth_1d(tau_grid, raw, h, tau_fine)
        tau_opt, val = _minimise_curve(tau_fine, smooth)
        optima[crit] = Optimum(criterion=crit, x1=None, tau=float(tau_opt), value=val)
    surface = CriterionSurface(points=tuple(points), tau_grid=tau_grid, h_tau=h,
                               x1_grid=None, h_x1=None, optima=optima)
    return optima, surface


def optimise_2d(frame_for_x1, s1_values, tc: float, n: int, tau_range, m1: int,
                prior: GammaPrior, truth: ModelParams, p: float, B: int,
                config: SamplerConfig, seed: RngSeed, n_jobs: int = 1,
                raw_matrix=None):
    """Joint optimum over lower stress and stress-change time.

    ``s1_values`` are inverse-Kelvin levels interior to (s2, s0); each
    yields one row of the raw surface.  The smoothed surface is minimised
    on a 100 x 50 (tau x x1) fine grid, ties toward smaller x1 then tau.
    """
    tau_lo, tau_hi = float(tau_range[0]), float(tau_range[1])
    if not (0.0 < tau_lo <= tau_hi < tc):
        raise ValueError("tau range must be interior to (0, tc)")
    s1_values = list(s1_values)
    frames = [StressFrame(frame_for_x1.s0, float(s1), frame_for_x1.s2)
              for s1 in s1_values]
    x1_grid = np.array([f.x1 for f in frames])
    if np.any(np.diff(x1_grid) <= 0):
        raise ValueError("s1 grid must be strictly ordered in x1")
    tau_grid = np.linspace(tau_lo, tau_hi, m1)
    m2 = len(frames)
    h_tau = (tau_hi - tau_lo) / (m1 - 1) if m1 > 1 else 1.0
    h_x1 = (x1_grid[-1] - x1_grid[0]) / (m2 - 1) if m2 > 1 else 1.0

    if raw_matrix is None:
        designs = [DesignSpec(frame=f, tau=float(t), tc=tc, n=n)
                   for f in frames for t in tau_grid]
        points = _scan_grid(designs, prior, truth, p, B, config, seed, n_jobs)
    else:
        raw_matrix = np.asarray(raw_matrix, dtype=float)
        if raw_matrix.shape != (m2, m1, 2):
            raise ValueError("raw_matrix must have shape (m2, m1, 2)")
        points = [
            CriterionPoint(x1=float(x1_grid[i]), tau=float(tau_grid[j]),
                           c1_raw=float(raw_matrix[i, j, 0]),
                           c2_raw=float(raw_matrix[i, j, 1]),
                           n_used=1, n_discarded=0)
            for i in range(m2) for j in range(m1)
        ]

    optima = {}
    single = m1 == 1 and m2 == 1
    if single:
        for crit in ("c1", "c2"):
            optima[crit] = Optimum(criterion=crit, x1=float(x1_grid[0]),
                                   tau=float(tau_grid[0]),
                                   value=float(getattr(points[0], f"{crit}_raw")))
    else:
        tau_fine = np.linspace(tau_lo, tau_hi, FINE_GRID_TAU)
        x1_fine = np.linspace(x1_grid[0], x1_grid[-1], FINE_GRID_X1)
        xq, tq = np.meshgrid(x1_fine, tau_fine, indexing="ij")
        for crit in ("c1", "c2"):
            vals = np.array([getattr(pt, f"{crit}_raw") if not pt.missing else np.nan
                             for pt in points]).reshape(m2, m1)
            sm = smooth_2d(x1_grid, tau_grid, vals, h_x1, h_tau, xq, tq)
            # argmin scans x1-major then tau, matching the tie-break order
            idx = int(np.argmin(sm))
            i, j = divmod(idx, tau_fine.size)
            optima[crit] = Optimum(criterion=crit, x1=float(x1_fine[i]),
                                   tau=float(tau_fine[j]), value=float(sm.ravel()[idx]))
    surface = CriterionSurface(points=tuple(points), tau_grid=tau_grid,
                               h_tau=h_tau, x1_grid=x1_grid, h_x1=h_x1,
                               optima=optima)
    return optima, surface
