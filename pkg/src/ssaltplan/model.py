"""Step-stress competing-risks lifetime model.

Two independent Weibull failure modes under a simple step-stress experiment:
units start at a lower stress and switch to a higher stress at a fixed
change time ``tau``, with Type-I censoring at ``tc``.  Remaining life after
the switch follows the cumulative-exposure rule, which keeps the lifetime
CDF continuous at the change point.  The Weibull scale of each failure mode
is log-linear in the standardised stress; all times are in hundred-hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SolverError

__all__ = [
    "StressFrame",
    "DesignSpec",
    "ModelParams",
    "Observation",
    "Dataset",
    "standardise_stress",
    "theta",
    "transformed_time",
    "cumulative_exposure",
    "sub_cdf",
    "overall_cdf",
    "use_quantile",
    "use_quantile_many",
]


@dataclass(frozen=True)
class StressFrame:
    """Use / lower / higher stress levels in inverse Kelvin.

    Inverse temperature decreases as temperature rises, so the ordering is
    ``s0 >= s1 > s2 > 0``.  Equality ``s1 == s0`` is allowed: the bundled
    case-study ran its first phase at the use temperature (x1 = 0).
    """

    s0: float
    s1: float
    s2: float

    def __post_init__(self):
        for name in ("s0", "s1", "s2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"StressFrame.{name} must be a finite number")
        if not (self.s0 >= self.s1 > self.s2 > 0.0):
            raise ValueError(
                "stress levels must satisfy s0 >= s1 > s2 > 0 "
                "(temperatures T0 <= T1 < T2)"
            )

    @classmethod
    def from_temperatures(cls, t0: float, t1: float, t2: float) -> "StressFrame":
        """Build a frame from absolute temperatures in Kelvin."""
        if min(t0, t1, t2) <= 0:
            raise ValueError("temperatures must be positive Kelvin")
        return cls(1.0 / t0, 1.0 / t1, 1.0 / t2)

    def standardise(self, s: float) -> float:
        return standardise_stress(s, self)

    @property
    def x1(self) -> float:
        """Standardised lower stress (0 when the first phase runs at use
        temperature, 1 when it runs at the higher test stress)."""
        return self.standardise(self.s1)


def standardise_stress(s, frame: StressFrame):
    """Affine map sending the use stress to 0 and the higher test stress to 1."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("stress must be finite")
    out = (s - frame.s0) / (frame.s2 - frame.s0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DesignSpec:
    """Experiment geometry: stress frame, change time, censoring time, size."""

    frame: StressFrame
    tau: float
    tc: float
    n: int

    def __post_init__(self):
        if not (0.0 < self.tau < self.tc):
            raise ValueError("design requires 0 < tau < tc")
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError("design requires integer n >= 1")

    @property
    def x1(self) -> float:
        return self.frame.x1

    @property
    def x2(self) -> float:
        return self.frame.standardise(self.frame.s2)


@dataclass(frozen=True)
class ModelParams:
    """Natural parameters (a1, b1, beta1, a2, b2, beta2).

    ``a_j`` is the log-scale intercept and ``b_j < 0`` the slope of the
    stress-life line for failure mode j; ``beta_j > 0`` is the Weibull shape.
    """

    a1: float
    b1: float
    beta1: float
    a2: float
    b2: float
    beta2: float

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("model parameters must be finite")
        if not (self.b1 < 0 and self.b2 < 0):
            raise ValueError("slope parameters must satisfy b_j < 0")
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ValueError("shape parameters must satisfy beta_j > 0")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.a1, self.b1, self.beta1, self.a2, self.b2, self.beta2], dtype=float
        )

    @classmethod
    def from_array(cls, v) -> "ModelParams":
        v = np.asarray(v, dtype=float)
        if v.shape != (6,):
            raise ValueError("expected a length-6 parameter vector")
        return cls(*v.tolist())

    def a(self, j: int) -> float:
        return (self.a1, self.a2)[_risk_index(j)]

    def b(self, j: int) -> float:
        return (self.b1, self.b2)[_risk_index(j)]

    def beta(self, j: int) -> float:
        return (self.beta1, self.beta2)[_risk_index(j)]


def _risk_index(j: int) -> int:
    if j not in (1, 2):
        raise ValueError("risk label must be 1 or 2")
    return j - 1


@dataclass(frozen=True)
class Observation:
    """One unit's outcome: failure time and cause (0 = censored)."""

    time: float
    cause: int
    phase: int = 0  # 1 = failed before tau, 2 = at or after; 0 = unset

    def __post_init__(self):
        if self.cause not in (0, 1, 2):
            raise DataError(f"cause must be 0, 1 or 2, got {self.cause!r}")
        if not (math.isfinite(self.time) and self.time > 0):
            raise DataError(f"observation time must be positive, got {self.time!r}")


@dataclass(frozen=True)
class Dataset:
    """Ordered observations tied to the design that produced them."""

    observations: tuple
    design: DesignSpec

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if len(obs) != self.design.n:
            raise DataError(
                f"dataset has {len(obs)} observations but design.n = {self.design.n}"
            )
        tc = self.design.tc
        for i, o in enumerate(obs):
            if o.cause == 0 and not math.isclose(o.time, tc, rel_tol=1e-12):
                raise DataError(f"row {i}: censored observation must carry time = tc")
            if o.cause != 0 and o.time > tc * (1 + 1e-12):
                raise DataError(f"row {i}: failure time exceeds censoring time tc")

    @classmethod
    def from_pairs(cls, pairs, design: DesignSpec) -> "Dataset":
        """Build from (time, cause) pairs, sorting failures into order-statistic
        form and deriving the phase of each failure from the design."""
        rows = sorted(pairs, key=lambda tc_: (tc_[0], tc_[1] == 0))
        obs = []
        for t, c in rows:
            phase = 0 if c == 0 else (1 if t < design.tau else 2)
            obs.append(Observation(time=float(t), cause=int(c), phase=phase))
        return cls(observations=tuple(obs), design=design)

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def n_failures(self) -> int:
        return sum(1 for o in self.observations if o.cause != 0)

    def failure_arrays(self):
        """Failure times and causes as arrays (censored rows excluded)."""
        t = np.array([o.time for o in self.observations if o.cause != 0], dtype=float)
        c = np.array([o.cause for o in self.observations if o.cause != 0], dtype=np.int64)
        return t, c

    def cell_counts(self) -> np.ndarray:
        """2x2 table of failure counts, rows = cause, cols = phase."""
        out = np.zeros((2, 2), dtype=int)
        for o in self.observations:
            if o.cause != 0:
                phase = 1 if o.time < self.design.tau else 2
                out[o.cause - 1, phase - 1] += 1
        return out


def theta(params: ModelParams, j: int, x: float) -> float:
    """Weibull scale of risk j at standardised stress x: exp(a_j + b_j x)."""
    return math.exp(params.a(j) + params.b(j) * x)


def transformed_time(params: ModelParams, j: int, design: DesignSpec, t):
    """Equivalent operating time at the current stress level.

    Identity below the change time; beyond it, the first-phase exposure is
    converted to its equivalent duration at the second-level scale, which is
    what keeps the lifetime CDF continuous at ``tau``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    th1 = theta(params, j, design.x1)
    th2 = theta(params, j, design.x2)
    out = np.where(t < design.tau, t, t - design.tau + (th2 / th1) * design.tau)
    return float(out) if out.ndim == 0 else out


def cumulative_exposure(params: ModelParams, j: int, design: DesignSpec, t):
    """Accumulated damage of risk j by time t, in units of the current scale."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    th1 = theta(params, j, design.x1)
    th2 = theta(params, j, design.x2)
    out = np.where(t < design.tau, t / th1, design.tau / th1 + (t - design.tau) / th2)
    return float(out) if out.ndim == 0 else out


def sub_cdf(params: ModelParams, j: int, design: DesignSpec, t):
    """Failure probability of risk j alone by time t under the step-stress."""
    psi = cumulative_exposure(params, j, design, t)
    out = -np.expm1(-np.asarray(psi) ** params.beta(j))
    return float(out) if out.ndim == 0 else out


def overall_cdf(params: ModelParams, design: DesignSpec, t):
    """Lifetime CDF of the unit: one minus the product of both survivals."""
    s = np.ones_like(np.asarray(t, dtype=float))
    for j in (1, 2):
        psi = np.asarray(cumulative_exposure(params, j, design, t))
        s = s * np.exp(-(psi ** params.beta(j)))
    out = 1.0 - s
    return float(out) if out.ndim == 0 else out


def _exp_sat(x: float) -> float:
    # saturating exp; extreme reparametrised draws can push the exponent
    # past the double range in either direction
    if x > 709.0:
        return math.inf
    if x < -745.0:
        return 0.0
    return math.exp(x)


def _quantile_lhs(t, a1, beta1, a2, beta2):
    if t <= 0.0:
        return 0.0
    lt = math.log(t)
    return _exp_sat(beta1 * (lt - a1)) + _exp_sat(beta2 * (lt - a2))


def _quantile_lhs_deriv(t, a1, beta1, a2, beta2):
    lt = math.log(t)
    return (beta1 * _exp_sat(beta1 * (lt - a1))
            + beta2 * _exp_sat(beta2 * (lt - a2))) / t


def _quantile_bisect(a1, beta1, a2, beta2, target, hi0):
    lo = 1e-12
    for _ in range(400):
        if _quantile_lhs(lo, a1, beta1, a2, beta2) < target or lo < 1e-300:
            break
        lo *= 0.25
    hi = max(hi0, lo * 2.0)
    for _ in range(200):
        if _quantile_lhs(hi, a1, beta1, a2, beta2) >= target:
            break
        hi *= 2.0
    else:
        raise SolverError("could not bracket the quantile equation")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _quantile_lhs(mid, a1, beta1, a2, beta2) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def use_quantile(params: ModelParams, p: float) -> float:
    """p-th lifetime quantile at use stress (x = 0).

    Solves ``(t e^{-a1})^{beta1} + (t e^{-a2})^{beta2} = -log(1-p)`` by
    Newton iteration; the left side is strictly increasing in t, so a
    doubling bracket plus bisection always recovers if Newton strays.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("quantile probability must lie in (0, 1)")
    a1, beta1 = float(params.a1), float(params.beta1)
    a2, beta2 = float(params.a2), float(params.beta2)
    target = -math.log1p(-p)
    t = _exp_sat(min(a1, a2) + math.log(target) / max(beta1, beta2))
    if not (0.0 < t < math.inf):
        t = 1.0
    best = math.inf
    stall = 0
    for _ in range(100):
        resid = _quantile_lhs(t, a1, beta1, a2, beta2) - target
        if abs(resid) >= best:
            stall += 1
            if stall >= 5:
                break
        else:
            best = abs(resid)
            stall = 0
        step = resid / _quantile_lhs_deriv(t, a1, beta1, a2, beta2)
        t_new = t - step
        if not (t_new > 0.0 and math.isfinite(t_new)):
            break
        # converged in both residual and position
        if abs(resid) < 1e-10 and abs(step) <= 4e-16 * t:
            return t_new
        t = t_new
    t = _quantile_bisect(a1, beta1, a2, beta2, target, t if t > 0 else 1.0)
    # polish; the bisected point is within an ulp-scale bracket already
    for _ in range(10):
        resid = _quantile_lhs(t, a1, beta1, a2, beta2) - target
        step = resid / _quantile_lhs_deriv(t, a1, beta1, a2, beta2)
        if abs(resid) < 1e-10 and abs(step) <= 4e-16 * t:
            return t
        t = t - step
    if abs(_quantile_lhs(t, a1, beta1, a2, beta2) - target) >= 1e-10:
        raise SolverError("quantile solver did not reach the residual tolerance")
    return t


def use_quantile_many(a1, beta1, a2, beta2, p: float) -> np.ndarray:
    """Vectorised quantile solve over parameter draws.

    Newton on all entries at once, with the scalar solver as a fallback for
    entries that have not met the residual tolerance after the sweep.
    """
    if not (0.0 < p < 1.0):
        raise ValueError("quantile probability must lie in (0, 1)")
    a1, beta1, a2, beta2 = np.broadcast_arrays(
        np.asarray(a1, dtype=float),
        np.asarray(beta1, dtype=float),
        np.asarray(a2, dtype=float),
        np.asarray(beta2, dtype=float),
    )
    target = -np.log1p(-p)
    with np.errstate(all="ignore"):
        t = np.exp(np.minimum(a1, a2) + np.log(target) / np.maximum(beta1, beta2))
        t = np.where((t > 0) & np.isfinite(t), t, 1.0)
        for _ in range(60):
            lt = np.log(t)
            e1, e2 = np.exp(beta1 * (lt - a1)), np.exp(beta2 * (lt - a2))
            f = e1 + e2 - target
            if np.all(np.abs(f) < 1e-10):
                break
            df = (beta1 * e1 + beta2 * e2) / t
            t_new = t - f / df
            t = np.where((t_new > 0) & np.isfinite(t_new), t_new, t)
        lt = np.log(t)
        resid = np.exp(beta1 * (lt - a1)) + np.exp(beta2 * (lt - a2)) - target
    bad = ~(np.abs(resid) < 1e-10)
    if np.any(bad):
        tf = np.atleast_1d(t).ravel().copy()
        fa1, fb1, fa2, fb2 = (np.atleast_1d(v).ravel() for v in (a1, beta1, a2, beta2))
        for i in np.flatnonzero(np.atleast_1d(bad).ravel()):
            pars = ModelParams(
                float(fa1[i]), -1.0, float(fb1[i]), float(fa2[i]), -1.0, float(fb2[i])
            )
            try:
                tf[i] = use_quantile(pars, p)
            except SolverError:
                # root beyond double range (possible under heavy-tailed
                # prior draws); the IEEE answer is infinity
                tf[i] = np.inf
        t = tf.reshape(np.shape(t))
    return t
