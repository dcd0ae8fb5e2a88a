"""Reparametrisation and gamma prior elicitation.

The natural parameters (a_j, b_j, beta_j) are hard to elicit directly and
strongly dependent.  Each risk is therefore reparametrised to
(t_q, -b, beta): a small use-stress quantile of that failure mode, the
acceleration slope magnitude, and the Weibull shape.  These are positive,
physically interpretable and approximately independent, so independent
gamma priors with moment-matched hyperparameters are placed on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import NonIdentifiableError
from .model import Dataset, ModelParams
from .simulate import RngSeed, simulate_dataset
from ._parallel import collect_first_valid

__all__ = [
    "PhiParams",
    "GammaPrior",
    "BootstrapSummary",
    "to_phi",
    "from_phi",
    "mom_gamma",
    "build_prior",
    "elicit_bootstrap",
    "log_prior_phi",
    "log_prior_natural",
]

PHI_NAMES = ("phi11", "phi21", "phi31", "phi12", "phi22", "phi32")

_TAG_ELICIT = 0x454C49


def _check_q(q: float):
    if not (0.0 < q < 1.0):
        raise ValueError("quantile level q must lie in (0, 1)")


@dataclass(frozen=True)
class PhiParams:
    """Per-risk positive coordinates (t_q, -b, beta) and the q they encode."""

    t_q1: float
    neg_b1: float
    beta1: float
    t_q2: float
    neg_b2: float
    beta2: float
    q: float

    def __post_init__(self):
        _check_q(self.q)
        if not np.all(self.as_array() > 0):
            raise ValueError("phi components must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.t_q1, self.neg_b1, self.beta1, self.t_q2, self.neg_b2, self.beta2]
        )

    @classmethod
    def from_array(cls, v, q: float) -> "PhiParams":
        v = np.asarray(v, dtype=float)
        return cls(*v.tolist(), q=q)


def to_phi(params: ModelParams, q: float) -> PhiParams:
    """Natural to reparametrised coordinates."""
    _check_q(q)
    r = -math.log1p(-q)
    return PhiParams(
        t_q1=math.exp(params.a1) * r ** (1.0 / params.beta1),
        neg_b1=-params.b1,
        beta1=params.beta1,
        t_q2=math.exp(params.a2) * r ** (1.0 / params.beta2),
        neg_b2=-params.b2,
        beta2=params.beta2,
        q=q,
    )


def from_phi(phi: PhiParams) -> ModelParams:
    """Exact inverse of :func:`to_phi`."""
    c = math.log(-math.log1p(-phi.q))
    return ModelParams(
        a1=math.log(phi.t_q1) - c / phi.beta1,
        b1=-phi.neg_b1,
        beta1=phi.beta1,
        a2=math.log(phi.t_q2) - c / phi.beta2,
        b2=-phi.neg_b2,
        beta2=phi.beta2,
    )


def mom_gamma(mean: float, se: float) -> tuple[float, float]:
    """Gamma (shape, rate) with exactly the given mean and sd."""
    if not (mean > 0 and se > 0):
        raise ValueError("method of moments requires positive mean and se")
    return mean * mean / (se * se), mean / (se * se)


@dataclass(frozen=True)
class BootstrapSummary:
    """Componentwise bootstrap mean and standard error of the phi MLEs."""

    means: np.ndarray
    ses: np.ndarray
    n_valid: int

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        ses = np.asarray(self.ses, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "ses", ses)
        if means.shape != (6,) or ses.shape != (6,):
            raise ValueError("summary must carry six components")
        if not (np.all(means > 0) and np.all(ses > 0)):
            raise ValueError("summary means and ses must be positive")


@dataclass(frozen=True)
class GammaPrior:
    """Independent gamma priors on the six phi components.

    ``q`` records which use-stress quantile the first component of each
    risk refers to; it travels with the prior so posterior sampling and
    serialisation stay consistent.
    """

    alphas: np.ndarray
    rates: np.ndarray
    q: float = 0.01
    flavour: str | None = None

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        rates = np.asarray(self.rates, dtype=float)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "rates", rates)
        _check_q(self.q)
        if alphas.shape != (6,) or rates.shape != (6,):
            raise ValueError("prior must carry six (shape, rate) pairs")
        if not (np.all(alphas > 0) and np.all(rates > 0)):
            raise ValueError("gamma hyperparameters must be positive")

    def mean(self) -> np.ndarray:
        return self.alphas / self.rates

    def sd(self) -> np.ndarray:
        return np.sqrt(self.alphas) / self.rates

    def sample_phi(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = (6,) if size is None else (size, 6)
        return rng.gamma(self.alphas, 1.0 / self.rates, size=shape)

    def to_dict(self) -> dict:
        out = {
            "q": self.q,
            "components": {
                name: {"alpha": float(a), "rate": float(r)}
                for name, a, r in zip(PHI_NAMES, self.alphas, self.rates)
            },
        }
        if self.flavour:
            out["flavour"] = self.flavour
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "GammaPrior":
        comps = d["components"]
        alphas = np.array([comps[name]["alpha"] for name in PHI_NAMES])
        rates = np.array([comps[name]["rate"] for name in PHI_NAMES])
        return cls(alphas=alphas, rates=rates, q=float(d.get("q", 0.01)),
                   flavour=d.get("flavour"))


def build_prior(summary: BootstrapSummary, flavour: str, q: float = 0.01) -> GammaPrior:
    """Assemble one of the three stock prior flavours from a summary.

    I matches the bootstrap mean and se exactly; II widens every se by 1.5
    with means unchanged; III additionally shifts the acceleration-slope
    means (components 2 of each risk) up by 1.5 se.
    """
    flavour = str(flavour).upper().replace("PRIOR", "").strip()
    if flavour not in ("I", "II", "III"):
        raise ValueError(f"unknown prior flavour {flavour!r}; expected I, II or III")
    means = summary.means.copy()
    ses = summary.ses.copy()
    if flavour in ("II", "III"):
        ses = 1.5 * ses
    if flavour == "III":
        for k in (1, 4):  # slope-magnitude components of risks 1 and 2
            means[k] = summary.means[k] + 1.5 * summary.ses[k]
    pairs = [mom_gamma(m, s) for m, s in zip(means, ses)]
    return GammaPrior(
        alphas=np.array([p[0] for p in pairs]),
        rates=np.array([p[1] for p in pairs]),
        q=q,
        flavour=flavour,
    )


def log_prior_phi(phi: PhiParams, prior: GammaPrior) -> float:
    """Sum of the six independent gamma log-densities."""
    x = phi.as_array()
    a, r = prior.alphas, prior.rates
    return float(np.sum(a * np.log(r) - gammaln(a) + (a - 1.0) * np.log(x) - r * x))


def log_prior_natural(params: ModelParams, prior: GammaPrior, q: float | None = None) -> float:
    """Induced joint density on (a_j, b_j, beta_j).

    The change of variables contributes |J| = t_q per risk, i.e. the first
    reparametrised component itself, so the log density is the phi-space
    value plus the two log t_q terms.  Outside the support (b_j >= 0) the
    density is zero.
    """
    if q is None:
        q = prior.q
    if params.b1 >= 0 or params.b2 >= 0:
        return -math.inf
    phi = to_phi(params, q)
    return log_prior_phi(phi, prior) + math.log(phi.t_q1) + math.log(phi.t_q2)


def _elicit_replicate(params_arr, design, q, seed: RngSeed):
    from .mle import fit_mle  # deferred; mle depends on this module

    data = simulate_dataset(ModelParams.from_array(params_arr), design, seed)
    try:
        fit = fit_mle(data)
    except NonIdentifiableError:
        return None
    return to_phi(fit.params, q).as_array()


def elicit_bootstrap(data: Dataset, fit, n_reps: int, q: float, seed: RngSeed,
                     n_jobs: int = 1) -> BootstrapSummary:
    """Parametric bootstrap of the phi MLEs under the fitted model.

    Replicates with an empty cause-stress cell are discarded and
    regenerated, keeping exactly ``n_reps`` valid refits.
    """
    _check_q(q)
    if n_reps < 2:
        raise ValueError("elicitation needs at least 2 replicates")
    if not fit.converged:
        raise ValueError("elicitation requires a converged fit")
    rows = collect_first_valid(
        _elicit_replicate,
        (fit.params.as_array(), data.design, q),
        n_needed=n_reps,
        seed=seed,
        tag=_TAG_ELICIT,
        n_jobs=n_jobs,
    )
    mat = np.asarray(rows)
    return BootstrapSummary(
        means=mat.mean(axis=0), ses=mat.std(axis=0, ddof=1), n_valid=n_reps
    )
