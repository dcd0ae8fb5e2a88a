"""Pure-numpy fallback for the hot kernels.

Mirrors the compiled extension in ``_core.pyx``: the step-stress
competing-risks log-likelihood with analytic gradient, the log posterior
over log-transformed reparametrised coordinates, and a complete
dynamic-trajectory HMC chain (multinomial NUTS with dual-averaging step
size adaptation).  Selected at import time by :mod:`ssaltplan.backend`
when the extension is unavailable or explicitly disabled.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

BACKEND_NAME = "pure"

_PSI_FLOOR = 1e-300
_DIVERGENCE_ENERGY = 1000.0
_NEG_INF = float("-inf")


def loglik_grad_natural(theta, times, causes, x1, x2, tau, tc, n_cens):
    """Log-likelihood and gradient in (a1, b1, beta1, a2, b2, beta2).

    ``times``/``causes`` hold the observed failures only; ``n_cens`` units
    survived to ``tc``.  Returns ``(-inf, zeros)`` when the evaluation
    leaves the representable range, which callers treat as zero posterior
    mass.
    """
    theta = np.asarray(theta, dtype=float)
    a = theta[[0, 3]]
    b = theta[[1, 4]]
    beta = theta[[2, 5]]
    val = 0.0
    ga = np.zeros(2)
    gb = np.zeros(2)
    gbeta = np.zeros(2)
    with np.errstate(all="ignore"):
        th1 = np.exp(a + b * x1)
        th2 = np.exp(a + b * x2)
        n_f = times.size
        if n_f:
            lev2 = times >= tau
            t_col = times[:, None]
            A = np.where(lev2[:, None], tau / th1, t_col / th1)
            B = np.where(lev2[:, None], (t_col - tau) / th2, 0.0)
            psi = np.maximum(A + B, _PSI_FLOOR)
            logpsi = np.log(psi)
            S = np.exp(beta * logpsi)
            w = np.where(lev2[:, None], x1 * A + x2 * B, x1 * psi)
            val -= S.sum()
            ga += (beta * S).sum(axis=0)
            gb += (beta * np.exp((beta - 1.0) * logpsi) * w).sum(axis=0)
            gbeta -= (S * logpsi).sum(axis=0)

            j = causes - 1
            idx = np.arange(n_f)
            xl = np.where(lev2, x2, x1)
            bj = beta[j]
            logpsi_j = logpsi[idx, j]
            val += np.sum(np.log(bj) - (a[j] + b[j] * xl) + (bj - 1.0) * logpsi_j)
            np.add.at(ga, j, -bj)
            gb_cause = np.where(
                lev2, -x2 - (bj - 1.0) * w[idx, j] / psi[idx, j], -bj * x1
            )
            np.add.at(gb, j, gb_cause)
            np.add.at(gbeta, j, 1.0 / bj + logpsi_j)
        if n_cens:
            Ac = tau / th1
            Bc = (tc - tau) / th2
            psic = np.maximum(Ac + Bc, _PSI_FLOOR)
            logpsic = np.log(psic)
            Sc = np.exp(beta * logpsic)
            wc = x1 * Ac + x2 * Bc
            val -= n_cens * Sc.sum()
            ga += n_cens * beta * Sc
            gb += n_cens * beta * np.exp((beta - 1.0) * logpsic) * wc
            gbeta -= n_cens * Sc * logpsic
    grad = np.empty(6)
    grad[[0, 3]] = ga
    grad[[1, 4]] = gb
    grad[[2, 5]] = gbeta
    if not (np.isfinite(val) and np.all(np.isfinite(grad))):
        return _NEG_INF, np.zeros(6)
    return float(val), grad


def logpost_grad_z(z, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                   n_cens, include_lik):
    """Unnormalised log posterior and gradient in z = log(phi).

    phi is ordered (t_q, -b, beta) per risk.  The gamma priors are applied
    with the log-transform Jacobian folded in; ``qconst`` is
    log(-log(1-q)), the constant linking the use-stress quantile back to
    the intercept.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z > 700.0) or not np.all(np.isfinite(z)):
        return _NEG_INF, np.zeros(6)
    phi = np.exp(z)
    val = float(np.sum(alphas * z - rates * phi + alphas * np.log(rates) - gammaln(alphas)))
    grad = alphas - rates * phi
    if include_lik:
        beta = phi[[2, 5]]
        a_nat = z[[0, 3]] - qconst / beta
        theta_nat = np.array(
            [a_nat[0], -phi[1], beta[0], a_nat[1], -phi[4], beta[1]]
        )
        if not np.all(np.isfinite(theta_nat)):
            return _NEG_INF, np.zeros(6)
        ll, g = loglik_grad_natural(theta_nat, times, causes, x1, x2, tau, tc, n_cens)
        if not np.isfinite(ll):
            return _NEG_INF, np.zeros(6)
        val += ll
        ga = g[[0, 3]]
        grad[[0, 3]] += ga
        grad[[1, 4]] += g[[1, 4]] * (-phi[[1, 4]])
        grad[[2, 5]] += ga * (qconst / beta) + g[[2, 5]] * beta
    if not (np.isfinite(val) and np.all(np.isfinite(grad))):
        return _NEG_INF, np.zeros(6)
    return val, grad


class _Target:
    """Caches the kernel arguments for one sampling run."""

    __slots__ = ("args",)

    def __init__(self, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                 n_cens, include_lik):
        self.args = (
            np.ascontiguousarray(alphas, dtype=float),
            np.ascontiguousarray(rates, dtype=float),
            float(qconst),
            np.ascontiguousarray(times, dtype=float),
            np.ascontiguousarray(causes, dtype=np.int64),
            float(x1), float(x2), float(tau), float(tc),
            int(n_cens), bool(include_lik),
        )

    def __call__(self, z):
        return logpost_grad_z(z, *self.args)


class _Metric:
    """Euclidean metric: inverse mass matrix A plus its Cholesky factor.

    Momentum is N(0, A^{-1}); kinetic energy is r' A r / 2; the position
    update moves along the velocity v = A r.  The unit and diagonal modes
    are the special cases A = I and A = diag.
    """

    __slots__ = ("A", "chol")

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        self.chol = np.linalg.cholesky(self.A)

    def sample_momentum(self, rng):
        xi = rng.standard_normal(self.A.shape[0])
        return solve_triangular(self.chol.T, xi, lower=False)

    def velocity(self, r):
        return self.A @ r

    def kinetic(self, r):
        return 0.5 * float(r @ (self.A @ r))


def _hamiltonian(logp, r, metric):
    if not math.isfinite(logp):
        return math.inf
    return -logp + metric.kinetic(r)


def _leapfrog(target, z, r, grad, eps, metric):
    r_half = r + (0.5 * eps) * grad
    z_new = z + eps * metric.velocity(r_half)
    logp_new, grad_new = target(z_new)
    r_new = r_half + (0.5 * eps) * grad_new
    return z_new, r_new, logp_new, grad_new


class _Tree:
    __slots__ = (
        "z_minus", "r_minus", "grad_minus", "z_plus", "r_plus", "grad_plus",
        "z_prop", "logp_prop", "grad_prop", "log_sum_w", "sum_alpha",
        "n_alpha", "valid", "n_divergent",
    )


def _build_tree(target, z, r, grad, direction, depth, eps, metric, h0, rng):
    if depth == 0:
        z1, r1, logp1, grad1 = _leapfrog(target, z, r, grad, direction * eps, metric)
        h1 = _hamiltonian(logp1, r1, metric)
        delta_h = h0 - h1  # log weight relative to the trajectory start
        divergent = (not math.isfinite(delta_h)) or (-delta_h > _DIVERGENCE_ENERGY)
        t = _Tree()
        t.z_minus = t.z_plus = t.z_prop = z1
        t.r_minus = t.r_plus = r1
        t.grad_minus = t.grad_plus = t.grad_prop = grad1
        t.logp_prop = logp1
        t.log_sum_w = delta_h if math.isfinite(delta_h) else _NEG_INF
        t.sum_alpha = math.exp(min(0.0, delta_h)) if math.isfinite(delta_h) else 0.0
        t.n_alpha = 1
        t.valid = not divergent
        t.n_divergent = int(divergent)
        return t

    first = _build_tree(target, z, r, grad, direction, depth - 1, eps, metric, h0, rng)
    if not first.valid:
        return first
    if direction > 0:
        z_e, r_e, g_e = first.z_plus, first.r_plus, first.grad_plus
    else:
        z_e, r_e, g_e = first.z_minus, first.r_minus, first.grad_minus
    second = _build_tree(target, z_e, r_e, g_e, direction, depth - 1, eps, metric, h0, rng)

    first.sum_alpha += second.sum_alpha
    first.n_alpha += second.n_alpha
    first.n_divergent += second.n_divergent
    if not second.valid:
        first.valid = False
        return first

    log_sum_w = np.logaddexp(first.log_sum_w, second.log_sum_w)
    if math.log(rng.random()) < second.log_sum_w - log_sum_w:
        first.z_prop = second.z_prop
        first.logp_prop = second.logp_prop
        first.grad_prop = second.grad_prop
    first.log_sum_w = log_sum_w
    if direction > 0:
        first.z_plus, first.r_plus, first.grad_plus = (
            second.z_plus, second.r_plus, second.grad_plus)
    else:
        first.z_minus, first.r_minus, first.grad_minus = (
            second.z_minus, second.r_minus, second.grad_minus)
    span = first.z_plus - first.z_minus
    if (np.dot(span, metric.velocity(first.r_minus)) < 0.0
            or np.dot(span, metric.velocity(first.r_plus)) < 0.0):
        first.valid = False
    return first


def _transition(target, z, logp, grad, eps, metric, max_depth, rng):
    r0 = metric.sample_momentum(rng)
    h0 = _hamiltonian(logp, r0, metric)

    z_minus = z_plus = z
    r_minus = r_plus = r0
    grad_minus = grad_plus = grad
    z_prop, logp_prop, grad_prop = z, logp, grad
    log_sum_w = 0.0
    sum_alpha = 0.0
    n_alpha = 0
    n_divergent = 0
    depth = 0
    saturated = True
    while depth < max_depth:
        direction = 1 if rng.random() < 0.5 else -1
        if direction > 0:
            sub = _build_tree(target, z_plus, r_plus, grad_plus, 1, depth,
                              eps, metric, h0, rng)
        else:
            sub = _build_tree(target, z_minus, r_minus, grad_minus, -1, depth,
                              eps, metric, h0, rng)
        sum_alpha += sub.sum_alpha
        n_alpha += sub.n_alpha
        n_divergent += sub.n_divergent
        if not sub.valid:
            saturated = False
            break
        if math.log(rng.random()) < sub.log_sum_w - log_sum_w:
            z_prop, logp_prop, grad_prop = sub.z_prop, sub.logp_prop, sub.grad_prop
        log_sum_w = np.logaddexp(log_sum_w, sub.log_sum_w)
        if direction > 0:
            z_plus, r_plus, grad_plus = sub.z_plus, sub.r_plus, sub.grad_plus
        else:
            z_minus, r_minus, grad_minus = sub.z_minus, sub.r_minus, sub.grad_minus
        depth += 1
        span = z_plus - z_minus
        if (np.dot(span, metric.velocity(r_minus)) < 0.0
                or np.dot(span, metric.velocity(r_plus)) < 0.0):
            saturated = False
            break
    accept_stat = sum_alpha / n_alpha if n_alpha else 0.0
    return z_prop, logp_prop, grad_prop, accept_stat, n_divergent > 0, saturated


def _find_reasonable_epsilon(target, z, logp, grad, metric, rng):
    eps = 1.0
    r = metric.sample_momentum(rng)
    h0 = _hamiltonian(logp, r, metric)
    _, r1, logp1, _ = _leapfrog(target, z, r, grad, eps, metric)
    dh = h0 - _hamiltonian(logp1, r1, metric)
    if not math.isfinite(dh):
        dh = _NEG_INF
    direction = 1.0 if dh > math.log(0.5) else -1.0
    for _ in range(100):
        if direction * dh <= -direction * math.log(2.0):
            break
        eps *= 2.0**direction
        if not (1e-10 < eps < 1e7):
            break
        _, r1, logp1, _ = _leapfrog(target, z, r, grad, eps, metric)
        dh = h0 - _hamiltonian(logp1, r1, metric)
        if not math.isfinite(dh):
            dh = _NEG_INF
    return eps


def run_nuts_chain(z0, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                   n_cens, include_lik, n_warmup, n_samples, target_accept,
                   max_depth, adapt_mass, rng):
    """Run one chain on the model posterior; returns z-space draws plus
    sampler statistics."""
    target = _Target(alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                     n_cens, include_lik)
    return run_nuts_generic(target, z0, n_warmup, n_samples, target_accept,
                            max_depth, adapt_mass, rng)


MASS_NONE, MASS_DIAG, MASS_DENSE = 0, 1, 2


def _mass_mode(adapt_mass) -> int:
    if isinstance(adapt_mass, str):
        return {"none": MASS_NONE, "unit": MASS_NONE, "diag": MASS_DIAG,
                "dense": MASS_DENSE}[adapt_mass]
    return MASS_DIAG if adapt_mass is True else int(adapt_mass)


def _adapted_metric(window, mode):
    """Regularised covariance (dense) or variance (diag) of warmup draws."""
    zs = np.asarray(window)
    n_w = zs.shape[0]
    dim = zs.shape[1]
    shrink = n_w / (n_w + 5.0)
    ridge = 1e-3 * (5.0 / (n_w + 5.0))
    if mode == MASS_DENSE:
        cov = np.cov(zs.T, ddof=1)
        A = shrink * cov + ridge * np.eye(dim)
    else:
        A = np.diag(shrink * np.var(zs, axis=0, ddof=1) + ridge)
    try:
        return _Metric(A)
    except np.linalg.LinAlgError:
        return _Metric(np.eye(dim))


def metric_windows(n_warmup: int) -> list:
    """Doubling adaptation windows, re-estimating the metric at each close.

    Standard layout: a step-size-only opening buffer, slow windows that
    double in size (the last one absorbing the remainder), and a closing
    step-size-only buffer.  Short warmups fall back to one half-warmup
    window.
    """
    init_buf, term_buf, base = 75, 50, 25
    if n_warmup < init_buf + term_buf + base:
        lo, hi = n_warmup // 4, n_warmup // 2
        return [(lo, hi)] if hi - lo > 1 else []
    slow_end = n_warmup - term_buf
    out = []
    start, size = init_buf, base
    while start < slow_end:
        end = start + size
        if end + 2 * size > slow_end:
            end = slow_end
        out.append((start, end))
        start = end
        size *= 2
    return out


def run_nuts_generic(target, z0, n_warmup, n_samples, target_accept,
                     max_depth, adapt_mass, rng):
    """Dynamic-trajectory HMC chain for any ``target(z) -> (logp, grad)``.

    Dual averaging follows the standard schedule (gamma 0.05, t0 10,
    kappa 0.75).  ``adapt_mass`` selects the metric: 0/none keeps the unit
    matrix; 1/diag and 2/dense estimate a diagonal or full inverse mass
    over doubling warmup windows, restarting the step-size adaptation at
    every window close.
    """
    mode = _mass_mode(adapt_mass)
    z = np.asarray(z0, dtype=float).copy()
    logp, grad = target(z)
    if not math.isfinite(logp):
        raise ValueError("non-finite log target at the chain start")
    dim = z.size
    metric = _Metric(np.eye(dim))

    eps = _find_reasonable_epsilon(target, z, logp, grad, metric, rng)
    mu = math.log(10.0 * eps)
    log_eps = math.log(eps)
    log_eps_bar = 0.0
    h_bar = 0.0
    m_adapt = 0
    gamma, t0, kappa = 0.05, 10.0, 0.75

    windows = metric_windows(n_warmup) if mode != MASS_NONE else []
    win_idx = 0
    window = []

    draws = np.empty((n_samples, dim))
    n_div = 0
    n_div_warmup = 0
    n_sat = 0
    accept_sum = 0.0

    for it in range(n_warmup + n_samples):
        warming = it < n_warmup
        z, logp, grad, accept, diverged, saturated = _transition(
            target, z, logp, grad, eps, metric, max_depth, rng)
        if warming:
            n_div_warmup += int(diverged)
            m_adapt += 1
            frac = 1.0 / (m_adapt + t0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - accept)
            log_eps = mu - math.sqrt(m_adapt) / gamma * h_bar
            eta = m_adapt**-kappa
            log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
            eps = math.exp(log_eps)
            if win_idx < len(windows):
                lo, hi = windows[win_idx]
                if lo <= it < hi:
                    window.append(z)
                if it == hi - 1:
                    if len(window) > 1:
                        metric = _adapted_metric(window, mode)
                        mu = math.log(10.0 * eps)
                        h_bar = 0.0
                        m_adapt = 0
                        log_eps_bar = 0.0
                    window = []
                    win_idx += 1
            if it == n_warmup - 1:
                eps = math.exp(log_eps_bar)
        else:
            draws[it - n_warmup] = z
            n_div += int(diverged)
            n_sat += int(saturated)
            accept_sum += accept

    return {
        "draws": draws,
        "n_divergent": n_div,
        "n_divergent_warmup": n_div_warmup,
        "n_depth_hit": n_sat,
        "step_size": eps,
        "accept_rate": accept_sum / max(n_samples, 1),
    }
