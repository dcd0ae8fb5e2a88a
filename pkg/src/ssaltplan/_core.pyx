# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: censored competing-risks log-likelihood with
analytic gradient, the log posterior over log-phi coordinates, and the
full dynamic-trajectory HMC chain loop.

Mirrors ``_pycore`` exactly (same algorithms, same variate draw order);
numpy's Philox bit generators are consumed through the C API so a chain
costs no Python calls in its inner loop.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, log, log1p, sqrt, lgamma, isfinite, INFINITY
from libc.string cimport memcpy
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

from ssaltplan._pycore import metric_windows

BACKEND_NAME = "compiled"

cdef double _PSI_FLOOR = 1e-300
cdef double _DIVERGENCE_ENERGY = 1000.0
cdef int _DIM = 6


# ----------------------------------------------------------------------
# target context (plain C struct; backing arrays owned by the caller)
# ----------------------------------------------------------------------

cdef struct Ctx:
    double alphas[6]
    double rates[6]
    double lograte_lgam      # sum of alpha*log(rate) - lgamma(alpha)
    double qconst
    double x1
    double x2
    double tau
    double tc
    int n_cens
    int include_lik
    int n_times
    const double* times
    const long long* causes


cdef class _CtxKeeper:
    """Owns the contiguous arrays the Ctx struct points into."""
    cdef object t_arr
    cdef object c_arr
    cdef Ctx ctx

    def __init__(self, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                 n_cens, include_lik):
        cdef int i
        a = np.ascontiguousarray(alphas, dtype=np.float64)
        r = np.ascontiguousarray(rates, dtype=np.float64)
        self.t_arr = np.ascontiguousarray(times, dtype=np.float64)
        self.c_arr = np.ascontiguousarray(causes, dtype=np.int64)
        cdef double[::1] a_v = a
        cdef double[::1] r_v = r
        cdef double[::1] t_v = self.t_arr
        cdef long long[::1] c_v = self.c_arr
        self.ctx.lograte_lgam = 0.0
        for i in range(6):
            self.ctx.alphas[i] = a_v[i]
            self.ctx.rates[i] = r_v[i]
            self.ctx.lograte_lgam += a_v[i] * log(r_v[i]) - lgamma(a_v[i])
        self.ctx.qconst = qconst
        self.ctx.x1 = x1
        self.ctx.x2 = x2
        self.ctx.tau = tau
        self.ctx.tc = tc
        self.ctx.n_cens = n_cens
        self.ctx.include_lik = 1 if include_lik else 0
        self.ctx.n_times = t_v.shape[0]
        if self.ctx.n_times > 0:
            self.ctx.times = &t_v[0]
            self.ctx.causes = &c_v[0]
        else:
            self.ctx.times = NULL
            self.ctx.causes = NULL


# ----------------------------------------------------------------------
# model kernels
# ----------------------------------------------------------------------

cdef double _loglik_grad_c(const double* th, const double* times,
                           const long long* causes, int n_times,
                           double x1, double x2, double tau, double tc,
                           int n_cens, double* grad) noexcept nogil:
    cdef double a[2]
    cdef double b[2]
    cdef double be[2]
    cdef double th1[2]
    cdef double th2[2]
    cdef double ga[2]
    cdef double gb[2]
    cdef double gbe[2]
    cdef double val = 0.0
    cdef double t, A, B, psi, w, logpsi, S, xl
    cdef int i, j, c, lev2

    a[0] = th[0]; b[0] = th[1]; be[0] = th[2]
    a[1] = th[3]; b[1] = th[4]; be[1] = th[5]
    for j in range(2):
        th1[j] = exp(a[j] + b[j] * x1)
        th2[j] = exp(a[j] + b[j] * x2)
        ga[j] = 0.0; gb[j] = 0.0; gbe[j] = 0.0
        if not (be[j] > 0.0 and isfinite(th1[j]) and isfinite(th2[j])
                and th1[j] > 0.0 and th2[j] > 0.0):
            for i in range(6):
                grad[i] = 0.0
            return -INFINITY

    for i in range(n_times):
        t = times[i]
        c = <int>causes[i] - 1
        lev2 = 1 if t >= tau else 0
        for j in range(2):
            if lev2:
                A = tau / th1[j]
                B = (t - tau) / th2[j]
                psi = A + B
                w = x1 * A + x2 * B
            else:
                psi = t / th1[j]
                w = x1 * psi
            if psi < _PSI_FLOOR:
                psi = _PSI_FLOOR
            logpsi = log(psi)
            S = exp(be[j] * logpsi)
            val -= S
            ga[j] += be[j] * S
            gb[j] += be[j] * exp((be[j] - 1.0) * logpsi) * w
            gbe[j] -= S * logpsi
            if j == c:
                xl = x2 if lev2 else x1
                val += log(be[j]) - (a[j] + b[j] * xl) + (be[j] - 1.0) * logpsi
                ga[j] -= be[j]
                if lev2:
                    gb[j] += -x2 - (be[j] - 1.0) * w / psi
                else:
                    gb[j] += -be[j] * x1
                gbe[j] += 1.0 / be[j] + logpsi

    if n_cens > 0:
        for j in range(2):
            A = tau / th1[j]
            B = (tc - tau) / th2[j]
            psi = A + B
            w = x1 * A + x2 * B
            if psi < _PSI_FLOOR:
                psi = _PSI_FLOOR
            logpsi = log(psi)
            S = exp(be[j] * logpsi)
            val -= n_cens * S
            ga[j] += n_cens * be[j] * S
            gb[j] += n_cens * be[j] * exp((be[j] - 1.0) * logpsi) * w
            gbe[j] -= n_cens * S * logpsi

    grad[0] = ga[0]; grad[1] = gb[0]; grad[2] = gbe[0]
    grad[3] = ga[1]; grad[4] = gb[1]; grad[5] = gbe[1]
    if not isfinite(val):
        for i in range(6):
            grad[i] = 0.0
        return -INFINITY
    for i in range(6):
        if not isfinite(grad[i]):
            for j in range(6):
                grad[j] = 0.0
            return -INFINITY
    return val


cdef double _logpost_c(const Ctx* ctx, const double* z, double* grad) noexcept nogil:
    cdef double phi[6]
    cdef double th_nat[6]
    cdef double g_nat[6]
    cdef double val, ll, beta1, beta2
    cdef int i

    for i in range(6):
        if not isfinite(z[i]) or z[i] > 700.0:
            for i in range(6):
                grad[i] = 0.0
            return -INFINITY
    val = ctx.lograte_lgam
    for i in range(6):
        phi[i] = exp(z[i])
        val += ctx.alphas[i] * z[i] - ctx.rates[i] * phi[i]
        grad[i] = ctx.alphas[i] - ctx.rates[i] * phi[i]
    if ctx.include_lik:
        beta1 = phi[2]; beta2 = phi[5]
        th_nat[0] = z[0] - ctx.qconst / beta1
        th_nat[1] = -phi[1]
        th_nat[2] = beta1
        th_nat[3] = z[3] - ctx.qconst / beta2
        th_nat[4] = -phi[4]
        th_nat[5] = beta2
        for i in range(6):
            if not isfinite(th_nat[i]):
                for i in range(6):
                    grad[i] = 0.0
                return -INFINITY
        ll = _loglik_grad_c(th_nat, ctx.times, ctx.causes, ctx.n_times,
                            ctx.x1, ctx.x2, ctx.tau, ctx.tc, ctx.n_cens, g_nat)
        if not isfinite(ll):
            for i in range(6):
                grad[i] = 0.0
            return -INFINITY
        val += ll
        grad[0] += g_nat[0]
        grad[1] += g_nat[1] * (-phi[1])
        grad[2] += g_nat[0] * (ctx.qconst / beta1) + g_nat[2] * beta1
        grad[3] += g_nat[3]
        grad[4] += g_nat[4] * (-phi[4])
        grad[5] += g_nat[3] * (ctx.qconst / beta2) + g_nat[5] * beta2
    for i in range(6):
        if not isfinite(grad[i]):
            for i in range(6):
                grad[i] = 0.0
            return -INFINITY
    if not isfinite(val):
        return -INFINITY
    return val


# ----------------------------------------------------------------------
# python-visible kernel wrappers (parity-tested against _pycore)
# ----------------------------------------------------------------------

def loglik_grad_natural(theta, times, causes, double x1, double x2,
                        double tau, double tc, n_cens):
    th = np.ascontiguousarray(theta, dtype=np.float64)
    t = np.ascontiguousarray(times, dtype=np.float64)
    c = np.ascontiguousarray(causes, dtype=np.int64)
    grad = np.zeros(6)
    cdef double[::1] th_v = th
    cdef double[::1] t_v = t
    cdef long long[::1] c_v = c
    cdef double[::1] g_v = grad
    cdef int n = t_v.shape[0]
    cdef const double* tp = NULL
    cdef const long long* cp = NULL
    if n > 0:
        tp = &t_v[0]
        cp = &c_v[0]
    cdef double val = _loglik_grad_c(&th_v[0], tp, cp, n, x1, x2, tau, tc,
                                     <int>n_cens, &g_v[0])
    return val, grad


def logpost_grad_z(z, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                   n_cens, include_lik):
    keeper = _CtxKeeper(alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                        n_cens, include_lik)
    zz = np.ascontiguousarray(z, dtype=np.float64)
    grad = np.zeros(6)
    cdef double[::1] z_v = zz
    cdef double[::1] g_v = grad
    cdef double val = _logpost_c(&keeper.ctx, &z_v[0], &g_v[0])
    return val, grad


# ----------------------------------------------------------------------
# metric (inverse mass matrix A with its Cholesky factor)
# ----------------------------------------------------------------------

cdef struct Metric:
    double A[36]     # inverse mass, row-major
    double C[36]     # lower-triangular Cholesky of A


cdef void _metric_identity(Metric* m) noexcept nogil:
    cdef int i, j
    for i in range(6):
        for j in range(6):
            m.A[i * 6 + j] = 1.0 if i == j else 0.0
            m.C[i * 6 + j] = 1.0 if i == j else 0.0


cdef bint _metric_set(Metric* m, const double* A) noexcept nogil:
    """Copy A and factor it; False when A is not positive definite."""
    cdef int i, j, k
    cdef double s
    for i in range(36):
        m.A[i] = A[i]
        m.C[i] = 0.0
    for j in range(6):
        s = m.A[j * 6 + j]
        for k in range(j):
            s -= m.C[j * 6 + k] * m.C[j * 6 + k]
        if s <= 0.0 or not isfinite(s):
            return False
        m.C[j * 6 + j] = sqrt(s)
        for i in range(j + 1, 6):
            s = m.A[i * 6 + j]
            for k in range(j):
                s -= m.C[i * 6 + k] * m.C[j * 6 + k]
            m.C[i * 6 + j] = s / m.C[j * 6 + j]
    return True


cdef inline void _metric_velocity(const Metric* m, const double* r,
                                  double* v) noexcept nogil:
    cdef int i, j
    for i in range(6):
        v[i] = 0.0
        for j in range(6):
            v[i] += m.A[i * 6 + j] * r[j]


cdef inline double _metric_kinetic(const Metric* m, const double* r) noexcept nogil:
    cdef double v[6]
    cdef double k = 0.0
    cdef int i
    _metric_velocity(m, r, v)
    for i in range(6):
        k += r[i] * v[i]
    return 0.5 * k


cdef void _metric_momentum(const Metric* m, bitgen_t* bg, double* r) noexcept nogil:
    """Draw r ~ N(0, A^{-1}) by solving C^T r = xi."""
    cdef double xi[6]
    cdef int i, j
    cdef double s
    for i in range(6):
        xi[i] = random_standard_normal(bg)
    for i in range(5, -1, -1):
        s = xi[i]
        for j in range(i + 1, 6):
            s -= m.C[j * 6 + i] * r[j]
        r[i] = s / m.C[i * 6 + i]


# ----------------------------------------------------------------------
# chain runner
# ----------------------------------------------------------------------

cdef struct Tree:
    double z_minus[6]
    double r_minus[6]
    double grad_minus[6]
    double z_plus[6]
    double r_plus[6]
    double grad_plus[6]
    double z_prop[6]
    double grad_prop[6]
    double logp_prop
    double log_sum_w
    double sum_alpha
    int n_alpha
    int n_divergent
    bint valid


cdef inline double _next_uniform(bitgen_t* bg) noexcept nogil:
    return bg.next_double(bg.state)


cdef inline double _hamiltonian_c(double logp, const double* r,
                                  const Metric* m) noexcept nogil:
    if not isfinite(logp):
        return INFINITY
    return -logp + _metric_kinetic(m, r)


cdef double _leapfrog_c(const Ctx* ctx, const double* z, const double* r,
                        const double* grad, double eps, const Metric* m,
                        double* z_out, double* r_out, double* grad_out) noexcept nogil:
    cdef double r_half[6]
    cdef double v[6]
    cdef int i
    cdef double logp
    for i in range(6):
        r_half[i] = r[i] + 0.5 * eps * grad[i]
    _metric_velocity(m, r_half, v)
    for i in range(6):
        z_out[i] = z[i] + eps * v[i]
    logp = _logpost_c(ctx, z_out, grad_out)
    for i in range(6):
        r_out[i] = r_half[i] + 0.5 * eps * grad_out[i]
    return logp


cdef inline double _logaddexp(double x, double y) noexcept nogil:
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    if x > y:
        return x + log1p(exp(y - x))
    return y + log1p(exp(x - y))


cdef inline bint _turning(const double* z_minus, const double* z_plus,
                          const double* r_minus, const double* r_plus,
                          const Metric* m) noexcept nogil:
    cdef double v_minus[6]
    cdef double v_plus[6]
    cdef double s_minus = 0.0, s_plus = 0.0, span
    cdef int i
    _metric_velocity(m, r_minus, v_minus)
    _metric_velocity(m, r_plus, v_plus)
    for i in range(6):
        span = z_plus[i] - z_minus[i]
        s_minus += span * v_minus[i]
        s_plus += span * v_plus[i]
    return s_minus < 0.0 or s_plus < 0.0


cdef void _build_tree_c(const Ctx* ctx, bitgen_t* bg, const double* z,
                        const double* r, const double* grad, int direction,
                        int depth, double eps, const Metric* m,
                        double h0, Tree* out) noexcept nogil:
    cdef double z1[6]
    cdef double r1[6]
    cdef double g1[6]
    cdef double logp1, h1, delta_h, log_sum_w, u
    cdef Tree second
    cdef bint divergent

    if depth == 0:
        logp1 = _leapfrog_c(ctx, z, r, grad, direction * eps, m, z1, r1, g1)
        h1 = _hamiltonian_c(logp1, r1, m)
        delta_h = h0 - h1
        divergent = (not isfinite(delta_h)) or (-delta_h > _DIVERGENCE_ENERGY)
        memcpy(out.z_minus, z1, sizeof(z1))
        memcpy(out.z_plus, z1, sizeof(z1))
        memcpy(out.z_prop, z1, sizeof(z1))
        memcpy(out.r_minus, r1, sizeof(r1))
        memcpy(out.r_plus, r1, sizeof(r1))
        memcpy(out.grad_minus, g1, sizeof(g1))
        memcpy(out.grad_plus, g1, sizeof(g1))
        memcpy(out.grad_prop, g1, sizeof(g1))
        out.logp_prop = logp1
        out.log_sum_w = delta_h if isfinite(delta_h) else -INFINITY
        if isfinite(delta_h):
            out.sum_alpha = exp(delta_h) if delta_h < 0.0 else 1.0
        else:
            out.sum_alpha = 0.0
        out.n_alpha = 1
        out.valid = not divergent
        out.n_divergent = 1 if divergent else 0
        return

    _build_tree_c(ctx, bg, z, r, grad, direction, depth - 1, eps, m, h0, out)
    if not out.valid:
        return
    if direction > 0:
        _build_tree_c(ctx, bg, out.z_plus, out.r_plus, out.grad_plus,
                      direction, depth - 1, eps, m, h0, &second)
    else:
        _build_tree_c(ctx, bg, out.z_minus, out.r_minus, out.grad_minus,
                      direction, depth - 1, eps, m, h0, &second)
    out.sum_alpha += second.sum_alpha
    out.n_alpha += second.n_alpha
    out.n_divergent += second.n_divergent
    if not second.valid:
        out.valid = False
        return
    log_sum_w = _logaddexp(out.log_sum_w, second.log_sum_w)
    u = _next_uniform(bg)
    if log(u) < second.log_sum_w - log_sum_w:
        memcpy(out.z_prop, second.z_prop, sizeof(second.z_prop))
        memcpy(out.grad_prop, second.grad_prop, sizeof(second.grad_prop))
        out.logp_prop = second.logp_prop
    out.log_sum_w = log_sum_w
    if direction > 0:
        memcpy(out.z_plus, second.z_plus, sizeof(second.z_plus))
        memcpy(out.r_plus, second.r_plus, sizeof(second.r_plus))
        memcpy(out.grad_plus, second.grad_plus, sizeof(second.grad_plus))
    else:
        memcpy(out.z_minus, second.z_minus, sizeof(second.z_minus))
        memcpy(out.r_minus, second.r_minus, sizeof(second.r_minus))
        memcpy(out.grad_minus, second.grad_minus, sizeof(second.grad_minus))
    if _turning(out.z_minus, out.z_plus, out.r_minus, out.r_plus, m):
        out.valid = False


cdef void _transition_c(const Ctx* ctx, bitgen_t* bg, double* z, double* logp,
                        double* grad, double eps, const Metric* m,
                        int max_depth, double* accept_out, bint* diverged_out,
                        bint* saturated_out) noexcept nogil:
    cdef double r0[6]
    cdef double z_minus[6]
    cdef double r_minus[6]
    cdef double grad_minus[6]
    cdef double z_plus[6]
    cdef double r_plus[6]
    cdef double grad_plus[6]
    cdef double z_prop[6]
    cdef double grad_prop[6]
    cdef double logp_prop, h0, log_sum_w, sum_alpha
    cdef int n_alpha, n_div, depth, direction
    cdef bint saturated
    cdef Tree sub

    _metric_momentum(m, bg, r0)
    h0 = _hamiltonian_c(logp[0], r0, m)

    memcpy(z_minus, z, sizeof(z_minus))
    memcpy(z_plus, z, sizeof(z_plus))
    memcpy(r_minus, r0, sizeof(r_minus))
    memcpy(r_plus, r0, sizeof(r_plus))
    memcpy(grad_minus, grad, sizeof(grad_minus))
    memcpy(grad_plus, grad, sizeof(grad_plus))
    memcpy(z_prop, z, sizeof(z_prop))
    memcpy(grad_prop, grad, sizeof(grad_prop))
    logp_prop = logp[0]
    log_sum_w = 0.0
    sum_alpha = 0.0
    n_alpha = 0
    n_div = 0
    depth = 0
    saturated = True
    while depth < max_depth:
        direction = 1 if _next_uniform(bg) < 0.5 else -1
        if direction > 0:
            _build_tree_c(ctx, bg, z_plus, r_plus, grad_plus, 1, depth,
                          eps, m, h0, &sub)
        else:
            _build_tree_c(ctx, bg, z_minus, r_minus, grad_minus, -1, depth,
                          eps, m, h0, &sub)
        sum_alpha += sub.sum_alpha
        n_alpha += sub.n_alpha
        n_div += sub.n_divergent
        if not sub.valid:
            saturated = False
            break
        if log(_next_uniform(bg)) < sub.log_sum_w - log_sum_w:
            memcpy(z_prop, sub.z_prop, sizeof(z_prop))
            memcpy(grad_prop, sub.grad_prop, sizeof(grad_prop))
            logp_prop = sub.logp_prop
        log_sum_w = _logaddexp(log_sum_w, sub.log_sum_w)
        if direction > 0:
            memcpy(z_plus, sub.z_plus, sizeof(z_plus))
            memcpy(r_plus, sub.r_plus, sizeof(r_plus))
            memcpy(grad_plus, sub.grad_plus, sizeof(grad_plus))
        else:
            memcpy(z_minus, sub.z_minus, sizeof(z_minus))
            memcpy(r_minus, sub.r_minus, sizeof(r_minus))
            memcpy(grad_minus, sub.grad_minus, sizeof(grad_minus))
        depth += 1
        if _turning(z_minus, z_plus, r_minus, r_plus, m):
            saturated = False
            break

    memcpy(z, z_prop, 6 * sizeof(double))
    memcpy(grad, grad_prop, 6 * sizeof(double))
    logp[0] = logp_prop
    accept_out[0] = sum_alpha / n_alpha if n_alpha > 0 else 0.0
    diverged_out[0] = n_div > 0
    saturated_out[0] = saturated


cdef double _find_reasonable_epsilon_c(const Ctx* ctx, bitgen_t* bg,
                                       const double* z, double logp,
                                       const double* grad,
                                       const Metric* m) noexcept nogil:
    cdef double eps = 1.0
    cdef double r[6]
    cdef double z1[6]
    cdef double r1[6]
    cdef double g1[6]
    cdef double h0, dh, logp1, direction
    cdef int it

    _metric_momentum(m, bg, r)
    h0 = _hamiltonian_c(logp, r, m)
    logp1 = _leapfrog_c(ctx, z, r, grad, eps, m, z1, r1, g1)
    dh = h0 - _hamiltonian_c(logp1, r1, m)
    if not isfinite(dh):
        dh = -INFINITY
    direction = 1.0 if dh > log(0.5) else -1.0
    for it in range(100):
        if direction * dh <= -direction * log(2.0):
            break
        eps *= 2.0 ** direction
        if not (1e-10 < eps < 1e7):
            break
        logp1 = _leapfrog_c(ctx, z, r, grad, eps, m, z1, r1, g1)
        dh = h0 - _hamiltonian_c(logp1, r1, m)
        if not isfinite(dh):
            dh = -INFINITY
    return eps


MASS_NONE, MASS_DIAG, MASS_DENSE = 0, 1, 2


def _mass_mode(adapt_mass):
    if isinstance(adapt_mass, str):
        return {"none": MASS_NONE, "unit": MASS_NONE, "diag": MASS_DIAG,
                "dense": MASS_DENSE}[adapt_mass]
    return MASS_DIAG if adapt_mass is True else int(adapt_mass)


def run_nuts_chain(z0, alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                   n_cens, include_lik, int n_warmup, int n_samples,
                   double target_accept, int max_depth, adapt_mass, rng):
    """Run one chain on the model posterior; same contract as the pure
    fallback, with the bit generator consumed through numpy's C API."""
    keeper = _CtxKeeper(alphas, rates, qconst, times, causes, x1, x2, tau, tc,
                        n_cens, include_lik)
    cdef Ctx* ctx = &keeper.ctx
    cdef bitgen_t* bg = <bitgen_t*> PyCapsule_GetPointer(
        rng.bit_generator.capsule, "BitGenerator")
    cdef int mode = _mass_mode(adapt_mass)

    cdef double z[6]
    cdef double grad[6]
    cdef double logp
    cdef Metric metric
    _metric_identity(&metric)
    z_arr = np.ascontiguousarray(z0, dtype=np.float64)
    cdef double[::1] z0_v = z_arr
    cdef int i
    for i in range(6):
        z[i] = z0_v[i]
    logp = _logpost_c(ctx, z, grad)
    if not isfinite(logp):
        raise ValueError("non-finite log target at the chain start")

    cdef double eps = _find_reasonable_epsilon_c(ctx, bg, z, logp, grad, &metric)
    cdef double mu = log(10.0 * eps)
    cdef double log_eps = log(eps)
    cdef double log_eps_bar = 0.0
    cdef double h_bar = 0.0
    cdef int m_adapt = 0
    cdef double gamma = 0.05
    cdef double t0 = 10.0
    cdef double kappa = 0.75

    windows = metric_windows(n_warmup) if mode != MASS_NONE else []
    cdef int win_idx = 0
    cdef int win_lo = -1
    cdef int win_hi = -1
    if windows:
        win_lo, win_hi = windows[0]
    window = []

    draws = np.empty((n_samples, 6))
    cdef double[:, ::1] draws_v = draws
    cdef int n_div = 0
    cdef int n_div_warmup = 0
    cdef int n_sat = 0
    cdef double accept_sum = 0.0
    cdef double accept, frac, eta
    cdef bint diverged, saturated, ok
    cdef int it, k
    cdef double[:, ::1] a_view

    for it in range(n_warmup + n_samples):
        _transition_c(ctx, bg, z, &logp, grad, eps, &metric, max_depth,
                      &accept, &diverged, &saturated)
        if it < n_warmup:
            n_div_warmup += 1 if diverged else 0
            m_adapt += 1
            frac = 1.0 / (m_adapt + t0)
            h_bar = (1.0 - frac) * h_bar + frac * (target_accept - accept)
            log_eps = mu - sqrt(m_adapt) / gamma * h_bar
            eta = m_adapt ** (-kappa)
            log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar
            eps = exp(log_eps)
            if win_idx < len(windows):
                if win_lo <= it < win_hi:
                    window.append(np.array([z[k] for k in range(6)]))
                if it == win_hi - 1:
                    if len(window) > 1:
                        A_new = _adapted_inverse_mass(np.asarray(window), mode)
                        a_view = A_new
                        ok = _metric_set(&metric, &a_view[0, 0])
                        if not ok:
                            _metric_identity(&metric)
                        mu = log(10.0 * eps)
                        h_bar = 0.0
                        m_adapt = 0
                        log_eps_bar = 0.0
                    window = []
                    win_idx += 1
                    if win_idx < len(windows):
                        win_lo, win_hi = windows[win_idx]
            if it == n_warmup - 1:
                eps = exp(log_eps_bar)
        else:
            for k in range(6):
                draws_v[it - n_warmup, k] = z[k]
            n_div += 1 if diverged else 0
            n_sat += 1 if saturated else 0
            accept_sum += accept

    return {
        "draws": draws,
        "n_divergent": n_div,
        "n_divergent_warmup": n_div_warmup,
        "n_depth_hit": n_sat,
        "step_size": eps,
        "accept_rate": accept_sum / max(n_samples, 1),
    }


def _adapted_inverse_mass(zs, mode):
    """Regularised covariance (dense) or variance (diag) of warmup draws."""
    n_w = zs.shape[0]
    shrink = n_w / (n_w + 5.0)
    ridge = 1e-3 * (5.0 / (n_w + 5.0))
    if mode == MASS_DENSE:
        A = shrink * np.cov(zs.T, ddof=1) + ridge * np.eye(6)
    else:
        A = np.diag(shrink * np.var(zs, axis=0, ddof=1) + ridge)
    return np.ascontiguousarray(A)
