"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The two design-search
criteria (10, 11) run scaled-down Monte Carlo scans and dominate the
runtime; everything else completes in minutes.
"""

import csv
import math
import time

import numpy as np
import pytest
import yaml

from conftest import BOOT_MEANS, BOOT_SES, MLE_PUBLISHED, PRIOR_TABLE, make_design
from ssaltplan import backend, casestudy
from ssaltplan.cli import main as cli_main
from ssaltplan.criteria import optimise_1d, optimise_2d, smooth_1d, smooth_2d
from ssaltplan.likelihood import pack_data
from ssaltplan.mcmc import SamplerConfig
from ssaltplan.model import (
    ModelParams,
    StressFrame,
    overall_cdf,
    sub_cdf,
    theta,
    use_quantile,
)
from ssaltplan.priors import PhiParams, from_phi, mom_gamma
from ssaltplan.simulate import RngSeed, derive, simulate_dataset

SEED = 20260809


def report(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num:2d} {status}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fixture_cfg(tmp_path, extra=None):
    cfg = {
        "frame": {"use_temp_k": 293.0, "low_temp_k": 293.0, "high_temp_k": 353.0},
        "design": {"tau": 5.0, "tc": 6.0, "n": 35},
    }
    if extra:
        for k, v in extra.items():
            cfg.setdefault(k, {}).update(v)
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def test_criterion_01_mle_reproduction(tmp_path):
    cfg = _fixture_cfg(tmp_path)
    t0 = time.perf_counter()
    rc = cli_main(["fit", "--config", str(cfg), "--data", "bundled",
                   "--out", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    rows = _read_csv(tmp_path / "out" / "mle.csv")
    got = np.array([[float(r["a"]), float(r["b"]), float(r["beta"])] for r in rows]).ravel()
    err = np.max(np.abs(got - MLE_PUBLISHED))
    ok = rc == 0 and err < 1e-3 and elapsed < 1.0
    report(1, ok, f"MLE within {err:.2e} of published (tol 1e-3), {elapsed:.2f}s")


def test_criterion_02_prior_arithmetic():
    worst = 0.0
    for flavour in ("I", "II", "III"):
        means = BOOT_MEANS.copy()
        ses = BOOT_SES.copy()
        if flavour in ("II", "III"):
            ses = 1.5 * ses
        if flavour == "III":
            for k in (1, 4):
                means[k] = BOOT_MEANS[k] + 1.5 * BOOT_SES[k]
        for k, (alpha_pub, rate_pub) in enumerate(PRIOR_TABLE[flavour]):
            alpha, rate = mom_gamma(means[k], ses[k])
            # tolerance scaled by entry size: the published beta2 row is
            # internally inconsistent at the last digit (see ledger)
            worst = max(worst,
                        abs(alpha - alpha_pub) / max(1.0, alpha_pub),
                        abs(rate - rate_pub) / max(1.0, rate_pub))
    ok = worst < 5e-3
    report(2, ok, f"all 18 (alpha, rate) pairs match within {worst:.2e} scaled (tol 5e-3)")


def test_criterion_03_goodness_of_fit(tmp_path):
    cfg = _fixture_cfg(tmp_path, {"planning": {"n_boot": 1000}})
    t0 = time.perf_counter()
    rc = cli_main(["gof", "--config", str(cfg), "--data", "bundled",
                   "--seed", str(SEED), "--out", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    summary = yaml.safe_load((tmp_path / "out" / "gof_summary.yaml").read_text())
    ks_ok = abs(summary["ks_stat"] - 0.0946) < 0.02
    p_ok = summary["ks_pvalue"] > 0.5 and summary["cvm_pvalue"] > 0.5
    ok = rc == 0 and ks_ok and p_ok and elapsed < 300
    report(3, ok, (f"ks={summary['ks_stat']:.4f} (0.0946 +- 0.02), "
                   f"p_ks={summary['ks_pvalue']:.3f}, p_cvm={summary['cvm_pvalue']:.3f} "
                   f"(both > 0.5), {elapsed:.0f}s"))


def test_criterion_04_prior_recovery(tmp_path):
    cfg_dict = {
        "sampler": {"chains": 3, "warmup": 1000, "samples": 1000,
                    "target_accept": 0.8, "max_depth": 10, "mass_matrix": "diag"},
        "prior": {"preset": "I", "q": 0.001},
    }
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(cfg_dict))
    t0 = time.perf_counter()
    rc = cli_main(["diagnose", "--config", str(cfg), "--seed", str(SEED),
                   "--out", str(tmp_path / "out")])
    elapsed = time.perf_counter() - t0
    rows = {r["quantity"]: r for r in _read_csv(tmp_path / "out" / "summary.csv")}
    prior = casestudy.stock_prior("I")
    worst = 0.0
    for k, name in enumerate(("phi11", "phi21", "phi31", "phi12", "phi22", "phi32")):
        row = rows[name]
        mean, sd = float(row["mean"]), float(row["sd"])
        ess = float(row["ess_bulk"])
        mean_ref = prior.alphas[k] / prior.rates[k]
        sd_ref = math.sqrt(prior.alphas[k]) / prior.rates[k]
        mcse_mean = sd / math.sqrt(ess)
        mcse_sd = sd / math.sqrt(2 * (ess - 1))
        worst = max(worst, abs(mean - mean_ref) / (3 * mcse_mean),
                    abs(sd - sd_ref) / (3 * mcse_sd))
    ok = rc == 0 and worst < 1.0 and elapsed < 60
    report(4, ok, (f"all six phi means/sds within 3 MC standard errors "
                   f"(worst ratio {worst:.2f}), {elapsed:.0f}s"))


def test_criterion_05_convergence_reproduction(tmp_path):
    # representative design-loop replicate: data simulated at the
    # (x1 = 0.5, tau = 5) design from the prior-mean parameters
    truth = from_phi(PhiParams.from_array(BOOT_MEANS, q=0.001))
    cfg_dict = {
        "frame": {"use_temp_k": 293.0, "low_temp_k": 320.2136, "high_temp_k": 353.0},
        "design": {"tau": 5.0, "tc": 6.0, "n": 35},
        "prior": {"preset": "I", "q": 0.001},
        "sampler": {"chains": 3, "warmup": 1000, "samples": 1000,
                    "target_accept": 0.8, "max_depth": 10},
        "planning": {"p": 0.10, "truth": [float(v) for v in truth.as_array()]},
    }
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(cfg_dict))
    t0 = time.perf_counter()
    rc1 = cli_main(["simulate", "--config", str(cfg), "--seed", "3003",
                    "--out", str(tmp_path / "sim")])
    rc2 = cli_main(["diagnose", "--config", str(cfg), "--seed", "3003",
                    "--data", str(tmp_path / "sim" / "data.csv"),
                    "--out", str(tmp_path / "diag")])
    elapsed = time.perf_counter() - t0
    rows = {r["quantity"]: r for r in _read_csv(tmp_path / "diag" / "summary.csv")}
    tp_mean = float(rows["t_p"]["mean"])
    tp_sd = float(rows["t_p"]["sd"])
    rhat_max = max(float(r["rhat"]) for r in rows.values())
    summary = yaml.safe_load((tmp_path / "diag" / "diagnose_summary.yaml").read_text())
    ok = (rc1 == 0 and rc2 == 0
          and abs(tp_mean - 1.84) <= 0.15 and abs(tp_sd - 0.54) <= 0.10
          and rhat_max <= 1.01 and summary["n_divergent"] == 0
          and elapsed < 600)
    report(5, ok, (f"t_p mean {tp_mean:.3f} (1.84 +- 0.15), sd {tp_sd:.3f} "
                   f"(0.54 +- 0.10), max rhat {rhat_max:.4f} <= 1.01, "
                   f"divergences {summary['n_divergent']}, {elapsed:.0f}s"))


def test_criterion_06_gradient_correctness():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(100):
        frame = StressFrame.from_temperatures(293.0, 320.2136, 353.0)
        design = make_design(tau=rng.uniform(1.0, 4.5), n=int(rng.integers(15, 60)))
        truth = ModelParams(
            a1=rng.uniform(0.0, 4.0), b1=rng.uniform(-4.0, -0.5),
            beta1=rng.uniform(0.5, 2.5),
            a2=rng.uniform(0.0, 4.0), b2=rng.uniform(-4.0, -0.5),
            beta2=rng.uniform(0.5, 2.5),
        )
        data = simulate_dataset(truth, design, RngSeed(SEED, k))
        times, causes, x1, x2, tau, tc, n_cens = pack_data(data)
        alphas = rng.uniform(0.5, 10, 6)
        rates = rng.uniform(0.5, 6, 6)
        # evaluate where the posterior lives: near the generating values,
        # so the finite-difference probes stay inside the support
        from ssaltplan.priors import to_phi

        z = np.log(to_phi(truth, 0.001).as_array()) + rng.normal(0.0, 0.15, 6)
        args = (alphas, rates, math.log(-math.log1p(-0.001)), times, causes,
                x1, x2, tau, tc, n_cens, True)
        val, grad = backend.logpost_grad_z(z, *args)
        if not math.isfinite(val):
            continue
        fd = np.empty(6)
        for j in range(6):
            h = 1e-6 * (1 + abs(z[j]))
            up, dn = z.copy(), z.copy()
            up[j] += h
            dn[j] -= h
            fd[j] = (backend.logpost_grad_z(up, *args)[0]
                     - backend.logpost_grad_z(dn, *args)[0]) / (2 * h)
        worst = max(worst, np.max(np.abs(grad - fd) / (1.0 + np.abs(fd))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 60
    report(6, ok, (f"log-posterior gradient vs central differences: "
                   f"max rel err {worst:.2e} (tol 1e-5) over 100 pairs, {elapsed:.0f}s"))


def test_criterion_07_simulation_oracle():
    t0 = time.perf_counter()
    params = ModelParams.from_array(MLE_PUBLISHED)
    design = make_design(n=100_000)
    data = simulate_dataset(params, design, RngSeed(SEED, 7))
    times = np.sort([o.time for o in data.observations])
    grid = np.linspace(0.02, design.tc * (1 - 1e-9), 400)
    emp = np.searchsorted(times, grid, side="right") / design.n
    sup = float(np.max(np.abs(emp - overall_cdf(params, design, grid))))

    frac_ok = True
    fracs = []
    for j, other in ((1, 2), (2, 1)):
        def joint(t):
            th1, th2 = theta(params, j, design.x1), theta(params, j, design.x2)
            if t < design.tau:
                tt, th = t, th1
            else:
                tt, th = t - design.tau + (th2 / th1) * design.tau, th2
            beta = params.beta(j)
            g = (beta / th ** beta) * tt ** (beta - 1) * math.exp(-((tt / th) ** beta))
            return g * (1.0 - sub_cdf(params, other, design, t))

        tgrid = np.linspace(1e-9, design.tc, 20001)
        prob = float(np.trapezoid([joint(t) for t in tgrid], tgrid))
        frac = sum(1 for o in data.observations if o.cause == j) / design.n
        se = math.sqrt(prob * (1 - prob) / design.n)
        fracs.append((frac, prob, se))
        frac_ok = frac_ok and abs(frac - prob) < 3 * se
    elapsed = time.perf_counter() - t0
    ok = sup < 0.02 and frac_ok and elapsed < 60
    detail = ", ".join(f"cause frac {f:.4f} vs {p:.4f} (3se {3 * s:.4f})"
                       for f, p, s in fracs)
    report(7, ok, f"ecdf sup-distance {sup:.4f} < 0.02; {detail}; {elapsed:.0f}s")


def test_criterion_08_quantile_solver():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        params = ModelParams(
            a1=rng.uniform(-2.0, 5.0), b1=-1.0, beta1=rng.uniform(0.3, 4.0),
            a2=rng.uniform(-2.0, 5.0), b2=-1.0, beta2=rng.uniform(0.3, 4.0),
        )
        p = rng.uniform(0.001, 0.999)
        t = use_quantile(params, p)
        target = -math.log1p(-p)

        def lhs(v):
            return ((v * math.exp(-params.a1)) ** params.beta1
                    + (v * math.exp(-params.a2)) ** params.beta2)

        lo, hi = 0.0, 1.0
        while lhs(hi) < target:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if lhs(mid) < target:
                lo = mid
            else:
                hi = mid
        oracle = 0.5 * (lo + hi)
        worst = max(worst, abs(t - oracle) / max(1.0, oracle))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 10
    report(8, ok, f"solver vs bisection oracle: worst {worst:.2e} (tol 1e-10), {elapsed:.1f}s")


def test_criterion_09_smoother_oracles():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    # brute-force weighted-sum oracles
    grid = np.linspace(0.05, 5.95, 25)
    vals = rng.uniform(0.1, 2.0, 25)
    h = (5.95 - 0.05) / 24
    queries = np.linspace(0.05, 5.95, 500)
    mine = smooth_1d(grid, vals, h, queries)
    worst1 = 0.0
    for q, got in zip(queries, mine):
        w = np.exp(-0.5 * ((q - grid) / h) ** 2)
        worst1 = max(worst1, abs(got - float(np.sum(w * vals) / np.sum(w))))
    x1g = np.linspace(0.1, 0.9, 5)
    sval = rng.uniform(0.1, 2.0, (5, 25))
    hx = 0.8 / 4
    worst2 = 0.0
    for _ in range(100):
        xq, tq = rng.uniform(0.1, 0.9), rng.uniform(0.05, 5.95)
        wx = np.exp(-0.5 * ((xq - x1g) / hx) ** 2)
        wt = np.exp(-0.5 * ((tq - grid) / h) ** 2)
        w = wx[:, None] * wt[None, :]
        oracle = float(np.sum(w * sval) / np.sum(w))
        worst2 = max(worst2, abs(smooth_2d(x1g, grid, sval, hx, h, xq, tq) - oracle))
    # convex-combination bound on random surfaces
    bound_ok = True
    for _ in range(30):
        v = rng.uniform(-5, 5, 25)
        sm = smooth_1d(grid, v, h, rng.uniform(0.05, 5.95, 40))
        bound_ok = bound_ok and np.all(sm >= v.min() - 1e-12) and np.all(sm <= v.max() + 1e-12)
    # injected symmetric convex curve: minimiser within one fine-grid step
    from ssaltplan.criteria import CriterionPoint

    centre = 0.5 * (0.05 + 5.95)
    c1 = (grid - centre) ** 2 + 0.2
    points = [CriterionPoint(x1=0.5, tau=float(t), c1_raw=float(v), c2_raw=float(v),
                             n_used=1, n_discarded=0) for t, v in zip(grid, c1)]
    optima, _ = optimise_1d(
        StressFrame.from_temperatures(293.0, 320.2136, 353.0), 6.0, 35,
        (0.05, 5.95), 25, casestudy.stock_prior("I"), casestudy.fitted_params(),
        0.10, 1, SamplerConfig(seed=RngSeed(1, 1)), RngSeed(1, 1), raw_points=points,
    )
    step = (5.95 - 0.05) / 499
    vertex_ok = abs(optima["c1"].tau - centre) <= step + 1e-12
    elapsed = time.perf_counter() - t0
    ok = worst1 < 1e-12 and worst2 < 1e-12 and bound_ok and vertex_ok and elapsed < 10
    report(9, ok, (f"1-d oracle {worst1:.1e}, 2-d oracle {worst2:.1e} (tol 1e-12), "
                   f"convex bound holds, vertex within one fine step, {elapsed:.1f}s"))


DESK_1D = dict(m1=9, B=50)


def _desk_sampler(seed):
    return SamplerConfig(n_chains=3, iter_warmup=500, iter_sampling=500, seed=seed)


@pytest.mark.slow
def test_criterion_10_desk_scale_trends():
    truth = casestudy.fitted_params()
    prior = casestudy.stock_prior("I")
    t0 = time.perf_counter()

    def run(x1, n, tag):
        frame_s1 = 1.0 / 293.0 + x1 * (1.0 / 353.0 - 1.0 / 293.0)
        frame = StressFrame(1.0 / 293.0, frame_s1, 1.0 / 353.0)
        seed = derive(RngSeed(SEED, 10), tag)
        optima, _ = optimise_1d(
            frame, 6.0, n, (0.05, 5.95), DESK_1D["m1"], prior, truth, 0.10,
            DESK_1D["B"], _desk_sampler(seed), seed,
        )
        return optima["c1"].value, optima["c2"].value

    # (a) criterion values strictly increase with the lower stress level
    c_by_x1 = {x1: run(x1, 35, k) for k, x1 in enumerate((0.1, 0.5, 0.9))}
    inc_c1 = c_by_x1[0.1][0] < c_by_x1[0.5][0] < c_by_x1[0.9][0]
    inc_c2 = c_by_x1[0.1][1] < c_by_x1[0.5][1] < c_by_x1[0.9][1]

    # (b) larger samples reduce both criteria at the mid stress
    c_n20 = run(0.5, 20, 20)
    c_n50 = run(0.5, 50, 50)
    dec_c1 = c_n50[0] < c_n20[0]
    dec_c2 = c_n50[1] < c_n20[1]
    elapsed = time.perf_counter() - t0
    ok = inc_c1 and inc_c2 and dec_c1 and dec_c2 and elapsed < 7200
    report(10, ok, (
        f"C1 over x1: {c_by_x1[0.1][0]:.3f} < {c_by_x1[0.5][0]:.3f} < {c_by_x1[0.9][0]:.3f}; "
        f"C2 over x1: {c_by_x1[0.1][1]:.3f} < {c_by_x1[0.5][1]:.3f} < {c_by_x1[0.9][1]:.3f}; "
        f"n=50 vs n=20: C1 {c_n50[0]:.3f} < {c_n20[0]:.3f}, "
        f"C2 {c_n50[1]:.3f} < {c_n20[1]:.3f}; {elapsed / 60:.0f} min"))


@pytest.mark.slow
def test_criterion_11_desk_scale_two_variable():
    truth = casestudy.fitted_params()
    prior = casestudy.stock_prior("I")
    frame = StressFrame.from_temperatures(293.0, 320.2136, 353.0)
    x1_grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    s1_vals = [frame.s0 + x * (frame.s2 - frame.s0) for x in x1_grid]
    seed = RngSeed(SEED, 11)
    t0 = time.perf_counter()
    optima, surface = optimise_2d(
        frame, s1_vals, 6.0, 35, (0.05, 5.95), 9, prior, truth, 0.10, 25,
        _desk_sampler(seed), seed,
    )
    elapsed = time.perf_counter() - t0
    x1_step = (x1_grid[-1] - x1_grid[0]) / 49
    at_low_c1 = abs(optima["c1"].x1 - 0.1) <= x1_step + 1e-9
    at_low_c2 = abs(optima["c2"].x1 - 0.1) <= x1_step + 1e-9
    ok = at_low_c1 and at_low_c2 and elapsed < 10800
    report(11, ok, (f"two-variable optimum at lowest stress: "
                    f"C1 x1={optima['c1'].x1:.3f}, C2 x1={optima['c2'].x1:.3f} "
                    f"(grid low 0.1), {elapsed / 60:.0f} min"))
