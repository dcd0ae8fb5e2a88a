"""Command-line interface.

Subcommands cover the full pipeline: ``fit``, ``gof``, ``elicit``,
``diagnose``, ``plan1d``, ``plan2d`` and ``simulate``.  A YAML config
carries the experiment frame, design, prior, sampler and planning blocks;
``--seed`` and ``--threads`` override it from the command line.  All times
are in hundred-hours.  Tables printed to stdout use 6 significant digits;
the CSV artifacts keep full precision.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, backend, casestudy
from .cli_io import read_dataset_csv, write_dataset_csv, write_table_csv
from .criteria import optimise_1d, optimise_2d
from .diagnostics import autocorrelation
from .errors import ConfigError, DataError, NonIdentifiableError, SolverError
from .mcmc import QUANTITIES, SamplerConfig, sample_posterior
from .mle import edf_curve, fit_mle, gof_bootstrap
from .model import DesignSpec, ModelParams, StressFrame
from .priors import GammaPrior, build_prior, elicit_bootstrap
from .simulate import RngSeed, simulate_dataset

_DEFAULTS = {
    "frame": {"use_temp_k": 293.0, "low_temp_k": 320.2136, "high_temp_k": 353.0},
    "design": {"tau": 5.0, "tc": 6.0, "n": 35},
    "prior": {"preset": "I", "q": 0.001},
    "sampler": {
        "chains": 3,
        "warmup": 1000,
        "samples": 1000,
        "target_accept": 0.8,
        "max_depth": 10,
        "mass_matrix": "dense",
    },
    "planning": {
        "p": 0.10,
        "replicates": 1000,
        "m1": 25,
        "tau_range": [0.050, 5.950],
        "x1_grid": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        "n_boot": 1000,
        "n_reps": 1000,
        "truth": "fixture-mle",
    },
    "seed": 20260809,
    "threads": 1,
}


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, preset=None, seed=None, threads=None) -> dict:
    cfg = dict(_DEFAULTS)
    if preset:
        ref = resources.files("ssaltplan.data") / "presets" / f"{preset}.yaml"
        try:
            with resources.as_file(ref) as p:
                cfg = _deep_merge(cfg, yaml.safe_load(p.read_text()) or {})
        except FileNotFoundError:
            raise ConfigError(f"unknown preset {preset!r}") from None
    if path:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a key-value mapping")
        cfg = _deep_merge(cfg, loaded or {})
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    return cfg


def _frame_from(cfg: dict) -> StressFrame:
    f = cfg["frame"]
    try:
        return StressFrame.from_temperatures(
            float(f["use_temp_k"]), float(f["low_temp_k"]), float(f["high_temp_k"])
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"frame block invalid: {exc} (model.StressFrame)") from exc


def _design_from(cfg: dict, frame: StressFrame | None = None) -> DesignSpec:
    d = cfg["design"]
    try:
        return DesignSpec(
            frame=frame or _frame_from(cfg),
            tau=float(d["tau"]),
            tc=float(d["tc"]),
            n=int(d["n"]),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"design block invalid: {exc} (model.DesignSpec)") from exc


def _prior_from(cfg: dict) -> GammaPrior:
    p = cfg["prior"]
    q = float(p.get("q", 0.001))
    if "components" in p:
        try:
            return GammaPrior.from_dict({"q": q, **p})
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"prior components invalid: {exc} (priors.GammaPrior)") from exc
    preset = str(p.get("preset", "I"))
    try:
        return casestudy.stock_prior(preset, q=q)
    except ValueError as exc:
        raise ConfigError(f"prior block invalid: {exc} (priors.build_prior)") from exc


def _sampler_from(cfg: dict, seed: RngSeed) -> SamplerConfig:
    s = cfg["sampler"]
    try:
        return SamplerConfig(
            n_chains=int(s["chains"]),
            iter_warmup=int(s["warmup"]),
            iter_sampling=int(s["samples"]),
            target_accept=float(s["target_accept"]),
            max_depth=int(s["max_depth"]),
            mass_matrix=str(s.get("mass_matrix", "dense")),
            seed=seed,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"sampler block invalid: {exc} (mcmc.SamplerConfig)") from exc


def _truth_from(cfg: dict) -> ModelParams:
    t = cfg["planning"].get("truth", "fixture-mle")
    if isinstance(t, str):
        if t != "fixture-mle":
            raise ConfigError(
                f"planning.truth must be 'fixture-mle' or six numbers, got {t!r}"
            )
        return casestudy.fitted_params()
    try:
        return ModelParams.from_array(np.asarray(t, dtype=float))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"planning.truth invalid: {exc} (model.ModelParams)") from exc


def _resolve_data(arg, design: DesignSpec):
    if arg is None:
        return None
    if arg == "bundled":
        ref = resources.files("ssaltplan.data") / "solar_lighting.csv"
        with resources.as_file(ref) as path:
            return read_dataset_csv(path, design)
    return read_dataset_csv(arg, design)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_summary(out: Path, name: str, record: dict):
    (out / f"{name}_summary.yaml").write_text(
        yaml.safe_dump(record, sort_keys=False, default_flow_style=False)
    )


def _g6(x) -> str:
    return f"{x:.6g}"


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_fit(args, cfg) -> int:
    design = _design_from(cfg)
    data = _resolve_data(args.data or "bundled", design)
    fit = fit_mle(data)
    out = _outdir(args)
    p = fit.params
    rows = [
        ("1", p.a1, p.b1, p.beta1),
        ("2", p.a2, p.b2, p.beta2),
    ]
    print("cause        a          b       beta")
    for cause, a, b, be in rows:
        print(f"{cause:>5}  {_g6(a):>9}  {_g6(b):>9}  {_g6(be):>9}")
    print(f"loglik {_g6(fit.loglik)}  converged {fit.converged}  iterations {fit.iterations}")
    write_table_csv(out / "mle.csv", ["cause", "a", "b", "beta"], rows)
    _write_summary(out, "fit", {
        "params": {k: float(getattr(p, k)) for k in
                   ("a1", "b1", "beta1", "a2", "b2", "beta2")},
        "loglik": float(fit.loglik),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
    })
    return 0


def cmd_gof(args, cfg) -> int:
    design = _design_from(cfg)
    data = _resolve_data(args.data or "bundled", design)
    fit = fit_mle(data)
    n_boot = int(cfg["planning"]["n_boot"])
    seed = RngSeed(int(cfg["seed"]))
    res = gof_bootstrap(data, fit, n_boot, seed, n_jobs=int(cfg["threads"]))
    out = _outdir(args)
    print(f"KS  statistic {_g6(res.ks_stat)}   p-value {_g6(res.ks_pvalue)}")
    print(f"CvM statistic {_g6(res.cvm_stat)}   p-value {_g6(res.cvm_pvalue)}")
    t, f_emp, f_fit = edf_curve(data, fit.params)
    write_table_csv(out / "edf_curve.csv", ["time", "f_empirical", "f_fitted"],
                    list(zip(t, f_emp, f_fit)))
    _write_summary(out, "gof", {
        "ks_stat": float(res.ks_stat),
        "cvm_stat": float(res.cvm_stat),
        "ks_pvalue": float(res.ks_pvalue),
        "cvm_pvalue": float(res.cvm_pvalue),
        "n_boot": int(res.n_boot),
    })
    return 0


def cmd_elicit(args, cfg) -> int:
    design = _design_from(cfg)
    data = _resolve_data(args.data or "bundled", design)
    fit = fit_mle(data)
    q = float(cfg["prior"].get("q", 0.01))
    n_reps = int(cfg["planning"]["n_reps"])
    seed = RngSeed(int(cfg["seed"]))
    summary = elicit_bootstrap(data, fit, n_reps, q, seed, n_jobs=int(cfg["threads"]))
    out = _outdir(args)
    names = ("phi11", "phi21", "phi31", "phi12", "phi22", "phi32")
    print("component      mean        se")
    for name, m, s in zip(names, summary.means, summary.ses):
        print(f"{name:>9}  {_g6(m):>9}  {_g6(s):>9}")
    write_table_csv(out / "elicit_summary.csv", ["component", "mean", "se"],
                    list(zip(names, summary.means, summary.ses)))
    priors = {fl: build_prior(summary, fl, q=q) for fl in ("I", "II", "III")}
    (out / "priors.yaml").write_text(yaml.safe_dump(
        {f"prior_{fl}": pr.to_dict() for fl, pr in priors.items()},
        sort_keys=False,
    ))
    _write_summary(out, "elicit", {
        "n_reps": int(summary.n_valid),
        "q": q,
        "means": [float(v) for v in summary.means],
        "ses": [float(v) for v in summary.ses],
    })
    return 0


def _mad(x):
    return 1.4826 * np.median(np.abs(x - np.median(x)))


def cmd_diagnose(args, cfg) -> int:
    design = _design_from(cfg)
    data = _resolve_data(args.data, design)
    prior = _prior_from(cfg)
    seed = RngSeed(int(cfg["seed"]))
    sampler = _sampler_from(cfg, seed)
    p = float(cfg["planning"]["p"])
    draws, diag = sample_posterior(data, prior, p, sampler, design=design)
    out = _outdir(args)

    rows = []
    print("quantity        mean    median        sd       mad        q5       q95    rhat  ess_bulk  ess_tail")
    for name in QUANTITIES:
        x = draws.pooled(name)
        d = diag.per_quantity[name]
        # prior-only runs can push scale columns past the double range;
        # their summaries come out inf/nan and are reported as such
        with np.errstate(invalid="ignore", over="ignore"):
            row = (name, x.mean(), np.median(x), x.std(ddof=1), _mad(x),
                   np.quantile(x, 0.05), np.quantile(x, 0.95),
                   d.rhat, d.ess_bulk, d.ess_tail)
        rows.append(row)
        print(f"{name:>12} " + " ".join(_g6(v).rjust(9) for v in row[1:8])
              + f" {d.ess_bulk:9.0f} {d.ess_tail:9.0f}")
    print(f"divergent {diag.n_divergent}  depth_saturated {diag.n_depth_saturated}")

    write_table_csv(out / "summary.csv",
                    ["quantity", "mean", "median", "sd", "mad", "q5", "q95",
                     "rhat", "ess_bulk", "ess_tail"], rows)
    draw_rows = []
    for chain in range(draws.n_chains):
        for i in range(draws.n_draws):
            draw_rows.append([chain] + list(draws.data[chain, i]))
    write_table_csv(out / "draws.csv", ["chain"] + list(QUANTITIES), draw_rows)
    acf_rows = []
    for name in QUANTITIES:
        cols = draws.column(name)
        for chain in range(draws.n_chains):
            series = cols[chain]
            if not np.all(np.isfinite(series)) or np.allclose(series, series[0]):
                continue
            acf = autocorrelation(series, max_lag=30)
            for lag in range(1, 31):
                acf_rows.append((name, chain, lag, acf[lag]))
    write_table_csv(out / "acf.csv", ["quantity", "chain", "lag", "acf"], acf_rows)
    _write_summary(out, "diagnose", {
        "prior_only": data is None,
        "p": p,
        "n_divergent": int(diag.n_divergent),
        "n_depth_saturated": int(diag.n_depth_saturated),
        "max_rhat": float(diag.max_rhat()),
        "min_ess_bulk": float(diag.min_ess_bulk()),
        "min_ess_tail": float(diag.min_ess_tail()),
        "step_size": [float(s) for s in draws.sampler_stats["step_size"]],
    })
    return 0


def _planning_common(cfg):
    pl = cfg["planning"]
    seed = RngSeed(int(cfg["seed"]))
    sampler = _sampler_from(cfg, seed)
    prior = _prior_from(cfg)
    truth = _truth_from(cfg)
    p = float(pl["p"])
    B = int(pl["replicates"])
    m1 = int(pl["m1"])
    tau_range = tuple(float(v) for v in pl["tau_range"])
    return pl, seed, sampler, prior, truth, p, B, m1, tau_range


def cmd_plan1d(args, cfg) -> int:
    pl, seed, sampler, prior, truth, p, B, m1, tau_range = _planning_common(cfg)
    frame = _frame_from(cfg)
    design = _design_from(cfg, frame)
    optima, surface = optimise_1d(
        frame, design.tc, design.n, tau_range, m1, prior, truth, p, B,
        sampler, seed, n_jobs=int(cfg["threads"]),
    )
    out = _outdir(args)
    for crit in ("c1", "c2"):
        o = optima[crit]
        print(f"{crit}: tau_opt {_g6(o.tau)}   value {_g6(o.value)}")
    write_table_csv(out / "raw_grid.csv",
                    ["x1", "tau", "c1_raw", "c2_raw", "n_used", "n_discarded"],
                    [(pt.x1, pt.tau, pt.c1_raw, pt.c2_raw, pt.n_used, pt.n_discarded)
                     for pt in surface.points])
    tau_fine = np.linspace(tau_range[0], tau_range[1], 500)
    c1s = surface.smoothed("c1", tau_fine)
    c2s = surface.smoothed("c2", tau_fine)
    write_table_csv(out / "smoothed_curve.csv", ["tau", "c1_smooth", "c2_smooth"],
                    list(zip(tau_fine, c1s, c2s)))
    _write_summary(out, "plan1d", {
        "x1": float(frame.x1),
        "optima": {c: {"tau": float(o.tau), "value": float(o.value)}
                   for c, o in optima.items()},
    })
    return 0


def cmd_plan2d(args, cfg) -> int:
    pl, seed, sampler, prior, truth, p, B, m1, tau_range = _planning_common(cfg)
    frame = _frame_from(cfg)
    design = _design_from(cfg, frame)
    x1_grid = [float(v) for v in pl["x1_grid"]]
    if any(not (0.0 < v < 1.0) for v in x1_grid):
        raise ConfigError("planning.x1_grid values must be interior to (0, 1)")
    s1_values = [frame.s0 + v * (frame.s2 - frame.s0) for v in x1_grid]
    m2 = len(s1_values)
    optima, surface = optimise_2d(
        frame, s1_values, design.tc, design.n, tau_range, m1, prior, truth,
        p, B, sampler, seed, n_jobs=int(cfg["threads"]),
    )
    out = _outdir(args)
    for crit in ("c1", "c2"):
        o = optima[crit]
        s1_inv_k = frame.s0 + o.x1 * (frame.s2 - frame.s0)
        print(f"{crit}: x1_opt {_g6(o.x1)} (T1 {_g6(1.0 / s1_inv_k)} K)   "
              f"tau_opt {_g6(o.tau)}   value {_g6(o.value)}")
    write_table_csv(out / "raw_grid.csv",
                    ["x1", "tau", "c1_raw", "c2_raw", "n_used", "n_discarded"],
                    [(pt.x1, pt.tau, pt.c1_raw, pt.c2_raw, pt.n_used, pt.n_discarded)
                     for pt in surface.points])
    tau_fine = np.linspace(tau_range[0], tau_range[1], 100)
    x1_fine = np.linspace(x1_grid[0], x1_grid[-1], 50)
    rows = []
    for xv in x1_fine:
        c1s = surface.smoothed("c1", tau_fine, x1=np.full_like(tau_fine, xv))
        c2s = surface.smoothed("c2", tau_fine, x1=np.full_like(tau_fine, xv))
        rows.extend(zip([xv] * len(tau_fine), tau_fine, c1s, c2s))
    write_table_csv(out / "smoothed_surface.csv",
                    ["x1", "tau", "c1_smooth", "c2_smooth"], rows)
    _write_summary(out, "plan2d", {
        "optima": {c: {"x1": float(o.x1), "tau": float(o.tau), "value": float(o.value)}
                   for c, o in optima.items()},
    })
    return 0


def cmd_simulate(args, cfg) -> int:
    design = _design_from(cfg)
    truth = _truth_from(cfg)
    seed = RngSeed(int(cfg["seed"]))
    data = simulate_dataset(truth, design, seed)
    out = _outdir(args)
    write_dataset_csv(out / "data.csv", data)
    print(f"simulated {design.n} units: {data.n_failures} failures, "
          f"{design.n - data.n_failures} censored -> {out / 'data.csv'}")
    _write_summary(out, "simulate", {
        "n": int(design.n),
        "n_failures": int(data.n_failures),
        "cells": data.cell_counts().tolist(),
    })
    return 0


_COMMANDS = {
    "fit": cmd_fit,
    "gof": cmd_gof,
    "elicit": cmd_elicit,
    "diagnose": cmd_diagnose,
    "plan1d": cmd_plan1d,
    "plan2d": cmd_plan2d,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssaltplan",
        description="Bayesian planning of simple step-stress accelerated "
                    "life tests under Weibull competing risks "
                    "(times in hundred-hours).",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (backend: {backend.BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "fit": "maximum likelihood fit of a dataset",
        "gof": "bootstrap goodness-of-fit of the fitted model",
        "elicit": "bootstrap prior elicitation (summary + priors I/II/III)",
        "diagnose": "one posterior run with full convergence diagnostics",
        "plan1d": "optimal stress-change time for a fixed lower stress",
        "plan2d": "joint optimal lower stress and stress-change time",
        "simulate": "simulate a dataset from the configured truth",
    }
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--preset", help="bundled config preset name")
        sp.add_argument("--data",
                        help="dataset CSV ('bundled' = packaged case study; "
                             "diagnose runs prior-only when omitted)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--threads", type=int, help="cap worker processes")
        sp.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset, args.seed, args.threads)
        return args.fn(args, cfg)
    except (ConfigError, DataError, NonIdentifiableError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
