"""Command-line experiments: ``linfh COMMAND --config cfg.json [--seed N] [--out DIR] [--threads N]``.

Exit status 0 means every check passed, 1 a negative verdict (witnesses in the
report), 2 a usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from ._common import (ContractError, GenerationError, HorizonTooSmallError, HypothesisViolation,
                      InvalidInputError, InvalidWeightError, NormalizationError, ResolutionError,
                      SpecInconsistencyError, Verdict, WindowError, to_jsonable)
from .conjugacy import random_sparse_coefficients, verify_diagram_P, verify_diagram_Q
from .dyadic import SampledFunction, random_piecewise_linear
from .freqdyn import (alpha_sequence, check_c0_translation_fh, check_unconditional_series,
                      construct_fh_vector, dense_sequence, extract_frequency_sets,
                      generate_frequency_sets, indicator_targets, lower_density,
                      min_spacing_backward_shift, min_spacing_c0, orbit_csv, orbit_scan,
                      required_M)
from .shifts import shift_spec_from_weight
from .weights import (check_admissibility, check_chaos_c0, check_fh_lp,
                      check_hypercyclic_translation, step_normalize, weight_from_config)

COMMANDS = ("check-weight", "check-fh", "build-vector", "extract-sets", "verify-conjugacy",
            "simulate-orbit", "series-check")

USAGE_ERRORS = (InvalidInputError, InvalidWeightError, KeyError, TypeError,
                json.JSONDecodeError, FileNotFoundError)
NEGATIVE_ERRORS = (GenerationError, HypothesisViolation, HorizonTooSmallError,
                   SpecInconsistencyError, ContractError, NormalizationError, WindowError,
                   ResolutionError)


class ConfigError(Exception):
    pass


def _positive(cfg: dict, key: str, default=None, kind=float):
    v = cfg.get(key, default)
    if v is None:
        raise ConfigError(f"missing required field {key!r}")
    v = kind(v)
    if not v > 0:
        raise ConfigError(f"{key} must be positive")
    return v


def _weight(cfg: dict, default: dict | None = None):
    spec = cfg.get("weight_spec", default)
    if spec is None:
        raise ConfigError("missing weight_spec")
    return weight_from_config(spec)


# commands -------------------------------------------------------------------

def cmd_check_weight(cfg, ctx):
    w = _weight(cfg)
    horizon = _positive(cfg, "horizon", 20.0)
    tol = _positive(cfg, "tolerance", 1e-3)
    adm = check_admissibility(w, grid_step=_positive(cfg, "grid_step", 0.25), horizon=horizon)
    out = {"admissibility": adm}
    if cfg.get("thetas"):
        out["hypercyclic"] = check_hypercyclic_translation(w, cfg["thetas"], horizon, tol)
    out["chaos_c0"] = check_chaos_c0(w, tol, horizon)
    ok = adm.verdict == Verdict.ADMISSIBLE
    return out, ok, {"horizon": horizon, "tolerances": {"tolerance": tol}}


def cmd_check_fh(cfg, ctx):
    w = _weight(cfg)
    mode = cfg.get("mode", "lp")
    if mode == "lp":
        K = _positive(cfg, "horizon", 100, int)
        tol = _positive(cfg, "tolerance", 1e-3)
        rep = check_fh_lp(w, K, tol)
        return {"lp": rep}, rep.verdict == Verdict.CONVERGENT, \
            {"horizon": K, "tolerances": {"tolerance": tol}}
    if mode == "c0":
        horizon = _positive(cfg, "horizon", 10000, int)
        tol = _positive(cfg, "tolerance", 1e-6)
        p_max = _positive(cfg, "p_max", 3, int)
        M = {p: 2.0 ** p for p in range(1, p_max + 1)}
        spacing = cfg.get("spacing") or min_spacing_c0(w, M, p_max, horizon)
        F = generate_frequency_sets(p_max, horizon, spacing=int(spacing), M=M,
                                    half_line=w.domain == "half")
        rep = check_c0_translation_fh(w, F, horizon, tol=tol)
        return {"c0": rep, "spacing": int(spacing)}, rep.ok, \
            {"horizon": horizon, "tolerances": {"tolerance": tol}}
    raise ConfigError(f"unknown mode {mode!r}")


_DEFAULT_SHIFT_WEIGHT = {"family": "geometric_abs", "base": 2.0, "step": True}


def _built_vector(cfg, ctx):
    w = _weight(cfg, _DEFAULT_SHIFT_WEIGHT)
    spec = shift_spec_from_weight(w, cfg.get("universe", "Z"))
    p_max = _positive(cfg, "p_max", 3, int)
    horizon = _positive(cfg, "horizon", 10000, int)
    alpha = alpha_sequence(spec, p_max)
    if cfg.get("targets", "indicator") == "indicator":
        targets = indicator_targets(spec, alpha)
    else:
        targets = dense_sequence(spec, p_max, seed=ctx["seed"])
    M = required_M(spec, targets)
    spacing = cfg.get("spacing") or min_spacing_backward_shift(spec, M, p_max, min(horizon, 4096))
    F = generate_frequency_sets(p_max, horizon, spacing=int(spacing), M=M)
    x, trace = construct_fh_vector(spec, F, targets, horizon)
    return spec, x, trace, targets, alpha, horizon


def cmd_build_vector(cfg, ctx):
    spec, x, trace, targets, alpha, horizon = _built_vector(cfg, ctx)
    bounds, ok = {}, True
    for p, G in trace.G.items():
        d = orbit_scan(spec, x, targets[p], G, threads=ctx["threads"])
        bounds[p] = {"max_distance": float(d.max()), "bound": spec.ratio_R ** -p,
                     "lower_density_G": lower_density(G, horizon)}
        ok &= bool(d.max() <= spec.ratio_R ** -p)
    return {"trace": trace, "bounds": bounds}, ok, \
        {"horizon": horizon, "tolerances": {"bound": "R^-p"}}


def cmd_extract_sets(cfg, ctx):
    spec, x, trace, targets, alpha, horizon = _built_vector(cfg, ctx)
    ex = extract_frequency_sets(spec, x, alpha, horizon, threads=ctx["threads"])
    ok = not ex.estimate_violations and all(len(v) for v in ex.sets.sets.values())
    return {"extraction": ex}, ok, {"horizon": horizon, "tolerances": {"F_p": "1/p"}}


def cmd_simulate_orbit(cfg, ctx):
    spec, x, trace, targets, alpha, horizon = _built_vector(cfg, ctx)
    p = int(cfg.get("target_p", 1))
    tol = _positive(cfg, "tolerance", 0.1)
    ns = np.arange(1, horizon + 1)
    d = orbit_scan(spec, x, targets[p], ns, threads=ctx["threads"])
    hits = ns[d < tol]
    dens = lower_density(hits, horizon)
    ref = lower_density(trace.G[p], horizon)
    ctx["csv"] = orbit_csv(ns, d)
    return {"hits": int(len(hits)), "lower_density_hits": dens, "lower_density_G": ref,
            "target_p": p}, dens >= 0.9 * ref, {"horizon": horizon, "tolerances": {"tolerance": tol}}


def cmd_verify_conjugacy(cfg, ctx):
    w = step_normalize(_weight(cfg))
    lo, hi = (int(v) for v in cfg.get("window", [-8, 8]))
    n_max = _positive(cfg, "n_max", 6, int)
    trials = _positive(cfg, "trials", 50, int)
    tol = _positive(cfg, "tolerance", 1e-12)
    rng = ctx["rng"]
    fs = [random_piecewise_linear(rng, lo, hi, n_max, bits=12) for _ in range(trials)]
    q = verify_diagram_Q(w, fs, n_max, tol)
    seqs = [random_sparse_coefficients(rng, lo, hi, n_max) for _ in range(trials)]
    p = verify_diagram_P(w, seqs, lo, hi, n_max, tol)
    return {"Q": q, "P": p}, q.passed and p.passed, \
        {"horizon": [lo, hi], "tolerances": {"tolerance": tol}}


def cmd_series_check(cfg, ctx):
    w = _weight(cfg)
    if "function" in cfg:
        f = SampledFunction.from_json(cfg["function"])
    else:
        f = SampledFunction.from_callable(lambda x: np.maximum(0.0, 1.0 - np.abs(x)), -2, 2, 4)
    eps = _positive(cfg, "eps", 1e-3)
    horizon = _positive(cfg, "horizon", 200, int)
    trials = _positive(cfg, "trials", 1000, int)
    rep = check_unconditional_series(f, w, trials, horizon, eps, ctx["rng"])
    return {"series": rep}, rep.verdict == Verdict.CONSISTENT, \
        {"horizon": horizon, "tolerances": {"eps": eps}}


HANDLERS: dict[str, Callable[[dict, dict], tuple[Any, bool, dict]]] = {
    "check-weight": cmd_check_weight,
    "check-fh": cmd_check_fh,
    "build-vector": cmd_build_vector,
    "extract-sets": cmd_extract_sets,
    "verify-conjugacy": cmd_verify_conjugacy,
    "simulate-orbit": cmd_simulate_orbit,
    "series-check": cmd_series_check,
}


# driver ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="linfh", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON experiment config")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--out", type=Path, help="directory for report.json and data CSV")
    ap.add_argument("--threads", type=int, default=1)
    return ap


def _dump(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(command: str, cfg: dict, seed: int | None = None, out: Path | None = None,
        threads: int = 1) -> tuple[int, dict]:
    """Run one experiment; returns ``(status, report)`` and writes files under ``out``."""
    if command not in HANDLERS:
        return 2, {"command": command, "error": f"unknown command {command!r}", "status": 2}
    cfg = dict(cfg)
    if cfg.get("command", command) != command:
        return 2, {"command": command, "status": 2,
                   "error": f"config is for {cfg['command']!r}, not {command!r}"}
    seed = int(seed if seed is not None else cfg.get("seed", 0))
    ctx = {"seed": seed, "rng": np.random.default_rng(seed), "threads": max(1, int(threads))}
    report = {"command": command, "config": cfg, "seed": seed}
    try:
        result, ok, meta = HANDLERS[command](cfg, ctx)
        status = 0 if ok else 1
        report.update(meta)
        report["result"] = result
    except (ConfigError, *USAGE_ERRORS) as exc:
        status = 2
        report["error"] = f"{type(exc).__name__}: {exc}"
    except NEGATIVE_ERRORS as exc:
        status = 1
        report["error"] = f"{type(exc).__name__}: {exc}"
    report["status"] = status
    report.setdefault("horizon", cfg.get("horizon"))
    report.setdefault("tolerances", {k: cfg[k] for k in ("tolerance", "eps") if k in cfg})
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(_dump(report))
        if "csv" in ctx:
            (out / "orbit.csv").write_text(ctx["csv"])
    return status, to_jsonable(report)


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    cfg: dict = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"linfh: cannot read config: {exc}", file=sys.stderr)
            return 2
        if not isinstance(cfg, dict):
            print("linfh: config must be a JSON object", file=sys.stderr)
            return 2
    status, report = run(args.command, cfg, args.seed, args.out, args.threads)
    sys.stdout.write(_dump(report))
    if "error" in report:
        print(f"linfh: {report['error']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
