"""End-to-end acceptance checks; each prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from linfh import Verdict
from linfh.conjugacy import random_sparse_coefficients, verify_diagram_P, verify_diagram_Q
from linfh.dyadic import (SampledFunction, level_sup_bound_holds, random_piecewise_linear,
                          reconstruct, schauder_coefficients)
from linfh.freqdyn import (alpha_sequence, avoid_points, check_unconditional_series,
                           construct_fh_vector, counterexample_pipeline, dip_profile_weights,
                           extract_frequency_sets, generate_frequency_sets, indicator_targets,
                           lower_density, min_spacing_backward_shift, orbit_scan, required_M)
from linfh.shifts import SparseSeq, discretization_inequality, lpv_conjugate, shift_spec_from_weight
from linfh.weights import check_admissibility, check_fh_lp, family_weight

STEP_WEIGHTS = {
    "constant": family_weight("constant", step=True),
    "exp_abs": family_weight("exp_abs", step=True, rate=1.0),
    "geometric_abs": family_weight("geometric_abs", step=True, base=2.0),
}
EXP_ABS = family_weight("exp_abs", rate=1.0)
ONE = family_weight("constant")
H5 = 10 ** 5


def record(log, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    log.append(line)
    assert ok, line


def test_criterion_1_schauder_round_trip(acceptance_log):
    rng = np.random.default_rng(1)
    fs = [random_piecewise_linear(rng, -8, 8, 8) for _ in range(200)]
    t0 = time.perf_counter()
    mismatches = 0
    for f in fs:
        g = reconstruct(schauder_coefficients(f, 8), -8, 8, 8)
        mismatches += int(not np.array_equal(f.values, g.values))
    dt = time.perf_counter() - t0
    record(acceptance_log, 1, mismatches == 0 and dt < 5.0,
           f"mismatches={mismatches} runtime={dt:.2f}s (limit 5s)")


def test_criterion_2_level_bound(acceptance_log):
    rng = np.random.default_rng(2)
    violations = 0
    for _ in range(500):
        n = int(rng.integers(0, 7))
        a = random_sparse_coefficients(rng, -6, 6, 6, count=int(rng.integers(1, 12)),
                                       single_level=n)
        ok, _, _ = level_sup_bound_holds(a, -6, 6, 6)
        violations += int(not ok)
    record(acceptance_log, 2, violations == 0, f"sets=500 violations={violations}")


def test_criterion_3_quasiconjugacy_Q(acceptance_log):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    residual, violations = 0.0, 0
    for w in STEP_WEIGHTS.values():
        fs = [random_piecewise_linear(rng, -8, 8, 6, bits=12) for _ in range(50)]
        rep = verify_diagram_Q(w, fs, 6)
        residual = max(residual, rep.residual)
        violations += rep.norm_violations
    dt = time.perf_counter() - t0
    record(acceptance_log, 3, residual <= 1e-12 and violations == 0 and dt < 10.0,
           f"residual={residual:.3g} norm_violations={violations} runtime={dt:.2f}s (limit 10s)")


def test_criterion_4_quasiconjugacy_P(acceptance_log):
    rng = np.random.default_rng(4)
    residual, violations, bounds = 0.0, 0, []
    for w in STEP_WEIGHTS.values():
        seqs = [random_sparse_coefficients(rng, -8, 8, 6) for _ in range(50)]
        rep = verify_diagram_P(w, seqs, -8, 8, 6)
        residual = max(residual, rep.residual)
        violations += rep.norm_violations
        bounds.append(rep.norm_bound_checked[0])
    record(acceptance_log, 4, residual <= 1e-12 and violations == 0,
           f"residual={residual:.3g} norm_violations={violations} B+4={bounds}")


@pytest.fixture(scope="module")
def built():
    t0 = time.perf_counter()
    rho = STEP_WEIGHTS["geometric_abs"]
    spec = shift_spec_from_weight(rho, "Z", window=(-64, 64))
    alpha = alpha_sequence(spec, 3)
    targets = indicator_targets(spec, alpha)
    M = required_M(spec, targets)
    d = min_spacing_backward_shift(spec, M, 3, 4096)
    F = generate_frequency_sets(3, H5, spacing=d, M=M)
    x, trace = construct_fh_vector(spec, F, targets, H5)
    return spec, alpha, targets, x, trace, t0


def test_criterion_5_fh_vector(acceptance_log, built):
    spec, alpha, targets, x, trace, t0 = built
    R = spec.ratio_R
    worst = {}
    for p, G in trace.G.items():
        worst[p] = float(orbit_scan(spec, x, targets[p], G, threads=4).max())
    ns = np.arange(1, H5 + 1)
    dist = orbit_scan(spec, x, targets[1], ns, threads=4)
    dens_hits = lower_density(ns[dist < 0.1], H5)
    dens_G = lower_density(trace.G[1], H5)
    dt = time.perf_counter() - t0
    bounds_ok = all(worst[p] <= R ** -p for p in worst) and sorted(worst) == [1, 2, 3]
    record(acceptance_log, 5, bounds_ok and dens_hits >= 0.9 * dens_G and dt < 60.0,
           f"max_dist={ {p: f'{v:.2g}' for p, v in worst.items()} } "
           f"ldens_hits={dens_hits:.4g} ldens_G1={dens_G:.4g} runtime={dt:.1f}s (limit 60s)")


def test_criterion_6_extraction_round_trip(acceptance_log, built):
    spec, alpha, targets, x, trace, _ = built
    ex = extract_frequency_sets(spec, x, alpha, H5, threads=4)
    sizes = {p: len(ex.sets[p]) for p in (1, 2, 3)}
    ok = (all(sizes.values()) and not ex.estimate_violations and ex.estimates_checked > 0)
    record(acceptance_log, 6, ok, f"sizes={sizes} estimates_checked={ex.estimates_checked} "
                                  f"violations={len(ex.estimate_violations)}")


def test_criterion_7_lp_characterization(acceptance_log):
    closed = 1 + 2 * math.exp(-1) / (1 - math.exp(-1))
    conv = check_fh_lp(EXP_ABS, 100)
    div = check_fh_lp(ONE, 100)
    A = check_admissibility(EXP_ABS, horizon=20).fitted_A_B[0]
    rng = np.random.default_rng(7)
    bad = 0
    for i in range(100):
        f = random_piecewise_linear(rng, -6, 6, 3, bits=10, frac_bits=4)
        lhs, rhs = discretization_inequality(f, EXP_ABS, (1.0, 2.0, 3.0)[i % 3], A)
        bad += int(lhs > rhs * (1 + 1e-12))
    err = abs(conv.partial_sum - closed)
    ok = (conv.verdict == Verdict.CONVERGENT and err <= 1e-6
          and div.verdict == Verdict.DIVERGENT and bad == 0)
    record(acceptance_log, 7, ok, f"partial_sum_err={err:.3g} constant={div.verdict} "
                                  f"discretize_violations={bad}/100")


def test_criterion_8_lpv_conjugacy(acceptance_log):
    rng = np.random.default_rng(8)
    worst = 0.0
    for p in (1, 2):
        c = lpv_conjugate(lambda k: math.exp(-abs(k)), p)
        for _ in range(100):
            idx = rng.choice(np.arange(-30, 31), size=int(rng.integers(1, 15)), replace=False)
            x = SparseSeq({int(i): float(v) for i, v in zip(idx, rng.normal(size=len(idx)))})
            worst = max(worst, c.commutator_defect(x))
    record(acceptance_log, 8, worst <= 1e-12, f"max_entry_defect={worst:.3g} p=1,2")


def test_criterion_9_unconditional_series(acceptance_log):
    phi0 = SampledFunction.from_callable(lambda x: np.maximum(0.0, 1.0 - np.abs(x)), -2, 2, 4)
    rep = check_unconditional_series(phi0, EXP_ABS, 1000, 200, 1e-3, np.random.default_rng(9))
    neg = check_unconditional_series(phi0, ONE, 200, 100, 1e-3, np.random.default_rng(9))
    ok = (rep.verdict == Verdict.CONSISTENT and rep.violations == 0 and rep.max_norm <= 2e-3
          and neg.verdict == Verdict.REFUTED_AT_HORIZON and bool(neg.witness))
    record(acceptance_log, 9, ok, f"M_eps={rep.M_eps} max_norm={rep.max_norm:.3g} "
                                  f"trials={rep.trials} constant={neg.verdict}")


def test_criterion_10_counterexample(acceptance_log):
    G, H = 16, 4096
    ones = [G * 2 ** j + G // 2 for j in range(20) if G * 2 ** j + G // 2 <= H]
    ws = dip_profile_weights(ones, H)
    F = avoid_points(generate_frequency_sets(3, H, spacing=G, M={1: 2.0, 2: 4.0, 3: 8.0}),
                     ones, lambda s: math.sqrt(s))
    rep = counterexample_pipeline(ws, ones, F, H)
    ok = (rep.weights_bounded and rep.ones_verified and rep.fh.ok
          and rep.chaos.verdict == Verdict.REFUTED_AT_HORIZON and rep.fh_without_mixing)
    record(acceptance_log, 10, ok, f"ones={len(ones)} chaos={rep.chaos.verdict} "
                                   f"fh_conditions={'ok' if rep.fh.ok else 'failed'}")
