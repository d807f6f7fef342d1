import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linfh import Verdict
from linfh._common import (ContractError, GenerationError, HorizonTooSmallError,
                           HypothesisViolation, InvalidInputError, SpecInconsistencyError)
from linfh.dyadic import SampledFunction, wn_set
from linfh.freqdyn import (FrequencySets, alpha_sequence, avoid_points, check_c0_translation_fh,
                           check_thm21_conditions, check_unconditional_series,
                           construct_fh_vector, continuous_lower_density, counterexample_pipeline,
                           dense_sequence, dip_profile_weights, extract_frequency_sets,
                           generate_frequency_sets, indicator_targets, lower_density,
                           min_spacing_backward_shift, min_spacing_c0, orbit_csv, orbit_scan,
                           required_M, separation_witness)
from linfh.shifts import LogPrefix, LogSeq, SparseSeq, backward_shift_spec, pseudo_shift_apply, \
    shift_spec_from_weight
from linfh.weights import family_weight

GEO = family_weight("geometric_abs", step=True, base=2.0)
EXP_ABS = family_weight("exp_abs", rate=1.0)
ONE = family_weight("constant")


@pytest.fixture(scope="module")
def geo_spec():
    return shift_spec_from_weight(GEO, "Z")


def shift_setup(spec, p_max, horizon, targets=None):
    alpha = alpha_sequence(spec, p_max)
    targets = targets or indicator_targets(spec, alpha)
    M = required_M(spec, targets)
    d = min_spacing_backward_shift(spec, M, p_max, min(horizon, 2048))
    return alpha, targets, generate_frequency_sets(p_max, horizon, spacing=d, M=M)


# densities

def test_lower_density_even_numbers():
    assert lower_density(range(0, 10 ** 4 + 1, 2), 10 ** 4) == pytest.approx(0.5, abs=1e-3)


def test_lower_density_squares():
    N = 10 ** 6
    val = lower_density([k * k for k in range(1, 1001)], N)
    oracle = min(math.isqrt(m) / m for m in range(N // 2, N + 1))
    assert val == pytest.approx(oracle, rel=1e-12)
    assert val <= 1e-3


def test_lower_density_full_set_and_contract():
    assert lower_density(range(1, 501), 500) == 1.0
    with pytest.raises(InvalidInputError):
        lower_density([1], 0)


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(1, 400), max_size=200), st.sets(st.integers(1, 400), max_size=200))
def test_lower_density_monotone(a, b):
    assert lower_density(sorted(a), 400) <= lower_density(sorted(a | b), 400)


@given(st.integers(2, 12), st.data())
def test_lower_density_congruence_classes(q, data):
    r1 = data.draw(st.integers(0, q - 1))
    r2 = data.draw(st.integers(0, q - 1).filter(lambda r: r != r1))
    N = 6000
    A = [n for n in range(1, N + 1) if n % q == r1]
    B = [n for n in range(1, N + 1) if n % q == r2]
    dA, dB, dU = lower_density(A, N), lower_density(B, N), lower_density(sorted(A + B), N)
    assert dU >= dA + dB - 1e-15
    assert dU == pytest.approx(2 / q, abs=4 / N)


def test_continuous_lower_density_examples():
    assert continuous_lower_density([(2 * k, 2 * k + 1) for k in range(500)], 1000) == 0.5
    assert continuous_lower_density([], 100) == 0.0
    T = 1000
    ivs = [(k, k + Fraction(1, k)) for k in range(1, T)]
    val = continuous_lower_density(ivs, T)
    # oracle: measure(t) / t on every interval end and T/2, T
    def meas(t):
        return sum(min(b, t) - a for a, b in ivs if a < t)
    oracle = min(meas(Fraction(t)) / t for t in range(T // 2, T + 1))
    assert val == pytest.approx(float(oracle), rel=1e-12)
    assert val <= 0.02


def test_continuous_lower_density_rejects_overlap():
    with pytest.raises(InvalidInputError):
        continuous_lower_density([(0, 2), (1, 3)], 5)


# generation

def test_generate_single_set_is_even_numbers():
    F = generate_frequency_sets(1, 1000)
    assert F[1][:4].tolist() == [2, 4, 6, 8]
    # odd m in the window give floor(m/2)/m, minimal at m = 501
    assert lower_density(F[1], 1000) == pytest.approx(250 / 501, rel=1e-12)


def test_generate_three_sets_separated():
    F = generate_frequency_sets(3, 5000)
    assert separation_witness(F) is None and F.pairwise_disjoint()
    # exhaustive intersection test of (E_p + [[-p, p]])
    for p in F.ps:
        for q in F.ps:
            if p < q:
                A = {n + k for n in F[p].tolist() for k in range(-p, p + 1)}
                B = {n + k for n in F[q].tolist() for k in range(-q, q + 1)}
                assert not A & B
    assert all(lower_density(F[p], 5000) > 0 for p in F.ps)


def test_generate_contract_errors():
    with pytest.raises(GenerationError):
        generate_frequency_sets(3, 10, spacing=20)
    with pytest.raises(GenerationError):
        generate_frequency_sets(3, 1000, spacing=3)


def test_frequency_sets_json_round_trip():
    F = generate_frequency_sets(2, 300)
    G = FrequencySets.from_json(F.to_json())
    assert G.ps == F.ps and all(np.array_equal(G[p], F[p]) for p in F.ps) and G.M == F.M
    with pytest.raises(InvalidInputError):
        FrequencySets({1: [3, 2]}, {1: 2.0}, 10)


def test_disjointness_propagates_to_dyadic_truncations():
    F = generate_frequency_sets(2, 400)
    seen = {}
    for p in F.ps:
        for n in F[p].tolist():
            for s in wn_set(p):
                v = n + s.value
                assert seen.setdefault(v, p) == p
                # integer parts land in n + [[-p, p]]
                assert n - p <= math.floor(v) <= n + p


# pseudo-shift conditions

def test_pseudo_shift_conditions_pass_for_geometric_shift(geo_spec):
    _, _, F = shift_setup(geo_spec, 3, 10 ** 4)
    rep = check_thm21_conditions(geo_spec, F, 10 ** 4)
    assert rep.ok, rep.to_json()
    assert rep["d"].details["pairs_checked"] > 0


def test_pseudo_shift_unweighted_shift_fails_c():
    spec = backward_shift_spec(LogPrefix(lambda k: 0.0 * k, -10, 10), "Z")
    F = generate_frequency_sets(2, 2000, M={1: 1.0, 2: 1.0})
    rep = check_thm21_conditions(spec, F)
    assert rep["c"].verdict == Verdict.REFUTED_AT_HORIZON and rep["c"].witnesses


def test_pseudo_shift_identical_sets_fail_b(geo_spec):
    F = generate_frequency_sets(1, 2000)
    G = FrequencySets({1: F[1], 2: F[1]}, {1: 2.0, 2: 4.0}, 2000)
    rep = check_thm21_conditions(geo_spec, G)
    assert rep["b"].verdict == Verdict.FAIL
    w = rep["b"].witnesses[0]
    assert w["p"] == 1 and w["q"] == 2


def test_pseudo_shift_generic_path_matches_vectorized(geo_spec):
    _, _, F = shift_setup(geo_spec, 2, 1500)
    generic = shift_spec_from_weight(GEO, "Z")
    generic.vectorized = False
    a = check_thm21_conditions(geo_spec, F)
    b = check_thm21_conditions(generic, F)
    assert a["d"].details["pairs_checked"] == b["d"].details["pairs_checked"]
    assert a["d"].details["worst_log_excess"] == pytest.approx(b["d"].details["worst_log_excess"])


# translation semigroup on C_0

def test_c0_conditions_exp_abs():
    M = {1: 2.0, 2: 4.0, 3: 8.0}
    d = min_spacing_c0(EXP_ABS, M, 3, 5000)
    assert d >= math.log(M[3] * M[3])
    rep = check_c0_translation_fh(EXP_ABS, generate_frequency_sets(3, 5000, spacing=d, M=M))
    assert rep.ok and rep.extra["k_plus_n_violations"] == 0
    assert rep.extra["ratio_M"] == pytest.approx(math.e)


def test_c0_conditions_constant_fail():
    rep = check_c0_translation_fh(ONE, generate_frequency_sets(2, 2000))
    assert not rep["c"].ok and not rep["d"].ok


def test_c0_ratio_hypothesis_violation():
    with pytest.raises(HypothesisViolation):
        check_c0_translation_fh(family_weight("gauss"), generate_frequency_sets(1, 200))


def test_c0_half_line():
    w = family_weight("exp_neg", domain="half", rate=1.0)
    F = generate_frequency_sets(2, 3000, M={1: 2.0, 2: 4.0}, half_line=True)
    rep = check_c0_translation_fh(w, F)
    assert rep.ok


# construction

def test_zero_targets_give_zero_vector(geo_spec):
    zero = {p: SparseSeq({}, "Z") for p in (1, 2)}
    F = generate_frequency_sets(2, 4000, spacing=40, M={1: 2.0 ** 4, 2: 2.0 ** 8})
    x, trace = construct_fh_vector(geo_spec, F, zero)
    assert len(x) == 0


def test_single_unit_target_formula(geo_spec):
    y = {1: SparseSeq({0: 1.0})}
    F = generate_frequency_sets(1, 2000, M={1: 16.0})
    x, trace = construct_fh_vector(geo_spec, F, y)
    assert set(x.log_abs) == {n for n in trace.G[1]}
    for n in trace.G[1]:
        # x_{phi_n(0)} = 1 / b^n_0 = rho(n)/rho(0) = 2^-n
        assert x.log_abs[n] == pytest.approx(-n * math.log(2), rel=1e-12)


def test_construction_bound_and_trace_invariants(geo_spec):
    targets = dense_sequence(geo_spec, 2, seed=3)
    alpha, targets, F = shift_setup(geo_spec, 2, 10 ** 4, targets)
    x, tr = construct_fh_vector(geo_spec, F, targets, check=True)
    R = geo_spec.ratio_R
    for p, G in tr.G.items():
        assert set(G) <= set(tr.E_prime[p]) <= set(F[tr.subsequence[p]].tolist())
        assert np.all(np.diff(G) > 2 * tr.psi[p])
        d = orbit_scan(geo_spec, x, targets[p], G)
        assert d.max() <= R ** -p
        y = targets[p]
        assert set(y.entries) <= set(geo_spec.W(p)) and y.sup_norm() < R ** p
    # every level-p entry is at most R^p / R^{4p}
    owner = {}
    for p, G in tr.G.items():
        for n in G:
            for s in geo_spec.W(p):
                owner[n + s] = p
    for i, la in x.log_abs.items():
        assert la <= -3 * owner[i] * math.log(R) + 1e-9


def test_double_assignment_detected(geo_spec):
    F = generate_frequency_sets(1, 3000, M={1: 2.0 ** 12})
    G = FrequencySets({1: F[1], 2: F[1]}, {1: 2.0 ** 12, 2: 2.0 ** 12}, 3000)
    y = {1: SparseSeq({0: 1.0}), 2: SparseSeq({0: 1.0})}
    with pytest.raises(SpecInconsistencyError):
        construct_fh_vector(geo_spec, G, y)


def test_empty_G_is_horizon_error(geo_spec):
    F = FrequencySets({1: [10, 20]}, {1: 16.0}, 25)
    with pytest.raises(HorizonTooSmallError):
        construct_fh_vector(geo_spec, F, {1: SparseSeq({0: 1.0})})


def test_insufficient_M_rejected(geo_spec):
    F = generate_frequency_sets(1, 500, M={1: 2.0})
    with pytest.raises(SpecInconsistencyError):
        construct_fh_vector(geo_spec, F, {1: SparseSeq({0: 1.0})})


def test_alpha_sequence_growth(geo_spec):
    alpha = alpha_sequence(geo_spec, 4)
    assert alpha[1] == 2.0
    R = geo_spec.ratio_R
    for p in range(2, 5):
        assert alpha[p] > 4 * alpha[p - 1] * R ** (2 * geo_spec.psi(p))


# orbits and extraction

def test_orbit_scan_paths_agree(geo_spec):
    alpha, targets, F = shift_setup(geo_spec, 2, 3000)
    x, _ = construct_fh_vector(geo_spec, F, targets)
    ns = np.arange(1, 400, 7)
    fast = orbit_scan(geo_spec, x, targets[1], ns)
    threaded = orbit_scan(geo_spec, x, targets[1], ns, threads=3, block=8)
    slow = np.array([(pseudo_shift_apply(geo_spec, int(n), x) - targets[1]).sup_norm() for n in ns])
    assert np.array_equal(fast, threaded)
    assert np.allclose(fast, slow, rtol=1e-12, atol=0)


def test_orbit_csv_header():
    lines = orbit_csv([1, 2], [0.5, 1.0]).splitlines()
    assert lines[:2] == ["# schema=1", "n,distance"] and lines[2] == "1,0.5"


def test_extract_from_zero_vector(geo_spec):
    alpha = alpha_sequence(geo_spec, 2)
    ex = extract_frequency_sets(geo_spec, SparseSeq({}), alpha, 500)
    assert all(len(v) == 0 for v in ex.F.values())


def test_extract_random_vector_is_empty(geo_spec):
    rng = np.random.default_rng(0)
    x = SparseSeq({int(i): float(v) for i, v in zip(rng.integers(-50, 50, 20), rng.normal(size=20))})
    ex = extract_frequency_sets(geo_spec, x, alpha_sequence(geo_spec, 2), 2000)
    assert all(len(v) == 0 for v in ex.F.values())


def test_extract_rejects_bad_alpha(geo_spec):
    with pytest.raises(InvalidInputError):
        extract_frequency_sets(geo_spec, SparseSeq({}), {1: 2.0, 2: 3.0}, 10)


def test_extract_round_trip_small(geo_spec):
    alpha, targets, F = shift_setup(geo_spec, 2, 2 * 10 ** 4)
    x, tr = construct_fh_vector(geo_spec, F, targets)
    ex = extract_frequency_sets(geo_spec, x, alpha, 2 * 10 ** 4)
    assert not ex.estimate_violations and ex.estimates_checked > 0
    for p in (1, 2):
        assert len(ex.sets[p]) > 0
        assert set(ex.sets[p].tolist()) <= set(tr.G[p])
    rep = check_thm21_conditions(geo_spec, ex.sets)
    assert rep["b"].ok and rep["d"].ok and rep["a"].ok


# unconditional series

HAT = SampledFunction.from_callable(lambda x: np.maximum(0.0, 1.0 - np.abs(x)), -2, 2, 4)


def test_series_exp_abs():
    rep = check_unconditional_series(HAT, EXP_ABS, 300, 150, 1e-3, np.random.default_rng(0))
    assert rep.verdict == Verdict.CONSISTENT and rep.violations == 0
    assert 6.5 <= rep.M_eps <= 8.0
    assert rep.max_norm <= 2e-3


def test_series_zero_function():
    f = SampledFunction(-2, 2, 2, np.zeros(17))
    rep = check_unconditional_series(f, EXP_ABS, 10, 50, 1e-3)
    assert rep.max_norm == 0.0


def test_series_constant_weight_refutes():
    rep = check_unconditional_series(HAT, ONE, 50, 100, 1e-3, np.random.default_rng(1))
    assert rep.verdict == Verdict.REFUTED_AT_HORIZON and rep.witness


def test_series_requires_compact_support():
    f = SampledFunction.from_callable(lambda x: 1.0 + 0 * x, -2, 2, 2)
    with pytest.raises(ContractError):
        check_unconditional_series(f, EXP_ABS, 5, 50, 1e-3)


# counterexample

def test_counterexample_pipeline():
    G, H = 16, 2048
    ones = [G * 2 ** j + G // 2 for j in range(10) if G * 2 ** j + G // 2 <= H]
    ws = dip_profile_weights(ones, H)
    assert all(0.5 <= v <= 2 for v in ws.values())
    F = avoid_points(generate_frequency_sets(3, H, spacing=G, M={1: 2.0, 2: 4.0, 3: 8.0}),
                     ones, lambda s: math.sqrt(s))
    rep = counterexample_pipeline(ws, ones, F, H)
    assert rep.ones_verified and rep.fh_without_mixing


def test_counterexample_pipeline_detects_wrong_set():
    ws = {k: 0.5 for k in range(-64, 65)}
    F = generate_frequency_sets(1, 64)
    rep = counterexample_pipeline(ws, [10], F, 64)
    assert not rep.ones_verified and not rep.fh_without_mixing
