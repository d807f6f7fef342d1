import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linfh import Verdict
from linfh._common import InvalidInputError, InvalidWeightError
from linfh.weights import (check_admissibility, check_chaos_c0, check_chaos_lp, check_fh_lp,
                           check_hypercyclic_translation, family_weight, integer_ratio_bound,
                           step_normalize, table_weight, weight_from_config,
                           weight_from_shift_weights)

ONE = family_weight("constant")
EXP_ABS = family_weight("exp_abs", rate=1.0)


# admissibility

def test_constant_weight_is_admissible_with_unit_constants():
    rep = check_admissibility(ONE)
    assert rep.verdict == Verdict.ADMISSIBLE
    assert rep.fitted_M == pytest.approx(1.0)
    assert rep.fitted_omega == pytest.approx(0.0, abs=1e-12)
    assert rep.fitted_A_B == pytest.approx((1.0, 1.0))


def test_exp_neg_has_M_one_omega_one():
    # rho(tau)/rho(tau+t) = e^t exactly
    rep = check_admissibility(family_weight("exp_neg", rate=1.0))
    assert rep.verdict == Verdict.ADMISSIBLE
    assert rep.fitted_M == pytest.approx(1.0, abs=1e-9)
    assert rep.fitted_omega == pytest.approx(1.0, abs=1e-9)


def test_exp_sq_is_refuted_with_witness_far_left():
    rep = check_admissibility(family_weight("exp_sq", rate=1.0), horizon=50.0)
    assert rep.verdict == Verdict.REFUTED
    tau, t = rep.witness
    assert t == pytest.approx(1.0)
    assert tau <= -25
    # brute-force ratio scan over integer tau in [-50, 0] at t = 1: exp(-2 tau - 1)
    ratios = [math.exp(tau * tau - (tau + 1) ** 2) for tau in range(-50, 1)]
    assert max(ratios) == pytest.approx(math.exp(99))


def test_step_geometric_weight_step_constants():
    w = family_weight("geometric_abs", step=True, base=2.0)
    rep = check_admissibility(w)
    assert rep.verdict == Verdict.ADMISSIBLE
    # rho(k)/rho(k+1) in {1/2, 2}: A = 1/2, B = 2
    assert rep.fitted_A_B == pytest.approx((0.5, 2.0))
    assert rep.fitted_omega == pytest.approx(math.log(2))


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(0, 10))
def test_fitted_constants_bound_exp_neg(tau, t):
    rep = check_admissibility(family_weight("exp_neg", rate=1.0))
    rho = family_weight("exp_neg", rate=1.0)
    lhs = rho(tau)
    rhs = rep.fitted_M * math.exp(rep.fitted_omega * t) * rho(tau + t)
    assert lhs <= rhs * (1 + 1e-9)


# hypercyclicity / chaos

def test_hypercyclic_exp_abs_theta_zero():
    (rep,) = check_hypercyclic_translation(EXP_ABS, [0.0], horizon=40, tol=1e-3)
    assert rep.verdict == Verdict.CONSISTENT
    assert rep.witnesses[:2] == [7.0, 8.0]  # e^-7 < 1e-3 < e^-6


def test_hypercyclic_constant_not_witnessed():
    reps = check_hypercyclic_translation(ONE, [0.0, 1.5], horizon=40, tol=0.5)
    assert all(r.verdict == Verdict.NOT_WITNESSED for r in reps)


def test_hypercyclic_exp_neg_full_line_not_witnessed():
    (rep,) = check_hypercyclic_translation(family_weight("exp_neg"), [0.0], horizon=40, tol=1e-3)
    assert rep.verdict == Verdict.NOT_WITNESSED


def test_chaos_c0():
    assert check_chaos_c0(EXP_ABS, 1e-3, 40).verdict == Verdict.CONSISTENT
    rep = check_chaos_c0(ONE, 1e-3, 40)
    assert rep.verdict == Verdict.REFUTED_AT_HORIZON and rep.witness is not None


def test_chaos_lp_exp_abs_matches_closed_form():
    rep = check_chaos_lp(EXP_ABS, l=1.0, eps=0.1, P_max=10)
    assert rep.verdict == Verdict.CONSISTENT

    def exact(P):  # sum_{k != 0} e^{-|1 + kP|} for P > 1
        return (math.e + 1 / math.e) * math.exp(-P) / (1 - math.exp(-P))
    assert exact(rep.P) < 0.1
    assert exact(rep.P - 0.25) >= 0.1
    assert rep.truncated_sum == pytest.approx(exact(rep.P), rel=1e-9)
    # the looser bound 2e^{1-P}/(1-e^{-P}) already clears 0.1 at P = 5
    assert 2 * math.exp(1 - 5) / (1 - math.exp(-5)) < 0.1


def test_chaos_lp_constant_refuted():
    rep = check_chaos_lp(ONE, l=1.0, eps=0.1, P_max=5)
    assert rep.verdict == Verdict.REFUTED_AT_CUTOFF and rep.P is None


def test_chaos_lp_gauss_witness_exists():
    rep = check_chaos_lp(family_weight("gauss", rate=1.0), l=1.0, eps=0.1, P_max=5)
    assert rep.verdict == Verdict.CONSISTENT
    oracle = sum(math.exp(-(1 + k * rep.P) ** 2) for k in range(-200, 201) if k != 0)
    assert oracle < 0.1


# L_p frequent hypercyclicity

def test_fh_lp_exp_abs_closed_form():
    rep = check_fh_lp(EXP_ABS, 100)
    closed = 1 + 2 * math.exp(-1) / (1 - math.exp(-1))
    assert rep.verdict == Verdict.CONVERGENT
    assert abs(rep.partial_sum - closed) < 1e-6


def test_fh_lp_constant_diverges():
    rep = check_fh_lp(ONE, 100)
    assert rep.verdict == Verdict.DIVERGENT
    assert rep.partial_sum == 201


def test_fh_lp_rational_against_brute_force():
    w = family_weight("rational", power=2.0)
    K = 4000
    rep = check_fh_lp(w, K)
    oracle = math.fsum(1.0 / (1.0 + k * k) for k in range(-10 ** 6, 10 ** 6 + 1))
    assert rep.verdict == Verdict.CONVERGENT
    assert abs(rep.partial_sum - oracle) <= 2.0 / K
    # pi coth(pi) is the full sum
    assert oracle == pytest.approx(math.pi / math.tanh(math.pi), abs=3e-6)


def test_fh_lp_integral_exact_for_step_weight():
    w = family_weight("exp_abs", step=True, rate=1.0)
    rep = check_fh_lp(w, 30)
    assert rep.integral == pytest.approx(math.fsum(math.exp(-abs(k)) for k in range(-30, 30)),
                                         rel=1e-13)


# construction helpers

def test_step_normalize_floors():
    w = step_normalize(EXP_ABS)
    xs = np.array([-2.5, -0.1, 0.0, 0.9, 3.7])
    assert np.allclose(w(xs), np.exp(-np.abs(np.floor(xs))))


@given(st.floats(-30, 30, allow_nan=False))
def test_step_normalize_property(x):
    w = step_normalize(EXP_ABS)
    assert w(x) == EXP_ABS(math.floor(x))


def test_shift_weights_unit_and_two():
    rho = weight_from_shift_weights(lambda k: 1.0, 10)
    assert np.all(rho.integer_samples(-10, 10) == 1.0)
    rho2 = weight_from_shift_weights(lambda k: 2.0, 10)
    assert rho2(0) == 2.0 and rho2(-1) == 4.0
    assert rho2(3) == 2.0 ** -3


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([0.5, 1.0, 2.0]), min_size=21, max_size=21))
def test_shift_weights_exact_products(ws):
    table = {k - 10: w for k, w in enumerate(ws)}
    rho = weight_from_shift_weights(table, 10)
    for k in range(-10, 11):
        if k >= 1:
            prod = Fraction(1)
            for j in range(1, k + 1):
                prod *= Fraction(table[j])
            expect = 1 / prod
        else:
            expect = Fraction(1)
            for j in range(k, 1):
                expect *= Fraction(table[j])
        assert Fraction(rho(float(k))) == expect


def test_shift_weights_rejects_nonpositive():
    with pytest.raises(InvalidInputError):
        weight_from_shift_weights(lambda k: 0.0 if k == 3 else 1.0, 5)


def test_table_weight_rejects_nonpositive():
    with pytest.raises(InvalidWeightError):
        table_weight({0: 1.0, 1: -1.0})(1.0)


def test_weight_from_config_forms():
    assert weight_from_config({"family": "exp_abs", "rate": 2.0})(1.0) == pytest.approx(math.exp(-2))
    assert weight_from_config({"table": {"0": 1.0, "1": 0.5}})(1.5) == 0.5
    w = weight_from_config({"shift_weights_family": {"family": "constant", "value": 2.0}, "K": 5})
    assert w(2.0) == 0.25
    with pytest.raises(InvalidInputError):
        weight_from_config({"nope": 1})


def test_integer_ratio_bound():
    M, grows = integer_ratio_bound(EXP_ABS, 50)
    assert M == pytest.approx(math.e) and not grows
    _, grows = integer_ratio_bound(family_weight("gauss"), 50)
    assert grows
