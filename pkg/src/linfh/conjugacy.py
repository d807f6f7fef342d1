"""The maps Q: C_0^rho(R) -> c_0(Z + D~) and P: c_0(Z + D~) -> C_0^rho(R).

Q takes rho(k)-scaled Schauder coefficients; P sums the hat expansion with
level-n terms damped by 2^-n.  Both intertwine the unit translation
``T_1 f(x) = f(x + 1)`` with the backward shift of weights
``w_{k+tau} = rho(k)/rho(k+1)``.  The weight must be a step weight,
``rho(x) = rho([x])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._common import InvalidInputError, NormalizationError, ResolutionError, WindowError
from .dyadic import DyadicIndex, SampledFunction, coefficient_levels, reconstruct
from .shifts import SparseSeq, backward_shift_apply
from .weights import Weight, check_admissibility


def _require_step(w: Weight):
    if not w.step:
        raise NormalizationError("Q and P need a step-normalized weight; use step_normalize()")


def weighted_sup(f: SampledFunction, w: Weight) -> float:
    """``sup_x |f(x)| rho(x)`` over the nodes, including left limits at integers."""
    x = f.nodes()
    v = np.abs(f.values.astype(float))
    best = float(np.max(v * np.asarray(w(x))))
    if w.step:
        s = 2 ** f.n_max
        ints = np.arange(s, len(v), s)
        if len(ints):
            best = max(best, float(np.max(v[ints] * np.asarray(w.eval_left(x[ints])))))
    return best


def shift_weights(w: Weight):
    """``w_{k+tau} = rho(k)/rho(k+1)`` as a function of the index."""
    def wk(i):
        k = i.k if isinstance(i, DyadicIndex) else int(i)
        a, b = float(w(float(k))), float(w(float(k + 1)))
        r = a / b if a > 0 and b > 0 else 0.0
        if 0 < r < float("inf") and a >= 1e-300 and b >= 1e-300:
            return r
        return float(np.exp(w.log_eval(float(k)) - w.log_eval(float(k + 1))))
    return wk


def Q_apply(f: SampledFunction, w: Weight, n_max: int) -> SparseSeq:
    """``Q(f)_{k+tau} = rho(k) * (Schauder coefficient of f at k+tau)``."""
    _require_step(w)
    levels = coefficient_levels(f, n_max)
    entries = {}
    rho0 = np.asarray(w(np.arange(f.lo, f.hi + 1, dtype=float)))
    for i, a in enumerate(levels[0] * rho0):
        if a != 0:
            entries[DyadicIndex(f.lo + i)] = a
    rho_rows = rho0[:-1]
    for n in range(1, n_max + 1):
        arr = levels[n] * rho_rows[:, None]
        for r, c in zip(*np.nonzero(arr)):
            entries[DyadicIndex(f.lo + int(r), n, 2 * int(c) + 1)] = arr[r, c]
    return SparseSeq(entries, universe="ZD")


def _check_support(a: SparseSeq, lo: int, hi: int, n_max: int):
    for idx in a:
        if idx.level > n_max:
            raise ResolutionError(f"{idx} is finer than level {n_max}")
        ok = (lo + 1 <= idx.k <= hi - 1) if idx.level == 0 else (lo <= idx.k <= hi - 1)
        if not ok:
            raise WindowError(f"hat of {idx} reaches outside [{lo}, {hi}]; extend the window")


def P_apply(a: SparseSeq, w: Weight, lo: int, hi: int, n_max: int) -> SampledFunction:
    """``P(a) = sum_n 2^-n sum_{tau in D_n} a_{k+tau}/rho(k) phi_{k+tau}`` on ``[lo, hi]``.

    Every hat in the support must lie inside the window.
    """
    _require_step(w)
    _check_support(a, lo, hi, n_max)
    scaled = {}
    for idx, v in a.items():
        scaled[idx] = v / 2 ** idx.level / float(w(float(idx.k)))
    return reconstruct(scaled, lo, hi, n_max)


@dataclass
class ConjugacyReport:
    direction: str
    residual: float
    tol: float
    norm_bound_checked: tuple[float, float]
    comparison_window: tuple[int, int]
    inputs_used: list = field(default_factory=list)
    norm_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol and self.norm_violations == 0

    def to_json(self) -> dict:
        return {"direction": self.direction, "residual": self.residual, "tol": self.tol,
                "passed": self.passed, "norm_bound_checked": list(self.norm_bound_checked),
                "norm_violations": self.norm_violations,
                "comparison_window": list(self.comparison_window),
                "inputs_used": self.inputs_used}


def verify_diagram_Q(w: Weight, test_functions: Iterable[SampledFunction], n_max: int,
                     tol: float = 1e-12, descriptors: list | None = None) -> ConjugacyReport:
    """Residual ``max ||Q(T_1 f) - B_w(Q f)||_sup`` and the bound ``||Qf|| <= 2 ||f||_rho``.

    ``T_1`` shrinks the window ``[lo, hi]`` to ``[lo, hi - 1]``; only indices
    resolvable there are compared.
    """
    _require_step(w)
    wk = shift_weights(w)
    residual = 0.0
    worst_ratio = 0.0
    violations = 0
    window = None
    count = 0
    for f in test_functions:
        count += 1
        qf = Q_apply(f, w, n_max)
        lhs = Q_apply(f.translate(1), w, n_max)
        lo, hi = f.lo, f.hi - 1
        window = (lo, hi)

        def keep(i, lo=lo, hi=hi):
            top = hi if i.level == 0 else hi - 1
            return lo <= i.k <= top
        rhs = backward_shift_apply(wk, qf).restrict(keep)
        residual = max(residual, (lhs.restrict(keep) - rhs).sup_norm())
        fn = weighted_sup(f, w)
        qn = qf.sup_norm()
        if fn > 0:
            worst_ratio = max(worst_ratio, qn / fn)
        if qn > 2 * fn * (1 + 1e-12):
            violations += 1
    return ConjugacyReport("Q-side", residual, tol, (2.0, worst_ratio), window or (0, 0),
                           descriptors or [f"{count} sampled functions"], violations)


def verify_diagram_P(w: Weight, test_sequences: Iterable[SparseSeq], lo: int, hi: int,
                     n_max: int, tol: float = 1e-12, B: float | None = None,
                     descriptors: list | None = None) -> ConjugacyReport:
    """Residual ``max ||P(B_w a) - T_1(P a)||_rho`` on ``[lo, hi - 1]`` and ``||Pa|| <= (B+4)||a||``.

    ``P(B_w a)`` is summed on ``[lo - 1, hi]`` (the shift moves support one
    unit left) and then restricted.  ``B`` defaults to the step constant
    fitted from the weight on the window.
    """
    _require_step(w)
    wk = shift_weights(w)
    if B is None:
        horizon = max(abs(lo), abs(hi)) + 1
        B = check_admissibility(w, grid_step=0.5, horizon=horizon).fitted_A_B[1]
    residual = 0.0
    worst_ratio = 0.0
    violations = 0
    count = 0
    for a in test_sequences:
        count += 1
        pa = P_apply(a, w, lo, hi, n_max)
        rhs = pa.translate(1)
        lhs = P_apply(backward_shift_apply(wk, a), w, lo - 1, hi, n_max).restrict(lo, hi - 1)
        diff = SampledFunction(lo, hi - 1, n_max, lhs.values - rhs.values)
        residual = max(residual, weighted_sup(diff, w))
        an = a.sup_norm()
        pn = weighted_sup(pa, w)
        if an > 0:
            worst_ratio = max(worst_ratio, pn / an)
        if pn > (B + 4) * an * (1 + 1e-12):
            violations += 1
    return ConjugacyReport("P-side", residual, tol, (B + 4, worst_ratio), (lo, hi - 1),
                           descriptors or [f"{count} sampled sequences"], violations)


def random_sparse_coefficients(rng: np.random.Generator, lo: int, hi: int, n_max: int,
                               count: int = 12, single_level: int | None = None) -> SparseSeq:
    """Random finitely supported ``a`` whose hats fit inside ``[lo, hi]``."""
    if single_level is None:
        available = (hi - lo - 1) + (hi - lo) * (2 ** n_max - 1)
    elif single_level == 0:
        available = hi - lo - 1
    else:
        available = (hi - lo) * 2 ** (single_level - 1)
    if count > available:
        raise InvalidInputError(f"only {available} indices fit, asked for {count}")
    entries = {}
    while len(entries) < count:
        n = single_level if single_level is not None else int(rng.integers(0, n_max + 1))
        if n == 0:
            idx = DyadicIndex(int(rng.integers(lo + 1, hi)))
        else:
            j = 2 * int(rng.integers(0, 2 ** (n - 1))) + 1
            idx = DyadicIndex(int(rng.integers(lo, hi)), n, j)
        entries[idx] = float(rng.integers(-2 ** 12, 2 ** 12)) / 2 ** 6 or 1.0
    return SparseSeq(entries, "ZD")
