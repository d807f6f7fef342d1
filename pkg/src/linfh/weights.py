"""Admissible weight functions and the weight-level dynamical criteria.

A :class:`Weight` wraps a positive function on the real line or on the
half-line ``[0, inf)``.  Every asymptotic statement about a weight (decay at
infinity, summability, admissibility) is checked on a finite sample and the
resulting verdict names the horizon it was checked up to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from ._common import InvalidInputError, InvalidWeightError, Verdict

FULL = "full"
HALF = "half"

ArrayFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Weight:
    """A positive weight ``rho`` on ``R`` (``domain="full"``) or ``[0, inf)``.

    ``func`` and ``log_func`` act elementwise on float arrays.  When ``step``
    is set the weight is the step function ``x -> func(floor(x))``.  ``window``
    limits where a tabulated weight is known; evaluating outside it raises.
    """

    func: ArrayFunc
    domain: str = FULL
    step: bool = False
    log_func: ArrayFunc | None = None
    name: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)
    window: tuple[int, int] | None = None
    admissibility_constants: tuple[float, float] | None = None
    step_constants: tuple[float, float] | None = None

    def __post_init__(self):
        if self.domain not in (FULL, HALF):
            raise InvalidInputError(f"unknown domain {self.domain!r}")

    # evaluation -----------------------------------------------------------

    def _points(self, x, left: bool = False) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if self.domain == HALF and np.any(arr < 0):
            raise InvalidInputError("half-line weight evaluated at a negative point")
        if self.step:
            arr = np.ceil(arr) - 1.0 if left else np.floor(arr)
        if self.window is not None:
            lo, hi = self.window
            if np.any(arr < lo) or np.any(arr > hi):
                raise InvalidInputError(
                    f"weight is tabulated on [{lo}, {hi}] only; asked for "
                    f"[{arr.min()}, {arr.max()}]")
        return arr

    def _finish(self, arr: np.ndarray, vals: np.ndarray, x):
        vals = np.asarray(vals, dtype=float)
        if vals.shape != arr.shape:
            vals = np.broadcast_to(vals, arr.shape).astype(float)
        bad = np.isnan(vals) | (vals < 0)
        if self.log_func is None:
            bad |= vals == 0
        if np.any(bad):
            where = arr[bad].ravel()[0]
            raise InvalidWeightError(f"weight {self.name} is not positive at x={where}")
        return float(vals) if np.ndim(x) == 0 else vals

    def __call__(self, x):
        arr = self._points(x)
        return self._finish(arr, self.func(arr), x)

    eval = __call__

    def eval_left(self, x):
        """Left limit ``rho(x-)``; differs from ``rho(x)`` only for step weights at integers."""
        if not self.step:
            return self(x)
        arr = self._points(x, left=True)
        return self._finish(arr, self.func(arr), x)

    def log_eval(self, x, left: bool = False):
        arr = self._points(x, left=left and self.step)
        if self.log_func is not None:
            vals = np.asarray(self.log_func(arr), dtype=float)
            if vals.shape != arr.shape:
                vals = np.broadcast_to(vals, arr.shape).astype(float)
            if np.any(np.isnan(vals)):
                raise InvalidWeightError(f"weight {self.name} has an undefined logarithm")
        else:
            raw = np.asarray(self.func(arr), dtype=float)
            if raw.shape != arr.shape:
                raw = np.broadcast_to(raw, arr.shape).astype(float)
            if np.any(np.isnan(raw) | (raw <= 0)):
                raise InvalidWeightError(f"weight {self.name} is not positive")
            vals = np.log(raw)
        return float(vals) if np.ndim(x) == 0 else vals

    def integer_samples(self, lo: int, hi: int) -> np.ndarray:
        """``rho(k)`` for ``k = lo..hi`` (inclusive)."""
        return np.asarray(self(np.arange(lo, hi + 1, dtype=float)), dtype=float)

    @property
    def step_normalized(self) -> bool:
        return self.step

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "domain": self.domain,
                "step": self.step, "window": self.window}


def step_normalize(w: Weight) -> Weight:
    """The step weight ``x -> rho(floor(x))``; an equivalent norm for admissible rho."""
    if w.step:
        return w
    return replace(w, step=True, name=f"step({w.name})",
                   admissibility_constants=None, step_constants=None)


# named families -------------------------------------------------------------

def _family(name: str, **params) -> tuple[ArrayFunc, ArrayFunc]:
    if name == "constant":
        c = float(params.get("value", 1.0))
        if c <= 0:
            raise InvalidWeightError("constant weight must be positive")
        lc = math.log(c)
        return (lambda x: np.full_like(x, c, dtype=float)), (lambda x: np.full_like(x, lc, dtype=float))
    if name == "exp_abs":
        a = float(params.get("rate", 1.0))
        return (lambda x: np.exp(-a * np.abs(x))), (lambda x: -a * np.abs(x))
    if name == "exp_neg":
        a = float(params.get("rate", 1.0))
        return (lambda x: np.exp(-a * x)), (lambda x: -a * x)
    if name == "exp_sq":
        a = float(params.get("rate", 1.0))
        return (lambda x: np.exp(a * x * x)), (lambda x: a * x * x)
    if name == "gauss":
        a = float(params.get("rate", 1.0))
        return (lambda x: np.exp(-a * x * x)), (lambda x: -a * x * x)
    if name == "geometric_abs":
        b = float(params.get("base", 2.0))
        lb = math.log(b)
        return (lambda x: np.power(b, -np.abs(x))), (lambda x: -lb * np.abs(x))
    if name == "rational":
        s = float(params.get("power", 2.0))
        return (lambda x: 1.0 / (1.0 + np.abs(x) ** s)), (lambda x: -np.log1p(np.abs(x) ** s))
    raise InvalidInputError(f"unknown weight family {name!r}")


def family_weight(name: str, domain: str = FULL, step: bool = False, **params) -> Weight:
    """Named weight family, e.g. ``family_weight("exp_abs", rate=1.0)``."""
    func, log_func = _family(name, **params)
    return Weight(func=func, log_func=log_func, domain=domain, step=step,
                  name=name, params=params)


def table_weight(samples: Mapping[int, float], domain: str = FULL, name: str = "table") -> Weight:
    """Step weight extending integer samples ``{k: rho(k)}`` by ``rho(x) = rho([x])``."""
    if not samples:
        raise InvalidInputError("empty weight table")
    keys = sorted(int(k) for k in samples)
    lo, hi = keys[0], keys[-1]
    if keys != list(range(lo, hi + 1)):
        raise InvalidInputError("weight table must cover a contiguous integer range")
    vals = np.array([float(samples[k]) for k in keys])
    if np.any(~(vals > 0)):
        raise InvalidWeightError("weight table has non-positive entries")
    logs = np.log(vals)

    def func(x):
        return vals[(x - lo).astype(np.int64)]

    def log_func(x):
        return logs[(x - lo).astype(np.int64)]

    return Weight(func=func, log_func=log_func, domain=domain, step=True, name=name,
                  window=(lo, hi))


def weight_from_shift_weights(w_seq: Callable[[int], float] | Mapping[int, float],
                              K: int) -> Weight:
    """Step weight built from backward-shift weights on the window ``[-K, K]``.

    ``rho(k) = 1/(w_1...w_k)`` for ``k >= 1`` and ``rho(k) = w_k w_{k+1}...w_0``
    for ``k <= 0``, then ``rho(x) = rho([x])``.  Running products are kept as
    floats (exact for dyadic weights); where they leave the float range the
    value comes from summed logarithms.
    """
    get = w_seq.__getitem__ if isinstance(w_seq, Mapping) else w_seq
    ws = {}
    for k in range(-K, K + 1):
        v = float(get(k))
        if not v > 0:
            raise InvalidInputError(f"shift weight w_{k} = {v} is not positive")
        ws[k] = v
    pos = np.array([ws[k] for k in range(1, K + 1)])
    neg = np.array([ws[k] for k in range(0, -K - 1, -1)])
    logs = np.concatenate([np.cumsum(np.log(neg))[::-1], -np.cumsum(np.log(pos))])
    direct = np.concatenate([np.cumprod(neg)[::-1], 1.0 / np.cumprod(pos)])
    # running products are exact for dyadic weights; logs take over outside the float range
    ok = np.isfinite(direct) & (direct > 0)
    rho_tab = np.where(ok, direct, np.exp(logs))
    logs = np.where(ok, np.log(np.where(ok, direct, 1.0)), logs)

    def log_func(x):
        return logs[(x + K).astype(np.int64)]

    def func(x):
        return rho_tab[(x + K).astype(np.int64)]

    return Weight(func=func, log_func=log_func, domain=FULL, step=True,
                  name="from_shift_weights", params={"K": K}, window=(-K, K))


def weight_from_config(cfg: Mapping[str, Any]) -> Weight:
    """Build a weight from a config document.

    Accepted forms::

        {"family": "exp_abs", "rate": 1.0, "domain": "full", "step": false}
        {"table": {"-2": 0.25, ..., "2": 0.25}}
        {"shift_weights": {"-3": 2.0, ...}, "K": 3}
        {"shift_weights_family": {"family": "constant", "value": 2.0}, "K": 50}
    """
    cfg = dict(cfg)
    domain = cfg.pop("domain", FULL)
    if "family" in cfg:
        name = cfg.pop("family")
        step = bool(cfg.pop("step", False))
        return family_weight(name, domain=domain, step=step, **cfg)
    if "table" in cfg:
        return table_weight({int(k): float(v) for k, v in cfg["table"].items()}, domain=domain)
    if "shift_weights" in cfg:
        table = {int(k): float(v) for k, v in cfg["shift_weights"].items()}
        K = int(cfg.get("K", min(max(table), -min(table))))
        return weight_from_shift_weights(table, K)
    if "shift_weights_family" in cfg:
        inner = dict(cfg["shift_weights_family"])
        fw = family_weight(inner.pop("family"), **inner)
        K = int(cfg["K"])
        return weight_from_shift_weights(lambda k: fw(float(k)), K)
    raise InvalidInputError("weight config needs one of family/table/shift_weights")


# admissibility -------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    verdict: Verdict
    fitted_M: float
    fitted_omega: float
    fitted_A_B: tuple[float, float]
    witness: tuple[float, float] | None = None
    witness_family: list[tuple[float, float, float]] = field(default_factory=list)
    horizon: float = 0.0
    grid_step: float = 0.0


def _grid(w: Weight, grid_step: float, horizon: float) -> np.ndarray:
    n = int(round(horizon / grid_step))
    lo = 0 if w.domain == HALF else -n
    return np.arange(lo, n + 1) * grid_step


def _sup_log_ratio(logr: np.ndarray, j: int) -> tuple[float, int]:
    """max over tau of log rho(tau) - log rho(tau + j*step), with its argmax."""
    d = logr[:-j] - logr[j:]
    i = int(np.argmax(d))
    return float(d[i]), i


def _fit_M_omega(logr: np.ndarray, grid_step: float) -> tuple[float, float]:
    nt = len(logr) - 1
    ts = np.arange(1, nt + 1) * grid_step
    phi = np.array([_sup_log_ratio(logr, j)[0] for j in range(1, nt + 1)])
    tail = ts >= ts[-1] / 2
    omega = float(np.max(phi[tail] / ts[tail]))
    logM = float(np.max(phi - omega * ts))
    return math.exp(max(0.0, logM)), omega


def _fit_A_B(logr: np.ndarray, grid_step: float, l: float = 1.0) -> tuple[float, float]:
    m = int(round(l / grid_step))
    if m < 1 or m >= len(logr):
        raise InvalidInputError("grid too coarse or window too small for l")
    lo_v, hi_v = math.inf, -math.inf
    for j in range(0, m + 1):
        d_lo = logr[j:len(logr) - m + j] - logr[:len(logr) - m]
        d_hi = logr[j:len(logr) - m + j] - logr[m:]
        lo_v = min(lo_v, float(d_lo.min()))
        hi_v = max(hi_v, float(d_hi.max()))
    return math.exp(lo_v), math.exp(hi_v)


def check_admissibility(w: Weight, grid_step: float = 0.25, horizon: float = 20.0,
                        growth_tol: float = 1.0) -> AdmissibilityReport:
    """Fit ``M, omega`` with ``rho(tau) <= M e^{omega t} rho(tau+t)`` on a grid.

    ``omega`` is the largest slope ``sup_tau log(rho(tau)/rho(tau+t)) / t`` over
    the long-time half of the sampled ``t`` range and ``M`` absorbs the rest.
    Refutation: at ``t = 1`` the sampled supremum over the full window exceeds
    the supremum over the inner half window by more than ``growth_tol`` (in
    log units), i.e. ``M`` keeps growing with the window; the witnesses are the
    maximisers at ``horizon/4, horizon/2, horizon``.  ``A, B`` are the step
    constants for ``l = 1``.
    """
    if grid_step <= 0:
        raise InvalidInputError("grid_step must be positive")
    if horizon < 1:
        raise InvalidInputError("horizon must be at least 1")
    grid = _grid(w, grid_step, horizon)
    logr = np.asarray(w.log_eval(grid), dtype=float)
    j1 = max(1, int(round(1.0 / grid_step)))
    A, B = _fit_A_B(logr, grid_step)

    family = []
    for frac in (0.25, 0.5, 1.0):
        mask = np.abs(grid) <= frac * horizon + 1e-12
        sub = logr[mask]
        if len(sub) > j1:
            val, i = _sup_log_ratio(sub, j1)
            family.append((float(grid[mask][i]), j1 * grid_step, val))
    inner = np.abs(grid) <= horizon / 2 + 1e-12
    M_in, om_in = _fit_M_omega(logr[inner], grid_step)
    full_sup = family[-1][2]
    inner_sup, _ = _sup_log_ratio(logr[inner], j1)
    if full_sup - inner_sup > growth_tol:
        tau, t, _ = family[-1]
        return AdmissibilityReport(Verdict.REFUTED, M_in, om_in, (A, B), witness=(tau, t),
                                   witness_family=family, horizon=horizon, grid_step=grid_step)
    M, omega = _fit_M_omega(logr, grid_step)
    return AdmissibilityReport(Verdict.ADMISSIBLE, M, omega, (A, B),
                               witness_family=family, horizon=horizon, grid_step=grid_step)


def integer_ratio_bound(w: Weight, K: int, growth_tol: float = 1.0) -> tuple[float, bool]:
    """``M = max_k max(rho(k+1)/rho(k), rho(k)/rho(k+1))`` on ``[-K, K]``.

    The flag is True when the ratio keeps growing towards the window edge
    (outer-half maximum exceeds the inner-half maximum by ``growth_tol`` in log
    units), the sampled sign that ``sup rho(k+1)/rho(k)`` is infinite.
    """
    lo = 0 if w.domain == HALF else -K
    ks = np.arange(lo, K + 1, dtype=float)
    lr = np.asarray(w.log_eval(ks), dtype=float)
    d = np.abs(np.diff(lr))
    mid = np.abs(ks[:-1]) < K / 2
    outer = float(d[~mid].max()) if np.any(~mid) else 0.0
    inner = float(d[mid].max()) if np.any(mid) else 0.0
    return math.exp(float(d.max())), outer - inner > growth_tol


# translation-semigroup criteria -------------------------------------------------

@dataclass
class ThetaReport:
    theta: float
    verdict: Verdict
    witnesses: list[float]


def check_hypercyclic_translation(w: Weight, thetas, horizon: float, tol: float,
                                  t_step: float = 1.0) -> list[ThetaReport]:
    """Search times ``t`` with ``rho(t+theta) < tol`` and ``rho(-t+theta) < tol``.

    Consistent when such times exist in the outer half of ``[0, horizon]``
    (so the witnesses grow with the horizon).  On the half-line only the
    forward condition is tested.
    """
    thetas = [float(t) for t in thetas]
    if thetas and horizon <= max(abs(t) for t in thetas):
        raise InvalidInputError("horizon must exceed max |theta|")
    out = []
    for th in thetas:
        ts = np.arange(t_step, horizon - abs(th) + 1e-12, t_step)
        ok = np.asarray(w.log_eval(ts + th)) < math.log(tol)
        if w.domain == FULL:
            ok &= np.asarray(w.log_eval(-ts + th)) < math.log(tol)
        wit = [float(t) for t in ts[ok]]
        grows = len(wit) >= 2 and wit[-1] >= horizon / 2
        out.append(ThetaReport(th, Verdict.CONSISTENT if grows else Verdict.NOT_WITNESSED, wit))
    return out


@dataclass
class ChaosReport:
    verdict: Verdict
    witness: float | None
    max_value: float
    horizon: float
    tol: float
    log_max_value: float = math.nan


def check_chaos_c0(w: Weight, tol: float, horizon: float, step: float = 0.5) -> ChaosReport:
    """``rho(x) < tol`` for all sampled ``|x|`` in ``[horizon/2, horizon]``."""
    xs = np.arange(horizon / 2, horizon + 1e-12, step)
    xs = np.union1d(xs, np.arange(math.ceil(horizon / 2), math.floor(horizon) + 1))
    pts = xs if w.domain == HALF else np.concatenate([xs, -xs])
    vals = np.asarray(w.log_eval(pts))
    i = int(np.argmax(vals))
    lmax = float(vals[i])
    vmax = math.exp(lmax) if lmax < 709.0 else math.inf
    if lmax < math.log(tol):
        return ChaosReport(Verdict.CONSISTENT, None, vmax, horizon, tol, lmax)
    return ChaosReport(Verdict.REFUTED_AT_HORIZON, float(pts[i]), vmax, horizon, tol, lmax)


@dataclass
class ChaosLpReport:
    verdict: Verdict
    P: float | None
    truncated_sum: float | None
    tail_estimate: float | None
    K_cut: int
    sums: list[tuple[float, float, float]]


def _tail_bound(terms: np.ndarray) -> float:
    """Geometric tail estimate from the last few terms; inf when they do not decay."""
    last = terms[-4:]
    if np.any(last <= 0):
        return 0.0 if np.all(last == 0) else math.inf
    r = float(np.max(last[1:] / last[:-1]))
    if r >= 1.0:
        return math.inf
    return float(last[-1]) * r / (1.0 - r)


def check_chaos_lp(w: Weight, l: float, eps: float, P_max: float, P_step: float = 0.25,
                   K_cut: int = 200, overflow: float = 1e300) -> ChaosLpReport:
    """Smallest sampled ``P <= P_max`` with ``sum_{k != 0} rho(l + kP) < eps``.

    The sum is truncated at ``|k| <= K_cut``; each side's remainder is bounded
    by a geometric extrapolation of its last terms and added before comparing.
    """
    if w.domain != FULL:
        raise InvalidInputError("the L_p chaos criterion is stated on the full line")
    ks = np.arange(1, K_cut + 1, dtype=float)
    sums = []
    all_stuck = True
    for P in np.arange(P_step, P_max + 1e-12, P_step):
        plus = np.asarray(w(l + ks * P))
        minus = np.asarray(w(l - ks * P))
        total = math.fsum(plus) + math.fsum(minus)
        tail = _tail_bound(plus) + _tail_bound(minus)
        sums.append((float(P), total, tail))
        if not math.isinf(tail):
            all_stuck = False
        if not math.isfinite(total) or total > overflow:
            return ChaosLpReport(Verdict.REFUTED_AT_CUTOFF, float(P), total, tail, K_cut, sums)
        if total + tail < eps:
            return ChaosLpReport(Verdict.CONSISTENT, float(P), total, tail, K_cut, sums)
    verdict = Verdict.REFUTED_AT_CUTOFF if all_stuck else Verdict.NOT_WITNESSED
    return ChaosLpReport(verdict, None, None, None, K_cut, sums)


@dataclass
class LpFHReport:
    verdict: Verdict
    partial_sum: float
    integral: float
    tail: float
    K: int
    tol: float


def _trapezoid(w: Weight, lo: int, hi: int, sub: int) -> float:
    """Trapezoid rule on each unit cell, using left limits at the right end.

    For step weights this integrates each cell exactly.
    """
    total = []
    offs = np.arange(sub + 1) / sub
    for k in range(lo, hi):
        xs = k + offs
        vals = np.asarray(w(xs[:-1]), dtype=float)
        right = float(w.eval_left(xs[-1]))
        v = np.append(vals, right)
        total.append((v[0] + v[-1]) / 2 + math.fsum(v[1:-1]))
    return math.fsum(total) / sub


def check_fh_lp(w: Weight, K: int, tol: float = 1e-3, sub: int = 8) -> LpFHReport:
    """Partial sums of ``rho(k)`` over ``|k| <= K`` (``0..K`` on the half-line).

    Convergent at horizon when the contribution of the outer half of the
    range, ``S_K - S_{K/2}``, is below ``tol``.
    """
    if K < 1:
        raise InvalidInputError("K must be positive")
    lo = 0 if w.domain == HALF else -K
    vals = w.integer_samples(lo, K)
    ks = np.arange(lo, K + 1)
    S = math.fsum(vals)
    inner = math.fsum(vals[np.abs(ks) <= K // 2])
    tail = S - inner
    integral = _trapezoid(w, lo, K, sub)
    verdict = Verdict.CONVERGENT if tail < tol else Verdict.DIVERGENT
    return LpFHReport(verdict, S, integral, tail, K, tol)
