"""Finitely supported sequences, weighted pseudo-shifts and backward shifts.

Sequences are sparse maps ``index -> value`` over ``Z`` (ints), ``N`` (ints
``>= 0``) or ``Z + D~`` (:class:`~linfh.dyadic.DyadicIndex`).  Vectors whose
entries under- or overflow a double (as frequently hypercyclic vectors do,
with entries like ``2**-100000``) are held as :class:`LogSeq`.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping

import numpy as np

from ._common import HypothesisViolation, HypothesisWarning, InvalidInputError
from .dyadic import DyadicIndex, SampledFunction, wn_set

UNIVERSES = ("Z", "N", "ZD", "custom")


def shift_index(i, d: int):
    if isinstance(i, DyadicIndex):
        return i.shift(d)
    return i + d


def integer_part(i) -> int:
    return i.k if isinstance(i, DyadicIndex) else int(i)


class SparseSeq:
    """Finitely supported real sequence; zero entries are never stored."""

    __slots__ = ("entries", "universe", "weight")

    def __init__(self, entries: Mapping[Hashable, float] | None = None, universe: str = "Z",
                 weight: Callable[[Any], float] | None = None):
        if universe not in UNIVERSES:
            raise InvalidInputError(f"unknown index universe {universe!r}")
        self.entries = {i: float(v) for i, v in (entries or {}).items() if v != 0}
        self.universe = universe
        self.weight = weight

    @classmethod
    def unit(cls, i, universe: str = "Z", value: float = 1.0) -> "SparseSeq":
        return cls({i: value}, universe)

    def __getitem__(self, i) -> float:
        return self.entries.get(i, 0.0)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def items(self):
        return self.entries.items()

    @property
    def support(self) -> set:
        return set(self.entries)

    def __eq__(self, other):
        if not isinstance(other, SparseSeq):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self):
        body = ", ".join(f"{i!r}: {v!r}" for i, v in list(self.entries.items())[:6])
        more = ", ..." if len(self.entries) > 6 else ""
        return f"SparseSeq({{{body}{more}}}, universe={self.universe!r})"

    def _combine(self, other: "SparseSeq", sign: float) -> "SparseSeq":
        out = dict(self.entries)
        for i, v in other.entries.items():
            out[i] = out.get(i, 0.0) + sign * v
        return SparseSeq(out, self.universe, self.weight)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def scale(self, c: float) -> "SparseSeq":
        return SparseSeq({i: c * v for i, v in self.entries.items()}, self.universe, self.weight)

    __rmul__ = scale

    def __neg__(self):
        return self.scale(-1.0)

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def p_norm(self, p: float, weight: Callable[[Any], float] | None = None) -> float:
        """``(sum |x_i|^p v_i)^(1/p)``; the p-th powers are formed in log space."""
        weight = weight or self.weight
        logs = []
        for i, v in self.entries.items():
            lv = p * math.log(abs(v))
            if weight is not None:
                lv += math.log(weight(i))
            logs.append(lv)
        if not logs:
            return 0.0
        m = max(logs)
        return math.exp((m + math.log(math.fsum(math.exp(l - m) for l in logs))) / p)

    def restrict(self, keep: Callable[[Any], bool]) -> "SparseSeq":
        return SparseSeq({i: v for i, v in self.entries.items() if keep(i)}, self.universe, self.weight)

    def to_records(self) -> list:
        """``[(k, level, numerator, value)]`` over ``Z + D~`` or ``[(index, value)]``."""
        out = []
        for i in sorted(self.entries, key=_sort_key):
            v = self.entries[i]
            out.append([*i.to_record(), v] if isinstance(i, DyadicIndex) else [i, v])
        return out

    def to_json(self) -> dict:
        return {"universe": self.universe, "entries": self.to_records()}

    @classmethod
    def from_records(cls, records: Iterable, universe: str = "Z") -> "SparseSeq":
        entries = {}
        for r in records:
            if universe == "ZD":
                entries[DyadicIndex(int(r[0]), int(r[1]), int(r[2]))] = float(r[3])
            else:
                entries[int(r[0])] = float(r[1])
        return cls(entries, universe)


def _sort_key(i):
    if isinstance(i, DyadicIndex):
        return (float(i.value), i.level)
    return (float(i), 0)


class LogSeq:
    """Sparse sequence stored as ``index -> (sign, log|value|)``."""

    __slots__ = ("sign", "log_abs", "universe")

    def __init__(self, sign: Mapping | None = None, log_abs: Mapping | None = None,
                 universe: str = "Z"):
        self.sign = dict(sign or {})
        self.log_abs = dict(log_abs or {})
        self.universe = universe

    @classmethod
    def from_sparse(cls, x: SparseSeq) -> "LogSeq":
        return cls({i: math.copysign(1.0, v) for i, v in x.items()},
                   {i: math.log(abs(v)) for i, v in x.items()}, x.universe)

    def __len__(self):
        return len(self.log_abs)

    @property
    def support(self) -> set:
        return set(self.log_abs)

    def value(self, i) -> float:
        if i not in self.log_abs:
            return 0.0
        return self.sign[i] * math.exp(self.log_abs[i])

    def to_sparse(self) -> SparseSeq:
        """Float view; entries that underflow a double are dropped."""
        return SparseSeq({i: self.value(i) for i in self.log_abs}, self.universe)

    def max_log_abs(self) -> float:
        return max(self.log_abs.values(), default=-math.inf)

    def arrays(self):
        """``(indices, signs, log_abs)`` numpy arrays for integer universes, sorted by index."""
        idx = np.array(sorted(self.log_abs), dtype=np.int64)
        sg = np.array([self.sign[int(i)] for i in idx], dtype=float)
        la = np.array([self.log_abs[int(i)] for i in idx], dtype=float)
        return idx, sg, la

    def to_json(self) -> dict:
        recs = []
        for i in sorted(self.log_abs, key=_sort_key):
            key = list(i.to_record()) if isinstance(i, DyadicIndex) else [i]
            recs.append(key + [self.sign[i], self.log_abs[i]])
        return {"universe": self.universe, "format": "sign,log_abs", "entries": recs}


# log prefix sums for products of shift weights --------------------------------

def compensated_cumsum(vals: Iterable[float]) -> np.ndarray:
    """Running sums with Neumaier compensation; ``out[0] = 0``."""
    out = [0.0]
    s = 0.0
    c = 0.0
    for v in vals:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out.append(s + c)
    return np.array(out)


class LogPrefix:
    """``L(i) = sum_{lo <= j < i} log w_j`` on an integer window, grown on demand.

    ``log(w_s ... w_{s+n-1}) = L(s+n) - L(s)``.  Growth is locked, so one
    instance may be shared between threads.
    """

    def __init__(self, log_w: Callable[[np.ndarray], np.ndarray], lo: int = 0, hi: int = 0):
        self._log_w = log_w
        self._lock = threading.Lock()
        self._anchor = lo
        self._state = (np.zeros(1), lo, lo)
        self.ensure(lo, hi)

    @classmethod
    def from_log_weight(cls, log_rho: Callable[[np.ndarray], np.ndarray], lo: int = 0,
                        hi: int = 0) -> "LogPrefix":
        """Prefix for ``w_k = rho(k)/rho(k+1)``: telescopes to ``-log rho(i)`` up to a constant."""
        obj = cls.__new__(cls)
        obj._log_w = lambda k: log_rho(k) - log_rho(k + 1)
        obj._lock = threading.Lock()
        obj._log_rho = log_rho
        obj._anchor = lo
        obj._state = (np.zeros(1), lo, lo)
        obj.ensure(lo, hi)
        return obj

    def ensure(self, lo: int, hi: int):
        """Make ``L(i)`` available for ``lo <= i <= hi``."""
        if lo >= self.lo and hi <= self.hi:
            return
        with self._lock:
            new_lo, new_hi = min(lo, self.lo), max(hi, self.hi)
            ks = np.arange(new_lo, new_hi + 1, dtype=float)
            if hasattr(self, "_log_rho"):
                table = -np.asarray(self._log_rho(ks), dtype=float)
            else:
                lw = np.asarray(self._log_w(ks[:-1]), dtype=float)
                table = compensated_cumsum(lw)
                # keep L(anchor) = 0 so values never move when the table grows
                table = table - table[self._anchor - new_lo]
            self._state = (table, new_lo, new_hi)

    @property
    def lo(self) -> int:
        return self._state[1]

    @property
    def hi(self) -> int:
        return self._state[2]

    def __call__(self, i):
        i_arr = np.asarray(i, dtype=np.int64)
        table, lo, hi = self._state
        if i_arr.size and (i_arr.min() < lo or i_arr.max() > hi):
            self.ensure(int(min(i_arr.min(), lo)), int(max(i_arr.max(), hi)))
            table, lo, hi = self._state
        out = table[i_arr - lo]
        return float(out) if np.ndim(i) == 0 else out

    def log_w(self, k):
        return self._log_w(np.asarray(k, dtype=float))


# pseudo-shifts --------------------------------------------------------------

@dataclass
class PseudoShiftSpec:
    """A sequence ``T_n x = (b^n_s x_{phi_n(s)})_s`` of weighted pseudo-shifts.

    ``log_b(n, s)`` gives ``log b^n_s``; ``phi_inv(n, i)`` returns the unique
    ``s`` with ``phi_n(s) = i`` or ``None``.  ``W(p)`` is the increasing
    exhaustion by finite sets, ``g`` the index spread function and ``ratio_R``
    the constant ``R > 1`` of the weight-ratio hypothesis.  When
    ``vectorized`` is true, ``log_b``/``phi``/``phi_inv`` accept integer
    arrays (``phi_inv`` then returns an array and a validity mask).
    """

    log_b: Callable[[int, Any], float]
    phi: Callable[[int, Any], Any]
    phi_inv: Callable[[int, Any], Any]
    g: Callable[[Any], float]
    W: Callable[[int], list]
    ratio_R: float
    universe: str = "Z"
    vectorized: bool = False
    name: str = "pseudo-shift"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.ratio_R > 1:
            raise InvalidInputError("ratio constant R must exceed 1")

    def b(self, n: int, s) -> float:
        return math.exp(self.log_b(n, s))

    def psi(self, p: int) -> float:
        """``max |g(t)|`` over ``t in W_p``."""
        return max(abs(self.g(t)) for t in self.W(p))

    def describe(self) -> dict:
        return {"name": self.name, "universe": self.universe, "ratio_R": self.ratio_R,
                **self.params}


def _default_W(universe: str) -> Callable[[int], list]:
    if universe == "Z":
        return lambda p: list(range(-p, p + 1))
    if universe == "N":
        return lambda p: list(range(0, p + 1))
    if universe == "ZD":
        return wn_set
    raise InvalidInputError("custom universes need an explicit W")


def backward_shift_spec(prefix: LogPrefix, universe: str = "Z", W=None,
                        ratio_R: float | None = None, window: tuple[int, int] | None = None,
                        name: str = "backward-shift") -> PseudoShiftSpec:
    """Powers of ``T x = (w_i x_{i+1})`` as a pseudo-shift sequence.

    ``b^n_s = w_s ... w_{s+n-1}`` (through ``prefix``), ``phi_n(s) = s + n``
    and ``g(s) = s``.  On ``Z + D~`` the weights depend on the integer part
    only.  ``ratio_R`` defaults to ``max(sup w, 1/inf w)`` over ``window``
    (floored at 2 so that ``R > 1`` even for unit weights).
    """
    if universe not in ("Z", "N", "ZD"):
        raise InvalidInputError("backward shifts are defined on Z, N or Z + D~")
    if ratio_R is None:
        lo, hi = window or (prefix.lo, prefix.hi - 1)
        lw = np.asarray(prefix.log_w(np.arange(lo, hi + 1)), dtype=float)
        ratio_R = max(2.0, math.exp(float(np.max(np.abs(lw)))))

    if universe == "ZD":
        def log_b(n, s):
            return prefix(s.k + n) - prefix(s.k)

        def phi(n, s):
            return s.shift(n)

        def phi_inv(n, i):
            return i.shift(-n)

        def g(s):
            return float(s.value)
        vec = False
    else:
        def log_b(n, s):
            return prefix(np.asarray(s) + n) - prefix(s)

        def phi(n, s):
            return s + n

        if universe == "Z":
            def phi_inv(n, i):
                return i - n
        else:
            def phi_inv(n, i):
                j = i - n
                if np.ndim(j) == 0:
                    return j if j >= 0 else None
                return j

        def g(s):
            return float(s)
        vec = True

    return PseudoShiftSpec(log_b=log_b, phi=phi, phi_inv=phi_inv, g=g,
                           W=W or _default_W(universe), ratio_R=float(ratio_R),
                           universe=universe, vectorized=vec, name=name,
                           params={"window": list(window) if window else None})


def shift_spec_from_weight(rho, universe: str = "Z", window: tuple[int, int] = (-64, 64),
                           ratio_R: float | None = None) -> PseudoShiftSpec:
    """Backward shift with ``w_k = rho(k)/rho(k+1)``, so ``b^n_s = rho(s)/rho(s+n)``."""
    prefix = LogPrefix.from_log_weight(lambda k: np.asarray(rho.log_eval(k)), *window)
    spec = backward_shift_spec(prefix, universe, ratio_R=ratio_R,
                               window=(window[0], window[1] - 1), name=f"B_w[{rho.name}]")
    spec.params["weight"] = rho.describe()
    return spec


def pseudo_shift_apply(spec: PseudoShiftSpec, n: int, x) -> SparseSeq:
    """``(T_n x)_s = b^n_s x_{phi_n(s)}`` on the entries reachable from ``supp x``."""
    out = {}
    if isinstance(x, LogSeq):
        for i, la in x.log_abs.items():
            s = spec.phi_inv(n, i)
            if s is None:
                continue
            out[s] = x.sign[i] * math.exp(spec.log_b(n, s) + la)
        return SparseSeq(out, x.universe)
    for i, v in x.items():
        s = spec.phi_inv(n, i)
        if s is None:
            continue
        out[s] = math.exp(spec.log_b(n, s)) * v
    return SparseSeq(out, x.universe)


@dataclass
class InvariantReport:
    injective: bool
    ratio_violations: list
    spread_violations: list
    pairs_checked: int

    @property
    def ok(self) -> bool:
        return self.injective and not self.ratio_violations and not self.spread_violations


def check_spec_invariants(spec: PseudoShiftSpec, n_max: int, indices: Iterable,
                          checked: bool = False, rel_tol: float = 1e-12) -> InvariantReport:
    """Check injectivity of ``phi_n`` and hypotheses (ii), (iii) on sampled pairs.

    For ``n, m <= n_max`` and sampled ``s``, ``t = phi_m^{-1}(phi_n(s))``:
    ``R^{-|n-m|} <= b^n_s / b^m_t`` and ``|n - m| <= |g(s) - g(t)|``.
    Violations warn; with ``checked=True`` they raise.
    """
    indices = list(indices)
    injective = True
    ratio_bad, spread_bad = [], []
    pairs = 0
    logR = math.log(spec.ratio_R)
    for n in range(1, n_max + 1):
        images = {}
        for s in indices:
            i = spec.phi(n, s)
            if i in images and images[i] != s:
                injective = False
            images[i] = s
            for m in range(1, n_max + 1):
                t = spec.phi_inv(m, i)
                if t is None:
                    continue
                pairs += 1
                lr = spec.log_b(n, s) - spec.log_b(m, t)
                if lr < -abs(n - m) * logR - rel_tol * (1 + abs(lr)):
                    ratio_bad.append((n, m, s, t, lr))
                if abs(n - m) > abs(spec.g(s) - spec.g(t)) + 1e-12:
                    spread_bad.append((n, m, s, t))
    rep = InvariantReport(injective, ratio_bad, spread_bad, pairs)
    if not rep.ok:
        msg = (f"pseudo-shift hypotheses fail on sampled pairs: injective={injective}, "
               f"{len(ratio_bad)} ratio and {len(spread_bad)} spread violations")
        if checked:
            raise HypothesisViolation(msg)
        warnings.warn(msg, HypothesisWarning, stacklevel=2)
    return rep


def run_away_threshold(I0: Iterable[int], J0: Iterable[int]) -> int:
    """For ``phi_n(s) = s + n`` on ``Z``: ``phi_n(J0)`` misses ``I0`` once ``n > max I0 - min J0``."""
    return max(I0) - min(J0) + 1


def backward_shift_apply(w: Callable[[Any], float], x: SparseSeq) -> SparseSeq:
    """``(B_w x)_i = w_i x_{i+1}``."""
    out = {}
    for j, v in x.items():
        i = shift_index(j, -1)
        if x.universe == "N" and i < 0:
            continue
        out[i] = w(i) * v
    return SparseSeq(out, x.universe)


# l_p^v <-> l_p --------------------------------------------------------------

@dataclass
class LpvConjugacy:
    """``J x = (x_k v_k^{1/p})`` carries ``B`` on ``l_p^v`` to ``B_w`` on ``l_p``."""

    v: Callable[[int], float]
    p: float
    ratio_sup: float

    def log_v(self, k: int) -> float:
        return math.log(self.v(k))

    def w(self, k: int) -> float:
        return math.exp((self.log_v(k) - self.log_v(k + 1)) / self.p)

    def J(self, x: SparseSeq) -> SparseSeq:
        return SparseSeq({k: val * math.exp(self.log_v(k) / self.p) for k, val in x.items()}, "Z")

    def J_inv(self, y: SparseSeq) -> SparseSeq:
        return SparseSeq({k: val * math.exp(-self.log_v(k) / self.p) for k, val in y.items()}, "Z")

    def norm_v(self, x: SparseSeq) -> float:
        return x.p_norm(self.p, self.v)

    def norm_lp(self, y: SparseSeq) -> float:
        return y.p_norm(self.p)

    def commutator_defect(self, x: SparseSeq) -> float:
        """``sup |J(Bx) - B_w(Jx)|`` entrywise."""
        lhs = self.J(backward_shift_apply(lambda k: 1.0, x))
        rhs = backward_shift_apply(self.w, self.J(x))
        return (lhs - rhs).sup_norm()


def lpv_conjugate(v: Callable[[int], float], p: float, window: tuple[int, int] = (-50, 50),
                  ratio_bound: float = 1e6, checked: bool = False) -> LpvConjugacy:
    """Shift weights ``w_k = (v_k/v_{k+1})^{1/p}`` and the isometry ``J``.

    The ratio ``v_k/v_{k+1}`` must stay bounded; on the sampled window a
    supremum above ``ratio_bound`` triggers a warning (an error if ``checked``).
    """
    if p < 1:
        raise InvalidInputError("p must be at least 1")
    lo, hi = window
    logs = []
    for k in range(lo, hi + 1):
        val = float(v(k))
        if not val > 0:
            raise InvalidInputError(f"v_{k} = {val} is not positive")
        logs.append(math.log(val))
    logs = np.array(logs)
    ratio_sup = math.exp(float(np.max(logs[:-1] - logs[1:]))) if len(logs) > 1 else 1.0
    if ratio_sup > ratio_bound:
        msg = f"v_k/v_(k+1) reaches {ratio_sup:.3g} on {window}; the ratio must be bounded"
        if checked:
            raise HypothesisViolation(msg)
        warnings.warn(msg, HypothesisWarning, stacklevel=2)
    return LpvConjugacy(v, float(p), ratio_sup)


# L_p^rho -> l_p^v ---------------------------------------------------------------

def _abs_pow_segment(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """``int_0^1 |a + (b - a) s|^p ds`` elementwise, exactly."""
    aa, bb = np.abs(a), np.abs(b)
    out = np.empty_like(aa, dtype=float)
    opposite = (a * b) < 0
    same = ~opposite
    with np.errstate(invalid="ignore", divide="ignore"):
        num = np.abs(bb ** (p + 1) - aa ** (p + 1))
        den = (p + 1) * np.abs(bb - aa)
        eq = same & np.isclose(aa, bb, rtol=1e-13, atol=0.0)
        out[same] = num[same] / np.where(den[same] == 0, 1.0, den[same])
        out[eq] = aa[eq] ** p
        opp = (aa ** (p + 1) + bb ** (p + 1)) / ((p + 1) * (aa + bb))
    out[opposite] = opp[opposite]
    return out


def lp_norm_p(f: SampledFunction, rho, p: float, gauss_points: int = 8) -> float:
    """``int |f|^p rho`` over the window.

    Exact for step weights; other weights use Gauss-Legendre on each node
    interval.
    """
    v = f.values.astype(float)
    h = 1.0 / 2 ** f.n_max
    x = f.nodes()
    if rho.step:
        seg = _abs_pow_segment(v[:-1], v[1:], p) * h
        return math.fsum(seg * np.asarray(rho(x[:-1])))
    gx, gw = np.polynomial.legendre.leggauss(gauss_points)
    g = (gx + 1) / 2
    a, b = v[:-1], v[1:]
    # split each segment at its zero crossing so |f|^p is smooth on both parts
    cross = np.where(a * b < 0, a / np.where(a * b < 0, a - b, 1.0), 1.0)
    total = []
    for lo, hi in ((np.zeros_like(cross), cross), (cross, np.ones_like(cross))):
        s = lo[:, None] + (hi - lo)[:, None] * g[None, :]
        pts = x[:-1, None] + h * s
        vals = a[:, None] + (b - a)[:, None] * s
        integrand = np.abs(vals) ** p * np.asarray(rho(pts))
        total.append((integrand @ (gw / 2)) * (hi - lo) * h)
    return math.fsum(np.concatenate(total))


def discretize_lp(f: SampledFunction, rho, p: float = 1.0) -> SparseSeq:
    """``x_k = int_k^{k+1} f`` (exact on piecewise-linear samples), weighted by ``v_k = rho(k)``."""
    if p < 1:
        raise InvalidInputError("p must be at least 1")
    s = 2 ** f.n_max
    v = f.values.astype(float)
    out = {}
    for c in range(f.hi - f.lo):
        cell = v[c * s:(c + 1) * s + 1]
        val = (math.fsum(cell[1:-1]) + (cell[0] + cell[-1]) / 2) / s
        out[f.lo + c] = val
    return SparseSeq(out, "Z", weight=lambda k: float(rho(float(k))))


def discretization_inequality(f: SampledFunction, rho, p: float, A: float) -> tuple[float, float]:
    """``(||x||^p_{l_p^v}, (1/A) ||f||^p_{L_p^rho})`` for ``x = discretize_lp(f)``."""
    x = discretize_lp(f, rho, p)
    lhs = x.p_norm(p) ** p if len(x) else 0.0
    return lhs, lp_norm_p(f, rho, p) / A
