"""Frequency sets, lower densities and frequently hypercyclic vectors.

The constructor builds an explicit frequently universal vector for a
pseudo-shift sequence from frequency sets ``E_p``; the extractor recovers
frequency sets from the orbit of a given vector.  The condition checkers
test the pseudo-shift characterization and its translation-semigroup
counterpart on finite prefixes, and name the horizon they used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from ._common import (ContractError, GenerationError, HorizonTooSmallError,
                      HypothesisViolation, InvalidInputError, SpecInconsistencyError,
                      Verdict)
from .dyadic import SampledFunction
from .shifts import LogSeq, PseudoShiftSpec, SparseSeq, pseudo_shift_apply
from .weights import (HALF, Weight, check_chaos_c0, integer_ratio_bound,
                      weight_from_shift_weights)


# densities ------------------------------------------------------------------

def lower_density(prefix: Iterable[int], N: int) -> float:
    """``min_{N/2 <= m <= N} #{1 <= n <= m : n in A} / m``, a finite stand-in for the liminf."""
    if N < 1:
        raise InvalidInputError("N must be positive")
    arr = np.asarray(list(prefix) if not isinstance(prefix, np.ndarray) else prefix, dtype=np.int64)
    arr = arr[(arr >= 1) & (arr <= N)]
    ind = np.zeros(N + 1, dtype=np.int64)
    ind[np.unique(arr)] = 1
    counts = np.cumsum(ind)
    ms = np.arange(max(1, (N + 1) // 2), N + 1)
    return float(np.min(counts[ms] / ms))


def continuous_lower_density(intervals: Iterable[Sequence[float]], T: float) -> float:
    """``min_{T/2 <= t <= T} mu(M cap [0, t]) / t`` for a finite union of disjoint intervals.

    The ratio falls only across gaps, so the minimum sits at ``T/2``, ``T`` or
    an interval's left end; all three are evaluated exactly (Fractions in,
    Fractions used).
    """
    ivs = sorted((Fraction(a), Fraction(b)) for a, b in intervals)
    for a, b in ivs:
        if b < a or a < 0:
            raise InvalidInputError(f"bad interval [{a}, {b}]")
    for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
        if a2 < b1:
            raise InvalidInputError("intervals overlap")
    T = Fraction(T)

    def measure(t):
        return sum((min(b, t) - a for a, b in ivs if a < t), Fraction(0))

    cands = {T / 2, T} | {a for a, _ in ivs if T / 2 <= a <= T}
    return float(min(measure(t) / t for t in cands))


# frequency sets ---------------------------------------------------------------

@dataclass
class FrequencySets:
    """Prefixes ``E_p cap [1, horizon]`` with their constants ``M(p)``."""

    sets: dict[int, np.ndarray]
    M: dict[int, float]
    horizon: int
    rules: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        self.sets = {int(p): np.asarray(v, dtype=np.int64) for p, v in self.sets.items()}
        for p, v in self.sets.items():
            if len(v) > 1 and np.any(np.diff(v) <= 0):
                raise InvalidInputError(f"E_{p} prefix must be strictly increasing")
        self.M = {int(p): float(m) for p, m in self.M.items()}

    @property
    def ps(self) -> list[int]:
        return sorted(self.sets)

    def __getitem__(self, p: int) -> np.ndarray:
        return self.sets[p]

    def pairwise_disjoint(self) -> bool:
        seen: set = set()
        for p in self.ps:
            s = set(self.sets[p].tolist())
            if seen & s:
                return False
            seen |= s
        return True

    def to_json(self) -> dict:
        return {"horizon": self.horizon,
                "M": {str(p): self.M.get(p) for p in self.ps},
                "rules": {str(p): self.rules.get(p, {}) for p in self.ps},
                "sets": {str(p): self.sets[p].tolist() for p in self.ps}}

    @classmethod
    def from_json(cls, d: Mapping) -> "FrequencySets":
        return cls({int(p): v for p, v in d["sets"].items()},
                   {int(p): v for p, v in d["M"].items()}, int(d["horizon"]),
                   {int(p): v for p, v in d.get("rules", {}).items()})


def _M_map(M, ps: Iterable[int]) -> dict[int, float]:
    if M is None:
        return {p: 2.0 ** p for p in ps}
    if callable(M):
        return {p: float(M(p)) for p in ps}
    if isinstance(M, Mapping):
        return {p: float(M[p]) for p in ps}
    M = list(M)
    return {p: float(M[p - 1]) for p in ps}


def generate_frequency_sets(p_max: int, horizon: int, spacing: int | None = None,
                            M=None, start: int | None = None,
                            half_line: bool = False) -> FrequencySets:
    """Interleaved arithmetic progressions ``E_p = {start + (p-1) d + j p_max d}``.

    The union of all ``E_p`` is a progression of step ``d = spacing``, each
    ``E_p`` has density ``1/(p_max d)``, and consecutive elements of different
    sets are ``d`` apart.  ``(E_p + [[-p, p]])`` are re-verified pairwise
    disjoint on the prefix (``[[0, p]]`` with ``half_line``).  ``M`` defaults
    to ``2**p``.
    """
    if p_max < 1:
        raise InvalidInputError("p_max must be at least 1")
    d = spacing if spacing is not None else (2 if p_max == 1 else 2 * p_max)
    if d < 1:
        raise GenerationError("spacing must be positive")
    s0 = start if start is not None else d
    period = p_max * d
    if s0 + (p_max - 1) * d > horizon:
        raise GenerationError(
            f"horizon {horizon} is below the first element of E_{p_max} "
            f"({s0 + (p_max - 1) * d}); raise the horizon or shrink the spacing")
    sets, rules = {}, {}
    for p in range(1, p_max + 1):
        first = s0 + (p - 1) * d
        sets[p] = np.arange(first, horizon + 1, period, dtype=np.int64)
        rules[p] = {"rule": "arithmetic", "first": first, "step": period}
    F = FrequencySets(sets, _M_map(M, range(1, p_max + 1)), horizon, rules)
    wit = separation_witness(F, half_line=half_line)
    if wit is not None:
        raise GenerationError(f"spacing {d} too small for p_max={p_max}: {wit}")
    return F


def separation_witness(F: FrequencySets, half_line: bool = False):
    """First collision of ``E_p + [[-p, p]]`` (or ``[[0, p]]``) across distinct ``p``, or None."""
    owner: dict[int, tuple[int, int]] = {}
    for p in F.ps:
        lo = 0 if half_line else -p
        for n in F.sets[p].tolist():
            for k in range(lo, p + 1):
                hit = owner.get(n + k)
                if hit is not None and hit[0] != p:
                    return {"point": n + k, "p": hit[0], "n": hit[1], "q": p, "m": n}
                owner.setdefault(n + k, (p, n))
    return None


def avoid_points(F: FrequencySets, points: Iterable[int],
                 radius: Callable[[int], float]) -> FrequencySets:
    """Drop ``n`` from every ``E_p`` when ``|n - s| < radius(s)`` for some ``s`` in ``points``."""
    pts = sorted(int(s) for s in points)
    out = {}
    for p in F.ps:
        keep = np.ones(len(F.sets[p]), dtype=bool)
        for s in pts:
            keep &= np.abs(F.sets[p] - s) >= radius(s)
        out[p] = F.sets[p][keep]
    rules = {p: {**F.rules.get(p, {}), "avoids": pts} for p in F.ps}
    return FrequencySets(out, dict(F.M), F.horizon, rules)


def min_spacing_backward_shift(spec: PseudoShiftSpec, M, p_max: int, horizon: int) -> int:
    """Smallest ``d >= 2 p_max`` such that every gap ``|m - n| >= d`` meets the ratio bound.

    For shifts ``phi_n(s) = s + n`` the ratio ``b^n_s / b^m_t`` with
    ``s + n = t + m`` depends only on ``t`` and ``m - n``; the search requires
    ``log(b^n_s/b^m_t) <= -log(M(p_max)^2)`` for all ``t in W_{p_max}`` and all
    gaps up to ``horizon``.
    """
    Mm = _M_map(M, range(1, p_max + 1))
    need = -2 * math.log(max(Mm.values()))
    W = np.array(spec.W(p_max))
    n0 = horizon + 1
    gaps = np.arange(1, horizon + 1)
    ok = np.ones(len(gaps), dtype=bool)
    for sign in (1, -1):
        m = n0 + sign * gaps
        for t in W:
            s = t + m - n0
            valid = s >= 0 if spec.universe == "N" else np.ones_like(s, dtype=bool)
            lr = np.where(valid, spec.log_b(n0, s) - spec.log_b(m, np.full_like(m, t)), -np.inf)
            ok &= lr <= need
    bad = np.nonzero(~ok)[0]
    d = int(bad[-1]) + 2 if len(bad) else 1
    return max(d, 2 * p_max + 1)


def min_spacing_c0(w: Weight, M, p_max: int, horizon: int) -> int:
    """Smallest ``d > 2 p_max`` with ``rho(+-g) <= 1/M(p_max)^2`` for all gaps ``g >= d``."""
    Mm = _M_map(M, range(1, p_max + 1))
    need = -2 * math.log(max(Mm.values()))
    g = np.arange(1, horizon + 1, dtype=float)
    lr = np.asarray(w.log_eval(g))
    if w.domain != HALF:
        lr = np.maximum(lr, np.asarray(w.log_eval(-g)))
    bad = np.nonzero(lr > need)[0]
    d = int(bad[-1]) + 2 if len(bad) else 1
    return max(d, 2 * p_max + 1)


# condition reports ------------------------------------------------------------

@dataclass
class ConditionResult:
    name: str
    verdict: Verdict
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    violations: int = 0

    @property
    def ok(self) -> bool:
        return self.verdict in (Verdict.PASS, Verdict.CONSISTENT)


@dataclass
class ConditionReport:
    conditions: dict[str, ConditionResult]
    horizon: int
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.conditions.values())

    def __getitem__(self, key) -> ConditionResult:
        return self.conditions[key]

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "ok": self.ok, "extra": self.extra,
                "conditions": {k: {"verdict": c.verdict.value, "violations": c.violations,
                                   "witnesses": c.witnesses[:20], "details": c.details}
                               for k, c in self.conditions.items()}}


_MAX_WIT = 50


def _condition_a(F: FrequencySets, horizon: int, min_density: float) -> ConditionResult:
    dens = {p: lower_density(F.sets[p], horizon) for p in F.ps}
    bad = [(p, d) for p, d in dens.items() if not d > min_density]
    return ConditionResult("a", Verdict.FAIL if bad else Verdict.PASS, bad,
                           {"lower_density": dens, "threshold": min_density}, len(bad))


def _tail_growth(vals: np.ndarray, threshold: float, increasing: bool) -> bool:
    """Tail-half extreme beats head-half extreme and clears ``threshold``."""
    if len(vals) < 2:
        return False
    h = len(vals) // 2
    head, tail = vals[:h], vals[h:]
    if increasing:
        return bool(tail.min() >= head.min() and tail.min() > threshold)
    return bool(tail.max() <= head.max() and tail.max() < threshold)


def check_thm21_conditions(spec: PseudoShiftSpec, F: FrequencySets, horizon: int | None = None,
                           min_density: float = 0.0, growth_log_threshold: float | None = None,
                           rel_tol: float = 1e-12) -> ConditionReport:
    """Conditions (a)-(d) of the pseudo-shift characterization on prefixes up to ``horizon``.

    (a) lower density above ``min_density``; (b) images ``phi_n(W_p)`` of
    different ``p`` never meet; (c) ``b^n_s`` grows along ``E_p`` for every
    ``s in W_p`` (tail half above head half and above ``R^{4p}`` unless a
    threshold is given); (d) ``b^n_s / b^m_t <= 1/(M(p) M(q))`` whenever
    ``phi_n(s) = phi_m(t)``, ``n != m``, ``t in W_q``.
    """
    horizon = horizon or F.horizon
    E = {p: F.sets[p][F.sets[p] <= horizon] for p in F.ps}
    Fh = FrequencySets(E, F.M, horizon, F.rules)
    conds = {"a": _condition_a(Fh, horizon, min_density)}

    # (b)
    owner: dict = {}
    wit_b = []
    for p in Fh.ps:
        Wp = spec.W(p)
        for n in E[p].tolist():
            for s in Wp:
                i = spec.phi(n, s)
                i = int(i) if isinstance(i, (np.integer,)) else i
                prev = owner.get(i)
                if prev is not None and prev[0] != p and len(wit_b) < _MAX_WIT:
                    wit_b.append({"index": repr(i), "p": prev[0], "n": prev[1], "q": p, "m": n})
                owner.setdefault(i, (p, n))
    conds["b"] = ConditionResult("b", Verdict.FAIL if wit_b else Verdict.PASS, wit_b,
                                 violations=len(wit_b))

    # (c)
    logR = math.log(spec.ratio_R)
    wit_c = []
    for p in Fh.ps:
        thr = growth_log_threshold if growth_log_threshold is not None else 4 * p * logR
        ns = E[p]
        for s in spec.W(p):
            if len(ns) < 2:
                wit_c.append({"p": p, "s": repr(s), "reason": "prefix too short"})
                continue
            if spec.vectorized:
                lb = np.asarray(spec.log_b(ns, np.full_like(ns, s)), dtype=float)
            else:
                lb = np.array([spec.log_b(int(n), s) for n in ns])
            if not _tail_growth(lb, thr, increasing=True):
                wit_c.append({"p": p, "s": repr(s), "tail_min_log_b": float(lb[len(lb) // 2:].min())})
    conds["c"] = ConditionResult("c", Verdict.REFUTED_AT_HORIZON if wit_c else Verdict.CONSISTENT,
                                 wit_c, violations=len(wit_c))

    # (d)
    wit_d, worst, checked = [], -math.inf, 0
    logM = {p: math.log(Fh.M[p]) for p in Fh.ps}
    for p in Fh.ps:
        for q in Fh.ps:
            bound = -(logM[p] + logM[q])
            Wq = spec.W(q)
            if spec.vectorized:
                n = E[p][None, :]
                for chunk in np.array_split(E[q], max(1, len(E[q]) // 256 + 1)):
                    if len(chunk) == 0:
                        continue
                    m = chunk[:, None]
                    for t in Wq:
                        s = spec.phi_inv(n, spec.phi(m, t))
                        valid = m != n
                        if spec.universe == "N":
                            valid = valid & (s >= 0)
                        s_safe = np.where(valid, s, 0)
                        lr = spec.log_b(np.broadcast_to(n, s.shape), s_safe) - spec.log_b(m, np.full_like(m, t))
                        lr = np.where(valid, lr, -np.inf)
                        checked += int(valid.sum())
                        excess = lr - bound
                        bad = excess > rel_tol * (1 + abs(bound))
                        worst = max(worst, float(excess.max()) if excess.size else -math.inf)
                        if bad.any():
                            for r, c in zip(*np.nonzero(bad)):
                                if len(wit_d) < _MAX_WIT:
                                    wit_d.append({"p": p, "q": q, "n": int(n[0, c]), "m": int(m[r, 0]),
                                                  "t": int(t), "log_ratio": float(lr[r, c]),
                                                  "log_bound": bound})
                            if len(wit_d) >= _MAX_WIT:
                                break
            else:
                for m in E[q].tolist():
                    for t in Wq:
                        i = spec.phi(m, t)
                        for n in E[p].tolist():
                            if n == m:
                                continue
                            s = spec.phi_inv(n, i)
                            if s is None:
                                continue
                            checked += 1
                            lr = spec.log_b(n, s) - spec.log_b(m, t)
                            worst = max(worst, lr - bound)
                            if lr - bound > rel_tol * (1 + abs(bound)) and len(wit_d) < _MAX_WIT:
                                wit_d.append({"p": p, "q": q, "n": n, "m": m, "t": repr(t),
                                              "s": repr(s), "log_ratio": lr, "log_bound": bound})
    conds["d"] = ConditionResult("d", Verdict.FAIL if wit_d else Verdict.PASS, wit_d,
                                 {"pairs_checked": checked, "worst_log_excess": worst},
                                 len(wit_d))
    return ConditionReport(conds, horizon, {"spec": spec.describe()})


def check_c0_translation_fh(w: Weight, F: FrequencySets, horizon: int | None = None,
                            min_density: float = 0.0, tol: float = 1e-6) -> ConditionReport:
    """Conditions (a)-(d) for the translation semigroup on ``C_0^rho``.

    (b) uses ``E_p + [[-p, p]]`` (``[[0, p]]`` on the half-line); (c) asks
    ``rho(n)`` along ``E_p`` to fall below ``tol`` in the tail half without
    rising above the head half; (d) ``rho(m - n) <= 1/(M(p)M(q))`` for
    ``m != n`` (``m > n`` on the half-line).  Also verifies
    ``rho(k+n) <= M^|k| rho(n)`` for ``|k| <= p_max`` with the fitted ratio
    bound ``M``; an unbounded ``rho(k+1)/rho(k)`` raises.
    """
    horizon = horizon or F.horizon
    half = w.domain == HALF
    ratio_M, grows = integer_ratio_bound(w, horizon)
    if grows:
        raise HypothesisViolation("rho(k+1)/rho(k) is unbounded on the sampled window")
    E = {p: F.sets[p][F.sets[p] <= horizon] for p in F.ps}
    Fh = FrequencySets(E, F.M, horizon, F.rules)
    conds = {"a": _condition_a(Fh, horizon, min_density)}

    wit = separation_witness(Fh, half_line=half)
    conds["b"] = ConditionResult("b", Verdict.FAIL if wit else Verdict.PASS,
                                 [wit] if wit else [], violations=int(wit is not None))

    lo = 0 if half else -horizon
    logrho = np.asarray(w.log_eval(np.arange(lo, horizon + 1, dtype=float)))

    def lr_at(k):
        return logrho[np.asarray(k) - lo]

    wit_c = []
    for p in Fh.ps:
        vals = lr_at(E[p])
        if not _tail_growth(vals, math.log(tol), increasing=False):
            wit_c.append({"p": p, "tail_max_rho": float(np.exp(vals[len(vals) // 2:].max()))
                          if len(vals) else None})
    conds["c"] = ConditionResult("c", Verdict.REFUTED_AT_HORIZON if wit_c else Verdict.CONSISTENT,
                                 wit_c, violations=len(wit_c))

    wit_d, worst, checked = [], -math.inf, 0
    logM = {p: math.log(Fh.M[p]) for p in Fh.ps}
    for p in Fh.ps:
        for q in Fh.ps:
            bound = -(logM[p] + logM[q])
            if len(E[p]) == 0 or len(E[q]) == 0:
                continue
            diff = E[q][:, None] - E[p][None, :]
            mask = diff > 0 if half else diff != 0
            if not mask.any():
                continue
            vals = np.where(mask, lr_at(np.where(mask, diff, 0 if not half else 1)), -np.inf)
            checked += int(mask.sum())
            excess = vals - bound
            worst = max(worst, float(excess.max()))
            for r, c in zip(*np.nonzero(excess > 1e-12 * (1 + abs(bound)))):
                if len(wit_d) >= _MAX_WIT:
                    break
                wit_d.append({"p": p, "q": q, "n": int(E[p][c]), "m": int(E[q][r]),
                              "rho": float(np.exp(vals[r, c])), "bound": math.exp(bound)})
    conds["d"] = ConditionResult("d", Verdict.FAIL if wit_d else Verdict.PASS, wit_d,
                                 {"pairs_checked": checked, "worst_log_excess": worst}, len(wit_d))

    p_max = max(Fh.ps)
    kn_bad = 0
    ns = np.arange(lo + p_max, horizon - p_max + 1)
    for k in range(-p_max, p_max + 1):
        if half and k < 0:
            lhs = lr_at(ns[ns + k >= 0] + k)
            rhs = lr_at(ns[ns + k >= 0]) + abs(k) * math.log(ratio_M)
        else:
            lhs = lr_at(ns + k)
            rhs = lr_at(ns) + abs(k) * math.log(ratio_M)
        kn_bad += int(np.sum(lhs > rhs + 1e-12 * (1 + np.abs(rhs))))
    return ConditionReport(conds, horizon, {"ratio_M": ratio_M, "k_plus_n_violations": kn_bad,
                                            "weight": w.describe()})


# construction -------------------------------------------------------------------

def alpha_sequence(spec: PseudoShiftSpec, p_max: int, factor: float = 8.0) -> dict[int, float]:
    """``alpha_1 = 2``, ``alpha_p = factor * alpha_{p-1} R^{2 Psi(p)}`` (factor > 4)."""
    if factor <= 4:
        raise InvalidInputError("factor must exceed 4")
    alpha = {1: 2.0}
    for p in range(2, p_max + 1):
        alpha[p] = factor * alpha[p - 1] * spec.ratio_R ** (2 * spec.psi(p))
    return alpha


def dense_sequence(spec: PseudoShiftSpec, p_max: int, seed: int = 0,
                   resolution: int | None = None) -> dict[int, SparseSeq]:
    """Default targets ``y^p``: dyadic entries on ``W_p`` with ``||y^p|| < R^p``.

    Entry values are ``j / 2^r`` with ``r = p`` (finer as ``p`` grows),
    scaled into ``(-R^p, R^p)``; the stream is seeded by ``(seed, p)``.
    """
    out = {}
    for p in range(1, p_max + 1):
        rng = np.random.default_rng([seed, p])
        r = resolution if resolution is not None else p
        bound = spec.ratio_R ** p
        top = int(math.floor(bound * 2 ** r)) - 1
        entries = {}
        for s in spec.W(p):
            entries[s] = float(rng.integers(-top, top + 1)) / 2 ** r
        out[p] = SparseSeq(entries, spec.universe)
    return out


def indicator_targets(spec: PseudoShiftSpec, alpha: Mapping[int, float]) -> dict[int, SparseSeq]:
    """``alpha_p * sum_{i in W_p} e_i`` for each ``p``."""
    return {p: SparseSeq({s: a for s in spec.W(p)}, spec.universe) for p, a in alpha.items()}


def required_M(spec: PseudoShiftSpec, targets: Mapping[int, SparseSeq]) -> dict[int, float]:
    """``M(p) = R^{4p} max(1, ||y^p|| / R^p)``, the least constants the constructor accepts."""
    R = spec.ratio_R
    return {p: R ** (4 * p) * max(1.0, y.sup_norm() / R ** p) for p, y in targets.items()}


@dataclass
class ConstructionTrace:
    psi: dict[int, float]
    subsequence: dict[int, int]
    M_required: dict[int, float]
    E_prime: dict[int, list[int]]
    G: dict[int, list[int]]
    dense_seq: dict[int, SparseSeq]
    vector: LogSeq
    horizon: int
    alpha: dict[int, float] | None = None
    partial: bool = True

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "partial_prefix": self.partial,
                "psi": self.psi, "subsequence": self.subsequence,
                "M_required": self.M_required, "alpha": self.alpha,
                "E_prime": self.E_prime, "G": self.G,
                "dense_seq": {str(p): y.to_json() for p, y in self.dense_seq.items()},
                "vector": self.vector.to_json()}


def _as_key(i):
    return int(i) if isinstance(i, (int, np.integer)) else i


def construct_fh_vector(spec: PseudoShiftSpec, F: FrequencySets,
                        dense_seq: Mapping[int, SparseSeq], horizon: int | None = None,
                        check: bool = False) -> tuple[LogSeq, ConstructionTrace]:
    """Build ``x_{phi_n(s)} = y^p(s) / b^n_s`` for ``n in G_p``, ``s in W_p``.

    For each ``p`` the set ``E_{sigma(p)}`` is taken with the least admissible
    ``sigma(p) > sigma(p-1)`` whose constant satisfies
    ``M >= R^{4p} max(1, ||y^p|| / R^p)`` (the usual ``M(p) >= R^{4p}`` when
    ``||y^p|| < R^p``).  Then ``E'_p`` drops the ``n`` with some
    ``b^n_s <= R^{4p}`` and ``G_p`` keeps every ``(2[Psi(p)] + 3)``-th
    element.  A coordinate receiving two terms raises
    :class:`SpecInconsistencyError`.
    """
    horizon = horizon or F.horizon
    if check:
        rep = check_thm21_conditions(spec, F, horizon)
        if not rep.ok:
            bad = [k for k, c in rep.conditions.items() if not c.ok]
            raise HypothesisViolation(f"conditions {bad} fail at horizon {horizon}")
    logR = math.log(spec.ratio_R)
    ps = sorted(dense_seq)
    if ps != list(range(1, len(ps) + 1)):
        raise InvalidInputError("dense sequence must be indexed 1..p_max")
    psi, sigma, Mreq, Ep, G = {}, {}, {}, {}, {}
    available = F.ps
    last = 0
    for p in ps:
        for s in dense_seq[p]:
            if s not in set(spec.W(p)):
                raise InvalidInputError(f"y^{p} has support outside W_{p}")
        ynorm = dense_seq[p].sup_norm()
        need = 4 * p * logR + max(0.0, math.log(ynorm) - p * logR if ynorm > 0 else 0.0)
        Mreq[p] = math.exp(need)
        cands = [q for q in available if q > last and q >= p and math.log(F.M[q]) >= need - 1e-12]
        if not cands:
            raise SpecInconsistencyError(
                f"no frequency set with M >= {Mreq[p]:.3g} left for p={p}; supply larger M(p)")
        sigma[p] = cands[0]
        last = cands[0]
        psi[p] = spec.psi(p)
        ns = F.sets[sigma[p]]
        ns = ns[ns <= horizon]
        Wp = spec.W(p)
        if spec.vectorized:
            lb = np.min(np.stack([np.asarray(spec.log_b(ns, np.full_like(ns, s)), dtype=float)
                                  for s in Wp]), axis=0) if len(ns) else np.array([])
            keep = lb > 4 * p * logR
        else:
            keep = np.array([min(spec.log_b(int(n), s) for s in Wp) > 4 * p * logR for n in ns],
                            dtype=bool)
        Ep[p] = ns[keep].tolist()
        stride = 2 * int(math.floor(psi[p])) + 3
        G[p] = Ep[p][stride - 1::stride]
        if not G[p]:
            raise HorizonTooSmallError(f"G_{p} is empty below horizon {horizon}")

    sign, log_abs, owner = {}, {}, {}
    for p in ps:
        y = dense_seq[p]
        for n in G[p]:
            for s in spec.W(p):
                i = _as_key(spec.phi(n, s))
                if i in owner:
                    raise SpecInconsistencyError(
                        f"coordinate {i!r} assigned by (p, n, s) = {owner[i]} and {(p, n, s)}")
                owner[i] = (p, n, s)
                v = y[s]
                if v == 0:
                    continue
                la = math.log(abs(v)) - spec.log_b(n, s)
                bound = math.log(y.sup_norm()) - 4 * p * logR
                if la > bound + 1e-9:
                    raise SpecInconsistencyError(f"tail bound fails at {i!r}")
                sign[i] = math.copysign(1.0, v)
                log_abs[i] = la
    x = LogSeq(sign, log_abs, spec.universe)
    trace = ConstructionTrace(psi, sigma, Mreq, Ep, G, dict(dense_seq), x, horizon)
    return x, trace


# orbits ---------------------------------------------------------------------------

def _orbit_block(spec, idx, sg, la, tj, ty, ns):
    n = ns[:, None]
    j = idx[None, :] - n
    valid = j >= 0 if spec.universe == "N" else np.ones_like(j, dtype=bool)
    j_safe = np.where(valid, j, 0)
    with np.errstate(over="ignore"):
        logv = spec.log_b(np.broadcast_to(n, j.shape), j_safe) + la[None, :]
        vals = np.where(valid, sg[None, :] * np.exp(logv), 0.0)
    if len(tj):
        want = tj[None, :] + n
        pos = np.clip(np.searchsorted(idx, want), 0, len(idx) - 1)
        found = idx[pos] == want
        rows = np.broadcast_to(np.arange(len(ns))[:, None], pos.shape)
        hit = np.where(found, vals[rows, pos], 0.0)
        tdiff = np.abs(hit - ty[None, :]).max(axis=1)
        vals = vals.copy()
        vals[rows[found], pos[found]] = 0.0
    else:
        tdiff = np.zeros(len(ns))
    other = np.abs(vals).max(axis=1) if vals.shape[1] else np.zeros(len(ns))
    return np.maximum(other, tdiff)


def orbit_scan(spec: PseudoShiftSpec, x, target: SparseSeq, ns: Iterable[int],
               threads: int = 1, block: int = 256) -> np.ndarray:
    """``||T_n x - target||_sup`` for each ``n`` in ``ns``.

    Integer universes with a vectorized spec run in blocks of ``n`` (optionally
    on ``threads`` worker threads); other specs apply each ``T_n`` in turn.
    """
    ns = np.asarray(list(ns), dtype=np.int64)
    if not isinstance(x, LogSeq):
        x = LogSeq.from_sparse(x)
    if spec.vectorized and spec.universe in ("Z", "N"):
        if len(x) == 0:
            return np.full(len(ns), target.sup_norm())
        idx, sg, la = x.arrays()
        tkeys = sorted(target.entries)
        tj = np.array(tkeys, dtype=np.int64)
        ty = np.array([target[k] for k in tkeys], dtype=float)
        chunks = [ns[i:i + block] for i in range(0, len(ns), block)]

        def run(c):
            return _orbit_block(spec, idx, sg, la, tj, ty, c)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(run, chunks))
        else:
            parts = [run(c) for c in chunks]
        return np.concatenate(parts) if parts else np.array([])
    out = []
    for n in ns.tolist():
        out.append((pseudo_shift_apply(spec, n, x) - target).sup_norm())
    return np.array(out)


def orbit_csv(ns: Iterable[int], distances: Iterable[float]) -> str:
    lines = ["# schema=1", "n,distance"]
    lines += [f"{int(n)},{float(d)!r}" for n, d in zip(ns, distances)]
    return "\n".join(lines) + "\n"


# extraction ---------------------------------------------------------------------

@dataclass
class ExtractionResult:
    sets: FrequencySets
    F: dict[int, list[int]]
    alpha: dict[int, float]
    estimate_violations: list
    estimates_checked: int

    def to_json(self) -> dict:
        return {"sets": self.sets.to_json(), "alpha": self.alpha,
                "F_sizes": {str(p): len(v) for p, v in self.F.items()},
                "estimate_violations": self.estimate_violations[:50],
                "estimates_checked": self.estimates_checked}


def extract_frequency_sets(spec: PseudoShiftSpec, x, alpha: Mapping[int, float],
                           horizon: int, threads: int = 1) -> ExtractionResult:
    """``F_p = {n : ||T_n x - alpha_p sum_{W_p} e_i|| < 1/p}``, thinned to every
    ``(2[Psi(p)] + 3)``-th element, with the two-sided estimate
    ``alpha_p/2 <= |b^n_s x_{phi_n(s)}| < 2 alpha_p`` checked on every kept ``n``.

    Empty ``F_p`` is a finding, not an error.  ``M(p) = p`` on the result.
    """
    alpha = dict(alpha)
    ps = sorted(alpha)
    if alpha[ps[0]] != 2.0:
        raise InvalidInputError("alpha_1 must equal 2")
    for p in ps[1:]:
        if not alpha[p] > 4 * alpha[p - 1] * spec.ratio_R ** (2 * spec.psi(p)):
            raise InvalidInputError(f"alpha_{p} violates alpha_p > 4 alpha_(p-1) R^(2 Psi(p))")
    if not isinstance(x, LogSeq):
        x = LogSeq.from_sparse(x)
    ns = np.arange(1, horizon + 1)
    F, E = {}, {}
    violations, checked = [], 0
    targets = indicator_targets(spec, alpha)
    for p in ps:
        dist = orbit_scan(spec, x, targets[p], ns, threads=threads)
        F[p] = ns[dist < 1.0 / p].tolist()
        stride = 2 * int(math.floor(spec.psi(p))) + 3
        E[p] = F[p][stride - 1::stride]
        for n in E[p]:
            for s in spec.W(p):
                i = _as_key(spec.phi(n, s))
                checked += 1
                if i not in x.log_abs:
                    violations.append({"p": p, "n": n, "s": repr(s), "value": 0.0})
                    continue
                lv = spec.log_b(n, s) + x.log_abs[i]
                if not (math.log(alpha[p] / 2) <= lv < math.log(2 * alpha[p])):
                    violations.append({"p": p, "n": n, "s": repr(s), "value": math.exp(lv)})
    sets = FrequencySets(E, {p: float(p) for p in ps}, horizon,
                         {p: {"rule": "extracted", "stride": 2 * int(math.floor(spec.psi(p))) + 3}
                          for p in ps})
    return ExtractionResult(sets, F, alpha, violations, checked)


# unconditional series -------------------------------------------------------------

@dataclass
class SeriesReport:
    verdict: Verdict
    M_eps: float | None
    eps: float
    trials: int
    max_norm: float
    violations: int
    witness: list[int] | None
    horizon: int
    direction_max: dict = field(default_factory=dict)


def _support_hull(f: SampledFunction) -> tuple[float, float]:
    nz = np.nonzero(f.values)[0]
    if len(nz) == 0:
        return (0.0, 0.0)
    if f.values[0] != 0 or f.values[-1] != 0:
        raise ContractError("f must vanish at both window ends (compact support inside the window)")
    h = 1.0 / 2 ** f.n_max
    x = f.nodes()
    return float(x[nz[0]] - h), float(x[nz[-1]] + h)


def _translate_sum_norm(f: SampledFunction, w: Weight, shifts: Sequence[int], refine: int) -> float:
    """``sup_x |sum_n f(x + n)| rho(x)`` for integer shifts, on the refined node grid."""
    g = f.refine(f.n_max + refine) if refine else f
    s = 2 ** g.n_max
    lo = g.lo - max(shifts)
    hi = g.hi - min(shifts)
    total = np.zeros((hi - lo) * s + 1)
    for n in shifts:
        off = (g.lo - n - lo) * s
        total[off:off + len(g.values)] += g.values
    x = lo + np.arange(len(total)) / s
    keep = total != 0
    if w.domain == HALF:
        keep &= x >= 0
    if not keep.any():
        return 0.0
    xs = x[keep]
    vals = np.abs(total[keep]) * np.asarray(w(xs))
    best = float(vals.max())
    if w.step:
        ints = np.isclose(xs, np.round(xs)) & (xs > (0 if w.domain == HALF else -np.inf))
        if ints.any():
            best = max(best, float((np.abs(total[keep][ints]) * np.asarray(w.eval_left(xs[ints]))).max()))
    return best


def check_unconditional_series(f: SampledFunction, w: Weight, trials: int, horizon: int,
                               eps: float, rng: np.random.Generator | None = None,
                               max_size: int = 20, refine: int = 2,
                               grid_step: float = 0.25) -> SeriesReport:
    """Random finite ``F`` beyond the eps-threshold: ``||sum_F T_1^n f||_rho <= 2 eps``, same for ``S``.

    With ``[a, b]`` the support hull of ``f`` and ``c = ceil(b - a) ||f||_inf / 2``
    (at most ``ceil(b - a)`` translates overlap), ``M_eps`` is the least grid
    point with ``rho(x) < eps / c`` for all sampled ``M_eps <= |x| <= horizon + |a| + |b|``.
    ``F`` is drawn from the integers in ``(M_eps + max(b, -a), horizon]``.
    Without such an ``M_eps`` the sets are drawn from ``[1, horizon]`` and the
    first set breaking the bound is returned as a witness.
    """
    rng = rng or np.random.default_rng(0)
    a, b = _support_hull(f)
    fsup = f.sup()
    if fsup == 0:
        return SeriesReport(Verdict.CONSISTENT, 0.0, eps, trials, 0.0, 0, None, horizon)
    overlap = max(1, math.ceil(b - a))
    c = overlap * fsup / 2
    reach = horizon + abs(a) + abs(b) + 1
    xs = np.arange(0, reach + grid_step / 2, grid_step)
    lr = np.asarray(w.log_eval(xs))
    if w.domain != HALF:
        lr = np.maximum(lr, np.asarray(w.log_eval(-xs)))
    big = np.nonzero(lr >= math.log(eps / c))[0]
    if len(big) == 0:
        M_eps = 0.0
    elif big[-1] + 1 < len(xs) and xs[big[-1] + 1] < horizon - max(b, -a) - 1:
        M_eps = float(xs[big[-1] + 1])
    else:
        M_eps = None

    start = int(math.floor((M_eps if M_eps is not None else 0.0) + max(b, -a))) + 1
    if M_eps is None:
        start = 1
    pool = np.arange(start, horizon + 1)
    if len(pool) == 0:
        raise HorizonTooSmallError("no admissible shifts below the horizon")
    worst, witness, violations = 0.0, None, 0
    dmax = {"T": 0.0, "S": 0.0}
    for _ in range(trials):
        size = int(rng.integers(1, min(max_size, len(pool)) + 1))
        Fset = sorted(int(v) for v in rng.choice(pool, size=size, replace=False))
        nT = _translate_sum_norm(f, w, Fset, refine)
        nS = _translate_sum_norm(f, w, [-n for n in Fset], refine)
        dmax["T"] = max(dmax["T"], nT)
        dmax["S"] = max(dmax["S"], nS)
        m = max(nT, nS)
        if m > worst:
            worst = m
        if m > 2 * eps:
            violations += 1
            if witness is None:
                witness = Fset
    if M_eps is None:
        verdict = Verdict.REFUTED_AT_HORIZON if violations else Verdict.NOT_WITNESSED
    else:
        verdict = Verdict.CONSISTENT if violations == 0 else Verdict.REFUTED_AT_HORIZON
    return SeriesReport(verdict, M_eps, eps, trials, worst, violations, witness, horizon, dmax)


# counterexample pipeline ------------------------------------------------------------

def dip_profile_weights(ones: Iterable[int], K: int, cap: int = 200):
    """Shift weights in ``{1/2, 1, 2}`` with ``w_1 ... w_k = 1`` exactly on ``ones``.

    For ``k >= 1``, ``-log2 rho(k) = min(k, dist(k, ones), cap)`` has slopes in
    ``{-1, 0, 1}``; for ``k <= 0`` every weight is ``1/2`` so ``rho`` decays to
    the left.  A synthetic stand-in for the published weight sequences; any
    sequence with the same two properties can be fed to the pipeline instead.
    """
    pts = np.array(sorted(set(int(s) for s in ones if s >= 1)), dtype=np.int64)

    def height(k):
        if k <= 0:
            return 0
        d = int(np.min(np.abs(pts - k))) if len(pts) else k
        return min(k, d, cap)

    h = {k: height(k) for k in range(0, K + 1)}
    table = {}
    for k in range(-K, K + 1):
        table[k] = 0.5 if k <= 0 else 2.0 ** (h[k] - h[k - 1])
    return table


@dataclass
class CounterexampleReport:
    ones_verified: bool
    weights_bounded: bool
    chaos: Any
    fh: ConditionReport
    horizon: int

    @property
    def fh_without_mixing(self) -> bool:
        return (self.ones_verified and self.weights_bounded and self.fh.ok
                and self.chaos.verdict == Verdict.REFUTED_AT_HORIZON)

    def to_json(self) -> dict:
        return {"ones_verified": self.ones_verified, "weights_bounded": self.weights_bounded,
                "chaos": self.chaos, "fh": self.fh.to_json(), "horizon": self.horizon,
                "fh_without_mixing": self.fh_without_mixing}


def counterexample_pipeline(w_seq: Mapping[int, float] | Callable[[int], float],
                            ones: Iterable[int], F: FrequencySets, horizon: int,
                            chaos_tol: float = 1e-3, fh_tol: float = 1e-6) -> CounterexampleReport:
    """Weight from shift weights, ``rho = 1`` on ``ones``, no mixing, yet (a)-(d) hold on ``F``."""
    get = w_seq.__getitem__ if isinstance(w_seq, Mapping) else w_seq
    bounded = all(0.5 <= get(k) <= 2.0 for k in range(-horizon, horizon + 1))
    rho = weight_from_shift_weights(w_seq, horizon)
    ones = [int(k) for k in ones if abs(k) <= horizon]
    ok_ones = all(abs(rho.log_eval(float(k))) <= 1e-12 for k in ones)
    chaos = check_chaos_c0(rho, chaos_tol, horizon)
    fh = check_c0_translation_fh(rho, F, horizon, tol=fh_tol)
    return CounterexampleReport(ok_ones, bounded, chaos, fh, horizon)
