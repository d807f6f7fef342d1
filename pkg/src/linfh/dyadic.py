"""Dyadic index set ``Z + D~`` and the Faber-Schauder hat system.

Index arithmetic is integer-only.  A :class:`DyadicIndex` ``(k, level, j)``
stands for ``k + j/2**level`` with ``j`` odd (or ``level == j == 0``).
Function samples live on the level-``n_max`` grid of an integer window and
are piecewise linear between nodes, so truncated expansions round-trip
exactly whenever the sample values are dyadic rationals.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from ._common import InvalidInputError, ResolutionError

FULL = "full"
HALF = "half"


@functools.total_ordering
@dataclass(frozen=True)
class DyadicIndex:
    k: int
    level: int = 0
    numerator: int = 0

    def __post_init__(self):
        if self.level < 0:
            raise InvalidInputError("level must be nonnegative")
        if self.level == 0:
            if self.numerator != 0:
                raise InvalidInputError("level 0 means tau = 0")
        elif not (self.numerator % 2 == 1 and 0 < self.numerator < 2 ** self.level):
            raise InvalidInputError(
                f"numerator must be odd in [1, 2^{self.level} - 1], got {self.numerator}")

    @classmethod
    def from_value(cls, x) -> "DyadicIndex":
        """The index whose value is the dyadic rational ``x``."""
        x = Fraction(x)
        k = x.numerator // x.denominator
        tau = x - k
        if tau == 0:
            return cls(k)
        d = tau.denominator
        if d & (d - 1):
            raise InvalidInputError(f"{x} is not dyadic")
        return cls(k, d.bit_length() - 1, tau.numerator)

    @property
    def tau(self) -> Fraction:
        return Fraction(self.numerator, 2 ** self.level)

    @property
    def value(self) -> Fraction:
        return self.k + self.tau

    @property
    def tau_minus(self) -> Fraction:
        return self.tau - Fraction(1, 2 ** self.level)

    @property
    def tau_plus(self) -> Fraction:
        return self.tau + Fraction(1, 2 ** self.level)

    def shift(self, d: int) -> "DyadicIndex":
        return DyadicIndex(self.k + d, self.level, self.numerator)

    def block(self, domain: str = FULL) -> int:
        """Which ``V_n`` (or ``J_n`` on the half-line) the index belongs to."""
        if domain == HALF:
            if self.k < 0:
                raise InvalidInputError("half-line indices have k >= 0")
            return self.k + self.level
        return self.level + abs(self.k)

    def __lt__(self, other):
        if not isinstance(other, DyadicIndex):
            return NotImplemented
        return rank(self) < rank(other)

    def __repr__(self):
        if self.level == 0:
            return f"DyadicIndex({self.k})"
        return f"DyadicIndex({self.k}+{self.numerator}/{2 ** self.level})"

    def to_record(self) -> tuple[int, int, int]:
        return (self.k, self.level, self.numerator)


def D(n: int) -> list[int]:
    """Numerators of ``D_n`` over ``2**n``: ``[0]`` for ``n = 0``, odd ``j`` otherwise."""
    if n == 0:
        return [0]
    return list(range(1, 2 ** n, 2))


def _level_block(n: int, domain: str) -> list[DyadicIndex]:
    if domain == HALF:
        parts = [(h, n - h) for h in range(0, n + 1)]
    else:
        parts = [(-n + h, h) for h in range(0, n + 1)] + [(h, n - h) for h in range(1, n + 1)]
    out = [DyadicIndex(k, m, j) for k, m in parts for j in D(m)]
    out.sort(key=lambda i: i.value)
    return out


@functools.lru_cache(maxsize=None)
def _block_cached(n: int, domain: str) -> tuple[DyadicIndex, ...]:
    return tuple(_level_block(n, domain))


def block_size(n: int, domain: str = FULL) -> int:
    def dsize(m):
        return 1 if m == 0 else 2 ** (m - 1)
    if domain == HALF:
        return sum(dsize(n - h) for h in range(n + 1))
    return sum(dsize(h) for h in range(n + 1)) + sum(dsize(n - h) for h in range(1, n + 1))


class BasisOrdering:
    """Enumeration of ``Z + D~`` by blocks ``V_0, V_1, ...``, each in increasing order.

    With ``domain="half"`` the blocks are ``J_n = {h + D_{n-h}: h = 0..n}``
    enumerating ``Z_+ + D~``.
    """

    def __init__(self, domain: str = FULL):
        if domain not in (FULL, HALF):
            raise InvalidInputError(f"unknown domain {domain!r}")
        self.domain = domain

    def block(self, n: int) -> tuple[DyadicIndex, ...]:
        return _block_cached(n, self.domain)

    def offset(self, n: int) -> int:
        return sum(block_size(m, self.domain) for m in range(n))

    def _parts(self, n: int) -> list[tuple[int, int]]:
        """``(k, level)`` pieces of block ``n`` in increasing ``k``; piece values lie in ``[k, k+1)``."""
        if self.domain == HALF:
            return [(h, n - h) for h in range(0, n + 1)]
        return [(k, n - abs(k)) for k in range(-n, n + 1)]

    def rank(self, idx: DyadicIndex) -> int:
        n = idx.block(self.domain)
        pos = 0
        for k, m in self._parts(n):
            if k == idx.k:
                return self.offset(n) + pos + (idx.numerator - 1) // 2 if m else self.offset(n) + pos
            pos += 1 if m == 0 else 2 ** (m - 1)
        raise InvalidInputError(f"{idx} not in block {n}")

    def index_at(self, r: int) -> DyadicIndex:
        if r < 0:
            raise InvalidInputError("rank must be nonnegative")
        n = 0
        while r >= block_size(n, self.domain):
            r -= block_size(n, self.domain)
            n += 1
        for k, m in self._parts(n):
            size = 1 if m == 0 else 2 ** (m - 1)
            if r < size:
                return DyadicIndex(k) if m == 0 else DyadicIndex(k, m, 2 * r + 1)
            r -= size
        raise AssertionError("unreachable")

    def prefix(self, count: int) -> Iterator[DyadicIndex]:
        n = 0
        while count > 0:
            for idx in self.block(n):
                if count == 0:
                    return
                yield idx
                count -= 1
            n += 1


_FULL_ORDER = BasisOrdering(FULL)


def rank(idx: DyadicIndex, domain: str = FULL) -> int:
    return (_FULL_ORDER if domain == FULL else BasisOrdering(domain)).rank(idx)


def wn_set(n: int) -> list[DyadicIndex]:
    """``W_n = [[-n, n]] + D~_n``, of size ``(2n+1) 2^n``."""
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    return [DyadicIndex(k, m, j) for k in range(-n, n + 1) for m in range(n + 1) for j in D(m)]


def hat(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


def hat_eval(idx: DyadicIndex, x, domain: str = FULL):
    """``phi_{k+tau}(x) = phi(2^n (x - k - tau))`` with ``phi(x) = max(0, 1 - |x|)``.

    Exact for ``Fraction`` input.  On the half-line the index ``0`` is the
    one-sided hat ``psi_0(x) = max(0, 1 - x)`` on ``x >= 0``.
    """
    scale = 2 ** idx.level
    if isinstance(x, (Fraction, int)):
        if domain == HALF and x < 0:
            return Fraction(0)
        u = scale * (Fraction(x) - idx.value)
        if domain == HALF and idx.k == 0 and idx.level == 0:
            return max(Fraction(0), 1 - u)
        return max(Fraction(0), 1 - abs(u))
    arr = np.asarray(x, dtype=float)
    u = scale * (arr - float(idx.value))
    if domain == HALF and idx.k == 0 and idx.level == 0:
        out = np.where(arr >= 0, np.maximum(0.0, 1.0 - u), 0.0)
    else:
        out = hat(u)
        if domain == HALF:
            out = np.where(arr >= 0, out, 0.0)
    return float(out) if np.ndim(x) == 0 else out


# sampled functions -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Node values on ``lo + i / 2**n_max`` for ``i = 0 .. (hi - lo) 2**n_max``.

    Piecewise linear between nodes and zero outside ``[lo, hi]``.
    """

    lo: int
    hi: int
    n_max: int
    values: np.ndarray

    def __post_init__(self):
        if self.hi <= self.lo:
            raise InvalidInputError("window must have positive length")
        expected = (self.hi - self.lo) * 2 ** self.n_max + 1
        vals = np.asarray(self.values)
        if vals.shape != (expected,):
            raise InvalidInputError(f"expected {expected} node values, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def window(self) -> tuple[int, int]:
        return (self.lo, self.hi)

    @property
    def step(self) -> Fraction:
        return Fraction(1, 2 ** self.n_max)

    def nodes(self) -> np.ndarray:
        return self.lo + np.arange(len(self.values)) / 2 ** self.n_max

    def node_fraction(self, i: int) -> Fraction:
        return self.lo + Fraction(i, 2 ** self.n_max)

    def node_index(self, x) -> int:
        """Grid position of the dyadic point ``x``; raises if ``x`` is not a node."""
        q = (Fraction(x) - self.lo) * 2 ** self.n_max
        if q.denominator != 1:
            raise ResolutionError(f"{x} is finer than level {self.n_max}")
        return int(q)

    def at(self, x):
        """Value at a dyadic point; zero outside the window."""
        x = Fraction(x)
        if x < self.lo or x > self.hi:
            return 0.0
        return self.values[self.node_index(x)]

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        out = np.interp(xs, self.nodes(), self.values.astype(float), left=0.0, right=0.0)
        return float(out) if np.ndim(x) == 0 else out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values.astype(float))))

    def translate(self, d: int) -> "SampledFunction":
        """``x -> f(x + d)`` for an integer ``d >= 0`` on ``[lo, hi - d]``: a pure reindex."""
        if d < 0:
            return self.shift_forward(-d)
        if d >= self.hi - self.lo:
            raise InvalidInputError("translation consumes the whole window")
        off = d * 2 ** self.n_max
        return SampledFunction(self.lo, self.hi - d, self.n_max, self.values[off:].copy())

    def shift_forward(self, d: int) -> "SampledFunction":
        """``x -> f(x - d)``: the same samples on the window moved right by ``d``."""
        return SampledFunction(self.lo + d, self.hi + d, self.n_max, self.values.copy())

    def restrict(self, lo: int, hi: int) -> "SampledFunction":
        if lo < self.lo or hi > self.hi:
            raise InvalidInputError("restriction must lie inside the window")
        s = 2 ** self.n_max
        return SampledFunction(lo, hi, self.n_max,
                               self.values[(lo - self.lo) * s:(hi - self.lo) * s + 1].copy())

    def refine(self, n_max: int) -> "SampledFunction":
        """Resample at a finer level by linear interpolation (exact on dyadic data)."""
        if n_max < self.n_max:
            raise ResolutionError("refine only goes to finer levels")
        r = 2 ** (n_max - self.n_max)
        return SampledFunction(self.lo, self.hi, n_max, _interp_knots(self.values, r))

    def to_json(self) -> dict:
        return {"window": [self.lo, self.hi], "n_max": self.n_max,
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_json(cls, d) -> "SampledFunction":
        lo, hi = d["window"]
        return cls(int(lo), int(hi), int(d["n_max"]), np.asarray(d["values"], dtype=float))

    def to_csv(self) -> str:
        lines = ["# schema=1", f"# window={self.lo},{self.hi} n_max={self.n_max}", "x,value"]
        lines += [f"{self.node_fraction(i)},{float(v)!r}" for i, v in enumerate(self.values)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_callable(cls, func, lo: int, hi: int, n_max: int) -> "SampledFunction":
        xs = lo + np.arange((hi - lo) * 2 ** n_max + 1) / 2 ** n_max
        return cls(lo, hi, n_max, np.asarray(func(xs), dtype=float))


def _interp_knots(knots: np.ndarray, r: int) -> np.ndarray:
    """Linear interpolation of knot values onto a grid ``r`` times finer.

    Uses ``a + (b - a) * q / r`` with ``r`` a power of two, so dyadic data is
    reproduced without rounding.
    """
    knots = np.asarray(knots)
    if r == 1:
        return knots.copy()
    m = len(knots) - 1
    i = np.arange(m * r + 1)
    q, rem = np.divmod(i, r)
    q = np.minimum(q, m - 1)
    rem = i - q * r
    a = knots[q]
    b = knots[q + 1]
    return a + (b - a) * (rem / r)


def random_piecewise_linear(rng: np.random.Generator, lo: int, hi: int, n_max: int,
                            bits: int = 20, frac_bits: int = 10,
                            zero_ends: bool = False) -> SampledFunction:
    """Random dyadic node values ``m / 2**frac_bits`` with ``|m| < 2**bits``."""
    count = (hi - lo) * 2 ** n_max + 1
    vals = rng.integers(-(2 ** bits) + 1, 2 ** bits, size=count).astype(float) / 2 ** frac_bits
    if zero_ends:
        vals[0] = vals[-1] = 0.0
    return SampledFunction(lo, hi, n_max, vals)


# coefficients and reconstruction ---------------------------------------------

def _check_level(f: SampledFunction, n_max: int):
    if n_max > f.n_max:
        raise ResolutionError(f"level {n_max} requested but samples only reach {f.n_max}")
    if n_max < 0:
        raise InvalidInputError("level must be nonnegative")


def coefficient_levels(f: SampledFunction, n_max: int) -> list[np.ndarray]:
    """Array form of the Schauder coefficients.

    Entry ``0`` holds ``f(k)`` for ``k = lo..hi``.  Entry ``n >= 1`` is a
    ``(hi - lo, 2**(n-1))`` array whose ``[k - lo, (j - 1)//2]`` element is
    ``f(k + tau) - (f(k + tau-) + f(k + tau+))/2`` for ``tau = j/2**n``.
    """
    _check_level(f, n_max)
    s = 2 ** f.n_max
    v = f.values
    out = [v[::s].copy()]
    width = f.hi - f.lo
    for n in range(1, n_max + 1):
        h = 2 ** (f.n_max - n)
        centers = (np.arange(width)[:, None] * s + (2 * np.arange(2 ** (n - 1)) + 1)[None, :] * h)
        out.append(v[centers] - (v[centers - h] + v[centers + h]) / 2)
    return out


def schauder_coefficients(f: SampledFunction, n_max: int) -> "SparseSeq":
    """``a_k = f(k)``, ``a_{k+tau} = f(k+tau) - (f(k+tau-) + f(k+tau+))/2`` up to ``n_max``."""
    from .shifts import SparseSeq

    levels = coefficient_levels(f, n_max)
    entries = {}
    for i, a in enumerate(levels[0]):
        if a != 0:
            entries[DyadicIndex(f.lo + i)] = a
    for n in range(1, n_max + 1):
        arr = levels[n]
        for r, c in zip(*np.nonzero(arr)):
            entries[DyadicIndex(f.lo + int(r), n, 2 * int(c) + 1)] = arr[r, c]
    return SparseSeq(entries, universe="ZD")


def _level_knots(lo: int, hi: int, n: int, items: Iterable[tuple[DyadicIndex, float]],
                 dtype=float) -> np.ndarray:
    """Knot values on the level-``n`` grid of ``[lo, hi]`` for one level of coefficients."""
    knots = np.zeros((hi - lo) * 2 ** n + 1, dtype=dtype)
    for idx, a in items:
        pos = (idx.k - lo) * 2 ** n + idx.numerator
        if 0 <= pos < len(knots):
            knots[pos] += a
    return knots


def reconstruct(a, lo: int, hi: int, n_max: int, domain: str = FULL) -> SampledFunction:
    """Partial sum ``sum a_{k+tau} phi_{k+tau}`` at all level-``n_max`` nodes of ``[lo, hi]``.

    Terms above level ``n_max`` are dropped.  Each level is the piecewise
    linear interpolant of its coefficients on the level grid (zero at the
    coarser knots), so the sum is exact on dyadic data.  ``domain`` only
    matters when the window starts below 0.
    """
    entries = a.entries if hasattr(a, "entries") else dict(a)
    by_level: dict[int, list] = {}
    for idx, v in entries.items():
        if idx.level <= n_max:
            by_level.setdefault(idx.level, []).append((idx, v))
    total = np.zeros((hi - lo) * 2 ** n_max + 1)
    for n, items in sorted(by_level.items()):
        knots = _level_knots(lo, hi, n, items)
        total = total + _interp_knots(knots, 2 ** (n_max - n))
    out = SampledFunction(lo, hi, n_max, total)
    if domain == HALF and lo < 0:
        vals = out.values.copy()
        vals[out.nodes() < 0] = 0.0
        out = SampledFunction(lo, hi, n_max, vals)
    return out


def level_sup_bound_holds(a, lo: int, hi: int, n_max: int) -> tuple[bool, float, float]:
    """Check ``sup |sum_{tau in D_n} a phi| <= 2 sup |a|`` for single-level ``a``."""
    entries = a.entries if hasattr(a, "entries") else dict(a)
    levels = {idx.level for idx in entries}
    if len(levels) > 1:
        raise InvalidInputError("coefficients must sit on one level")
    f = reconstruct(a, lo, hi, n_max)
    lhs = f.sup()
    rhs = 2 * max((abs(v) for v in entries.values()), default=0.0)
    return lhs <= rhs, lhs, rhs
