"""Exact distribution of overlapping success runs of length 2 in Bernoulli trials.

For a sequence of T independent Bernoulli(h) trials, the statistic of interest
is the number of adjacent index pairs (t, t+1) where both trials succeed.  A
success streak of length L contributes L - 1 such pairs (overlapping counting).
Two structurally independent ways of computing the distribution are provided:

* :func:`pmf_ling` evaluates the three-branch recursion over sequence length,
  memoised per success probability.
* :func:`pmf_chain` runs a position-by-position dynamic program over the state
  (run count so far, last outcome), which also powers the fast tail queries
  used by the detection pipeline.

They agree to ~1e-12 everywhere and are cross-checked against exhaustive
enumeration (:func:`enumerate_bruteforce`) in the test suite.  One-sided
p-values are upper tails P(X >= c); the critical count is the largest run
count that is still compatible with honest mining at a given significance
level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

__all__ = [
    "RunCountDistribution",
    "TestStatistic",
    "LingTable",
    "pmf_ling",
    "pmf_chain",
    "p_value",
    "critical_count",
    "enumerate_bruteforce",
    "sample_runcount",
]


def _check_h(h: float) -> float:
    h = float(h)
    if not (0.0 <= h <= 1.0) or math.isnan(h):
        raise ValueError(f"h must be in [0, 1], got {h!r}")
    return h


def _check_T(T: int) -> int:
    T = int(T)
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    return T


def _check_x(x: int, T: int, name: str = "x") -> int:
    x = int(x)
    if x < 0 or x > max(T - 1, 0):
        raise ValueError(f"{name} must be in [0, {max(T - 1, 0)}] for T={T}, got {x}")
    return x


@dataclass(frozen=True, eq=False)
class RunCountDistribution:
    """Exact pmf of the overlapping length-2 run count for (h, T).

    ``pmf[x]`` is P(X = x) for x = 0 .. max(T-1, 0).  The array is read-only;
    instances are safe to share between concurrent readers.
    """

    h: float
    T: int
    pmf: np.ndarray

    def __post_init__(self):
        _check_h(self.h)
        _check_T(self.T)
        arr = np.array(self.pmf, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "pmf", arr)

    def __len__(self) -> int:
        return len(self.pmf)

    def tail(self, c: int) -> float:
        """P(X >= c), by compensated summation of the head."""
        c = _check_x(c, self.T, "c")
        if c == 0:
            return 1.0
        return min(1.0, max(0.0, 1.0 - math.fsum(self.pmf[:c].tolist())))

    def mean(self) -> float:
        return float(np.arange(len(self.pmf)) @ self.pmf)

    def argmax(self) -> int:
        return int(np.argmax(self.pmf))


@dataclass(frozen=True)
class TestStatistic:
    """Observed run count c for a miner over T blocks under null power h."""

    __test__ = False  # not a pytest class

    c: int
    T: int
    h: float

    def __post_init__(self):
        _check_h(self.h)
        _check_T(self.T)
        if self.T < 2:
            if self.c != 0:
                raise ValueError(f"c must be 0 for T={self.T}, got {self.c}")
        else:
            _check_x(self.c, self.T, "c")

    def p_value(self) -> float:
        return p_value(self.h, self.T, self.c)


class LingTable:
    """Memoised evaluator of the order-2 run-count recursion for one h.

    The pmf satisfies, for sequence length T and run count x:

        P(X_T = x) = h^T                                  if x = T - 1
        P(X_T = x) = 2 h^(T-1) (1 - h)                    if x = T - 2 > 0
        P(X_T = x) = sum_{j=1}^{x+2} h^(j-1) (1 - h)
                       * P(X_{T-j} = x - max(0, j - 2))   otherwise

    with P(X_T = 0) = 1 for T < 2.  Note the piecewise conditions as written
    leave (T=2, x=0) to the summation branch, which evaluates to 1 - h^2 as
    required.  Subproblems are resolved iteratively (no recursion depth limit)
    and cached over (T, x); entries are written once, so concurrent readers
    never observe a partial value.
    """

    def __init__(self, h: float):
        self.h = _check_h(h)
        self._memo: dict[tuple[int, int], float] = {}
        self._hpow: list[float] = [1.0]

    def _hp(self, k: int) -> float:
        while len(self._hpow) <= k:
            self._hpow.append(self._hpow[-1] * self.h)
        return self._hpow[k]

    def _closed(self, T: int, x: int) -> float | None:
        if T < 2:
            return 1.0 if x == 0 else 0.0
        if x == T - 1:
            return self._hp(T)
        if x == T - 2 and x > 0:
            return 2.0 * self._hp(T - 1) * (1.0 - self.h)
        return None

    def prob(self, T: int, x: int) -> float:
        T = _check_T(T)
        x = _check_x(x, T)
        h = self.h
        # degenerate powers short-circuit the recursion entirely
        if h == 0.0:
            return 1.0 if x == 0 else 0.0
        if h == 1.0:
            return 1.0 if x == max(T - 1, 0) else 0.0
        memo = self._memo
        stack = [(T, x)]
        while stack:
            Ti, xi = stack[-1]
            if (Ti, xi) in memo:
                stack.pop()
                continue
            v = self._closed(Ti, xi)
            if v is not None:
                memo[(Ti, xi)] = v
                stack.pop()
                continue
            deps = [(Ti - j, xi - max(0, j - 2)) for j in range(1, xi + 3)]
            pending = [d for d in deps if d not in memo and self._closed(*d) is None]
            if pending:
                stack.extend(pending)
                continue
            terms = []
            for j, dep in enumerate(deps, start=1):
                sub = memo.get(dep)
                if sub is None:
                    sub = self._closed(*dep)
                terms.append(self._hp(j - 1) * (1.0 - h) * sub)
            memo[(Ti, xi)] = math.fsum(terms)
            stack.pop()
        return memo[(T, x)]


@lru_cache(maxsize=32)
def _ling_table(h: float) -> LingTable:
    return LingTable(h)


def pmf_ling(h: float, T: int, x: int) -> float:
    """P(X = x) for T Bernoulli(h) trials, via the length recursion."""
    return _ling_table(_check_h(h)).prob(T, x)


@njit(cache=True)
def _state_dp(h: float, T: int, cmax: int) -> np.ndarray:  # pragma: no cover - jit
    """Position DP over (run count, last outcome); counts >= cmax absorb.

    Returns an array r of length cmax + 1 with r[k] = P(X = k) for k < cmax
    and r[cmax] = P(X >= cmax).  Requires T >= 1 and cmax >= 1.
    """
    a = np.zeros(cmax + 1)  # last trial succeeded
    b = np.zeros(cmax + 1)  # last trial failed
    na = np.zeros(cmax + 1)
    nb = np.zeros(cmax + 1)
    q = 1.0 - h
    a[0] = h
    b[0] = q
    for _ in range(1, T):
        for k in range(cmax + 1):
            nb[k] = (a[k] + b[k]) * q
        na[0] = b[0] * h
        for k in range(1, cmax):
            na[k] = (b[k] + a[k - 1]) * h
        na[cmax] = (b[cmax] + a[cmax - 1] + a[cmax]) * h
        a, na = na, a
        b, nb = nb, b
    out = np.empty(cmax + 1)
    for k in range(cmax + 1):
        out[k] = a[k] + b[k]
    return out


def pmf_chain(h: float, T: int) -> RunCountDistribution:
    """Full pmf table via the position-state dynamic program.

    Structurally independent of :func:`pmf_ling`; O(T^2) time, O(T) memory.
    """
    h = _check_h(h)
    T = _check_T(T)
    if T < 2:
        return RunCountDistribution(h, T, np.array([1.0]))
    if h == 0.0:
        pmf = np.zeros(T)
        pmf[0] = 1.0
        return RunCountDistribution(h, T, pmf)
    if h == 1.0:
        pmf = np.zeros(T)
        pmf[T - 1] = 1.0
        return RunCountDistribution(h, T, pmf)
    # with cmax = T - 1 the absorbing bucket is exactly P(X = T - 1)
    return RunCountDistribution(h, T, _state_dp(h, T, T - 1))


@lru_cache(maxsize=1 << 18)
def _tail_cached(h: float, T: int, c: int) -> float:
    head = _state_dp(h, T, c)[:c]
    return min(1.0, max(0.0, 1.0 - math.fsum(head.tolist())))


def p_value(h: float, T: int, c: int) -> float:
    """Upper tail P(X >= c) under Bernoulli(h) over T trials.

    The empty tail sum (c = 0) is 1; the head is accumulated with compensated
    summation.  Repeated queries at the same (h, T, c) are cached, so testing
    many windows with coinciding block shares costs table lookups.
    """
    h = _check_h(h)
    T = _check_T(T)
    c = _check_x(c, T, "c")
    if c == 0:
        return 1.0
    if h == 0.0:
        return 0.0
    if h == 1.0:
        return 1.0  # X = T - 1 a.s. and c <= T - 1
    return _tail_cached(h, T, c)


def critical_count(h: float, T: int, alpha_sig: float) -> int:
    """Largest c* whose tail probability still exceeds alpha_sig.

    An observed run count c is flagged when c > c* (strict); the tail itself
    uses the weak inequality P(X >= c).  The +-1 ambiguity between "largest
    non-significant" and "smallest significant minus one" conventions lives
    entirely in this function: we return the largest c with
    p_value(h, T, c) > alpha_sig.
    """
    h = _check_h(h)
    T = _check_T(T)
    alpha_sig = float(alpha_sig)
    if not (0.0 < alpha_sig < 1.0):
        raise ValueError(f"alpha_sig must be in (0, 1), got {alpha_sig}")
    if T < 2 or h == 0.0:
        return 0
    if h == 1.0:
        return T - 1  # every tail equals 1; no c is flaggable
    pmf = pmf_chain(h, T).pmf
    # tails[c] = P(X >= c) via Kahan-compensated head accumulation
    cstar = 0
    head = 0.0
    comp = 0.0
    for c in range(1, T):
        y = pmf[c - 1] - comp
        t = head + y
        comp = (t - head) - y
        head = t
        if 1.0 - head > alpha_sig:
            cstar = c
        else:
            break
    return cstar


def enumerate_bruteforce(h: float, T: int) -> RunCountDistribution:
    """Exact pmf by exhausting all 2^T outcome sequences (T <= 20)."""
    h = _check_h(h)
    T = _check_T(T)
    if T > 20:
        raise ValueError(f"enumerate_bruteforce supports T <= 20, got {T}")
    if T < 1:
        return RunCountDistribution(h, T, np.array([1.0]))
    masks = np.arange(1 << T, dtype=np.uint64)
    ones = np.bitwise_count(masks)
    runs = np.bitwise_count(masks & (masks >> np.uint64(1)))
    hp = h ** np.arange(T + 1, dtype=np.float64)
    qp = (1.0 - h) ** np.arange(T + 1, dtype=np.float64)
    weights = hp[ones] * qp[T - ones]
    pmf = np.bincount(runs, weights=weights, minlength=T)
    return RunCountDistribution(h, T, pmf)


def sample_runcount(h: float, T: int, n: int, seed: int) -> np.ndarray:
    """Simulate n run counts from i.i.d. Bernoulli(h) sequences of length T.

    Deterministic for a given seed; memory is bounded by chunking the draws.
    """
    h = _check_h(h)
    T = _check_T(T)
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    out = np.zeros(n, dtype=np.int64)
    if T < 2:
        return out
    rng = np.random.default_rng(seed)
    chunk = max(1, 2_000_000 // T)
    pos = 0
    while pos < n:
        k = min(chunk, n - pos)
        s = rng.random((k, T)) < h
        out[pos : pos + k] = (s[:, 1:] & s[:, :-1]).sum(axis=1)
        pos += k
    return out
