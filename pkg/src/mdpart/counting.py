"""Exact counts of MDP partitions and the grand-canonical generating function.

Counting goes through the shifted Sylvester map: MDP partitions of ``n`` with
``k`` parts are in bijection with partitions of ``r = n + k - s_k`` into exactly
``k`` parts, i.e. with partitions of ``m = n - s_k`` into parts of size at most
``k``.  Everything is exact Python integer arithmetic.

Generating functions are kept in log space::

    log F(z, k) = -z s_k - sum_{j<=k} log(1 - e^{-zj})
    eta_k(z)    = F(z, k) / F(z, k-1) = e^{-z Q_k} / (1 - e^{-zk})
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError
from .gapseq import GapSequence
from .partition import Partition


# --------------------------------------------------------------------------- #
# partitions into exactly k parts

class CountTable:
    """``p(r, k)``, the number of partitions of ``r`` into exactly ``k`` parts.

    Stored as ``P[k][m]`` = partitions of ``m = r - k`` into parts ``<= k``, which
    satisfies ``P[k][m] = P[k-1][m] + P[k][m-k]``; this is the usual recurrence
    ``p(r, k) = p(r-1, k-1) + p(r-k, k)`` after the shift.  Memory is
    ``(k_max + 1)(m_max + 1)`` integers.  The rows are tuples, so a built table
    is read-only and can be shared between threads.
    """

    def __init__(self, m_max: int, k_max: int):
        if m_max < 0 or k_max < 0:
            raise ValueError("table bounds must be nonnegative")
        self.m_max = m_max
        self.k_max = k_max
        row = [1] + [0] * m_max
        rows = [tuple(row)]
        for j in range(1, k_max + 1):
            for m in range(j, m_max + 1):
                row[m] += row[m - j]
            rows.append(tuple(row))
        self._rows = rows

    @property
    def r_max(self) -> int:
        return self.m_max + self.k_max

    @property
    def cells(self) -> int:
        return (self.m_max + 1) * (self.k_max + 1)

    @staticmethod
    def cells_needed(m: int, k: int) -> int:
        return (m + 1) * (k + 1)

    def __call__(self, r: int, k: int) -> int:
        if k < 0 or r < 0:
            return 0
        m = r - k
        if m < 0:
            return 0
        if k > self.k_max or m > self.m_max:
            raise IndexError(f"p({r}, {k}) lies outside the table")
        return self._rows[k][m]

    def parts_at_most(self, m: int, k: int) -> int:
        """Partitions of ``m`` into parts of size ``<= k``."""
        return self._rows[k][m] if m >= 0 else 0

    def unrank(self, r: int, k: int, u: int) -> Partition:
        """The ``u``-th partition of ``r`` into exactly ``k`` parts, ``0 <= u < p(r, k)``.

        At state ``(r, k)`` the first ``p(r-1, k-1)`` ranks remove a part equal to 1,
        the rest subtract 1 from every part.
        """
        total = self(r, k)
        if not 0 <= u < total:
            raise ValueError("rank out of range")
        m = r - k
        rows = self._rows
        parts = []
        shift = 0
        while k > 0:
            ones = rows[k - 1][m]
            if u < ones:
                parts.append(1 + shift)
                k -= 1
            else:
                u -= ones
                m -= k
                shift += 1
        return Partition._trusted(tuple(reversed(parts)))


def count_exact_parts(r: int, k: int) -> int:
    """Partitions of ``r`` into exactly ``k`` parts, by a one-row DP."""
    if r < 0 or k < 0:
        raise DomainError("r and k must be nonnegative")
    if k == 0:
        return int(r == 0)
    m = r - k
    if m < 0:
        return 0
    ways = [1] + [0] * m
    for j in range(1, min(k, m) + 1):
        for i in range(j, m + 1):
            ways[i] += ways[i - j]
    return ways[m]


def count_mdp(g: GapSequence, n: int, k: int) -> int:
    """``p_q(n, k) = p(n + k - s_k, k)``, zero when ``n < s_k``."""
    if n < 0 or k < 0:
        raise DomainError("n and k must be nonnegative")
    if k == 0:
        return int(n == 0)
    s_k = g.weighted_sum(k)
    if n < s_k:
        return 0
    return count_exact_parts(n + k - s_k, k)


def count_mdp_by_k(g: GapSequence, n: int) -> list:
    """``[p_q(n, 0), ..., p_q(n, K)]`` with ``K`` the largest ``k`` such that ``s_k <= n``.

    One pass over part sizes ``j``: after adding part size ``j`` the row holds
    partitions into parts ``<= j``, and ``p_q(n, j)`` is its entry at ``n - s_j``.
    Only indices up to ``n - s_j`` are still needed at step ``j``.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    K = g.max_length(n)
    out = [int(n == 0)]
    if K == 0:
        return out
    s = g.weighted_sums(K)
    m_max = n - int(s[1])
    ways = [1] + [0] * m_max
    for j in range(1, K + 1):
        top = n - int(s[j])
        for i in range(j, top + 1):
            ways[i] += ways[i - j]
        out.append(ways[top])
    return out


def count_mdp_total(g: GapSequence, n: int) -> int:
    """``p_q(n)``, the number of MDP partitions of ``n``."""
    return sum(count_mdp_by_k(g, n))


# --------------------------------------------------------------------------- #
# generating functions

def _check_z(z):
    if not z > 0 or not math.isfinite(z):
        raise DomainError(f"z must be a positive finite real, got {z!r}")


def _log1mexp(x):
    """``log(1 - e^{-x})`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return np.where(x > math.log(2), np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))


def log_eta(g: GapSequence, z: float, k_hi: int) -> np.ndarray:
    """``log eta_k(z)`` for ``k = 1..k_hi``."""
    _check_z(z)
    Q = g.prefix_sums(k_hi).astype(float)
    k = np.arange(1, k_hi + 1, dtype=float)
    return -z * Q[1:] - _log1mexp(z * k)


def log_gen_fn(g: GapSequence, z: float, k_hi: int) -> np.ndarray:
    """``log F(z, k)`` for ``k = 0..k_hi``."""
    return np.concatenate([[0.0], np.cumsum(log_eta(g, z, k_hi))])


def gen_fn_fixed_k(g: GapSequence, z: float, k: int) -> float:
    """``log F(z, k) = -z s_k - sum_{j=1}^k log(1 - e^{-zj})``."""
    _check_z(z)
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return 0.0
    j = np.arange(1, k + 1, dtype=float)
    return float(-z * g.weighted_sum(k) - np.sum(_log1mexp(z * j)))


def eta(g: GapSequence, z: float, k: int) -> float:
    """``eta_k(z) = e^{-z Q_k} / (1 - e^{-zk})``."""
    _check_z(z)
    if k < 1:
        raise DomainError("k must be >= 1")
    return math.exp(-z * g.prefix_sum(k)) / -math.expm1(-z * k)


def k_star(g: GapSequence, z: float) -> int:
    """``max{k : eta_k(z) >= 1}``, or 1 if ``eta_1(z) < 1``; uses that ``eta_k`` decreases."""
    _check_z(z)
    if eta(g, z, 1) < 1:
        return 1
    lo, hi = 1, 2
    while eta(g, z, hi) >= 1:
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if eta(g, z, mid) >= 1:
            lo = mid
        else:
            hi = mid
    return lo


def k_gamma(g: GapSequence, z: float, gamma: float) -> int:
    """``inf{k : s_k >= z^{-2(1-gamma)}}``."""
    if not 0 < z < 1:
        raise DomainError("z must lie in (0, 1)")
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    thr = z ** (-2.0 * (1.0 - gamma))
    hi = 64
    while g.weighted_sum(hi) < thr:
        hi *= 2
    return int(np.searchsorted(g.weighted_sums(hi), thr, side="left"))


@dataclass(frozen=True)
class GrandCanonicalWeights:
    """Truncated ``log F(z, k)``, ``k = 0..K_max``, plus a bound on the neglected tail.

    ``log_tail`` bounds ``log sum_{k > K_max} F(z, k)`` by geometric domination:
    ``eta_k`` decreases and is below 1 past ``k_*``, so the tail is at most
    ``F(z, K_max) eta / (1 - eta)`` with ``eta = eta_{K_max+1}(z)``.
    """
    z: float
    log_F: np.ndarray
    log_tail: float
    k_star: int

    @property
    def K_max(self) -> int:
        return len(self.log_F) - 1

    @property
    def log_total(self) -> float:
        """``log F(z)`` up to the (bounded) tail."""
        return float(logsumexp(self.log_F))

    @property
    def rel_tail(self) -> float:
        return math.exp(self.log_tail - self.log_total)

    def probabilities(self) -> np.ndarray:
        """``mu_z{K = k}``; the tail bound is added to ``K_max``."""
        logs = self.log_F.copy()
        logs[-1] = np.logaddexp(logs[-1], self.log_tail)
        return np.exp(logs - logsumexp(logs))

    def sample_k(self, rng: np.random.Generator, size=None):
        cdf = np.cumsum(self.probabilities())
        u = rng.random(size)
        return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), self.K_max)


def grand_weights(g: GapSequence, z: float, rel_tail: float = 1e-10) -> GrandCanonicalWeights:
    """Weights ``F(z, k)`` truncated at the first ``K >= k_*(z)`` whose tail bound is
    below ``rel_tail`` times the accumulated sum."""
    _check_z(z)
    if not 0 < rel_tail < 1:
        raise DomainError("rel_tail must lie in (0, 1)")
    ks = k_star(g, z)
    L = max(2 * ks + 16, 64)
    log_rel = math.log(rel_tail)
    while True:
        le = log_eta(g, z, L + 1)
        logF = np.concatenate([[0.0], np.cumsum(le[:L])])
        run = np.logaddexp.accumulate(logF)
        K = np.arange(L + 1)
        nxt = le[K]                     # log eta_{K+1}
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = logF + nxt - np.log(-np.expm1(nxt))
        ok = (K >= ks) & (nxt < 0) & (tail < log_rel + run)
        hit = np.flatnonzero(ok)
        if hit.size:
            K_max = int(hit[0])
            return GrandCanonicalWeights(z, logF[: K_max + 1], float(tail[K_max]), ks)
        L *= 2
