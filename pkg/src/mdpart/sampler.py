"""Random MDP partitions under the canonical, grand-canonical and uniform ensembles.

Canonical ``mu_{z,k}``: the differences ``D_j = q_{k-j} + G_j`` have independent
``G_j ~ Geometric(1 - e^{-zj})`` on ``{0, 1, ...}``.

Grand canonical ``mu_z``: draw ``K`` with probability ``F(z,k)/F(z)``, then as above.

Uniform ``nu_{n,k}`` and ``nu_n`` are exact by two routes:

* table: a uniform big integer is unranked against ``CountTable`` and pushed
  through the inverse Sylvester map (small fibers);
* rejection: propose from ``mu_z`` with ``G_1`` left free, set ``G_1`` so that
  the weight is exactly ``n`` and accept with probability ``e^{-z G_1}``.  The
  accepted law is uniform on the fiber for any ``z > 0``; ``z`` is tuned so the
  proposal mean weight is ``n``, which keeps the acceptance rate near
  ``n^{-1/4}`` (fibers too large for a table).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .counting import CountTable, _check_z, grand_weights, log_gen_fn
from .errors import DomainError, EmptyClassError
from .gapseq import GapSequence
from .partition import Partition, ground_state, sylvester_inverse
from .rng import TAG_SAMPLE, randbelow, stream

DEFAULT_TABLE_BUDGET = 1_000_000   # CountTable cells
_BATCH = 64                        # rejection proposals per round


def _geometric(rng, z, j, size):
    """``floor(log U / (-z j))`` with ``U`` uniform on ``(0, 1]``: Geometric(1 - e^{-zj}) on {0,1,..}."""
    u = 1.0 - rng.random(size)
    return np.floor(np.log(u) / (-z * j)).astype(np.int64)


def _parts_from_differences(d: np.ndarray) -> np.ndarray:
    """Rows of differences ``D_1..D_k`` to rows of parts ``lambda_1..lambda_k``."""
    return np.cumsum(d[..., ::-1], axis=-1)[..., ::-1]


# --------------------------------------------------------------------------- #
# canonical and grand canonical

def sample_canonical_batch(g: GapSequence, z: float, k: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` draws from ``mu_{z,k}`` as an ``(size, k)`` array of parts."""
    _check_z(z)
    if k < 1:
        raise DomainError("k must be >= 1")
    j = np.arange(1, k + 1)
    d = _geometric(rng, z, j, (size, k)) + g.gaps(k)[::-1]   # D_j = q_{k-j} + G_j
    return _parts_from_differences(d)


def sample_canonical(g: GapSequence, z: float, k: int, rng: np.random.Generator) -> Partition:
    """One draw from ``mu_{z,k}``."""
    row = sample_canonical_batch(g, z, k, rng, 1)[0]
    return Partition._trusted(tuple(int(x) for x in row))


def sample_grand_batch(g: GapSequence, z: float, rng: np.random.Generator, size: int,
                       rel_tail: float = 1e-10) -> list:
    """``size`` draws from ``mu_z``."""
    w = grand_weights(g, z, rel_tail)
    ks = w.sample_k(rng, size)
    out = [Partition._trusted(())] * size
    for k in np.unique(ks).tolist():
        if k == 0:
            continue
        where = np.flatnonzero(ks == k)
        rows = sample_canonical_batch(g, z, k, rng, len(where))
        for i, row in zip(where.tolist(), rows.tolist()):
            out[i] = Partition._trusted(tuple(row))
    return out


def sample_grand(g: GapSequence, z: float, rng: np.random.Generator, rel_tail: float = 1e-10) -> Partition:
    """One draw from ``mu_z``."""
    return sample_grand_batch(g, z, rng, 1, rel_tail)[0]


# --------------------------------------------------------------------------- #
# uniform samplers

def _mean_excess(z, k):
    """``sum_{j<=k} j e^{-zj} / (1 - e^{-zj})`` for every prefix length ``k`` (array)."""
    j = np.arange(1, k + 1, dtype=float)
    with np.errstate(over="ignore"):
        return np.cumsum(j / np.expm1(z * j))


def _solve_log_z(f, start):
    """Root in ``log z`` of a decreasing function ``f``, bracketed outward from ``start``."""
    lo = hi = start
    while f(lo) < 0:
        lo -= 1.0
    while f(hi) > 0:
        hi += 1.0
    if lo == hi:
        return lo
    return brentq(f, lo, hi, xtol=1e-10)


def _length_law(g, z, K_n):
    """``mu_z{K = k}`` restricted to ``1 <= k <= K_n``."""
    logF = log_gen_fn(g, z, K_n)[1:]
    w = np.exp(logF - logF.max())
    return w / w.sum()


def matching_z(g: GapSequence, n: int, k: Optional[int] = None) -> float:
    """``z`` whose proposal mean weight is ``n``.

    With ``k`` fixed this solves ``s_k + sum_{j<=k} j / (e^{zj} - 1) = n``; with
    ``k`` free the length is drawn from ``mu_z`` restricted to ``1 <= k <= K_n``
    (``K_n`` the longest feasible length).  Needs ``n`` above the ground-state weight.
    """
    if k is not None:
        excess = n - g.weighted_sum(k)
        if excess <= 0:
            raise DomainError("n must exceed s_k")
        f = lambda lz: math.log(max(_mean_excess(math.exp(lz), k)[-1], 1e-300)) - math.log(excess)
        return math.exp(_solve_log_z(f, -0.5 * math.log(excess)))
    K_n = g.max_length(n)
    if K_n < 1 or n <= g.gap(0):
        raise DomainError("n must exceed q_0")
    s = g.weighted_sums(K_n).astype(float)

    def f(lz):
        z = math.exp(lz)
        mean = float(np.dot(_length_law(g, z, K_n), s[1:] + _mean_excess(z, K_n)))
        return math.log(mean) - math.log(n)

    return math.exp(_solve_log_z(f, -0.5 * math.log(n)))


class UniformSampler:
    """Exact uniform sampler on ``Lambda_q(n, k)`` (``k`` given) or ``Lambda_q(n)``.

    ``method`` is ``"table"``, ``"rejection"`` or ``"auto"`` (table when it fits in
    ``budget`` cells).  Construction does the one-off work; draws are cheap.
    """

    def __init__(self, g: GapSequence, n: int, k: Optional[int] = None,
                 budget: int = DEFAULT_TABLE_BUDGET, method: str = "auto"):
        if n < 0 or (k is not None and k < 0):
            raise DomainError("n and k must be nonnegative")
        self.g, self.n, self.k = g, n, k
        self.trivial: Optional[Partition] = None
        self.proposals = 0
        self.accepted = 0
        K_n = g.max_length(n)
        if k is None:
            if n == 0:
                self.trivial = Partition._trusted(())
            elif K_n == 0:
                raise EmptyClassError(f"no MDP partition of {n} for {g!r}")
            elif K_n == 1:
                self.trivial = Partition._trusted((n,))
            m_max, k_max = n - g.gap(0), K_n
        else:
            if k == 0:
                if n:
                    raise EmptyClassError("only the empty partition has no parts")
                self.trivial = Partition._trusted(())
            elif k > K_n:
                raise EmptyClassError(f"no MDP partition of {n} with {k} parts for {g!r}")
            elif n == g.weighted_sum(k):
                self.trivial = ground_state(g, k)
            elif k == 1:
                self.trivial = Partition._trusted((n,))
            m_max, k_max = (n - g.weighted_sum(k) if k else 0), k
        if method == "auto":
            method = "table" if CountTable.cells_needed(m_max, k_max) <= budget else "rejection"
        if method not in ("table", "rejection"):
            raise ValueError(f"unknown method {method!r}")
        self.method = method
        if self.trivial is not None:
            return
        if method == "table":
            self._setup_table(m_max, k_max)
        else:
            self._setup_rejection(K_n)

    # -- table ----------------------------------------------------------------
    def _setup_table(self, m_max, k_max):
        g, n = self.g, self.n
        self.table = CountTable(m_max, k_max)
        if self.k is not None:
            self.counts = [(self.k, self.table.parts_at_most(m_max, self.k))]
        else:
            s = g.weighted_sums(k_max)
            self.counts = [(k, self.table.parts_at_most(n - int(s[k]), k)) for k in range(1, k_max + 1)]
        self.total = sum(c for _, c in self.counts)

    def _draw_table(self, rng):
        return self._unrank_global(randbelow(rng, self.total))

    # -- rejection --------------------------------------------------------------
    def _setup_rejection(self, K_n):
        self.z = matching_z(self.g, self.n, self.k)
        if self.k is not None:
            self.k_values = np.array([self.k])
            self.k_cdf = np.array([1.0])
            return
        p = _length_law(self.g, self.z, K_n)
        keep = np.flatnonzero(p > 0)
        self.k_values = keep + 1
        self.k_cdf = np.cumsum(p[keep])

    def _draw_rejection(self, rng):
        g, n, z = self.g, self.n, self.z
        while True:
            idx = np.searchsorted(self.k_cdf, rng.random(_BATCH) * self.k_cdf[-1], side="right")
            ks = self.k_values[np.minimum(idx, len(self.k_values) - 1)]
            k_hi = int(ks.max())
            j = np.arange(2, k_hi + 1)
            G = _geometric(rng, z, j, (_BATCH, k_hi - 1))
            G[j[None, :] > ks[:, None]] = 0
            s_k = g.weighted_sums(k_hi)[ks]
            g1 = n - s_k - G @ j
            u = rng.random(_BATCH)
            ok = (g1 >= 0) & (u < np.exp(-z * np.maximum(g1, 0)))
            hit = np.flatnonzero(ok)
            if hit.size == 0:
                self.proposals += _BATCH
                continue
            b = int(hit[0])
            self.proposals += b + 1
            self.accepted += 1
            k = int(ks[b])
            d = np.concatenate([[g1[b]], G[b, : k - 1]]) + g.gaps(k)[::-1]
            return Partition._trusted(tuple(int(x) for x in _parts_from_differences(d)))

    def draw_many(self, rng: np.random.Generator, size: int) -> list:
        """``size`` independent draws; table fibers below ``2**62`` elements are vectorized."""
        if self.trivial is not None:
            return [self.trivial] * size
        if self.method == "table" and self.total <= 2**62:
            ranks = rng.integers(0, self.total, size)
            uniq, inv = np.unique(ranks, return_inverse=True)
            parts = [self._unrank_global(int(u)) for u in uniq.tolist()]
            return [parts[i] for i in inv.tolist()]
        return [self.draw(rng) for _ in range(size)]

    def _unrank_global(self, u):
        for k, c in self.counts:
            if u < c:
                break
            u -= c
        r = self.n + k - self.g.weighted_sum(k)
        return sylvester_inverse(self.table.unrank(r, k, u), self.g)

    def draw(self, rng: np.random.Generator) -> Partition:
        if self.trivial is not None:
            return self.trivial
        if self.method == "table":
            return self._draw_table(rng)
        return self._draw_rejection(rng)


@lru_cache(maxsize=64)
def _cached_sampler(g, n, k, budget, method):
    return UniformSampler(g, n, k, budget, method)


def sample_uniform_nk(g: GapSequence, n: int, k: int, rng: np.random.Generator,
                      budget: int = DEFAULT_TABLE_BUDGET, method: str = "auto") -> Partition:
    """Uniform draw from ``Lambda_q(n, k)``; ``EmptyClassError`` if it is empty."""
    return _cached_sampler(g, n, k, budget, method).draw(rng)


def sample_uniform_n(g: GapSequence, n: int, rng: np.random.Generator,
                     budget: int = DEFAULT_TABLE_BUDGET, method: str = "auto") -> Partition:
    """Uniform draw from ``Lambda_q(n)``; ``EmptyClassError`` if it is empty."""
    return _cached_sampler(g, n, None, budget, method).draw(rng)


# --------------------------------------------------------------------------- #
# configuration and reproducible batches

@dataclass(frozen=True)
class CanonicalZK:
    z: float
    k: int


@dataclass(frozen=True)
class GrandZ:
    z: float


@dataclass(frozen=True)
class UniformNK:
    n: int
    k: int


@dataclass(frozen=True)
class UniformN:
    n: int


Ensemble = Union[CanonicalZK, GrandZ, UniformNK, UniformN]


@dataclass(frozen=True)
class SamplerConfig:
    """A gap sequence, an ensemble and a master seed.

    Draw ``i`` always uses the stream ``(seed, TAG_SAMPLE, i)``, so a batch is the
    same whatever the number of workers.
    """
    gaps: GapSequence
    ensemble: Ensemble
    seed: int
    budget: int = DEFAULT_TABLE_BUDGET
    method: str = field(default="auto")

    def __post_init__(self):
        e = self.ensemble
        if isinstance(e, (CanonicalZK, GrandZ)) and not e.z > 0:
            raise DomainError("z must be > 0")
        if getattr(e, "n", 0) < 0 or getattr(e, "k", 0) < 0:
            raise DomainError("n and k must be nonnegative")

    def draw(self, i: int) -> Partition:
        rng = stream(self.seed, TAG_SAMPLE, i)
        e, g = self.ensemble, self.gaps
        if isinstance(e, CanonicalZK):
            return sample_canonical(g, e.z, e.k, rng)
        if isinstance(e, GrandZ):
            return sample_grand(g, e.z, rng)
        if isinstance(e, UniformNK):
            return sample_uniform_nk(g, e.n, e.k, rng, self.budget, self.method)
        return sample_uniform_n(g, e.n, rng, self.budget, self.method)

    def draw_many(self, count: int, start: int = 0, workers: int = 1) -> list:
        idx = range(start, start + count)
        if workers <= 1:
            return [self.draw(i) for i in idx]
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(self.draw, idx))
