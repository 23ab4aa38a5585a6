"""Gap sequences ``q = (q_0, q_1, ...)`` and their prefix sums.

A gap sequence fixes the minimal differences an MDP partition must respect.
Two derived sequences are used everywhere else in the package::

    Q_k = q_0 + ... + q_{k-1}          (Q_0 = 0)
    s_k = Q_1 + ... + Q_k              (s_0 = 0)

``GapSequence`` materializes ``q``, ``Q`` and ``s`` lazily into ``int64`` arrays.
Random kinds are generated block by block from streams keyed by the block
index, so the value at a given index never depends on access order.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from .errors import GapSpecError
from .rng import TAG_IID_GAPS, stream

if TYPE_CHECKING:
    from .rwre import RwreGapParams

_BLOCK = 4096


# --------------------------------------------------------------------------- #
# distributions for i.i.d. gaps

@dataclass(frozen=True)
class TwoPointDist:
    """``a`` with probability ``p``, otherwise ``b``."""
    a: int
    b: int
    p: float

    def draw(self, rng, size):
        return np.where(rng.random(size) < self.p, self.a, self.b).astype(np.int64)

    @property
    def mean(self):
        return self.p * self.a + (1 - self.p) * self.b


@dataclass(frozen=True)
class GeometricDist:
    """Failures before the first success, success probability ``p``; support {0,1,2,...}."""
    p: float

    def draw(self, rng, size):
        return (rng.geometric(self.p, size) - 1).astype(np.int64)

    @property
    def mean(self):
        return (1 - self.p) / self.p


@dataclass(frozen=True)
class UniformIntDist:
    """Uniform on ``{lo, ..., hi}``."""
    lo: int
    hi: int

    def draw(self, rng, size):
        return rng.integers(self.lo, self.hi + 1, size, dtype=np.int64)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)


DistributionSpec = Union[TwoPointDist, GeometricDist, UniformIntDist]


# --------------------------------------------------------------------------- #
# spec kinds

@dataclass(frozen=True)
class Constant:
    q: int


@dataclass(frozen=True)
class Periodic:
    pattern: tuple


@dataclass(frozen=True)
class Explicit:
    values: tuple
    tail: int


@dataclass(frozen=True)
class IidRandom:
    """``q_0`` is fixed; ``q_1, q_2, ...`` are i.i.d. draws from ``dist``."""
    dist: DistributionSpec
    seed: int
    q0: int = 1


@dataclass(frozen=True)
class Rwre:
    params: "RwreGapParams"
    seed: int


GapSequenceSpec = Union[Constant, Periodic, Explicit, IidRandom, Rwre]


def _check_spec(spec):
    if isinstance(spec, Constant):
        if spec.q < 0:
            raise GapSpecError(f"negative gap {spec.q}")
    elif isinstance(spec, Periodic):
        if not spec.pattern:
            raise GapSpecError("periodic pattern must be nonempty")
        if min(spec.pattern) < 0:
            raise GapSpecError("gaps must be nonnegative")
        if spec.pattern[0] < 1:
            raise GapSpecError("q_0 must be >= 1")
    elif isinstance(spec, Explicit):
        if (spec.values and min(spec.values) < 0) or spec.tail < 0:
            raise GapSpecError("gaps must be nonnegative")
        first = spec.values[0] if spec.values else spec.tail
        if first < 1:
            raise GapSpecError("q_0 must be >= 1")
    elif isinstance(spec, IidRandom):
        if spec.q0 < 1:
            raise GapSpecError("q_0 must be >= 1")
        d = spec.dist
        if isinstance(d, TwoPointDist) and (min(d.a, d.b) < 0 or not 0 <= d.p <= 1):
            raise GapSpecError("two-point gaps need a, b >= 0 and p in [0, 1]")
        if isinstance(d, GeometricDist) and not 0 < d.p <= 1:
            raise GapSpecError("geometric gaps need p in (0, 1]")
        if isinstance(d, UniformIntDist) and not 0 <= d.lo <= d.hi:
            raise GapSpecError("uniform gaps need 0 <= lo <= hi")
    elif isinstance(spec, Rwre):
        spec.params.validate()
    else:
        raise TypeError(f"unknown gap spec {spec!r}")


# --------------------------------------------------------------------------- #
# provider

class GapSequence:
    """Lazily materialized gap sequence with prefix sums ``Q_k`` and ``s_k``.

    Reads are thread-safe; the cache is extended under a lock by amortized
    doubling and the arrays are swapped in whole.
    """

    def __init__(self, spec: GapSequenceSpec):
        _check_spec(spec)
        self.spec = spec
        self.metadata: dict = {}
        self._lock = threading.Lock()
        self._q = np.zeros(0, dtype=np.int64)
        self._Q = np.zeros(1, dtype=np.int64)
        self._s = np.zeros(1, dtype=np.int64)
        self._source = None
        if isinstance(spec, Rwre):
            from .rwre import RwreGapSource
            self._source = RwreGapSource(spec.params, spec.seed)

    @classmethod
    def parse(cls, text: str) -> "GapSequence":
        return cls(parse_gap_spec(text))

    def __repr__(self):
        return f"GapSequence({format_gap_spec(self.spec)!r})"

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_lock"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    # -- generation ---------------------------------------------------------
    def _values(self, start, stop):
        spec = self.spec
        idx = np.arange(start, stop)
        if isinstance(spec, Constant):
            out = np.full(stop - start, spec.q, dtype=np.int64)
            if start == 0 and stop > 0:
                out[0] = max(spec.q, 1)
            return out
        if isinstance(spec, Periodic):
            pat = np.asarray(spec.pattern, dtype=np.int64)
            return pat[idx % len(pat)]
        if isinstance(spec, Explicit):
            vals = np.asarray(spec.values, dtype=np.int64)
            out = np.full(stop - start, spec.tail, dtype=np.int64)
            m = idx < len(vals)
            out[m] = vals[idx[m]]
            return out
        if isinstance(spec, IidRandom):
            return self._iid_values(start, stop)
        return self._source.values(start, stop)

    def _iid_values(self, start, stop):
        spec = self.spec
        pieces = []
        for b in range(start // _BLOCK, (stop - 1) // _BLOCK + 1):
            block = spec.dist.draw(stream(spec.seed, TAG_IID_GAPS, b), _BLOCK)
            if b == 0:
                block[0] = spec.q0
            lo = max(start, b * _BLOCK) - b * _BLOCK
            hi = min(stop, (b + 1) * _BLOCK) - b * _BLOCK
            pieces.append(block[lo:hi])
        return np.concatenate(pieces)

    def ensure(self, length: int) -> None:
        """Materialize ``q_0..q_{length-1}`` (and hence ``Q``/``s`` up to ``length``)."""
        if length <= len(self._q):
            return
        with self._lock:
            cur = len(self._q)
            if length <= cur:
                return
            new = max(length, 2 * cur, 64)
            q = np.concatenate([self._q, self._values(cur, new)])
            Q = np.concatenate([[0], np.cumsum(q)])
            s = np.cumsum(Q)
            self._Q, self._s = Q, s
            self._q = q

    # -- scalar access ------------------------------------------------------
    def gap(self, i: int) -> int:
        """``q_i``."""
        if i < 0:
            raise IndexError("gap index must be >= 0")
        self.ensure(i + 1)
        return int(self._q[i])

    def prefix_sum(self, k: int) -> int:
        """``Q_k = q_0 + ... + q_{k-1}``."""
        if k < 0:
            raise IndexError("k must be >= 0")
        self.ensure(k)
        return int(self._Q[k])

    def weighted_sum(self, k: int) -> int:
        """``s_k = Q_1 + ... + Q_k``, the weight of the ground state with ``k`` parts."""
        if k < 0:
            raise IndexError("k must be >= 0")
        self.ensure(k)
        return int(self._s[k])

    # -- array access -------------------------------------------------------
    def gaps(self, k: int) -> np.ndarray:
        """``q_0..q_{k-1}``."""
        self.ensure(k)
        return self._q[:k]

    def prefix_sums(self, k: int) -> np.ndarray:
        """``Q_0..Q_k``."""
        self.ensure(k)
        return self._Q[: k + 1]

    def weighted_sums(self, k: int) -> np.ndarray:
        """``s_0..s_k``."""
        self.ensure(k)
        return self._s[: k + 1]

    def max_length(self, n: int) -> int:
        """Largest ``k`` with ``s_k <= n``; no MDP partition of ``n`` has more parts."""
        k = 64
        while self.weighted_sum(k) <= n:
            k *= 2
        return int(np.searchsorted(self._s[: k + 1], n, side="right")) - 1


def estimate_regularity(provider: GapSequence, k_max: int) -> tuple[float, float]:
    """Empirical ``(q, beta)`` in ``Q_k = q k + O(k^beta)``.

    ``q_hat = Q_{k_max} / k_max``.  ``beta_hat`` is the log-log slope of the RMS
    centred increment ``Q_{j+m} - Q_j - q_hat m`` over disjoint blocks of length
    ``m``, for dyadic ``m`` from 4 up to ``k_max / 4``.  Scales with zero RMS are
    dropped; with fewer than two scales left the residuals are bounded and
    ``beta_hat = 0``.
    """
    if k_max < 100:
        raise ValueError("k_max must be >= 100")
    Q = provider.prefix_sums(k_max).astype(np.float64)
    q_hat = Q[k_max] / k_max
    scales, rms = [], []
    m = 4
    while m <= k_max // 4:
        starts = m * np.arange(k_max // m)
        inc = Q[starts + m] - Q[starts] - q_hat * m
        r = math.sqrt(float(np.mean(inc * inc)))
        if r > 1e-9 * m:
            scales.append(m)
            rms.append(r)
        m *= 2
    if len(scales) < 2:
        return q_hat, 0.0
    slope = np.polyfit(np.log(scales), np.log(rms), 1)[0]
    return q_hat, max(float(slope), 0.0)


# --------------------------------------------------------------------------- #
# text grammar

def _int(tok, pos, what="integer"):
    try:
        v = int(tok)
    except ValueError:
        raise GapSpecError(f"expected {what}", pos, tok) from None
    return v


def _float(tok, pos):
    try:
        return float(tok)
    except ValueError:
        raise GapSpecError("expected a number", pos, tok) from None


def _int_list(text, pos):
    out, off = [], 0
    for tok in text.split(","):
        out.append(_int(tok.strip(), pos + off))
        off += len(tok) + 1
    return out


def _keyvals(text, pos):
    """Parse ``k1=v1,k2=v2`` into ``{k: (value_text, position)}``."""
    out, off = {}, 0
    for tok in text.split(","):
        if "=" not in tok:
            raise GapSpecError("expected key=value", pos + off, tok)
        key, val = tok.split("=", 1)
        out[key.strip()] = (val.strip(), pos + off + len(key) + 1)
        off += len(tok) + 1
    return out


def _fields(text, pos):
    """Split ``a;b;key=v`` into the head and a dict of trailing ``key=value`` fields."""
    parts, off, res = text.split(";"), pos, []
    for p in parts:
        res.append((p, off))
        off += len(p) + 1
    head = res[0]
    fields = {}
    for p, o in res[1:]:
        if "=" not in p:
            raise GapSpecError("expected key=value", o, p)
        key, val = p.split("=", 1)
        fields[key.strip()] = (val.strip(), o + len(key) + 1)
    return head, fields


def parse_iid_dist(text: str, pos: int = 0) -> DistributionSpec:
    name, _, rest = text.partition(":")
    kv = _keyvals(rest, pos + len(name) + 1) if rest else {}

    def get(key, conv):
        if key not in kv:
            raise GapSpecError(f"missing parameter {key!r}", pos, text)
        val, p = kv[key]
        return conv(val, p)

    if name == "two-point":
        return TwoPointDist(get("a", _int), get("b", _int), get("p", _float))
    if name == "geometric":
        return GeometricDist(get("p", _float))
    if name == "uniform":
        return UniformIntDist(get("lo", _int), get("hi", _int))
    raise GapSpecError("unknown distribution", pos, name)


def parse_gap_spec(text: str) -> GapSequenceSpec:
    """Parse the textual gap grammar.

    ``const:<q>``, ``periodic:<v1,v2,...>``, ``list:<v1,...>;tail=<v>``,
    ``iid:<dist>;seed=<u64>[;q0=<v>]`` with ``<dist>`` one of
    ``two-point:a=<int>,b=<int>,p=<r>``, ``geometric:p=<r>``,
    ``uniform:lo=<int>,hi=<int>``, and
    ``rwre:<env>;a=<int|v1,v2,...>;b=<int>;seed=<u64>`` (see ``rwre.parse_env_dist``).
    """
    text = text.strip()
    kind, sep, body = text.partition(":")
    if not sep:
        raise GapSpecError("expected '<kind>:'", 0, text)
    pos = len(kind) + 1
    if kind == "const":
        spec = Constant(_int(body, pos))
    elif kind == "periodic":
        spec = Periodic(tuple(_int_list(body, pos)))
    elif kind == "list":
        (head, hpos), fields = _fields(body, pos)
        if "tail" not in fields:
            raise GapSpecError("list needs ';tail=<v>'", pos + len(body), "")
        values = tuple(_int_list(head, hpos)) if head.strip() else ()
        spec = Explicit(values, _int(*fields["tail"]))
    elif kind == "iid":
        (head, hpos), fields = _fields(body, pos)
        if "seed" not in fields:
            raise GapSpecError("iid needs ';seed=<u64>'", pos + len(body), "")
        q0 = _int(*fields["q0"]) if "q0" in fields else 1
        spec = IidRandom(parse_iid_dist(head, hpos), _int(*fields["seed"]), q0)
    elif kind == "rwre":
        from .rwre import EnvironmentSpec, RwreGapParams, parse_env_dist
        (head, hpos), fields = _fields(body, pos)
        for key in ("a", "b", "seed"):
            if key not in fields:
                raise GapSpecError(f"rwre needs ';{key}=...'", pos + len(body), "")
        seed = _int(*fields["seed"])
        a_vals = _int_list(*fields["a"])
        params = RwreGapParams(
            env=EnvironmentSpec(parse_env_dist(head, hpos), seed),
            a_values=tuple(a_vals),
            a_tail=a_vals[-1],
            b=_int(*fields["b"]),
        )
        spec = Rwre(params, seed)
    else:
        raise GapSpecError("unknown gap kind", 0, kind)
    _check_spec(spec)
    return spec


def format_iid_dist(d: DistributionSpec) -> str:
    if isinstance(d, TwoPointDist):
        return f"two-point:a={d.a},b={d.b},p={d.p!r}"
    if isinstance(d, GeometricDist):
        return f"geometric:p={d.p!r}"
    return f"uniform:lo={d.lo},hi={d.hi}"


def format_gap_spec(spec: GapSequenceSpec) -> str:
    """Canonical text form; ``parse_gap_spec(format_gap_spec(s)) == s``."""
    if isinstance(spec, Constant):
        return f"const:{spec.q}"
    if isinstance(spec, Periodic):
        return "periodic:" + ",".join(map(str, spec.pattern))
    if isinstance(spec, Explicit):
        return "list:" + ",".join(map(str, spec.values)) + f";tail={spec.tail}"
    if isinstance(spec, IidRandom):
        q0 = f";q0={spec.q0}" if spec.q0 != 1 else ""
        return f"iid:{format_iid_dist(spec.dist)};seed={spec.seed}{q0}"
    from .rwre import format_env_dist
    p = spec.params
    a = ",".join(map(str, p.a_values))
    return f"rwre:{format_env_dist(p.env.dist)};a={a};b={p.b};seed={spec.seed}"
