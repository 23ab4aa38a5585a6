"""Gap sequences driven by a random walk in a random environment.

The environment is an i.i.d. family ``p_j`` (``j`` in Z) of right-step
probabilities.  Conditional on it, ``X`` is a nearest-neighbour walk from 0 and
the gaps are ``q_i = a_i + b (X_{i+1} - X_i)``, so ``Q_k = A_k + b X_k``.

Regime labels use ``rho = (1 - p) / p``, ``eta = E log rho`` and Kesten's
exponent ``kappa`` (the positive root of ``E rho^kappa = 1``).  The lattice
(non-arithmetic) hypothesis behind ``kappa`` is not checked; ``kappa`` is only
used to label regimes and pick the error exponent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import GapSpecError, RegimeError
from .rng import TAG_ENV, TAG_WALK, stream

_SITE_BLOCK = 4096
_STEP_CHUNK = 1 << 16
# midpoint cells used to discretize continuous environment laws
_UNIFORM_CELLS = 4096
# |E log rho| below this counts as zero (rounding in the moment sums)
_ETA_TOL = 1e-12


# --------------------------------------------------------------------------- #
# environment laws

@dataclass(frozen=True)
class TwoPoint:
    """``p = p1`` with probability ``w``, else ``p = p2`` (default ``1 - p1``)."""
    p1: float
    w: float
    p2: Optional[float] = None

    @property
    def other(self):
        return 1.0 - self.p1 if self.p2 is None else self.p2

    def support(self):
        if self.w >= 1.0:
            return np.array([self.p1]), np.array([1.0])
        return np.array([self.p1, self.other]), np.array([self.w, 1.0 - self.w])

    def draw(self, rng, size):
        u = rng.random(size)
        return np.where(u < self.w, self.p1, self.other)


@dataclass(frozen=True)
class UniformP:
    """``p`` uniform on ``(lo, hi)``; moments use a midpoint discretization."""
    lo: float
    hi: float

    def support(self):
        h = (self.hi - self.lo) / _UNIFORM_CELLS
        return self.lo + h * (np.arange(_UNIFORM_CELLS) + 0.5), np.full(_UNIFORM_CELLS, 1.0 / _UNIFORM_CELLS)

    def draw(self, rng, size):
        return self.lo + (self.hi - self.lo) * rng.random(size)


@dataclass(frozen=True)
class TableP:
    """Discrete law: ``p = values[i]`` with probability ``weights[i]``."""
    values: tuple
    weights: tuple

    def support(self):
        w = np.asarray(self.weights, dtype=float)
        return np.asarray(self.values, dtype=float), w / w.sum()

    def draw(self, rng, size):
        vals, w = self.support()
        return vals[np.searchsorted(np.cumsum(w), rng.random(size), side="right").clip(0, len(vals) - 1)]


EnvDist = Union[TwoPoint, UniformP, TableP]


def _check_dist(dist):
    vals, w = dist.support()
    if np.any(vals <= 0) or np.any(vals > 1):
        raise GapSpecError("site probabilities must lie in (0, 1]")
    if np.any(w < 0):
        raise GapSpecError("weights must be nonnegative")
    if isinstance(dist, UniformP) and not 0 < dist.lo < dist.hi < 1:
        raise GapSpecError("uniform environment needs 0 < lo < hi < 1")


def _rho(dist):
    p, w = dist.support()
    keep = w > 0
    p, w = p[keep], w[keep]
    return (1.0 - p) / p, w


def mean_rho(dist, power: float = 1.0) -> float:
    """``E rho^power``."""
    rho, w = _rho(dist)
    with np.errstate(divide="ignore"):
        return float(np.sum(w * rho**power))


def mean_log_rho(dist) -> float:
    """``eta = E log rho`` (``-inf`` if ``p = 1`` has positive mass)."""
    rho, w = _rho(dist)
    with np.errstate(divide="ignore"):
        return float(np.sum(w * np.log(rho)))


# --------------------------------------------------------------------------- #
# environment and walk

@dataclass(frozen=True)
class EnvironmentSpec:
    dist: EnvDist
    seed: int


def _zigzag(b):
    return 2 * b if b >= 0 else -2 * b - 1


class Environment:
    """Frozen environment; ``p_j`` for block ``j // 4096`` comes from its own stream."""

    def __init__(self, spec: EnvironmentSpec):
        _check_dist(spec.dist)
        self.spec = spec
        self._blocks: dict[int, np.ndarray] = {}
        vals, w = spec.dist.support()
        self.deterministic = int(np.count_nonzero(w > 0)) == 1
        self._const = float(vals[w > 0][0]) if self.deterministic else None

    def _block(self, b):
        blk = self._blocks.get(b)
        if blk is None:
            blk = self.spec.dist.draw(stream(self.spec.seed, TAG_ENV, _zigzag(b)), _SITE_BLOCK)
            self._blocks[b] = blk
        return blk

    def window(self, lo: int, hi: int) -> np.ndarray:
        """``p_lo .. p_{hi-1}``."""
        if self.deterministic:
            return np.full(hi - lo, self._const)
        b0, b1 = lo // _SITE_BLOCK, (hi - 1) // _SITE_BLOCK
        arr = np.concatenate([self._block(b) for b in range(b0, b1 + 1)])
        off = lo - b0 * _SITE_BLOCK
        return arr[off: off + hi - lo]

    def __getitem__(self, j: int) -> float:
        return float(self.window(j, j + 1)[0])


def _walk(env: Environment, x0: int, uniforms: np.ndarray) -> np.ndarray:
    """Positions after each step, starting from ``x0``; step ``t`` goes right iff ``u_t < p_x``."""
    steps = len(uniforms)
    if env.deterministic:
        inc = np.where(uniforms < env._const, 1, -1)
        return x0 + np.cumsum(inc)
    out = np.empty(steps, dtype=np.int64)
    half = 1024
    lo, hi = x0 - half, x0 + half
    p = env.window(lo, hi).tolist()
    u = uniforms.tolist()
    x = x0
    for t in range(steps):
        if x < lo or x >= hi:
            half *= 2
            lo, hi = x - half, x + half
            p = env.window(lo, hi).tolist()
        x = x + 1 if u[t] < p[x - lo] else x - 1
        out[t] = x
    return out


def run_walk(env: Union[Environment, EnvironmentSpec], steps: int, rng: np.random.Generator) -> np.ndarray:
    """Trajectory ``X_0 = 0, X_1, ..., X_steps`` in the frozen environment."""
    if not isinstance(env, Environment):
        env = Environment(env)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    traj = np.zeros(steps + 1, dtype=np.int64)
    if steps:
        traj[1:] = _walk(env, 0, rng.random(steps))
    return traj


# --------------------------------------------------------------------------- #
# drift, kappa, regimes

def drift(dist) -> float:
    """Asymptotic speed ``v = lim X_k / k`` (Solomon's formula)."""
    m_plus = mean_rho(dist, 1.0)
    m_minus = mean_rho(dist, -1.0)
    if m_plus < 1:
        return (1 - m_plus) / (1 + m_plus)
    if m_minus < 1:
        return -(1 - m_minus) / (1 + m_minus)
    return 0.0


def _log_moment(log_rho, w, kappa):
    a = kappa * log_rho
    m = a.max()
    return m + math.log(float(np.sum(w * np.exp(a - m))))


def kappa(dist, tol: float = _ETA_TOL) -> Optional[float]:
    """Positive root of ``E rho^kappa = 1``; ``None`` when ``rho <= 1`` a.s.

    Raises ``RegimeError`` unless ``eta = E log rho < -tol`` (``|eta| <= tol`` is
    treated as the recurrent case).
    """
    eta = mean_log_rho(dist)
    if not eta < -tol:
        raise RegimeError(f"kappa needs E log rho < 0, got {eta:g}")
    rho, w = _rho(dist)
    pos = rho > 0
    if not np.any(rho > 1):
        return None
    log_rho, w = np.log(rho[pos]), w[pos]
    # phi(k) = log E rho^k: convex, phi(0) = 0, phi'(0) = eta < 0, phi -> +inf
    hi = 1.0
    while _log_moment(log_rho, w, hi) <= 0:
        hi *= 2
    lo = hi / 2
    while lo > 1e-300 and _log_moment(log_rho, w, lo) > 0:
        lo /= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _log_moment(log_rho, w, mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi)


class Regime(enum.Enum):
    TRANSIENT_BALLISTIC = "transient-ballistic"   # kappa > 1 (or infinite)
    TRANSIENT_SUB = "transient-sub"               # kappa <= 1, zero speed
    RECURRENT = "recurrent"                       # eta = 0
    NEGATIVE_DRIFT = "negative-drift"             # eta > 0


def classify_regime(dist, tol: float = _ETA_TOL) -> Regime:
    eta = mean_log_rho(dist)
    if abs(eta) <= tol:
        return Regime.RECURRENT
    if eta > 0:
        return Regime.NEGATIVE_DRIFT
    k = kappa(dist, tol)
    if k is None or k > 1 + 1e-9:
        return Regime.TRANSIENT_BALLISTIC
    return Regime.TRANSIENT_SUB


def _mirror(dist):
    p, w = dist.support()
    return TableP(tuple(1.0 - p), tuple(w))


def error_bound(dist) -> str:
    """Order of ``Q_k - q k`` for a constant leading sequence, as a label."""
    regime = classify_regime(dist)
    if regime is Regime.RECURRENT:
        return "log^2 k"
    d = dist if regime is not Regime.NEGATIVE_DRIFT else _mirror(dist)
    if mean_log_rho(d) == -math.inf:
        return "k^0.5"
    k = kappa(d)
    if k is None or k > 1 + 1e-9:
        return f"k^{max(0.5, 1.0 / k) if k else 0.5:.6g}"
    if abs(k - 1) <= 1e-9:
        return "k/log k"
    return f"k^{k:.6g}"


# --------------------------------------------------------------------------- #
# gap sequences

@dataclass(frozen=True)
class RwreGapParams:
    """Leading sequence ``a`` (explicit values, then ``a_tail`` forever) and step weight ``b``."""
    env: EnvironmentSpec
    a_values: tuple
    a_tail: int
    b: int

    def a(self, start, stop):
        vals = np.asarray(self.a_values, dtype=np.int64)
        idx = np.arange(start, stop)
        out = np.full(stop - start, self.a_tail, dtype=np.int64)
        m = idx < len(vals)
        out[m] = vals[idx[m]]
        return out

    @property
    def a_limit(self) -> int:
        return self.a_tail

    def validate(self):
        _check_dist(self.env.dist)
        if self.b <= 0:
            raise GapSpecError("b must be a positive integer")
        a0 = self.a_values[0] if self.a_values else self.a_tail
        rest = list(self.a_values[1:]) + [self.a_tail]
        if a0 < self.b + 1 or min(rest) < self.b:
            raise GapSpecError("need a_0 >= b + 1 and a_i >= b")

    def predicted_gap(self) -> float:
        return self.a_limit + self.b * drift(self.env.dist)


class RwreGapSource:
    """Extends the walk on demand; step uniforms come in fixed chunks keyed by chunk index."""

    def __init__(self, params: RwreGapParams, seed: int):
        self.params = params
        self.seed = seed
        self.env = Environment(params.env)
        self._x = np.zeros(1, dtype=np.int64)

    def _extend(self, steps):
        have = len(self._x) - 1
        pieces = [self._x]
        x = int(self._x[-1])
        while have < steps:
            c = have // _STEP_CHUNK
            u = stream(self.seed, TAG_WALK, c).random(_STEP_CHUNK)[have - c * _STEP_CHUNK:]
            traj = _walk(self.env, x, u)
            pieces.append(traj)
            have += len(u)
            x = int(traj[-1])
        self._x = np.concatenate(pieces)

    def positions(self, stop):
        if len(self._x) <= stop:
            self._extend(stop)
        return self._x[: stop + 1]

    def values(self, start, stop):
        x = self.positions(stop)
        return self.params.a(start, stop) + self.params.b * np.diff(x[start: stop + 1])


def _rwre_metadata(params, walk_end):
    dist = params.env.dist
    try:
        kap = kappa(dist)
    except RegimeError:
        kap = None
    bound = error_bound(dist)
    return {
        "v": drift(dist),
        "kappa": kap,
        "regime": classify_regime(dist).value,
        "error_bound": bound,
        "q_predicted": params.predicted_gap(),
        "exploratory": bound == "k/log k",
        "walk_end": int(walk_end),
    }


def _explicit(params, q, walk_end):
    from .gapseq import Explicit, GapSequence

    assert q.min() >= 0 and q[0] >= 1
    g = GapSequence(Explicit(tuple(int(v) for v in q), params.a_tail))
    g.metadata = _rwre_metadata(params, walk_end)
    return g


def make_rwre_gaps(params: RwreGapParams, length: int, rng: np.random.Generator):
    """Materialize ``q_0..q_{length-1}`` from one walk as an explicit gap sequence.

    Beyond ``length`` the walk is treated as frozen, i.e. ``q_i = a_i``.  The
    returned provider's ``metadata`` holds the drift, ``kappa``, regime label,
    error-bound label and the predicted limiting gap ``a + b v``.
    """
    params.validate()
    if length < 1:
        raise ValueError("length must be >= 1")
    x = run_walk(Environment(params.env), length, rng)
    return _explicit(params, params.a(0, length) + params.b * np.diff(x), x[-1])


def materialize_rwre_gaps(params: RwreGapParams, seed: int, length: int):
    """Like :func:`make_rwre_gaps`, but with the walk streams of the ``rwre:`` text form.

    The first ``length`` gaps agree with ``GapSequence.parse`` of the same text.
    """
    params.validate()
    if length < 1:
        raise ValueError("length must be >= 1")
    src = RwreGapSource(params, seed)
    return _explicit(params, src.values(0, length), src.positions(length)[-1])


# --------------------------------------------------------------------------- #
# text forms

def parse_env_dist(text: str, pos: int = 0) -> EnvDist:
    """``two-point:p1=<r>,w=<r>[,p2=<r>]``, ``uniform:lo=<r>,hi=<r>``, ``table:p=<r>|<r>..,w=<r>|<r>..``."""
    from .gapseq import _float, _keyvals

    name, _, rest = text.partition(":")
    kv = _keyvals(rest, pos + len(name) + 1) if rest else {}

    def get(key, default=None):
        if key not in kv:
            if default is not None:
                return default
            raise GapSpecError(f"missing parameter {key!r}", pos, text)
        val, p = kv[key]
        return val, p

    if name == "two-point":
        p2 = _float(*kv["p2"]) if "p2" in kv else None
        w = _float(*kv["w"]) if "w" in kv else 1.0
        dist = TwoPoint(_float(*get("p1")), w, p2)
    elif name == "uniform":
        dist = UniformP(_float(*get("lo")), _float(*get("hi")))
    elif name == "table":
        (ps, pp), (ws, wp) = get("p"), get("w")
        vals = tuple(_float(t, pp) for t in ps.split("|"))
        wts = tuple(_float(t, wp) for t in ws.split("|"))
        if len(vals) != len(wts):
            raise GapSpecError("table needs as many weights as values", wp, ws)
        dist = TableP(vals, wts)
    else:
        raise GapSpecError("unknown environment law", pos, name)
    if isinstance(dist, TwoPoint) and not 0 <= dist.w <= 1:
        raise GapSpecError("w must lie in [0, 1]", pos, text)
    _check_dist(dist)
    return dist


def format_env_dist(dist: EnvDist) -> str:
    if isinstance(dist, TwoPoint):
        p2 = f",p2={dist.p2!r}" if dist.p2 is not None else ""
        return f"two-point:p1={dist.p1!r},w={dist.w!r}{p2}"
    if isinstance(dist, UniformP):
        return f"uniform:lo={dist.lo!r},hi={dist.hi!r}"
    return "table:p=" + "|".join(map(repr, dist.values)) + ",w=" + "|".join(map(repr, dist.weights))


def parse_a_sequence(text: str) -> tuple[tuple, int]:
    """``const:<a>`` or ``list:<v1,...>;tail=<v>`` into ``(values, tail)``."""
    from .gapseq import Constant, Explicit, parse_gap_spec

    spec = parse_gap_spec(text) if not text.startswith("const:") else Constant(int(text[6:]))
    if isinstance(spec, Constant):
        return (spec.q,), spec.q
    if isinstance(spec, Explicit):
        return spec.values, spec.tail
    raise GapSpecError("leading sequence must be const:<a> or list:...;tail=<v>", 0, text)
