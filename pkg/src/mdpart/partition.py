"""Integer partitions, MDP validity and the shifted Sylvester map.

Parts are stored largest first with no trailing zeros.  For a gap sequence
``q`` and ``k = K(lambda)``, the partition is MDP when
``lambda_i - lambda_{i+1} >= q_{k-i}`` for ``i = 1..k`` (with ``lambda_{k+1} = 0``).
The map ``rho_i = lambda_i + 1 - Q_{k-i+1}`` sends MDP partitions of ``n`` with
``k`` parts onto ordinary partitions of ``r = n + k - s_k`` into exactly ``k``
parts.
"""

from __future__ import annotations

import json
import math
from itertools import accumulate
from typing import Iterable, Sequence

import numpy as np

from .errors import NotMdpError
from .gapseq import GapSequence


class Partition:
    """Immutable non-increasing tuple of positive integers."""

    __slots__ = ("parts",)

    def __init__(self, parts: Iterable[int] = ()):
        p = [int(x) for x in parts]
        while p and p[-1] == 0:
            p.pop()
        for a, b in zip(p, p[1:]):
            if a < b:
                raise ValueError(f"parts must be non-increasing: {p}")
        if p and p[-1] < 0:
            raise ValueError("parts must be nonnegative")
        object.__setattr__(self, "parts", tuple(p))

    @classmethod
    def _trusted(cls, parts: tuple) -> "Partition":
        obj = object.__new__(cls)
        object.__setattr__(obj, "parts", parts)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("Partition is immutable")

    def __reduce__(self):
        return (Partition, (self.parts,))

    # value semantics
    def __eq__(self, other):
        return isinstance(other, Partition) and self.parts == other.parts

    def __hash__(self):
        return hash(self.parts)

    def __lt__(self, other):
        return self.parts < other.parts

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    def __repr__(self):
        return f"Partition({list(self.parts)})"

    def __str__(self):
        return self.to_text()

    # basic statistics
    @property
    def N(self) -> int:
        """Weight (sum of parts)."""
        return sum(self.parts)

    @property
    def K(self) -> int:
        """Length (number of positive parts)."""
        return len(self.parts)

    def differences(self) -> tuple:
        """``D_j = lambda_j - lambda_{j+1}`` for ``j = 1..K`` (``lambda_{K+1} = 0``)."""
        p = self.parts
        return tuple(p[j] - (p[j + 1] if j + 1 < len(p) else 0) for j in range(len(p)))

    @classmethod
    def from_differences(cls, d: Sequence[int]) -> "Partition":
        """Inverse of :meth:`differences`: ``lambda_i = sum_{j >= i} D_j``."""
        if len(d) and (min(d) < 0 or d[-1] < 1):
            raise ValueError("differences must be nonnegative with a positive last entry")
        return cls._trusted(tuple(accumulate(int(x) for x in reversed(d)))[::-1])

    def young_boundary(self, t: float) -> int:
        """``Y(t) = lambda_{floor(t)+1}``, zero past the last part."""
        if t < 0:
            raise ValueError("t must be >= 0")
        i = math.floor(t)
        return self.parts[i] if i < len(self.parts) else 0

    # text forms
    def to_text(self) -> str:
        return ",".join(map(str, self.parts))

    @classmethod
    def from_text(cls, text: str) -> "Partition":
        text = text.strip()
        return cls(int(t) for t in text.split(",")) if text else cls()

    def to_json(self) -> str:
        return json.dumps(list(self.parts))

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        return cls(json.loads(text))


def ground_state(g: GapSequence, k: int) -> Partition:
    """The smallest MDP partition with ``k`` parts: ``lambda_i = Q_{k-i+1}``."""
    Q = g.prefix_sums(k)
    return Partition._trusted(tuple(int(x) for x in Q[k:0:-1]))


def is_mdp(p: Partition, g: GapSequence) -> bool:
    """True iff every difference meets its gap; the empty partition counts."""
    k = p.K
    if k == 0:
        return True
    q = g.gaps(k)
    d = p.differences()
    # D_j >= q_{k-j}, j = 1..k
    return all(d[j] >= q[k - 1 - j] for j in range(k))


def sylvester_forward(p: Partition, g: GapSequence) -> Partition:
    """``rho_i = lambda_i + 1 - Q_{k-i+1}``; raises ``NotMdpError`` off the MDP set."""
    if p.K == 0 or not is_mdp(p, g):
        raise NotMdpError(f"{p.to_text() or '()'} is not a nonempty MDP partition for {g!r}")
    k = p.K
    Q = g.prefix_sums(k)
    return Partition._trusted(tuple(p.parts[i] + 1 - int(Q[k - i]) for i in range(k)))


def sylvester_inverse(rho: Partition, g: GapSequence) -> Partition:
    """``lambda_i = rho_i - 1 + Q_{k-i+1}``."""
    k = rho.K
    if k == 0:
        raise ValueError("rho must be nonempty")
    Q = g.prefix_sums(k)
    return Partition._trusted(tuple(rho.parts[i] - 1 + int(Q[k - i]) for i in range(k)))


def conjugate(p: Partition) -> Partition:
    """Transpose of the Young diagram: ``rho'_j = #{i : rho_i >= j}``."""
    if p.K == 0:
        return p
    parts = np.asarray(p.parts)
    cols = np.arange(1, parts[0] + 1)
    # parts are sorted descending, so the count is a searchsorted on the reversed array
    counts = len(parts) - np.searchsorted(parts[::-1], cols, side="left")
    return Partition._trusted(tuple(int(c) for c in counts))


def partitions_of(n: int, max_part: int | None = None):
    """All partitions of ``n`` in reverse lexicographic order (small ``n`` only)."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield Partition._trusted(())
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in partitions_of(n - first, first):
            yield Partition._trusted((first,) + rest.parts)


def mdp_partitions_of(g: GapSequence, n: int) -> list:
    """Every MDP partition of ``n``, by filtering all partitions of ``n``."""
    return [p for p in partitions_of(n) if is_mdp(p, g)]
