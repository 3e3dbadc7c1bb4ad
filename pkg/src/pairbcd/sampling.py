"""Non-uniform distribution over block pairs and its reproducible sampler.

Pair ``(i, j)`` with ``i < j`` (0-based) is drawn with probability

    p_ij = (1/L_i + 1/L_j) / ((N - 1) * sum_t 1/L_t)

via inverse-CDF lookup on the cumulative table.  Pairs are stored in
lexicographic order so a seed always maps to the same pair sequence.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .problem import InvalidInputError

MASK64 = (1 << 64) - 1
_BUFFER = 4096
_TWO_M53 = 2.0 ** -53


def splitmix64(x: int) -> int:
    """One output of the SplitMix64 generator seeded at ``x``."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replica_seed(base_seed: int, replica: int) -> int:
    return (int(base_seed) ^ splitmix64(int(replica))) & MASK64


class RngState:
    """Seeded stream of uniform doubles built on numpy's PCG64 bit generator.

    Each double takes the top 53 bits of one 64-bit PCG64 word, so the
    stream depends only on the seed and the PCG64 algorithm, not on numpy's
    ``Generator`` distribution code.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")
        self.seed = seed
        self._bitgen = np.random.PCG64(seed)
        self._buf = []
        self._pos = 0
        self.draws = 0

    @classmethod
    def for_replica(cls, base_seed, replica):
        return cls(replica_seed(base_seed, replica))

    def next_u64(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._bitgen.random_raw(_BUFFER).tolist()
            self._pos = 0
        word = self._buf[self._pos]
        self._pos += 1
        self.draws += 1
        return word

    def uniform(self) -> float:
        """Uniform double on ``[0, 1)``."""
        return (self.next_u64() >> 11) * _TWO_M53

    def uniforms(self, count: int) -> np.ndarray:
        """The next ``count`` values of ``uniform()`` as an array."""
        take = min(count, len(self._buf) - self._pos)
        head = np.array(self._buf[self._pos:self._pos + take], dtype=np.uint64)
        self._pos += take
        words = head
        if count > take:
            words = np.concatenate([head, self._bitgen.random_raw(count - take)])
        self.draws += count
        return (words >> np.uint64(11)).astype(np.float64) * _TWO_M53


@dataclass(frozen=True, eq=False)
class PairDistribution:
    N: int
    pairs: tuple
    probs: np.ndarray
    cumulative: tuple

    def __len__(self):
        return len(self.pairs)

    def index_of(self, u: float) -> int:
        """Index of the pair whose half-open CDF interval contains ``u``."""
        k = bisect_right(self.cumulative, u)
        return min(k, len(self.pairs) - 1)

    def rows(self):
        """``(i, j, p_ij)`` triples with 1-based block indices."""
        return [(i + 1, j + 1, float(p)) for (i, j), p in zip(self.pairs, self.probs)]


def build_distribution(L, N=None) -> PairDistribution:
    """Pair distribution derived from the Lipschitz constants ``L``."""
    L = np.asarray(L, dtype=float).reshape(-1)
    if N is None:
        N = L.size
    if N < 2:
        raise InvalidInputError("need at least two blocks to form a pair")
    if L.size != N:
        raise InvalidInputError(f"got {L.size} Lipschitz constants for N={N}")
    if not np.all(np.isfinite(L)) or np.any(L <= 0):
        raise InvalidInputError("Lipschitz constants must be positive and finite")
    inv = 1.0 / L
    I, J = np.triu_indices(N, k=1)
    probs = (inv[I] + inv[J]) / ((N - 1) * inv.sum())
    probs.setflags(write=False)
    cumulative = tuple(np.cumsum(probs).tolist())
    pairs = tuple(zip(I.tolist(), J.tolist()))
    return PairDistribution(N, pairs, probs, cumulative)


def sample_pair(dist: PairDistribution, rng: RngState):
    """Draw ``(i, j)``, ``i < j``; consumes exactly one word from ``rng``."""
    return dist.pairs[dist.index_of(rng.uniform())]
