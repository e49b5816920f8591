"""Random small interference channels with planted link structure."""
import numpy as np

from ialign.channel import InterferenceChannel
from ialign.numerics import crandn


def rank_one(rng, n, m, left=None, right=None):
    u = crandn(rng, n) if left is None else left
    v = crandn(rng, m) if right is None else right
    return np.outer(u, v.conj())


def planted_channel(rng, K, kind, antennas=(2, 2)):
    """2-antenna channel whose cross links are drawn per `kind`.

    ``"full"``: all links full rank. ``"rank1"``: each cross link rank 1 with
    probability 0.6, some sharing a range or null direction. ``"zero"``: each
    cross link zero with probability 0.5. ``"mixed"``: zero / rank 1 / full /
    rank-1 direct links, some shared directions.
    """
    M = [antennas[1]] * K
    N = [antennas[0]] * K
    shared_left = crandn(rng, 2)
    shared_right = crandn(rng, 2)
    H = [[None] * K for _ in range(K)]
    for k in range(K):
        for j in range(K):
            h = crandn(rng, N[k], M[j])
            if k == j:
                if kind == "mixed" and rng.random() < 0.25:
                    h = _planted_rank_one(rng, N[k], M[j], shared_left, shared_right)
            elif kind == "rank1":
                if rng.random() < 0.6:
                    h = _planted_rank_one(rng, N[k], M[j], shared_left, shared_right)
            elif kind == "zero":
                if rng.random() < 0.5:
                    h = np.zeros((N[k], M[j]), dtype=complex)
            elif kind == "mixed":
                r = rng.random()
                if r < 0.3:
                    h = np.zeros((N[k], M[j]), dtype=complex)
                elif r < 0.7:
                    h = _planted_rank_one(rng, N[k], M[j], shared_left, shared_right)
            H[k][j] = h
    return InterferenceChannel(M, N, H, 1.0, [1.0] * K)


def _planted_rank_one(rng, n, m, shared_left, shared_right):
    r = rng.random()
    left = shared_left[:n] if r < 0.25 else None
    right = shared_right[:m] if 0.25 <= r < 0.5 else None
    return rank_one(rng, n, m, left, right)


def random_dof(rng, K, two_prob=0.1, zero_prob=0.1):
    out = []
    for _ in range(K):
        r = rng.random()
        out.append(2 if r < two_prob else 0 if r < two_prob + zero_prob else 1)
    return out


KINDS = ("full", "rank1", "zero", "mixed")


def oracle_suite(seed=7, count=200, max_users=4):
    """Yield ``(kind, channel, d)`` cycling through the planted kinds."""
    rng = np.random.default_rng(seed)
    for n in range(count):
        kind = KINDS[n % 4]
        K = int(rng.integers(1, max_users + 1))
        ch = planted_channel(rng, K, kind)
        yield kind, ch, random_dof(rng, K)
