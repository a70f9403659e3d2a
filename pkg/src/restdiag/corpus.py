"""Seeded instance generators shared by the tests, the benchmark and the CLI."""

import numpy as np
from scipy import stats

from .operators import (IDENTITY_TAIL, ZERO_TAIL, DiagonalizableOperator, IdentityDecomposition,
                        Projection, TruncOperator)
from .seq_ideal import SeqProfile, geometric


def haar_unitary(rng, n):
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if n == 1:
        return np.exp(2j * np.pi * rng.random((1, 1)))
    return stats.unitary_group.rvs(n, random_state=rng)


def small_unitary(rng, dim, size=0.3, ratio=0.7):
    """Unitary part of ``I + K`` with ``s(K)`` geometric and ``||K|| = size``."""
    s = size * ratio ** np.arange(dim)
    k = haar_unitary(rng, dim) @ np.diag(s) @ haar_unitary(rng, dim).conj().T
    u, _, vh = np.linalg.svd(np.eye(dim) + k)
    return u @ vh


def random_partition(rng, dim, parts):
    """Random split of ``range(dim)`` into ``parts`` nonempty index lists."""
    perm = rng.permutation(dim)
    cuts = np.sort(rng.choice(np.arange(1, dim), size=parts - 1, replace=False))
    return [sorted(c.tolist()) for c in np.split(perm, cuts)]


def round_trip_instance(rng, dim=64, parts=5, size=0.3, ratio=0.7):
    """``A = W D W*`` with a coordinate-diagonal ``D``.

    Returns ``(a, es, w)`` where ``es`` are the spectral projections of ``D``.
    The last part carries the identity tail on both sides, and the
    off-truncation defect continues the geometric decay of ``W - I``.
    """
    groups = random_partition(rng, dim, parts)
    w = small_unitary(rng, dim, size, ratio)
    lam = rng.permutation(np.linspace(-1, 1, parts) + 0.05 * rng.random(parts))
    defect = SeqProfile((), geometric(ratio, size))
    es, ps = [], []
    for i, g in enumerate(groups):
        tail = IDENTITY_TAIL if i == parts - 1 else ZERO_TAIL
        es.append(Projection.coordinate(dim, g, tail))
        ps.append(Projection(w[:, g], tail))
    a = DiagonalizableOperator(lam, IdentityDecomposition(ps, defect))
    return a, IdentityDecomposition(es), w


def random_projection(rng, dim, rank, tail=ZERO_TAIL):
    q = haar_unitary(rng, dim)
    return Projection(q[:, :rank], tail)
