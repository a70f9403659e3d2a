"""Finite permutations that reproduce a given permutation's action on a partition.

An infinite permutation ``tau`` of the positive integers is seen through a
window ``[1..N]``: ``tau`` is given on the window as an injective one-line
array whose images may exceed ``N``. Every index beyond ``N`` belongs to the
partition's tail block and orbits leave or enter the window only through
the tail block. When the alignment needs more of an open orbit than the
window shows, it is continued with fresh indices inside the tail block,
which is consistent with every completion of the window.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import SpectrumMismatch, SupportExceedsDim, UnboundedMismatch
from .operators import IDENTITY_TAIL, DiagonalizableOperator, TruncOperator

DEFAULT_MISMATCH_BOUND = 4096


class IndexPermutation:
    """One-line description ``images[k-1] = tau(k)`` for ``k = 1..len(images)``.

    Indices beyond the array are fixed by ``__call__``. When the images are
    not a permutation of ``1..len`` the object describes a window of an
    infinite permutation (see the module docstring).
    """

    __slots__ = ("images",)

    def __init__(self, images: Sequence[int]):
        imgs = tuple(int(x) for x in images)
        if any(x < 1 for x in imgs):
            raise ValueError("images must be positive integers")
        if len(set(imgs)) != len(imgs):
            raise ValueError("a permutation must be injective")
        self.images = imgs

    @classmethod
    def identity(cls, n: int) -> "IndexPermutation":
        return cls(range(1, n + 1))

    @classmethod
    def from_mapping(cls, mapping: Dict[int, int]) -> "IndexPermutation":
        """Finite-support permutation from ``{k: sigma(k)}``; unmapped points are fixed."""
        top = max([0] + list(mapping) + list(mapping.values()))
        return cls(mapping.get(k, k) for k in range(1, top + 1))

    @classmethod
    def from_cycles(cls, cycles, n: int = 0) -> "IndexPermutation":
        m = {}
        for c in cycles:
            for a, b in zip(c, list(c[1:]) + [c[0]]):
                m[a] = b
        p = cls.from_mapping(m)
        return p.padded(n) if n > len(p) else p

    def __len__(self):
        return len(self.images)

    def __call__(self, k: int) -> int:
        return self.images[k - 1] if 1 <= k <= len(self.images) else k

    def __eq__(self, other):
        if not isinstance(other, IndexPermutation):
            return NotImplemented
        n = max(len(self), len(other))
        return all(self(k) == other(k) for k in range(1, n + 1))

    def __hash__(self):
        return hash(self.trimmed().images)

    def __repr__(self):
        return f"IndexPermutation({list(self.images)})"

    @property
    def is_bijection(self) -> bool:
        return set(self.images) == set(range(1, len(self.images) + 1))

    def padded(self, n: int) -> "IndexPermutation":
        return IndexPermutation(self.images + tuple(range(len(self) + 1, n + 1)))

    def trimmed(self) -> "IndexPermutation":
        imgs = list(self.images)
        while imgs and imgs[-1] == len(imgs):
            imgs.pop()
        return IndexPermutation(imgs)

    @property
    def support(self) -> List[int]:
        return [k for k, v in enumerate(self.images, 1) if v != k]

    def inverse(self) -> "IndexPermutation":
        if not self.is_bijection:
            raise ValueError("only permutations of 1..N can be inverted")
        inv = [0] * len(self)
        for k, v in enumerate(self.images, 1):
            inv[v - 1] = k
        return IndexPermutation(inv)

    def compose(self, other: "IndexPermutation") -> "IndexPermutation":
        """``self o other``."""
        n = max(len(self), len(other))
        return IndexPermutation(self(other(k)) for k in range(1, n + 1))

    def to_list(self) -> List[int]:
        return list(self.images)


@dataclass(frozen=True)
class PartitionOfIndices:
    blocks: tuple
    tail_block: Optional[int] = None

    def __init__(self, blocks, tail_block=None):
        bl = tuple(tuple(sorted(int(i) for i in b)) for b in blocks)
        flat = [i for b in bl for i in b]
        n = len(flat)
        if sorted(flat) != list(range(1, n + 1)):
            raise ValueError("blocks must partition 1..N")
        if tail_block is not None and not 0 <= tail_block < len(bl):
            raise ValueError("tail_block out of range")
        object.__setattr__(self, "blocks", bl)
        object.__setattr__(self, "tail_block", tail_block)
        lookup = np.empty(n + 1, dtype=int)
        for j, b in enumerate(bl):
            lookup[list(b)] = j
        object.__setattr__(self, "_lookup", lookup)

    @property
    def n(self) -> int:
        return len(self._lookup) - 1

    def block_of(self, k: int) -> int:
        if k <= self.n:
            return int(self._lookup[k])
        if self.tail_block is None:
            raise ValueError(f"index {k} lies beyond the window and there is no tail block")
        return self.tail_block

    def to_dict(self):
        return {"blocks": [list(b) for b in self.blocks], "tail_block": self.tail_block}

    @classmethod
    def from_dict(cls, d):
        return cls(d["blocks"], d.get("tail_block"))


def mismatch_set(tau: IndexPermutation, part: PartitionOfIndices) -> set:
    """Indices of the window whose image leaves their block."""
    if len(tau) != part.n:
        raise ValueError("permutation window and partition sizes differ")
    return {i for i in range(1, part.n + 1) if part.block_of(tau(i)) != part.block_of(i)}


@dataclass
class AlignmentTrace:
    """Per-step record: case label and |M| before and after the step."""
    steps: List[tuple] = field(default_factory=list)
    orbit_lengths: List[tuple] = field(default_factory=list)


class _Window:
    """Mutable partial injective map with on-demand extension in the tail block."""

    def __init__(self, tau: IndexPermutation, part: PartitionOfIndices):
        self.part = part
        self.f = {k: tau(k) for k in range(1, part.n + 1)}
        self.inv = {v: k for k, v in self.f.items()}
        self.next_label = max([part.n] + list(self.f.values())) + 1
        if part.tail_block is None and not tau.is_bijection:
            raise UnboundedMismatch("open orbits need a tail block", condition="tail_block")

    def fresh(self) -> int:
        x = self.next_label
        self.next_label += 1
        return x

    def block(self, k):
        return self.part.block_of(k)

    def mismatches(self):
        return sorted(a for a, b in self.f.items() if self.block(a) != self.block(b))

    def forward(self, x):
        if x not in self.f:
            y = self.fresh()
            self.f[x], self.inv[y] = y, x
        return self.f[x]

    def backward(self, x):
        if x not in self.inv:
            v = self.fresh()
            self.f[v], self.inv[x] = x, v
        return self.inv[x]

    def left_compose(self, perm: Dict[int, int]):
        """Replace ``f`` by ``perm o f`` for a finite permutation ``perm``."""
        self.f = {a: perm.get(b, b) for a, b in self.f.items()}
        self.inv = {v: k for k, v in self.f.items()}


def _cycle_map(cycle):
    return {a: b for a, b in zip(cycle, cycle[1:] + cycle[:1])}


def _inverse_map(m):
    return {v: k for k, v in m.items()}


def _compose_maps(a, b):
    """``a o b`` for finite-support maps."""
    keys = set(a) | set(b)
    out = {k: a.get(b.get(k, k), b.get(k, k)) for k in keys}
    return {k: v for k, v in out.items() if k != v}


def align_finite(tau: IndexPermutation, part: PartitionOfIndices,
                 bound: int = DEFAULT_MISMATCH_BOUND, trace: AlignmentTrace = None) -> IndexPermutation:
    """Finite-support ``sigma`` with ``sigma(I_n) = tau(I_n)`` for every block.

    Each round takes the smallest mismatch ``i``. A closed orbit of ``i`` is
    removed by its cycle ``mu`` (replace ``tau`` by ``mu^-1 o tau``). An open
    orbit is first closed by ``rho`` (see :func:`_close_open_orbit`) and the
    cycle of ``i`` under ``rho o tau`` is then removed the same way. Every
    round lowers ``|M|`` by at least two. The corrections accumulate in ``g``
    with ``g o tau`` block-preserving at the end, and ``sigma = g^-1``.
    """
    if len(tau) != part.n:
        raise ValueError("permutation window and partition sizes differ")
    w = _Window(tau, part)
    m = w.mismatches()
    if len(m) > bound:
        raise UnboundedMismatch(f"|M| = {len(m)} exceeds the bound {bound}")
    g: Dict[int, int] = {}
    rounds = 0
    while m:
        rounds += 1
        if rounds > 4 * bound + 8:
            raise UnboundedMismatch("alignment did not terminate")
        i = m[0]
        orbit = [i]
        x = w.f[i]
        while x != i and x in w.f:
            orbit.append(x)
            x = w.f[x]
        if x == i:
            mu = _cycle_map(orbit)
            w.left_compose(_inverse_map(mu))
            g = _compose_maps(_inverse_map(mu), g)
            case = 1
            before = len(m)
        else:
            rho, length, expect = _close_open_orbit(w, i)
            before = len(w.mismatches())
            w.left_compose(rho)
            cyc = [i]
            y = w.f[i]
            while y != i:
                cyc.append(y)
                y = w.f[y]
                if len(cyc) > len(w.f) + 1:
                    raise AssertionError("orbit under rho o tau does not close")
            if len(cyc) != expect:
                raise AssertionError(f"orbit length {len(cyc)} != predicted {expect}")
            mu = _cycle_map(cyc)
            w.left_compose(_inverse_map(mu))
            g = _compose_maps(_inverse_map(mu), _compose_maps(rho, g))
            case = 2
            if trace is not None:
                trace.orbit_lengths.append((len(cyc), length))
        m = w.mismatches()
        if trace is not None:
            trace.steps.append((case, before, len(m)))
    return IndexPermutation.from_mapping(_inverse_map(g))


def _close_open_orbit(w: _Window, i: int):
    """Join the two tail-block ends of the open orbit of ``i``.

    With ``k0 = 2 alpha + 1`` past the point where the forward orbit settles
    in the tail block and ``r0 = -2 beta`` before the point where the
    backward orbit does, ``rho`` swaps ``tau^k0(i)`` and ``tau^r0(i)``, so
    ``rho o tau`` sends ``tau^(k0-1)(i)`` to ``tau^r0(i)`` and closes the orbit
    of ``i`` into a cycle of length ``k0 - r0``. Only tail-to-tail images
    change, so no mismatch is added.

    Returns ``(rho, alpha + beta, predicted cycle length)``.
    """
    tail = w.part.tail_block
    # fwd[k] = tau^k(i), followed until the first index outside the known map
    fwd = [i]
    while fwd[-1] in w.f:
        fwd.append(w.f[fwd[-1]])
    k_prime = len(fwd) - 1
    while k_prime > 1 and w.block(fwd[k_prime - 1]) == tail:
        k_prime -= 1
    k0 = k_prime if k_prime % 2 == 1 else k_prime + 1
    while len(fwd) <= k0:
        fwd.append(w.forward(fwd[-1]))
    # back[r] = tau^-r(i); the entry point has virtual predecessors in the tail block
    back = [i]
    while back[-1] in w.inv:
        back.append(w.inv[back[-1]])
    r_prime = -len(back)
    while r_prime < 0 and w.block(back[-(r_prime + 1)]) == tail:
        r_prime += 1
    r0 = r_prime if r_prime % 2 == 0 else r_prime - 1
    while len(back) <= -r0 + 1:
        back.append(w.backward(back[-1]))
    alpha, beta = (k0 - 1) // 2, -r0 // 2
    a, b = fwd[k0], back[-r0]
    return {a: b, b: a}, alpha + beta, k0 - r0


def verify_alignment(sigma: IndexPermutation, tau: IndexPermutation,
                     part: PartitionOfIndices) -> bool:
    """Exact check of ``sigma(I_n) = tau(I_n)`` on every block inside the window.

    For a window of an infinite permutation the tail block is infinite; it
    is checked through the pointwise form ``sigma^-1 tau`` block-preserving,
    including the virtual predecessors of entry points.
    """
    n = part.n
    top = max([n, len(sigma)] + list(tau.images))
    s = sigma.padded(top)
    if not s.is_bijection:
        return False
    sinv = s.inverse()
    for b, idx in enumerate(part.blocks):
        if b == part.tail_block:
            continue
        if {s(k) for k in idx} != {tau(k) for k in idx}:
            return False
    for a in range(1, n + 1):
        if part.block_of(sinv(tau(a))) != part.block_of(a):
            return False
    entries = set(range(1, n + 1)) - set(tau.images)
    return all(part.block_of(sinv(e)) == part.tail_block for e in entries)


def permutation_unitary(sigma: IndexPermutation, dim: int) -> TruncOperator:
    """``U_sigma e_k = e_sigma(k)`` on the block, identity tail."""
    sup = sigma.support
    if sup and max(max(sup), max(sigma(k) for k in sup)) > dim:
        raise SupportExceedsDim(f"support reaches {max(sup)} > dim {dim}")
    u = np.zeros((dim, dim))
    for k in range(1, dim + 1):
        u[sigma(k) - 1, k - 1] = 1
    return TruncOperator(u, IDENTITY_TAIL)


def _diag_data(b):
    op = b.op() if isinstance(b, DiagonalizableOperator) else b
    return np.diag(op.block).copy(), op.tail


def _key(v):
    return (round(v.real, 12) + 0.0, round(v.imag, 12) + 0.0)


def orbit_diag_equal(b, b_prime, j=None, matching: str = "order") -> Optional[IndexPermutation]:
    """Finite ``sigma`` with ``U_sigma b U_sigma* = b'`` for diagonal ``b, b'``.

    ``tau`` matches equal values (``b'_{tau(k)} = b_k``). With
    ``matching="order"`` the k-th occurrence goes to the k-th occurrence;
    ``"shift"`` sends the k-th occurrence of the tail value to the (k+1)-th,
    pushing the last one beyond the window, which yields an open orbit that
    the alignment has to close. Returns ``None`` when the tails differ.
    Membership in any ideal is automatic: ``U_sigma - I`` has finite rank.
    """
    d, t = _diag_data(b)
    dp, tp = _diag_data(b_prime)
    if t != tp:
        return None
    n = d.size
    if dp.size != n:
        raise SpectrumMismatch("diagonals have different lengths")
    keys = [_key(v) for v in d]
    keys_p = [_key(v) for v in dp]
    if sorted(keys) != sorted(keys_p):
        raise SpectrumMismatch("diagonal value multisets differ")
    tail_key = None
    if t.kind == "zero":
        tail_key = _key(0j)
    elif t.kind == "scalar":
        tail_key = _key(t.coeff)
    groups = sorted(set(keys))
    if tail_key is not None and tail_key not in groups:
        groups.append(tail_key)
    blocks = [[k + 1 for k in range(n) if keys[k] == g] for g in groups]
    nonempty = [bi for bi, bl in enumerate(blocks) if bl]
    tail_block = None
    if tail_key is not None and blocks[groups.index(tail_key)]:
        tail_block = nonempty.index(groups.index(tail_key))
    blocks = [blocks[bi] for bi in nonempty]
    groups = [groups[bi] for bi in nonempty]
    part = PartitionOfIndices(blocks, tail_block)
    images = [0] * n
    for g, src in zip(groups, blocks):
        dst = [m + 1 for m in range(n) if keys_p[m] == g]
        if matching == "shift" and part.tail_block is not None and g == groups[part.tail_block]:
            dst = dst[1:] + [n + 1]
        for a, c in zip(src, dst):
            images[a - 1] = c
    tau = IndexPermutation(images)
    if tau.is_bijection and not tau.support:
        return tau
    return align_finite(tau, part)
