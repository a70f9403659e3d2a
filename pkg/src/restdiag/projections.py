"""Essential codimension of projection pairs and unitaries that conjugate them."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .config import get_tolerances
from .errors import (CodimNonzero, DimMismatch, KernelMismatch, NotFredholmPair,
                     PreconditionFailed, TailMismatch, TotalCodimNonzero)
from .operators import (IDENTITY_TAIL, IdentityDecomposition, PartialIsometry, Projection,
                        TruncOperator, op_in_ideal, orth_complement, range_basis)
from .seq_ideal import IdealTag


@dataclass(frozen=True)
class EssCodimResult:
    value: int
    dim_kernel_side: int
    dim_cokernel_side: int
    trace_crosscheck: Optional[float] = None

    def __post_init__(self):
        if self.value != self.dim_kernel_side - self.dim_cokernel_side:
            raise ValueError("value must equal the difference of the side dimensions")
        if self.trace_crosscheck is not None and abs(self.value - self.trace_crosscheck) > 1e-6:
            raise ValueError(f"trace check {self.trace_crosscheck} disagrees with index {self.value}")

    def to_dict(self):
        return {"value": self.value, "dims": [self.dim_kernel_side, self.dim_cokernel_side],
                "trace": self.trace_crosscheck}


def _cross_svals(p: Projection, q: Projection) -> np.ndarray:
    """Singular values of ``Q P`` viewed as a map ``R(P) -> R(Q)``."""
    if p.rank == 0 or q.rank == 0:
        return np.zeros(0)
    return linalg.svdvals(q.basis.conj().T @ p.basis)


def is_fredholm_pair(p: Projection, q: Projection) -> bool:
    if p.dim != q.dim:
        raise DimMismatch("projection dims differ")
    if p.tail != q.tail:
        return False
    tol = get_tolerances()
    s = _cross_svals(p, q)
    return bool(np.all((s <= tol.gap_lo) | (s >= tol.gap_hi)))


def ess_codim(p: Projection, q: Projection) -> EssCodimResult:
    """Index of ``QP: R(P) -> R(Q)`` by intersection counting."""
    if p.dim != q.dim:
        raise DimMismatch("projection dims differ")
    if p.tail != q.tail:
        raise TailMismatch("projections have different tails")
    if not is_fredholm_pair(p, q):
        raise NotFredholmPair("compressed product has singular values inside the gap")
    s = _cross_svals(p, q)
    r = int(np.sum(s >= get_tolerances().gap_hi))
    ker = p.rank - r
    coker = q.rank - r
    # equal tails cancel, so P - Q is the block alone and is trace class
    tr = float(np.real(np.trace(p.block - q.block)))
    return EssCodimResult(ker - coker, ker, coker, tr)


def _rotation(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Minimal rotation ``dst * polar(dst^* src) * src^*`` between equal-rank bases."""
    if src.shape[1] != dst.shape[1]:
        raise CodimNonzero("ranks differ")
    if src.shape[1] == 0:
        return np.zeros((src.shape[0], src.shape[0]), dtype=complex)
    u, _, vh = np.linalg.svd(dst.conj().T @ src)
    return dst @ (u @ vh) @ src.conj().T


def conjugate_family(ps, es) -> TruncOperator:
    """Unitary ``U`` with ``U P_n U* = E_n`` for two decompositions of I.

    Each part is moved by the minimal rotation between its bases, so that
    ``U - I`` is controlled by the differences ``P_n - E_n``.
    """
    ps, es = list(ps), list(es)
    if len(ps) != len(es):
        raise ValueError("families differ in length")
    dim = ps[0].dim
    block = np.zeros((dim, dim), dtype=complex)
    for n, (p, e) in enumerate(zip(ps, es)):
        if p.tail != e.tail:
            raise TailMismatch(f"part {n} has mismatched tails")
        if p.rank != e.rank:
            raise CodimNonzero(f"part {n} has nonzero essential codimension", index=n)
        block += _rotation(p.basis, e.basis)
    return TruncOperator(block, IDENTITY_TAIL)


def conjugating_unitary(p: Projection, q: Projection, j: IdealTag) -> TruncOperator:
    """Unitary ``U`` with ``U p U* = q`` and ``U - I`` in ``j``."""
    if not op_in_ideal(p.op - q.op, j):
        raise PreconditionFailed(f"p - q is not in {j}", condition="ideal")
    c = ess_codim(p, q)
    if c.value != 0:
        raise CodimNonzero(f"essential codimension is {c.value}")
    return conjugate_family([p, p.complement()], [q, q.complement()])


def intertwine_partial_isometries(v1: PartialIsometry, v2: PartialIsometry,
                                  j: IdealTag) -> TruncOperator:
    """Unitary ``U`` with ``U v1 = v2`` and ``U - I`` in ``j``."""
    if v1.dim != v2.dim:
        raise DimMismatch("partial isometry dims differ")
    k1, k2 = v1.kernel_projection(), v2.kernel_projection()
    if k1.tail != k2.tail or np.linalg.norm(k1.block - k2.block, 2) > 1e-9:
        raise KernelMismatch("partial isometries have different kernels")
    if not op_in_ideal(v1.op - v2.op, j):
        raise PreconditionFailed(f"v1 - v2 is not in {j}", condition="ideal")
    r1 = range_basis(v1.final_projection().block)
    r2 = range_basis(v2.final_projection().block)
    head = v2.op @ v1.op.H
    if v1.op.tail.is_zero:
        # finite-rank range: fix R(V1)^perp cap R(V2)^perp pointwise, rotate the rest
        common = orth_complement(np.hstack([r1, r2]))
        rest1 = orth_complement(np.hstack([r1, common]))
        rest2 = orth_complement(np.hstack([r2, common]))
        block = head.block + common @ common.conj().T + _rotation(rest1, rest2)
        return TruncOperator(block, IDENTITY_TAIL)
    w = _rotation(orth_complement(r1), orth_complement(r2))
    return TruncOperator(head.block + w, head.tail)


def balance_codimensions(ps: IdentityDecomposition, es: IdentityDecomposition, j: IdealTag,
                         fixed: Optional[int] = None) -> IdentityDecomposition:
    """Move diagonal coordinates between the ``E_n`` until every ``[P_n:E_n] = 0``.

    Transfers go one coordinate at a time from the lowest-index part with too
    much rank to the lowest-index part with too little, choosing the
    coordinate where ``P_target`` has the largest diagonal weight relative to
    ``P_source``. The part ``fixed`` is never modified.
    """
    if len(ps) != len(es):
        raise ValueError("families differ in length")
    codims = [ess_codim(p, e).value for p, e in zip(ps, es)]
    if sum(codims) != 0:
        raise TotalCodimNonzero(f"codimensions sum to {sum(codims)}")
    if all(c == 0 for c in codims):
        return es
    if fixed is not None and codims[fixed] != 0:
        raise PreconditionFailed("the fixed part has nonzero codimension", condition="codimension")
    if not es.is_diagonal:
        raise PreconditionFailed("balancing needs a diagonal family", condition="diagonal")
    masks = [e.mask.copy() for e in es]
    weight = [np.real(np.einsum("ij,ij->i", p.basis, p.basis.conj())) for p in ps]
    while any(codims):
        dst = next(n for n, c in enumerate(codims) if c > 0)
        src = next(n for n, c in enumerate(codims) if c < 0)
        cand = np.flatnonzero(masks[src])
        i = cand[np.argmax(weight[dst][cand] - weight[src][cand])]
        masks[src][i] = False
        masks[dst][i] = True
        codims[dst] -= 1
        codims[src] += 1
    parts = [Projection.from_mask(m, e.tail) for m, e in zip(masks, es)]
    return es.with_parts(parts)
