"""Diagonalizing a finite-spectrum operator by a unitary of the form I + J.

Pipeline for :func:`assemble_unitary`::

    verify_conditions -> find_n0 -> orthogonalize -> find_n1
      -> replace E_{n1} -> build_partial_isometry -> balance_codimensions
      -> conjugate head -> U = V + U0 (I - P0)
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .config import get_tolerances
from .errors import (CodimNonzero, ConditionsFail, NoValidIndex, NotCompactDefect,
                     NotDiagonalizing, NotOrthonormal, OverlapNotFiniteRank,
                     PreconditionFailed, RestdiagError, StageError, TailAlgebraError)
from .operators import (IDENTITY_TAIL, ZERO_TAIL, DiagonalizableOperator, IdentityDecomposition,
                        PartialIsometry, Projection, Tail, TruncOperator, diag_tail,
                        is_unitary, off_diagonal_norm, op_in_ideal, operator_norm, polar,
                        singular_values, tail_add, tail_mul, unitarity_defect)
from .projections import balance_codimensions, conjugate_family, ess_codim
from .seq_ideal import IdealTag, SeqProfile, am_closure_member, ideal_square, profile_add

MARGIN = 1e-6


# ------------------------------------------------------------------ helpers

def _left(e: Projection, m: np.ndarray) -> np.ndarray:
    """``E @ m`` for a projection block."""
    if e.coords is not None:
        out = np.zeros_like(m)
        out[list(e.coords)] = m[list(e.coords)]
        return out
    return e.basis @ (e.basis.conj().T @ m)


def _attach(op: TruncOperator, profile: Optional[SeqProfile]) -> TruncOperator:
    """Add a declared off-truncation singular-value profile to ``op``'s tail."""
    if profile is None or op.tail.kind == "scalar":
        return op
    try:
        return TruncOperator(op.block, tail_add(op.tail, diag_tail(profile)))
    except TailAlgebraError:
        return op


def _defect(ps: IdentityDecomposition, es: IdentityDecomposition) -> Optional[SeqProfile]:
    ds = [d for d in (ps.defect, es.defect) if d is not None]
    if not ds:
        return None
    return ds[0] if len(ds) == 1 else profile_add(ds[0], ds[1])


def _carries_defect(ps, es, indices) -> bool:
    """Whether a partial sum over ``indices`` includes the off-truncation part."""
    ids = {ps.identity_index, es.identity_index} - {None}
    if not ids:
        # every part is finite rank: the parts beyond the truncation are in every tail sum
        return True
    return bool(ids & set(indices))


def _sum_parts(parts, dim) -> Projection:
    parts = list(parts)
    if not parts:
        return Projection.coordinate(dim, [])
    tail = IDENTITY_TAIL if any(p.tail.is_identity for p in parts) else ZERO_TAIL
    if all(p.coords is not None for p in parts):
        return Projection.coordinate(dim, [c for p in parts for c in p.coords], tail)
    return Projection(np.hstack([p.basis for p in parts]), tail)


def _check_pair(ps, es):
    if len(ps) != len(es):
        raise ValueError("families differ in length")
    if ps.dim != es.dim:
        from .errors import DimMismatch
        raise DimMismatch("families have different dims")


# ----------------------------------------------------------------- reports

@dataclass
class ConditionReport:
    series_one: TruncOperator
    series_two: TruncOperator
    member_one: bool
    member_two: bool
    per_pair_in_ideal: List[bool]
    amc_member_one: Optional[bool] = None
    amc_member_two: Optional[bool] = None

    @property
    def passes(self) -> bool:
        return self.member_one and self.member_two

    def residual_rank(self, which: int = 2) -> int:
        from .operators import rank
        s = self.series_two if which == 2 else self.series_one
        return rank(s.block)

    def to_dict(self):
        d = {"member_one": self.member_one, "member_two": self.member_two,
             "per_pair_in_ideal": list(self.per_pair_in_ideal),
             "series_one_norm": operator_norm(self.series_one),
             "series_two_norm": operator_norm(self.series_two),
             "series_one_rank": self.residual_rank(1),
             "series_two_rank": self.residual_rank(2)}
        if self.amc_member_one is not None:
            d["amc_member_one"] = self.amc_member_one
            d["amc_member_two"] = self.amc_member_two
        return d


@dataclass
class DiagonalizationCertificate:
    unitary: TruncOperator
    n0: int
    n1: int
    diag_residual: float
    u_minus_i_profile: SeqProfile
    balanced: bool
    diagonal_family: IdentityDecomposition = field(default=None, repr=False)

    def check(self, j: IdealTag, tol=None) -> bool:
        """Re-verify the certificate invariants."""
        from .seq_ideal import in_ideal
        tol = get_tolerances().residual_tol if tol is None else tol
        return (self.diag_residual <= tol and is_unitary(self.unitary, 1e-9)
                and in_ideal(self.u_minus_i_profile, j))

    def to_dict(self):
        return {"unitary": self.unitary.to_dict(), "n0": self.n0, "n1": self.n1,
                "diag_residual": self.diag_residual,
                "unitarity_defect": unitarity_defect(self.unitary),
                "u_minus_i_profile": self.u_minus_i_profile.to_dict(),
                "balanced": self.balanced}


# ------------------------------------------------------------- conditions

def verify_conditions(ps: IdentityDecomposition, es: IdentityDecomposition,
                      j: IdealTag) -> ConditionReport:
    """Evaluate ``sum (I-E_n) P_n`` and ``sum E_n (I-P_n)`` and their membership in ``j``."""
    _check_pair(ps, es)
    dim = ps.dim
    defect = _defect(ps, es)
    b1 = np.zeros((dim, dim), dtype=complex)
    b2 = np.zeros((dim, dim), dtype=complex)
    t1 = t2 = ZERO_TAIL
    pairs = []
    for n, (p, e) in enumerate(zip(ps, es)):
        pb = p.block
        eb = e.block
        epb = _left(e, pb)
        b1 += pb - epb
        b2 += eb - epb
        not_e = tail_add(IDENTITY_TAIL, Tail("scalar", -1) if e.tail.is_identity else ZERO_TAIL)
        not_p = tail_add(IDENTITY_TAIL, Tail("scalar", -1) if p.tail.is_identity else ZERO_TAIL)
        t1 = tail_add(t1, tail_mul(not_e, p.tail))
        t2 = tail_add(t2, tail_mul(e.tail, not_p))
        diff = TruncOperator(np.zeros((1, 1)), tail_add(p.tail, tail_mul(Tail("scalar", -1), e.tail)))
        if p.tail.is_identity or e.tail.is_identity:
            diff = _attach(diff, defect)
        pairs.append(op_in_ideal(diff, j))
    s1 = TruncOperator(b1, t1)
    s2 = TruncOperator(b2, t2)
    if _carries_defect(ps, es, range(len(ps))):
        s1, s2 = _attach(s1, defect), _attach(s2, defect)
    return ConditionReport(s1, s2, op_in_ideal(s1, j), op_in_ideal(s2, j), pairs)


def dominant_diagonal_family(ps: IdentityDecomposition) -> IdentityDecomposition:
    """Heuristic guess for ``E_n``: coordinates where ``P_n`` has diagonal weight > 1/2.

    Only meant for the finite-spectrum path; the result need not satisfy
    the series conditions.
    """
    parts = []
    for p in ps:
        w = np.real(np.einsum("ij,ij->i", p.basis, p.basis.conj()))
        parts.append(Projection.from_mask(w > 0.5, p.tail))
    return IdentityDecomposition(parts, ps.defect, check=False)


# ---------------------------------------------------------- index searches

def _corner_index(k: TruncOperator) -> int:
    """Least ``m`` with ``||(I - Q_m) k (I - Q_m)|| < 1``, ``Q_m`` the first m coordinates."""
    if k.tail.kind == "scalar":
        raise NotCompactDefect("sum of the family differs from I by a non-compact operator")
    if k.tail.sup(k.dim + 1) >= 1:
        raise NotCompactDefect("defect tail has norm >= 1 beyond the truncation")
    b = k.block
    for m in range(k.dim + 1):
        c = b[m:, m:]
        if c.size == 0 or np.linalg.norm(c, 2) < 1:
            return m
    return k.dim


def _overlap(a: Projection, b: Projection) -> float:
    if a.tail.is_identity and b.tail.is_identity:
        return np.inf
    if a.coords is not None and b.coords is not None:
        return 1.0 if set(a.coords) & set(b.coords) else 0.0
    if a.rank == 0 or b.rank == 0:
        return 0.0
    return float(np.linalg.norm(a.basis.conj().T @ b.basis, 2))


def find_n0(es: IdentityDecomposition, k: TruncOperator = None) -> int:
    """Least ``n0`` after which the family is pairwise orthogonal.

    ``k = sum E_n - I`` must be compact; the corner index where it drops
    below norm one is computed as a precondition check.
    """
    if k is None:
        k = es.total() - TruncOperator.identity(es.dim)
    _corner_index(k)
    parts = list(es)
    n0 = 0
    for j in range(len(parts)):
        for i in range(j):
            if _overlap(parts[i], parts[j]) > 1e-9:
                # cutting after the earlier member separates the pair
                n0 = max(n0, i + 1)
    return n0


def orthogonalize(es: IdentityDecomposition, upto: int = None) -> IdentityDecomposition:
    """``E'_n = E_n - E_n (E'_1 + ... + E'_{n-1})`` for ``n <= upto``, then re-projected."""
    parts = list(es)
    upto = len(parts) if upto is None else min(upto, len(parts))
    dim = es.dim
    acc = np.zeros((dim, dim), dtype=complex)
    acc_tail = ZERO_TAIL
    out = []
    for n, e in enumerate(parts):
        if n >= upto:
            out.append(e)
            continue
        if e.tail.is_identity and acc_tail.is_identity:
            raise OverlapNotFiniteRank(f"part {n + 1} overlaps an earlier part in infinite rank")
        eb = e.block
        raw = eb - eb @ acc
        d = np.real(np.diag(raw))
        if e.coords is None or np.abs(raw - np.diag(np.diag(raw))).max(initial=0) > 1e-9:
            raise PreconditionFailed("orthogonalization expects diagonal parts", condition="diagonal")
        new = Projection.from_mask(d > 0.5, e.tail)
        out.append(new)
        acc = acc + new.block
        acc_tail = tail_add(acc_tail, new.tail)
    return IdentityDecomposition(out, es.defect, check=False)


def _tail_norms(ps, es, n1):
    """Norms of ``sum_{n>n1} P_n (I-E_n) P_n`` and ``sum_{n>n1} E_n (I-P_n) E_n``."""
    dim = ps.dim
    idx = list(range(n1, len(ps)))
    b1 = np.zeros((dim, dim), dtype=complex)
    b2 = np.zeros((dim, dim), dtype=complex)
    t1 = t2 = ZERO_TAIL
    for n in idx:
        p, e = ps[n], es[n]
        pb, eb = p.block, e.block
        b1 += pb - pb @ eb @ pb
        b2 += eb - eb @ pb @ eb
        t1 = tail_add(t1, tail_mul(p.tail, Tail("scalar", 0) if e.tail.is_identity else p.tail))
        t2 = tail_add(t2, tail_mul(e.tail, Tail("scalar", 0) if p.tail.is_identity else e.tail))
    s1, s2 = TruncOperator(b1, t1), TruncOperator(b2, t2)
    if _carries_defect(ps, es, idx):
        d = _defect(ps, es)
        s1, s2 = _attach(s1, d), _attach(s2, d)
    return operator_norm(s1), operator_norm(s2)


def find_n1(ps: IdentityDecomposition, es: IdentityDecomposition, n0: int = 0) -> int:
    """Least ``n1 >= n0`` where both compressed tail sums have norm below ``1 - 1e-6``."""
    _check_pair(ps, es)
    for n1 in range(n0, len(ps) + 1):
        a, b = _tail_norms(ps, es, n1)
        if a < 1 - MARGIN and b < 1 - MARGIN:
            return n1
    raise NoValidIndex("no split index reaches the norm margin within the truncation")


def build_partial_isometry(ps: IdentityDecomposition, es: IdentityDecomposition,
                           n1: int) -> PartialIsometry:
    """``V = S |S|^+`` with ``S = sum_{n>n1} E_n P_n``."""
    dim = ps.dim
    s = TruncOperator.zeros(dim)
    for n in range(n1, len(ps)):
        s = s + es[n].op @ ps[n].op
    v, _ = polar(s)
    tol = 1e-8
    p0 = _sum_parts(ps.parts[n1:], dim).op
    e0 = _sum_parts(es.parts[n1:], dim).op
    if not v.initial_projection().allclose(p0, tol) or not v.final_projection().allclose(e0, tol):
        raise PreconditionFailed("partial isometry does not map the tail parts onto each other",
                                 condition="partial_isometry")
    for n in range(n1, len(ps)):
        moved = v.op @ ps[n].op @ v.op.H
        if np.linalg.norm(moved.block - es[n].block, 2) > tol:
            raise PreconditionFailed(f"V P_n V* differs from E_n at n={n + 1}",
                                     condition="partial_isometry")
    return v


def _replace_part(es: IdentityDecomposition, n: int) -> IdentityDecomposition:
    """Replace part ``n`` (0-based) by ``I - sum_{m != n} E_m``."""
    others = [e for m, e in enumerate(es) if m != n]
    mask = np.ones(es.dim, dtype=bool)
    for e in others:
        mask &= ~e.mask
    tail = ZERO_TAIL if any(e.tail.is_identity for e in others) else IDENTITY_TAIL
    parts = list(es)
    parts[n] = Projection.from_mask(mask, tail)
    return IdentityDecomposition(parts, es.defect)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (RestdiagError, ValueError) as exc:
        raise StageError(name, exc) from exc


def _head_unitary(ps, es, v, n1, dim, balance, j):
    """Conjugate the head families and glue with ``V``; returns ``(U, balanced)``."""
    p0 = _sum_parts(ps.parts[n1:], dim)
    e0 = _sum_parts(es.parts[n1:], dim)
    head_p = IdentityDecomposition([p0] + list(ps.parts[:n1]), check=False)
    head_e = IdentityDecomposition([e0] + list(es.parts[:n1]), check=False)
    balanced = False
    if balance:
        new_e = _stage("balance_codimensions", balance_codimensions, head_p, head_e, j, fixed=0)
        balanced = new_e is not head_e
        head_e = new_e
    u0 = _stage("conjugate_head", conjugate_family, head_p, head_e)
    v_perp = u0 @ p0.complement().op
    return v.op + v_perp, balanced, head_e


def _certificate(a, u, n0, n1, balanced, defect, family):
    ua = u @ a.op() @ u.H
    resid = off_diagonal_norm(ua)
    umi = _attach(u - TruncOperator.identity(u.dim), defect)
    return DiagonalizationCertificate(u, n0, n1, resid, singular_values(umi), balanced, family)


def assemble_unitary(a: DiagonalizableOperator, es: IdentityDecomposition,
                     j: IdealTag) -> DiagonalizationCertificate:
    """Build ``U`` with ``U - I`` in ``j`` and ``U A U*`` diagonal."""
    ps = a.spectral
    rep = _stage("verify_conditions", verify_conditions, ps, es, j)
    if not rep.passes:
        raise StageError("verify_conditions",
                         ConditionsFail(f"series conditions fail for {j} "
                                        f"(one={rep.member_one}, two={rep.member_two})"))
    n0 = _stage("find_n0", find_n0, es)
    es1 = _stage("orthogonalize", orthogonalize, es)
    n1 = _stage("find_n1", find_n1, ps, es1, n0)
    n1e = max(n1, 1)
    es2 = _stage("replace_tail_part", _replace_part, es1, n1e - 1)
    v = _stage("build_partial_isometry", build_partial_isometry, ps, es2, n1e)
    u, balanced, head_e = _head_unitary(ps, es2, v, n1e, ps.dim, True, j)
    family = IdentityDecomposition(list(head_e.parts[1:]) + list(es2.parts[n1e:]), es.defect,
                                   check=False)
    return _certificate(a, u, n0, n1, balanced, _defect(ps, es), family)


def verify_reverse(a: DiagonalizableOperator, u: TruncOperator, j: IdealTag) -> ConditionReport:
    """Check the series conditions for ``E_n = u P_n u*`` given a diagonalizing ``u``."""
    if not is_unitary(u, 1e-9):
        raise PreconditionFailed("u is not unitary", condition="unitary")
    if off_diagonal_norm(u @ a.op() @ u.H) > get_tolerances().residual_tol:
        raise NotDiagonalizing("u a u* is not diagonal")
    ps = a.spectral
    parts = []
    for p in ps:
        rot = u.block @ p.basis
        w = np.real(np.einsum("ij,ij->i", rot, rot.conj()))
        parts.append(Projection.from_mask(w > 0.5, p.tail))
    es = IdentityDecomposition(parts, check=False)
    rep = verify_conditions(ps, es, j)
    if j.is_am_closed:
        rep.amc_member_one, rep.amc_member_two = rep.member_one, rep.member_two
    else:
        rep.amc_member_one = _amc_member(rep.series_one, j)
        rep.amc_member_two = _amc_member(rep.series_two, j)
    return rep


def _amc_member(op: TruncOperator, j: IdealTag) -> bool:
    if op.tail.kind == "scalar":
        return False
    return am_closure_member(singular_values(op), j)


def j2_condition(ps: IdentityDecomposition, es: IdentityDecomposition, j: IdealTag) -> bool:
    """Membership of ``sum (P_n - E_n)^2`` in the square of ``j``."""
    return op_in_ideal(j2_series(ps, es), ideal_square(j))


def j2_series(ps, es) -> TruncOperator:
    _check_pair(ps, es)
    dim = ps.dim
    block = np.zeros((dim, dim), dtype=complex)
    tail = ZERO_TAIL
    for p, e in zip(ps, es):
        d = p.op - e.op
        sq = d @ d
        block += sq.block
        tail = tail_add(tail, sq.tail)
    out = TruncOperator(block, tail)
    d = _defect(ps, es)
    return _attach(out, d.powered(2) if d is not None else None)


def conjugate_decompositions(ps: IdentityDecomposition, es: IdentityDecomposition,
                             j: IdealTag) -> TruncOperator:
    """``U`` with ``U P_n U* = E_n`` for all ``n`` and ``U - I`` in ``j``."""
    _check_pair(ps, es)
    for n, (p, e) in enumerate(zip(ps, es)):
        if ess_codim(p, e).value != 0:
            raise CodimNonzero(f"[P_{n + 1}:E_{n + 1}] is nonzero", index=n + 1)
    rep = verify_conditions(ps, es, j)
    if not rep.passes:
        raise ConditionsFail(f"series conditions fail for {j}")
    n1 = max(_stage("find_n1", find_n1, ps, es, 0), 1)
    v = _stage("build_partial_isometry", build_partial_isometry, ps, es, n1)
    u, _, _ = _head_unitary(ps, es, v, n1, ps.dim, False, j)
    return u


# ----------------------------------------------------------------- bases

def _check_orthonormal(name, m, tol=1e-9):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or np.linalg.norm(m.conj().T @ m - np.eye(m.shape[1]), 2) > tol:
        raise NotOrthonormal(f"{name} basis is not orthonormal")
    return m


def basis_difference_operator(e_basis, f_basis, g_basis=None,
                              tail_gap: SeqProfile = None) -> TruncOperator:
    """Operator ``T`` with ``T g_n = e_n - f_n``.

    Bases are given as matrices whose columns are the vectors; without
    ``g_basis`` the standard basis is used, so column ``n`` is ``e_n - f_n``.
    """
    e = _check_orthonormal("e", e_basis)
    f = _check_orthonormal("f", f_basis)
    block = e - f
    if g_basis is not None:
        block = block @ _check_orthonormal("g", g_basis).conj().T
    tail = ZERO_TAIL if tail_gap is None else diag_tail(tail_gap)
    return TruncOperator(block, tail)


def are_j_equivalent(e_basis, f_basis, tail_gap: SeqProfile, j: IdealTag) -> bool:
    """Whether the bases are linked by a unitary in ``I + j``."""
    t = basis_difference_operator(e_basis, f_basis, tail_gap=tail_gap)
    member = op_in_ideal(t, j)
    if j.kind == "schatten" and j.p == 2 and tail_gap is not None:
        # independent check: the tail gaps must be square summable
        if member != bool(np.isfinite(tail_gap.power_sum(2.0))):
            raise RuntimeError("membership disagrees with square summability of the gaps")
    return member
