"""Finite-truncation operators: a dense N x N block plus a structured tail.

An operator on l2 is modelled as ``block (+) tail`` where the tail acts on
the coordinates ``n > N`` and is one of

* zero,
* ``c * I`` (the identity tail when ``c == 1``),
* ``c * diag(profile_n)`` with a :class:`~restdiag.seq_ideal.SeqProfile`
  indexed by the *global* coordinate ``n``.

Arithmetic follows the tail algebra exactly and raises
:class:`~restdiag.errors.TailAlgebraError` rather than truncating silently.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .config import get_tolerances
from .errors import DimMismatch, NonCompactTail, TailAlgebraError
from .seq_ideal import (MAX_PREFIX, IdealTag, SeqProfile, _clip_tail, finite_profile,
                        in_ideal, profile_add, profile_mul)


@dataclass(frozen=True)
class Tail:
    kind: str = "zero"      # zero | scalar | diag
    coeff: complex = 1.0
    profile: SeqProfile = None

    def __post_init__(self):
        if self.kind not in ("zero", "scalar", "diag"):
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if self.kind == "diag" and self.profile is None:
            raise ValueError("diag tail needs a profile")
        object.__setattr__(self, "coeff", complex(self.coeff))
        if self.kind != "zero" and abs(self.coeff) < 1e-15:
            object.__setattr__(self, "kind", "zero")
        if self.kind == "diag" and self.profile.tail.is_zero and not any(self.profile.prefix):
            object.__setattr__(self, "kind", "zero")
        if self.kind == "zero":
            object.__setattr__(self, "coeff", 1.0 + 0j)
            object.__setattr__(self, "profile", None)
        elif self.kind == "scalar":
            object.__setattr__(self, "profile", None)

    @property
    def is_zero(self):
        return self.kind == "zero"

    @property
    def is_identity(self):
        return self.kind == "scalar" and abs(self.coeff - 1) < 1e-12

    def entries(self, start: int, stop: int) -> np.ndarray:
        """Diagonal entries at global 1-based indices ``start..stop-1``."""
        n = max(stop - start, 0)
        if self.kind == "zero":
            return np.zeros(n, dtype=complex)
        if self.kind == "scalar":
            return np.full(n, self.coeff, dtype=complex)
        idx = np.arange(start, stop)
        pre = self.profile.prefix
        vals = np.zeros(n)
        early = idx <= len(pre)
        vals[early] = np.asarray(pre)[idx[early] - 1]
        vals[~early] = self.profile.tail.term(idx[~early])
        return self.coeff * vals

    def sup(self, start: int) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "scalar":
            return abs(self.coeff)
        stop = max(start + 64, len(self.profile.prefix) + 2)
        return float(np.max(np.abs(self.entries(start, stop))))

    def to_json(self):
        if self.kind == "zero":
            return "zero"
        if self.is_identity:
            return "identity"
        if self.kind == "scalar":
            return {"scalar": [self.coeff.real, self.coeff.imag]}
        d = {"diag": self.profile.to_dict()}
        if self.coeff != 1:
            d["coeff"] = [self.coeff.real, self.coeff.imag]
        return d

    @classmethod
    def from_json(cls, obj):
        if obj == "zero" or obj is None:
            return ZERO_TAIL
        if obj == "identity":
            return IDENTITY_TAIL
        if isinstance(obj, dict) and "scalar" in obj:
            re, im = obj["scalar"]
            return cls("scalar", complex(re, im))
        if isinstance(obj, dict) and "diag" in obj:
            re, im = obj.get("coeff", [1.0, 0.0])
            return cls("diag", complex(re, im), SeqProfile.from_dict(obj["diag"]))
        raise ValueError(f"bad tail encoding {obj!r}")


ZERO_TAIL = Tail()
IDENTITY_TAIL = Tail("scalar", 1.0)


def diag_tail(profile: SeqProfile, coeff: complex = 1.0) -> Tail:
    return Tail("diag", coeff, profile)


def tail_add(a: Tail, b: Tail) -> Tail:
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    if a.kind == "scalar" and b.kind == "scalar":
        return Tail("scalar", a.coeff + b.coeff)
    if a.kind == "diag" and b.kind == "diag":
        if a.profile == b.profile:
            return Tail("diag", a.coeff + b.coeff, a.profile)
        # magnitude bound: only the singular-value class survives
        prof = profile_add(a.profile.scaled(abs(a.coeff)), b.profile.scaled(abs(b.coeff)))
        return Tail("diag", 1.0, prof)
    raise TailAlgebraError("scalar + diagonal-profile tail is not representable")


def tail_scale(t: Tail, c: complex) -> Tail:
    if t.is_zero:
        return t
    return Tail(t.kind, t.coeff * c, t.profile)


def tail_mul(a: Tail, b: Tail) -> Tail:
    if a.is_zero or b.is_zero:
        return ZERO_TAIL
    if a.kind == "scalar":
        return tail_scale(b, a.coeff)
    if b.kind == "scalar":
        return tail_scale(a, b.coeff)
    return Tail("diag", a.coeff * b.coeff, profile_mul(a.profile, b.profile))


def tail_adjoint(t: Tail) -> Tail:
    if t.is_zero:
        return t
    return Tail(t.kind, np.conj(t.coeff), t.profile)


class TruncOperator:
    """Immutable ``block (+) tail`` operator."""

    __slots__ = ("block", "tail")

    def __init__(self, block, tail: Tail = ZERO_TAIL):
        b = np.array(block, dtype=complex, copy=True)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] < 1:
            raise ValueError("block must be a nonempty square matrix")
        b.setflags(write=False)
        object.__setattr__(self, "block", b)
        object.__setattr__(self, "tail", tail)

    def __setattr__(self, *_):
        raise AttributeError("TruncOperator is immutable")

    @property
    def dim(self) -> int:
        return self.block.shape[0]

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), IDENTITY_TAIL)

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros((dim, dim)), ZERO_TAIL)

    @classmethod
    def diagonal(cls, values, tail=ZERO_TAIL):
        return cls(np.diag(np.asarray(values, dtype=complex)), tail)

    @property
    def H(self) -> "TruncOperator":
        return TruncOperator(self.block.conj().T, tail_adjoint(self.tail))

    def _check(self, other):
        if not isinstance(other, TruncOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise DimMismatch(f"dims {self.dim} and {other.dim} differ")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncOperator(self.block + other.block, tail_add(self.tail, other.tail))

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncOperator(self.block - other.block,
                             tail_add(self.tail, tail_scale(other.tail, -1)))

    def __neg__(self):
        return TruncOperator(-self.block, tail_scale(self.tail, -1))

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return TruncOperator(self.block @ other.block, tail_mul(self.tail, other.tail))

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return TruncOperator(c * self.block, tail_scale(self.tail, c))

    __rmul__ = __mul__

    def expand(self, dim: int) -> "TruncOperator":
        """Same operator with the block enlarged to ``dim`` using the tail."""
        if dim < self.dim:
            raise ValueError("cannot shrink a truncation")
        out = np.zeros((dim, dim), dtype=complex)
        out[: self.dim, : self.dim] = self.block
        idx = np.arange(self.dim, dim)
        out[idx, idx] = self.tail.entries(self.dim + 1, dim + 1)
        return TruncOperator(out, self.tail)

    def allclose(self, other, atol=1e-10) -> bool:
        return (self.dim == other.dim and self.tail == other.tail
                and np.allclose(self.block, other.block, rtol=0, atol=atol))

    def __repr__(self):
        return f"TruncOperator(dim={self.dim}, tail={self.tail.to_json()!r})"

    def to_dict(self) -> dict:
        return {"dim": self.dim, "re": self.block.real.tolist(),
                "im": self.block.imag.tolist(), "tail": self.tail.to_json()}

    @classmethod
    def from_dict(cls, d: dict) -> "TruncOperator":
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d["im"], dtype=float) if "im" in d else np.zeros_like(re)
        op = cls(re + 1j * im, Tail.from_json(d.get("tail", "zero")))
        if "dim" in d and d["dim"] != op.dim:
            raise ValueError("declared dim does not match the block")
        return op


# ------------------------------------------------------------- projections

class Projection:
    """Orthogonal projection stored by an orthonormal basis of its block range.

    ``tail`` is the zero tail or the identity tail. ``coords`` holds the
    0-based coordinate indices when the projection is diagonal.
    """

    __slots__ = ("basis", "tail", "coords")

    def __init__(self, basis, tail: Tail = ZERO_TAIL, coords=None):
        b = np.array(basis, dtype=complex)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D array of column vectors")
        if not (tail.is_zero or tail.is_identity):
            raise ValueError("projection tails are zero or identity")
        b.setflags(write=False)
        self.basis = b
        self.tail = tail
        self.coords = None if coords is None else tuple(int(c) for c in coords)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        """Rank of the block (the tail adds infinitely many when identity)."""
        return self.basis.shape[1]

    @property
    def block(self) -> np.ndarray:
        if self.coords is not None:
            m = np.zeros((self.dim, self.dim), dtype=complex)
            m[self.coords, self.coords] = 1
            return m
        return self.basis @ self.basis.conj().T

    @property
    def op(self) -> TruncOperator:
        return TruncOperator(self.block, self.tail)

    @property
    def is_diagonal(self) -> bool:
        return self.coords is not None

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        if self.coords is not None:
            m[list(self.coords)] = True
        return m

    @classmethod
    def coordinate(cls, dim, indices, tail=ZERO_TAIL):
        idx = sorted(set(int(i) for i in indices))
        if idx and (idx[0] < 0 or idx[-1] >= dim):
            raise ValueError("coordinate index out of range")
        return cls(np.eye(dim)[:, idx], tail, coords=idx)

    @classmethod
    def from_mask(cls, mask, tail=ZERO_TAIL):
        mask = np.asarray(mask, dtype=bool)
        return cls.coordinate(mask.size, np.flatnonzero(mask), tail)

    @classmethod
    def from_basis(cls, vectors, tail=ZERO_TAIL, tol=1e-9):
        v = np.asarray(vectors, dtype=complex)
        if v.shape[1] and np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1]), 2) > tol:
            raise ValueError("basis columns are not orthonormal")
        return cls(v, tail)

    @classmethod
    def from_matrix(cls, m, tail=ZERO_TAIL, tol=1e-10):
        m = np.asarray(m, dtype=complex)
        if np.linalg.norm(m - m.conj().T, 2) > tol or np.linalg.norm(m @ m - m, 2) > tol:
            raise ValueError("matrix is not an orthogonal projection")
        off = m - np.diag(np.diag(m))
        d = np.diag(m).real
        if np.max(np.abs(off), initial=0) <= 1e-13 and np.all(np.minimum(np.abs(d), np.abs(d - 1)) <= tol):
            return cls.coordinate(m.shape[0], np.flatnonzero(d > 0.5), tail)
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        return cls(v[:, w > 0.5], tail)

    @classmethod
    def from_op(cls, a: TruncOperator, tol=1e-10):
        return cls.from_matrix(a.block, a.tail, tol)

    def complement(self) -> "Projection":
        tail = ZERO_TAIL if self.tail.is_identity else IDENTITY_TAIL
        if self.coords is not None:
            return Projection.from_mask(~self.mask, tail)
        return Projection(orth_complement(self.basis), tail)

    def __repr__(self):
        return f"Projection(dim={self.dim}, rank={self.rank}, tail={self.tail.to_json()!r})"


def orth_complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``range(basis)``."""
    n, r = basis.shape
    if r == 0:
        return np.eye(n, dtype=complex)
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, r:]


def range_basis(m: np.ndarray, rank_eps=None) -> np.ndarray:
    """Orthonormal basis of the numerical range of a matrix."""
    eps = get_tolerances().rank_eps if rank_eps is None else rank_eps
    u, s, _ = np.linalg.svd(m)
    keep = s > eps * max(1.0, s[0] if s.size else 0.0)
    return u[:, keep]


class IdentityDecomposition:
    """Ordered family of projections, checked to be a decomposition of I.

    ``defect`` optionally declares, beyond the truncation, the singular-value
    profile by which the family's infinite part deviates from the fixed
    coordinate basis. Families that are not decompositions (overlapping or
    non-covering) are built with ``check=False``.
    """

    def __init__(self, parts, defect: SeqProfile = None, check=True, tol=1e-10):
        parts = tuple(parts)
        if not parts:
            raise ValueError("empty family")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimMismatch("parts have different dims")
        self.parts = parts
        self.defect = defect
        if check:
            self.validate(tol)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def __len__(self):
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __getitem__(self, i):
        return self.parts[i]

    @property
    def identity_index(self):
        """Index of the part carrying the identity tail, or None."""
        for i, p in enumerate(self.parts):
            if p.tail.is_identity:
                return i
        return None

    @property
    def is_diagonal(self) -> bool:
        return all(p.is_diagonal for p in self.parts)

    def validate(self, tol=1e-10):
        if sum(p.tail.is_identity for p in self.parts) > 1:
            raise ValueError("more than one part has an identity tail")
        b = np.hstack([p.basis for p in self.parts])
        if b.shape[1] != self.dim:
            raise ValueError(f"ranks sum to {b.shape[1]}, not {self.dim}")
        if np.linalg.norm(b.conj().T @ b - np.eye(self.dim), 2) > tol:
            raise ValueError("parts are not mutually orthogonal projections summing to I")

    def total(self) -> TruncOperator:
        """Sum of all parts."""
        acc = TruncOperator.zeros(self.dim)
        for p in self.parts:
            acc = acc + p.op
        return acc

    def with_parts(self, parts, check=True):
        return IdentityDecomposition(parts, self.defect, check=check)


class DiagonalizableOperator:
    """``sum_n lambda_n P_n`` with distinct eigenvalues."""

    def __init__(self, eigenvalues, spectral: IdentityDecomposition, matrix=None):
        lam = np.asarray(eigenvalues, dtype=complex).ravel()
        if lam.size != len(spectral):
            raise ValueError("one eigenvalue per spectral projection")
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(lam.size) * 1e9
        if lam.size > 1 and gaps.min() <= 1e-9:
            raise ValueError("eigenvalues must be pairwise distinct")
        self.eigenvalues = tuple(complex(x) for x in lam)
        self.spectral = spectral
        if matrix is not None:
            if not isinstance(matrix, TruncOperator):
                matrix = TruncOperator(matrix, self.op().tail)
            if not self.op().allclose(matrix, atol=1e-10):
                raise ValueError("spectral data does not reconstruct the given matrix")

    @property
    def dim(self):
        return self.spectral.dim

    def op(self) -> TruncOperator:
        block = np.zeros((self.dim, self.dim), dtype=complex)
        tail = ZERO_TAIL
        for lam, p in zip(self.eigenvalues, self.spectral):
            block += lam * (p.basis @ p.basis.conj().T)
            tail = tail_add(tail, tail_scale(p.tail, lam))
        return TruncOperator(block, tail)


class PartialIsometry:
    """Operator with ``V V* V = V`` on the block; tail zero or unimodular scalar."""

    def __init__(self, op: TruncOperator, tol=1e-9):
        b = op.block
        if np.linalg.norm(b @ b.conj().T @ b - b, 2) > tol:
            raise ValueError("not a partial isometry")
        t = op.tail
        if not (t.is_zero or (t.kind == "scalar" and abs(abs(t.coeff) - 1) < 1e-12)):
            raise ValueError("partial isometry tails are zero or unimodular scalars")
        self.op = op

    @property
    def dim(self):
        return self.op.dim

    def initial_projection(self) -> TruncOperator:
        return self.op.H @ self.op

    def final_projection(self) -> TruncOperator:
        return self.op @ self.op.H

    def kernel_projection(self) -> TruncOperator:
        return TruncOperator.identity(self.dim) - self.initial_projection()


# -------------------------------------------------------------- operations

def singular_values(a: TruncOperator) -> SeqProfile:
    """Singular-value profile of a compact truncated operator.

    Block singular values are merged with the tail entries evaluated from
    index ``N+1`` until they drop below the smallest positive block value.
    Zero block values are dropped when the tail is infinite (they do not
    occur in the non-increasing rearrangement).
    """
    if a.tail.kind == "scalar":
        raise NonCompactTail("operator with a scalar tail is not compact")
    sv = linalg.svdvals(a.block)
    if a.tail.is_zero:
        return finite_profile(sv)
    c = abs(a.tail.coeff)
    prof = a.tail.profile
    positive = sv[sv > 0]
    floor = positive.min() if positive.size else 0.0
    n = a.dim
    budget = MAX_PREFIX - positive.size
    need = max(len(prof.prefix) - n, 0)
    chunks, count, last = [], 0, np.inf
    while count < budget:
        step = min(4096, budget - count)
        vals = np.abs(a.tail.entries(n + count + 1, n + count + 1 + step))
        chunks.append(vals)
        count += step
        last = vals[-1]
        if count >= need and last < floor:
            break
    tail_vals = np.concatenate(chunks) if chunks else np.zeros(0)
    if count >= budget:
        positive = positive[positive >= last]
    merged = np.sort(np.concatenate([positive, tail_vals]))[::-1]
    return _clip_tail(merged, prof.tail.scaled(c))


def operator_norm(a: TruncOperator) -> float:
    top = float(linalg.svdvals(a.block)[0])
    return max(top, a.tail.sup(a.dim + 1))


def schatten_norm(a: TruncOperator, p: float) -> float:
    """``(sum s_n**p)**(1/p)`` including the tail series; ``inf`` if divergent."""
    if a.tail.kind == "scalar":
        return np.inf
    head = float(np.sum(linalg.svdvals(a.block) ** p))
    if a.tail.kind == "diag":
        head += abs(a.tail.coeff) ** p * a.tail.profile.power_sum(p, start=a.dim + 1)
    return head ** (1.0 / p)


def op_in_ideal(a: TruncOperator, j: IdealTag) -> bool:
    """Ideal membership; the finite block never affects it, only the tail does."""
    if a.tail.kind == "scalar":
        return False
    if a.tail.is_zero:
        return True
    return in_ideal(a.tail.profile, j)


def pinch(a: TruncOperator, p: IdentityDecomposition) -> TruncOperator:
    """Block-diagonal compression ``sum_n P_n A P_n``."""
    if a.dim != p.dim:
        raise DimMismatch("operator and decomposition dims differ")
    block = np.zeros_like(a.block)
    tail = ZERO_TAIL
    for part in p:
        if part.coords is not None:
            idx = np.ix_(part.coords, part.coords)
            block[idx] += a.block[idx]
        else:
            b = part.basis
            block += b @ (b.conj().T @ a.block @ b) @ b.conj().T
        tail = tail_add(tail, tail_mul(part.tail, tail_mul(a.tail, part.tail)))
    return TruncOperator(block, tail)


def polar(a: TruncOperator):
    """Polar decomposition ``a = V |a|`` with ``V* V`` the support of ``|a|``."""
    eps = get_tolerances().rank_eps
    u, s, wh = np.linalg.svd(a.block)
    keep = s > eps * max(1.0, s[0])
    v_block = u[:, keep] @ wh[keep, :]
    mod_block = wh.conj().T @ np.diag(s) @ wh
    t = a.tail
    if t.is_zero:
        vt, mt = ZERO_TAIL, ZERO_TAIL
    elif t.kind == "scalar":
        vt, mt = Tail("scalar", t.coeff / abs(t.coeff)), Tail("scalar", abs(t.coeff))
    else:
        vt, mt = Tail("scalar", t.coeff / abs(t.coeff)), Tail("diag", abs(t.coeff), t.profile)
    return PartialIsometry(TruncOperator(v_block, vt)), TruncOperator(mod_block, mt)


def pinv(a: TruncOperator) -> TruncOperator:
    """Moore-Penrose inverse with the shared rank threshold."""
    eps = get_tolerances().rank_eps
    u, s, wh = np.linalg.svd(a.block)
    keep = s > eps * max(1.0, s[0])
    inv = wh[keep, :].conj().T @ np.diag(1.0 / s[keep]) @ u[:, keep].conj().T
    t = a.tail
    if t.kind == "diag":
        raise TailAlgebraError("inverse of an infinite-rank compact tail is unbounded")
    tail = ZERO_TAIL if t.is_zero else Tail("scalar", 1.0 / t.coeff)
    return TruncOperator(inv, tail)


def adjoint(a):
    return a.H


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def multiply(a, b):
    return a @ b


def off_diagonal_norm(a: TruncOperator) -> float:
    off = a.block - np.diag(np.diag(a.block))
    return float(linalg.norm(off, 2)) if off.size else 0.0


def is_diagonal(a: TruncOperator, tol: float = 1e-10) -> bool:
    return off_diagonal_norm(a) <= tol


def is_unitary(a: TruncOperator, tol: float = 1e-9) -> bool:
    t = a.tail
    if not (t.kind == "scalar" and abs(abs(t.coeff) - 1) < tol):
        return False
    return unitarity_defect(a) <= tol


def unitarity_defect(a: TruncOperator) -> float:
    b = a.block
    eye = np.eye(a.dim)
    return float(max(linalg.norm(b.conj().T @ b - eye, 2), linalg.norm(b @ b.conj().T - eye, 2)))


def rank(m: np.ndarray, rank_eps=None) -> int:
    eps = get_tolerances().rank_eps if rank_eps is None else rank_eps
    s = linalg.svdvals(m)
    if not s.size:
        return 0
    return int(np.sum(s > eps * max(1.0, s[0])))
