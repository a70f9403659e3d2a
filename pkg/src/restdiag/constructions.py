"""Explicit witness operators and their verifiers.

* :func:`build_nonlinear_witness` -- two self-adjoint operators, each
  diagonalizable by a unitary in ``I + J``, whose sum has an eigenbasis
  uniformly separated from the coordinate basis.
* :func:`build_span_witness` -- ``B = [[0, X], [X*, 0]]`` with ``s(X)`` in
  ``J`` but not in ``J^2``.
* :func:`build_amc_counterexample` -- a rank-one phase rotation ``U`` whose
  conjugated coordinate projections satisfy the trace-class form of the
  series conditions but not the finite-rank form.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DistinctnessUnreachable, OutOfRange, SquareEqualsIdeal, ZeroCoefficient
from .operators import (IDENTITY_TAIL, ZERO_TAIL, DiagonalizableOperator, IdentityDecomposition,
                        Projection, TruncOperator, diag_tail, pinch)
from .seq_ideal import (IdealTag, SeqProfile, ampliate, geometric, ideal_square, power)

GAP_LIMIT = float(np.sqrt(2 - np.sqrt(2)))
DISTINCT_MARGIN = 1e-10
SPAN_EXACT_TERMS = 8192


def rotation2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def theta_for_gap(t: float) -> float:
    """Angle in ``(0, pi/4)`` with ``|1 - exp(i theta)| = t``."""
    if not 0 < t < GAP_LIMIT:
        raise OutOfRange(f"gap {t} outside (0, {GAP_LIMIT:.6f})")
    return float(np.arccos((2 - t * t) / 2))


def _block_eigs(alphas, thetas):
    s2 = np.sin(2 * np.asarray(thetas))
    a = np.asarray(alphas)
    return np.concatenate([a * (1 + s2), a * (1 - s2)])


def _distinct(vals, margin=DISTINCT_MARGIN) -> bool:
    v = np.sort(vals)
    return bool(np.all(np.diff(v) > margin))


@dataclass
class NonlinearWitness:
    x_op: TruncOperator
    y_op: TruncOperator
    alphas: List[float]
    thetas: List[float]
    eigen_pairs: List[Tuple[float, np.ndarray]]
    v_op: TruncOperator = field(repr=False, default=None)
    w_op: TruncOperator = field(repr=False, default=None)
    alpha_profile: SeqProfile = None

    @property
    def v_minus_i_profile(self) -> SeqProfile:
        """Singular values of ``V - I``: every alpha twice."""
        return ampliate(self.alpha_profile, 2)

    def eigenbasis(self) -> np.ndarray:
        """Eigenvectors of ``X + Y`` (columns) on the active block."""
        return np.column_stack([v for _, v in self.eigen_pairs])

    def to_dict(self):
        return {"alphas": list(self.alphas), "thetas": list(self.thetas),
                "eigenvalues": [lam for lam, _ in self.eigen_pairs],
                "x": self.x_op.to_dict(), "y": self.y_op.to_dict(),
                "alpha_profile": self.alpha_profile.to_dict()}


def build_nonlinear_witness(j: IdealTag, blocks: int, dim: int, ratio: float = 0.5) -> NonlinearWitness:
    """Blockwise ``X = V A V*``, ``Y = W B W*`` with ``V = (+) U(theta_j)``, ``W = (+) U(-theta_j)``."""
    if blocks < 1 or 2 * blocks > dim:
        raise ValueError("need 1 <= blocks and 2*blocks <= dim")
    base = 0.9 * GAP_LIMIT
    alphas = base * ratio ** np.arange(blocks)
    for _ in range(100):
        thetas = np.array([theta_for_gap(a) for a in alphas])
        if _distinct(_block_eigs(alphas, thetas)):
            break
        alphas = alphas * (1 + 1e-3 * np.arange(1, blocks + 1))
        if np.any(np.diff(alphas) >= 0) or alphas[0] >= GAP_LIMIT:
            raise DistinctnessUnreachable("perturbation left the admissible range")
    else:
        raise DistinctnessUnreachable("eigenvalues still collide after 100 rounds")

    v = np.eye(dim, dtype=complex)
    w = np.eye(dim, dtype=complex)
    a = np.zeros((dim, dim), dtype=complex)
    b = np.zeros((dim, dim), dtype=complex)
    pairs = []
    for k, (al, th) in enumerate(zip(alphas, thetas)):
        sl = slice(2 * k, 2 * k + 2)
        v[sl, sl] = rotation2(th)
        w[sl, sl] = rotation2(-th)
        a[2 * k, 2 * k] = al
        b[2 * k + 1, 2 * k + 1] = al
        s2 = np.sin(2 * th)
        for sign in (1, -1):
            vec = np.zeros(dim)
            vec[2 * k], vec[2 * k + 1] = 1 / np.sqrt(2), sign / np.sqrt(2)
            pairs.append((float(al * (1 + sign * s2)), vec))
    v_op = TruncOperator(v, IDENTITY_TAIL)
    w_op = TruncOperator(w, IDENTITY_TAIL)
    x = v_op @ TruncOperator(a) @ v_op.H
    y = w_op @ TruncOperator(b) @ w_op.H
    # the remaining alphas continue the geometric decay beyond the truncation
    prof = SeqProfile(tuple(alphas), geometric(ratio, alphas[-1] / ratio ** blocks))
    return NonlinearWitness(x, y, [float(t) for t in alphas], [float(t) for t in thetas],
                            pairs, v_op, w_op, prof)


def separation(f_basis) -> float:
    """``min_{n,m} min_{|g|=1} ||e_n - g f_m|| = sqrt(2 - 2 max |<e_n, f_m>|)``."""
    f = np.asarray(f_basis, dtype=complex)
    top = float(np.max(np.abs(f)))
    return float(np.sqrt(max(2 - 2 * top, 0.0)))


def check_separation(f_basis, delta: float) -> bool:
    f = np.asarray(f_basis, dtype=complex)
    if np.linalg.norm(f.conj().T @ f - np.eye(f.shape[1]), 2) > 1e-9:
        raise ValueError("f_basis is not orthonormal")
    return separation(f) >= delta


@dataclass
class SpanWitness:
    b_op: TruncOperator
    x_op: TruncOperator
    corner_op: TruncOperator
    x_profile: SeqProfile

    def to_dict(self):
        return {"b": self.b_op.to_dict(), "corner": self.corner_op.to_dict(),
                "x_profile": self.x_profile.to_dict()}


def build_span_witness(j: IdealTag, dim: int) -> SpanWitness:
    """``B = [[0, X], [X*, 0]]`` on ``H (+) H`` with ``s(X) = n^(-3/(2p))``.

    The block has size ``dim`` (``dim // 2`` per summand); the tails carry
    the singular-value profiles ``D_2 s(X)`` for ``B`` and ``s(X)`` for the corner.
    """
    if ideal_square(j) == j or j.kind != "schatten":
        raise SquareEqualsIdeal(f"{j} equals its square; no gap to exhibit")
    if dim < 2 or dim % 2:
        raise ValueError("dim must be even and >= 2")
    half = dim // 2
    sx = SeqProfile((), power(1.5 / j.p))
    xd = sx.terms(half)
    x = np.diag(xd).astype(complex)
    zero = np.zeros_like(x)
    b = np.block([[zero, x], [x.conj().T, zero]])
    corner = np.block([[zero, x], [zero, zero]])
    # an explicit prefix makes the doubled profile exact termwise, not just asymptotically
    sx_exact = SeqProfile(tuple(sx.terms(SPAN_EXACT_TERMS)), sx.tail)
    return SpanWitness(TruncOperator(b, diag_tail(ampliate(sx_exact, 2))),
                       TruncOperator(x, diag_tail(sx)),
                       TruncOperator(corner, diag_tail(sx)), sx)


@dataclass
class AmcInstance:
    a: DiagonalizableOperator
    u: TruncOperator
    f: np.ndarray
    x_op: TruncOperator

    @property
    def coordinate_family(self) -> IdentityDecomposition:
        d = self.u.dim
        return IdentityDecomposition([Projection.coordinate(d, [n]) for n in range(d)],
                                     self.a.spectral.defect)


PHASE = np.exp(1j) - 1


def build_amc_counterexample(f_coeffs: SeqProfile, lambdas, dim: int) -> AmcInstance:
    """``U = I + (e^i - 1) f f*`` and ``A = sum lambda_n U e_n e_n* U*``."""
    c = np.asarray(f_coeffs.terms(dim), dtype=float)
    if np.any(c <= 0):
        raise ZeroCoefficient("every coordinate of f must be nonzero")
    lam = np.asarray(lambdas, dtype=complex)
    if lam.size != dim:
        raise ValueError("one eigenvalue per coordinate")
    norm2 = float(np.sum(c * c))
    f = c / np.sqrt(norm2)
    xm = np.outer(f, f).astype(complex)
    u = np.eye(dim, dtype=complex) + PHASE * xm
    # beyond the truncation P_n - E_n has size ~ |e^i - 1| c_n^2
    defect = f_coeffs.powered(2).scaled(abs(PHASE) / norm2)
    ps = IdentityDecomposition([Projection(u[:, [n]]) for n in range(dim)], defect)
    a = DiagonalizableOperator(lam, ps)
    return AmcInstance(a, TruncOperator(u, IDENTITY_TAIL), f, TruncOperator(xm))


def amc_pinched_diagonal(inst: AmcInstance) -> np.ndarray:
    """Diagonal of the coordinate pinching of ``X = f f*``."""
    pinched = pinch(inst.x_op, inst.coordinate_family)
    return np.real(np.diag(pinched.block))


def amc_forced_threshold(inst: AmcInstance) -> int:
    """First index past which each ``P_n`` has exactly one diagonal rank-one
    projection within distance 1/2, namely ``e_n e_n*``; ``-1`` if none.

    For rank-one projections ``||P - e_k e_k*|| = sqrt(1 - |<u, e_k>|^2)``.
    """
    u = inst.u.block
    w = np.abs(u) ** 2
    close = w > 0.75
    dim = u.shape[0]
    ok = np.array([close[n, n] and close[:, n].sum() == 1 for n in range(dim)])
    small = np.abs(inst.f) < 0.5
    for n0 in range(dim):
        if np.all(ok[n0:]) and np.all(small[n0:]):
            return n0
    return -1
