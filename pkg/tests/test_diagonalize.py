import numpy as np
import pytest

from restdiag.constructions import build_amc_counterexample
from restdiag.corpus import haar_unitary, random_partition, round_trip_instance, small_unitary
from restdiag.diagonalize import (MARGIN, _tail_norms, are_j_equivalent, assemble_unitary,
                                  basis_difference_operator, build_partial_isometry,
                                  conjugate_decompositions, dominant_diagonal_family, find_n0,
                                  find_n1, j2_condition, orthogonalize, verify_conditions,
                                  verify_reverse)
from restdiag.errors import (CodimNonzero, ConditionsFail, NoValidIndex, NotCompactDefect,
                             NotDiagonalizing, NotOrthonormal, OverlapNotFiniteRank, StageError)
from restdiag.operators import (IDENTITY_TAIL, ZERO_TAIL, DiagonalizableOperator,
                                IdentityDecomposition, Projection, TruncOperator, is_unitary,
                                op_in_ideal, singular_values)
from restdiag.permutations import IndexPermutation, permutation_unitary
from restdiag.projections import ess_codim
from restdiag.seq_ideal import (COMPACT, FINITE_RANK, ZERO, SeqProfile, geometric, in_ideal, power,
                                schatten)

S1, S2 = schatten(1), schatten(2)


def coord_family(dim, groups, tail_index=-1, defect=None):
    tail_index = tail_index % len(groups)
    return IdentityDecomposition(
        [Projection.coordinate(dim, g, IDENTITY_TAIL if i == tail_index else ZERO_TAIL)
         for i, g in enumerate(groups)], defect)


def rotated(w, es, defect=None):
    return IdentityDecomposition([Projection(w[:, list(e.coords)], e.tail) for e in es], defect)


def rot2(theta):
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def corpus(n, seed=0, **kw):
    rng = np.random.default_rng(seed)
    return [round_trip_instance(rng, dim=int(rng.integers(24, 64)),
                                parts=int(rng.integers(4, 9)), **kw) for _ in range(n)]


# --------------------------------------------------------- verify_conditions

def test_conditions_trivial():
    es = coord_family(6, [[0, 1], [2], [3, 4, 5]])
    rep = verify_conditions(es, es, FINITE_RANK)
    assert rep.passes and all(rep.per_pair_in_ideal)
    assert np.allclose(rep.series_one.block, 0) and np.allclose(rep.series_two.block, 0)
    assert rep.series_one.tail.is_zero


def test_conditions_finite_rank_perturbation():
    rng = np.random.default_rng(1)
    dim = 12
    k = np.zeros((dim, dim), dtype=complex)
    k[:3, :3] = 0.2 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    w, _, vh = np.linalg.svd(np.eye(dim) + k - k.conj().T)
    w = w @ vh
    es = coord_family(dim, [[0, 4], [1, 2, 5], [3, 6, 7, 8, 9, 10, 11]])
    ps = rotated(w, es)
    rep = verify_conditions(ps, es, FINITE_RANK)
    assert rep.member_one and rep.member_two


def test_conditions_amc_instance_fails_strictly():
    inst = build_amc_counterexample(SeqProfile((), power(1)), np.linspace(1, 2, 128), 128)
    rep = verify_conditions(inst.a.spectral, inst.coordinate_family, FINITE_RANK)
    assert not rep.member_two
    assert rep.residual_rank(2) == 128


def test_conditions_identity_tail_mismatch():
    ps = coord_family(4, [[0, 1], [2, 3]], tail_index=0)
    es = coord_family(4, [[0, 1], [2, 3]], tail_index=1)
    rep = verify_conditions(ps, es, COMPACT)
    assert not rep.member_one and not rep.member_two
    assert rep.per_pair_in_ideal == [False, False]


def test_conditions_defect_decides_membership():
    rng = np.random.default_rng(2)
    a, es, _ = round_trip_instance(rng, dim=20, parts=4)
    slow = IdentityDecomposition(list(a.spectral), SeqProfile((), power(0.75, 0.01)))
    assert verify_conditions(slow, es, S2).passes
    assert not verify_conditions(slow, es, S1).member_one


def pairs_follow_from_series(rep):
    return not (rep.member_one and rep.member_two) or all(rep.per_pair_in_ideal)


def test_pairwise_membership_follows_from_series():
    tags = [FINITE_RANK, S1, S2, COMPACT]
    for i, (a, es, _) in enumerate(corpus(12, seed=3)):
        for d in (None, SeqProfile((), power(0.6, 0.05)), SeqProfile((), geometric(0.5, 0.1))):
            ps = IdentityDecomposition(list(a.spectral), d)
            for j in tags:
                assert pairs_follow_from_series(verify_conditions(ps, es, j))


def random_finite_instance(rng):
    """Families of at most 8 parts; tails, defects and tags vary."""
    dim = int(rng.integers(8, 40))
    parts = int(rng.integers(2, 9))
    groups = random_partition(rng, dim, parts)
    t_e = parts - 1
    t_p = t_e if rng.random() < 0.7 else int(rng.integers(0, parts))
    es = coord_family(dim, groups, t_e)
    w = small_unitary(rng, dim, 0.3, 0.6)
    defect = [None, SeqProfile((), power(rng.uniform(0.3, 2.5), 0.01)),
              SeqProfile((), geometric(0.5, 0.01))][int(rng.integers(0, 3))]
    ps = IdentityDecomposition([Projection(w[:, g], IDENTITY_TAIL if i == t_p else ZERO_TAIL)
                                for i, g in enumerate(groups)], defect)
    j = [FINITE_RANK, S1, S2, schatten(3), COMPACT][int(rng.integers(0, 5))]
    return ps, es, j


def test_finite_spectrum_equivalence():
    rng = np.random.default_rng(4)
    outcomes = set()
    for _ in range(100):
        ps, es, j = random_finite_instance(rng)
        rep = verify_conditions(ps, es, j)
        assert all(rep.per_pair_in_ideal) == rep.passes
        outcomes.add(rep.passes)
    assert outcomes == {True, False}


# ------------------------------------------------------------------ find_n0

def test_n0_orthogonal_family():
    assert find_n0(coord_family(5, [[0], [1, 2], [3, 4]])) == 0


def test_n0_planted_overlap():
    dim = 8
    parts = [Projection.coordinate(dim, [0, 1]), Projection.coordinate(dim, [2, 3]),
             Projection.coordinate(dim, [3, 4]), Projection.coordinate(dim, [5]),
             Projection.coordinate(dim, [6, 7], IDENTITY_TAIL)]
    es = IdentityDecomposition(parts, check=False)
    # the overlapping pair is (2, 3) in 1-based numbering
    assert find_n0(es) == 2


def test_n0_non_compact_defect():
    parts = [Projection.coordinate(3, [0], IDENTITY_TAIL), Projection.coordinate(3, [1, 2],
                                                                                  IDENTITY_TAIL)]
    with pytest.raises(NotCompactDefect):
        find_n0(IdentityDecomposition(parts, check=False))


# ----------------------------------------------------------- orthogonalize

def test_orthogonalize_noop():
    es = coord_family(5, [[0, 3], [1], [2, 4]])
    out = orthogonalize(es)
    assert [p.coords for p in out] == [p.coords for p in es]


def test_orthogonalize_shared_coordinate():
    es = IdentityDecomposition([Projection.coordinate(4, [0, 1]), Projection.coordinate(4, [1, 2]),
                                Projection.coordinate(4, [3], IDENTITY_TAIL)], check=False)
    out = orthogonalize(es)
    assert out[1].coords == (2,)


def test_orthogonalize_planted_overlaps():
    rng = np.random.default_rng(5)
    dim = 64
    groups = random_partition(rng, dim, 6)
    parts = []
    for i, g in enumerate(groups):
        extra = rng.choice(dim, size=3, replace=False).tolist()
        parts.append(Projection.coordinate(dim, sorted(set(g) | set(extra)),
                                           IDENTITY_TAIL if i == 5 else ZERO_TAIL))
    es = IdentityDecomposition(parts, check=False)
    out = orthogonalize(es)
    blocks = [p.block for p in out]
    for a in range(6):
        for b in range(a + 1, 6):
            assert np.linalg.norm(blocks[a] @ blocks[b]) == 0
        assert np.linalg.matrix_rank(blocks[a] - es[a].block) <= 18


def test_orthogonalize_infinite_overlap():
    parts = [Projection.coordinate(3, [0], IDENTITY_TAIL), Projection.coordinate(3, [1, 2],
                                                                                  IDENTITY_TAIL)]
    with pytest.raises(OverlapNotFiniteRank):
        orthogonalize(IdentityDecomposition(parts, check=False))


# ------------------------------------------------------------------ find_n1

def test_n1_equal_families():
    es = coord_family(6, [[0, 1], [2, 3], [4, 5]])
    assert find_n1(es, es, 0) == 0


def test_n1_perturbed_instance():
    rng = np.random.default_rng(6)
    a, es, _ = round_trip_instance(rng, dim=40, parts=5, size=0.9)
    n1 = find_n1(a.spectral, es, 0)
    one, two = _tail_norms(a.spectral, es, n1)
    assert one < 1 - MARGIN and two < 1 - MARGIN


def test_n1_adversarial():
    # the declared defect keeps norm 1 past the truncation, so no split index works
    dim = 6
    defect = SeqProfile((1.0,) * (dim + 10), ZERO)
    es = IdentityDecomposition([Projection.coordinate(dim, [0, 1, 2]),
                                Projection.coordinate(dim, [3, 4, 5])], defect)
    assert verify_conditions(es, es, FINITE_RANK).passes
    with pytest.raises(NoValidIndex):
        find_n1(es, es, 0)


# -------------------------------------------------------- partial isometry

def test_partial_isometry_equal_families():
    es = coord_family(5, [[0], [1, 2], [3, 4]])
    v = build_partial_isometry(es, es, 1)
    expected = es[1].block + es[2].block
    np.testing.assert_allclose(v.op.block, expected, atol=1e-12)


def test_partial_isometry_rotation():
    r = rot2(0.3)
    ps = IdentityDecomposition([Projection(r[:, [0]]), Projection(r[:, [1]], IDENTITY_TAIL)])
    es = coord_family(2, [[0], [1]])
    v = build_partial_isometry(ps, es, 0)
    np.testing.assert_allclose(v.op.block, r.T, atol=1e-10)
    for p, e in zip(ps, es):
        np.testing.assert_allclose((v.op @ p.op @ v.op.H).block, e.block, atol=1e-10)


def test_partial_isometry_random():
    rng = np.random.default_rng(7)
    a, es, _ = round_trip_instance(rng, dim=96, parts=6, size=0.4)
    ps = a.spectral
    n1 = find_n1(ps, es, 0)
    v = build_partial_isometry(ps, es, n1)
    p0 = sum(p.block for p in list(ps)[n1:])
    e0 = sum(e.block for e in list(es)[n1:])
    np.testing.assert_allclose(v.initial_projection().block, p0, atol=1e-8)
    np.testing.assert_allclose(v.final_projection().block, e0, atol=1e-8)
    for p, e in list(zip(ps, es))[n1:]:
        assert np.linalg.norm((v.op @ p.op @ v.op.H).block - e.block, 2) <= 1e-8
    p_op = TruncOperator(p0, IDENTITY_TAIL)
    assert op_in_ideal(v.op - p_op, FINITE_RANK)


# --------------------------------------------------------- assemble_unitary

def test_assemble_diagonal_input():
    es = coord_family(5, [[0, 2], [1], [3, 4]])
    a = DiagonalizableOperator([1.0, 2.0, 3.0], es)
    cert = assemble_unitary(a, es, FINITE_RANK)
    np.testing.assert_allclose(cert.unitary.block, np.eye(5), atol=1e-12)
    assert cert.check(FINITE_RANK)


def test_assemble_round_trip():
    rng = np.random.default_rng(8)
    a, es, _ = round_trip_instance(rng, dim=64, parts=5)
    cert = assemble_unitary(a, es, S1)
    assert cert.diag_residual <= 1e-8
    assert is_unitary(cert.unitary, 1e-9)
    assert in_ideal(cert.u_minus_i_profile, S1)
    # independent re-check of the diagonalization
    ua = cert.unitary.block @ a.op().block @ cert.unitary.block.conj().T
    assert np.linalg.norm(ua - np.diag(np.diag(ua)), 2) <= 1e-8


def test_assemble_fails_on_amc_instance():
    inst = build_amc_counterexample(SeqProfile((), power(1)), np.linspace(1, 2, 64), 64)
    with pytest.raises(StageError) as err:
        assemble_unitary(inst.a, inst.coordinate_family, FINITE_RANK)
    assert err.value.stage == "verify_conditions"


def test_certificates_are_sound():
    for a, es, _ in corpus(8, seed=9):
        cert = assemble_unitary(a, es, S1)
        u = cert.unitary
        assert is_unitary(u, 1e-9)
        ua = u @ a.op() @ u.H
        off = ua.block - np.diag(np.diag(ua.block))
        assert np.linalg.norm(off, 2) <= 1e-8
        assert in_ideal(cert.u_minus_i_profile, S1)
        for p, e in zip(a.spectral, cert.diagonal_family):
            moved = u @ p.op @ u.H
            assert np.linalg.norm(moved.block - e.block, 2) <= 1e-8


def test_assemble_with_codimension_imbalance():
    # E_1 deliberately short by one coordinate that E_2 absorbs
    rng = np.random.default_rng(10)
    dim = 16
    groups = [[0, 1, 2, 3], [4, 5, 6], list(range(7, dim))]
    es_true = coord_family(dim, groups)
    w = small_unitary(rng, dim, 0.2, 0.5)
    ps = rotated(w, es_true, SeqProfile((), geometric(0.5, 0.2)))
    a = DiagonalizableOperator([0.0, 1.0, 2.0], ps)
    es = coord_family(dim, [[0, 1, 2], [3, 4, 5, 6], list(range(7, dim))])
    assert [ess_codim(p, e).value for p, e in zip(ps, es)] == [1, -1, 0]
    cert = assemble_unitary(a, es, S1)
    assert cert.balanced and cert.check(S1)


@pytest.mark.parametrize("seed", range(3))
def test_permutation_stability(seed):
    rng = np.random.default_rng(20 + seed)
    a, es, _ = round_trip_instance(rng, dim=32, parts=5)
    assemble_unitary(a, es, S1)
    sigma = IndexPermutation.from_cycles([rng.choice(np.arange(1, 33), 4, replace=False).tolist()])
    us = permutation_unitary(sigma, 32).block
    ps2 = IdentityDecomposition([Projection(us @ p.basis, p.tail) for p in a.spectral],
                                a.spectral.defect)
    a2 = DiagonalizableOperator(a.eigenvalues, ps2)
    cert = assemble_unitary(a2, es, S1)
    assert cert.check(S1)


# ----------------------------------------------------------- verify_reverse

def test_reverse_identity():
    es = coord_family(4, [[0], [1, 2], [3]])
    a = DiagonalizableOperator([1, 2, 3], es)
    rep = verify_reverse(a, TruncOperator.identity(4), S1)
    assert rep.passes and np.allclose(rep.series_one.block, 0)


def test_reverse_round_trip():
    for a, es, _ in corpus(4, seed=11):
        cert = assemble_unitary(a, es, S1)
        rep = verify_reverse(a, cert.unitary, S1)
        assert rep.passes and rep.amc_member_one and rep.amc_member_two


def test_reverse_amc_instance():
    inst = build_amc_counterexample(SeqProfile((), power(1)), np.linspace(1, 2, 128), 128)
    rep = verify_reverse(inst.a, inst.u.H, FINITE_RANK)
    assert not rep.member_two
    assert rep.amc_member_one and rep.amc_member_two


def test_reverse_not_diagonalizing():
    rng = np.random.default_rng(12)
    a, es, _ = round_trip_instance(rng, dim=16, parts=3)
    with pytest.raises(NotDiagonalizing):
        verify_reverse(a, TruncOperator(haar_unitary(rng, 16), IDENTITY_TAIL), S1)


# --------------------------------------------------------------- squares

def test_j2_trivial_and_mismatch():
    es = coord_family(4, [[0, 1], [2, 3]])
    assert j2_condition(es, es, S2)
    ps = coord_family(4, [[0, 1], [2, 3]], tail_index=0)
    assert not j2_condition(ps, es, S2)


def test_j2_matches_conditions_on_corpus():
    for a, es, _ in corpus(10, seed=13):
        for d in (None, SeqProfile((), power(0.75, 0.01)), SeqProfile((), power(0.4, 0.01))):
            ps = IdentityDecomposition(list(a.spectral), d)
            rep = verify_conditions(ps, es, S2)
            assert j2_condition(ps, es, S2) == rep.passes
            # square summability of the pair differences
            hs = d is None or np.isfinite(d.power_sum(2))
            assert hs == rep.passes


# ---------------------------------------------------- conjugate decompositions

def test_conjugate_decompositions_trivial():
    es = coord_family(4, [[0], [1, 2], [3]])
    u = conjugate_decompositions(es, es, FINITE_RANK)
    np.testing.assert_allclose(u.block, np.eye(4), atol=1e-12)


def test_conjugate_decompositions_rotated():
    rng = np.random.default_rng(14)
    dim = 18
    es = coord_family(dim, [[0, 1, 2], [3, 4, 5, 6], list(range(7, dim))])
    ps = rotated(small_unitary(rng, dim, 0.3, 0.5), es)
    u = conjugate_decompositions(ps, es, FINITE_RANK)
    assert is_unitary(u)
    for p, e in zip(ps, es):
        assert np.linalg.norm((u @ p.op @ u.H).block - e.block, 2) <= 1e-8
    assert op_in_ideal(u - TruncOperator.identity(dim), FINITE_RANK)


def test_conjugate_decompositions_codim():
    ps = coord_family(4, [[0, 1], [2, 3]])
    es = coord_family(4, [[0], [1, 2, 3]])
    with pytest.raises(CodimNonzero) as err:
        conjugate_decompositions(ps, es, FINITE_RANK)
    assert err.value.index == 1


def test_conjugate_decompositions_conditions():
    ps = IdentityDecomposition(list(coord_family(4, [[0, 1], [2, 3]])),
                               SeqProfile((), power(0.5, 0.01)))
    with pytest.raises(ConditionsFail):
        conjugate_decompositions(ps, coord_family(4, [[0, 1], [2, 3]]), S2)


# ------------------------------------------------------------------ bases

def pairwise_rotated(dim, angles):
    f = np.eye(dim, dtype=complex)
    for k, t in enumerate(angles):
        i, j = 2 * k, 2 * k + 1
        f[np.ix_([i, j], [i, j])] = rot2(t)
    return f


def test_basis_difference_zero():
    e = np.eye(4)
    assert np.allclose(basis_difference_operator(e, e).block, 0)


def test_basis_difference_power_profile():
    dim = 40
    # ||e_n - f_n|| = 2 sin(theta/2), chosen to equal 1/n for the pair index n
    angles = [2 * np.arcsin(1 / (2 * n)) for n in range(1, dim // 2 + 1)]
    f = pairwise_rotated(dim, angles)
    t = basis_difference_operator(np.eye(dim), f, np.eye(dim),
                                  tail_gap=SeqProfile((), power(1, 0.5)))
    s = np.linalg.svd(t.block, compute_uv=False)
    # I - R(theta) is a scaled rotation: both singular values equal 2 sin(theta/2) = 1/n
    expected = np.repeat([1 / n for n in range(1, dim // 2 + 1)], 2)
    np.testing.assert_allclose(s, expected, atol=1e-12)
    assert singular_values(t).tail.kind == "power"


def test_basis_difference_rank_one():
    e = np.eye(5)
    f = e.copy()
    f[:, 0] = -1 * e[:, 0]
    assert np.linalg.matrix_rank(basis_difference_operator(e, f).block) == 1


def test_basis_difference_not_orthonormal():
    with pytest.raises(NotOrthonormal):
        basis_difference_operator(np.eye(3), 2 * np.eye(3))


def test_basis_difference_g_basis_changes_columns():
    rng = np.random.default_rng(15)
    g = haar_unitary(rng, 4)
    f = haar_unitary(rng, 4)
    t = basis_difference_operator(np.eye(4), f, g)
    np.testing.assert_allclose(t.block @ g, np.eye(4) - f, atol=1e-12)


def test_j_equivalence_examples():
    e = np.eye(6)
    f = pairwise_rotated(6, [0.1, 0.05, 0.02])
    assert are_j_equivalent(e, f, SeqProfile((), power(1, 0.001)), S2)
    assert not are_j_equivalent(e, f, SeqProfile((), power(0.5, 0.001)), S2)
    for j in (FINITE_RANK, S1, S2, COMPACT):
        assert are_j_equivalent(e, e, None, j)


def test_dominant_family_guess():
    rng = np.random.default_rng(16)
    a, es, _ = round_trip_instance(rng, dim=30, parts=4, size=0.2)
    guess = dominant_diagonal_family(a.spectral)
    assert [g.coords for g in guess] == [e.coords for e in es]
