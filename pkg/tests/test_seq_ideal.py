import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from restdiag.seq_ideal import (COMPACT, FINITE_RANK, MAX_PREFIX, ZERO, IdealTag, SeqProfile,
                                TailModel, am_closure_member, ampliate, arith_mean,
                                big_o_dominates, dominance_constant, finite_profile, geometric,
                                ideal_square, in_ideal, power, power_log, schatten)


def prof(tail, prefix=()):
    return SeqProfile(tuple(prefix), tail)


def fitted_exponent(values, ns):
    slope, _ = np.polyfit(np.log(ns), np.log(values), 1)
    return slope


def exact_means(seq):
    return np.cumsum(seq) / np.arange(1, seq.size + 1)


# ----------------------------------------------------------------- types

def test_tail_terms_decay():
    for t in (power(0.5), power_log(1, 2), geometric(0.9), power(2, 3.0)):
        a, b = t.term(1e3), t.term(1e6)
        assert 0 <= b < a


def test_zero_scale_normalizes_to_zero_tail():
    assert power(2, 0.0).is_zero
    assert power_log(1.5, 0) == power(1.5)


def test_prefix_is_resorted_and_tail_start():
    s = SeqProfile((0.1, 1.0, 0.5), ZERO)
    assert s.prefix == (1.0, 0.5, 0.1)
    assert s.tail_start == 4


def test_tail_above_prefix_rejected():
    with pytest.raises(ValueError):
        SeqProfile((0.01,), power(1))


def test_negative_and_oversized_prefix_rejected():
    with pytest.raises(ValueError):
        SeqProfile((-1.0,), ZERO)
    with pytest.raises(ValueError):
        finite_profile(np.ones(MAX_PREFIX + 1))


def test_json_round_trip():
    s = SeqProfile((1.0, 0.5), power_log(1.0, 2, 0.1))
    d = json.loads(json.dumps(s.to_dict()))
    assert SeqProfile.from_dict(d) == s
    for tag in (FINITE_RANK, COMPACT, schatten(2.0)):
        assert IdealTag.from_dict(json.loads(json.dumps(tag.to_dict()))) == tag
        assert IdealTag.parse(str(tag)) == tag
    assert schatten(2.0).to_dict() == {"ideal": "schatten", "p": 2.0}


def test_tag_inclusions():
    samples = [prof(ZERO, [1, 0.5]), prof(power(3)), prof(power(1)), prof(power(0.6)),
               prof(power(0.3)), prof(geometric(0.5)), prof(power_log(0.7, 2))]
    chain = [FINITE_RANK, schatten(1), schatten(2), schatten(4), COMPACT]
    for s in samples:
        flags = [in_ideal(s, j) for j in chain]
        # once in a smaller ideal, in all the larger ones
        assert flags == sorted(flags)


# --------------------------------------------------------------- ampliate

def test_ampliate_finite_example():
    s = SeqProfile((1, 0.5, 0.25), ZERO)
    out = ampliate(s, 2)
    assert out.prefix == (1, 1, 0.5, 0.5, 0.25, 0.25)
    assert out.tail.is_zero


def test_ampliate_identity():
    s = prof(power(1.3), [2.0, 1.0])
    assert ampliate(s, 1) == s


def test_ampliate_power_tail_scale():
    s = prof(power(1.5))
    out = ampliate(s, 2)
    for n in (10 ** 4, 10 ** 5, 10 ** 6):
        exact = s.term(math.ceil(n / 2))
        assert out.term(n) == pytest.approx(exact, rel=1e-3)
    assert out.tail.scale == pytest.approx(2 ** 1.5)


def test_ampliate_composition():
    s = SeqProfile((1.0, 0.8, 0.3), geometric(0.6, 0.3 / 0.6 ** 3))
    lhs = ampliate(ampliate(s, 2), 3).terms(1000)
    rhs = ampliate(s, 6).terms(1000)
    # prefixes agree exactly; tails are asymptotic equivalents
    np.testing.assert_allclose(lhs[:18], rhs[:18], rtol=1e-12)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-300)


@pytest.mark.parametrize("m", [2, 3, 5])
@pytest.mark.parametrize("tail", [power(0.4), power(0.8), power(1.2), power_log(0.6, 1),
                                  geometric(0.3), ZERO])
def test_ampliation_invariance(tail, m):
    s = prof(tail, [1.0]) if not tail.is_zero else prof(tail, [1.0, 0.2])
    for j in (FINITE_RANK, schatten(1), schatten(2), COMPACT):
        assert in_ideal(s, j) == in_ideal(ampliate(s, m), j)


# ------------------------------------------------------------- arith mean

def test_arith_mean_finite_rank():
    out = arith_mean(SeqProfile((1.0,), ZERO))
    n = np.arange(1, 2000)
    np.testing.assert_allclose([out.term(k) for k in n[:50]], 1 / n[:50])
    assert out.tail.kind == "power" and out.tail.p == 1


def test_arith_mean_power2_numeric_oracle():
    out = arith_mean(prof(power(2)))
    assert out.tail.kind == "power" and out.tail.p == 1
    seq = np.arange(1, 10 ** 6 + 1, dtype=float) ** -2
    means = exact_means(seq)
    ns = np.unique(np.logspace(4, 6, 40).astype(int))
    assert abs(fitted_exponent(means[ns - 1], ns) + 1) < 0.02
    # the symbolic tail tracks the exact means
    assert out.term(10 ** 6) == pytest.approx(means[-1], rel=1e-3)


def test_arith_mean_power1_gives_log():
    out = arith_mean(prof(power(1)))
    assert out.tail.kind == "powerlog" and out.tail.p == 1 and out.tail.k == 1
    seq = 1 / np.arange(1, 10 ** 6 + 1, dtype=float)
    means = exact_means(seq)
    ns = np.unique(np.logspace(4, 6, 40).astype(int))
    y = ns * means[ns - 1]
    coef = np.polyfit(np.log(ns), y, 1)
    resid = y - np.polyval(coef, np.log(ns))
    assert np.max(np.abs(resid / y)) < 0.02
    # same order as the exact means: the ratio stays within a narrow band
    ratios = np.array([out.term(n) / means[n - 1] for n in ns])
    assert np.all((ratios > 0.9) & (ratios < 1.1))


def test_arith_mean_other_rules():
    assert arith_mean(prof(power(0.5))).tail.p == pytest.approx(0.5)
    assert arith_mean(prof(geometric(0.5))).tail == power(1, arith_mean(prof(geometric(0.5))).tail.scale)
    t = arith_mean(prof(power_log(0.5, 2))).tail
    assert (t.kind, t.p, t.k) == ("powerlog", 0.5, 2)
    t = arith_mean(prof(power_log(1, 1))).tail
    assert (t.kind, t.p, t.k) == ("powerlog", 1, 2)
    assert arith_mean(prof(power_log(2, 3))).tail.kind == "power"


@pytest.mark.parametrize("tail", [power(0.7), power(1), power(2), geometric(0.8), ZERO])
def test_arith_mean_non_increasing(tail):
    s = prof(tail, [3.0, 2.0, 2.0])
    vals = arith_mean(s).terms(10 ** 4)
    assert np.all(np.diff(vals) <= 1e-12 * vals[:-1])


# --------------------------------------------------------------- dominance

def test_dominance_examples():
    assert big_o_dominates(prof(power(2)), prof(power(1)))
    assert not big_o_dominates(prof(power(1)), prof(power(2)))
    assert not big_o_dominates(prof(power_log(1, 1)), prof(power(1)))
    assert big_o_dominates(prof(power(1)), prof(power_log(1, 1)))


def test_dominance_numeric_ratio_oracle():
    ns = np.logspace(3, 6, 20)
    ratio_up = power_log(1, 1).term(ns) / power(1).term(ns)
    assert np.all(np.diff(ratio_up) > 0)
    ratio_down = power(1).term(ns) / power_log(1, 1).term(ns)
    assert np.all(ratio_down <= ratio_down[0])


def test_dominance_witness_constant():
    m = dominance_constant(prof(power(2, 3.0)), prof(power(1)))
    assert m is not None and m >= 3.0 - 1e-12
    assert dominance_constant(prof(power(1)), prof(power(2))) is None


def test_dominance_zero_division():
    a = SeqProfile((1.0, 1.0), ZERO)
    b = SeqProfile((1.0,), ZERO)
    assert not big_o_dominates(a, b)
    assert big_o_dominates(b, a)


# ------------------------------------------------------------- membership

def test_in_ideal_examples():
    s = prof(power(0.75))
    assert in_ideal(s, schatten(2))
    assert not in_ideal(s, schatten(1))
    for j in (FINITE_RANK, schatten(1), schatten(3), COMPACT):
        assert in_ideal(SeqProfile((1.0, 0.5), ZERO), j)
    assert in_ideal(prof(geometric(0.5)), schatten(1))


def test_in_ideal_partial_sum_oracle():
    # partial sums of n^(-3/2) settle; those of n^(-3/4) keep growing
    n = np.arange(1, 10 ** 7 + 1, dtype=float)
    conv = np.cumsum(n ** -1.5)
    div = np.cumsum(n ** -0.75)
    assert conv[-1] - conv[10 ** 6 - 1] < 2e-3
    assert div[-1] - div[10 ** 6 - 1] > 50
    assert prof(power(0.75)).power_sum(2) == pytest.approx(float(conv[-1]), rel=1e-3)
    assert math.isinf(prof(power(0.75)).power_sum(1))


def test_powerlog_membership_strict():
    assert not in_ideal(prof(power_log(1, 0.5)), schatten(1))
    assert in_ideal(prof(power_log(1, 3)), schatten(1.01))


def test_am_closure():
    assert am_closure_member(prof(power(2)), FINITE_RANK)
    assert not am_closure_member(prof(power(1)), FINITE_RANK)
    assert not in_ideal(prof(power(2)), FINITE_RANK)


@pytest.mark.parametrize("tail", [power(0.3), power(0.6), power(1.1), power(2.5),
                                  power_log(0.9, 1), geometric(0.2), ZERO])
@pytest.mark.parametrize("j", [FINITE_RANK, schatten(1), schatten(2), COMPACT])
def test_membership_implies_am_closure(tail, j):
    s = prof(tail, [1.0]) if not tail.is_zero else prof(tail, [1.0])
    if in_ideal(s, j):
        assert am_closure_member(s, j)
    if j.is_am_closed:
        assert am_closure_member(s, j) == in_ideal(s, j)


def test_ideal_square():
    assert ideal_square(schatten(2)) == schatten(1)
    assert ideal_square(FINITE_RANK) == FINITE_RANK
    assert ideal_square(COMPACT) == COMPACT
    sub = ideal_square(schatten(1))
    assert sub.sub_schatten
    assert in_ideal(prof(power(2.5)), sub) and not in_ideal(prof(power(1.5)), sub)


TAILS = st.one_of(
    st.builds(power, st.floats(0.2, 3.0)),
    st.builds(power_log, st.floats(0.2, 3.0), st.integers(0, 3)),
    st.builds(geometric, st.floats(0.05, 0.95)),
    st.just(ZERO),
)
TAGS = st.sampled_from([FINITE_RANK, schatten(1), schatten(1.5), schatten(2), schatten(4), COMPACT])


@settings(max_examples=150, deadline=None)
@given(TAILS, TAILS, TAGS)
def test_membership_monotone_under_domination(ta, tb, j):
    a, b = prof(ta.scaled(1e-3)), prof(tb.scaled(1e-3))
    if big_o_dominates(a, b) and in_ideal(b, j):
        assert in_ideal(a, j)
