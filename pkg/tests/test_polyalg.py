import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factorank.polyalg import (
    COMMUTATIVE,
    NONE,
    SYMMETRIC,
    TRACIAL,
    CMonomial,
    DegreeError,
    Polynomial,
    all_words,
    canonical_word,
    enumerate_words,
    involution,
    make_word,
    monomials_of_degree,
    multinomial_dm,
    orbit,
)

MODES = [NONE, SYMMETRIC, TRACIAL, COMMUTATIVE]


# ---------------------------------------------------------------- involution

def test_involution_reverses():
    assert involution((1, 2, 3)) == (3, 2, 1)


def test_involution_fixes_empty_and_palindromes():
    assert involution(()) == ()
    assert involution((1, 1)) == (1, 1)


def test_make_word_rejects_out_of_range():
    with pytest.raises(ValueError):
        make_word([0, 1])
    with pytest.raises(ValueError):
        make_word([3], n=2)


# ---------------------------------------------------------------- canonical forms

def test_canonical_tracial_brute_force():
    # rotations of x1x2x1 and of its reverse: 121, 211, 112 -> lex-min 112
    rots = {(1, 2, 1)[k:] + (1, 2, 1)[:k] for k in range(3)}
    rots |= {involution(w) for w in rots}
    assert min(rots) == (1, 1, 2)
    assert canonical_word((1, 2, 1), TRACIAL) == (1, 1, 2)


def test_canonical_symmetric_and_plain():
    assert canonical_word((2, 1), SYMMETRIC) == (1, 2)
    assert canonical_word((2, 1), NONE) == (2, 1)


def test_canonical_commutative_sorts():
    assert canonical_word((3, 1, 2, 1), COMMUTATIVE) == (1, 1, 2, 3)


def test_tracial_separates_inequivalent_words():
    # x1x1x2x2 and x1x2x1x2 are different traces in general
    assert canonical_word((1, 1, 2, 2), TRACIAL) != canonical_word((1, 2, 1, 2), TRACIAL)


words = st.lists(st.integers(1, 3), max_size=7).map(tuple)


def _generators(mode):
    gens = []
    if mode.commutative:
        gens.append(lambda w: w[1:] + w[:1])
        gens.append(lambda w: w[:2][::-1] + w[2:])
    else:
        if mode.symmetric:
            gens.append(involution)
        if mode.tracial:
            gens.append(lambda w: w[1:] + w[:1])
    return gens


@settings(max_examples=150, deadline=None)
@given(w=words, mode=st.sampled_from(MODES))
def test_canonical_orbit_constant_and_idempotent(w, mode):
    c = canonical_word(w, mode)
    assert canonical_word(c, mode) == c
    for g in _generators(mode):
        assert canonical_word(g(w), mode) == c
    assert c in orbit(w, mode)
    assert c == min(orbit(w, mode))


@settings(max_examples=100, deadline=None)
@given(w=words)
def test_involution_is_an_involution(w):
    assert involution(involution(w)) == w
    assert len(involution(w)) == len(w)


# ---------------------------------------------------------------- enumeration

def test_enumerate_plain_n2_t2():
    assert enumerate_words(2, 2, NONE) == [(), (1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]


@pytest.mark.parametrize("n,t", [(2, 3), (3, 2), (4, 3)])
def test_enumerate_plain_count(n, t):
    assert len(enumerate_words(n, t, NONE)) == (n ** (t + 1) - 1) // (n - 1)


@pytest.mark.parametrize("n,t", [(1, 4), (2, 2), (3, 3), (4, 2)])
def test_enumerate_commutative_count(n, t):
    assert len(enumerate_words(n, t, COMMUTATIVE)) == math.comb(n + t, t)


def test_enumerate_tracial_degree_one():
    assert enumerate_words(3, 1, TRACIAL) == [(), (1,), (2,), (3,)]


@pytest.mark.parametrize("mode", MODES)
def test_enumerate_is_sorted_and_distinct(mode):
    ws = enumerate_words(3, 4, mode)
    assert len(ws) == len(set(ws))
    assert all(canonical_word(w, mode) == w for w in ws)
    # every word has exactly one representative
    assert {canonical_word(w, mode) for w in all_words(3, 4)} == set(ws)


def test_tracial_class_count_matches_necklaces():
    # classes of degree 4 over 2 letters under rotation+reversal: bracelets B(2,4) = 6
    ws = [w for w in enumerate_words(2, 4, TRACIAL) if len(w) == 4]
    assert len(ws) == 6


def test_degree_cap():
    with pytest.raises(DegreeError):
        all_words(2, 17)


# ---------------------------------------------------------------- monomials

@pytest.mark.parametrize("alpha,expected", [((2, 1), 3), ((1, 1, 1), 6), ((4,), 1)])
def test_multinomial_dm(alpha, expected):
    assert multinomial_dm(CMonomial(alpha)) == expected


def test_multinomial_counts_word_fibres():
    fibres = Counter(tuple(sorted(w)) for w in all_words(3, 4) if len(w) == 4)
    for m in monomials_of_degree(3, 4):
        assert multinomial_dm(CMonomial.from_word(m, 3)) == fibres[m]


@pytest.mark.parametrize("n,l", [(2, 3), (3, 4), (4, 2)])
def test_multinomial_sum(n, l):
    total = sum(multinomial_dm(CMonomial.from_word(m, n)) for m in monomials_of_degree(n, l))
    assert total == n ** l


def test_multinomial_overflow():
    with pytest.raises(OverflowError):
        multinomial_dm(CMonomial((40, 40)))


def test_cmonomial_product_degree():
    a, b = CMonomial((2, 0, 1)), CMonomial((0, 1, 1))
    assert (a * b).degree == a.degree + b.degree
    assert CMonomial.from_word((3, 1, 1), 3) == CMonomial((2, 0, 1))


# ---------------------------------------------------------------- polynomials

def test_polynomial_drops_zero_terms():
    p = Polynomial({(1,): 1.0, (2,): 0.0})
    assert p.terms == {(1,): 1.0}
    assert (p - p).terms == {}


def test_polynomial_product_degree_and_star():
    x1, x2 = Polynomial.var(1), Polynomial.var(2)
    p = x1 * x2 + 2
    q = x2 - x1 * x1
    assert (p * q).degree == p.degree + q.degree
    assert (x1 * x2).star() == x2 * x1
    assert (x1 * x2 + x2 * x1).is_symmetric()
    assert not (x1 * x2).is_symmetric()
