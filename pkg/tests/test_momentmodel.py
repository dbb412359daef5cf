import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given, settings
from hypothesis import strategies as st

from factorank.instances import circulant5, circulant5_factors
from factorank.momentmodel import (
    ConflictingFix,
    EmptyBlock,
    LevelError,
    ModeError,
    atomic_moments,
    bilinear_block,
    ideal_rows,
    localizing_block,
    moment_block,
    new_table,
    scalar_positivity_rows,
    tensor_block,
    trace_moments,
)
from factorank.polyalg import COMMUTATIVE, TRACIAL, Polynomial, all_words, canonical_word

X = Polynomial.var
A21 = np.array([[1.0, 0.5], [0.5, 1.0]])


def table_21(t):
    fixes = [((i + 1, j + 1), A21[i, j]) for i in range(2) for j in range(2)]
    return new_table(2, t, TRACIAL, fixes)


def coeff_dict(block, i, j):
    row = block.linear.getrow(i * block.dim + j).tocoo()
    return {int(c): float(v) for c, v in zip(row.col, row.data)}


# ---------------------------------------------------------------- tables

def test_table_example_data():
    tab = table_21(1)
    assert tab.var_words == [(), (1,), (2,)]
    assert len(tab.fixed) == 3


def test_table_conflicting_fix():
    with pytest.raises(ConflictingFix):
        new_table(2, 1, TRACIAL, [((1, 2), 0.5), ((2, 1), 0.6)])


def test_table_merges_consistent_fixes():
    tab = new_table(2, 1, TRACIAL, [((1, 2), 0.5), ((2, 1), 0.5 + 1e-14)])
    assert tab.fixed == {(1, 2): 0.5}


def test_table_commutative_univariate():
    tab = new_table(1, 2, COMMUTATIVE)
    assert tab.var_words == [(), (1,), (1, 1), (1, 1, 1), (1, 1, 1, 1)]


def test_table_rejects_fix_above_level():
    with pytest.raises(LevelError):
        new_table(2, 1, TRACIAL, [((1, 2, 1), 1.0)])


# ---------------------------------------------------------------- moment blocks

def test_moment_block_hankel():
    tab = new_table(1, 1, COMMUTATIVE)
    B = moment_block(tab)
    assert B.dim == 2
    assert coeff_dict(B, 0, 0) == {0: 1.0}
    assert coeff_dict(B, 0, 1) == {1: 1.0} == coeff_dict(B, 1, 0)
    assert coeff_dict(B, 1, 1) == {2: 1.0}
    assert not B.constant.any()


def test_moment_block_data_corner():
    B = moment_block(table_21(1))
    assert B.dim == 3
    np.testing.assert_allclose(B.constant[1:, 1:], A21)
    assert B.is_symmetric()


def test_moment_block_degree_four_entry():
    tab = table_21(2)
    B = moment_block(tab)
    idx = tab.basis(2)
    k = idx.index((1, 2))
    expected = tab.var(canonical_word((2, 1, 1, 2), TRACIAL))
    assert coeff_dict(B, k, k) == {expected: 1.0}


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_moment_block_symmetric_expressions(seed):
    rng = np.random.default_rng(seed)
    tab = new_table(3, 2, TRACIAL)
    B = moment_block(tab)
    i, j = rng.integers(0, B.dim, size=2)
    assert coeff_dict(B, i, j) == coeff_dict(B, j, i)
    assert B.constant[i, j] == B.constant[j, i]


# ---------------------------------------------------------------- localizing blocks

def test_localizing_simple_cpsd_localizer():
    tab = table_21(1)
    g = Polynomial({(1,): 1.0, (1, 1): -1.0})
    B = localizing_block(tab, g)
    assert B.dim == 1
    assert coeff_dict(B, 0, 0) == {tab.var((1,)): 1.0}
    assert B.constant[0, 0] == pytest.approx(-1.0)


def test_localizing_one_is_moment_block():
    tab = table_21(2)
    B1, B2 = localizing_block(tab, Polynomial.const(1.0)), moment_block(tab)
    np.testing.assert_array_equal(B1.constant, B2.constant)
    assert (B1.linear != B2.linear).nnz == 0


def test_localizing_gv_corner():
    # g = v^T A v - (x1 + x2)^2 with v = (1, 1): corner entry 3 L(1) - 1 - 2 * 1/2 - 1
    tab = table_21(2)
    g = Polynomial({(): 3.0, (1, 1): -1.0, (1, 2): -1.0, (2, 1): -1.0, (2, 2): -1.0})
    B = localizing_block(tab, g)
    assert B.dim == 3
    assert coeff_dict(B, 0, 0) == {0: 3.0}
    assert B.constant[0, 0] == pytest.approx(-3.0)


def test_localizing_empty():
    tab = table_21(1)
    with pytest.raises(EmptyBlock):
        localizing_block(tab, X(1) * X(1) * X(2))


# ---------------------------------------------------------------- bilinear blocks

def test_bilinear_trivial_is_moment_block():
    tab = table_21(2)
    B = bilinear_block(tab, Polynomial.const(1.0), Polynomial.const(1.0))
    np.testing.assert_array_equal(B.constant, moment_block(tab).constant)


def test_bilinear_degree_bookkeeping():
    tab = table_21(2)
    g = Polynomial({(1,): 1.0, (1, 1): -1.0})
    g2 = Polynomial({(2,): 1.0, (2, 2): -1.0})
    assert bilinear_block(tab, g, g2).dim == 1


def test_bilinear_cross_family_entry():
    # psd cross family with m = n = 1: L(x1 (A11 - x2)) = 2 L(x1) - L(x1 x2)
    tab = new_table(2, 1, TRACIAL, [((1, 2), 0.75)])
    g2 = Polynomial({(): 2.0, (2,): -1.0})
    B = bilinear_block(tab, X(1), g2)
    assert B.dim == 1
    assert coeff_dict(B, 0, 0) == {tab.var((1,)): 2.0}
    assert B.constant[0, 0] == pytest.approx(-0.75)


# ---------------------------------------------------------------- rows

def test_ideal_rows_sum_to_identity():
    tab = new_table(2, 1, TRACIAL)
    rows = ideal_rows(tab, [Polynomial({(): 1.0, (1,): -1.0, (2,): -1.0})])
    # p in {1, x1, x2} with deg(p h) <= 2
    assert len(rows) == 3
    first = [r for r in rows if r.coeffs.get(0)][0]
    assert first.coeffs == {0: 1.0, tab.var((1,)): -1.0, tab.var((2,)): -1.0}


def test_ideal_rows_zero_entry():
    tab = new_table(2, 2, COMMUTATIVE)
    rows = ideal_rows(tab, [X(1) * X(2)])
    assert any(r.coeffs == {tab.var((1, 2)): 1.0} for r in rows)
    # multipliers are all monomials of degree <= 2
    assert len(rows) == 6


def test_ideal_rows_empty():
    assert ideal_rows(table_21(1), []) == []


def test_scalar_positivity_rows():
    tab = new_table(2, 2, COMMUTATIVE, [((1, 2), 0.5)])
    rows = scalar_positivity_rows(tab, [])
    assert len(rows) == 15 - 1  # the fixed class x1x2 gives a constant row, dropped
    g = Polynomial({(): 0.5, (1, 2): -1.0})
    rows = scalar_positivity_rows(tab, [g])
    target = {tab.var((1, 1, 2, 2)): -1.0}
    assert any(r.coeffs == target and r.constant == pytest.approx(0.25) for r in rows)


def test_scalar_positivity_needs_commutative():
    with pytest.raises(ModeError):
        scalar_positivity_rows(table_21(1), [])


# ---------------------------------------------------------------- tensor blocks

def test_tensor_block_cross_entry():
    A = np.array([[2.0, 0.3], [0.3, 1.5]])
    tab = new_table(2, 2, COMMUTATIVE)
    B = tensor_block(tab, A, 2)
    monos = B.index
    k = monos.index((1, 2))
    assert B.constant[k, k] == pytest.approx((A[0, 0] * A[1, 1] + A[0, 1] ** 2) / 2)


def test_tensor_block_univariate():
    tab = new_table(1, 2, COMMUTATIVE)
    B = tensor_block(tab, np.array([[3.0]]), 2)
    assert B.dim == 1
    assert B.constant[0, 0] == 9.0
    assert coeff_dict(B, 0, 0) == {tab.var((1, 1, 1, 1)): -1.0}


def test_tensor_block_identity():
    tab = new_table(2, 2, COMMUTATIVE)
    np.testing.assert_allclose(tensor_block(tab, np.eye(2), 2).constant, np.diag([1, 0.5, 1]))


def test_tensor_block_errors():
    with pytest.raises(ModeError):
        tensor_block(table_21(2), A21, 2)
    with pytest.raises(LevelError):
        tensor_block(new_table(2, 1, COMMUTATIVE), A21, 2)


def _word_matrix(A, l, L):
    ws = all_words(A.shape[0], l)[-(A.shape[0] ** l):]
    K = A
    for _ in range(l - 1):
        K = np.kron(K, A)
    M = np.array([[L(w + v) for v in ws] for w in ws])
    return K - M


@settings(max_examples=120, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 3), l=st.sampled_from([2, 3]),
       shrink=st.booleans())
def test_tensor_reduction_equivalence(seed, n, l, shrink):
    rng = np.random.default_rng(seed)
    F = rng.random((n, n + 1)) + 0.1
    A = F @ F.T + 0.5 * np.eye(n)
    tab = new_table(n, l, COMMUTATIVE)
    pts = rng.random((3, n))
    y = atomic_moments(tab, pts, rng.random(3) + 0.1)
    B = tensor_block(tab, A, l)
    # scale the moments to land clearly inside or clearly outside the PSD set
    C0 = B.constant
    Lm = C0 - B.evaluate(y)
    smax = 1.0 / la.eigh(Lm, C0, eigvals_only=True)[-1]
    s = smax * (0.7 if shrink else 1.3)
    red = la.eigvalsh(B.evaluate(s * y))[0]

    def L(w):
        return s * tab.value_of(w, y)

    full = la.eigvalsh(_word_matrix(A, l, L))[0]
    scale = np.abs(C0).max()
    assert (red >= -1e-9 * scale) == (full >= -1e-9 * scale)
    assert (red >= -1e-9 * scale) == shrink


# ---------------------------------------------------------------- evaluations

def test_blocks_psd_at_trace_evaluation():
    # the 5 x 5 circulant with its explicit diagonal factors
    alpha = 0.5
    M = circulant5(alpha)
    mats = circulant5_factors(alpha)
    fixes = [((i + 1, j + 1), M[i, j]) for i in range(5) for j in range(5)]
    tab = new_table(5, 2, TRACIAL, fixes)
    y = trace_moments(tab, mats)
    for i, j in [(0, 0), (0, 1), (3, 4)]:
        assert tab.value_of((i + 1, j + 1), y) == pytest.approx(M[i, j])
    blocks = [moment_block(tab)]
    blocks += [localizing_block(tab, Polynomial({(i,): math.sqrt(M[i - 1, i - 1]), (i, i): -1.0}))
               for i in range(1, 6)]
    for B in blocks:
        assert la.eigvalsh(B.evaluate(y))[0] >= -1e-10


def test_ideal_rows_vanish_at_trace_evaluation():
    rng = np.random.default_rng(3)
    # PSD matrices summing to the identity
    P = rng.random((3, 3))
    P = P @ P.T
    Xs = [P @ np.diag([1, 0, 0]) @ P.T, P @ np.diag([0, 1, 1]) @ P.T]
    Sinv = np.linalg.inv(Xs[0] + Xs[1])
    R = la.sqrtm(Sinv).real
    Xs = [R @ X @ R for X in Xs]
    tab = new_table(2, 2, TRACIAL)
    y = trace_moments(tab, Xs)
    h = Polynomial({(): 1.0, (1,): -1.0, (2,): -1.0})
    for r in ideal_rows(tab, [h]):
        assert abs(r.evaluate(y)) < 1e-9
