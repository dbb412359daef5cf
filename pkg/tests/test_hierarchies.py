import math

import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from factorank.hierarchies import (
    BoundRequest,
    InputWarning,
    ZeroColumn,
    ZeroMatrix,
    analytic_cpsd,
    analytic_psd,
    baselines,
    bound,
    build,
    gv_polynomial,
    sphere_grid,
    tau_sos,
)
from factorank.instances import a_alpha, cos2_circulant, slack_hexagon
from factorank.momentmodel import atomic_moments
from factorank.sdpcore import OPTIMAL, solve

TOL = 1e-5
PROP = settings(max_examples=100, deadline=None,
                suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])


def solve_bound(kind, A, t=1, **kw):
    """Value and error bar of a bound.

    Solves accepted at reduced accuracy report their relative gap, which can
    exceed ``TOL``, so comparisons widen by that amount.
    """
    res = bound(BoundRequest(kind, A, t, **kw), with_baselines=False)
    assert res.status == OPTIMAL, res.solution.diagnostics
    gap = res.solution.diagnostics.get("ipm_gap", 0.0)
    return res.value, max(TOL, 2 * gap * max(1.0, abs(res.value)))


def xi(kind, A, t=1, **kw):
    return solve_bound(kind, A, t, **kw)[0]


def random_cp(rng, n, k=None, ridge=0.05):
    """Random cp matrix ``F F^T + ridge I``.

    The ridge keeps the smallest eigenvalue away from zero.  Without it the
    relaxations sit on faces without strictly feasible points and interior
    point solvers (ours and the cvxpy backends alike) stall near 1e-4.
    """
    F = rng.random((n, k or n + 1))
    F[rng.random(F.shape) < 0.3] = 0.0
    F[:, 0] += 0.2
    return F @ F.T + ridge * np.eye(n)


def random_nonneg(rng, m, n):
    return rng.random((m, n)) + 0.05


# ---------------------------------------------------------------- requests

def test_request_validation():
    with pytest.raises(ValueError):
        BoundRequest("rank", np.eye(2))
    with pytest.raises(ValueError):
        BoundRequest("cp", np.ones((2, 3)))
    with pytest.raises(ValueError):
        BoundRequest("cpsd", np.eye(2), t=0)
    with pytest.raises(ValueError):
        BoundRequest("cpsd", np.eye(2), V=[np.ones(3)])
    with pytest.raises(ValueError):
        BoundRequest("psd", np.array([[np.nan]]))


def test_variant_labels():
    assert BoundRequest("cp", np.eye(2)).variant_label() == "plain"
    req = BoundRequest("cp", np.eye(2), 2, V=[np.ones(2)], dagger=True, kernel=True)
    assert req.variant_label() == "V1+dagger+kernel"


def test_input_warnings():
    with pytest.warns(InputWarning):
        build(BoundRequest("cpsd", np.array([[1.0, -0.2], [-0.2, 1.0]])))
    with pytest.raises(ValueError), pytest.warns(InputWarning):
        build(BoundRequest("cp", np.diag([1.0, -1.0])))


def test_gv_polynomial():
    g = gv_polynomial(a_alpha(0.5), np.array([1.0, 1.0]))
    assert g.terms[()] == pytest.approx(3.0)
    assert g.terms[(1, 2)] == -1.0 and g.terms[(2, 1)] == -1.0


# ---------------------------------------------------------------- worked values

def test_cpsd_example_levels():
    assert xi("cpsd", a_alpha(0.5), 1) == pytest.approx(4 / 3, abs=1e-6)
    assert xi("cpsd", a_alpha(0.5), 2) == pytest.approx(1.5, abs=1e-6)


def test_cp_identity():
    assert xi("cp", np.eye(3), 1) == pytest.approx(3, abs=1e-6)


def test_nonneg_all_ones():
    assert xi("nonneg", np.ones((2, 2)), 1) == pytest.approx(1, abs=1e-6)


def test_nonneg_zero_row_is_harmless():
    A = np.array([[1.0, 0.2], [0.3, 1.0]])
    Z = np.vstack([A, np.zeros(2)])
    assert xi("nonneg", Z, 2) == pytest.approx(xi("nonneg", A, 2), abs=TOL)


def test_nuclear_small():
    assert xi("nuclear", np.array([[1.0]]), 1) == pytest.approx(1, abs=1e-6)
    assert xi("nuclear", np.eye(2), 2) == pytest.approx(2, abs=1e-6)


def test_nuclear_below_explicit_atoms():
    rng = np.random.default_rng(4)
    U, V = rng.random((2, 2)), rng.random((2, 2))
    A = U @ V.T
    # A = sum_k u_k v_k^T gives nu_+(A) <= sum_k |u_k| |v_k|
    upper = sum(np.linalg.norm(U[:, k]) * np.linalg.norm(V[:, k]) for k in range(2))
    assert xi("nuclear", A, 1) <= upper + TOL
    assert xi("nuclear", A, 1) <= xi("nuclear", A, 2) + TOL


def test_psd_cross_bilinear_does_not_decrease():
    A = np.array([[1.0, 0.2, 0.5], [0.3, 1.0, 0.1]])
    assert xi("psd", A, 1, bilinear_pairs="cross") >= xi("psd", A, 1) - TOL


def test_cp_bound_below_atomic_factorization():
    # an explicit cp factorization with 3 columns gives a feasible point with L(1) = 3
    rng = np.random.default_rng(9)
    F = rng.random((3, 3)) + 0.1
    A = F @ F.T
    p = build(BoundRequest("cp", A, 2))
    tab = p.metadata["table"]
    y = atomic_moments(tab, F.T, np.ones(3))
    assert y[0] == pytest.approx(3.0)
    for b in p.blocks:
        assert la.eigvalsh(b.evaluate(y))[0] >= -1e-9
    assert xi("cp", A, 2) <= 3 + TOL


# ---------------------------------------------------------------- baselines

def test_analytic_cpsd_values():
    assert analytic_cpsd(np.eye(4)) == pytest.approx(4)
    assert analytic_cpsd(a_alpha(0.5)) == pytest.approx(4 / 3)
    assert analytic_cpsd(cos2_circulant()) == pytest.approx(2, abs=1e-12)
    with pytest.raises(ZeroMatrix):
        analytic_cpsd(np.zeros((2, 2)))


def test_analytic_psd_values():
    assert analytic_psd(np.eye(3)) == pytest.approx(3)
    assert analytic_psd(np.ones((2, 4))) == pytest.approx(1)
    val = analytic_psd(slack_hexagon())
    assert 1 < val <= 3
    with pytest.raises(ZeroColumn):
        analytic_psd(np.zeros((2, 2)))
    # zero columns are skipped rather than rejected
    assert analytic_psd(np.array([[1.0, 0], [0, 0]])) == pytest.approx(1)


def test_baselines_table():
    base = baselines(a_alpha(0.5), "cpsd")
    assert set(base) == {"analytic_cpsd", "sqrt_rank"}
    assert base["sqrt_rank"] == pytest.approx(math.sqrt(2))
    base = baselines(np.eye(2), "cp", with_tau=True)
    assert base["tau_sos"] == pytest.approx(2, abs=1e-6)


def test_tau_cp_at_least_rank():
    rng = np.random.default_rng(2)
    for _ in range(5):
        A = random_cp(rng, 3, 2, ridge=0.0)
        val = solve(tau_sos(A, "cp")).value
        assert val >= np.linalg.matrix_rank(A) - TOL


def test_sphere_grid():
    g = sphere_grid(2, 1)
    assert len(g) == 4
    assert any(np.allclose(v, [1, 0]) for v in g)
    assert any(np.allclose(v, np.array([1, 1]) / math.sqrt(2)) for v in g)
    for n in (2, 3, 4):
        small, large = sphere_grid(n, 1), sphere_grid(n, 2)
        assert all(any(np.allclose(v, w) for w in large) for v in small)
        assert all(abs(np.linalg.norm(v) - 1) < 1e-12 for v in large)


# ---------------------------------------------------------------- monotonicity

@pytest.mark.parametrize("kind,A", [
    ("cpsd", np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.4], [0.1, 0.4, 1.0]])),
    ("cp", np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])),
    ("nonneg", np.array([[1.0, 0.2, 0.7], [0.3, 1.0, 0.1]])),
    ("psd", np.array([[1.0, 0.2, 0.7], [0.3, 1.0, 0.1]])),
])
def test_monotone_in_t(kind, A):
    assert xi(kind, A, 1) <= xi(kind, A, 2) + TOL


def test_variants_monotone():
    A = np.array([[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]])
    base = xi("cp", A, 2)
    assert xi("cp", A, 2, dagger=True) >= base - TOL
    assert xi("cp", A, 2, tensor_levels=[2]) >= base - TOL
    assert xi("cp", A, 2, V=[np.array([1.0, -1.0, 1.0])]) >= base - TOL
    assert xi("cpsd", A, 2, V=[np.array([1.0, -1.0, 1.0])]) >= xi("cpsd", A, 2) - TOL
    assert xi("cpsd", A, 2, bilinear_pairs=[(0, 1)]) >= xi("cpsd", A, 2) - TOL
    assert xi("cpsd", A, 2, kernel=True) >= xi("cpsd", A, 2) - TOL


# ---------------------------------------------------------------- property suites

shapes = st.tuples(st.sampled_from(["cpsd", "cp"]), st.integers(2, 4), st.integers(1, 2)).filter(
    lambda k: not (k[1] == 4 and k[2] == 2 and k[0] == "cp"))


@PROP
@given(seed=st.integers(0, 2**31 - 1), shape=shapes)
def test_permutation_invariance(seed, shape):
    kind, n, t = shape
    rng = np.random.default_rng(seed)
    A = random_cp(rng, n)
    P = np.eye(n)[rng.permutation(n)]
    (a, ea), (b, eb) = solve_bound(kind, A, t), solve_bound(kind, P.T @ A @ P, t)
    assert abs(a - b) <= ea + eb


@PROP
@given(seed=st.integers(0, 2**31 - 1), shape=shapes)
def test_diagonal_scaling_invariance(seed, shape):
    kind, n, t = shape
    rng = np.random.default_rng(seed)
    A = random_cp(rng, n)
    D = np.diag(rng.uniform(0.5, 2.0, n))
    (a, ea), (b, eb) = solve_bound(kind, A, t), solve_bound(kind, D @ A @ D, t)
    assert abs(a - b) <= ea + eb


@PROP
@given(seed=st.integers(0, 2**31 - 1), shape=shapes)
def test_principal_submatrix_monotone(seed, shape):
    kind, n, t = shape
    rng = np.random.default_rng(seed)
    A = random_cp(rng, n)
    keep = np.sort(rng.choice(n, size=int(rng.integers(1, n)), replace=False))
    (a, ea), (b, eb) = solve_bound(kind, A[np.ix_(keep, keep)], t), solve_bound(kind, A, t)
    assert a <= b + ea + eb


@PROP
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(["cpsd", "cp", "nonneg"]),
       t=st.integers(1, 2))
def test_direct_sum_subadditive(seed, kind, t):
    rng = np.random.default_rng(seed)
    if kind == "nonneg":
        A, B = random_nonneg(rng, 2, 1), random_nonneg(rng, 1, 2)
    else:
        A, B = random_cp(rng, 2), random_cp(rng, int(rng.integers(1, 3)))
    S = la.block_diag(A, B)
    (s, es), (a, ea), (b, eb) = (solve_bound(kind, M, t) for M in (S, A, B))
    assert s <= a + b + es + ea + eb


@PROP
@given(seed=st.integers(0, 2**31 - 1), which=st.sampled_from(["cpsd1", "cp2", "nonneg2"]))
def test_baseline_dominance(seed, which):
    rng = np.random.default_rng(seed)
    if which == "cpsd1":
        A = random_cp(rng, int(rng.integers(2, 5)))
        val, err = solve_bound("cpsd", A, 1)
        assert val >= analytic_cpsd(A) - err
    elif which == "cp2":
        A = random_cp(rng, int(rng.integers(2, 4)))
        tau = solve(tau_sos(A, "cp"))
        assert tau.status == OPTIMAL
        val, err = solve_bound("cp", A, 2, dagger=True)
        assert val >= tau.value - err
    else:
        A = random_nonneg(rng, 2, int(rng.integers(2, 4)))
        tau = solve(tau_sos(A, "nonneg"))
        assert tau.status == OPTIMAL
        val, err = solve_bound("nonneg", A, 2, dagger=True)
        assert val >= tau.value - err
