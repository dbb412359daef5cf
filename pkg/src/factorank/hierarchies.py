"""Moment relaxations for factorization ranks and simple baseline bounds.

Each ``build_*`` function turns a :class:`BoundRequest` into an
:class:`~factorank.sdpcore.SDPProblem` whose optimum lower-bounds one
factorization rank:

===========  ======================================  ==========================
kind         rank bounded                            functional
===========  ======================================  ==========================
``cpsd``     completely positive semidefinite rank   tracial, symmetric
``cp``       completely positive rank                commutative
``nonneg``   nonnegative rank                        commutative, m+n symbols
``psd``      positive semidefinite rank              tracial, symmetric, m+n
``nuclear``  nonnegative nuclear norm                commutative, m+n symbols
===========  ======================================  ==========================

Every program minimizes ``L(1)`` over linear functionals ``L`` that
reproduce the data entries and are nonnegative on a truncated quadratic
module.  Optional strengthenings are independent flags on the request.

:func:`bound` builds, solves and post-processes a request in one call.
"""
from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .momentmodel import (
    bilinear_block,
    ideal_rows,
    localizing_block,
    moment_block,
    new_table,
    scalar_positivity_rows,
    tensor_block,
)
from .polyalg import COMMUTATIVE, TRACIAL, Polynomial
from .sdpcore import (
    OPTIMAL,
    AffineBlock,
    LinearRow,
    SDPProblem,
    SolverOptions,
    flatness,
    solve,
)
from .sdpcore.problem import EQ, GEQ

log = logging.getLogger(__name__)

KINDS = ("cpsd", "cp", "nonneg", "psd", "nuclear")
CHECK_TOL = 1e-9


class ZeroMatrix(ValueError):
    """The analytic bound is undefined for the zero matrix."""


class ZeroColumn(ValueError):
    """Every column of the matrix sums to zero."""


class InputWarning(UserWarning):
    """Input matrix fails a membership precondition (checked, not enforced)."""


@dataclass
class BoundRequest:
    """What to compute.

    Parameters
    ----------
    kind : str
        One of ``cpsd``, ``cp``, ``nonneg``, ``psd``, ``nuclear``.
    A : array_like
        Input matrix; square symmetric for ``cpsd``, ``cp`` and
        ``nuclear``-free symmetric kinds, any shape for ``nonneg``, ``psd``
        and ``nuclear``.
    t : int
        Level of the hierarchy.
    V : sequence of vectors
        Each ``v`` adds the localizer ``v^T A v - (sum_i v_i x_i)^2``
        (``cpsd`` and ``cp``).
    dagger : bool
        Adds scalar positivity rows ``L(g u) >= 0`` (``cp``, ``nonneg``)
        and, for ``cp``, tensor constraints of orders ``2..t``.
    tensor_levels : sequence of int, optional
        Explicit tensor orders for ``cp``; overrides the dagger default.
    bilinear_pairs : sequence of (int, int) or "cross"
        Index pairs into the localizer list, each adding the block
        ``(L(u* g v g'))``.  ``"cross"`` selects the ``psd`` family
        ``(x_i, sum_k A_kj - x_{m+j})``.
    kernel : bool
        Adds ideal constraints from zero entries and kernel vectors of ``A``
        (``cpsd`` and ``cp``).
    extra_monomial_localizers : bool
        Adds every monomial of degree ``1..2t`` as a localizer (``cp``).
    """

    kind: str
    A: np.ndarray
    t: int = 1
    V: Sequence = ()
    dagger: bool = False
    tensor_levels: Sequence | None = None
    bilinear_pairs: Sequence | str = ()
    kernel: bool = False
    extra_monomial_localizers: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        self.A = np.array(self.A, dtype=float, ndmin=2)
        if not np.all(np.isfinite(self.A)):
            raise ValueError("matrix entries must be finite")
        if self.t < 1:
            raise ValueError("level t must be at least 1")
        if self.kind in ("cpsd", "cp") and self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"{self.kind} needs a square matrix")
        self.V = [np.asarray(v, dtype=float) for v in self.V]
        for v in self.V:
            if v.shape != (self.A.shape[0],):
                raise ValueError("localizing vectors must match the matrix size")

    def variant_label(self) -> str:
        parts = []
        if self.V:
            parts.append(f"V{len(self.V)}")
        if self.dagger:
            parts.append("dagger")
        if self.tensor_levels is not None:
            parts.append("tensor" + "".join(str(l) for l in self.tensor_levels))
        if isinstance(self.bilinear_pairs, str):
            parts.append(f"bilinear-{self.bilinear_pairs}")
        elif self.bilinear_pairs:
            parts.append(f"bilinear{len(self.bilinear_pairs)}")
        if self.kernel:
            parts.append("kernel")
        if self.extra_monomial_localizers:
            parts.append("monomials")
        return "+".join(parts) or "plain"


@dataclass
class BoundResult:
    """Solved bound with diagnostics.

    ``value`` is ``None`` unless the solver reported ``optimal``.
    """

    request: BoundRequest
    value: float | None
    status: str
    flat_report: object = None
    baselines: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    solution: object = None
    problem: SDPProblem | None = None


def _check_membership_inputs(A: np.ndarray, kind: str) -> None:
    if not np.allclose(A, A.T, atol=CHECK_TOL * max(1.0, np.abs(A).max())):
        return  # the table construction rejects asymmetric data
    lam = np.linalg.eigvalsh(0.5 * (A + A.T))[0]
    if lam < -CHECK_TOL * max(1.0, np.abs(A).max()):
        warnings.warn(f"{kind}: input is not PSD (min eigenvalue {lam:.3g})", InputWarning,
                      stacklevel=3)
    if (A < -CHECK_TOL).any():
        warnings.warn(f"{kind}: input has negative entries", InputWarning, stacklevel=3)


def _x(i: int) -> Polynomial:
    return Polynomial.var(i)


def gv_polynomial(A: np.ndarray, v: np.ndarray) -> Polynomial:
    """``v^T A v - (sum_i v_i x_i)^2``."""
    terms = {(): float(v @ A @ v)}
    n = len(v)
    for i in range(n):
        for j in range(n):
            if v[i] != 0 and v[j] != 0:
                w = (i + 1, j + 1)
                terms[w] = terms.get(w, 0.0) - v[i] * v[j]
    return Polynomial(terms)


def _kernel_ideal(A: np.ndarray) -> list:
    n = A.shape[0]
    out = []
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    tol = CHECK_TOL * max(1.0, np.abs(lam).max())
    for k in np.flatnonzero(np.abs(lam) <= tol):
        u = U[:, k]
        u = np.where(np.abs(u) < 1e-14, 0.0, u)
        out.append(Polynomial({(i + 1,): u[i] for i in range(n) if u[i] != 0}))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(A[i, j]) <= CHECK_TOL:
                out.append(Polynomial({(i + 1, j + 1): 1.0}))
    return out


def _assemble(tab, blocks, eq_rows, ineq_rows, meta) -> SDPProblem:
    p = SDPProblem(
        nvars=tab.nvars,
        objective={0: 1.0},
        blocks=blocks,
        eq_rows=eq_rows,
        ineq_rows=ineq_rows,
        metadata=meta,
        var_names=tab.var_names(),
    )
    p.metadata["table"] = tab
    return p


def _bilinear_blocks(tab, S: list, pairs) -> list:
    out = []
    for a, b in pairs:
        out.append(bilinear_block(tab, S[a], S[b]))
    return out


def _localizers(tab, polys) -> list:
    """Localizing blocks, skipping polynomials too large for this level."""
    out = []
    for g in polys:
        if g.degree <= 2 * tab.t:
            out.append(localizing_block(tab, g))
    return out


def build_cpsd(req: BoundRequest) -> SDPProblem:
    """Tracial moment relaxation for the completely positive semidefinite rank."""
    A, n, t = req.A, req.A.shape[0], req.t
    _check_membership_inputs(A, "cpsd")
    if (np.diag(A) < 0).any():
        raise ValueError("diagonal entries must be nonnegative")
    fixes = [((i + 1, j + 1), A[i, j]) for i in range(n) for j in range(n)]
    tab = new_table(n, t, TRACIAL, fixes)
    S = [Polynomial({(i + 1,): math.sqrt(A[i, i]), (i + 1, i + 1): -1.0}) for i in range(n)]
    S += [gv_polynomial(A, v) for v in req.V]
    blocks = [moment_block(tab)] + _localizers(tab, S)
    pairs = [] if isinstance(req.bilinear_pairs, str) else list(req.bilinear_pairs)
    blocks += _bilinear_blocks(tab, S, pairs)
    eqs = ideal_rows(tab, _kernel_ideal(A)) if req.kernel else []
    return _assemble(tab, blocks, eqs, [], {"kind": "cpsd", "t": t, "variants": req.variant_label()})


def build_cp(req: BoundRequest) -> SDPProblem:
    """Commutative moment relaxation for the completely positive rank."""
    A, n, t = req.A, req.A.shape[0], req.t
    _check_membership_inputs(A, "cp")
    if (np.diag(A) < 0).any():
        raise ValueError("diagonal entries must be nonnegative")
    fixes = [((i + 1, j + 1), A[i, j]) for i in range(n) for j in range(i, n)]
    tab = new_table(n, t, COMMUTATIVE, fixes)
    S = [Polynomial({(i + 1,): math.sqrt(A[i, i]), (i + 1, i + 1): -1.0}) for i in range(n)]
    S += [Polynomial({(): A[i, j], (i + 1, j + 1): -1.0}) for i in range(n) for j in range(i + 1, n)]
    S += [gv_polynomial(A, v) for v in req.V]
    blocks = [moment_block(tab)] + _localizers(tab, S)
    if req.extra_monomial_localizers:
        for d in range(1, 2 * t + 1):
            for u in itertools.combinations_with_replacement(range(1, n + 1), d):
                blocks.append(localizing_block(tab, Polynomial({u: 1.0}), label=f"mono[{u}]"))
    pairs = [] if isinstance(req.bilinear_pairs, str) else list(req.bilinear_pairs)
    blocks += _bilinear_blocks(tab, S, pairs)
    levels = req.tensor_levels
    if levels is None:
        levels = range(2, t + 1) if req.dagger else []
    for l in levels:
        blocks.append(tensor_block(tab, A, l))
    ineqs = scalar_positivity_rows(tab, S) if req.dagger else []
    eqs = ideal_rows(tab, _kernel_ideal(A)) if req.kernel else []
    return _assemble(tab, blocks, eqs, ineqs, {"kind": "cp", "t": t, "variants": req.variant_label()})


def _cross_fixes(A: np.ndarray):
    m, n = A.shape
    return [((i + 1, m + j + 1), A[i, j]) for i in range(m) for j in range(n)]


def build_nonneg(req: BoundRequest) -> SDPProblem:
    """Commutative relaxation for the nonnegative rank on ``m + n`` symbols."""
    A, t = req.A, req.t
    m, n = A.shape
    if (A < -CHECK_TOL).any():
        warnings.warn("nonneg: input has negative entries", InputWarning, stacklevel=2)
    amax = float(A.max())
    tab = new_table(m + n, t, COMMUTATIVE, _cross_fixes(A))
    r = math.sqrt(max(amax, 0.0))
    S = [Polynomial({(k,): r, (k, k): -1.0}) for k in range(1, m + n + 1)]
    S += [Polynomial({(): A[i, j], (i + 1, m + j + 1): -1.0}) for i in range(m) for j in range(n)]
    blocks = [moment_block(tab)] + _localizers(tab, S)
    if req.extra_monomial_localizers:
        for d in range(1, 2 * t + 1):
            for u in itertools.combinations_with_replacement(range(1, m + n + 1), d):
                blocks.append(localizing_block(tab, Polynomial({u: 1.0}), label=f"mono[{u}]"))
    pairs = [] if isinstance(req.bilinear_pairs, str) else list(req.bilinear_pairs)
    blocks += _bilinear_blocks(tab, S, pairs)
    ineqs = scalar_positivity_rows(tab, S) if req.dagger else []
    return _assemble(tab, blocks, [], ineqs, {"kind": "nonneg", "t": t, "variants": req.variant_label()})


def build_psd(req: BoundRequest) -> SDPProblem:
    """Tracial relaxation for the positive semidefinite rank on ``m + n`` symbols."""
    A, t = req.A, req.t
    m, n = A.shape
    if (A < -CHECK_TOL).any():
        warnings.warn("psd: input has negative entries", InputWarning, stacklevel=2)
    colsum = A.sum(axis=0)
    tab = new_table(m + n, t, TRACIAL, _cross_fixes(A))
    S = [Polynomial({(i,): 1.0, (i, i): -1.0}) for i in range(1, m + 1)]
    S += [Polynomial({(m + j + 1,): colsum[j], (m + j + 1, m + j + 1): -1.0}) for j in range(n)]
    blocks = [moment_block(tab)] + _localizers(tab, S)
    if isinstance(req.bilinear_pairs, str):
        if req.bilinear_pairs != "cross":
            raise ValueError(f"unknown bilinear family {req.bilinear_pairs!r}")
        for i in range(1, m + 1):
            for j in range(n):
                g2 = Polynomial({(): colsum[j], (m + j + 1,): -1.0})
                blocks.append(bilinear_block(tab, _x(i), g2, label=f"bil[x{i};col{j + 1}]"))
    else:
        blocks += _bilinear_blocks(tab, S, req.bilinear_pairs)
    h = Polynomial({(): 1.0, **{(i,): -1.0 for i in range(1, m + 1)}})
    eqs = ideal_rows(tab, [h])
    return _assemble(tab, blocks, eqs, [], {"kind": "psd", "t": t, "variants": req.variant_label()})


def build_nuclear(req: BoundRequest) -> SDPProblem:
    """Commutative relaxation ``mu_t`` of the nonnegative nuclear norm."""
    A, t = req.A, req.t
    m, n = A.shape
    tab = new_table(m + n, t, COMMUTATIVE, _cross_fixes(A))
    S = [_x(k) for k in range(1, m + n + 1)]
    blocks = [moment_block(tab)] + _localizers(tab, S)
    h1 = Polynomial({(): -1.0, **{(i, i): 1.0 for i in range(1, m + 1)}})
    h2 = Polynomial({(): -1.0, **{(m + j, m + j): 1.0 for j in range(1, n + 1)}})
    eqs = ideal_rows(tab, [h1, h2])
    return _assemble(tab, blocks, eqs, [], {"kind": "nuclear", "t": t, "variants": req.variant_label()})


BUILDERS = {
    "cpsd": build_cpsd,
    "cp": build_cp,
    "nonneg": build_nonneg,
    "psd": build_psd,
    "nuclear": build_nuclear,
}


def build(req: BoundRequest) -> SDPProblem:
    return BUILDERS[req.kind](req)


def tau_sos(A, kind: str = "cp") -> SDPProblem:
    """Semidefinite baseline ``tau^sos`` for the cp-rank or the nonnegative rank.

    Variables are ``alpha`` (id 0) and the upper triangle of a symmetric
    matrix ``X`` indexed by pairs ``(i, j)``.  Constraints:
    ``[[alpha, vec(A)^T], [vec(A), X]] PSD``, ``X_(ij),(ij) <= A_ij^2``,
    ``X_(ij),(kl) = X_(il),(kj)`` for ``i < k, j < l`` and, for ``cp``,
    ``X <= A (x) A`` in the PSD order.
    """
    A = np.array(A, dtype=float, ndmin=2)
    if kind not in ("cp", "nonneg"):
        raise ValueError("tau_sos is defined for kinds 'cp' and 'nonneg'")
    m, n = A.shape
    if kind == "cp" and m != n:
        raise ValueError("cp needs a square matrix")
    N = m * n
    pair = lambda i, j: i * n + j
    var = {}
    for a in range(N):
        for b in range(a, N):
            var[(a, b)] = 1 + len(var)
    nv = 1 + len(var)

    def vid(a, b):
        return var[(a, b) if a <= b else (b, a)]

    vecA = A.ravel()
    dim = N + 1
    const = np.zeros((dim, dim))
    const[0, 1:] = vecA
    const[1:, 0] = vecA
    rows, cols, vals = [0], [0], [1.0]
    for a in range(N):
        for b in range(N):
            rows.append((a + 1) * dim + (b + 1))
            cols.append(vid(a, b))
            vals.append(1.0)
    big = AffineBlock(dim, const, sp.csc_matrix((vals, (rows, cols)), shape=(dim * dim, nv)),
                      "tau-main")
    blocks = [big]
    if kind == "cp":
        AA = np.kron(A, A)
        rows, cols, vals = [], [], []
        for a in range(N):
            for b in range(N):
                rows.append(a * N + b)
                cols.append(vid(a, b))
                vals.append(-1.0)
        blocks.append(AffineBlock(N, AA, sp.csc_matrix((vals, (rows, cols)), shape=(N * N, nv)),
                                  "tau-tensor"))
    ineqs = [LinearRow({vid(pair(i, j), pair(i, j)): -1.0}, A[i, j] ** 2, GEQ, f"diag[{i},{j}]")
             for i in range(m) for j in range(n)]
    eqs = []
    for i, k in itertools.combinations(range(m), 2):
        for j, l in itertools.combinations(range(n), 2):
            v1, v2 = vid(pair(i, j), pair(k, l)), vid(pair(i, l), pair(k, j))
            if v1 != v2:
                eqs.append(LinearRow({v1: 1.0, v2: -1.0}, 0.0, EQ, f"swap[{i}{j}{k}{l}]"))
    return SDPProblem(nvars=nv, objective={0: 1.0}, blocks=blocks, eq_rows=eqs, ineq_rows=ineqs,
                      metadata={"kind": f"tau_sos_{kind}"})


def analytic_cpsd(A) -> float:
    """Closed-form bound ``(sum_i sqrt(A_ii))^2 / sum_ij A_ij``."""
    A = np.asarray(A, dtype=float)
    total = A.sum()
    if not np.any(A) or total == 0:
        raise ZeroMatrix("analytic bound undefined for a matrix with zero entry sum")
    d = np.diag(A)
    if (d < 0).any():
        raise ValueError("diagonal entries must be nonnegative")
    return float(np.sqrt(d).sum() ** 2 / total)


def analytic_psd(A) -> float:
    """Bound ``sum_i max_j A_ij / (sum_k A_kj)`` on the complex psd-rank.

    Zero columns carry no information and are skipped.
    """
    A = np.asarray(A, dtype=float)
    cs = A.sum(axis=0)
    used = cs != 0
    if not used.any():
        raise ZeroColumn("every column sums to zero")
    return float((A[:, used] / cs[used]).max(axis=1).sum())


def _fib_sphere(N: int) -> list:
    """``N`` Fibonacci points on the upper half of the unit sphere in R^3."""
    out = []
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for k in range(N):
        z = 1.0 - (k + 0.5) / N
        r = math.sqrt(max(0.0, 1.0 - z * z))
        th = golden * k
        out.append(np.array([r * math.cos(th), r * math.sin(th), z]))
    return out


def _sign_rep(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if len(nz) and v[nz[0]] < 0 else v


def sphere_grid(n: int, k: int) -> list:
    """Deterministic unit vectors for ``g_v`` localizers, nested in ``k``.

    Level 1 holds the coordinate vectors and ``(e_i +- e_j)/sqrt 2``.  Each
    further level ``j`` adds, for ``n = 3``, ``8 (j - 1)`` Fibonacci points
    on the upper hemisphere and otherwise the normalized integer vectors
    with entries in ``[-(j-1), j-1]``.  Vectors are kept up to sign since
    ``g_v`` depends only on ``v v^T``.
    """
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    out: list = []
    seen = set()

    def add(v):
        v = np.asarray(v, dtype=float)
        v = _sign_rep(v / np.linalg.norm(v))
        key = tuple(np.round(v, 9))
        if key not in seen:
            seen.add(key)
            out.append(v)

    for i in range(n):
        add(np.eye(n)[i])
    for i, j in itertools.combinations(range(n), 2):
        e = np.zeros(n)
        e[i], e[j] = 1.0, 1.0
        add(e)
        e[j] = -1.0
        add(e)
    for lev in range(2, k + 1):
        if n == 3:
            for v in _fib_sphere(8 * (lev - 1)):
                add(v)
        else:
            r = lev - 1
            for v in itertools.product(range(-r, r + 1), repeat=n):
                if any(v):
                    add(v)
    return out


def baselines(A, kind: str, with_tau: bool = False, opts: SolverOptions | None = None) -> dict:
    """Closed-form and simple comparison bounds applicable to ``kind``."""
    A = np.array(A, dtype=float, ndmin=2)
    out: dict = {}
    rank = int(np.linalg.matrix_rank(A, tol=CHECK_TOL * max(1.0, np.abs(A).max())))
    if kind == "cpsd":
        try:
            out["analytic_cpsd"] = analytic_cpsd(A)
        except (ZeroMatrix, ValueError):
            pass
        out["sqrt_rank"] = math.sqrt(rank)
    elif kind == "cp":
        out["rank"] = float(rank)
        try:
            out["analytic_cpsd"] = analytic_cpsd(A)
        except (ZeroMatrix, ValueError):
            pass
    elif kind == "nonneg":
        out["rank"] = float(rank)
    elif kind == "psd":
        try:
            out["analytic_psd"] = analytic_psd(A)
        except ZeroColumn:
            pass
        out["sqrt_rank"] = math.sqrt(rank)
    if with_tau and kind in ("cp", "nonneg"):
        sol = solve(tau_sos(A, kind), opts)
        out["tau_sos"] = sol.value if sol.status == OPTIMAL else float("nan")
    return out


def bound(req: BoundRequest, opts: SolverOptions | None = None, rank_tol: float = 1e-6,
          with_baselines: bool = True, with_tau: bool = False) -> BoundResult:
    """Build, solve and analyse one request."""
    p = build(req)
    sol = solve(p, opts)
    tab = p.metadata["table"]
    value = sol.value if sol.status == OPTIMAL else None
    flat = flatness(sol, tab, rank_tol) if sol.status == OPTIMAL else None
    base = baselines(req.A, req.kind, with_tau, opts) if with_baselines else {}
    res = {
        "psd": sol.psd_violation,
        "eq": sol.eq_residual,
        "ineq": sol.ineq_violation,
        "gap": sol.gap,
        "iterations": sol.iterations,
    }
    return BoundResult(req, value, sol.status, flat, base, res, sol, p)
