"""Presolve for LMI problems before the interior-point phase.

Moment relaxations are rarely strictly feasible as built: data entries and
ideal constraints pin parts of the moment matrix, and a singular pinned
submatrix forces a whole face of the PSD cone.  Interior-point methods
stall on such problems, so this module reduces them first.

The reduction keeps an affine parametrization ``y = y0 + N z`` of the
original variables and repeats four steps until nothing changes:

1. eliminate linear equalities by sparse Gauss-Jordan substitution;
2. tidy scalar inequalities (drop trivial rows, merge opposite pairs into
   equalities, turn 1x1 blocks into scalar rows);
3. shrink blocks along vectors ``u`` with ``F(z) u = 0`` for every ``z``,
   keeping a principal submatrix (which preserves sparsity);
4. look for principal submatrices of a block that do not depend on ``z``.
   If one is not PSD the problem is infeasible; otherwise each null vector
   ``u`` of it yields the equalities ``F(z) u = 0``, which feed step 1
   and then step 3.

Finally variables that appear nowhere are dropped, as are linearly
dependent columns, so that the Schur complement is nonsingular.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

log = logging.getLogger(__name__)

ZERO_TOL = 1e-12


@dataclass
class WorkBlock:
    C: np.ndarray
    B: sp.csc_matrix
    label: str
    keep: np.ndarray  # indices of the original block retained
    pending: list = field(default_factory=list)  # known null vectors, full coordinates

    @property
    def n(self) -> int:
        return self.C.shape[0]


@dataclass
class Reduced:
    """Presolved problem ``min c0 + c.z  s.t.  C_k + B_k z PSD, G z + h >= 0``."""

    y0: np.ndarray
    N: sp.csr_matrix
    c: np.ndarray
    c0: float
    blocks: list
    G: sp.csr_matrix
    h: np.ndarray
    status: str | None = None
    reason: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def nz(self) -> int:
        return self.N.shape[1]

    def lift(self, z) -> np.ndarray:
        return self.y0 + self.N @ np.asarray(z, dtype=float)


class _Infeasible(Exception):
    pass


class _Unbounded(Exception):
    pass


def _vec_rows(n: int, rows, cols):
    return np.asarray(rows) * n + np.asarray(cols)


def _eliminate(E: sp.csr_matrix, e: np.ndarray, nz: int):
    """Solve ``E z + e = 0`` as ``z = z0 + T w`` with a sparse ``T``.

    Pivots favour the smallest column index among entries within a factor
    of ten of the row maximum, which keeps substitutions sparse when
    columns are ordered by moment degree.
    """
    pivots: dict = {}
    occ = defaultdict(set)
    E = E.tocsr()
    for i in range(E.shape[0]):
        lo, hi = E.indptr[i], E.indptr[i + 1]
        cols, vals = E.indices[lo:hi], E.data[lo:hi]
        if len(vals) == 0 and abs(e[i]) <= ZERO_TOL:
            continue
        scale = max(np.max(np.abs(vals)) if len(vals) else 0.0, abs(e[i]), 1.0)
        row: dict = {}
        k = float(e[i])
        for v, a in zip(cols, vals):
            v = int(v)
            if v in pivots:
                expr, cst = pivots[v]
                k += a * cst
                for f, b in expr.items():
                    row[f] = row.get(f, 0.0) + a * b
            else:
                row[v] = row.get(v, 0.0) + a
        row = {v: a for v, a in row.items() if abs(a) > ZERO_TOL * scale}
        if not row:
            if abs(k) > 1e-9 * scale:
                raise _Infeasible(f"inconsistent linear equalities (residual {k:.3g})")
            continue
        amax = max(abs(a) for a in row.values())
        p = min(v for v, a in row.items() if abs(a) >= 0.1 * amax)
        ap = row.pop(p)
        expr_p = {f: -a / ap for f, a in row.items()}
        const_p = -k / ap
        for q in list(occ.pop(p, ())):
            eq, cq = pivots[q]
            b = eq.pop(p, None)
            if b is None:
                continue
            cq += b * const_p
            for f, a in expr_p.items():
                val = eq.get(f, 0.0) + b * a
                if abs(val) <= ZERO_TOL * max(abs(b), 1.0):
                    eq.pop(f, None)
                else:
                    eq[f] = val
                    occ[f].add(q)
            pivots[q] = (eq, cq)
        pivots[p] = (expr_p, const_p)
        for f in expr_p:
            occ[f].add(p)
    free = [v for v in range(nz) if v not in pivots]
    col = {v: j for j, v in enumerate(free)}
    ri, ci, vals = [], [], []
    z0 = np.zeros(nz)
    for v in free:
        ri.append(v)
        ci.append(col[v])
        vals.append(1.0)
    for p, (expr, cst) in pivots.items():
        z0[p] = cst
        for f, a in expr.items():
            ri.append(p)
            ci.append(col[f])
            vals.append(a)
    T = sp.csr_matrix((vals, (ri, ci)), shape=(nz, len(free)))
    return z0, T


def _block_times_vector(B: sp.csc_matrix, n: int, u: np.ndarray) -> sp.csr_matrix:
    """Sparse ``(n, nz)`` matrix whose column i is ``A_i u``."""
    rows = np.repeat(np.arange(n), n)
    cols = np.arange(n * n)
    U = sp.csr_matrix((np.tile(u, n), (rows, cols)), shape=(n, n * n))
    return (U @ B).tocsr()


def _restrict(blk: WorkBlock, U: np.ndarray) -> WorkBlock:
    """Drop one index per null vector, chosen for a well-conditioned pivot set."""
    n = blk.n
    _, _, piv = la.qr(U.T, pivoting=True, mode="economic")
    drop = np.sort(piv[: U.shape[1]])
    keep = np.setdiff1d(np.arange(n), drop)
    sel = _vec_rows(n, np.repeat(keep, len(keep)), np.tile(keep, len(keep)))
    B = blk.B[sel, :].tocsc()
    C = blk.C[np.ix_(keep, keep)]
    return WorkBlock(C, B, blk.label, blk.keep[keep], [])


def _null_residual(blk: WorkBlock, u: np.ndarray) -> float:
    r1 = np.linalg.norm(blk.C @ u)
    Bu = _block_times_vector(blk.B, blk.n, u)
    r2 = abs(Bu).max() if Bu.nnz else 0.0
    return max(r1, r2)


def _block_scale(blk: WorkBlock) -> float:
    s = np.abs(blk.C).max() if blk.C.size else 0.0
    if blk.B.nnz:
        s = max(s, abs(blk.B).max())
    return max(s, 1.0)


def _identical_null_space(blk: WorkBlock) -> np.ndarray | None:
    """Vectors ``u`` with ``F(z) u = 0`` for all ``z``, or ``None``."""
    n = blk.n
    scale = _block_scale(blk)
    # rows that are identically zero
    Brows = blk.B.tocsr()
    nnz_rows = np.diff(Brows.indptr).reshape(n, n).sum(axis=1)
    zero = np.flatnonzero((nnz_rows == 0) & (np.abs(blk.C).max(axis=1) <= ZERO_TOL * scale))
    if len(zero):
        U = np.zeros((n, len(zero)))
        U[zero, np.arange(len(zero))] = 1.0
        return U
    cands = [u for u in blk.pending if _null_residual(blk, u) <= 1e-9 * scale * np.linalg.norm(u)]
    blk.pending = []
    if cands:
        Q, R = np.linalg.qr(np.column_stack(cands))
        rk = int(np.sum(np.abs(np.diag(R)) > 1e-8 * np.abs(np.diag(R)).max()))
        return Q[:, :rk]
    # general case via the Gram matrix C^2 + sum A_i^2, then verified directly
    coo = blk.B.tocoo()
    r, a = np.divmod(coo.row, n)
    Bt = sp.csr_matrix((coo.data, (a, r * blk.B.shape[1] + coo.col)),
                       shape=(n, n * blk.B.shape[1]))
    Z = (Bt @ Bt.T).toarray() + blk.C.T @ blk.C
    lam, V = la.eigh(Z)
    top = max(lam[-1], 1e-300)
    idx = np.flatnonzero(lam <= 1e-10 * top)
    if len(idx) == 0:
        return None
    U = V[:, idx]
    res = [_null_residual(blk, U[:, j]) for j in range(U.shape[1])]
    ok = [j for j, rj in enumerate(res) if rj <= 1e-9 * scale]
    if not ok:
        return None
    return U[:, ok]


def _constant_face(blk: WorkBlock):
    """Null vectors of the largest constant principal submatrix found greedily.

    Returns a list of vectors (full coordinates) or raises ``_Infeasible``.
    """
    n = blk.n
    Brows = blk.B.tocsr()
    rn = np.diff(Brows.indptr).reshape(n, n) > 0
    diag_const = np.flatnonzero(~np.diag(rn))
    if len(diag_const) == 0:
        return []
    J = list(diag_const)
    sub = rn[np.ix_(J, J)]
    while sub.any():
        deg = sub.sum(axis=1)
        k = int(np.argmax(deg))
        J.pop(k)
        sub = np.delete(np.delete(sub, k, axis=0), k, axis=1)
    J = np.asarray(J)
    CJ = blk.C[np.ix_(J, J)]
    lam, V = la.eigh(CJ)
    tol = 1e-9 * max(1.0, np.abs(CJ).max())
    if lam[0] < -tol:
        raise _Infeasible(
            f"block {blk.label!r}: a data-determined principal submatrix has eigenvalue {lam[0]:.3g}"
        )
    out = []
    for j in np.flatnonzero(lam <= tol):
        u = np.zeros(n)
        u[J] = V[:, j]
        out.append(u)
    return out


def presolve(nvars, c, c0, blocks, E, e, G, h, max_rounds: int = 50) -> Reduced:
    """Reduce an LMI problem; see the module docstring.

    Parameters
    ----------
    nvars : int
    c : ndarray
        Objective vector; ``c0`` its constant.
    blocks : list of (C, B, label)
        Dense constant and sparse ``(n*n, nvars)`` coefficients.
    E, e : sparse matrix, ndarray
        Equalities ``E y + e = 0``.
    G, h : sparse matrix, ndarray
        Inequalities ``G y + h >= 0``.
    """
    y0 = np.zeros(nvars)
    N = sp.identity(nvars, format="csr")
    work = [WorkBlock(np.array(C, dtype=float), sp.csc_matrix(B), lab, np.arange(C.shape[0]))
            for C, B, lab in blocks]
    c = np.asarray(c, dtype=float).copy()
    G = sp.csr_matrix(G)
    h = np.asarray(h, dtype=float).copy()
    pend_E = [sp.csr_matrix(E)]
    pend_e = [np.asarray(e, dtype=float)]
    stats = {"eliminated": 0, "facial_drops": 0, "rounds": 0}

    def substitute(z0, T):
        nonlocal y0, N, c, c0, G, h
        y0 = y0 + N @ z0
        N = (N @ T).tocsr()
        c0 += float(c @ z0)
        c = T.T @ c
        h = h + G @ z0
        G = (G @ T).tocsr()
        for blk in work:
            blk.C = blk.C + (blk.B @ z0).reshape(blk.n, blk.n)
            blk.C = 0.5 * (blk.C + blk.C.T)
            blk.B = (blk.B @ T).tocsc()

    try:
        for rnd in range(max_rounds):
            stats["rounds"] = rnd + 1
            changed = False
            # 1. equalities
            rows = [m for m in pend_E if m.shape[0]]
            if rows:
                Eall = sp.vstack(rows).tocsr()
                eall = np.concatenate([v for m, v in zip(pend_E, pend_e) if m.shape[0]])
                nz_before = N.shape[1]
                z0, T = _eliminate(Eall, eall, nz_before)
                substitute(z0, T)
                stats["eliminated"] += nz_before - N.shape[1]
                changed = True
            pend_E, pend_e = [], []
            # 2. small blocks and scalar rows
            keep_blocks = []
            newG, newh = [], []
            for blk in work:
                if blk.B.nnz == 0 or (abs(blk.B).max() <= ZERO_TOL * _block_scale(blk)):
                    lam = la.eigvalsh(blk.C)[0] if blk.n else 0.0
                    if lam < -1e-9 * _block_scale(blk):
                        raise _Infeasible(f"constant block {blk.label!r} has eigenvalue {lam:.3g}")
                    changed = True
                    continue
                if blk.n == 1:
                    newG.append(blk.B.tocsr())
                    newh.append(blk.C.ravel())
                    changed = True
                    continue
                keep_blocks.append(blk)
            work = keep_blocks
            if newG:
                G = sp.vstack([G] + newG).tocsr()
                h = np.concatenate([h] + newh)
            G, h, Eq, eq, ch = _tidy_rows(G, h)
            if Eq.shape[0]:
                pend_E, pend_e = [Eq], [eq]
                continue
            changed = changed or ch
            # 3. vectors u with F(z) u = 0 identically
            for i, blk in enumerate(work):
                U = _identical_null_space(blk)
                if U is not None and U.shape[1]:
                    stats["facial_drops"] += U.shape[1]
                    work[i] = None if U.shape[1] >= blk.n else _restrict(blk, U)
                    changed = True
            work = [b for b in work if b is not None]
            if changed:
                continue
            # 4. data-determined faces
            for blk in work:
                scale = _block_scale(blk)
                for u in _constant_face(blk):
                    Bu = _block_times_vector(blk.B, blk.n, u)
                    Cu = blk.C @ u
                    blk.pending.append(u)
                    bmax = abs(Bu).max() if Bu.nnz else 0.0
                    if max(bmax, np.abs(Cu).max()) > 1e-9 * scale:
                        pend_E.append(Bu)
                        pend_e.append(Cu)
                    changed = True
            if not changed:
                break
        # 5. unused and dependent columns
        T = _independent_columns(work, G, c)
        if T is not None:
            substitute(np.zeros(N.shape[1]), T)
    except _Infeasible as exc:
        return Reduced(y0, N, c, c0, [], G, h, status="infeasible", reason=str(exc), stats=stats)
    except _Unbounded as exc:
        return Reduced(y0, N, c, c0, [], G, h, status="unbounded", reason=str(exc), stats=stats)
    stats["nz"] = N.shape[1]
    stats["block_dims"] = [b.n for b in work]
    return Reduced(y0, N, c, c0, work, G, h, stats=stats)


def _tidy_rows(G: sp.csr_matrix, h: np.ndarray):
    """Drop trivial rows, merge duplicates, and turn opposite pairs into equalities."""
    G = G.tocsr()
    G.eliminate_zeros()
    changed = False
    best: dict = {}
    order = []
    for i in range(G.shape[0]):
        lo, hi = G.indptr[i], G.indptr[i + 1]
        cols, vals = G.indices[lo:hi], G.data[lo:hi]
        amax = np.max(np.abs(vals)) if len(vals) else 0.0
        if amax <= ZERO_TOL * max(1.0, abs(h[i])):
            if h[i] < -1e-9:
                raise _Infeasible(f"scalar constraint reduces to {h[i]:.3g} >= 0")
            changed = True
            continue
        o = np.argsort(cols)
        cols, vals = cols[o], vals[o] / amax
        key = (tuple(cols.tolist()), tuple(np.round(vals, 10).tolist()))
        hv = h[i] / amax
        if key in best:
            changed = True
            best[key] = (cols, vals, min(best[key][2], hv))
        else:
            best[key] = (cols, vals, hv)
            order.append(key)
    eq_rows, keep = [], []
    used = set()
    for key in order:
        if key in used:
            continue
        neg = (key[0], tuple((-np.asarray(key[1]) + 0.0).round(10).tolist()))
        cols, vals, hv = best[key]
        if neg in best and neg not in used:
            h2 = best[neg][2]
            # vals.z >= -hv and vals.z <= h2
            if hv + h2 < -1e-9 * max(1.0, abs(hv)):
                raise _Infeasible("opposite scalar constraints have an empty intersection")
            if hv + h2 <= 1e-12 * max(1.0, abs(hv)):
                eq_rows.append((cols, vals, hv))
                used.add(key)
                used.add(neg)
                changed = True
                continue
        keep.append(key)
        used.add(key)
    nz = G.shape[1]

    def assemble(items):
        ri, ci, vv, hh = [], [], [], []
        for r, (cols, vals, hv) in enumerate(items):
            ri.extend([r] * len(cols))
            ci.extend(cols.tolist())
            vv.extend(vals.tolist())
            hh.append(hv)
        return sp.csr_matrix((vv, (ri, ci)), shape=(len(items), nz)), np.asarray(hh, dtype=float)

    Gn, hn = assemble([best[k] for k in keep])
    Eq, eq = assemble(eq_rows)
    return Gn, hn, Eq, eq, changed


def _independent_columns(work, G, c):
    """Selection matrix dropping unused and dependent variables.

    Raises ``_Unbounded`` if the objective moves along a direction that no
    constraint sees.
    """
    nz = G.shape[1]
    if nz == 0:
        return None
    gram = (G.T @ G).toarray()
    for blk in work:
        gram += (blk.B.T @ blk.B).toarray()
    d = np.diag(gram).copy()
    cscale = max(1.0, np.abs(c).max()) if len(c) else 1.0
    used = np.flatnonzero(d > 0)
    unused = np.flatnonzero(d <= 0)
    for v in unused:
        if abs(c[v]) > 1e-12 * cscale:
            raise _Unbounded(f"objective variable {v} appears in no constraint")
    # scale to unit diagonal before the rank-revealing factorization
    s = 1.0 / np.sqrt(d[used])
    Gu = gram[np.ix_(used, used)] * s[:, None] * s[None, :]
    R, piv, rank, info = la.lapack.dpstrf(Gu, lower=0, tol=1e-13)
    piv = piv - 1
    keep = used
    if rank < len(used):
        R = np.triu(R)
        R11 = R[:rank, :rank]
        R12 = R[:rank, rank:]
        Tm = la.solve_triangular(R11, R12)
        ind = used[piv[:rank]]
        dep = used[piv[rank:]]
        # in scaled columns the direction z_dep = 1/s_dep, z_ind = -T/s_ind is
        # invisible to every constraint; the objective must be flat along it
        cu = c[ind] * s[piv[:rank]]
        cd = c[dep] * s[piv[rank:]]
        resid = cd - Tm.T @ cu
        size = np.abs(cd) + np.abs(Tm).T @ np.abs(cu)
        if np.any(np.abs(resid) > 1e-9 * np.maximum(size, 1e-12 * cscale)):
            raise _Unbounded("objective is not constant along a direction invisible to constraints")
        keep = np.sort(ind)
    if len(keep) == nz:
        return None
    T = sp.csr_matrix((np.ones(len(keep)), (keep, np.arange(len(keep)))), shape=(nz, len(keep)))
    return T
