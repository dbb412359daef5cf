"""Infeasible-start primal-dual interior-point method for LMI problems.

Solves

    minimize    c.z
    subject to  S_k = C_k + sum_i z_i A_{k,i}  PSD      (blocks)
                s   = G z + h                  >= 0     (scalar rows)

together with its dual

    maximize    -sum_k <C_k, X_k> - h.x
    subject to  sum_k <A_{k,i}, X_k> + (G^T x)_i = c_i,   X_k PSD, x >= 0.

Search directions use the HKM linearization of ``X S = mu I`` with a
Mehrotra predictor-corrector.  The Schur complement

    M_ij = sum_k <A_{k,i}, X_k A_{k,j} S_k^{-1}> + (G^T diag(x/s) G)_ij

is assembled column by column from the sparse coefficient arrays and
factored densely, so cost is governed by the number of free variables.
All loops run in a fixed order, so results are reproducible run to run.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

log = logging.getLogger(__name__)

SIGMA_MIN = 0.0
GAMMA_LO, GAMMA_HI = 0.9, 0.99


@dataclass
class IPMResult:
    z: np.ndarray
    status: str
    pobj: float
    dobj: float
    iterations: int
    pinf: float
    dinf: float
    relgap: float
    X: list = field(default_factory=list)
    x: np.ndarray | None = None
    reason: str = ""


class _BlockData:
    """Per-block sparse structure cached for the Schur complement."""

    def __init__(self, C: np.ndarray, B: sp.csc_matrix):
        self.n = C.shape[0]
        scale = max(np.abs(C).max(initial=0.0), abs(B).max() if B.nnz else 0.0, 1e-300)
        # row-normalize the block so entries are O(1); PSD-ness is unchanged
        self.scale = 1.0 / scale if scale > 0 else 1.0
        self.C = C * self.scale
        self.B = (B * self.scale).tocsc()
        self.BT = self.B.T.tocsr()
        self.used = np.flatnonzero(np.diff(self.B.indptr))
        self.cols = []
        n = self.n
        for j in self.used:
            lo, hi = self.B.indptr[j], self.B.indptr[j + 1]
            r, c = np.divmod(self.B.indices[lo:hi], n)
            self.cols.append((r, c, self.B.data[lo:hi]))
        self.BTu = self.B[:, self.used].T.tocsr()

    def amap(self, z: np.ndarray) -> np.ndarray:
        """``sum_i z_i A_i`` as a dense matrix."""
        return (self.B @ z).reshape(self.n, self.n)

    def adjoint(self, Y: np.ndarray) -> np.ndarray:
        """Vector ``(<A_i, Y>)_i``."""
        return self.BT @ Y.ravel()

    def schur(self, X: np.ndarray, Sinv: np.ndarray, M: np.ndarray, chunk: int = 128) -> None:
        n = self.n
        used = self.used
        for lo in range(0, len(used), chunk):
            hi = min(lo + chunk, len(used))
            Y = np.empty((n * n, hi - lo), order="F")
            for k in range(lo, hi):
                r, c, v = self.cols[k]
                Y[:, k - lo] = (X[:, r] @ (v[:, None] * Sinv[c, :])).ravel()
            M[np.ix_(used, used[lo:hi])] += self.BTu @ Y


def _max_step(S: np.ndarray, dS: np.ndarray, L: np.ndarray | None = None) -> float:
    """Largest ``a <= 1e6`` with ``S + a dS`` PSD, for ``S`` positive definite."""
    if L is None:
        L = la.cholesky(S, lower=True)
    W = la.solve_triangular(L, dS, lower=True)
    W = la.solve_triangular(L, W.T, lower=True)
    lam = la.eigvalsh(0.5 * (W + W.T))[0]
    if lam >= 0:
        return 1e6
    return -1.0 / lam


def _max_step_lp(s: np.ndarray, ds: np.ndarray) -> float:
    neg = ds < 0
    if not neg.any():
        return 1e6
    return float(np.min(-s[neg] / ds[neg]))


def _sym(A):
    return 0.5 * (A + A.T)


def solve_lmi(
    c: np.ndarray,
    blocks: list,
    G: sp.csr_matrix,
    h: np.ndarray,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
    verbose: bool = False,
) -> IPMResult:
    """Run the interior-point method.

    Parameters
    ----------
    c : ndarray, shape (m,)
        Objective.
    blocks : list of (C, B)
        Dense constant parts and sparse ``(n*n, m)`` coefficient arrays.
    G, h : sparse matrix and ndarray
        Scalar rows ``G z + h >= 0``.

    Returns
    -------
    IPMResult
        ``status`` is one of ``optimal``, ``infeasible``, ``unbounded`` or
        ``max-iter``.
    """
    m = len(c)
    c = np.asarray(c, dtype=float)
    bd = [_BlockData(np.asarray(C, dtype=float), sp.csc_matrix(B)) for C, B in blocks]
    G = sp.csr_matrix(G)
    h = np.asarray(h, dtype=float)
    p = G.shape[0]
    if p:
        rs = np.maximum(abs(G).max(axis=1).toarray().ravel(), np.abs(h))
        rs[rs == 0] = 1.0
        G = sp.diags(1.0 / rs) @ G
        h = h / rs
    GT = G.T.tocsr()
    ntot = sum(b.n for b in bd) + p
    if ntot == 0:
        # nothing constrains z; bounded only if c vanishes
        if np.abs(c).max(initial=0.0) > 0:
            return IPMResult(np.zeros(m), "unbounded", -np.inf, -np.inf, 0, 0, 0, 0)
        return IPMResult(np.zeros(m), "optimal", 0.0, 0.0, 0, 0, 0, 0)

    # Gram matrix of the constraint map, used to keep dual steps on the
    # affine space <A_i, X> + (G^T x)_i = c_i despite rounding
    gram = (GT @ G).toarray() if p else np.zeros((m, m))
    for b in bd:
        gram += (b.BT @ b.B).toarray()
    try:
        gram_fac = la.cho_factor(gram, lower=False, check_finite=False)
    except la.LinAlgError:
        gram_fac = None

    normc = np.linalg.norm(c)
    normC = np.sqrt(sum(np.sum(b.C**2) for b in bd) + np.sum(h**2))

    # starting point
    X, S = [], []
    for b in bd:
        an = np.sqrt(np.asarray(b.B.multiply(b.B).sum(axis=0)).ravel())
        amax = an.max(initial=0.0)
        xi = max(10.0, np.sqrt(b.n), b.n * np.max((1 + np.abs(c)) / (1 + an), initial=1.0))
        eta = max(10.0, np.sqrt(b.n), amax, np.linalg.norm(b.C))
        X.append(xi * np.eye(b.n))
        S.append(eta * np.eye(b.n))
    x = np.full(p, 10.0)
    s = np.full(p, 10.0)
    z = np.zeros(m)

    status, reason = "max-iter", ""
    it = 0
    pinf = dinf = relgap = np.inf
    pobj = dobj = np.nan
    stall = 0
    # feasible iterate with the smallest gap, kept as a fallback for
    # degenerate problems where the gap stalls short of gap_tol
    best = (np.inf,)
    for it in range(max_iter + 1):
        RS = [b.C + b.amap(z) - Sk for b, Sk in zip(bd, S)]
        rs = G @ z + h - s
        ATX = np.zeros(m)
        for b, Xk in zip(bd, X):
            ATX += b.adjoint(Xk)
        if p:
            ATX += GT @ x
        rc = c - ATX
        pobj = float(c @ z)
        dobj = -sum(float(np.sum(b.C * Xk)) for b, Xk in zip(bd, X)) - float(h @ x)
        mu = (sum(float(np.sum(Xk * Sk)) for Xk, Sk in zip(X, S)) + float(x @ s)) / ntot
        pinf = np.sqrt(sum(np.sum(R**2) for R in RS) + np.sum(rs**2)) / (1 + normC)
        dinf = np.linalg.norm(rc) / (1 + normc)
        relgap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        if verbose:
            log.info("it %3d pobj %+.10e dobj %+.10e pinf %.2e dinf %.2e gap %.2e mu %.2e",
                     it, pobj, dobj, pinf, dinf, relgap, mu)
        if pinf <= feas_tol and dinf <= feas_tol and relgap <= gap_tol:
            status = "optimal"
            break
        if pinf <= feas_tol and dinf <= feas_tol and relgap < best[0]:
            best = (relgap, z, list(X), x, pobj, dobj, pinf, dinf, it)
        # infeasibility certificates
        if dobj > 1e8 * (1 + normc):
            # X / dobj approaches a ray with <A_i, X> = 0 and <C, X> < 0
            cert = np.linalg.norm(ATX) / dobj
            if cert <= 1e-6:
                status, reason = "infeasible", f"dual objective diverged ({dobj:.3g})"
                break
        if pobj < -1e10 and pinf < 1e-6:
            status, reason = "unbounded", f"primal objective diverged ({pobj:.3g})"
            break
        if it == max_iter:
            reason = "iteration limit reached"
            break

        # Schur complement
        Sinv, Lch = [], []
        try:
            for Sk in S:
                L = la.cholesky(Sk, lower=True)
                Lch.append(L)
                Li = la.solve_triangular(L, np.eye(L.shape[0]), lower=True)
                Sinv.append(Li.T @ Li)
        except la.LinAlgError:
            reason = "slack lost definiteness"
            break
        M = np.zeros((m, m))
        for b, Xk, Si in zip(bd, X, Sinv):
            b.schur(Xk, Si, M)
        if p:
            M += (GT @ sp.diags(x / s) @ G).toarray()
        M = _sym(M)
        fac = None
        dm = np.abs(np.diag(M)).max(initial=1.0)
        for reg in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
            try:
                fac = la.cho_factor(M + reg * dm * np.eye(m) if reg else M, lower=False,
                                    check_finite=False)
                break
            except la.LinAlgError:
                continue
        if fac is None:
            reason = "Schur complement is singular"
            break

        XRS = [Xk @ R @ Si for Xk, R, Si in zip(X, RS, Sinv)]

        def direction(Tk, tlp):
            rhs = -rc.copy()
            for b, T in zip(bd, Tk):
                rhs += b.adjoint(T)
            if p:
                rhs += GT @ tlp
            dz = la.cho_solve(fac, rhs, check_finite=False)
            for _ in range(2):
                # iterative refinement against the unregularized Schur matrix
                r = rhs - M @ dz
                if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(rhs)):
                    break
                dz += la.cho_solve(fac, r, check_finite=False)
            dS, dX = [], []
            for b, T, Xk, Si, R in zip(bd, Tk, X, Sinv, RS):
                Adz = b.amap(dz)
                dS.append(R + Adz)
                dX.append(_sym(T - Xk @ Adz @ Si))
            if p:
                Gdz = G @ dz
                ds = rs + Gdz
                dx = tlp - x * Gdz / s
            else:
                ds = dx = np.zeros(0)
            if gram_fac is not None:
                err = rc.copy()
                for b, d in zip(bd, dX):
                    err -= b.adjoint(d)
                if p:
                    err -= GT @ dx
                w = la.cho_solve(gram_fac, err, check_finite=False)
                dX = [d + b.amap(w) for b, d in zip(bd, dX)]
                if p:
                    dx = dx + G @ w
            return dz, dS, dX, ds, dx

        def steps(dS, dX, ds, dx):
            ap = min([_max_step(Sk, d, L) for Sk, d, L in zip(S, dS, Lch)] + [_max_step_lp(s, ds)])
            ad = min([_max_step(Xk, d) for Xk, d in zip(X, dX)] + [_max_step_lp(x, dx)])
            return ap, ad

        # predictor
        Tk = [-Xk - Q for Xk, Q in zip(X, XRS)]
        tlp = -x - x * rs / s if p else np.zeros(0)
        dz, dS, dX, ds, dx = direction(Tk, tlp)
        try:
            ap, ad = steps(dS, dX, ds, dx)
        except la.LinAlgError:
            reason = "iterate lost definiteness"
            break
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = (sum(float(np.sum((Xk + ad * a) * (Sk + ap * b)))
                      for Xk, a, Sk, b in zip(X, dX, S, dS))
                  + float((x + ad * dx) @ (s + ap * ds))) / ntot
        sigma = max(SIGMA_MIN, min(1.0, max(0.0, mu_aff / mu)) ** 3)
        # corrector
        Tk = [sigma * mu * Si - Xk - Q - a @ b @ Si
              for Si, Xk, Q, a, b in zip(Sinv, X, XRS, dX, dS)]
        if p:
            tlp = sigma * mu / s - x - x * rs / s - dx * ds / s
        dz, dS, dX, ds, dx = direction(Tk, tlp)
        try:
            ap, ad = steps(dS, dX, ds, dx)
        except la.LinAlgError:
            reason = "iterate lost definiteness"
            break
        gamma = GAMMA_LO + (GAMMA_HI - GAMMA_LO) * min(ap, ad, 1.0)
        ap, ad = min(1.0, gamma * ap), min(1.0, gamma * ad)
        z = z + ap * dz
        S = [_sym(Sk + ap * d) for Sk, d in zip(S, dS)]
        X = [_sym(Xk + ad * d) for Xk, d in zip(X, dX)]
        if p:
            s = s + ap * ds
            x = x + ad * dx
        stall = stall + 1 if max(ap, ad) < 1e-8 else 0
        if stall >= 5:
            reason = "step lengths collapsed"
            break

    if status == "max-iter" and best[0] <= np.sqrt(gap_tol):
        relgap, z, X, x, pobj, dobj, pinf, dinf, _ = best
        status = "optimal"
        reason = f"reduced accuracy: {reason}; gap stalled at {relgap:.2e}"
    # report dual variables on the caller's scale
    Xout = [Xk * b.scale for Xk, b in zip(X, bd)]
    return IPMResult(z, status, pobj, dobj, it, pinf, dinf, relgap, Xout, x, reason)
