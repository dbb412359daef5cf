"""Front door of the embedded SDP solver: presolve, interior point, verification."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ipm import solve_lmi
from .presolve import presolve
from .problem import (
    INFEASIBLE,
    MAX_ITER,
    OPTIMAL,
    UNBOUNDED,
    IllFormed,
    SDPProblem,
    SDPSolution,
    rows_to_sparse,
)

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    """Tolerances and limits for :func:`solve`.

    ``feas_tol`` bounds the relative constraint violations of the returned
    point and ``gap_tol`` the relative duality gap.
    """

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    use_presolve: bool = True


def _relative_violations(p: SDPProblem, y: np.ndarray) -> dict:
    psd = 0.0
    for b in p.blocks:
        F = b.evaluate(y)
        lam = np.linalg.eigvalsh(F)[0]
        psd = max(psd, -lam / (1.0 + np.abs(F).max()))
    eq = 0.0
    for r in p.eq_rows:
        size = abs(r.constant) + sum(abs(c * y[v]) for v, c in r.coeffs.items())
        eq = max(eq, abs(r.evaluate(y)) / (1.0 + size))
    ineq = 0.0
    for r in p.ineq_rows:
        size = abs(r.constant) + sum(abs(c * y[v]) for v, c in r.coeffs.items())
        ineq = max(ineq, max(0.0, -r.evaluate(y)) / (1.0 + size))
    return {"psd": psd, "eq": eq, "ineq": ineq}


def solve(p: SDPProblem, opts: SolverOptions | None = None, **kwargs) -> SDPSolution:
    """Solve ``p`` and verify the answer against the original constraints.

    Parameters
    ----------
    p : SDPProblem
    opts : SolverOptions, optional
        Keyword arguments override individual fields.

    Returns
    -------
    SDPSolution
        ``status`` is ``optimal`` only when the interior-point method
        converged and the recovered point passes ``feas_tol`` on every
        original block and row (violations are relative to the size of the
        entries involved).
    """
    opts = opts or SolverOptions()
    for k, v in kwargs.items():
        setattr(opts, k, v)
    p.validate()
    if not p.objective and not p.blocks and not p.eq_rows and not p.ineq_rows:
        raise IllFormed("empty problem")
    t0 = time.perf_counter()
    c = p.objective_vector()
    E, e = rows_to_sparse(p.eq_rows, p.nvars)
    G, h = rows_to_sparse(p.ineq_rows, p.nvars)
    blocks = [(b.constant, b.linear, b.label) for b in p.blocks]
    if opts.use_presolve:
        red = presolve(p.nvars, c, p.objective_constant, blocks, E, e, G, h)
    else:
        from .presolve import Reduced

        if E.shape[0]:
            # without presolve, equalities become opposite inequality pairs
            G = sp.vstack([G, E, -E]).tocsr()
            h = np.concatenate([h, e, -e])
        red = Reduced(np.zeros(p.nvars), sp.identity(p.nvars, format="csr"), c,
                      p.objective_constant, [], G, h)
        from .presolve import WorkBlock

        red.blocks = [WorkBlock(C, sp.csc_matrix(B), lab, np.arange(C.shape[0]))
                      for C, B, lab in blocks]
    diag = {"presolve": dict(red.stats), "presolve_time": time.perf_counter() - t0}
    if red.status is not None:
        y = red.y0.copy()
        diag["reason"] = red.reason
        val = np.inf if red.status == INFEASIBLE else -np.inf
        return SDPSolution(y, red.status, val, val, np.nan, np.nan, np.nan, 0, diag)
    res = solve_lmi(
        red.c,
        [(b.C, b.B) for b in red.blocks],
        red.G,
        red.h,
        feas_tol=opts.feas_tol,
        gap_tol=opts.gap_tol,
        max_iter=opts.max_iter,
        verbose=opts.verbose,
    )
    y = red.lift(res.z)
    viol = _relative_violations(p, y)
    pobj = p.objective_value(y)
    dobj = res.dobj + red.c0
    diag.update(
        reason=res.reason,
        ipm_pinf=res.pinf,
        ipm_dinf=res.dinf,
        ipm_gap=res.relgap,
        solve_time=time.perf_counter() - t0,
    )
    status = res.status
    if status == OPTIMAL:
        worst = max(viol.values())
        if worst > opts.feas_tol:
            status = MAX_ITER
            diag["reason"] = f"recovered point violates constraints by {worst:.3g}"
    elif status == UNBOUNDED:
        pobj = dobj = -np.inf
    elif status == INFEASIBLE:
        pobj = dobj = np.inf
    return SDPSolution(
        y=y,
        status=status,
        primal_objective=pobj,
        dual_objective=dobj,
        psd_violation=viol["psd"],
        eq_residual=viol["eq"],
        ineq_violation=viol["ineq"],
        iterations=res.iterations,
        diagnostics=diag,
    )
