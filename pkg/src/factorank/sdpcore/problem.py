"""Data model for semidefinite programs in linear-matrix-inequality form.

A problem is

    minimize    c0 + sum_v c_v y_v
    subject to  F_k(y) = C_k + sum_v y_v A_{k,v}  is PSD   (each block k)
                r(y) = r_0 + sum_v r_v y_v  == 0 or >= 0  (each linear row)

Blocks keep their coefficient matrices in one sparse ``(dim*dim, nvars)``
array, column ``v`` holding ``vec(A_{k,v})`` in row-major order.  Moment
problems reuse a handful of variables per block entry, so this layout
stays small where a dict of dense matrices would not.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp


class IllFormed(ValueError):
    """Problem data is structurally inconsistent."""


class NotSolved(RuntimeError):
    """A solution was requested from a run that did not reach optimality."""


@dataclass
class AffineBlock:
    """Affine symmetric matrix ``constant + sum_v y_v * coeff(v)``.

    Parameters
    ----------
    dim : int
        Matrix size.
    constant : ndarray, shape (dim, dim)
        Constant part.
    linear : sparse matrix, shape (dim*dim, nvars)
        Column ``v`` is the row-major vectorization of the coefficient
        matrix of variable ``v``.
    label : str
        Human-readable provenance such as ``"moment"`` or ``"loc[x1-x1^2]"``.
    index : list, optional
        Words or monomials labelling the rows, when meaningful.
    """

    dim: int
    constant: np.ndarray
    linear: sp.csc_matrix
    label: str = ""
    index: Optional[list] = None

    def __post_init__(self):
        self.constant = np.asarray(self.constant, dtype=float)
        self.linear = sp.csc_matrix(self.linear, dtype=float)
        if self.dim < 1:
            raise IllFormed(f"block {self.label!r} has dimension {self.dim}")
        if self.constant.shape != (self.dim, self.dim):
            raise IllFormed(f"block {self.label!r}: constant has shape {self.constant.shape}")
        if self.linear.shape[0] != self.dim * self.dim:
            raise IllFormed(f"block {self.label!r}: coefficient rows != dim^2")

    @property
    def nvars(self) -> int:
        return self.linear.shape[1]

    def coeff(self, v: int) -> np.ndarray:
        """Dense coefficient matrix of variable ``v``."""
        return self.linear[:, v].toarray().reshape(self.dim, self.dim)

    @property
    def coeffs(self) -> dict:
        """Map from variable id to its dense coefficient matrix (nonzero only)."""
        used = np.flatnonzero(np.diff(self.linear.indptr))
        return {int(v): self.coeff(v) for v in used}

    def variables(self) -> np.ndarray:
        """Ids of variables with a nonzero coefficient in this block."""
        return np.flatnonzero(np.diff(self.linear.indptr))

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        val = self.constant + (self.linear @ y).reshape(self.dim, self.dim)
        return 0.5 * (val + val.T)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        if not np.allclose(self.constant, self.constant.T, atol=tol):
            return False
        perm = np.arange(self.dim * self.dim).reshape(self.dim, self.dim).T.ravel()
        diff = self.linear - self.linear[perm, :]
        return diff.nnz == 0 or abs(diff).max() <= tol

    def resized(self, nvars: int) -> "AffineBlock":
        """Copy with the coefficient array padded to ``nvars`` columns."""
        lin = sp.csc_matrix(self.linear)
        lin.resize((lin.shape[0], nvars))
        return AffineBlock(self.dim, self.constant.copy(), lin, self.label, self.index)


EQ = "eq"
GEQ = "geq"


@dataclass
class LinearRow:
    """Scalar constraint ``constant + sum_v coeffs[v] * y_v`` (== 0 or >= 0)."""

    coeffs: dict
    constant: float = 0.0
    sense: str = EQ
    label: str = ""

    def __post_init__(self):
        if self.sense not in (EQ, GEQ):
            raise IllFormed(f"unknown sense {self.sense!r}")
        self.coeffs = {int(v): float(c) for v, c in self.coeffs.items() if c != 0.0}

    def evaluate(self, y) -> float:
        return self.constant + sum(c * y[v] for v, c in self.coeffs.items())

    def key(self, digits: int = 12):
        """Hashable signature used for de-duplication."""
        items = tuple(sorted((v, round(c, digits)) for v, c in self.coeffs.items()))
        return (self.sense, items, round(self.constant, digits))


def rows_to_sparse(rows, nvars: int):
    """Stack rows into ``(G, h)`` with row ``i`` reading ``G[i] @ y + h[i]``."""
    data, ri, ci = [], [], []
    h = np.zeros(len(rows))
    for i, r in enumerate(rows):
        for v, c in r.coeffs.items():
            ri.append(i)
            ci.append(v)
            data.append(c)
        h[i] = r.constant
    G = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), nvars))
    return G, h


@dataclass
class SDPProblem:
    """Minimize an affine objective subject to affine PSD blocks and rows."""

    nvars: int
    objective: dict
    blocks: list = field(default_factory=list)
    eq_rows: list = field(default_factory=list)
    ineq_rows: list = field(default_factory=list)
    objective_constant: float = 0.0
    metadata: dict = field(default_factory=dict)
    var_names: Optional[list] = None

    def __post_init__(self):
        self.objective = {int(v): float(c) for v, c in self.objective.items() if c != 0.0}
        self.validate()

    def validate(self) -> None:
        if self.nvars < 1:
            raise IllFormed("problem has no variables")
        for v in self.objective:
            if not 0 <= v < self.nvars:
                raise IllFormed(f"objective references undeclared variable {v}")
        for b in self.blocks:
            if b.nvars != self.nvars:
                raise IllFormed(
                    f"block {b.label!r} has {b.nvars} coefficient columns, expected {self.nvars}"
                )
        for r in list(self.eq_rows) + list(self.ineq_rows):
            for v in r.coeffs:
                if not 0 <= v < self.nvars:
                    raise IllFormed(f"row {r.label!r} references undeclared variable {v}")
        for r in self.eq_rows:
            if r.sense != EQ:
                raise IllFormed("eq_rows must have sense 'eq'")
        for r in self.ineq_rows:
            if r.sense != GEQ:
                raise IllFormed("ineq_rows must have sense 'geq'")

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.nvars)
        for v, a in self.objective.items():
            c[v] = a
        return c

    def objective_value(self, y) -> float:
        return self.objective_constant + float(self.objective_vector() @ np.asarray(y))

    def residuals(self, y) -> dict:
        """Constraint violations of the point ``y``.

        Returns the most negative block eigenvalue (as a nonnegative
        violation), the largest equality residual and the largest
        inequality violation.
        """
        y = np.asarray(y, dtype=float)
        psd = 0.0
        for b in self.blocks:
            lam = np.linalg.eigvalsh(b.evaluate(y))[0]
            psd = max(psd, -lam)
        eq = max((abs(r.evaluate(y)) for r in self.eq_rows), default=0.0)
        ineq = max((max(0.0, -r.evaluate(y)) for r in self.ineq_rows), default=0.0)
        return {"psd": psd, "eq": eq, "ineq": ineq}

    def size_summary(self) -> str:
        dims = [b.dim for b in self.blocks]
        return (
            f"{self.nvars} variables, {len(dims)} blocks (max dim {max(dims, default=0)}), "
            f"{len(self.eq_rows)} equalities, {len(self.ineq_rows)} inequalities"
        )


OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iter"


@dataclass
class SDPSolution:
    """Outcome of :func:`factorank.sdpcore.solve`."""

    y: np.ndarray
    status: str
    primal_objective: float
    dual_objective: float
    psd_violation: float
    eq_residual: float
    ineq_violation: float = 0.0
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.primal_objective

    @property
    def gap(self) -> float:
        p, d = self.primal_objective, self.dual_objective
        return abs(p - d) / (1.0 + abs(p) + abs(d))

    def require_optimal(self) -> None:
        if self.status != OPTIMAL:
            raise NotSolved(f"solver status is {self.status!r}")
