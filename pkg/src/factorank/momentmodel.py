"""Moment tables and the affine blocks and rows built from them.

A :class:`MomentTable` assigns one scalar unknown to every canonical class
of words of degree at most ``2t`` (the values ``L(w)`` of a linear
functional), except for classes whose value is fixed by the input data.
The builders in this module turn polynomials into affine PSD blocks and
scalar rows over those unknowns:

* :func:`moment_block`: the moment matrix ``M_t(L)``;
* :func:`localizing_block`: ``M_{t - ceil(deg g / 2)}(g L)``;
* :func:`bilinear_block`: the matrix ``(L(u* g v g2))_{u,v}``;
* :func:`tensor_block`: the symmetry-reduced form of the tensor
  constraint ``A^{(x) l} - (L((w w')^c))_{w,w'} >= 0``;
* :func:`ideal_rows` and :func:`scalar_positivity_rows`: scalar equalities
  ``L(p h) = 0`` and inequalities ``L(g u) >= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .polyalg import (
    COMMUTATIVE,
    EquivalenceMode,
    Polynomial,
    all_words,
    basis_words,
    canonical_word,
    enumerate_words,
    monomials_of_degree,
    multinomial_dm,
    word_str,
    MAX_DEGREE,
    DegreeError,
)
from .sdpcore.problem import EQ, GEQ, AffineBlock, LinearRow

__all__ = [
    "MomentTable",
    "ConflictingFix",
    "EmptyBlock",
    "ModeError",
    "LevelError",
    "new_table",
    "moment_block",
    "localizing_block",
    "bilinear_block",
    "tensor_block",
    "ideal_rows",
    "scalar_positivity_rows",
    "trace_moments",
    "atomic_moments",
    "AffineBlock",
    "LinearRow",
    "Polynomial",
]

#: Absolute tolerance for merging two fixes that land in the same class.
MERGE_TOL = 1e-12


class ConflictingFix(ValueError):
    """Two data values were assigned to the same canonical class."""


class EmptyBlock(ValueError):
    """A localizer's degree leaves no room for an index basis at this level."""


class ModeError(ValueError):
    """The requested construction needs a different equivalence mode."""


class LevelError(ValueError):
    """The requested construction does not fit at this level."""


@dataclass
class MomentTable:
    """Moment unknowns ``L(w)`` for all canonical classes of degree <= 2t.

    Attributes
    ----------
    n : int
        Number of symbols.
    t : int
        Level; classes go up to degree ``2 t``.
    mode : EquivalenceMode
        Identifications imposed on the functional.
    var_words : list
        ``var_words[i]`` is the canonical word carried by variable ``i``.
        Variable 0 is always the empty word.
    var_of : dict
        Inverse of ``var_words``.
    fixed : dict
        Canonical word to fixed value.
    """

    n: int
    t: int
    mode: EquivalenceMode
    var_words: list
    var_of: dict
    fixed: dict = field(default_factory=dict)

    @property
    def level(self) -> int:
        return 2 * self.t

    @property
    def nvars(self) -> int:
        return len(self.var_words)

    @property
    def commutative(self) -> bool:
        return self.mode.commutative

    def canon(self, w) -> tuple:
        return canonical_word(tuple(w), self.mode)

    def lookup(self, w):
        """Return ``(var_id, 0.0)`` for a free class or ``(-1, value)`` for a fixed one."""
        c = canonical_word(w, self.mode)
        v = self.var_of.get(c)
        if v is not None:
            return v, 0.0
        try:
            return -1, self.fixed[c]
        except KeyError:
            raise LevelError(f"word {word_str(w)} exceeds degree {2 * self.t}") from None

    def var(self, w) -> int:
        """Variable id of the class of ``w``; raises ``KeyError`` for fixed classes."""
        return self.var_of[self.canon(w)]

    def var_names(self) -> list:
        return [f"L({word_str(w)})" for w in self.var_words]

    def value_of(self, w, y) -> float:
        """Numeric ``L(w)`` given a solution vector ``y``."""
        v, c = self.lookup(tuple(w))
        return float(y[v]) if v >= 0 else c

    def basis(self, d: int) -> list:
        """Index words of degree <= d (all words, or monomials if commutative)."""
        return basis_words(self.n, d, self.commutative)


def new_table(
    n: int,
    t: int,
    mode: EquivalenceMode,
    fixes: Iterable = (),
    merge_tol: float = MERGE_TOL,
) -> MomentTable:
    """Build the table of unknowns for level ``t``.

    Parameters
    ----------
    n, t : int
        Number of symbols and level.
    mode : EquivalenceMode
        Identifications imposed on ``L``.
    fixes : iterable of (word, value)
        Data entries such as ``((i, j), A[i-1, j-1])``.
    merge_tol : float
        Two fixes of one class must agree to this absolute tolerance.

    Raises
    ------
    ConflictingFix
        If two fixes of the same class disagree.
    """
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    if 2 * t > MAX_DEGREE:
        raise DegreeError(f"level 2t = {2 * t} exceeds the cap {MAX_DEGREE}")
    fixed: dict = {}
    for w, val in fixes:
        w = tuple(w)
        if len(w) > 2 * t:
            raise LevelError(f"fixed word {word_str(w)} has degree above 2t = {2 * t}")
        if len(w) == 0:
            raise ConflictingFix("the class of the empty word must stay a variable")
        c = canonical_word(w, mode)
        val = float(val)
        if c in fixed:
            if abs(fixed[c] - val) > merge_tol:
                raise ConflictingFix(
                    f"class of {word_str(w)} fixed to both {fixed[c]!r} and {val!r}"
                )
            continue
        fixed[c] = val
    classes = enumerate_words(n, 2 * t, mode)
    var_words = [c for c in classes if c not in fixed]
    var_of = {c: i for i, c in enumerate(var_words)}
    return MomentTable(n=n, t=t, mode=mode, var_words=var_words, var_of=var_of, fixed=fixed)


def _as_terms(g) -> dict:
    if g is None:
        return {(): 1.0}
    return Polynomial.coerce(g).terms


def _pdeg(terms: dict) -> int:
    return max((len(w) for w in terms), default=0)


def _build_block(tab: MomentTable, index: list, left: dict, right: dict | None, label: str) -> AffineBlock:
    """Block with entry ``(u, v) = sum L(u* a v b)`` over terms a of left, b of right."""
    dim = len(index)
    nv = tab.nvars
    const = np.zeros((dim, dim))
    rows, cols, vals = [], [], []
    right = right or {(): 1.0}
    lookup = tab.lookup
    for i, u in enumerate(index):
        us = u[::-1]
        for j in range(i, dim):
            v = index[j]
            acc: dict = {}
            cval = 0.0
            for a, ca in left.items():
                head = us + a + v
                for b, cb in right.items():
                    vid, c = lookup(head + b)
                    coef = ca * cb
                    if vid >= 0:
                        acc[vid] = acc.get(vid, 0.0) + coef
                    else:
                        cval += coef * c
            const[i, j] = cval
            const[j, i] = cval
            for vid, coef in acc.items():
                if coef == 0.0:
                    continue
                rows.append(i * dim + j)
                cols.append(vid)
                vals.append(coef)
                if i != j:
                    rows.append(j * dim + i)
                    cols.append(vid)
                    vals.append(coef)
    lin = sp.csc_matrix((vals, (rows, cols)), shape=(dim * dim, nv))
    lin.sum_duplicates()
    return AffineBlock(dim, const, lin, label, list(index))


def moment_block(tab: MomentTable) -> AffineBlock:
    """Moment matrix ``M_t(L)`` with entries ``L(u* v)``."""
    return _build_block(tab, tab.basis(tab.t), {(): 1.0}, None, "moment")


def _poly_label(terms: dict) -> str:
    return repr(Polynomial(terms)).replace(" ", "")


def localizing_block(tab: MomentTable, g, label: str | None = None) -> AffineBlock:
    """Localizing matrix of ``g`` at level ``t``.

    The index basis has degree ``t - ceil(deg g / 2)``.  ``g`` should be
    symmetric (``g* = g``) so that the block is symmetric.

    Raises
    ------
    EmptyBlock
        If ``deg g > 2 t``.
    """
    terms = _as_terms(g)
    d = tab.t - math.ceil(_pdeg(terms) / 2)
    if d < 0:
        raise EmptyBlock(f"localizer of degree {_pdeg(terms)} does not fit at level {tab.t}")
    return _build_block(tab, tab.basis(d), terms, None, label or f"loc[{_poly_label(terms)}]")


def bilinear_block(tab: MomentTable, g, g2, label: str | None = None) -> AffineBlock:
    """Matrix ``(L(u* g v g2))_{u,v}`` over words of degree ``t - ceil((deg g + deg g2)/2)``.

    Its PSD-ness encodes ``L(p* g p g2) >= 0`` for every admissible ``p``.
    With a tracial, symmetric functional and symmetric ``g, g2`` the matrix
    is symmetric.
    """
    t1, t2 = _as_terms(g), _as_terms(g2)
    d = tab.t - math.ceil((_pdeg(t1) + _pdeg(t2)) / 2)
    if d < 0:
        raise EmptyBlock("bilinear pair does not fit at this level")
    lab = label or f"bil[{_poly_label(t1)};{_poly_label(t2)}]"
    return _build_block(tab, tab.basis(d), t1, t2, lab)


def _row_from_terms(tab: MomentTable, terms: dict, sense: str, label: str) -> LinearRow:
    acc: dict = {}
    cval = 0.0
    for w, c in terms.items():
        vid, val = tab.lookup(w)
        if vid >= 0:
            acc[vid] = acc.get(vid, 0.0) + c
        else:
            cval += c * val
    return LinearRow(acc, cval, sense, label)


def _dedupe(rows: list, tol: float = 1e-14) -> list:
    seen = set()
    out = []
    for r in rows:
        if not r.coeffs and abs(r.constant) <= tol:
            continue
        if r.sense == GEQ and not r.coeffs and r.constant >= 0:
            continue
        k = r.key()
        if k in seen:
            continue
        seen.add(k)
        out.append(r)
    return out


def _multipliers(tab: MomentTable, d: int) -> list:
    if d < 0:
        return []
    if tab.commutative:
        return tab.basis(d)
    return all_words(tab.n, d)


def ideal_rows(tab: MomentTable, T: Sequence) -> list:
    """Equalities ``L(p h) = 0`` for ``h`` in ``T`` and all ``p`` with ``deg(p h) <= 2t``.

    Rows that become identically zero after substitution are dropped and
    duplicates are removed.  A row with no unknowns but a nonzero constant
    is kept: it witnesses that the data contradict the ideal.
    """
    rows = []
    for h in T:
        terms = _as_terms(h)
        dh = _pdeg(terms)
        if dh > 2 * tab.t:
            raise LevelError("ideal generator exceeds degree 2t")
        lab = _poly_label(terms)
        for p in _multipliers(tab, 2 * tab.t - dh):
            prod = {}
            for w, c in terms.items():
                pw = p + w
                prod[pw] = prod.get(pw, 0.0) + c
            rows.append(_row_from_terms(tab, prod, EQ, f"ideal[{word_str(p)}*({lab})]"))
    return _dedupe(rows)


def scalar_positivity_rows(tab: MomentTable, S: Sequence) -> list:
    """Inequalities ``L(g u) >= 0`` for ``g`` in ``{1} + S`` and monomials ``u``.

    Only defined for commutative tables.
    """
    if not tab.commutative:
        raise ModeError("scalar positivity rows need a commutative table")
    rows = []
    for g in [None] + list(S):
        terms = _as_terms(g)
        lab = _poly_label(terms)
        for u in tab.basis(2 * tab.t - _pdeg(terms)):
            prod = {}
            for w, c in terms.items():
                wu = w + u
                prod[wu] = prod.get(wu, 0.0) + c
            rows.append(_row_from_terms(tab, prod, GEQ, f"pos[({lab})*{word_str(u)}]"))
    return _dedupe(rows)


def _reduction_matrix(n: int, l: int):
    """Sparse ``Q_l`` of shape (monomials, words) and the monomial list."""
    monos = monomials_of_degree(n, l)
    pos = {m: k for k, m in enumerate(monos)}
    words = all_words(n, l)[-(n**l):]
    ri, ci, vals = [], [], []
    for j, w in enumerate(words):
        m = tuple(sorted(w))
        ri.append(pos[m])
        ci.append(j)
        vals.append(1.0 / multinomial_dm(m))
    Q = sp.csr_matrix((vals, (ri, ci)), shape=(len(monos), n**l))
    return Q, monos, words


def tensor_block(tab: MomentTable, A, l: int) -> AffineBlock:
    """Symmetry-reduced tensor constraint of order ``l``.

    Rows and columns are the monomials of degree exactly ``l``; the
    constant part is ``Q_l A^{(x) l} Q_l^T`` and the entry ``(m, m')`` has
    ``-L(m m')`` subtracted.  The block is PSD exactly when the
    word-indexed matrix ``A^{(x) l} - (L((w w')^c))`` is.
    """
    if not tab.commutative:
        raise ModeError("tensor constraints need a commutative table")
    if not 2 <= l <= tab.t:
        raise LevelError(f"tensor order {l} must lie in [2, t={tab.t}]")
    A = np.asarray(A, dtype=float)
    if A.shape != (tab.n, tab.n):
        raise ValueError("matrix size does not match the number of symbols")
    Q, monos, _ = _reduction_matrix(tab.n, l)
    K = A
    for _ in range(l - 1):
        K = np.kron(K, A)
    const = np.asarray(Q @ (Q @ K).T).T
    const = 0.5 * (const + const.T)
    dim = len(monos)
    rows, cols, vals = [], [], []
    for i, m in enumerate(monos):
        for j in range(dim):
            vid, c = tab.lookup(m + monos[j])
            if vid >= 0:
                rows.append(i * dim + j)
                cols.append(vid)
                vals.append(-1.0)
            else:
                const[i, j] -= c
    lin = sp.csc_matrix((vals, (rows, cols)), shape=(dim * dim, tab.nvars))
    return AffineBlock(dim, const, lin, f"tensor[{l}]", list(monos))


def trace_moments(tab: MomentTable, mats: Sequence[np.ndarray], weight: float = 1.0) -> np.ndarray:
    """Variable vector of the trace functional ``L(w) = weight * tr(X_w)``.

    Parameters
    ----------
    mats : sequence of square matrices
        ``mats[i-1]`` plays the role of ``x_i``.
    """
    mats = [np.asarray(X, dtype=float) for X in mats]
    d = mats[0].shape[0]
    y = np.empty(tab.nvars)
    for k, w in enumerate(tab.var_words):
        P = np.eye(d)
        for a in w:
            P = P @ mats[a - 1]
        y[k] = weight * np.trace(P)
    return y


def atomic_moments(tab: MomentTable, points: np.ndarray, weights: Sequence[float]) -> np.ndarray:
    """Variable vector of ``L(w) = sum_k weights[k] * prod_i points[k, w_i]``.

    This is the moment sequence of a finite atomic measure, used to plug
    explicit nonnegative factorizations into commutative programs.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    y = np.empty(tab.nvars)
    for k, w in enumerate(tab.var_words):
        vals = np.ones(points.shape[0])
        for a in w:
            vals = vals * points[:, a - 1]
        y[k] = float(weights @ vals)
    return y
