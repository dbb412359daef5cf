"""Sparse SDPA (``.dat-s``) writer and reader.

SDPA reads problems as

    minimize  sum_i c_i x_i   s.t.  sum_i F_i x_i - F_0  PSD

so an LMI block ``C + sum_i y_i A_i`` maps to ``F_0 = -C`` and
``F_i = A_i``.  Scalar rows become one diagonal block (negative size in the
header).  SDPA has no equality constraints, so equalities are either
written as two opposite inequalities or eliminated first.
"""
from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp

from .problem import EQ, GEQ, AffineBlock, IllFormed, LinearRow, SDPProblem

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % x


def _eliminated(p: SDPProblem) -> SDPProblem:
    """Equivalent problem in the free variables of the equality system."""
    from .presolve import _eliminate
    from .problem import rows_to_sparse

    E, e = rows_to_sparse(p.eq_rows, p.nvars)
    z0, T = _eliminate(E, e, p.nvars)
    T = sp.csc_matrix(T)
    nz = T.shape[1]
    blocks = []
    for b in p.blocks:
        C = b.constant + (b.linear @ z0).reshape(b.dim, b.dim)
        blocks.append(AffineBlock(b.dim, C, b.linear @ T, b.label, b.index))
    rows = []
    Tr = T.tocsr()
    for r in p.ineq_rows:
        vec = np.zeros(p.nvars)
        for v, cf in r.coeffs.items():
            vec[v] = cf
        new = Tr.T @ vec
        rows.append(LinearRow({j: new[j] for j in np.flatnonzero(new)},
                              r.constant + float(vec @ z0), GEQ, r.label))
    c = p.objective_vector()
    cn = Tr.T @ c
    return SDPProblem(
        nvars=nz,
        objective={j: cn[j] for j in np.flatnonzero(cn)},
        blocks=blocks,
        ineq_rows=rows,
        objective_constant=p.objective_constant + float(c @ z0),
        metadata=dict(p.metadata),
    )


def export_sdpa(p: SDPProblem, equalities: str = "pairs") -> str:
    """Render ``p`` in sparse SDPA format.

    Parameters
    ----------
    p : SDPProblem
    equalities : {"pairs", "eliminate"}
        ``pairs`` writes each equality as two opposite inequalities;
        ``eliminate`` substitutes the equalities away first, so the file's
        variables are the free variables of the equality system.

    Returns
    -------
    str
        File content with LF line endings.  A nonzero objective constant is
        recorded in a leading ``*`` comment line.
    """
    if equalities == "eliminate" and p.eq_rows:
        p = _eliminated(p)
    elif equalities not in ("pairs", "eliminate"):
        raise ValueError(f"unknown equality handling {equalities!r}")
    rows = list(p.ineq_rows)
    for r in p.eq_rows:
        rows.append(LinearRow(r.coeffs, r.constant, GEQ, r.label))
        rows.append(LinearRow({v: -c for v, c in r.coeffs.items()}, -r.constant, GEQ, r.label))
    sizes = [b.dim for b in p.blocks]
    if rows:
        sizes.append(-len(rows))
    if not sizes:
        raise IllFormed("SDPA needs at least one block")
    lines = []
    if p.objective_constant != 0.0:
        lines.append(f"* objective_constant = {_fmt(p.objective_constant)}")
    lines.append(str(p.nvars))
    lines.append(str(len(sizes)))
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(_fmt(x) for x in p.objective_vector()))
    entries = []
    for k, b in enumerate(p.blocks, start=1):
        n = b.dim
        for i in range(n):
            for j in range(i, n):
                v = -b.constant[i, j]
                if v != 0.0:
                    entries.append((0, k, i + 1, j + 1, v))
        coo = b.linear.tocoo()
        r, cidx = np.divmod(coo.row, n)
        for a, bb, var, val in zip(r, cidx, coo.col, coo.data):
            if a <= bb and val != 0.0:
                entries.append((int(var) + 1, k, int(a) + 1, int(bb) + 1, float(val)))
    if rows:
        k = len(p.blocks) + 1
        for i, r in enumerate(rows, start=1):
            if r.constant != 0.0:
                entries.append((0, k, i, i, -r.constant))
            for v, cf in r.coeffs.items():
                entries.append((v + 1, k, i, i, cf))
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    for m, k, i, j, v in entries:
        lines.append(f"{m} {k} {i} {j} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _tokens(line: str) -> list:
    return [t for t in re.split(r"[\s,{}()]+", line.strip()) if t]


def read_sdpa(text: str) -> SDPProblem:
    """Parse sparse SDPA text back into an :class:`SDPProblem`.

    Diagonal (negative-size) blocks become scalar inequality rows.
    """
    const = 0.0
    body = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s:
            continue
        if s[0] in "*\"":
            m = re.match(r"[*\"]\s*objective_constant\s*=\s*(\S+)", s)
            if m:
                const = float(m.group(1))
            continue
        body.append(s)
    if len(body) < 4:
        raise IllFormed("truncated SDPA header")
    nvars = int(_tokens(body[0])[0])
    nblocks = int(_tokens(body[1])[0])
    sizes = [int(x) for x in _tokens(body[2])[:nblocks]]
    cvec = [float(x) for x in _tokens(body[3])[:nvars]]
    if len(sizes) != nblocks or len(cvec) != nvars:
        raise IllFormed("malformed SDPA header")
    sdp = {k: ([], [], [], np.zeros((s, s))) for k, s in enumerate(sizes, 1) if s > 0}
    lp = {k: ({}, np.zeros(-s)) for k, s in enumerate(sizes, 1) if s < 0}
    lp_coeffs = {k: [dict() for _ in range(-s)] for k, s in enumerate(sizes, 1) if s < 0}
    for line in body[4:]:
        tk = _tokens(line)
        if len(tk) < 5:
            raise IllFormed(f"bad entry line {line!r}")
        m, k, i, j = (int(x) for x in tk[:4])
        v = float(tk[4])
        if k in sdp:
            n = sizes[k - 1]
            rows, cols, vals, C = sdp[k]
            i0, j0 = min(i, j) - 1, max(i, j) - 1
            if m == 0:
                C[i0, j0] -= v
                if i0 != j0:
                    C[j0, i0] -= v
            else:
                rows.append(i0 * n + j0)
                cols.append(m - 1)
                vals.append(v)
                if i0 != j0:
                    rows.append(j0 * n + i0)
                    cols.append(m - 1)
                    vals.append(v)
        elif k in lp:
            if i != j:
                raise IllFormed("off-diagonal entry in a diagonal block")
            if m == 0:
                lp[k][1][i - 1] -= v
            else:
                d = lp_coeffs[k][i - 1]
                d[m - 1] = d.get(m - 1, 0.0) + v
        else:
            raise IllFormed(f"entry refers to unknown block {k}")
    blocks = []
    for k, (rows, cols, vals, C) in sdp.items():
        n = sizes[k - 1]
        lin = sp.csc_matrix((vals, (rows, cols)), shape=(n * n, nvars))
        blocks.append(AffineBlock(n, C, lin, f"block{k}"))
    ineq = []
    for k, (_, h) in lp.items():
        for i, d in enumerate(lp_coeffs[k]):
            ineq.append(LinearRow(d, h[i], GEQ, f"lp{k}[{i + 1}]"))
    return SDPProblem(
        nvars=nvars,
        objective={v: cv for v, cv in enumerate(cvec) if cv != 0.0},
        blocks=blocks,
        ineq_rows=ineq,
        objective_constant=const,
    )
