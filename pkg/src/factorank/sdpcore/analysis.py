"""Post-solve analysis: numeric moment matrices, ranks and flatness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import OPTIMAL, NotSolved, SDPSolution

DEFAULT_RANK_TOL = 1e-6


def numeric_rank(M: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``rank_tol * sigma_max``.

    With ``rank_tol = 0`` the threshold falls back to machine precision
    times the matrix size, which recovers exact ranks on exactly
    representable inputs.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    tol = rank_tol * sv[0] if rank_tol > 0 else np.finfo(float).eps * max(M.shape) * sv[0]
    return int(np.sum(sv > tol))


def _require(sol) -> np.ndarray:
    if isinstance(sol, SDPSolution):
        if sol.status != OPTIMAL:
            raise NotSolved(f"solution status is {sol.status!r}")
        return sol.y
    return np.asarray(sol, dtype=float)


def extract_moment_matrix(sol, tab, s: int | None = None) -> np.ndarray:
    """Numeric moment matrix ``M_s(L)`` from a solution and its table.

    ``sol`` may be an :class:`SDPSolution` (which must be optimal) or a raw
    variable vector.
    """
    y = _require(sol)
    s = tab.t if s is None else s
    if not 0 <= s <= tab.t:
        raise ValueError(f"s must lie in [0, {tab.t}]")
    idx = tab.basis(s)
    d = len(idx)
    M = np.empty((d, d))
    for i, u in enumerate(idx):
        us = u[::-1]
        for j in range(i, d):
            M[i, j] = M[j, i] = tab.value_of(us + idx[j], y)
    return M


@dataclass
class FlatnessReport:
    """Rank comparison of ``M_t(L)`` with its truncations ``M_{t-delta}(L)``.

    ``entries`` holds ``(delta, rank_t, rank_t_minus_delta, rank_tol, flat)``
    for ``delta = 1..t``.
    """

    t: int
    entries: list = field(default_factory=list)

    @property
    def flat(self) -> bool:
        return any(e[4] for e in self.entries)

    def is_flat(self, delta: int) -> bool:
        for e in self.entries:
            if e[0] == delta:
                return e[4]
        raise KeyError(delta)

    @property
    def rank(self) -> int:
        return self.entries[0][1] if self.entries else 0

    def __str__(self) -> str:
        parts = [f"delta={d}: rank M_t={a}, rank M_(t-{d})={b}{' flat' if f else ''}"
                 for d, a, b, _, f in self.entries]
        return "; ".join(parts)


def flatness(sol, tab, rank_tol: float = DEFAULT_RANK_TOL) -> FlatnessReport:
    """Check ``rank M_t(L) = rank M_{t-delta}(L)`` for each ``delta`` in ``1..t``."""
    Mt = extract_moment_matrix(sol, tab, tab.t)
    rt = numeric_rank(Mt, rank_tol)
    rep = FlatnessReport(tab.t)
    for delta in range(1, tab.t + 1):
        Ms = extract_moment_matrix(sol, tab, tab.t - delta)
        rs = numeric_rank(Ms, rank_tol)
        rep.entries.append((delta, rt, rs, rank_tol, rt == rs))
    return rep
