"""Matrix families used to exercise the bounds, plus file ingestion.

Generators are looked up by name in :data:`FAMILIES` through :func:`gen`;
user matrices are read with :func:`load`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECK_TOL = 1e-9


class UnknownFamily(KeyError):
    """No generator is registered under the requested name."""


class ParamRange(UserWarning):
    """Parameters lie outside the range where the family has its usual meaning."""


class ParseError(ValueError):
    """A matrix file could not be parsed."""


@dataclass(frozen=True)
class MatrixInstance:
    """A named matrix and the checks it passed."""

    values: np.ndarray
    tags: frozenset = field(default_factory=frozenset)
    provenance: str = ""

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def checks(A) -> frozenset:
    """Tags among ``symmetric``, ``psd`` and ``nonneg`` that ``A`` satisfies.

    ``psd`` requires symmetry and a smallest eigenvalue of at least
    ``-1e-9 * ||A||``.
    """
    A = np.asarray(A, dtype=float)
    tags = set()
    scale = max(1.0, np.abs(A).max(initial=0.0))
    if A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.T, atol=CHECK_TOL * scale):
        tags.add("symmetric")
        if np.linalg.eigvalsh(0.5 * (A + A.T))[0] >= -CHECK_TOL * np.linalg.norm(A, 2):
            tags.add("psd")
    if (A >= -CHECK_TOL * scale).all():
        tags.add("nonneg")
    return frozenset(tags)


def _inst(A, name: str) -> MatrixInstance:
    A = np.array(A, dtype=float)
    A.setflags(write=False)
    return MatrixInstance(A, checks(A), name)


def a_alpha(alpha: float) -> np.ndarray:
    """``[[1, alpha], [alpha, 1]]``."""
    return np.array([[1.0, alpha], [alpha, 1.0]])


def nonneg_2x2(alpha: float) -> np.ndarray:
    """``[[1, 1], [1, alpha]]``, the 2x2 family used for the nonnegative rank."""
    return np.array([[1.0, 1.0], [1.0, alpha]])


def circulant5(alpha: float) -> np.ndarray:
    """Symmetric 5x5 circulant with first row ``(1, alpha, 0, 0, alpha)``."""
    if not 0 <= alpha <= 0.5:
        warnings.warn("circulant5 is completely positive semidefinite only for alpha in [0, 1/2]",
                      ParamRange, stacklevel=3)
    row = np.array([1.0, alpha, 0.0, 0.0, alpha])
    return np.array([np.roll(row, k) for k in range(5)])


def circulant5_factors(alpha: float) -> list:
    """Diagonal 5x5 PSD factors ``X_i`` with ``Tr(X_i X_j) = circulant5(alpha)_ij``."""
    beta = (1 + math.sqrt(1 - 4 * alpha**2)) / 2
    out = []
    for i in range(5):
        v = np.zeros(5)
        v[i] += math.sqrt(beta)
        v[(i + 1) % 5] += math.sqrt(1 - beta)
        out.append(np.diag(v))
    return out


def cos2_circulant() -> np.ndarray:
    """5x5 matrix with entries ``cos^2((i - j) 4 pi / 5)``."""
    i = np.arange(5)
    return np.cos((i[:, None] - i[None, :]) * 4 * math.pi / 5) ** 2


def bipartite_p(a: float, b: float, p: int = 2, q: int = 3) -> np.ndarray:
    """``[[(a + q) I_p, J], [J, (b + p) I_q]]``."""
    if a < 0 or b < 0:
        warnings.warn("bipartite_p is studied for a, b >= 0", ParamRange, stacklevel=3)
    top = np.hstack([(a + q) * np.eye(p), np.ones((p, q))])
    bot = np.hstack([np.ones((q, p)), (b + p) * np.eye(q)])
    return np.vstack([top, bot])


def nested_slack(a: float, b: float) -> np.ndarray:
    """Slack matrix of the rectangle ``[-a,a] x [-b,b]`` inside the square ``[-1,1]^2``."""
    if not (0 <= a <= 1 and 0 <= b <= 1):
        warnings.warn("nested_slack is studied for a, b in [0, 1]; its entries are "
                      "nonnegative exactly when |a|, |b| <= 1", ParamRange, stacklevel=3)
    return np.array([
        [1 - a, 1 + a, 1 - b, 1 + b],
        [1 + a, 1 - a, 1 - b, 1 + b],
        [1 + a, 1 - a, 1 + b, 1 - b],
        [1 - a, 1 + a, 1 + b, 1 - b],
    ])


def circulant3(b: float, c: float) -> np.ndarray:
    """``[[1, b, c], [c, 1, b], [b, c, 1]]``."""
    if b < 0 or c < 0:
        warnings.warn("circulant3 is nonnegative only for b, c >= 0", ParamRange, stacklevel=3)
    return np.array([[1.0, b, c], [c, 1.0, b], [b, c, 1.0]])


def slack_quadrilateral() -> np.ndarray:
    return np.array([[0, 0, 2, 2], [1, 0, 0, 3], [0, 1, 3, 0], [2, 2, 0, 0]], dtype=float)


def slack_hexagon() -> np.ndarray:
    return np.array([
        [0, 1, 2, 2, 1, 0],
        [0, 0, 1, 2, 2, 1],
        [1, 0, 0, 1, 2, 2],
        [2, 1, 0, 0, 1, 2],
        [2, 2, 1, 0, 0, 1],
        [1, 2, 2, 1, 0, 0],
    ], dtype=float)


def slack_hexagon_scaled() -> np.ndarray:
    """``Diag(2, 2, 1, 1, 1, 1)`` times the hexagon slack matrix."""
    return np.diag([2.0, 2, 1, 1, 1, 1]) @ slack_hexagon()


def identity(n: int) -> np.ndarray:
    return np.eye(int(n))


def ones(m: int, n: int | None = None) -> np.ndarray:
    return np.ones((int(m), int(m if n is None else n)))


FAMILIES = {
    "A_alpha": (a_alpha, ("alpha",)),
    "nonneg_2x2": (nonneg_2x2, ("alpha",)),
    "circulant5": (circulant5, ("alpha",)),
    "cos2_circulant": (cos2_circulant, ()),
    "bipartite_p": (bipartite_p, ("a", "b", "p", "q")),
    "nested_slack": (nested_slack, ("a", "b")),
    "circulant3": (circulant3, ("b", "c")),
    "slack_quadrilateral": (slack_quadrilateral, ()),
    "slack_quadrilateral_T": (lambda: slack_quadrilateral().T.copy(), ()),
    "slack_hexagon": (slack_hexagon, ()),
    "slack_hexagon_scaled": (slack_hexagon_scaled, ()),
    "identity": (identity, ("n",)),
    "ones": (ones, ("m", "n")),
}


def gen(name: str, *params, **kw) -> MatrixInstance:
    """Build a registered family, e.g. ``gen("A_alpha", 0.5)``.

    Raises
    ------
    UnknownFamily
        If ``name`` is not registered.
    """
    try:
        fn, names = FAMILIES[name]
    except KeyError:
        raise UnknownFamily(f"unknown family {name!r}; known: {sorted(FAMILIES)}") from None
    if len(params) > len(names):
        raise TypeError(f"{name} takes at most {len(names)} parameters")
    if name in ("bipartite_p",):
        params = tuple(params[:2]) + tuple(int(x) for x in params[2:])
    A = fn(*params, **kw)
    label = name + (":" + ",".join(f"{p:g}" for p in params) if params else "")
    return _inst(A, label)


def parse_spec(spec: str) -> MatrixInstance:
    """``"name:p1,p2"`` to :func:`gen` call."""
    name, _, rest = spec.partition(":")
    params = [float(x) for x in rest.split(",") if x.strip()] if rest else []
    if name in ("identity", "ones"):
        params = [int(p) for p in params]
    return gen(name, *params)


def load(path, format: str | None = None) -> MatrixInstance:
    """Read a dense matrix from a CSV or whitespace-separated text file.

    Lines starting with ``#`` and blank lines are ignored.  ``format`` is
    inferred from the content when omitted.

    Raises
    ------
    ParseError
        With the offending row and column on ragged rows or bad numbers.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return _inst(_parse(text, format, str(path)), str(path))


def loads(text: str, format: str | None = None, name: str = "<string>") -> MatrixInstance:
    """Like :func:`load` but from a string."""
    return _inst(_parse(text, format, name), name)


def _parse(text: str, format: str | None, name: str) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fmt = format or ("csv" if "," in line else "whitespace")
        if fmt == "csv":
            cells = [c.strip() for c in line.split(",")]
        elif fmt == "whitespace":
            cells = line.split()
        else:
            raise ValueError(f"unknown format {format!r}")
        vals = []
        for col, cell in enumerate(cells, start=1):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"{name}: line {lineno}, column {col}: not a number: {cell!r}") from None
        if rows and len(vals) != len(rows[0][1]):
            raise ParseError(
                f"{name}: line {lineno} has {len(vals)} entries, expected {len(rows[0][1])}"
            )
        rows.append((lineno, vals))
    if not rows:
        raise ParseError(f"{name}: no matrix rows found")
    A = np.array([v for _, v in rows], dtype=float)
    if not np.all(np.isfinite(A)):
        raise ParseError(f"{name}: non-finite entries")
    return A


def unit_diagonal(A) -> np.ndarray:
    """Rescale a symmetric matrix to unit diagonal, ``D^{-1/2} A D^{-1/2}``."""
    A = np.asarray(A, dtype=float)
    d = np.diag(A)
    if (d <= 0).any():
        raise ValueError("diagonal must be positive")
    s = 1.0 / np.sqrt(d)
    return A * s[:, None] * s[None, :]
