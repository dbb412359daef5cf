"""Noncommutative words, commutative monomials and their canonical forms.

A word over the symbols ``x_1, ..., x_n`` is stored as a plain tuple of
1-based symbol indices, so ``x1 x2 x1`` is ``(1, 2, 1)`` and the empty word
``1`` is ``()``.  Tuples are immutable, hashable and compare
lexicographically, which is all the moment machinery needs.

Commutative monomials get their own small type, :class:`CMonomial`, holding
an exponent vector; inside moment tables they are represented by their
sorted word, which is the canonical representative under commutation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement, product
from typing import Iterable, Sequence, Tuple

NCWord = Tuple[int, ...]

#: Hard cap on word degrees handled anywhere in the package.
MAX_DEGREE = 16


class DegreeError(ValueError):
    """Raised when a request exceeds the configured degree cap."""


def make_word(letters: Iterable[int], n: int | None = None) -> NCWord:
    """Validate ``letters`` and return them as a word tuple."""
    w = tuple(int(a) for a in letters)
    for a in w:
        if a < 1 or (n is not None and a > n):
            raise ValueError(f"letter {a} outside [1..{n}]")
    return w


def degree(w: NCWord) -> int:
    return len(w)


def involution(w: NCWord) -> NCWord:
    """Reverse the letters of ``w`` (the involution ``w -> w*``)."""
    return w[::-1]


def word_str(w: NCWord) -> str:
    if not w:
        return "1"
    return "".join(f"x{a}" for a in w)


@dataclass(frozen=True)
class EquivalenceMode:
    """Which identifications a moment functional is assumed to satisfy.

    ``symmetric`` identifies ``w`` with ``w*``, ``tracial`` identifies ``uv``
    with ``vu`` and ``commutative`` collapses words to monomials (which
    makes the other two flags redundant).
    """

    symmetric: bool = False
    tracial: bool = False
    commutative: bool = False

    def __str__(self) -> str:
        names = [k for k in ("symmetric", "tracial", "commutative") if getattr(self, k)]
        return "{" + ",".join(names) + "}"


NONE = EquivalenceMode()
SYMMETRIC = EquivalenceMode(symmetric=True)
TRACIAL = EquivalenceMode(symmetric=True, tracial=True)
COMMUTATIVE = EquivalenceMode(commutative=True)


def _rotations(w: NCWord):
    for k in range(len(w)):
        yield w[k:] + w[:k]


@lru_cache(maxsize=None)
def canonical_word(w: NCWord, mode: EquivalenceMode) -> NCWord:
    """Lexicographically smallest word in the orbit of ``w`` under ``mode``.

    Two words share a representative exactly when every functional with
    the properties in ``mode`` must give them the same value.
    """
    if mode.commutative:
        return tuple(sorted(w))
    if len(w) <= 1:
        return w
    if mode.tracial:
        best = min(_rotations(w))
        if mode.symmetric:
            best = min(best, min(_rotations(w[::-1])))
        return best
    if mode.symmetric:
        return min(w, w[::-1])
    return w


def orbit(w: NCWord, mode: EquivalenceMode) -> set:
    """All words identified with ``w`` under ``mode`` (brute force)."""
    if mode.commutative:
        from itertools import permutations

        return set(permutations(w))
    seeds = {w}
    if mode.symmetric:
        seeds.add(w[::-1])
    out = set()
    for s in seeds:
        if mode.tracial:
            out.update(_rotations(s) if s else [s])
        else:
            out.add(s)
    return out


def _check_degree(t: int) -> None:
    if t > MAX_DEGREE:
        raise DegreeError(f"degree {t} exceeds the cap {MAX_DEGREE}")


def all_words(n: int, t: int) -> list:
    """Every word of degree <= t, graded-lexicographic order."""
    _check_degree(t)
    out = [()]
    for d in range(1, t + 1):
        out.extend(product(range(1, n + 1), repeat=d))
    return out


def enumerate_words(n: int, t: int, mode: EquivalenceMode = NONE) -> list:
    """Sorted, duplicate-free canonical representatives of degree <= t.

    Sorting is by degree first, then lexicographically.
    """
    if n < 1 or t < 0:
        raise ValueError("need n >= 1 and t >= 0")
    _check_degree(t)
    if mode.commutative:
        out = [()]
        for d in range(1, t + 1):
            out.extend(combinations_with_replacement(range(1, n + 1), d))
        return out
    if not (mode.symmetric or mode.tracial):
        return all_words(n, t)
    reps = {canonical_word(w, mode) for w in all_words(n, t)}
    return sorted(reps, key=lambda w: (len(w), w))


def basis_words(n: int, t: int, commutative: bool) -> list:
    """Index set of a moment matrix: all words, or all monomials, of degree <= t."""
    return enumerate_words(n, t, COMMUTATIVE if commutative else NONE)


@dataclass(frozen=True)
class CMonomial:
    """Commutative monomial ``x^alpha`` stored by its exponent vector."""

    exponents: Tuple[int, ...]

    def __post_init__(self):
        if any(e < 0 for e in self.exponents):
            raise ValueError("exponents must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        return sum(self.exponents)

    @classmethod
    def from_word(cls, w: NCWord, n: int) -> "CMonomial":
        """Commutative image ``w^c`` of a word."""
        e = [0] * n
        for a in w:
            e[a - 1] += 1
        return cls(tuple(e))

    def to_word(self) -> NCWord:
        """Sorted word whose commutative image is this monomial."""
        return tuple(i + 1 for i, e in enumerate(self.exponents) for _ in range(e))

    def __mul__(self, other: "CMonomial") -> "CMonomial":
        if self.n != other.n:
            raise ValueError("monomials over different symbol sets")
        return CMonomial(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def __str__(self) -> str:
        parts = []
        for i, e in enumerate(self.exponents):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        return "".join(parts) or "1"


def monomials_of_degree(n: int, d: int) -> list:
    """Sorted words representing the monomials of degree exactly ``d``."""
    return list(combinations_with_replacement(range(1, n + 1), d))


_INT64_MAX = 2**63 - 1


def multinomial_dm(m: CMonomial | Sequence[int]) -> int:
    """Number of words whose commutative image is ``m``.

    Accepts a :class:`CMonomial` or a sorted word.  Raises
    :class:`OverflowError` if the count leaves the int64 range.
    """
    if isinstance(m, CMonomial):
        exps = m.exponents
    else:
        counts: dict = {}
        for a in m:
            counts[a] = counts.get(a, 0) + 1
        exps = tuple(counts.values())
    total = math.factorial(sum(exps))
    for e in exps:
        total //= math.factorial(e)
    if total > _INT64_MAX:
        raise OverflowError(f"multinomial coefficient {total} exceeds int64")
    return total


class Polynomial:
    """Real linear combination of words.

    Stored as a dict from word to coefficient with zero terms removed.
    Products concatenate words, so the algebra is noncommutative unless the
    caller canonicalizes.

    Examples
    --------
    >>> x1, x2 = Polynomial.var(1), Polynomial.var(2)
    >>> p = 2 * x1 - x1 * x2
    >>> p.degree
    2
    """

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms = {tuple(w): float(c) for w, c in (terms or {}).items() if c != 0}

    @classmethod
    def var(cls, i: int) -> "Polynomial":
        return cls({(i,): 1.0})

    @classmethod
    def const(cls, c: float) -> "Polynomial":
        return cls({(): c})

    @classmethod
    def coerce(cls, p) -> "Polynomial":
        if isinstance(p, Polynomial):
            return p
        if isinstance(p, dict):
            return cls(p)
        if isinstance(p, tuple):
            return cls({p: 1.0})
        return cls.const(float(p))

    @property
    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def star(self) -> "Polynomial":
        return Polynomial({w[::-1]: c for w, c in self.terms.items()})

    def is_symmetric(self, tol: float = 0.0) -> bool:
        s = self.star()
        keys = set(self.terms) | set(s.terms)
        return all(abs(self.terms.get(w, 0.0) - s.terms.get(w, 0.0)) <= tol for w in keys)

    def __add__(self, other) -> "Polynomial":
        other = Polynomial.coerce(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return Polynomial(out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial({w: -c for w, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-Polynomial.coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return Polynomial.coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return Polynomial({w: c * other for w, c in self.terms.items()})
        other = Polynomial.coerce(other)
        out: dict = {}
        for u, a in self.terms.items():
            for v, b in other.terms.items():
                out[u + v] = out.get(u + v, 0.0) + a * b
        return Polynomial(out)

    def __rmul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float)):
            return self * other
        return Polynomial.coerce(other) * self

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            other = Polynomial.coerce(other)
        return self.terms == other.terms

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        items = sorted(self.terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return " + ".join(f"{c:g}*{word_str(w)}" for w, c in items)
