"""Sparse multivariate polynomials with real coefficients.

Terms are stored as a map from exponent tuples to floats. Arithmetic is exact
whenever the coefficients involved are exactly representable (small integers,
dyadic rationals), which covers every bracket and curl computed in this package.
"""

from __future__ import annotations

import math
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]


class DimensionError(ValueError):
    """Raised when polynomials or points of different dimension are mixed."""


def _grlex_key(exp: Exponent) -> tuple:
    return (sum(exp), exp)


class MultiPoly:
    """Immutable sparse polynomial in ``nvars`` real variables."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | None = None):
        if nvars < 1:
            raise DimensionError("nvars must be positive")
        self.nvars = int(nvars)
        collected: dict[Exponent, float] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars:
                raise DimensionError(f"exponent {exp} has length {len(exp)}, expected {self.nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            collected[exp] = collected.get(exp, 0.0) + float(c)
        self._terms = {e: c for e, c in sorted(collected.items(), key=lambda t: _grlex_key(t[0])) if c != 0.0}
        self._hash = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> MultiPoly:
        return cls(nvars)

    @classmethod
    def constant(cls, nvars: int, c: float) -> MultiPoly:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, i: int, coeff: float = 1.0) -> MultiPoly:
        exp = [0] * nvars
        exp[i] = 1
        return cls(nvars, {tuple(exp): coeff})

    @classmethod
    def monomial(cls, exponents: Sequence[int], coeff: float = 1.0) -> MultiPoly:
        return cls(len(exponents), {tuple(exponents): coeff})

    @classmethod
    def from_records(cls, nvars: int, records: Iterable[Mapping]) -> MultiPoly:
        """Build from ``[{"exponents": [...], "coeff": c}, ...]``."""
        terms: dict[Exponent, float] = {}
        for rec in records:
            exp = tuple(int(e) for e in rec["exponents"])
            terms[exp] = terms.get(exp, 0.0) + float(rec["coeff"])
        return cls(nvars, terms)

    def to_records(self) -> list[dict]:
        return [{"exponents": list(e), "coeff": c} for e, c in self._terms.items()]

    # -- basic protocol -----------------------------------------------------

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        if not self._terms:
            return -1
        return max(sum(e) for e in self._terms)

    def coeff(self, exp: Sequence[int]) -> float:
        return self._terms.get(tuple(exp), 0.0)

    def depends_on(self, i: int) -> bool:
        return any(e[i] > 0 for e in self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = MultiPoly.constant(self.nvars, other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"MultiPoly({self.nvars}, {self})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for exp, c in self._terms.items():
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(exp) if e
            )
            if not mono:
                parts.append(f"{c:g}")
            elif c == 1.0:
                parts.append(mono)
            elif c == -1.0:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{c:g}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> MultiPoly:
        if isinstance(other, MultiPoly):
            if other.nvars != self.nvars:
                raise DimensionError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return MultiPoly.constant(self.nvars, float(other))
        raise TypeError(f"cannot combine MultiPoly with {type(other).__name__}")

    def __add__(self, other) -> MultiPoly:
        other = self._coerce(other)
        terms = dict(self._terms)
        for e, c in other._terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return MultiPoly(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self) -> MultiPoly:
        return MultiPoly(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> MultiPoly:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> MultiPoly:
        return self._coerce(other) - self

    def __mul__(self, other) -> MultiPoly:
        other = self._coerce(other)
        terms: dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0.0) + c1 * c2
        return MultiPoly(self.nvars, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> MultiPoly:
        if k < 0:
            raise ValueError("negative power")
        out = MultiPoly.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, a: float) -> MultiPoly:
        return MultiPoly(self.nvars, {e: a * c for e, c in self._terms.items()})

    # -- calculus -----------------------------------------------------------

    def diff(self, i: int, k: int = 1) -> MultiPoly:
        """k-th partial derivative in variable ``i``."""
        terms: dict[Exponent, float] = {}
        for e, c in self._terms.items():
            if e[i] < k:
                continue
            f = math.perm(e[i], k)
            ne = list(e)
            ne[i] -= k
            terms[tuple(ne)] = terms.get(tuple(ne), 0.0) + c * f
        return MultiPoly(self.nvars, terms)

    def integrate(self, i: int) -> MultiPoly:
        """Antiderivative in variable ``i`` with zero constant."""
        terms = {}
        for e, c in self._terms.items():
            ne = list(e)
            ne[i] += 1
            terms[tuple(ne)] = c / ne[i]
        return MultiPoly(self.nvars, terms)

    def gradient(self) -> list[MultiPoly]:
        return [self.diff(i) for i in range(self.nvars)]

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Evaluate at a point or at an array of points of shape ``(..., nvars)``."""
        x = np.asarray(x)
        if x.shape[-1:] != (self.nvars,):
            raise DimensionError(f"point dimension {x.shape[-1:]} does not match nvars={self.nvars}")
        batch = x.shape[:-1]
        dtype = np.result_type(x.dtype, np.float64)
        out = np.zeros(batch, dtype=dtype)
        if not self._terms:
            return out[()] if not batch else out
        maxdeg = [max(e[i] for e in self._terms) for i in range(self.nvars)]
        powers = []
        for i in range(self.nvars):
            xi = x[..., i].astype(dtype, copy=False)
            p = [np.ones(batch, dtype=dtype)]
            for _ in range(maxdeg[i]):
                p.append(p[-1] * xi)
            powers.append(p)
        for e, c in self._terms.items():
            term = np.full(batch, c, dtype=dtype)
            for i, ei in enumerate(e):
                if ei:
                    term = term * powers[i][ei]
            out = out + term
        return out[()] if not batch else out

    # -- change of variables ------------------------------------------------

    def substitute_linear(self, Q) -> MultiPoly:
        """Return the polynomial ``x -> p(Q x)``."""
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape != (self.nvars, self.nvars):
            raise DimensionError(f"Q must be {self.nvars}x{self.nvars}, got {Q.shape}")
        n = self.nvars
        rows = [MultiPoly(n, {tuple(int(k == j) for k in range(n)): Q[i, j] for j in range(n)}) for i in range(n)]
        cache: dict[tuple[int, int], MultiPoly] = {}

        def power(i, k):
            if (i, k) not in cache:
                cache[(i, k)] = rows[i] ** k
            return cache[(i, k)]

        out = MultiPoly.zero(n)
        for e, c in self._terms.items():
            term = MultiPoly.constant(n, c)
            for i, ei in enumerate(e):
                if ei:
                    term = term * power(i, ei)
            out = out + term
        return out


def differentiate(p: MultiPoly, alpha: Sequence[int]) -> MultiPoly:
    """Iterated partial derivative for the multi-index ``alpha``."""
    if len(alpha) != p.nvars:
        raise DimensionError(f"multi-index length {len(alpha)} does not match nvars={p.nvars}")
    out = p
    for i, k in enumerate(alpha):
        if k:
            out = out.diff(i, k)
    return out


def arithmetic(p: MultiPoly, q: MultiPoly, op: str) -> MultiPoly:
    if p.nvars != q.nvars:
        raise DimensionError(f"nvars mismatch: {p.nvars} vs {q.nvars}")
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * q
    raise ValueError(f"unknown op {op!r}")


def evaluate(p: MultiPoly, x) -> float:
    return p.evaluate(x)


def substitute_linear(p: MultiPoly, Q) -> MultiPoly:
    return p.substitute_linear(Q)


def multi_indices(nvars: int, max_degree: int):
    """All exponent tuples with total degree <= max_degree, graded-lex order."""
    out = [a for a in product(range(max_degree + 1), repeat=nvars) if sum(a) <= max_degree]
    out.sort(key=_grlex_key)
    return out


def coefficient_matrix(polys: Sequence[MultiPoly]) -> tuple[np.ndarray, list[Exponent]]:
    """Stack coefficient vectors over the union of supports (columns = polys)."""
    support = sorted({e for p in polys for e in p._terms}, key=_grlex_key)
    index = {e: k for k, e in enumerate(support)}
    mat = np.zeros((len(support), len(polys)))
    for j, p in enumerate(polys):
        for e, c in p._terms.items():
            mat[index[e], j] = c
    return mat, support
