"""Stratified nilpotent Lie algebras and their triangular polynomial representations.

A representation sends every basis vector ``Y_i`` to a first-order operator
``sum_k a_k(x) d/dx_k + i b(x)`` with real polynomial coefficients, ``a_1``
constant and ``a_k`` depending on ``x_1..x_{k-1}`` only.  The symbol of such an
operator is ``i (a(x).xi + b(x))`` and the associated coadjoint orbit is the image
of ``(x, xi) -> (a_i(x).xi + b_i(x))_i``.

Indices are 0-based throughout the Python API; configuration files use 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .polynomial import DimensionError, MultiPoly

MAX_SEQUENCES = 100_000


class AlgebraValidationError(ValueError):
    def __init__(self, axiom: str, witness, message: str):
        self.axiom = axiom
        self.witness = witness
        super().__init__(f"{axiom}: {message}")


class StructuralError(ValueError):
    """The representation is not in triangular form (stratum-1 symbols do not control xi)."""


@dataclass(frozen=True)
class AlgebraReport:
    ok: bool
    axiom: str | None = None
    witness: tuple | None = None
    message: str = ""

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise AlgebraValidationError(self.axiom, self.witness, self.message)


class StratifiedAlgebra:
    """Graded nilpotent Lie algebra with basis ``Y_0..Y_{dim-1}`` split into strata."""

    def __init__(self, strata: Sequence[int], structure: np.ndarray):
        self.strata = tuple(int(s) for s in strata)
        if not self.strata or any(s < 1 for s in self.strata):
            raise ValueError("strata sizes must be positive")
        self.dim = sum(self.strata)
        c = np.asarray(structure, dtype=float)
        if c.shape != (self.dim,) * 3:
            raise DimensionError(f"structure constants must have shape {(self.dim,) * 3}, got {c.shape}")
        self.c = c
        self.c.setflags(write=False)
        self.stratum = np.repeat(np.arange(1, len(self.strata) + 1), self.strata)

    @classmethod
    def from_brackets(cls, strata: Sequence[int], brackets, antisymmetrize: bool = True) -> StratifiedAlgebra:
        """Build from ``(i, j, k, value)`` quadruples meaning ``[Y_i, Y_j] += value * Y_k``."""
        dim = sum(strata)
        c = np.zeros((dim, dim, dim))
        given = set()
        for i, j, k, v in brackets:
            c[i, j, k] = v
            given.add((i, j, k))
        if antisymmetrize:
            for i, j, k in given:
                if (j, i, k) not in given:
                    c[j, i, k] = -c[i, j, k]
        return cls(strata, c)

    @property
    def r(self) -> int:
        return len(self.strata)

    @property
    def p(self) -> int:
        return self.strata[0]

    def bracket(self, u, v) -> np.ndarray:
        return np.einsum("i,j,ijk->k", u, v, self.c)

    def ad(self, i: int, v) -> np.ndarray:
        return np.asarray(v) @ self.c[i]

    @cached_property
    def sequences(self) -> tuple[tuple[int, ...], ...]:
        """Index sequences over stratum 1 of length ``1..r``, by length then lexicographic."""
        total = sum(self.p**m for m in range(1, self.r + 1))
        if total > MAX_SEQUENCES:
            raise ValueError(f"{total} index sequences exceeds the cap of {MAX_SEQUENCES}")
        out = []
        for m in range(1, self.r + 1):
            out.extend(product(range(self.p), repeat=m))
        return tuple(out)

    @cached_property
    def sequence_vectors(self) -> np.ndarray:
        """Coordinates of the right-nested brackets ``X_I``; one row per sequence."""
        vecs = np.zeros((len(self.sequences), self.dim))
        memo: dict[tuple[int, ...], np.ndarray] = {}
        for row, seq in enumerate(self.sequences):
            if len(seq) == 1:
                v = np.eye(self.dim)[seq[0]]
            else:
                v = self.ad(seq[0], memo[seq[1:]])
            memo[seq] = v
            vecs[row] = v
        vecs.setflags(write=False)
        return vecs

    @cached_property
    def sequence_lengths(self) -> np.ndarray:
        return np.array([len(s) for s in self.sequences])


def validate_algebra(alg: StratifiedAlgebra, tol: float = 0.0) -> AlgebraReport:
    """Check antisymmetry, Jacobi, grading and generation; report the first failure."""
    c = alg.c
    scale = max(float(np.max(np.abs(c))), 1.0)
    bad = np.argwhere(np.abs(c + c.transpose(1, 0, 2)) > tol * scale)
    if bad.size:
        i, j, k = (int(v) for v in bad[0])
        return AlgebraReport(False, "antisymmetry", (i, j, k), f"c[{i}][{j}][{k}] != -c[{j}][{i}][{k}]")

    # J[i,j,k] = [Y_i,[Y_j,Y_k]] + [Y_j,[Y_k,Y_i]] + [Y_k,[Y_i,Y_j]]
    inner = np.einsum("jkm,iml->ijkl", c, c)
    jac = inner + inner.transpose(1, 2, 0, 3) + inner.transpose(2, 0, 1, 3)
    bad = np.argwhere(np.abs(jac) > tol * scale * scale)
    if bad.size:
        i, j, k, _ = (int(v) for v in bad[0])
        return AlgebraReport(False, "jacobi", (i, j, k), f"Jacobi identity fails on (Y{i}, Y{j}, Y{k})")

    s = alg.stratum
    for i, j, k in np.argwhere(np.abs(c) > tol * scale):
        target = s[i] + s[j]
        if target > alg.r or s[k] != target:
            return AlgebraReport(
                False, "grading", (int(i), int(j), int(k)),
                f"[Y{i}, Y{j}] has a component on Y{k} in stratum {s[k]}, expected stratum {target}"
                + (" (bracket must vanish)" if target > alg.r else ""),
            )

    rank = np.linalg.matrix_rank(alg.sequence_vectors) if len(alg.sequences) else 0
    if rank < alg.dim:
        return AlgebraReport(False, "generation", None, f"stratum 1 generates a subalgebra of dimension {rank} < {alg.dim}")
    return AlgebraReport(True)


@dataclass(frozen=True)
class PolyDiffOp:
    """The operator ``sum_k a[k](x) d/dx_k + i b(x)``."""

    a: tuple[MultiPoly, ...]
    b: MultiPoly

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(self.a))
        for p in self.a:
            if p.nvars != self.b.nvars:
                raise DimensionError("coefficient polynomials must share nvars")
        if len(self.a) != self.b.nvars:
            raise DimensionError(f"{len(self.a)} derivative coefficients for {self.b.nvars} variables")

    @property
    def nvars(self) -> int:
        return self.b.nvars

    @classmethod
    def zero(cls, n: int) -> PolyDiffOp:
        return cls(tuple(MultiPoly.zero(n) for _ in range(n)), MultiPoly.zero(n))

    @classmethod
    def derivative(cls, n: int, k: int, coeff: MultiPoly | float = 1.0) -> PolyDiffOp:
        if not isinstance(coeff, MultiPoly):
            coeff = MultiPoly.constant(n, coeff)
        a = [MultiPoly.zero(n) for _ in range(n)]
        a[k] = coeff
        return cls(tuple(a), MultiPoly.zero(n))

    @classmethod
    def multiplication(cls, b: MultiPoly) -> PolyDiffOp:
        """The operator ``i b(x)``."""
        return cls(tuple(MultiPoly.zero(b.nvars) for _ in range(b.nvars)), b)

    def is_zero(self) -> bool:
        return self.b.is_zero() and all(p.is_zero() for p in self.a)

    def has_derivative(self) -> bool:
        return any(not p.is_zero() for p in self.a)

    def __add__(self, other: PolyDiffOp) -> PolyDiffOp:
        return PolyDiffOp(tuple(p + q for p, q in zip(self.a, other.a)), self.b + other.b)

    def __neg__(self) -> PolyDiffOp:
        return self.scale(-1.0)

    def __sub__(self, other: PolyDiffOp) -> PolyDiffOp:
        return self + (-other)

    def scale(self, s: float) -> PolyDiffOp:
        return PolyDiffOp(tuple(p.scale(s) for p in self.a), self.b.scale(s))

    def apply_vector_field(self, f: MultiPoly) -> MultiPoly:
        """``(a . grad) f``."""
        out = MultiPoly.zero(self.nvars)
        for k, ak in enumerate(self.a):
            if not ak.is_zero():
                out = out + ak * f.diff(k)
        return out

    def real_symbol(self, x, xi):
        """``a(x).xi + b(x)``, i.e. ``-i`` times the full symbol."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = self.b.evaluate(x) + np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]))
        for k, ak in enumerate(self.a):
            if not ak.is_zero():
                out = out + ak.evaluate(x) * xi[..., k]
        return out

    def triangular(self) -> bool:
        """``a_0`` constant and ``a_k`` independent of ``x_k..x_{n-1}``."""
        for k, ak in enumerate(self.a):
            if any(ak.depends_on(i) for i in range(k, self.nvars)):
                return False
        return True


def bracket(o1: PolyDiffOp, o2: PolyDiffOp) -> PolyDiffOp:
    """Commutator ``o1 o2 - o2 o1`` of two first-order operators."""
    if o1.nvars != o2.nvars:
        raise DimensionError(f"nvars mismatch: {o1.nvars} vs {o2.nvars}")
    a = tuple(o1.apply_vector_field(q) - o2.apply_vector_field(p) for p, q in zip(o1.a, o2.a))
    b = o1.apply_vector_field(o2.b) - o2.apply_vector_field(o1.b)
    return PolyDiffOp(a, b)


def symbol(o: PolyDiffOp, x, xi):
    """Full symbol ``i (a(x).xi + b(x))``; purely imaginary."""
    return 1j * o.real_symbol(x, xi)


@dataclass(frozen=True)
class OrbitForm:
    """A linear form on the algebra, ``values[i] = l(Y_i)``."""

    values: np.ndarray
    x: np.ndarray | None = None
    xi: np.ndarray | None = None


class Representation:
    """Assignment ``Y_i -> pi(Y_i)`` of triangular first-order operators."""

    def __init__(self, algebra: StratifiedAlgebra, n: int, generators: Sequence[PolyDiffOp], name: str = "custom"):
        self.algebra = algebra
        self.n = int(n)
        self.generators = tuple(generators)
        self.name = name
        if len(self.generators) != algebra.dim:
            raise DimensionError(f"need {algebra.dim} generator images, got {len(self.generators)}")
        for g in self.generators:
            if g.nvars != self.n:
                raise DimensionError(f"operator in {g.nvars} variables for representation space R^{self.n}")

    @classmethod
    def from_stratum_one(cls, algebra: StratifiedAlgebra, n: int, ops: Sequence[PolyDiffOp], name: str = "custom"):
        """Extend images of the stratum-1 basis to the whole algebra via brackets."""
        if len(ops) != algebra.p:
            raise DimensionError(f"need {algebra.p} stratum-1 images, got {len(ops)}")
        seq_ops = _sequence_operators(ops, algebra.sequences)
        vecs = algebra.sequence_vectors
        coef, *_ = np.linalg.lstsq(vecs.T, np.eye(algebra.dim), rcond=None)
        if not np.allclose(vecs.T @ coef, np.eye(algebra.dim), atol=1e-12):
            raise AlgebraValidationError("generation", None, "stratum 1 does not generate the algebra")
        # snap least-squares noise back onto dyadic values so brackets stay exact
        snapped = np.round(coef * 1024) / 1024
        coef = np.where(np.abs(coef - snapped) < 1e-10, snapped, coef)
        gens = []
        for k in range(algebra.dim):
            if k < algebra.p:
                gens.append(ops[k])
                continue
            acc = PolyDiffOp.zero(n)
            for s, w in enumerate(coef[:, k]):
                if abs(w) > 1e-14:
                    acc = acc + seq_ops[s].scale(float(w))
            gens.append(acc)
        return cls(algebra, n, gens, name)

    @property
    def p(self) -> int:
        return self.algebra.p

    @property
    def r(self) -> int:
        return self.algebra.r

    def check_homomorphism(self, tol: float = 0.0) -> AlgebraReport:
        """``[pi(Y_i), pi(Y_j)] == sum_k c_ijk pi(Y_k)`` coefficient-wise."""
        c = self.algebra.c
        for i in range(self.algebra.dim):
            for j in range(i + 1, self.algebra.dim):
                lhs = bracket(self.generators[i], self.generators[j])
                rhs = PolyDiffOp.zero(self.n)
                for k in np.nonzero(c[i, j])[0]:
                    rhs = rhs + self.generators[k].scale(c[i, j, k])
                diff = lhs - rhs
                worst = max([abs(v) for p in (*diff.a, diff.b) for _, v in p.items()] + [0.0])
                if worst > tol:
                    return AlgebraReport(False, "homomorphism", (i, j), f"[pi(Y{i}), pi(Y{j})] differs from pi([Y{i}, Y{j}]) by {worst:g}")
        for k, g in enumerate(self.generators):
            if not g.triangular():
                return AlgebraReport(False, "triangular-form", (k,), f"pi(Y{k}) is not in triangular form")
        return AlgebraReport(True)

    @cached_property
    def sequence_operators(self) -> tuple[PolyDiffOp, ...]:
        return _sequence_operators(self.generators[: self.p], self.algebra.sequences)

    @cached_property
    def _weight_terms(self):
        """Distinct nonzero iterated commutators up to sign, with multiplicities."""
        groups: dict = {}
        for op, length in zip(self.sequence_operators, self.algebra.sequence_lengths):
            if op.is_zero():
                continue
            key = _sign_canonical(op)
            slot = groups.setdefault((key, int(length)), [op, 0])
            slot[1] += 1
        return [(op, 1.0 / length, mult) for (_, length), (op, mult) in groups.items()]

    def m_pi(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]))
        for op, power, mult in self._weight_terms:
            out = out + mult * np.abs(op.real_symbol(x, xi)) ** power
        return out[()] if out.ndim == 0 else out


def _sign_canonical(op: PolyDiffOp):
    flat = [c for p in (*op.a, op.b) for _, c in p.items()]
    lead = next(c for c in flat if c != 0.0)
    if lead < 0:
        op = -op
    return tuple(tuple(p.items()) for p in (*op.a, op.b))


def _sequence_operators(ops: Sequence[PolyDiffOp], sequences) -> tuple[PolyDiffOp, ...]:
    memo: dict[tuple[int, ...], PolyDiffOp] = {}
    out = []
    for seq in sequences:
        if len(seq) == 1:
            o = ops[seq[0]]
        else:
            o = bracket(ops[seq[0]], memo[seq[1:]])
        memo[seq] = o
        out.append(o)
    return tuple(out)


def iterated_commutator(rep: Representation, I: Sequence[int]) -> PolyDiffOp:
    """Right-nested ``(ad pi(X_{i1})) ... (ad pi(X_{i_{m-1}})) pi(X_{i_m})``."""
    if len(I) < 1:
        raise ValueError("index sequence must be non-empty")
    for i in I:
        if not 0 <= i < rep.p:
            raise IndexError(f"index {i} outside stratum 1 (size {rep.p})")
    op = rep.generators[I[-1]]
    for i in reversed(I[:-1]):
        op = bracket(rep.generators[i], op)
    return op


def orbit_values(rep: Representation, x, xi) -> np.ndarray:
    """Vectorized orbit map: ``(..., dim)`` array of ``-i * symbol(pi(Y_i))``."""
    return np.stack([g.real_symbol(x, xi) for g in rep.generators], axis=-1)


def orbit_form(rep: Representation, x, xi) -> OrbitForm:
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if x.shape[-1] != rep.n or xi.shape[-1] != rep.n:
        raise DimensionError(f"expected points in R^{rep.n}")
    return OrbitForm(orbit_values(rep, x, xi), x, xi)


def homogeneous_norm(l, alg: StratifiedAlgebra):
    """``sum_I |l(X_I)|^(1/|I|)`` over all stratum-1 sequences of length at most r."""
    vals = l.values if isinstance(l, OrbitForm) else np.asarray(l, dtype=float)
    coords = vals @ alg.sequence_vectors.T
    out = np.sum(np.abs(coords) ** (1.0 / alg.sequence_lengths), axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def dilate_form(l, t: float, alg: StratifiedAlgebra) -> OrbitForm:
    """Transpose dilation: ``l(Y_i) -> t^{stratum(i)} l(Y_i)``."""
    if not t > 0:
        raise ValueError("dilation parameter must be positive")
    vals = l.values if isinstance(l, OrbitForm) else np.asarray(l, dtype=float)
    return OrbitForm(vals * float(t) ** alg.stratum)


def m_pi(rep: Representation, x, xi):
    """``M_pi(x, xi) = sum_I |pi(X_I)(x, xi)|^(1/|I|)``."""
    return rep.m_pi(x, xi)


def _xi_seed(rep: Representation, x: np.ndarray) -> np.ndarray:
    """xi making the stratum-1 symbols vanish (least squares), batched over x."""
    gens = rep.generators[: rep.p]
    A = np.stack([np.stack([np.broadcast_to(ak.evaluate(x), x.shape[:-1]) for ak in g.a], axis=-1) for g in gens], axis=-2)
    b = np.stack([np.broadcast_to(g.b.evaluate(x), x.shape[:-1]) for g in gens], axis=-1)
    sv = np.linalg.svd(A, compute_uv=False)
    if np.any(sv[..., -1] <= 1e-12 * np.maximum(sv[..., 0], 1.0)):
        raise StructuralError("stratum-1 derivative coefficients do not have full rank in xi")
    return -np.einsum("...ij,...j->...i", np.linalg.pinv(A), b)


def m_pi_inf(rep: Representation, x, maxiter: int = 200, tol: float = 1e-8):
    """``inf_xi M_pi(x, xi)``; accepts one point or an array of points ``(..., n)``.

    The seed zeroes the stratum-1 symbols.  When every xi-dependent term
    vanishes there, the seed is a global minimizer; otherwise a Nelder-Mead
    refinement runs from it.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != rep.n:
        raise DimensionError(f"expected points in R^{rep.n}")
    flat = x.reshape(-1, rep.n)
    seeds = _xi_seed(rep, flat)
    values = rep.m_pi(flat, seeds)
    moving = [op for op, _, _ in rep._weight_terms if op.has_derivative()]
    if moving:
        residual = np.zeros(len(flat))
        for op in moving:
            residual = np.maximum(residual, np.abs(op.real_symbol(flat, seeds)))
        todo = np.nonzero(residual > 1e-13 * np.maximum(values, 1.0))[0]
        for idx in todo:
            pt = flat[idx]
            res = minimize(
                lambda z: float(rep.m_pi(pt, z)), seeds[idx], method="Nelder-Mead",
                options={"maxiter": maxiter, "xatol": tol, "fatol": tol},
            )
            values[idx] = min(values[idx], float(res.fun))
    out = values.reshape(x.shape[:-1])
    return out[()] if out.ndim == 0 else out


def sublaplacian_ops(rep: Representation) -> tuple[PolyDiffOp, ...]:
    """Images of the stratum-1 basis; ``pi(-Delta) = sum_j pi(X_j)^* pi(X_j)``."""
    return rep.generators[: rep.p]


def heisenberg_algebra() -> StratifiedAlgebra:
    return StratifiedAlgebra.from_brackets([2, 1], [(0, 1, 2, 1.0)])


def engel_algebra() -> StratifiedAlgebra:
    return StratifiedAlgebra.from_brackets([2, 1, 1], [(0, 1, 2, 1.0), (0, 2, 3, 1.0)])


def builtin(name: str, param: float) -> Representation:
    """``heisenberg(mu)`` or ``engel(lam)`` acting on functions of one variable."""
    if not param > 0:
        raise ValueError(f"{name} parameter must be positive, got {param}")
    x = MultiPoly.variable(1, 0)
    d = PolyDiffOp.derivative(1, 0)
    mul = PolyDiffOp.multiplication
    if name == "heisenberg":
        mu = float(param)
        gens = [d, mul(x.scale(mu)), mul(MultiPoly.constant(1, mu))]
        return Representation(heisenberg_algebra(), 1, gens, name=f"heisenberg({mu:g})")
    if name == "engel":
        lam = float(param)
        gens = [d, mul((x * x).scale(lam / 2)), mul(x.scale(lam)), mul(MultiPoly.constant(1, lam))]
        return Representation(engel_algebra(), 1, gens, name=f"engel({lam:g})")
    raise ValueError(f"unknown builtin representation {name!r}")
