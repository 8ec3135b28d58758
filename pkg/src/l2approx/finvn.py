"""Finite-dimensional models of finite von Neumann algebras.

A model is a direct sum of matrix algebras ``M_dim`` ("cells"), each with a
positive trace weight, so ``tr(a) = sum_c weight_c * Tr(a_c)``.  A morphism of
the free module of rank ``d`` into the free module of rank ``e`` is stored
cellwise as an ``(e*dim) x (d*dim)`` complex matrix acting on column vectors,
with the module index running slowest (index ``i*dim + k``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np


class ModelError(ValueError):
    pass


class SpectralError(RuntimeError):
    pass


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteVNModel:
    cells: tuple[tuple[Fraction, int], ...]

    def __post_init__(self):
        cells = tuple((Fraction(w), int(n)) for w, n in self.cells)
        if not cells:
            raise ModelError("model needs at least one cell")
        for w, n in cells:
            if w <= 0 or n <= 0:
                raise ModelError(f"bad cell {(w, n)}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def uniform(cls, count: int, dim: int = 1, weight: Fraction | None = None) -> "FiniteVNModel":
        w = Fraction(1, count * dim) if weight is None else Fraction(weight)
        return cls(((w, dim),) * count)

    @property
    def dims(self) -> list[int]:
        return [n for _, n in self.cells]

    @property
    def weights(self) -> list[Fraction]:
        return [w for w, _ in self.cells]

    def unit_trace(self) -> Fraction:
        """tr(1), the dimension of the rank one free module."""
        return sum((w * n for w, n in self.cells), Fraction(0))

    def trace(self, blocks: Sequence[np.ndarray]) -> complex:
        return sum(float(w) * complex(np.trace(b)) for (w, _), b in zip(self.cells, blocks))

    def __len__(self):
        return len(self.cells)

    def to_json(self) -> list:
        return [[[w.numerator, w.denominator], n] for w, n in self.cells]

    @classmethod
    def from_json(cls, doc) -> "FiniteVNModel":
        return cls(tuple((Fraction(int(a), int(b)), int(n)) for (a, b), n in doc))


@dataclass
class SpectralDensity:
    """Right-continuous step function given by its jumps.

    ``jumps`` is sorted by location; the weights are exact rationals, so
    ``F(0)`` (the kernel dimension) is exact once the zero clamp is fixed.
    """

    jumps: list[tuple[float, Fraction]]
    total: Fraction

    def __call__(self, lam: float, tol: float = 0.0) -> Fraction:
        return sum((w for x, w in self.jumps if x <= lam + tol), Fraction(0))

    @property
    def betti(self) -> Fraction:
        return sum((w for x, w in self.jumps if x == 0.0), Fraction(0))

    def log_det(self) -> float:
        return math.fsum(float(w) * math.log(x) for x, w in self.jumps if x > 0.0)

    def det(self) -> float:
        return math.exp(self.log_det())

    def scaled(self, factor) -> "SpectralDensity":
        factor = Fraction(factor)
        return SpectralDensity([(x, w * factor) for x, w in self.jumps], self.total * factor)

    def locations(self) -> list[float]:
        return [x for x, _ in self.jumps]

    def to_tsv(self) -> str:
        lines = ["lambda\tweight\tcumulative"]
        acc = Fraction(0)
        for x, w in self.jumps:
            acc += w
            lines.append(f"{x:.17g}\t{float(w):.17g}\t{float(acc):.17g}")
        return "\n".join(lines) + "\n"


def fk_det(density: SpectralDensity) -> float:
    return density.det()


def betti(density: SpectralDensity) -> Fraction:
    return density.betti


def merge_jumps(raw: Iterable[tuple[float, Fraction]], rel: float = 1e-9) -> list[tuple[float, Fraction]]:
    """Sort jumps and merge locations closer than ``rel`` (relative)."""
    out: list[list] = []
    for x, w in sorted(raw, key=lambda t: t[0]):
        if out and x - out[-1][0] <= rel * max(1.0, abs(x)) and (x == 0.0) == (out[-1][0] == 0.0):
            out[-1][1] += w
        else:
            out.append([x, w])
    return [(x, w) for x, w in out]


class VNMorphism:
    """Morphism ``model^domain -> model^codomain`` given cellwise."""

    __slots__ = ("model", "domain", "codomain", "blocks")

    def __init__(self, model: FiniteVNModel, domain: int, codomain: int,
                 blocks: Sequence[np.ndarray]):
        if len(blocks) != len(model.cells):
            raise ModelError(f"{len(blocks)} blocks for {len(model.cells)} cells")
        fixed = []
        for (_, n), b in zip(model.cells, blocks):
            b = np.asarray(b, dtype=complex)
            if b.shape != (codomain * n, domain * n):
                raise ModelError(f"block shape {b.shape} != {(codomain * n, domain * n)}")
            fixed.append(b)
        self.model = model
        self.domain = domain
        self.codomain = codomain
        self.blocks = fixed

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, model: FiniteVNModel, d: int = 1) -> "VNMorphism":
        return cls(model, d, d, [np.eye(d * n) for n in model.dims])

    @classmethod
    def zero(cls, model: FiniteVNModel, d: int = 1, e: int | None = None) -> "VNMorphism":
        e = d if e is None else e
        return cls(model, d, e, [np.zeros((e * n, d * n)) for n in model.dims])

    @classmethod
    def diagonal(cls, model: FiniteVNModel, values: Sequence) -> "VNMorphism":
        """Multiplication by one scalar per cell on the rank one module."""
        return cls(model, 1, 1, [v * np.eye(n) for v, n in zip(values, model.dims)])

    @classmethod
    def from_cell_function(cls, model: FiniteVNModel, d: int, e: int,
                           fn: Callable[[int], np.ndarray]) -> "VNMorphism":
        return cls(model, d, e, [fn(c) for c in range(len(model.cells))])

    # -- algebra -----------------------------------------------------------

    def _same_model(self, other: "VNMorphism"):
        if other.model != self.model:
            raise ModelError("morphisms over different models")

    def __matmul__(self, other: "VNMorphism") -> "VNMorphism":
        """Composition ``self o other``."""
        self._same_model(other)
        if other.codomain != self.domain:
            raise ModelError("composition shape mismatch")
        return VNMorphism(self.model, other.domain, self.codomain,
                          [a @ b for a, b in zip(self.blocks, other.blocks)])

    def __add__(self, other: "VNMorphism") -> "VNMorphism":
        self._same_model(other)
        if (other.domain, other.codomain) != (self.domain, self.codomain):
            raise ModelError("addition shape mismatch")
        return VNMorphism(self.model, self.domain, self.codomain,
                          [a + b for a, b in zip(self.blocks, other.blocks)])

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "VNMorphism":
        return VNMorphism(self.model, self.domain, self.codomain, [c * b for b in self.blocks])

    def adjoint(self) -> "VNMorphism":
        return VNMorphism(self.model, self.codomain, self.domain,
                          [b.conj().T for b in self.blocks])

    @property
    def H(self) -> "VNMorphism":
        return self.adjoint()

    def gram(self) -> "VNMorphism":
        """f* f on the domain."""
        return self.adjoint() @ self

    def trace(self) -> complex:
        if self.domain != self.codomain:
            raise ModelError("trace of a non-endomorphism")
        return self.model.trace(self.blocks)

    def power(self, m: int) -> "VNMorphism":
        out = VNMorphism.identity(self.model, self.domain)
        for _ in range(m):
            out = out @ self
        return out

    def moments(self, m_max: int) -> list[float]:
        """Normalised traces tr(D^m)/tr(1) of D = f* f for m = 1..m_max."""
        g = self.gram()
        norm = float(self.model.unit_trace()) * self.domain
        out = []
        cur = g
        for _ in range(m_max):
            out.append(cur.trace().real / norm)
            cur = cur @ g
        return out

    def max_abs_diff(self, other: "VNMorphism") -> float:
        self._same_model(other)
        return max((float(np.max(np.abs(a - b))) if a.size else 0.0)
                   for a, b in zip(self.blocks, other.blocks))

    def operator_norm(self) -> float:
        return max((float(np.linalg.norm(b, 2)) if b.size else 0.0) for b in self.blocks)

    def is_projection(self, tol: float = 1e-10) -> bool:
        return (self.domain == self.codomain
                and self.max_abs_diff(self @ self) <= tol
                and self.max_abs_diff(self.adjoint()) <= tol)

    # -- block assembly ------------------------------------------------------

    def entry(self, i: int, j: int) -> list[np.ndarray]:
        """Cellwise sub-blocks mapping domain summand j to codomain summand i."""
        return [b[i * n:(i + 1) * n, j * n:(j + 1) * n] for n, b in zip(self.model.dims, self.blocks)]

    @classmethod
    def assemble(cls, model: FiniteVNModel, grid: Sequence[Sequence["VNMorphism | None"]],
                 col_dims: Sequence[int], row_dims: Sequence[int]) -> "VNMorphism":
        """Block operator from a grid of morphisms ``grid[r][c]: C_c -> R_r``.

        ``None`` entries are zero.  Summands are laid out so that the result
        again has the module index running slowest.
        """
        d, e = sum(col_dims), sum(row_dims)
        blocks = []
        for ci, n in enumerate(model.dims):
            big = np.zeros((e * n, d * n), dtype=complex)
            r0 = 0
            for r, rd in enumerate(row_dims):
                c0 = 0
                for c, cd in enumerate(col_dims):
                    g = grid[r][c]
                    if g is not None:
                        if (g.domain, g.codomain) != (cd, rd):
                            raise ModelError("grid entry has the wrong shape")
                        big[r0 * n:(r0 + rd) * n, c0 * n:(c0 + cd) * n] = g.blocks[ci]
                    c0 += cd
                r0 += rd
            blocks.append(big)
        return cls(model, d, e, blocks)

    def direct_sum(self, other: "VNMorphism") -> "VNMorphism":
        self._same_model(other)
        return VNMorphism.assemble(self.model, [[self, None], [None, other]],
                                   [self.domain, other.domain], [self.codomain, other.codomain])

    # -- spectral data --------------------------------------------------------

    def spectral_density(self, atol: float = 1e-12, rtol: float = 1e-12) -> SpectralDensity:
        return spectral_density(self, atol=atol, rtol=rtol)

    def log_det(self, **kw) -> float:
        return self.spectral_density(**kw).log_det()

    def det(self, **kw) -> float:
        return self.spectral_density(**kw).det()

    def betti(self, **kw) -> Fraction:
        return self.spectral_density(**kw).betti

    # -- serialisation --------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "cells": self.model.to_json(),
            "domain": self.domain,
            "codomain": self.codomain,
            "blocks": [[[[z.real, z.imag] for z in row] for row in b] for b in self.blocks],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc: dict) -> "VNMorphism":
        model = FiniteVNModel.from_json(doc["cells"])
        blocks = []
        for (_, n), raw in zip(model.cells, doc["blocks"]):
            arr = np.array([[complex(re, im) for re, im in row] for row in raw], dtype=complex)
            blocks.append(arr.reshape(doc["codomain"] * n, doc["domain"] * n))
        return cls(model, int(doc["domain"]), int(doc["codomain"]), blocks)

    @classmethod
    def loads(cls, text: str) -> "VNMorphism":
        return cls.from_json(json.loads(text))


def _eigvalsh_batched(mats: list[np.ndarray]) -> list[np.ndarray]:
    """Eigenvalues of Hermitian matrices, stacking equal shapes into one call."""
    out: list = [None] * len(mats)
    by_shape: dict = {}
    for i, m in enumerate(mats):
        by_shape.setdefault(m.shape, []).append(i)
    for shape, idx in by_shape.items():
        if shape[0] == 0:
            for i in idx:
                out[i] = np.zeros(0)
            continue
        stack = np.stack([mats[i] for i in idx])
        stack = 0.5 * (stack + np.conj(np.swapaxes(stack, -1, -2)))
        try:
            vals = np.linalg.eigvalsh(stack)
        except np.linalg.LinAlgError as exc:
            raise SpectralError(f"eigensolve failed for blocks of shape {shape}: {exc}") from exc
        if not np.all(np.isfinite(vals)):
            raise SpectralError("eigensolve returned non-finite values")
        for i, v in zip(idx, vals):
            out[i] = v
    return out


def spectral_density(f: VNMorphism, atol: float = 1e-12, rtol: float = 1e-12) -> SpectralDensity:
    """Spectral density of f, from the eigenvalues of f* f on the domain.

    Eigenvalues ``mu`` of f* f with ``|mu| <= max(atol, rtol * ||f* f||)`` are
    counted as kernel.
    """
    grams = [b.conj().T @ b for b in f.blocks]
    eigs = _eigvalsh_batched(grams)
    top = max((float(np.max(np.abs(v))) for v in eigs if v.size), default=0.0)
    cut = max(atol, rtol * top)
    raw: dict = {}
    kernel = Fraction(0)
    for (w, _), vals in zip(f.model.cells, eigs):
        zero = np.abs(vals) <= cut
        nz = int(np.count_nonzero(zero))
        if nz:
            kernel += w * nz
        for mu in vals[~zero]:
            if mu < 0:
                raise SpectralError(f"negative eigenvalue {mu} of a Gram matrix beyond the clamp")
            x = math.sqrt(float(mu))
            raw[x] = raw.get(x, Fraction(0)) + w
    jumps = merge_jumps(raw.items())
    if kernel:
        jumps.insert(0, (0.0, kernel))
    total = f.model.unit_trace() * f.domain
    return SpectralDensity(jumps, total)


def log_det(f: VNMorphism, **kw) -> float:
    return spectral_density(f, **kw).log_det()


# ---------------------------------------------------------------------------
# restriction to a corner and induction along an embedding


def algebra_projection_ranks(model: FiniteVNModel, p: Sequence[np.ndarray], tol: float = 1e-10) -> list[int]:
    """Validate a cellwise projection ``p_c in M_dim_c`` and return its ranks."""
    if len(p) != len(model.cells):
        raise ModelError("projection has the wrong number of cells")
    ranks = []
    for (_, n), pc in zip(model.cells, p):
        pc = np.asarray(pc, dtype=complex)
        if pc.shape != (n, n):
            raise ModelError("projection block has the wrong size")
        if np.max(np.abs(pc @ pc - pc), initial=0) > tol or np.max(np.abs(pc - pc.conj().T), initial=0) > tol:
            raise ModelError("not a projection")
        ranks.append(int(round(np.trace(pc).real)))
    if not any(ranks):
        raise ModelError("projection is zero")
    return ranks


def is_full(model: FiniteVNModel, p: Sequence[np.ndarray]) -> bool:
    """A projection of a multi-matrix algebra is full iff it is nonzero in every cell."""
    return all(r > 0 for r in algebra_projection_ranks(model, p))


@dataclass
class Restriction:
    morphism: VNMorphism
    scaling: Fraction
    kept_cells: list[int]
    full: bool


def restrict(f: VNMorphism, p: Sequence[np.ndarray]) -> Restriction:
    """Compress f to the corner module ``pU`` over ``p A p``.

    ``p`` is a projection of the algebra (one block per cell).  The commutant
    of ``p A p`` on ``pU`` keeps the same cell blocks; only the trace changes,
    to ``tr / tr(p)`` on the cells where ``p`` is nonzero.  When ``p`` is full
    ``ln det(f) = scaling * ln det(f|pU)`` with ``scaling = tr(p)``.
    """
    ranks = algebra_projection_ranks(f.model, p)
    tp = sum((w * r for (w, _), r in zip(f.model.cells, ranks)), Fraction(0))
    kept = [c for c, r in enumerate(ranks) if r > 0]
    model = FiniteVNModel(tuple((f.model.cells[c][0] / tp, f.model.cells[c][1]) for c in kept))
    g = VNMorphism(model, f.domain, f.codomain, [f.blocks[c] for c in kept])
    return Restriction(g, tp, kept, len(kept) == len(ranks))


def cell_projection(model: FiniteVNModel, cells: Iterable[int]) -> list[np.ndarray]:
    """Central projection onto the given cells."""
    cells = set(cells)
    return [np.eye(n) if c in cells else np.zeros((n, n)) for c, n in enumerate(model.dims)]


@dataclass
class CellEmbedding:
    """Unital *-embedding between multi-matrix algebras.

    Source cell ``c`` sits ``mult[c][t]`` times block-diagonally inside target
    cell ``t``, in order of ``c``; ``unitaries[t]`` (optional) conjugates the
    result: ``a -> U diag(...) U^H``.
    """

    source: FiniteVNModel
    target: FiniteVNModel
    mult: list[list[int]]
    unitaries: list[np.ndarray | None] | None = None

    def __post_init__(self):
        s, t = self.source, self.target
        if len(self.mult) != len(s.cells) or any(len(r) != len(t.cells) for r in self.mult):
            raise EmbeddingError("multiplicity matrix has the wrong shape")
        for ti, (_, m) in enumerate(t.cells):
            if sum(self.mult[c][ti] * s.cells[c][1] for c in range(len(s.cells))) != m:
                raise EmbeddingError(f"target cell {ti} is not filled exactly (embedding must be unital)")
        if self.unitaries is None:
            self.unitaries = [None] * len(t.cells)
        self.check_trace(tol=1e-12)

    def apply(self, parts: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Image of the algebra element with cell blocks ``parts``."""
        out = []
        for ti, (_, m) in enumerate(self.target.cells):
            big = np.zeros((m, m), dtype=complex)
            pos = 0
            for c, (_, n) in enumerate(self.source.cells):
                for _ in range(self.mult[c][ti]):
                    big[pos:pos + n, pos:pos + n] = parts[c]
                    pos += n
            u = self.unitaries[ti]
            out.append(big if u is None else u @ big @ u.conj().T)
        return out

    def check_trace(self, tol: float = 1e-12):
        """Compare traces on the matrix units of every source cell."""
        for c, (w, n) in enumerate(self.source.cells):
            for a in range(n):
                for b in range(n):
                    parts = [np.zeros((k, k)) for k in self.source.dims]
                    parts[c] = np.zeros((n, n))
                    parts[c][a, b] = 1.0
                    lhs = self.source.trace(parts)
                    rhs = self.target.trace(self.apply(parts))
                    if abs(lhs - rhs) > tol:
                        raise EmbeddingError(
                            f"embedding is not trace preserving on unit ({c},{a},{b}): {lhs} vs {rhs}")


def induce(f: VNMorphism, embedding: CellEmbedding) -> VNMorphism:
    """Right multiplication by the same matrix, read in the larger algebra."""
    if f.model != embedding.source:
        raise EmbeddingError("morphism does not live over the embedding's source")
    src = f.model.dims
    blocks = []
    for ti, (_, m) in enumerate(embedding.target.cells):
        blocks.append(np.zeros((f.codomain * m, f.domain * m), dtype=complex))
    for i in range(f.codomain):
        for j in range(f.domain):
            parts = [b[i * n:(i + 1) * n, j * n:(j + 1) * n] for n, b in zip(src, f.blocks)]
            for ti, img in enumerate(embedding.apply(parts)):
                m = embedding.target.dims[ti]
                blocks[ti][i * m:(i + 1) * m, j * m:(j + 1) * m] = img
    return VNMorphism(embedding.target, f.domain, f.codomain, blocks)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def cellwise_unitary(model: FiniteVNModel, d: int, rng: np.random.Generator) -> VNMorphism:
    return VNMorphism(model, d, d, [random_unitary(d * n, rng) for n in model.dims])


def random_morphism(model: FiniteVNModel, d: int, e: int, rng: np.random.Generator,
                    complex_entries: bool = True) -> VNMorphism:
    blocks = []
    for n in model.dims:
        b = rng.normal(size=(e * n, d * n))
        if complex_entries:
            b = b + 1j * rng.normal(size=(e * n, d * n))
        blocks.append(b)
    return VNMorphism(model, d, e, blocks)
