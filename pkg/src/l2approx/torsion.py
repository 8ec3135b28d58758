"""Finite Hilbert chain complexes and their L2-torsion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .finvn import FiniteVNModel, VNMorphism, random_unitary, spectral_density


class ChainError(ValueError):
    pass


class TorsionError(ValueError):
    def __init__(self, degree: int, betti):
        super().__init__(f"L2-Betti number in degree {degree} is {betti}, not zero")
        self.degree = degree
        self.betti = betti


class HilbertChainComplex:
    """C_0 <- C_1 <- ... <- C_N with ``C_n`` free of rank ``dims[n]``.

    ``diffs[n]`` is ``c_n: C_n -> C_{n-1}`` for ``n = 1..N``.
    """

    def __init__(self, model: FiniteVNModel, dims: Sequence[int],
                 diffs: Mapping[int, VNMorphism], tol: float = 1e-10):
        self.model = model
        self.dims = list(dims)
        self.diffs = {}
        for n in range(1, len(self.dims)):
            c = diffs.get(n)
            if c is None:
                c = VNMorphism.zero(model, self.dims[n], self.dims[n - 1])
            if c.model != model or (c.domain, c.codomain) != (self.dims[n], self.dims[n - 1]):
                raise ChainError(f"differential in degree {n} has the wrong shape")
            self.diffs[n] = c
        for n in range(2, len(self.dims)):
            comp = self.diffs[n - 1] @ self.diffs[n]
            err = max((float(np.max(np.abs(b))) if b.size else 0.0) for b in comp.blocks)
            if err > tol:
                raise ChainError(f"c_{n - 1} o c_{n} is not zero (max entry {err:.3g})")

    @property
    def top(self) -> int:
        return len(self.dims) - 1

    def c(self, n: int) -> VNMorphism:
        if n in self.diffs:
            return self.diffs[n]
        lo = self.dims[n - 1] if 0 <= n - 1 <= self.top else 0
        hi = self.dims[n] if 0 <= n <= self.top else 0
        return VNMorphism.zero(self.model, hi, lo)

    def dim(self, n: int) -> Fraction:
        if not 0 <= n <= self.top:
            return Fraction(0)
        return self.dims[n] * self.model.unit_trace()

    def bettis(self, atol: float = 1e-12, rtol: float = 1e-12) -> list[Fraction]:
        ker = {}
        for n in range(self.top + 2):
            if 1 <= n <= self.top:
                ker[n] = spectral_density(self.diffs[n], atol=atol, rtol=rtol).betti
            else:
                ker[n] = self.dim(n)
        return [ker[n] - (self.dim(n + 1) - ker[n + 1]) for n in range(self.top + 1)]

    def log_dets(self, atol: float = 1e-12, rtol: float = 1e-12) -> dict[int, float]:
        return {n: spectral_density(c, atol=atol, rtol=rtol).log_det() for n, c in self.diffs.items()}

    def conjugate(self, unitaries: Mapping[int, VNMorphism]) -> "HilbertChainComplex":
        """Change of basis ``c_n -> u_{n-1} c_n u_n^*``."""
        diffs = {n: unitaries[n - 1] @ c @ unitaries[n].adjoint() for n, c in self.diffs.items()}
        return HilbertChainComplex(self.model, self.dims, diffs)

    def to_json(self) -> dict:
        return {"dims": self.dims, "cells": self.model.to_json(),
                "differentials": {str(n): c.to_json() for n, c in self.diffs.items()}}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc) -> "HilbertChainComplex":
        model = FiniteVNModel.from_json(doc["cells"])
        diffs = {int(n): VNMorphism.from_json(c) for n, c in doc["differentials"].items()}
        return cls(model, doc["dims"], diffs)


def l2_torsion(C: HilbertChainComplex, atol: float = 1e-12, rtol: float = 1e-12,
               betti_tol: float = 0.0) -> float:
    """-sum (-1)^n ln det(c_n); refuses when some L2-Betti number is nonzero."""
    for n, b in enumerate(C.bettis(atol=atol, rtol=rtol)):
        if abs(b) > betti_tol:
            raise TorsionError(n, b)
    return -sum((-1) ** n * ld for n, ld in C.log_dets(atol=atol, rtol=rtol).items())


@dataclass
class ChainMap:
    source: HilbertChainComplex
    target: HilbertChainComplex
    maps: dict  # n -> VNMorphism C_n -> D_n

    def __post_init__(self):
        C, D = self.source, self.target
        if C.model != D.model:
            raise ChainError("complexes over different models")
        top = max(C.top, D.top)
        for n in range(top + 1):
            phi = self.at(n)
            if (phi.domain, phi.codomain) != (_d(C, n), _d(D, n)):
                raise ChainError(f"chain map has the wrong shape in degree {n}")
        for n in range(1, top + 1):
            lhs = D.c(n) @ self.at(n) if _d(D, n) else None
            rhs = self.at(n - 1) @ C.c(n) if _d(C, n) else None
            err = 0.0
            if lhs is not None and rhs is not None:
                err = lhs.max_abs_diff(rhs)
            elif lhs is not None:
                err = lhs.operator_norm()
            elif rhs is not None:
                err = rhs.operator_norm()
            if err > 1e-10:
                raise ChainError(f"not a chain map in degree {n} (defect {err:.3g})")

    def at(self, n: int) -> VNMorphism:
        m = self.maps.get(n)
        if m is None:
            m = VNMorphism.zero(self.source.model, _d(self.source, n), _d(self.target, n))
        return m


def _d(C: HilbertChainComplex, n: int) -> int:
    return C.dims[n] if 0 <= n <= C.top else 0


def mapping_cone(phi: ChainMap) -> HilbertChainComplex:
    """cone_n = C_{n-1} + D_n with d(x, y) = (-c(x), d(y) - phi(x))."""
    C, D = phi.source, phi.target
    model = C.model
    top = max(C.top + 1, D.top)
    dims = [_d(C, n - 1) + _d(D, n) for n in range(top + 1)]
    diffs = {}
    for n in range(1, top + 1):
        grid = [[C.c(n - 1).scale(-1) if _d(C, n - 1) and _d(C, n - 2) else None, None],
                [phi.at(n - 1).scale(-1) if _d(C, n - 1) and _d(D, n - 1) else None,
                 D.c(n) if _d(D, n) and _d(D, n - 1) else None]]
        diffs[n] = VNMorphism.assemble(model, grid, [_d(C, n - 1), _d(D, n)],
                                       [_d(C, n - 2), _d(D, n - 1)])
    return HilbertChainComplex(model, dims, diffs)


# ---------------------------------------------------------------------------
# chain contractions


@dataclass
class ContractionResult:
    log_det: float
    torsion: float
    unipotent_eigen_error: float
    nilpotent_defect: float
    strictly_raising: bool

    @property
    def unipotent(self) -> bool:
        return self.nilpotent_defect <= 1e-8 and self.strictly_raising and self.unipotent_eigen_error <= 1e-6


def check_contraction(C: HilbertChainComplex, gamma: Mapping[int, VNMorphism], tol: float = 1e-10):
    for n in range(C.top + 1):
        total = VNMorphism.zero(C.model, C.dims[n])
        if n + 1 <= C.top:
            total = total + C.c(n + 1) @ gamma[n]
        if n >= 1:
            total = total + gamma[n - 1] @ C.c(n)
        err = total.max_abs_diff(VNMorphism.identity(C.model, C.dims[n]))
        if err > tol:
            raise ChainError(f"c gamma + gamma c differs from the identity in degree {n} by {err:.3g}")


def _parity_operator(C: HilbertChainComplex, gamma, odd: bool) -> VNMorphism:
    """(c + gamma) restricted to the odd (or even) degrees."""
    src = [n for n in range(C.top + 1) if n % 2 == (1 if odd else 0)]
    dst = [n for n in range(C.top + 1) if n % 2 == (0 if odd else 1)]
    grid = []
    for m in dst:
        row = []
        for n in src:
            if m == n - 1:
                row.append(C.c(n))
            elif m == n + 1:
                row.append(gamma[n])
            else:
                row.append(None)
        grid.append(row)
    return VNMorphism.assemble(C.model, grid, [C.dims[n] for n in src], [C.dims[m] for m in dst])


def contraction_torsion(C: HilbertChainComplex, gamma: Mapping[int, VNMorphism],
                        tol: float = 1e-10) -> ContractionResult:
    """ln det((c + gamma)_odd), with the unipotence check of
    (c + gamma)_odd o (c + gamma)_even = 1 + gamma^2 on even degrees."""
    check_contraction(C, gamma, tol)
    odd = _parity_operator(C, gamma, True)
    even = _parity_operator(C, gamma, False)
    ld = spectral_density(odd).log_det()
    prod = odd @ even
    ident = VNMorphism.identity(C.model, prod.domain)
    nil = prod - ident
    eig_err = 0.0
    for b in prod.blocks:
        if b.size:
            eig_err = max(eig_err, float(np.max(np.abs(np.linalg.eigvals(b) - 1.0))))
    evens = [n for n in range(C.top + 1) if n % 2 == 0]
    power = nil.power(len(evens))
    nil_defect = max((float(np.max(np.abs(b))) if b.size else 0.0) for b in power.blocks)
    # 1 + gamma^2 must only move degree 2k to 2k+2
    offs = np.cumsum([0] + [C.dims[n] for n in evens])
    raising = True
    for ci, dim in enumerate(C.model.dims):
        b = nil.blocks[ci]
        for a, m in enumerate(evens):
            for bb, n in enumerate(evens):
                if m != n + 2:
                    sub = b[offs[a] * dim:offs[a + 1] * dim, offs[bb] * dim:offs[bb + 1] * dim]
                    if sub.size and np.max(np.abs(sub)) > 1e-9:
                        raising = False
    return ContractionResult(ld, l2_torsion(C), eig_err, nil_defect, raising)


def pinv_contraction(C: HilbertChainComplex) -> dict[int, VNMorphism]:
    """gamma_{n-1} = pseudo-inverse of c_n (a contraction for acyclic C)."""
    gamma = {}
    for n in range(C.top + 1):
        if n + 1 <= C.top:
            c = C.c(n + 1)
            gamma[n] = VNMorphism(C.model, c.codomain, c.domain, [np.linalg.pinv(b) for b in c.blocks])
        else:
            gamma[n] = VNMorphism.zero(C.model, C.dims[n], 0)
    return gamma


def twist_contraction(C: HilbertChainComplex, gamma: Mapping[int, VNMorphism],
                      h: Mapping[int, VNMorphism]) -> dict[int, VNMorphism]:
    """gamma + c h - h c, another contraction (h_n: C_n -> C_{n+2})."""
    out = {}
    for n in range(C.top + 1):
        g = gamma[n]
        if n + 2 <= C.top:
            g = g + C.c(n + 2) @ h[n]
        if n >= 1 and n + 1 <= C.top:
            g = g - h[n - 1] @ C.c(n)
        out[n] = g
    return out


# ---------------------------------------------------------------------------
# random acyclic complexes


def random_acyclic(model: FiniteVNModel, ranks: Sequence[int], rng: np.random.Generator,
                   real: bool = False) -> HilbertChainComplex:
    """Acyclic complex with rank(c_n) = ranks[n-1], so dim C_n = r_n + r_{n+1}.

    Each C_n splits as (complement of kernel) + (kernel); c_n maps the first
    summand isomorphically onto the kernel summand of C_{n-1}; everything is
    then conjugated by random unitaries.
    """
    r = [0] + list(ranks) + [0]
    top = len(ranks)
    dims = [r[n] + r[n + 1] for n in range(top + 1)]
    units = {n: [random_unitary(dims[n] * k, rng) if not real else
                 np.linalg.qr(rng.normal(size=(dims[n] * k, dims[n] * k)))[0]
                 for k in model.dims] for n in range(top + 1)}
    diffs = {}
    for n in range(1, top + 1):
        blocks = []
        for ci, k in enumerate(model.dims):
            rk = r[n] * k
            x = rng.normal(size=(rk, rk)) + np.eye(rk) * 2.0
            if not real:
                x = x + 1j * rng.normal(size=(rk, rk))
            raw = np.zeros((dims[n - 1] * k, dims[n] * k), dtype=complex)
            # source: first r_n*k coords; target: last r_n*k coords of C_{n-1}
            raw[dims[n - 1] * k - rk:, :rk] = x
            blocks.append(units[n - 1][ci] @ raw @ units[n][ci].conj().T)
        diffs[n] = VNMorphism(model, dims[n], dims[n - 1], blocks)
    return HilbertChainComplex(model, dims, diffs)


def null_homotopic_map(C: HilbertChainComplex, D: HilbertChainComplex,
                       rng: np.random.Generator) -> ChainMap:
    """phi = d h + h c for random h_n: C_n -> D_{n+1}."""
    model = C.model
    top = max(C.top, D.top)
    h = {}
    for n in range(-1, top + 1):
        a, b = _d(C, n), _d(D, n + 1)
        h[n] = VNMorphism(model, a, b, [rng.normal(size=(b * k, a * k)) + 1j * rng.normal(size=(b * k, a * k))
                                        for k in model.dims])
    maps = {}
    for n in range(top + 1):
        phi = VNMorphism.zero(model, _d(C, n), _d(D, n))
        if _d(D, n + 1) and _d(D, n):
            phi = phi + D.c(n + 1) @ h[n]
        if _d(C, n) and _d(C, n - 1):
            phi = phi + h[n - 1] @ C.c(n)
        maps[n] = phi
    return ChainMap(C, D, maps)
