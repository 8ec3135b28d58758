"""Finite-dimensional approximations of group-ring matrices.

Representation convention: an element ``a = sum c_g g`` acts on ``l2`` of a
finite group by ``R(a)_{s,t} = c_{t^-1 s}`` (right multiplication written for
column vectors).  An ``m x n`` matrix ``A`` gives the morphism ``x -> xA`` from
``m`` copies to ``n`` copies; its cell block has ``R(a_ij)`` in position
``(j, i)``.  With this layout ``f* f`` is the representation of ``A A*``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .finvn import FiniteVNModel, SpectralDensity, VNMorphism, spectral_density
from .grouprings import (
    GroupError,
    GroupRingElement,
    GroupRingMatrix,
    GroupSpec,
    abelian,
    adjoint,
    as_table,
    grmul,
    is_normal,
    norm_bound,
    positive_reduction,
    rational_rank,
)


class SchemeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# representations


def _assemble(A: GroupRingMatrix, rep, dim: int) -> np.ndarray:
    """Cell block of A given ``rep(element) -> dim x dim`` array."""
    big = np.zeros((A.cols * dim, A.rows * dim), dtype=complex)
    for i, row in enumerate(A.entries):
        for j, a in enumerate(row):
            if a.terms:
                big[j * dim:(j + 1) * dim, i * dim:(i + 1) * dim] = rep(a)
    return big


def regular_matrix(a: GroupRingElement) -> np.ndarray:
    """R(a) on l2(G) for finite G, indexed by ``G.elements()`` order."""
    g = a.group
    if not g.is_finite:
        raise GroupError("regular representation needs a finite group")
    tab, index = as_table(g)
    n = tab.order
    out = np.zeros((n, n), dtype=complex)
    cols = np.arange(n)
    table = np.asarray(tab.table)
    for h, c in a.terms.items():
        rows = table[:, index[h]]  # s = t * h
        out[rows, cols] += complex(c)
    return out


def regular_rep(A: GroupRingMatrix) -> VNMorphism:
    g = A.group
    if not g.is_finite:
        raise GroupError(f"{g.describe()} is infinite; use a quotient or Folner scheme")
    n = g.order
    model = FiniteVNModel(((Fraction(1, n), n),))
    return VNMorphism(model, A.rows, A.cols, [_assemble(A, regular_matrix, n)])


def reduce_mod(A: GroupRingMatrix, n: int) -> GroupRingMatrix:
    """Image of a matrix over Z^k in the group ring of (Z/n)^k."""
    k = A.group.rank
    if A.group.kind != "abelian" or any(A.group.moduli):
        raise SchemeError("reduction mod n needs a free abelian group")
    target = abelian((n,) * k)
    return A.map_group(lambda g: tuple(x % n for x in g), target)


def _character_symbols(A: GroupRingMatrix, n: int) -> np.ndarray:
    """Array of shape (n^k, cols, rows) with the Fourier symbols of A."""
    k = A.group.rank
    grid = np.stack(np.meshgrid(*([np.arange(n)] * k), indexing="ij"), axis=-1).reshape(-1, k)
    out = np.zeros((grid.shape[0], A.cols, A.rows), dtype=complex)
    for i, row in enumerate(A.entries):
        for j, a in enumerate(row):
            for g, c in a.terms.items():
                phase = (grid @ np.asarray(g, dtype=np.int64)) % n
                out[:, j, i] += complex(c) * np.exp(2j * np.pi * phase / n)
    return out


def quotient_pushforward(A: GroupRingMatrix, n: int, fourier: bool = True) -> VNMorphism:
    """Push A from Z^k to (Z/n)^k.

    With ``fourier`` the regular representation is diagonalised by characters,
    giving ``n^k`` one-dimensional cells; otherwise the dense circulant form is
    used.  Both are unitarily equivalent.
    """
    if n < 1:
        raise SchemeError("modulus must be positive")
    if not fourier:
        return regular_rep(reduce_mod(A, n))
    reduce_mod(A, 1)  # validates the group
    k = A.group.rank
    size = n ** k
    sym = _character_symbols(A, n)
    model = FiniteVNModel(((Fraction(1, size), 1),) * size)
    f = VNMorphism.__new__(VNMorphism)
    f.model, f.domain, f.codomain = model, A.rows, A.cols
    f.blocks = list(sym)
    return f


def folner_compress(A: GroupRingMatrix, n: int) -> VNMorphism:
    """Compression of A to the box [0, n)^k of Z^k (plain cut-off)."""
    if n < 1:
        raise SchemeError("box side must be positive")
    if A.group.kind != "abelian" or any(A.group.moduli):
        raise SchemeError("Folner boxes need a free abelian group")
    k = A.group.rank
    pts = list(itertools.product(range(n), repeat=k))
    index = {p: i for i, p in enumerate(pts)}
    size = len(pts)

    def rep(a: GroupRingElement) -> np.ndarray:
        out = np.zeros((size, size), dtype=complex)
        for g, c in a.terms.items():
            for t, ti in index.items():
                s = tuple(x + y for x, y in zip(t, g))
                si = index.get(s)
                if si is not None:
                    out[si, ti] += complex(c)
        return out

    model = FiniteVNModel(((Fraction(1, size), size),))
    return VNMorphism(model, A.rows, A.cols, [_assemble(A, rep, size)])


# ---------------------------------------------------------------------------
# finite kernel extensions


@dataclass
class Extension:
    G: GroupSpec
    K: frozenset
    proj: dict
    Q: GroupSpec


def check_extension(G: GroupSpec, K, proj: dict, Q: GroupSpec) -> Extension:
    K = frozenset(K)
    if not G.is_finite or not Q.is_finite:
        raise GroupError("extension groups must be finite")
    if not is_normal(G, K):
        raise GroupError("K is not a normal subgroup of G")
    elems = G.elements()
    if set(proj) != set(elems):
        raise GroupError("projection is not defined on all of G")
    for a in elems:
        for b in elems:
            if proj[G.mul(a, b)] != Q.mul(proj[a], proj[b]):
                raise GroupError("projection is not a homomorphism onto the quotient")
    if set(proj.values()) != set(Q.elements()):
        raise GroupError("projection is not surjective")
    kernel = frozenset(g for g in elems if proj[g] == Q.identity)
    if kernel != K:
        raise GroupError("kernel of the projection differs from K")
    return Extension(G, K, dict(proj), Q)


def lift(A: GroupRingMatrix, ext: Extension) -> GroupRingMatrix:
    """s(A)/|K|: each q is replaced by the average of its preimages."""
    if A.group != ext.Q:
        raise GroupError("matrix does not live over the quotient")
    fibres: dict = {}
    for g, q in ext.proj.items():
        fibres.setdefault(q, []).append(g)
    k = len(ext.K)
    rows = []
    for r in A.entries:
        row = []
        for a in r:
            terms = {}
            for q, c in a.terms.items():
                for g in fibres[q]:
                    terms[g] = terms.get(g, 0) + c * Fraction(1, k)
            row.append(GroupRingElement(ext.G, terms))
        rows.append(row)
    return GroupRingMatrix(ext.G, rows)


def kernel_average(ext: Extension, size: int) -> GroupRingMatrix:
    """Diagonal matrix with the central projection N_K/|K| on the diagonal."""
    k = len(ext.K)
    e = GroupRingElement(ext.G, {g: Fraction(1, k) for g in ext.K})
    zero = GroupRingElement(ext.G)
    return GroupRingMatrix(ext.G, [[e if i == j else zero for j in range(size)] for i in range(size)])


def res_p(A: GroupRingMatrix, G: GroupSpec, K, proj: dict) -> VNMorphism:
    """A over Q viewed as a morphism of Hilbert N(G)-modules through G -> Q.

    Computed from the regular representation of the lift over G, compressed to
    the range of N_K/|K|.  The resulting model has one cell of size |Q| with
    weight 1/|G|.
    """
    ext = check_extension(G, K, proj, A.group)
    big = regular_rep(lift(A, ext))
    gel = G.elements()
    qel = ext.Q.elements()
    gi = {g: i for i, g in enumerate(gel)}
    qi = {q: i for i, q in enumerate(qel)}
    v = np.zeros((len(gel), len(qel)))
    scale = 1.0 / math.sqrt(len(ext.K))
    for g in gel:
        v[gi[g], qi[proj[g]]] = scale
    vm = np.kron(np.eye(A.rows), v)
    vn = np.kron(np.eye(A.cols), v)
    block = vn.T @ big.blocks[0] @ vm
    model = FiniteVNModel(((Fraction(1, G.order), ext.Q.order),))
    return VNMorphism(model, A.rows, A.cols, [block])


def res_p_full(A: GroupRingMatrix, G: GroupSpec, K, proj: dict) -> GroupRingMatrix:
    """Square A: s(A)/|K| + (1 - N_K/|K|) over G, an endomorphism of the free module."""
    if A.rows != A.cols:
        raise SchemeError("full lift needs a square matrix")
    ext = check_extension(G, K, proj, A.group)
    e = kernel_average(ext, A.rows)
    one = GroupRingMatrix.identity(G, A.rows)
    return lift(A, ext) + one - e


def res_p_trace(A: GroupRingMatrix, G: GroupSpec, K, proj: dict) -> Fraction:
    """Exact tr_G of the lift: identity coefficients of s(A)/|K|."""
    ext = check_extension(G, K, proj, A.group)
    return lift(A, ext).trace()


# ---------------------------------------------------------------------------
# approximation schemes and the convergence driver


@dataclass(frozen=True)
class RegularRep:
    name: str = "regular"

    def stages(self, A):
        return [A.group.order]

    def build(self, A, stage):
        return regular_rep(A)


@dataclass(frozen=True)
class QuotientChain:
    ns: tuple[int, ...]
    fourier: bool = True
    name: str = "quotient"

    def stages(self, A):
        return list(self.ns)

    def build(self, A, stage):
        return quotient_pushforward(A, stage, fourier=self.fourier)


@dataclass(frozen=True)
class FolnerBoxes:
    ns: tuple[int, ...]
    name: str = "folner"

    def stages(self, A):
        return list(self.ns)

    def build(self, A, stage):
        return folner_compress(A, stage)


ApproximationScheme = RegularRep | QuotientChain | FolnerBoxes


def doubling(start: int, stop: int) -> tuple[int, ...]:
    out, n = [], start
    while n <= stop:
        out.append(n)
        n *= 2
    return tuple(out)


@dataclass
class StageRecord:
    index: int
    size: int
    d: int
    moments: list[float]
    exact_moments: list[Fraction] | None
    betti: Fraction
    logdet: float
    spectral_radius: float

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "size": self.size,
            "d": self.d,
            "moments": self.moments,
            "exact_moments": None if self.exact_moments is None
            else [str(x) for x in self.exact_moments],
            "betti": float(self.betti),
            "betti_exact": str(self.betti),
            "logdet": self.logdet,
            "det": math.exp(self.logdet),
            "spectral_radius": self.spectral_radius,
        }


@dataclass
class ConvergenceReport:
    scheme: str
    stages: list[StageRecord]
    limit_moments: list[Fraction] | None
    norm_bound: Fraction
    verdicts: dict = field(default_factory=dict)

    @property
    def final(self) -> StageRecord:
        return self.stages[-1]

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "norm_bound": str(self.norm_bound),
            "limit_moments": None if self.limit_moments is None
            else [str(x) for x in self.limit_moments],
            "stages": [s.to_json() for s in self.stages],
            "verdicts": self.verdicts,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    def to_tsv(self) -> str:
        m = len(self.stages[0].moments) if self.stages else 0
        head = ["index", "size", "d", "betti", "logdet", "det", "spectral_radius"]
        head += [f"moment{j + 1}" for j in range(m)]
        lines = ["\t".join(head)]
        for s in self.stages:
            row = [s.index, s.size, s.d, float(s.betti), s.logdet, math.exp(s.logdet), s.spectral_radius]
            row += s.moments
            lines.append("\t".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row))
        return "\n".join(lines) + "\n"


def exact_moment_powers(A: GroupRingMatrix, M: int, max_terms: int = 200_000):
    """Delta^m for m = 1..M computed exactly; None once the supports get too big."""
    delta = positive_reduction(A)
    out = []
    cur = delta
    for _ in range(M):
        out.append(cur)
        if sum(len(x.terms) for r in cur.entries for x in r) > max_terms:
            return None
        cur = grmul(cur, delta)
    return out


def _quotient_trace(P: GroupRingMatrix, n: int) -> Fraction:
    """Trace of the image of P in (Z/n)^k: sum of diagonal coefficients at g = 0 mod n."""
    total = Fraction(0)
    for i in range(P.rows):
        for g, c in P.entries[i][i].terms.items():
            if all(x % n == 0 for x in g):
                total += c
    return total


def _diameter(P: GroupRingMatrix) -> int:
    best = 0
    for r in P.entries:
        for x in r:
            for g in x.terms:
                if isinstance(g, tuple):
                    best = max([best] + [abs(c) for c in g])
    return best


def run_approximation(A: GroupRingMatrix, scheme, M: int = 6, cauchy_tol: float = 1e-6,
                      cauchy_run: int = 3, atol: float = 1e-12, rtol: float = 1e-12) -> ConvergenceReport:
    """Check the hypotheses of the approximation lemma along a scheme.

    Verdicts recorded:

    * ``norm_bound_ok``: every stage satisfies ``||Delta_i|| <= norm_bound(A)^2``.
    * ``moments_exact``: stage moments agree with exact group-ring traces wherever
      the stage is known to be exact (regular rep, or quotients past the support).
    * ``moments_cauchy``: the last ``cauchy_run`` successive differences are below
      ``cauchy_tol`` for every moment.
    * ``det_ge_1``: every stage has ``ln det >= -1e-9``.
    """
    group = A.group
    if isinstance(scheme, RegularRep):
        if not group.is_finite:
            raise SchemeError("regular scheme needs a finite group")
    elif isinstance(scheme, (QuotientChain, FolnerBoxes)):
        if group.kind != "abelian" or any(group.moduli):
            raise SchemeError(f"{scheme.name} scheme needs a free abelian group")
    else:
        raise SchemeError(f"unknown scheme {scheme!r}")

    powers = exact_moment_powers(A, M)
    limit = None
    if powers is not None:
        limit = [P.trace() / A.rows for P in powers]
    bound = norm_bound(A)
    records = []
    for idx, n in enumerate(scheme.stages(A)):
        f = scheme.build(A, n)
        dens = spectral_density(f, atol=atol, rtol=rtol)
        moments = f.moments(M)
        exact = None
        if powers is not None:
            if isinstance(scheme, RegularRep):
                exact = list(limit)
            elif isinstance(scheme, QuotientChain):
                exact = [_quotient_trace(P, n) / A.rows for P in powers]
        radius = max((x for x, _ in dens.jumps), default=0.0) ** 2
        records.append(StageRecord(idx, n, f.domain * sum(f.model.dims),
                                   moments, exact, dens.betti, dens.log_det(), radius))

    verdicts: dict = {}
    verdicts["norm_bound_ok"] = all(r.spectral_radius <= float(bound) ** 2 + 1e-9 for r in records)
    exact_ok = True
    stationary_from = None
    if powers is not None:
        for r in records:
            if r.exact_moments is not None:
                if any(abs(a - float(b)) > 1e-9 * max(1.0, abs(float(b)))
                       for a, b in zip(r.moments, r.exact_moments)):
                    exact_ok = False
        if isinstance(scheme, QuotientChain):
            diam = _diameter(powers[-1])
            for r in records:
                if r.size > diam:
                    if r.exact_moments != limit:
                        exact_ok = False
                    if stationary_from is None:
                        stationary_from = r.index
            verdicts["support_diameter"] = diam
    verdicts["moments_exact"] = exact_ok
    verdicts["stationary_from_stage"] = stationary_from
    cauchy = False
    if len(records) > cauchy_run:
        tail = records[-(cauchy_run + 1):]
        cauchy = all(abs(a.moments[m] - b.moments[m]) < cauchy_tol
                     for a, b in zip(tail, tail[1:]) for m in range(M))
    elif len(records) == 1 and isinstance(scheme, RegularRep):
        cauchy = True
    verdicts["moments_cauchy"] = cauchy
    verdicts["limiting_betti"] = float(records[-1].betti)
    verdicts["limiting_betti_exact"] = str(records[-1].betti)
    verdicts["liminf_logdet"] = min(r.logdet for r in records[len(records) // 2:])
    verdicts["final_logdet"] = records[-1].logdet
    verdicts["det_ge_1"] = all(r.logdet >= -1e-9 for r in records)
    verdicts["conclusion"] = bool(verdicts["norm_bound_ok"] and verdicts["det_ge_1"]
                                  and (cauchy or stationary_from is not None))
    return ConvergenceReport(scheme.name, records, limit, bound, verdicts)


# ---------------------------------------------------------------------------
# exact kernel dimensions (independent of the eigensolver)


def exact_betti_finite(A: GroupRingMatrix) -> Fraction:
    """dim ker r_A over a finite group from an exact rational rank."""
    n = A.group.order
    mat = _assemble_exact(A)
    return Fraction(A.rows * n - rational_rank(mat), n)


def _assemble_exact(A: GroupRingMatrix) -> list[list[Fraction]]:
    tab, index = as_table(A.group)
    n = tab.order
    rows = A.cols * n
    cols = A.rows * n
    mat = [[Fraction(0)] * cols for _ in range(rows)]
    for i, row in enumerate(A.entries):
        for j, a in enumerate(row):
            for h, c in a.terms.items():
                for t in range(n):
                    s = tab.table[t][index[h]]
                    mat[j * n + s][i * n + t] += Fraction(c)
    return mat


def generic_rank(A: GroupRingMatrix, trials: int = 4, seed: int = 0) -> int:
    """Rank of A over the field of rational functions, by evaluation at random
    integer points (the maximum over trials equals the generic rank with high
    probability; each evaluation is exact)."""
    rng = np.random.default_rng(seed)
    k = A.group.rank
    best = 0
    for _ in range(trials):
        pt = [Fraction(int(x)) for x in rng.integers(2, 10**6, size=k)]
        mat = []
        for r in A.entries:
            row = []
            for a in r:
                v = Fraction(0)
                for g, c in a.terms.items():
                    term = Fraction(c)
                    for x, e in zip(pt, g):
                        term *= x ** e
                    v += term
                row.append(v)
            mat.append(row)
        best = max(best, rational_rank(mat))
    return best


def exact_betti_free_abelian(A: GroupRingMatrix) -> Fraction:
    """dim ker r_A over Z^k: rows minus the generic rank."""
    return Fraction(A.rows - generic_rank(A))
