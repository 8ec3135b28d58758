"""Determinant collapse for projections that do not contain the kernel.

Over the algebra of bounded functions on [0, 1] (modelled exactly by dyadic
step functions) consider

* ``u_k = (eps, 1)/sqrt(1+eps^2)`` on ``[1-2^(1-k), 1-2^(-k)]``,
* ``v_k`` the two-copy embedding of ``[0, 1-2^(1-k)]``,
* ``p_k = u_k u_k* + v_k v_k*`` and the projection ``pr2`` onto the second copy.

Then ``det(pr2 o p_k) = (1+eps^2)^(-2^(-k-1))``; with ``eps_k^2 = k^(2^(k+1)) - 1``
this is exactly ``1/k`` although ``p_k`` increases to the identity.  The numbers
involved are astronomically large, so everything is carried out with exact
rationals, quadratic surds and logarithms written as rational combinations of
``ln p`` over primes ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from sympy import factorint

from .finvn import FiniteVNModel, VNMorphism, spectral_density


class DepthError(ValueError):
    pass


class KernelContainmentError(ValueError):
    pass


class NestingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact arithmetic helpers


def rational_sqrt(q: Fraction) -> Fraction | None:
    q = Fraction(q)
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


@dataclass(frozen=True)
class Surd:
    """a + b*sqrt(s) with rational a, b and a fixed rational radicand s >= 0."""

    a: Fraction
    b: Fraction
    s: Fraction

    @classmethod
    def rational(cls, a, s) -> "Surd":
        return cls(Fraction(a), Fraction(0), Fraction(s))

    @classmethod
    def root(cls, s) -> "Surd":
        r = rational_sqrt(Fraction(s))
        if r is not None:
            return cls(r, Fraction(0), Fraction(s))
        return cls(Fraction(0), Fraction(1), Fraction(s))

    def _same(self, other: "Surd"):
        if self.s != other.s and self.b and other.b:
            raise ValueError("surds with different radicands")

    def __add__(self, other: "Surd") -> "Surd":
        self._same(other)
        return Surd(self.a + other.a, self.b + other.b, self.s if self.b else other.s)

    def __sub__(self, other: "Surd") -> "Surd":
        return self + other.scale(-1)

    def __mul__(self, other: "Surd") -> "Surd":
        self._same(other)
        s = self.s if self.b else other.s
        return Surd(self.a * other.a + self.b * other.b * s, self.a * other.b + self.b * other.a, s)

    def scale(self, c) -> "Surd":
        return Surd(self.a * c, self.b * c, self.s)

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def as_rational(self) -> Fraction:
        if self.b:
            raise ValueError("value is irrational")
        return self.a

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(self.s)

    def __eq__(self, other):
        if not isinstance(other, Surd):
            return NotImplemented
        return self.a == other.a and self.b == other.b and (self.s == other.s or not self.b)

    def __hash__(self):
        return hash((self.a, self.b))


@dataclass(frozen=True)
class LogValue:
    """sum_p c_p ln(p) over primes p, with rational coefficients."""

    coeffs: tuple[tuple[int, Fraction], ...] = ()

    @classmethod
    def of(cls, q: Fraction, coefficient: Fraction = Fraction(1)) -> "LogValue":
        """coefficient * ln(q) for a positive rational q."""
        q = Fraction(q)
        if q <= 0:
            raise ValueError("logarithm of a non-positive number")
        out: dict = {}
        for p, e in factorint(q.numerator).items():
            out[int(p)] = out.get(int(p), 0) + coefficient * int(e)
        for p, e in factorint(q.denominator).items():
            out[int(p)] = out.get(int(p), 0) - coefficient * int(e)
        return cls._make(out)

    @classmethod
    def _make(cls, d: dict) -> "LogValue":
        return cls(tuple(sorted((p, Fraction(c)) for p, c in d.items() if c != 0)))

    def __add__(self, other: "LogValue") -> "LogValue":
        out = dict(self.coeffs)
        for p, c in other.coeffs:
            out[p] = out.get(p, 0) + c
        return LogValue._make(out)

    def __neg__(self):
        return LogValue(tuple((p, -c) for p, c in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __float__(self) -> float:
        return math.fsum(float(c) * math.log(p) for p, c in self.coeffs)

    def exp(self) -> float:
        return math.exp(float(self))

    def is_zero(self) -> bool:
        return not self.coeffs

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"({c})*ln({p})" for p, c in self.coeffs)


# ---------------------------------------------------------------------------
# dyadic models and two-copy operators


@dataclass(frozen=True)
class DyadicModel:
    depth: int

    @property
    def cells(self) -> int:
        return 2 ** self.depth

    @property
    def model(self) -> FiniteVNModel:
        return FiniteVNModel(((Fraction(1, self.cells), 1),) * self.cells)

    def interval(self, j: int) -> tuple[Fraction, Fraction]:
        return Fraction(j, self.cells), Fraction(j + 1, self.cells)

    def cells_in(self, a: Fraction, b: Fraction) -> list[int]:
        a, b = Fraction(a), Fraction(b)
        if (a * self.cells).denominator != 1 or (b * self.cells).denominator != 1:
            raise DepthError(f"[{a}, {b}] is not a union of cells at depth {self.depth}")
        return list(range(int(a * self.cells), int(b * self.cells)))


@dataclass(frozen=True)
class Segment:
    start: Fraction
    stop: Fraction
    scale_sq: Fraction  # the operator is sqrt(scale_sq) * matrix here
    matrix: tuple[tuple[Surd, ...], ...]


def _absorb(seg: Segment) -> Segment:
    r = rational_sqrt(seg.scale_sq)
    if r is None or seg.scale_sq == 1:
        return seg
    return Segment(seg.start, seg.stop, Fraction(1),
                   tuple(tuple(x.scale(r) for x in row) for row in seg.matrix))


class TwoCopyOperator:
    """Piecewise constant operator between copies of L2[0,1].

    ``rows x cols`` matrices of surds on finitely many half-open intervals with
    dyadic endpoints; zero off the listed segments.
    """

    def __init__(self, rows: int, cols: int, s: Fraction, segments: Sequence[Segment]):
        self.rows, self.cols, self.s = rows, cols, Fraction(s)
        segs = sorted((_absorb(g) for g in segments if g.stop > g.start), key=lambda g: g.start)
        for a, b in zip(segs, segs[1:]):
            if b.start < a.stop:
                raise ValueError("overlapping segments")
        for g in segs:
            if len(g.matrix) != rows or any(len(r) != cols for r in g.matrix):
                raise ValueError("segment matrix has the wrong shape")
        self.segments = segs

    def breakpoints(self) -> list[Fraction]:
        return sorted({Fraction(0), Fraction(1)} | {g.start for g in self.segments}
                      | {g.stop for g in self.segments})

    def at(self, x: Fraction) -> Segment | None:
        for g in self.segments:
            if g.start <= x < g.stop:
                return g
        return None

    def _zero(self, rows, cols):
        z = Surd.rational(0, self.s)
        return tuple(tuple(z for _ in range(cols)) for _ in range(rows))

    def __matmul__(self, other: "TwoCopyOperator") -> "TwoCopyOperator":
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        pts = sorted(set(self.breakpoints()) | set(other.breakpoints()))
        segs = []
        for a, b in zip(pts, pts[1:]):
            x, y = self.at(a), other.at(a)
            if x is None or y is None:
                continue
            mat = tuple(tuple(_dot([x.matrix[i][k] for k in range(self.cols)],
                                   [y.matrix[k][j] for k in range(self.cols)], self.s)
                              for j in range(other.cols)) for i in range(self.rows))
            segs.append(Segment(a, b, x.scale_sq * y.scale_sq, mat))
        return TwoCopyOperator(self.rows, other.cols, self.s, segs)

    def __add__(self, other: "TwoCopyOperator") -> "TwoCopyOperator":
        pts = sorted(set(self.breakpoints()) | set(other.breakpoints()))
        segs = []
        for a, b in zip(pts, pts[1:]):
            x, y = self.at(a), other.at(a)
            if x is None and y is None:
                continue
            if x is None:
                segs.append(Segment(a, b, y.scale_sq, y.matrix))
            elif y is None:
                segs.append(Segment(a, b, x.scale_sq, x.matrix))
            else:
                if x.scale_sq != y.scale_sq:
                    raise ValueError("cannot add segments with different irrational scales")
                segs.append(Segment(a, b, x.scale_sq, tuple(tuple(p + q for p, q in zip(r1, r2))
                                                            for r1, r2 in zip(x.matrix, y.matrix))))
        return TwoCopyOperator(self.rows, self.cols, self.s, segs)

    def __sub__(self, other):
        neg = TwoCopyOperator(other.rows, other.cols, other.s,
                              [Segment(g.start, g.stop, g.scale_sq, tuple(tuple(x.scale(-1) for x in r)
                                                                          for r in g.matrix))
                               for g in other.segments])
        return self + neg

    def adjoint(self) -> "TwoCopyOperator":
        return TwoCopyOperator(self.cols, self.rows, self.s,
                               [Segment(g.start, g.stop, g.scale_sq,
                                        tuple(tuple(g.matrix[i][j] for i in range(self.rows))
                                              for j in range(self.cols))) for g in self.segments])

    def is_zero(self) -> bool:
        return all(x.is_zero() for g in self.segments for r in g.matrix for x in r)

    def __eq__(self, other):
        if not isinstance(other, TwoCopyOperator):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and (self - other).is_zero()

    def trace(self) -> Fraction:
        """Exact trace: sum of segment length times matrix trace."""
        if self.rows != self.cols:
            raise ValueError("trace of a non-square operator")
        total = Fraction(0)
        for g in self.segments:
            t = Surd.rational(0, self.s)
            for i in range(self.rows):
                t = t + g.matrix[i][i]
            if not t.is_zero():
                if g.scale_sq != 1:
                    raise ValueError("trace is irrational")
                total += (g.stop - g.start) * t.as_rational()
        return total

    def to_vn(self, dyadic: DyadicModel) -> VNMorphism:
        """Floating point cell blocks at the given depth."""
        n = dyadic.cells
        for p in self.breakpoints():
            if (p * n).denominator != 1:
                raise DepthError(f"breakpoint {p} is not resolved at depth {dyadic.depth}")
        blocks = []
        for j in range(n):
            g = self.at(Fraction(j, n))
            if g is None:
                blocks.append(np.zeros((self.rows, self.cols)))
            else:
                sc = math.sqrt(g.scale_sq)
                blocks.append(np.array([[sc * float(x) for x in r] for r in g.matrix]))
        return VNMorphism(dyadic.model, self.cols, self.rows, blocks)


def _dot(xs, ys, s) -> Surd:
    acc = Surd.rational(0, s)
    for x, y in zip(xs, ys):
        acc = acc + x * y
    return acc


# ---------------------------------------------------------------------------
# the construction


def epsilon_sq(k: int) -> int:
    """eps_k^2 = k^(2^(k+1)) - 1, an exact (huge) integer."""
    return k ** (2 ** (k + 1)) - 1


def middle_interval(k: int) -> tuple[Fraction, Fraction]:
    return 1 - Fraction(2, 2 ** k), 1 - Fraction(1, 2 ** k)


def left_interval(k: int) -> tuple[Fraction, Fraction]:
    return Fraction(0), 1 - Fraction(2, 2 ** k)


def _check_depth(k: int, depth: int | None) -> int:
    if k < 1:
        raise DepthError("k must be positive")
    depth = k + 2 if depth is None else depth
    if depth < k + 1:
        raise DepthError(f"depth {depth} < k+1 = {k + 1}")
    return depth


def build_uk(k: int, eps_sq) -> TwoCopyOperator:
    """L2(middle) -> L2 + L2, x -> (eps x, x)/sqrt(1+eps^2)."""
    s = Fraction(eps_sq)
    a, b = middle_interval(k)
    col = ((Surd.root(s),), (Surd.rational(1, s),))
    return TwoCopyOperator(2, 1, s, [Segment(a, b, 1 / (1 + s), col)])


def build_vk(k: int, eps_sq) -> TwoCopyOperator:
    """The two-copy inclusion of L2(left) + L2(left)."""
    s = Fraction(eps_sq)
    a, b = left_interval(k)
    one, zero = Surd.rational(1, s), Surd.rational(0, s)
    return TwoCopyOperator(2, 2, s, [Segment(a, b, Fraction(1), ((one, zero), (zero, one)))])


def build_pk(k: int, eps_sq, depth: int | None = None) -> TwoCopyOperator:
    """p_k = u u* + v v*, checked against its closed form."""
    _check_depth(k, depth)
    s = Fraction(eps_sq)
    if s < 0:
        raise ValueError("eps^2 must be non-negative")
    u, v = build_uk(k, s), build_vk(k, s)
    p = u @ u.adjoint() + v @ v.adjoint()
    a, b = middle_interval(k)
    r = Surd.root(s)
    c = 1 / (1 + s)
    closed = TwoCopyOperator(2, 2, s, [
        *v.segments,
        Segment(a, b, Fraction(1), ((Surd.rational(s * c, s), r.scale(c)), (r.scale(c), Surd.rational(c, s)))),
    ])
    if p != closed:
        raise AssertionError("u u* + v v* differs from the closed form")
    return p


def build_pr2() -> TwoCopyOperator:
    one, zero = Surd.rational(1, 0), Surd.rational(0, 0)
    return TwoCopyOperator(1, 2, Fraction(0), [Segment(Fraction(0), Fraction(1), Fraction(1), ((zero, one),))])


def _retag(op: TwoCopyOperator, s: Fraction) -> TwoCopyOperator:
    segs = [Segment(g.start, g.stop, g.scale_sq,
                    tuple(tuple(Surd(x.a, x.b, s) for x in r) for r in g.matrix)) for g in op.segments]
    return TwoCopyOperator(op.rows, op.cols, s, segs)


def dim_Ak(k: int, eps_sq=1, depth: int | None = None) -> Fraction:
    """tr(p_k), exact."""
    return build_pk(k, eps_sq, depth).trace()


def dim_Ak_formula(k: int) -> Fraction:
    return 2 * (1 - Fraction(2, 2 ** k)) + Fraction(2, 2 ** k) - Fraction(1, 2 ** k)


@dataclass
class DetResult:
    k: int
    eps_sq: Fraction
    log_det: LogValue
    float_log_det: float
    kernel_dim: Fraction

    @property
    def det(self) -> float:
        return math.exp(self.float_log_det)


def det_pr2_pk(k: int, eps_sq=None, depth: int | None = None) -> DetResult:
    """FK determinant of pr2 o p_k.

    Every segment of f = pr2 o p_k is a 1 x 2 row whose f f* is rational; the
    positive values contribute ``length/2 * ln(f f*)``.
    """
    s = Fraction(epsilon_sq(k) if eps_sq is None else eps_sq)
    p = build_pk(k, s, depth)
    f = _retag(build_pr2(), s) @ p
    gram = f @ f.adjoint()
    log = LogValue()
    flt = []
    kernel = Fraction(0)
    covered = Fraction(0)
    for g in gram.segments:
        val = g.matrix[0][0].as_rational()
        val *= rational_sqrt(g.scale_sq) if g.scale_sq != 1 else 1
        length = g.stop - g.start
        covered += length
        # domain is two copies; f* f has eigenvalues {val, 0} on this segment
        kernel += length
        if val > 0:
            log = log + LogValue.of(val, length / 2)
            flt.append(float(length / 2) * _log_rational(val))
        else:
            kernel += length
    kernel += 2 * (1 - covered)
    return DetResult(k, s, log, math.fsum(flt), kernel)


def _log_rational(q: Fraction) -> float:
    return math.log(q.numerator) - math.log(q.denominator)


def expected_log(k: int) -> LogValue:
    """ln(1/k)."""
    return LogValue.of(Fraction(1, k))


def det_via_engine(k: int, eps_sq=None, depth: int | None = None) -> float:
    """Same determinant from the floating point spectral engine (small k only)."""
    s = Fraction(epsilon_sq(k) if eps_sq is None else eps_sq)
    depth = _check_depth(k, depth)
    p = build_pk(k, s, depth)
    f = _retag(build_pr2(), s) @ p
    return spectral_density(f.to_vn(DyadicModel(depth)), atol=1e-300, rtol=1e-14).det()


# ---------------------------------------------------------------------------
# convergence for kernel-containing projections


@dataclass
class ExhaustionReport:
    target_log_det: float
    stage_log_dets: list[float]
    errors: list[float]
    converged: bool


def kernel_basis(f: VNMorphism, atol: float = 1e-12, rtol: float = 1e-12) -> list[np.ndarray]:
    out = []
    grams = [b.conj().T @ b for b in f.blocks]
    top = max((float(np.max(np.abs(np.linalg.eigvalsh(g)))) for g in grams if g.size), default=0.0)
    cut = max(atol, rtol * top)
    for g in grams:
        w, v = np.linalg.eigh(g)
        out.append(v[:, np.abs(w) <= cut])
    return out


def verify_kernel_exhaustion(f: VNMorphism, p_seq: Sequence[VNMorphism], tol: float = 1e-10,
                             conv_tol: float = 1e-6) -> ExhaustionReport:
    """det(f o p_k) -> det(f) for projections p_k with ker f in im p_k in im p_{k+1}."""
    kers = kernel_basis(f)
    for i, p in enumerate(p_seq):
        if p.domain != f.domain or p.codomain != f.domain:
            raise ValueError("projections must act on the domain of f")
        if not p.is_projection(tol):
            raise ValueError(f"p_{i} is not a projection")
        for b, kb in zip(p.blocks, kers):
            if kb.size:
                resid = kb - b @ kb
                if float(np.max(np.abs(resid))) > tol:
                    raise KernelContainmentError(
                        f"ker f is not contained in im p_{i} (residual {float(np.max(np.abs(resid))):.3g})")
    for i, (p, q) in enumerate(zip(p_seq, p_seq[1:])):
        if (q @ p).max_abs_diff(p) > tol:
            raise NestingError(f"im p_{i} is not contained in im p_{i + 1}")
    target = spectral_density(f).log_det()
    stages = [spectral_density(f @ p).log_det() for p in p_seq]
    errs = [abs(math.exp(x) - math.exp(target)) for x in stages]
    return ExhaustionReport(target, stages, errs, bool(errs) and errs[-1] <= conv_tol)


def geometric_model(n: int) -> FiniteVNModel:
    """Cells of weight 2^-1, 2^-2, ..., 2^-(n-1), 2^-(n-1)."""
    w = [Fraction(1, 2 ** (j + 1)) for j in range(n - 1)] + [Fraction(1, 2 ** (n - 1))]
    return FiniteVNModel(tuple((x, 1) for x in w))


def exhausting_projections(f: VNMorphism, stages: Sequence[int]) -> list[VNMorphism]:
    """p_k = identity on the first k cells, projection onto ker f elsewhere."""
    kers = kernel_basis(f)
    out = []
    for k in stages:
        blocks = []
        for ci, kb in enumerate(kers):
            n = f.blocks[ci].shape[1]
            blocks.append(np.eye(n) if ci < k else kb @ kb.conj().T)
        out.append(VNMorphism(f.model, f.domain, f.domain, blocks))
    return out


def random_exhaustion_case(rng: np.random.Generator, cells: int = 32, d: int = 2):
    """A random endomorphism with a kernel on every cell of a geometric model."""
    model = geometric_model(cells)
    blocks = []
    for _ in range(cells):
        r = int(rng.integers(0, d))
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        u, s, vh = np.linalg.svd(x)
        s[r:] = 0.0
        s[:r] += 0.5
        blocks.append((u * s) @ vh)
    return VNMorphism(model, d, d, blocks)


def dyadic_projections(ks: Sequence[int], depth: int) -> tuple[VNMorphism, list[VNMorphism]]:
    """pr2 and the p_k as floating morphisms at a common depth (small k only)."""
    dy = DyadicModel(depth)
    ps = []
    for k in ks:
        s = Fraction(epsilon_sq(k))
        ps.append(build_pk(k, s, depth).to_vn(dy))
    return build_pr2().to_vn(dy), ps
