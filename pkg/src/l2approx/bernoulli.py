"""Cylinder functions on Bernoulli shifts A^G and their crossed products.

G is a free abelian group (elements are integer tuples); the shift acts by
``(g.z)_h = z_{h - g}``.  A cylinder function stores a dense table over
``A^S`` for a finite support ``S``.  Finite quotients ``psi: Z^k -> prod Z/n_j``
induce ``alpha(z)_g = z_{psi(g)}`` and the pushforward
``beta(sum f_g g) = sum (f_g o alpha) psi(g)`` into the crossed product of
the finite shift ``A^{G_i}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .finvn import VNMorphism
from .grouprings import GroupSpec, abelian
from .relations import CrossedElement, CrossedMatrix, FiniteAction, crossed_regular_rep


class CapError(ValueError):
    pass


class ApproximationBoundError(ValueError):
    pass


Point = tuple


@dataclass(frozen=True)
class Alphabet:
    probs: tuple[Fraction, ...]

    def __post_init__(self):
        p = tuple(Fraction(x) for x in self.probs)
        if not p or any(x <= 0 for x in p) or sum(p) != 1:
            raise ValueError("alphabet probabilities must be positive and sum to 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, size: int) -> "Alphabet":
        return cls((Fraction(1, size),) * size)

    @property
    def size(self) -> int:
        return len(self.probs)


class CylinderFunction:
    """f(z) = table[z_{s_1}, ..., z_{s_r}] for support (s_1, ..., s_r)."""

    __slots__ = ("alphabet", "support", "table")

    def __init__(self, alphabet: Alphabet, support: Sequence[Point], table: Mapping | Sequence | Callable):
        support = tuple(tuple(int(c) for c in s) for s in support)
        if len(set(support)) != len(support):
            raise ValueError("support coordinates must be distinct")
        words = list(itertools.product(range(alphabet.size), repeat=len(support)))
        if callable(table):
            values = [table(w) for w in words]
        elif isinstance(table, Mapping):
            values = [table.get(w, 0) for w in words]
        else:
            values = list(table)
            if len(values) != len(words):
                raise ValueError(f"table has {len(values)} entries, expected {len(words)}")
        self.alphabet = alphabet
        self.support = support
        self.table = tuple(Fraction(v) for v in values)

    # -- basic constructors -------------------------------------------------

    @classmethod
    def constant(cls, alphabet: Alphabet, c, rank: int = 1) -> "CylinderFunction":
        return cls(alphabet, (), [c])

    @classmethod
    def indicator(cls, alphabet: Alphabet, coord: Point, symbol: int) -> "CylinderFunction":
        """chi_{z_coord = symbol}."""
        return cls(alphabet, (coord,), lambda w: int(w[0] == symbol))

    @classmethod
    def equality(cls, alphabet: Alphabet, a: Point, b: Point) -> "CylinderFunction":
        """chi_{z_a = z_b}."""
        return cls(alphabet, (a, b), lambda w: int(w[0] == w[1]))

    # -- evaluation ----------------------------------------------------------

    def _index(self, word: Sequence[int]) -> int:
        idx = 0
        for a in word:
            idx = idx * self.alphabet.size + a
        return idx

    def value(self, word: Sequence[int]) -> Fraction:
        return self.table[self._index(word)]

    def __call__(self, config: Callable[[Point], int] | Mapping) -> Fraction:
        get = config.__getitem__ if isinstance(config, Mapping) else config
        return self.value([get(s) for s in self.support])

    def extend(self, support: Sequence[Point]) -> "CylinderFunction":
        """Same function written over a larger support."""
        support = tuple(tuple(s) for s in support)
        pos = [support.index(s) for s in self.support]
        return CylinderFunction(self.alphabet, support,
                                lambda w: self.value([w[p] for p in pos]))

    def minimal_support(self) -> tuple[Point, ...]:
        """Coordinates the table actually depends on."""
        keep = []
        k = self.alphabet.size
        words = list(itertools.product(range(k), repeat=len(self.support)))
        for i, s in enumerate(self.support):
            for w in words:
                v = self.value(w)
                if any(self.value(w[:i] + (a,) + w[i + 1:]) != v for a in range(k)):
                    keep.append(s)
                    break
        return tuple(keep)

    def minimize(self) -> "CylinderFunction":
        sup = self.minimal_support()
        pos = [self.support.index(s) for s in sup]
        full = len(self.support)

        def val(w):
            word = [0] * full
            for p, a in zip(pos, w):
                word[p] = a
            return self.value(word)

        return CylinderFunction(self.alphabet, sup, val)

    # -- ring structure -------------------------------------------------------

    def _binary(self, other: "CylinderFunction", op) -> "CylinderFunction":
        if other.alphabet != self.alphabet:
            raise ValueError("different alphabets")
        sup = tuple(dict.fromkeys(self.support + other.support))
        a, b = self.extend(sup), other.extend(sup)
        return CylinderFunction(self.alphabet, sup, [op(x, y) for x, y in zip(a.table, b.table)])

    def _coerce(self, other):
        if isinstance(other, CylinderFunction):
            return other
        return CylinderFunction.constant(self.alphabet, other)

    def __add__(self, other):
        return self._binary(self._coerce(other), lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(self._coerce(other), lambda x, y: x - y)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        return self._binary(self._coerce(other), lambda x, y: x * y)

    __rmul__ = __mul__

    def __neg__(self):
        return CylinderFunction(self.alphabet, self.support, [-x for x in self.table])

    def conj(self) -> "CylinderFunction":
        return self

    def is_zero(self) -> bool:
        return not any(self.table)

    def same_function(self, other: "CylinderFunction") -> bool:
        return (self - other).is_zero()

    def __eq__(self, other):
        return isinstance(other, CylinderFunction) and self.same_function(other)

    def __hash__(self):
        m = self.minimize()
        return hash((m.support, m.table))

    def __repr__(self):
        return f"CylinderFunction(support={self.support}, table={[str(x) for x in self.table]})"

    # -- measure ------------------------------------------------------------------

    def integral(self) -> Fraction:
        p = self.alphabet.probs
        total = Fraction(0)
        for w, v in zip(itertools.product(range(self.alphabet.size), repeat=len(self.support)), self.table):
            if v:
                total += v * math.prod(p[a] for a in w)
        return total

    def l1(self) -> Fraction:
        return CylinderFunction(self.alphabet, self.support, [abs(x) for x in self.table]).integral()

    def sup_norm(self) -> Fraction:
        return max((abs(x) for x in self.table), default=Fraction(0))

    def translate(self, g: Point) -> "CylinderFunction":
        """z -> f(g^-1 . z), whose support is g + S."""
        sup = tuple(tuple(a + b for a, b in zip(s, g)) for s in self.support)
        return CylinderFunction(self.alphabet, sup, self.table)

    def to_json(self) -> dict:
        return {"alphabet": [[x.numerator, x.denominator] for x in self.alphabet.probs],
                "support": [list(s) for s in self.support],
                "table": [[x.numerator, x.denominator] for x in self.table]}

    @classmethod
    def from_json(cls, doc) -> "CylinderFunction":
        alph = Alphabet(tuple(Fraction(a, b) for a, b in doc["alphabet"]))
        return cls(alph, [tuple(s) for s in doc["support"]], [Fraction(a, b) for a, b in doc["table"]])


# ---------------------------------------------------------------------------
# crossed product R * G


class CrossedCylinder:
    """sum_g f_g g with f_g cylinder functions and g in Z^k."""

    __slots__ = ("alphabet", "rank", "terms")

    def __init__(self, alphabet: Alphabet, rank: int, terms: Mapping[Point, CylinderFunction] | None = None):
        clean = {}
        for g, f in (terms or {}).items():
            g = tuple(int(x) for x in g)
            if len(g) != rank:
                raise ValueError("group element has the wrong rank")
            if not isinstance(f, CylinderFunction):
                f = CylinderFunction.constant(alphabet, f)
            if g in clean:
                f = clean[g] + f
            if f.is_zero():
                clean.pop(g, None)
            else:
                clean[g] = f
        self.alphabet = alphabet
        self.rank = rank
        self.terms = clean

    @classmethod
    def scalar(cls, alphabet: Alphabet, rank: int, c=1) -> "CrossedCylinder":
        return cls(alphabet, rank, {(0,) * rank: c})

    @classmethod
    def monomial(cls, f: CylinderFunction, g: Point) -> "CrossedCylinder":
        return cls(f.alphabet, len(g), {g: f})

    def __add__(self, other: "CrossedCylinder") -> "CrossedCylinder":
        out = dict(self.terms)
        for g, f in other.terms.items():
            out[g] = out[g] + f if g in out else f
        return CrossedCylinder(self.alphabet, self.rank, out)

    def __neg__(self):
        return CrossedCylinder(self.alphabet, self.rank, {g: -f for g, f in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "CrossedCylinder") -> "CrossedCylinder":
        out: dict = {}
        for g, f in self.terms.items():
            for h, k in other.terms.items():
                # f * (k o m_{g^-1}) at g + h
                term = f * k.translate(g)
                gh = tuple(a + b for a, b in zip(g, h))
                out[gh] = out[gh] + term if gh in out else term
        return CrossedCylinder(self.alphabet, self.rank, out)

    def star(self) -> "CrossedCylinder":
        # (f g)* = (conj f o m_g) g^-1
        return CrossedCylinder(self.alphabet, self.rank,
                               {tuple(-x for x in g): f.conj().translate(tuple(-x for x in g))
                                for g, f in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, CrossedCylinder):
            return NotImplemented
        return (self - other).terms == {}

    def trace(self) -> Fraction:
        f = self.terms.get((0,) * self.rank)
        return f.integral() if f is not None else Fraction(0)

    def group_support(self) -> list[Point]:
        return list(self.terms)

    def coordinates(self) -> set:
        out = set()
        for f in self.terms.values():
            out.update(f.minimal_support())
        return out

    def to_json(self) -> dict:
        return {"rank": self.rank, "terms": [[list(g), f.to_json()] for g, f in sorted(self.terms.items())]}

    @classmethod
    def from_json(cls, doc) -> "CrossedCylinder":
        terms = {tuple(g): CylinderFunction.from_json(f) for g, f in doc["terms"]}
        alph = next(iter(terms.values())).alphabet if terms else Alphabet((Fraction(1),))
        return cls(alph, int(doc["rank"]), terms)


class CrossedCylinderMatrix:
    __slots__ = ("alphabet", "rank", "rows", "cols", "entries")

    def __init__(self, alphabet: Alphabet, rank: int, entries: Sequence[Sequence[CrossedCylinder]]):
        self.alphabet = alphabet
        self.rank = rank
        self.rows = len(entries)
        self.cols = len(entries[0]) if entries else 0
        self.entries = tuple(tuple(x for x in r) for r in entries)

    @classmethod
    def identity(cls, alphabet, rank, n):
        one = CrossedCylinder.scalar(alphabet, rank)
        zero = CrossedCylinder(alphabet, rank)
        return cls(alphabet, rank, [[one if i == j else zero for j in range(n)] for i in range(n)])

    def __matmul__(self, other: "CrossedCylinderMatrix") -> "CrossedCylinderMatrix":
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = CrossedCylinder(self.alphabet, self.rank)
                for k in range(self.cols):
                    acc = acc + self.entries[i][k] * other.entries[k][j]
                row.append(acc)
            out.append(row)
        return CrossedCylinderMatrix(self.alphabet, self.rank, out)

    def __add__(self, other):
        return CrossedCylinderMatrix(self.alphabet, self.rank,
                                     [[a + b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __eq__(self, other):
        return isinstance(other, CrossedCylinderMatrix) and all(
            a == b for r, s in zip(self.entries, other.entries) for a, b in zip(r, s))

    def star(self) -> "CrossedCylinderMatrix":
        return CrossedCylinderMatrix(self.alphabet, self.rank,
                                     [[self.entries[i][j].star() for i in range(self.rows)]
                                      for j in range(self.cols)])

    def trace(self) -> Fraction:
        return sum((self.entries[i][i].trace() for i in range(self.rows)), Fraction(0))

    def power(self, m: int) -> "CrossedCylinderMatrix":
        out = CrossedCylinderMatrix.identity(self.alphabet, self.rank, self.rows)
        for _ in range(m):
            out = out @ self
        return out

    def gram(self) -> "CrossedCylinderMatrix":
        return self @ self.star()

    def to_json(self) -> dict:
        return {"alphabet": [[x.numerator, x.denominator] for x in self.alphabet.probs], "rank": self.rank,
                "entries": [[x.to_json() for x in r] for r in self.entries]}

    @classmethod
    def from_json(cls, doc) -> "CrossedCylinderMatrix":
        alph = Alphabet(tuple(Fraction(a, b) for a, b in doc["alphabet"]))
        rank = int(doc["rank"])
        rows = [[CrossedCylinder(alph, rank, CrossedCylinder.from_json(x).terms) for x in r]
                for r in doc["entries"]]
        return cls(alph, rank, rows)


def as_matrix(x: CrossedCylinder | CrossedCylinderMatrix) -> CrossedCylinderMatrix:
    if isinstance(x, CrossedCylinderMatrix):
        return x
    return CrossedCylinderMatrix(x.alphabet, x.rank, [[x]])


# ---------------------------------------------------------------------------
# finite quotients and the pushforward


@dataclass(frozen=True)
class Quotient:
    """psi: Z^k -> prod Z/n_j, coordinatewise reduction."""

    moduli: tuple[int, ...]

    def __post_init__(self):
        if not self.moduli or any(m < 1 for m in self.moduli):
            raise ValueError("quotient moduli must be positive")

    @property
    def group(self) -> GroupSpec:
        return abelian(self.moduli)

    @property
    def order(self) -> int:
        return math.prod(self.moduli)

    def __call__(self, g: Point) -> Point:
        if len(g) != len(self.moduli):
            raise ValueError("element rank does not match the quotient")
        return tuple(x % m for x, m in zip(g, self.moduli))

    def injective_on(self, pts: Iterable[Point]) -> bool:
        pts = list(set(pts))
        return len({self(p) for p in pts}) == len(pts)


class FiniteShift:
    """A^{G_i} with product measure and the shift action of G_i."""

    def __init__(self, alphabet: Alphabet, quotient: Quotient, cap: int = 4096):
        size = alphabet.size ** quotient.order
        if size * quotient.order > cap:
            raise CapError(f"|A|^|G_i| * |G_i| = {size * quotient.order} exceeds the cap {cap}")
        self.alphabet = alphabet
        self.quotient = quotient
        self.group = quotient.group
        self.elements = self.group.elements()
        self.pos = {g: i for i, g in enumerate(self.elements)}
        self.configs = list(itertools.product(range(alphabet.size), repeat=len(self.elements)))
        self.index = {z: i for i, z in enumerate(self.configs)}
        p = alphabet.probs
        weights = tuple(math.prod(p[a] for a in z) for z in self.configs)
        perms = {}
        for g in self.elements:
            ginv = self.group.inv(g)
            src = [self.pos[self.group.mul(ginv, h)] for h in self.elements]
            perms[g] = tuple(self.index[tuple(z[s] for s in src)] for z in self.configs)
        self.action = FiniteAction(self.group, perms, weights)

    def pull(self, f: CylinderFunction) -> tuple[Fraction, ...]:
        """f o alpha as a function on A^{G_i}."""
        slots = [self.pos[self.quotient(s)] for s in f.support]
        return tuple(f.value([z[k] for k in slots]) for z in self.configs)


def pushforward_element(x: CrossedCylinder, shift: FiniteShift) -> CrossedElement:
    terms: dict = {}
    for g, f in x.terms.items():
        q = shift.quotient(g)
        v = shift.pull(f)
        terms[q] = tuple(a + b for a, b in zip(terms[q], v)) if q in terms else v
    return CrossedElement(shift.action, terms)


def pushforward(m: CrossedCylinder | CrossedCylinderMatrix, shift: FiniteShift) -> CrossedMatrix:
    """beta_i applied entrywise (exact)."""
    m = as_matrix(m)
    return CrossedMatrix(shift.action, [[pushforward_element(x, shift) for x in r] for r in m.entries])


def pushforward_morphism(m, shift: FiniteShift) -> VNMorphism:
    return crossed_regular_rep(pushforward(m, shift))


def homomorphism_check(a, b, shift: FiniteShift) -> bool:
    """beta(a b) == beta(a) beta(b) and beta(a*) == beta(a)* exactly."""
    a, b = as_matrix(a), as_matrix(b)
    ok = pushforward(a @ b, shift) == pushforward(a, shift) @ pushforward(b, shift)
    ok &= pushforward(a.star(), shift) == pushforward(a, shift).star()
    return bool(ok)


# ---------------------------------------------------------------------------
# traces along quotients


def pulled_integral(f: CylinderFunction, quotient: Quotient) -> Fraction:
    """Integral of f o alpha over A^{G_i}, exact, without enumerating A^{G_i}."""
    images = [quotient(s) for s in f.support]
    distinct = list(dict.fromkeys(images))
    slot = [distinct.index(q) for q in images]
    p = f.alphabet.probs
    total = Fraction(0)
    for w in itertools.product(range(f.alphabet.size), repeat=len(distinct)):
        v = f.value([w[k] for k in slot])
        if v:
            total += v * math.prod(p[a] for a in w)
    return total


@dataclass
class TraceCheck:
    lhs: Fraction
    rhs: Fraction
    injective: bool

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs


def trace_injectivity_check(f: CylinderFunction, quotient: Quotient) -> TraceCheck:
    """Compare the integral of f o alpha over A^{G_i} with that of f over A^G."""
    lhs = pulled_integral(f, quotient)
    rhs = f.integral()
    inj = quotient.injective_on(f.minimal_support())
    if inj and lhs != rhs:
        raise AssertionError(f"integrals differ although the quotient is injective: {lhs} vs {rhs}")
    return TraceCheck(lhs, rhs, inj)


def pushed_trace(m: CrossedCylinderMatrix, quotient: Quotient) -> Fraction:
    """Trace of beta(m) in the finite crossed product, by exact integration."""
    total = Fraction(0)
    zero = (0,) * len(quotient.moduli)
    for i in range(m.rows):
        for g, f in m.entries[i][i].terms.items():
            if quotient(g) == zero:
                total += pulled_integral(f, quotient)
    return total


def stabilization_threshold(m: CrossedCylinderMatrix) -> int:
    """Smallest n such that reduction mod n is injective on every coordinate
    support and the diagonal group supports only meet 0 mod n at 0."""
    best = 0
    for r in m.entries:
        for x in r:
            for g, f in x.terms.items():
                pts = list(f.minimal_support()) + [g, (0,) * len(g)]
                for a in pts:
                    for b in pts:
                        best = max(best, max((abs(u - v) for u, v in zip(a, b)), default=0))
    return best + 1


@dataclass
class StabilizationReport:
    exact: list[Fraction]
    thresholds: list[int]
    traces: dict  # n -> list of pushed traces per moment
    stable: bool


def trace_stabilization(m: CrossedCylinder | CrossedCylinderMatrix, ns: Sequence[int], M: int = 4,
                        use_models_up_to: int = 0) -> StabilizationReport:
    """Moments tr((m m*)^k) against their pushforwards for the chain Z^k -> (Z/n)^k.

    Past the injectivity threshold of (m m*)^k the pushed trace equals the
    exact one.  For quotients small enough (``n <= use_models_up_to``) the
    pushed trace is also computed in the finite crossed product itself.
    """
    m = as_matrix(m)
    delta = m.gram()
    powers = []
    cur = delta
    for _ in range(M):
        powers.append(cur)
        cur = cur @ delta
    exact = [P.trace() for P in powers]
    thresholds = [stabilization_threshold(P) for P in powers]
    traces = {}
    stable = True
    for n in ns:
        q = Quotient((n,) * m.rank)
        vals = [pushed_trace(P, q) for P in powers]
        if n <= use_models_up_to:
            fin = pushforward(delta, FiniteShift(m.alphabet, q))
            cur = fin
            for k in range(M):
                if cur.trace() != vals[k]:
                    raise AssertionError("pushed trace disagrees with the finite crossed product")
                cur = cur @ fin
        traces[n] = vals
        for k in range(M):
            if n >= thresholds[k] and vals[k] != exact[k]:
                stable = False
    return StabilizationReport(exact, thresholds, traces, stable)


# ---------------------------------------------------------------------------
# step-function approximation


@dataclass
class StepReport:
    deviations: list[Fraction]
    sup_norms: list[Fraction]


def step_approximate(f: CylinderFunction, sequence: Sequence[CylinderFunction], linf_bound,
                     declared_l1: Sequence | None = None) -> StepReport:
    """Validate ||f_n||_inf <= bound and compute exact ||f - f_n||_1.

    If ``declared_l1`` is given each exact deviation must not exceed it.
    """
    bound = Fraction(linf_bound)
    if f.sup_norm() > bound:
        raise ApproximationBoundError("target exceeds the declared sup bound")
    devs, sups = [], []
    for i, fn in enumerate(sequence):
        s = fn.sup_norm()
        if s > bound:
            raise ApproximationBoundError(f"approximation {i} has sup norm {s} > {bound}")
        d = (f - fn).l1()
        if declared_l1 is not None and d > Fraction(declared_l1[i]):
            raise ApproximationBoundError(f"approximation {i} deviates by {d} > {declared_l1[i]}")
        devs.append(d)
        sups.append(s)
    return StepReport(devs, sups)


def conditional_average(f: CylinderFunction, keep: Sequence[Point]) -> CylinderFunction:
    """E[f | coordinates in keep], exact."""
    keep = tuple(tuple(k) for k in keep)
    rest = [s for s in f.support if s not in keep]
    full = keep + tuple(rest)
    g = f.extend(full)
    p = f.alphabet.probs
    k = f.alphabet.size
    tails = list(itertools.product(range(k), repeat=len(rest)))

    def val(w):
        return sum((g.value(tuple(w) + t) * math.prod(p[a] for a in t) for t in tails), Fraction(0))

    return CylinderFunction(f.alphabet, keep, val)


def round_values(f: CylinderFunction) -> CylinderFunction:
    """Entrywise rounding to the nearest integer (ties to even)."""
    return CylinderFunction(f.alphabet, f.support, [round(x) for x in f.table])


# ---------------------------------------------------------------------------
# random integer crossed matrices (tests, harness)


def random_cylinder(rng: np.random.Generator, alphabet: Alphabet, rank: int, max_coords: int = 2,
                    spread: int = 1, coeff: int = 2) -> CylinderFunction:
    r = int(rng.integers(0, max_coords + 1))
    pool = list(itertools.product(range(-spread, spread + 1), repeat=rank))
    idx = rng.choice(len(pool), size=r, replace=False) if r else []
    sup = [pool[i] for i in idx]
    vals = rng.integers(-coeff, coeff + 1, size=alphabet.size ** r).tolist()
    return CylinderFunction(alphabet, sup, vals)


def random_crossed(rng: np.random.Generator, alphabet: Alphabet, rank: int, terms: int = 2,
                   spread: int = 1, coeff: int = 2) -> CrossedCylinder:
    out = {}
    for _ in range(terms):
        g = tuple(int(x) for x in rng.integers(-spread, spread + 1, size=rank))
        out[g] = random_cylinder(rng, alphabet, rank, spread=spread, coeff=coeff)
    return CrossedCylinder(alphabet, rank, out)


def random_crossed_matrix(rng: np.random.Generator, alphabet: Alphabet, rank: int, rows: int, cols: int,
                          **kw) -> CrossedCylinderMatrix:
    return CrossedCylinderMatrix(alphabet, rank, [[random_crossed(rng, alphabet, rank, **kw)
                                                   for _ in range(cols)] for _ in range(rows)])
