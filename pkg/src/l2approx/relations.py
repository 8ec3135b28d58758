"""Finite measured equivalence relations and their groupoid rings.

Points are ``0..N-1`` with rational weights summing to 1.  A groupoid matrix
assigns an ``m x n`` block of rationals to pairs ``(x, y)`` in the same class;
multiplication is convolution over the middle point, the involution is
``f*(x, y) = f(y, x)^*`` and ``tr f = sum_x mu(x) tr f(x, x)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .finvn import FiniteVNModel, VNMorphism
from .grouprings import GroupSpec


class RelationError(ValueError):
    pass


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class FiniteRelation:
    weights: tuple[Fraction, ...]
    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        w = tuple(_frac(x) for x in self.weights)
        cl = tuple(tuple(sorted(c)) for c in self.classes)
        cl = tuple(sorted(cl))
        n = len(w)
        if any(x <= 0 for x in w):
            raise RelationError("weights must be positive")
        if sum(w) != 1:
            raise RelationError(f"weights sum to {sum(w)}, not 1")
        seen = sorted(x for c in cl for x in c)
        if seen != list(range(n)):
            raise RelationError("classes must partition the points")
        for c in cl:
            if len({w[x] for x in c}) != 1:
                raise RelationError(f"non-uniform weights in class {c}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "classes", cl)

    @property
    def size(self) -> int:
        return len(self.weights)

    def class_of(self) -> list[int]:
        out = [0] * self.size
        for ci, c in enumerate(self.classes):
            for x in c:
                out[x] = ci
        return out

    def related(self, x: int, y: int) -> bool:
        cof = self.class_of()
        return cof[x] == cof[y]

    def measure(self, subset: Iterable[int]) -> Fraction:
        return sum((self.weights[x] for x in set(subset)), Fraction(0))

    def to_json(self) -> dict:
        return {"weights": [[w.numerator, w.denominator] for w in self.weights],
                "classes": [list(c) for c in self.classes]}

    @classmethod
    def from_json(cls, doc) -> "FiniteRelation":
        return cls(tuple(Fraction(int(a), int(b)) for a, b in doc["weights"]),
                   tuple(tuple(c) for c in doc["classes"]))


def uniform_relation(classes: Sequence[Sequence[int]]) -> FiniteRelation:
    n = sum(len(c) for c in classes)
    return FiniteRelation((Fraction(1, n),) * n, tuple(tuple(c) for c in classes))


# ---------------------------------------------------------------------------
# finite actions


@dataclass(frozen=True)
class FiniteAction:
    """Action of a finite group on points; ``perms[g][x]`` is ``g.x``."""

    group: GroupSpec
    perms: Mapping
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        g = self.group
        if not g.is_finite:
            raise RelationError("acting group must be finite")
        perms = {e: tuple(self.perms[e]) for e in g.elements()}
        n = len(self.weights)
        for e, p in perms.items():
            if sorted(p) != list(range(n)):
                raise RelationError(f"action of {e} is not a permutation")
        if perms[g.identity] != tuple(range(n)):
            raise RelationError("identity does not act trivially")
        for a in g.elements():
            for b in g.elements():
                ab = perms[g.mul(a, b)]
                if any(ab[x] != perms[a][perms[b][x]] for x in range(n)):
                    raise RelationError("action is not a homomorphism")
        w = tuple(_frac(x) for x in self.weights)
        for p in perms.values():
            if any(w[p[x]] != w[x] for x in range(n)):
                raise RelationError("weights are not invariant under the action")
        object.__setattr__(self, "perms", perms)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return len(self.weights)

    def act(self, g, x: int) -> int:
        return self.perms[g][x]

    def is_free(self) -> bool:
        e = self.group.identity
        return all(p[x] != x for g, p in self.perms.items() if g != e for x in range(self.size))

    def orbits(self) -> list[tuple[int, ...]]:
        seen: set = set()
        out = []
        for x in range(self.size):
            if x in seen:
                continue
            orb = tuple(sorted({p[x] for p in self.perms.values()}))
            seen.update(orb)
            out.append(orb)
        return out


def orbit_relation(action: FiniteAction) -> FiniteRelation:
    return FiniteRelation(action.weights, tuple(action.orbits()))


# ---------------------------------------------------------------------------
# groupoid matrices


def _block(rows, m, n) -> tuple:
    arr = tuple(tuple(_frac(v) for v in r) for r in rows)
    if len(arr) != m or any(len(r) != n for r in arr):
        raise RelationError("block has the wrong shape")
    return arr


def _is_zero(b) -> bool:
    return all(v == 0 for r in b for v in r)


def _bmul(a, b):
    n = len(b[0]) if b else 0
    return tuple(tuple(sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0))
                       for j in range(n)) for i in range(len(a)))


def _badd(a, b):
    return tuple(tuple(x + y for x, y in zip(r, s)) for r, s in zip(a, b))


def _bstar(a):
    return tuple(tuple(_conj(a[i][j]) for i in range(len(a))) for j in range(len(a[0]) if a else 0))


def _conj(v):
    return v.conjugate() if hasattr(v, "conjugate") and not isinstance(v, Fraction) else v


class GroupoidMatrix:
    """Sparse m x n matrix over the groupoid ring of a finite relation."""

    __slots__ = ("relation", "rows", "cols", "entries")

    def __init__(self, relation: FiniteRelation, rows: int, cols: int, entries: Mapping | None = None):
        cof = relation.class_of()
        clean = {}
        for (x, y), blk in (entries or {}).items():
            if not (0 <= x < relation.size and 0 <= y < relation.size):
                raise RelationError(f"point out of range in {(x, y)}")
            if cof[x] != cof[y]:
                raise RelationError(f"{x} and {y} are not related")
            blk = _block(blk, rows, cols)
            if (x, y) in clean:
                blk = _badd(clean[(x, y)], blk)
            if _is_zero(blk):
                clean.pop((x, y), None)
            else:
                clean[(x, y)] = blk
        self.relation = relation
        self.rows = rows
        self.cols = cols
        self.entries = clean

    @classmethod
    def identity(cls, relation: FiniteRelation, n: int = 1) -> "GroupoidMatrix":
        one = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
        return cls(relation, n, n, {(x, x): one for x in range(relation.size)})

    @classmethod
    def indicator(cls, relation: FiniteRelation, subset: Iterable[int]) -> "GroupoidMatrix":
        return cls(relation, 1, 1, {(x, x): ((1,),) for x in set(subset)})

    @classmethod
    def scalar_kernel(cls, relation: FiniteRelation, values: Mapping) -> "GroupoidMatrix":
        """1 x 1 matrix from a dict ``(x, y) -> number``."""
        return cls(relation, 1, 1, {k: ((v,),) for k, v in values.items()})

    def __repr__(self):
        return f"GroupoidMatrix({self.rows}x{self.cols}, {len(self.entries)} entries)"

    def __eq__(self, other):
        if not isinstance(other, GroupoidMatrix):
            return NotImplemented
        return (self.relation == other.relation and (self.rows, self.cols) == (other.rows, other.cols)
                and self.entries == other.entries)

    def _check(self, other):
        if other.relation != self.relation:
            raise RelationError("matrices over different relations")

    def __matmul__(self, other: "GroupoidMatrix") -> "GroupoidMatrix":
        self._check(other)
        if self.cols != other.rows:
            raise RelationError("shape mismatch")
        by_row: dict = {}
        for (z, y), b in other.entries.items():
            by_row.setdefault(z, []).append((y, b))
        out: dict = {}
        for (x, z), a in self.entries.items():
            for y, b in by_row.get(z, ()):
                p = _bmul(a, b)
                out[(x, y)] = _badd(out[(x, y)], p) if (x, y) in out else p
        return GroupoidMatrix(self.relation, self.rows, other.cols, out)

    def __add__(self, other: "GroupoidMatrix") -> "GroupoidMatrix":
        self._check(other)
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise RelationError("shape mismatch")
        out = dict(self.entries)
        for k, b in other.entries.items():
            out[k] = _badd(out[k], b) if k in out else b
        return GroupoidMatrix(self.relation, self.rows, self.cols, out)

    def scale(self, c) -> "GroupoidMatrix":
        c = _frac(c)
        return GroupoidMatrix(self.relation, self.rows, self.cols,
                              {k: tuple(tuple(c * v for v in r) for r in b) for k, b in self.entries.items()})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def star(self) -> "GroupoidMatrix":
        return GroupoidMatrix(self.relation, self.cols, self.rows,
                              {(y, x): _bstar(b) for (x, y), b in self.entries.items()})

    def power(self, m: int) -> "GroupoidMatrix":
        out = GroupoidMatrix.identity(self.relation, self.rows)
        for _ in range(m):
            out = out @ self
        return out

    def trace(self) -> Fraction:
        if self.rows != self.cols:
            raise RelationError("trace of a non-square matrix")
        w = self.relation.weights
        total = Fraction(0)
        for (x, y), b in self.entries.items():
            if x == y:
                total += w[x] * sum((b[i][i] for i in range(self.rows)), Fraction(0))
        return total

    def compress(self, subset: Iterable[int]) -> "GroupoidMatrix":
        """chi_A f chi_A over the same relation."""
        s = set(subset)
        return GroupoidMatrix(self.relation, self.rows, self.cols,
                              {(x, y): b for (x, y), b in self.entries.items() if x in s and y in s})

    def is_integral(self) -> bool:
        return all(v.denominator == 1 for b in self.entries.values() for r in b for v in r)

    def to_json(self) -> dict:
        return {"relation": self.relation.to_json(), "rows": self.rows, "cols": self.cols,
                "entries": [[x, y, [[[v.numerator, v.denominator] for v in r] for r in b]]
                            for (x, y), b in sorted(self.entries.items())]}

    @classmethod
    def from_json(cls, doc) -> "GroupoidMatrix":
        rel = FiniteRelation.from_json(doc["relation"])
        ent = {}
        for x, y, blk in doc["entries"]:
            ent[(int(x), int(y))] = [[Fraction(int(a), int(b)) for a, b in r] for r in blk]
        return cls(rel, int(doc["rows"]), int(doc["cols"]), ent)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def to_vn_model(f: GroupoidMatrix) -> VNMorphism:
    """Finite von Neumann model: one cell per class, weight = point weight.

    The class block is the transpose of the kernel matrix ``K[(i,x),(j,y)] =
    f(x,y)_ij`` so that ``x -> x f`` acts on column vectors.
    """
    rel = f.relation
    cells = tuple((rel.weights[c[0]], len(c)) for c in rel.classes)
    model = FiniteVNModel(cells)
    blocks = []
    for c in rel.classes:
        pos = {x: k for k, x in enumerate(c)}
        s = len(c)
        kern = np.zeros((f.rows * s, f.cols * s))
        for x in c:
            for y in c:
                b = f.entries.get((x, y))
                if b is None:
                    continue
                for i in range(f.rows):
                    for j in range(f.cols):
                        kern[i * s + pos[x], j * s + pos[y]] = float(b[i][j])
        blocks.append(kern.T)
    return VNMorphism(model, f.rows, f.cols, blocks)


# ---------------------------------------------------------------------------
# crossed products of finite actions


class CrossedElement:
    """sum_g r_g g with r_g a rational function on the points."""

    __slots__ = ("action", "terms")

    def __init__(self, action: FiniteAction, terms: Mapping | None = None):
        n = action.size
        clean = {}
        for g, r in (terms or {}).items():
            g = action.group.normalize(g)
            r = tuple(_frac(v) for v in r)
            if len(r) != n:
                raise RelationError("coefficient function has the wrong length")
            if g in clean:
                r = tuple(a + b for a, b in zip(clean[g], r))
            if any(r):
                clean[g] = r
            else:
                clean.pop(g, None)
        self.action = action
        self.terms = clean

    @classmethod
    def scalar(cls, action: FiniteAction, c=1) -> "CrossedElement":
        return cls(action, {action.group.identity: (c,) * action.size})

    def __eq__(self, other):
        return isinstance(other, CrossedElement) and self.terms == other.terms

    def __repr__(self):
        return f"CrossedElement({self.terms})"

    def __add__(self, other: "CrossedElement") -> "CrossedElement":
        out = dict(self.terms)
        for g, r in other.terms.items():
            out[g] = tuple(a + b for a, b in zip(out[g], r)) if g in out else r
        return CrossedElement(self.action, out)

    def __neg__(self):
        return CrossedElement(self.action, {g: tuple(-v for v in r) for g, r in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "CrossedElement") -> "CrossedElement":
        act, grp = self.action, self.action.group
        n = act.size
        out: dict = {}
        for g, r in self.terms.items():
            ginv = grp.inv(g)
            for h, s in other.terms.items():
                # r * (s o m_{g^-1}) at gh
                v = tuple(r[x] * s[act.act(ginv, x)] for x in range(n))
                gh = grp.mul(g, h)
                out[gh] = tuple(a + b for a, b in zip(out[gh], v)) if gh in out else v
        return CrossedElement(act, out)

    def scale(self, c) -> "CrossedElement":
        c = _frac(c)
        return CrossedElement(self.action, {g: tuple(c * v for v in r) for g, r in self.terms.items()})

    def star(self) -> "CrossedElement":
        act, grp = self.action, self.action.group
        return CrossedElement(act, {grp.inv(g): tuple(_conj(r[act.act(g, x)]) for x in range(act.size))
                                    for g, r in self.terms.items()})

    def trace(self) -> Fraction:
        r = self.terms.get(self.action.group.identity)
        if r is None:
            return Fraction(0)
        return sum((w * v for w, v in zip(self.action.weights, r)), Fraction(0))


class CrossedMatrix:
    __slots__ = ("action", "rows", "cols", "entries")

    def __init__(self, action: FiniteAction, entries: Sequence[Sequence[CrossedElement]]):
        self.action = action
        self.rows = len(entries)
        self.cols = len(entries[0]) if entries else 0
        self.entries = tuple(tuple(e for e in r) for r in entries)

    @classmethod
    def identity(cls, action, n):
        z = CrossedElement(action)
        one = CrossedElement.scalar(action)
        return cls(action, [[one if i == j else z for j in range(n)] for i in range(n)])

    def __matmul__(self, other: "CrossedMatrix") -> "CrossedMatrix":
        if self.cols != other.rows:
            raise RelationError("shape mismatch")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = CrossedElement(self.action)
                for k in range(self.cols):
                    acc = acc + self.entries[i][k] * other.entries[k][j]
                row.append(acc)
            out.append(row)
        return CrossedMatrix(self.action, out)

    def __add__(self, other):
        return CrossedMatrix(self.action, [[a + b for a, b in zip(r, s)]
                                           for r, s in zip(self.entries, other.entries)])

    def __eq__(self, other):
        return isinstance(other, CrossedMatrix) and self.entries == other.entries

    def star(self) -> "CrossedMatrix":
        return CrossedMatrix(self.action, [[self.entries[i][j].star() for i in range(self.rows)]
                                           for j in range(self.cols)])

    def trace(self) -> Fraction:
        return sum((self.entries[i][i].trace() for i in range(self.rows)), Fraction(0))

    def power(self, m):
        out = CrossedMatrix.identity(self.action, self.rows)
        for _ in range(m):
            out = out @ self
        return out


def embed_crossed(a: CrossedElement | CrossedMatrix) -> GroupoidMatrix:
    """sum r_g g -> f with f(x, g^-1 x) = r_g(x), for free actions."""
    act = a.action
    if not act.is_free():
        raise RelationError("action is not free; the crossed product does not embed")
    rel = orbit_relation(act)
    mat = a if isinstance(a, CrossedMatrix) else CrossedMatrix(act, [[a]])
    ent: dict = {}
    for i, row in enumerate(mat.entries):
        for j, el in enumerate(row):
            for g, r in el.terms.items():
                ginv = act.group.inv(g)
                for x in range(act.size):
                    if r[x] == 0:
                        continue
                    key = (x, act.act(ginv, x))
                    blk = ent.setdefault(key, [[Fraction(0)] * mat.cols for _ in range(mat.rows)])
                    blk[i][j] += r[x]
    return GroupoidMatrix(rel, mat.rows, mat.cols, ent)


def crossed_regular_rep(a: CrossedElement | CrossedMatrix) -> VNMorphism:
    """GNS representation of the crossed product (any finite action).

    Cells are indexed by points y with weight mu(y)/|G| and dimension |G|;
    ``pi_y(r g) e_h = r(g h y) e_{gh}``.
    """
    act = a.action
    grp = act.group
    mat = a if isinstance(a, CrossedMatrix) else CrossedMatrix(act, [[a]])
    elems = grp.elements()
    gi = {g: i for i, g in enumerate(elems)}
    n = len(elems)
    order = Fraction(1, n)
    model = FiniteVNModel(tuple((w * order, n) for w in act.weights))
    blocks = []
    for y in range(act.size):
        hy = [act.act(h, y) for h in elems]
        kern = np.zeros((mat.rows * n, mat.cols * n))
        for i, row in enumerate(mat.entries):
            for j, el in enumerate(row):
                for g, r in el.terms.items():
                    for hi, h in enumerate(elems):
                        gh = grp.mul(g, h)
                        val = r[act.act(g, hy[hi])]
                        if val:
                            kern[i * n + gi[gh], j * n + hi] += float(val)
        blocks.append(kern.T)
    return VNMorphism(model, mat.rows, mat.cols, blocks)


# ---------------------------------------------------------------------------
# restriction, fullness, transport


@dataclass
class RestrictedMatrix:
    matrix: GroupoidMatrix
    points: tuple[int, ...]  # old point for each new index
    measure: Fraction


def restrict_relation_only(rel: FiniteRelation, subset: Iterable[int]) -> tuple[FiniteRelation, tuple, Fraction]:
    pts = tuple(sorted(set(subset)))
    if not pts:
        raise RelationError("cannot restrict to the empty set")
    mu = rel.measure(pts)
    new = {x: i for i, x in enumerate(pts)}
    classes = []
    for c in rel.classes:
        inter = [new[x] for x in c if x in new]
        if inter:
            classes.append(tuple(inter))
    return FiniteRelation(tuple(rel.weights[x] / mu for x in pts), tuple(classes)), pts, mu


def restrict_relation(f: GroupoidMatrix, subset: Iterable[int]) -> RestrictedMatrix:
    """chi_A f chi_A as a matrix over the restricted relation (weights mu/mu(A))."""
    rel, pts, mu = restrict_relation_only(f.relation, subset)
    new = {x: i for i, x in enumerate(pts)}
    ent = {(new[x], new[y]): b for (x, y), b in f.entries.items() if x in new and y in new}
    return RestrictedMatrix(GroupoidMatrix(rel, f.rows, f.cols, ent), pts, mu)


@dataclass
class FullnessCertificate:
    full: bool
    maps: list[GroupoidMatrix]
    missed_classes: list[int]

    def reconstruct(self, relation: FiniteRelation, subset) -> GroupoidMatrix:
        chi = GroupoidMatrix.indicator(relation, subset)
        total = GroupoidMatrix(relation, 1, 1)
        for phi in self.maps:
            total = total + phi.star() @ chi @ phi
        return total

    def verify(self, relation: FiniteRelation, subset) -> bool:
        return self.full and self.reconstruct(relation, subset) == GroupoidMatrix.identity(relation)


def is_full(subset: Iterable[int], relation: FiniteRelation) -> FullnessCertificate:
    """Decide whether chi_A is full and, if so, produce partial bijections phi_i
    inside classes with sum phi_i* chi_A phi_i = 1.

    The j-th point of a class goes, in map number j // r, to the (j mod r)-th
    point of A in that class (r = |A meets class|).
    """
    a = set(subset)
    missed = [ci for ci, c in enumerate(relation.classes) if not a.intersection(c)]
    if missed:
        return FullnessCertificate(False, [], missed)
    chunks: dict = {}
    for c in relation.classes:
        targets = [x for x in c if x in a]
        r = len(targets)
        for j, x in enumerate(c):
            chunks.setdefault(j // r, {})[(targets[j % r], x)] = 1
    maps = [GroupoidMatrix.scalar_kernel(relation, chunks[i]) for i in sorted(chunks)]
    return FullnessCertificate(True, maps, [])


def check_isomorphism(src: FiniteRelation, dst: FiniteRelation, iso: Mapping[int, int]):
    if sorted(iso) != list(range(src.size)) or sorted(iso.values()) != list(range(dst.size)):
        raise RelationError("iso must be a bijection between the point sets")
    dst_classes = {frozenset(c) for c in dst.classes}
    for c in src.classes:
        if frozenset(iso[x] for x in c) not in dst_classes:
            raise RelationError(f"class {c} is not mapped onto a class")
    for x in range(src.size):
        if src.weights[x] != dst.weights[iso[x]]:
            raise RelationError(f"weight mismatch at point {x}")


def transport(f: GroupoidMatrix, target: FiniteRelation, iso: Mapping[int, int]) -> GroupoidMatrix:
    """Push f along a class- and weight-preserving bijection of point sets."""
    check_isomorphism(f.relation, target, iso)
    return GroupoidMatrix(target, f.rows, f.cols, {(iso[x], iso[y]): b for (x, y), b in f.entries.items()})


# ---------------------------------------------------------------------------
# random generation (tests, harness)


def random_relation(rng: np.random.Generator, max_classes: int = 4, max_size: int = 4) -> FiniteRelation:
    ncls = int(rng.integers(1, max_classes + 1))
    sizes = [int(rng.integers(1, max_size + 1)) for _ in range(ncls)]
    raw = [int(rng.integers(1, 5)) for _ in range(ncls)]
    total = sum(r * s for r, s in zip(raw, sizes))
    perm = rng.permutation(sum(sizes)).tolist()
    weights = [Fraction(0)] * sum(sizes)
    classes = []
    pos = 0
    for r, s in zip(raw, sizes):
        pts = perm[pos:pos + s]
        pos += s
        for x in pts:
            weights[x] = Fraction(r, total)
        classes.append(tuple(pts))
    return FiniteRelation(tuple(weights), tuple(classes))


def random_groupoid_matrix(rng: np.random.Generator, rel: FiniteRelation, m: int, n: int,
                           density: float = 0.6, coeff: int = 3, subset=None) -> GroupoidMatrix:
    pts = set(range(rel.size)) if subset is None else set(subset)
    ent = {}
    for c in rel.classes:
        for x in c:
            for y in c:
                if x in pts and y in pts and rng.random() < density:
                    ent[(x, y)] = rng.integers(-coeff, coeff + 1, size=(m, n)).tolist()
    return GroupoidMatrix(rel, m, n, ent)


def random_full_subset(rng: np.random.Generator, rel: FiniteRelation) -> list[int]:
    out = []
    for c in rel.classes:
        k = int(rng.integers(1, len(c) + 1))
        out.extend(rng.choice(c, size=k, replace=False).tolist())
    return sorted(out)
