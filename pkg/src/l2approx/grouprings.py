"""Exact group-ring arithmetic over finite groups and free abelian groups.

Two group shapes are supported:

* ``table`` groups: finite groups given by a multiplication table on ids
  ``0..n-1``.
* ``abelian`` groups: products of cyclic factors, elements are integer
  tuples.  A modulus of 0 stands for a copy of Z, so ``free_abelian(k)`` is
  Z^k and ``cyclic(n)`` is Z/n.

Coefficients are kept as :class:`fractions.Fraction` (any exact number with a
``conjugate`` method also works); floats only appear once a matrix is
represented on a finite-dimensional Hilbert space.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Hashable, Iterable, Iterator, Mapping, Sequence

import numpy as np
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix


class ShapeError(ValueError):
    pass


class GroupMismatchError(ValueError):
    pass


class GroupError(ValueError):
    pass


Element = Hashable


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    table: tuple[tuple[int, ...], ...] | None = None
    inverse: tuple[int, ...] | None = None
    identity_id: int = 0
    moduli: tuple[int, ...] | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind == "table":
            _validate_table(self.table, self.inverse, self.identity_id)
        elif self.kind == "abelian":
            if not self.moduli or any(m < 0 for m in self.moduli):
                raise GroupError(f"bad moduli {self.moduli!r}")
        else:
            raise GroupError(f"unknown group kind {self.kind!r}")

    # -- structure -------------------------------------------------------

    @property
    def rank(self) -> int:
        return len(self.moduli) if self.kind == "abelian" else 0

    @property
    def is_finite(self) -> bool:
        return self.kind == "table" or all(m > 0 for m in self.moduli)

    @property
    def is_abelian(self) -> bool:
        if self.kind == "abelian":
            return True
        t = self.table
        return all(t[a][b] == t[b][a] for a in range(len(t)) for b in range(a))

    @property
    def order(self) -> int | None:
        if not self.is_finite:
            return None
        if self.kind == "table":
            return len(self.table)
        return int(np.prod(self.moduli))

    @property
    def identity(self) -> Element:
        if self.kind == "table":
            return self.identity_id
        return (0,) * len(self.moduli)

    def mul(self, a: Element, b: Element) -> Element:
        if self.kind == "table":
            return self.table[a][b]
        return tuple(
            (x + y) % m if m else x + y for x, y, m in zip(a, b, self.moduli)
        )

    def inv(self, a: Element) -> Element:
        if self.kind == "table":
            return self.inverse[a]
        return tuple((-x) % m if m else -x for x, m in zip(a, self.moduli))

    def elements(self) -> list[Element]:
        if not self.is_finite:
            raise GroupError("infinite group has no element list")
        if self.kind == "table":
            return list(range(len(self.table)))
        return list(itertools.product(*(range(m) for m in self.moduli)))

    def contains(self, a: Any) -> bool:
        if self.kind == "table":
            return isinstance(a, (int, np.integer)) and 0 <= a < len(self.table)
        if not isinstance(a, tuple) or len(a) != len(self.moduli):
            return False
        return all(
            isinstance(x, (int, np.integer)) and (m == 0 or 0 <= x < m)
            for x, m in zip(a, self.moduli)
        )

    def normalize(self, a: Any) -> Element:
        """Coerce user input (list, numpy int) into the canonical element form."""
        if self.kind == "table":
            a = int(a)
        else:
            if isinstance(a, (int, np.integer)) and self.rank == 1:
                a = (a,)
            a = tuple(int(x) for x in a)
            a = tuple(x % m if m else x for x, m in zip(a, self.moduli))
        if not self.contains(a):
            raise GroupError(f"{a!r} is not an element of {self.describe()}")
        return a

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.kind == "table":
            return f"finite group of order {len(self.table)}"
        return " x ".join("Z" if m == 0 else f"Z/{m}" for m in self.moduli)

    def to_json(self) -> dict:
        if self.kind == "table":
            return {"type": "finite", "data": {"table": [list(r) for r in self.table],
                                                 "identity": self.identity_id}}
        if all(m == 0 for m in self.moduli):
            return {"type": "free_abelian", "data": {"rank": len(self.moduli)}}
        return {"type": "abelian", "data": {"moduli": list(self.moduli)}}

    @classmethod
    def from_json(cls, doc: Mapping) -> "GroupSpec":
        kind, data = doc["type"], doc.get("data", {})
        if kind == "finite":
            return table_group(data["table"], identity=data.get("identity", 0))
        if kind == "free_abelian":
            return free_abelian(int(data["rank"]))
        if kind == "abelian":
            return abelian(data["moduli"])
        if kind == "cyclic":
            return cyclic(int(data["n"]))
        raise GroupError(f"unknown group type {kind!r}")


def _validate_table(table, inverse, e):
    if table is None or inverse is None:
        raise GroupError("table group needs table and inverse")
    n = len(table)
    if n == 0 or any(len(row) != n for row in table):
        raise GroupError("multiplication table must be square and non-empty")
    if any(not 0 <= x < n for row in table for x in row):
        raise GroupError("table entry out of range")
    if not 0 <= e < n:
        raise GroupError("identity out of range")
    if any(table[e][a] != a or table[a][e] != a for a in range(n)):
        raise GroupError("identity row/column mismatch")
    if len(inverse) != n or any(table[a][inverse[a]] != e or table[inverse[a]][a] != e
                                for a in range(n)):
        raise GroupError("inverse table inconsistent")
    if n <= 32:
        triples = itertools.product(range(n), repeat=3)
    else:
        rng = np.random.default_rng(0)
        triples = rng.integers(0, n, size=(20000, 3)).tolist()
    for a, b, c in triples:
        if table[table[a][b]][c] != table[a][table[b][c]]:
            raise GroupError(f"table is not associative at {(a, b, c)}")


def table_group(table: Sequence[Sequence[int]], identity: int = 0, name: str = "") -> GroupSpec:
    table = tuple(tuple(int(x) for x in row) for row in table)
    n = len(table)
    inverse = []
    for a in range(n):
        inv = [b for b in range(n) if table[a][b] == identity]
        if len(inv) != 1:
            raise GroupError(f"element {a} has no unique inverse")
        inverse.append(inv[0])
    return GroupSpec("table", table=table, inverse=tuple(inverse),
                     identity_id=identity, name=name)


def abelian(moduli: Iterable[int]) -> GroupSpec:
    moduli = tuple(int(m) for m in moduli)
    return GroupSpec("abelian", moduli=moduli)


def free_abelian(k: int) -> GroupSpec:
    return abelian((0,) * k)


def cyclic(n: int) -> GroupSpec:
    return abelian((n,))


def trivial_group() -> GroupSpec:
    return table_group([[0]], name="1")


def from_permutations(perms: Sequence[Sequence[int]], name: str = "") -> GroupSpec:
    """Table group generated by the given permutations (closure computed)."""
    degree = len(perms[0])
    ident = tuple(range(degree))
    elems = [ident]
    seen = {ident}
    frontier = [ident]
    gens = [tuple(p) for p in perms]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens:
                y = tuple(g[x[i]] for i in range(degree))
                if y not in seen:
                    seen.add(y)
                    elems.append(y)
                    nxt.append(y)
        frontier = nxt
    index = {p: i for i, p in enumerate(elems)}
    # (a*b)(i) = a(b(i))
    table = [[index[tuple(a[b[i]] for i in range(degree))] for b in elems] for a in elems]
    return table_group(table, identity=0, name=name)


def dihedral(n: int) -> GroupSpec:
    """Dihedral group of order 2n acting on an n-gon."""
    rot = [(i + 1) % n for i in range(n)]
    ref = [(-i) % n for i in range(n)]
    return from_permutations([rot, ref], name=f"D{n}")


def symmetric(n: int) -> GroupSpec:
    gens = [[1, 0] + list(range(2, n)), list(range(1, n)) + [0]]
    return from_permutations(gens, name=f"S{n}")


def alternating4() -> GroupSpec:
    return from_permutations([[1, 2, 0, 3], [1, 0, 3, 2]], name="A4")


def quaternion() -> GroupSpec:
    # Q8 as permutations of its own elements under left multiplication
    # elements: 1,-1,i,-i,j,-j,k,-k encoded 0..7
    mult = {("1", x): x for x in "1ijk"}
    mult.update({(x, "1"): x for x in "1ijk"})
    mult.update({("i", "i"): "-1", ("j", "j"): "-1", ("k", "k"): "-1",
                 ("i", "j"): "k", ("j", "k"): "i", ("k", "i"): "j",
                 ("j", "i"): "-k", ("k", "j"): "-i", ("i", "k"): "-j"})
    names = ["1", "-1", "i", "-i", "j", "-j", "k", "-k"]

    def times(a, b):
        sa, ua = (a[0] == "-"), a.lstrip("-")
        sb, ub = (b[0] == "-"), b.lstrip("-")
        r = mult[(ua, ub)]
        sr, ur = (r[0] == "-"), r.lstrip("-")
        neg = sa ^ sb ^ sr
        return ("-" if neg else "") + ur

    table = [[names.index(times(a, b)) for b in names] for a in names]
    return table_group(table, identity=0, name="Q8")


def direct_product(g: GroupSpec, h: GroupSpec) -> GroupSpec:
    ge, he = g.elements(), h.elements()
    pairs = [(a, b) for a in ge for b in he]
    index = {p: i for i, p in enumerate(pairs)}
    table = [[index[(g.mul(a1, a2), h.mul(b1, b2))] for (a2, b2) in pairs]
             for (a1, b1) in pairs]
    return table_group(table, identity=index[(g.identity, h.identity)],
                       name=f"{g.describe()} x {h.describe()}")


def as_table(g: GroupSpec) -> tuple[GroupSpec, dict]:
    """Table version of a finite group plus the element -> id map."""
    if g.kind == "table":
        return g, {a: a for a in g.elements()}
    elems = g.elements()
    index = {a: i for i, a in enumerate(elems)}
    table = [[index[g.mul(a, b)] for b in elems] for a in elems]
    return table_group(table, identity=index[g.identity], name=g.describe()), index


def generated_subgroup(g: GroupSpec, gens: Iterable[Element]) -> frozenset:
    sub = {g.identity}
    frontier = [g.identity]
    gens = list(gens)
    while frontier:
        nxt = []
        for x in frontier:
            for s in gens:
                y = g.mul(x, s)
                if y not in sub:
                    sub.add(y)
                    nxt.append(y)
        frontier = nxt
    return frozenset(sub)


def is_normal(g: GroupSpec, k: Iterable[Element]) -> bool:
    k = set(k)
    if g.identity not in k or any(g.mul(a, b) not in k for a in k for b in k):
        return False
    return all(g.mul(g.mul(x, a), g.inv(x)) in k for x in g.elements() for a in k)


def normal_subgroups(g: GroupSpec) -> list[frozenset]:
    """All normal subgroups generated by at most two elements (enough for |G| <= 24 here)."""
    elems = g.elements()
    found = set()
    for a, b in itertools.combinations_with_replacement(elems, 2):
        sub = generated_subgroup(g, (a, b))
        if sub not in found and is_normal(g, sub):
            found.add(sub)
    return sorted(found, key=lambda s: (len(s), sorted(map(str, s))))


def quotient_group(g: GroupSpec, k: Iterable[Element]) -> tuple[GroupSpec, dict]:
    """G/K as a table group and the projection as a dict element -> coset id."""
    k = frozenset(k)
    if not is_normal(g, k):
        raise GroupError("subgroup is not normal")
    cosets: list[frozenset] = []
    proj: dict = {}
    for x in g.elements():
        if x in proj:
            continue
        c = frozenset(g.mul(x, a) for a in k)
        for y in c:
            proj[y] = len(cosets)
        cosets.append(c)
    reps = [min(c, key=str) for c in cosets]
    table = [[proj[g.mul(a, b)] for b in reps] for a in reps]
    return table_group(table, identity=proj[g.identity], name=f"{g.describe()}/K"), proj


# ---------------------------------------------------------------------------
# group ring elements and matrices


class GroupRingElement:
    """A finite formal sum sum_g c_g g.  Immutable by convention."""

    __slots__ = ("group", "terms")

    def __init__(self, group: GroupSpec, terms: Mapping[Element, Any] | None = None):
        clean = {}
        for g, c in (terms or {}).items():
            g = group.normalize(g)
            c = clean.get(g, 0) + _exact(c)
            if c == 0:
                clean.pop(g, None)
            else:
                clean[g] = c
        self.group = group
        self.terms = clean

    @classmethod
    def scalar(cls, group: GroupSpec, c) -> "GroupRingElement":
        return cls(group, {group.identity: c})

    @classmethod
    def basis(cls, group: GroupSpec, g) -> "GroupRingElement":
        return cls(group, {g: 1})

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{c}*{g}" for g, c in sorted(self.terms.items(), key=_key))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = GroupRingElement.scalar(self.group, other)
        if not isinstance(other, GroupRingElement):
            return NotImplemented
        return self.group == other.group and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def _check(self, other):
        if isinstance(other, GroupRingElement):
            if other.group != self.group:
                raise GroupMismatchError("elements live over different groups")
            return other
        return GroupRingElement.scalar(self.group, other)

    def __add__(self, other):
        other = self._check(other)
        out = dict(self.terms)
        for g, c in other.terms.items():
            out[g] = out.get(g, 0) + c
        return GroupRingElement(self.group, out)

    __radd__ = __add__

    def __neg__(self):
        return GroupRingElement(self.group, {g: -c for g, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        other = self._check(other)
        out: dict = {}
        mul = self.group.mul
        for g, c in self.terms.items():
            for h, d in other.terms.items():
                gh = mul(g, h)
                out[gh] = out.get(gh, 0) + c * d
        return GroupRingElement(self.group, out)

    def __rmul__(self, other):
        return self._check(other) * self

    def __pow__(self, n: int):
        out = GroupRingElement.scalar(self.group, 1)
        for _ in range(n):
            out = out * self
        return out

    def star(self) -> "GroupRingElement":
        inv = self.group.inv
        return GroupRingElement(self.group, {inv(g): _conj(c) for g, c in self.terms.items()})

    def coeff(self, g) -> Any:
        return self.terms.get(self.group.normalize(g), 0)

    @property
    def trace(self):
        """Coefficient of the identity, i.e. the von Neumann trace."""
        return self.terms.get(self.group.identity, Fraction(0))

    @property
    def support(self) -> frozenset:
        return frozenset(self.terms)

    def norm1(self) -> Fraction:
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def map_group(self, phi, target: GroupSpec) -> "GroupRingElement":
        out: dict = {}
        for g, c in self.terms.items():
            h = target.normalize(phi(g))
            out[h] = out.get(h, 0) + c
        return GroupRingElement(target, out)

    def is_integral(self) -> bool:
        return all(Fraction(c).denominator == 1 for c in self.terms.values())


def _exact(c):
    if isinstance(c, float):
        raise TypeError("floating coefficients are not allowed in exact group rings")
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    return c


def _conj(c):
    return c.conjugate() if hasattr(c, "conjugate") else c


def _key(item):
    g = item[0]
    return (0, g) if isinstance(g, int) else (1, tuple(g))


class GroupRingMatrix:
    """m x n matrix with entries in a group ring.  Immutable by convention."""

    __slots__ = ("group", "rows", "cols", "entries")

    def __init__(self, group: GroupSpec, entries: Sequence[Sequence[Any]]):
        rows = len(entries)
        cols = len(entries[0]) if rows else 0
        if any(len(r) != cols for r in entries):
            raise ShapeError("ragged matrix")
        grid = []
        for r in entries:
            row = []
            for x in r:
                if isinstance(x, GroupRingElement):
                    if x.group != group:
                        raise GroupMismatchError("entry over a different group")
                    row.append(x)
                else:
                    row.append(GroupRingElement.scalar(group, x))
            grid.append(tuple(row))
        self.group = group
        self.rows = rows
        self.cols = cols
        self.entries = tuple(grid)

    @classmethod
    def identity(cls, group: GroupSpec, n: int) -> "GroupRingMatrix":
        return cls(group, [[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, group: GroupSpec, m: int, n: int) -> "GroupRingMatrix":
        return cls(group, [[0] * n for _ in range(m)])

    @classmethod
    def scalar(cls, element: GroupRingElement) -> "GroupRingMatrix":
        return cls(element.group, [[element]])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij) -> GroupRingElement:
        i, j = ij
        return self.entries[i][j]

    def __repr__(self):
        return f"GroupRingMatrix({self.group.describe()}, {[list(r) for r in self.entries]})"

    def __eq__(self, other):
        if not isinstance(other, GroupRingMatrix):
            return NotImplemented
        return self.group == other.group and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __matmul__(self, other: "GroupRingMatrix") -> "GroupRingMatrix":
        return grmul(self, other)

    def __add__(self, other: "GroupRingMatrix") -> "GroupRingMatrix":
        if other.group != self.group:
            raise GroupMismatchError("matrices over different groups")
        if other.shape != self.shape:
            raise ShapeError(f"cannot add {self.shape} and {other.shape}")
        return GroupRingMatrix(self.group, [[a + b for a, b in zip(r, s)]
                                            for r, s in zip(self.entries, other.entries)])

    def __neg__(self):
        return GroupRingMatrix(self.group, [[-a for a in r] for r in self.entries])

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "GroupRingMatrix":
        return GroupRingMatrix(self.group, [[a * c for a in r] for r in self.entries])

    def star(self) -> "GroupRingMatrix":
        return adjoint(self)

    def power(self, k: int) -> "GroupRingMatrix":
        if self.rows != self.cols:
            raise ShapeError("power of a non-square matrix")
        out = GroupRingMatrix.identity(self.group, self.rows)
        for _ in range(k):
            out = out @ self
        return out

    def trace(self) -> Fraction:
        """Unnormalised matrix trace: sum of identity coefficients of the diagonal."""
        if self.rows != self.cols:
            raise ShapeError("trace of a non-square matrix")
        return sum((self.entries[i][i].trace for i in range(self.rows)), Fraction(0))

    def support(self) -> frozenset:
        return frozenset().union(*(a.support for r in self.entries for a in r))

    def map_group(self, phi, target: GroupSpec) -> "GroupRingMatrix":
        return GroupRingMatrix(target, [[a.map_group(phi, target) for a in r]
                                        for r in self.entries])

    def is_integral(self) -> bool:
        return all(a.is_integral() for r in self.entries for a in r)

    # -- serialisation ---------------------------------------------------

    def to_json(self) -> dict:
        def enc(g):
            return g if isinstance(g, int) else list(g)

        entries = []
        for r in self.entries:
            row = []
            for a in r:
                terms = []
                for g, c in sorted(a.terms.items(), key=_key):
                    c = Fraction(c)
                    terms.append([[c.numerator, c.denominator], enc(g)])
                row.append(terms)
            entries.append(row)
        return {"group": self.group.to_json(), "rows": self.rows, "cols": self.cols,
                "entries": entries}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, doc: Mapping) -> "GroupRingMatrix":
        group = GroupSpec.from_json(doc["group"])
        rows, cols = int(doc["rows"]), int(doc["cols"])
        raw = doc["entries"]
        if len(raw) != rows or any(len(r) != cols for r in raw):
            raise ShapeError("entries do not match declared rows/cols")
        grid = []
        for r in raw:
            row = []
            for terms in r:
                coeffs = {}
                for (num, den), g in terms:
                    if int(den) == 0:
                        raise ValueError("zero denominator in coefficient")
                    g = group.normalize(g if isinstance(g, int) else tuple(g))
                    coeffs[g] = coeffs.get(g, 0) + Fraction(int(num), int(den))
                row.append(GroupRingElement(group, coeffs))
            grid.append(row)
        return cls(group, grid)

    @classmethod
    def loads(cls, text: str) -> "GroupRingMatrix":
        return cls.from_json(json.loads(text))


def grmul(a: GroupRingMatrix, b: GroupRingMatrix) -> GroupRingMatrix:
    if a.group != b.group:
        raise GroupMismatchError("matrices over different groups")
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    zero = GroupRingElement(a.group)
    out = []
    for i in range(a.rows):
        row = []
        for j in range(b.cols):
            acc = zero
            for k in range(a.cols):
                x, y = a.entries[i][k], b.entries[k][j]
                if x.terms and y.terms:
                    acc = acc + x * y
            row.append(acc)
        out.append(row)
    return GroupRingMatrix(a.group, out)


def adjoint(a: GroupRingMatrix) -> GroupRingMatrix:
    return GroupRingMatrix(a.group, [[a.entries[i][j].star() for i in range(a.rows)]
                                     for j in range(a.cols)])


def norm_bound(a: GroupRingMatrix) -> Fraction:
    """d * d' * max_{k,l} ||a_kl||_1, an upper bound for the operator norm of r_a."""
    if a.rows == 0 or a.cols == 0:
        return Fraction(0)
    biggest = max(x.norm1() for r in a.entries for x in r)
    return a.rows * a.cols * biggest


def positive_reduction(b: GroupRingMatrix) -> GroupRingMatrix:
    """Delta = B B*; the determinant of B is det(Delta)^(1/2)."""
    return grmul(b, adjoint(b))


# ---------------------------------------------------------------------------
# convenience constructors


def laurent(coeffs: Sequence[int], low: int = 0, group: GroupSpec | None = None) -> GroupRingElement:
    """sum_j coeffs[j] t^(low + j) in Z[Z]."""
    group = group or free_abelian(1)
    return GroupRingElement(group, {(low + j,): c for j, c in enumerate(coeffs) if c})


def element_from_dict(group: GroupSpec, terms: Mapping) -> GroupRingElement:
    return GroupRingElement(group, terms)


def support_diameter(elements: Iterable[Element]) -> int:
    """Largest |coordinate| among Z^k elements; reduction mod n is injective on
    the set together with 0 once n exceeds twice this value."""
    best = 0
    for g in elements:
        for x in g:
            best = max(best, abs(x))
    return best


# ---------------------------------------------------------------------------
# exact rational linear algebra (rank, determinant)


def rational_rank(rows: Sequence[Sequence[Any]]) -> int:
    if not rows or not rows[0]:
        return 0
    dm = DomainMatrix([[QQ(Fraction(x).numerator, Fraction(x).denominator) for x in r]
                       for r in rows], (len(rows), len(rows[0])), QQ)
    return dm.rank()


def rational_det(rows: Sequence[Sequence[Any]]) -> Fraction:
    n = len(rows)
    if n == 0:
        return Fraction(1)
    dm = DomainMatrix([[QQ(Fraction(x).numerator, Fraction(x).denominator) for x in r]
                       for r in rows], (n, n), QQ)
    d = dm.det()
    return Fraction(int(d.numerator), int(d.denominator))


def iter_terms(a: GroupRingMatrix) -> Iterator[tuple[int, int, Element, Any]]:
    for i, r in enumerate(a.entries):
        for j, x in enumerate(r):
            for g, c in x.terms.items():
                yield i, j, g, c
