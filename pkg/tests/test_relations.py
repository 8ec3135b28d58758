import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2approx import relations as rel
from l2approx.finvn import VNMorphism
from l2approx.grouprings import cyclic, dihedral
from l2approx.harness import ExperimentConfig, transport_suite

seeds = st.integers(0, 2**32 - 1)


def swap_action(n_points, perm1):
    g = cyclic(2)
    return rel.FiniteAction(g, {(0,): tuple(range(n_points)), (1,): perm1}, (Fraction(1, n_points),) * n_points)


def test_orbit_relations():
    triv = rel.FiniteAction(cyclic(1), {(0,): (0, 1, 2)}, (Fraction(1, 3),) * 3)
    assert rel.orbit_relation(triv).classes == ((0,), (1,), (2,))
    assert rel.orbit_relation(swap_action(2, (1, 0))).classes == ((0, 1),)
    double = swap_action(4, (1, 0, 3, 2))
    assert rel.orbit_relation(double).classes == ((0, 1), (2, 3))
    assert double.is_free()
    assert not swap_action(3, (1, 0, 2)).is_free()


def test_relation_validation():
    with pytest.raises(rel.RelationError):
        rel.FiniteRelation((Fraction(1, 2), Fraction(1, 4)), ((0,), (1,)))
    with pytest.raises(rel.RelationError):
        rel.FiniteRelation((Fraction(1, 3), Fraction(2, 3)), ((0, 1),))
    with pytest.raises(rel.RelationError):
        rel.FiniteAction(cyclic(2), {(0,): (0, 1), (1,): (0, 0)}, (Fraction(1, 2),) * 2)
    R = rel.uniform_relation([[0], [1]])
    with pytest.raises(rel.RelationError):
        rel.GroupoidMatrix.scalar_kernel(R, {(0, 1): 1})


def test_to_vn_examples():
    R = rel.uniform_relation([[0, 1]])
    f = rel.to_vn_model(rel.GroupoidMatrix.identity(R, 2))
    assert f.max_abs_diff(VNMorphism.identity(f.model, 2)) == 0
    two = rel.GroupoidMatrix.identity(R).scale(2)
    assert math.isclose(rel.to_vn_model(two).det(), 2)


def test_embed_crossed_traces():
    act = swap_action(2, (1, 0))
    e = rel.CrossedElement(act, {(0,): (1, 0)})
    s = rel.CrossedElement(act, {(1,): (1, 1)})
    for a in (e, s, e * s + s, (e + s) * (e + s).star()):
        assert rel.embed_crossed(a).trace() == a.trace()
    assert e.trace() == Fraction(1, 2) and s.trace() == 0


@given(seeds)
def test_crossed_embedding_moments(seed):
    rng = np.random.default_rng(seed)
    g = dihedral(3)
    # free action of D3 on two copies of itself
    n = 2 * g.order
    perms = {h: tuple(c * g.order + g.mul(h, x) for c in range(2) for x in g.elements()) for h in g.elements()}
    act = rel.FiniteAction(g, perms, (Fraction(1, n),) * n)
    terms = {h: tuple(int(v) for v in rng.integers(-2, 3, size=n)) for h in g.elements() if rng.random() < 0.5}
    a = rel.CrossedElement(act, terms)
    m1 = rel.crossed_regular_rep(a).moments(4)
    m2 = rel.to_vn_model(rel.embed_crossed(a)).moments(4)
    assert np.allclose(m1, m2, rtol=1e-12, atol=1e-12)


@given(seeds)
def test_groupoid_ring_axioms(seed):
    rng = np.random.default_rng(seed)
    R = rel.random_relation(rng)
    f, g, h = (rel.random_groupoid_matrix(rng, R, 2, 2) for _ in range(3))
    assert (f @ g) @ h == f @ (g @ h)
    assert (f @ g).star() == g.star() @ f.star()
    assert (f @ g).trace() == (g @ f).trace()
    assert (f @ f.star()).trace() >= 0
    assert rel.GroupoidMatrix.from_json(f.to_json()) == f
    assert rel.FiniteRelation.from_json(R.to_json()) == R
    # the VN model sees the same trace
    assert math.isclose(rel.to_vn_model(f).trace().real, float(f.trace()), abs_tol=1e-12)


def test_restriction_examples():
    R = rel.uniform_relation([[0, 1, 2]])
    f = rel.GroupoidMatrix.scalar_kernel(R, {(0, 0): 2, (0, 1): 1, (1, 1): 3, (2, 2): 5, (2, 0): 1})
    whole = rel.restrict_relation(f, range(3))
    assert whole.matrix == f and whole.measure == 1
    A = [0]
    small = rel.restrict_relation(f, A)
    assert small.measure == Fraction(1, 3)
    lhs = rel.to_vn_model(f.compress(A)).log_det()
    assert math.isclose(lhs, float(small.measure) * rel.to_vn_model(small.matrix).log_det(), rel_tol=1e-9)
    singles = rel.uniform_relation([[0], [1], [2]])
    d = rel.GroupoidMatrix.scalar_kernel(singles, {(0, 0): 1, (1, 1): 2, (2, 2): 3})
    assert rel.restrict_relation(d, [1]).matrix.entries == {(0, 0): ((Fraction(2),),)}


def test_fullness_examples():
    R = rel.uniform_relation([[0, 1]])
    cert = rel.is_full([0, 1], R)
    assert cert.verify(R, [0, 1])
    cert = rel.is_full([0], R)
    assert cert.full and len(cert.maps) == 2 and cert.verify(R, [0])
    S = rel.uniform_relation([[0], [1]])
    cert = rel.is_full([0], S)
    assert not cert.full and cert.missed_classes == [1]


@given(seeds)
def test_random_certificates(seed):
    rng = np.random.default_rng(seed)
    R = rel.random_relation(rng)
    A = rel.random_full_subset(rng, R)
    assert rel.is_full(A, R).verify(R, A)


def test_transport_examples():
    R = rel.uniform_relation([[0, 1], [2, 3]])
    f = rel.GroupoidMatrix.scalar_kernel(R, {(0, 1): 2, (1, 1): 1, (2, 3): -1, (3, 3): 3, (2, 2): 1})
    assert rel.transport(f, R, {x: x for x in range(4)}) == f
    relabel = {0: 1, 1: 0, 2: 2, 3: 3}
    g = rel.transport(f, R, relabel)
    assert math.isclose(rel.to_vn_model(g).log_det(), rel.to_vn_model(f).log_det(), abs_tol=1e-12)
    swap = {0: 2, 1: 3, 2: 0, 3: 1}
    h = rel.transport(f, R, swap)
    D, E = f @ f.star(), h @ h.star()
    assert [D.power(m).trace() for m in range(1, 5)] == [E.power(m).trace() for m in range(1, 5)]
    with pytest.raises(rel.RelationError):
        rel.transport(f, R, {0: 0, 1: 2, 2: 1, 3: 3})


def test_transport_suite_small():
    rep = transport_suite(ExperimentConfig(samples=10, seed=4))
    assert rep.ok and rep.trace_exact and rep.betti_exact and rep.certificates_ok
