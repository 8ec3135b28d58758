import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2approx import bernoulli as bn
from l2approx.finvn import spectral_density
from l2approx.harness import ExperimentConfig, bernoulli_suite

A2 = bn.Alphabet.uniform(2)
CHI = bn.CylinderFunction.indicator(A2, (0,), 0)
ONE = bn.CylinderFunction.constant(A2, 1)
EQ = bn.CylinderFunction.equality(A2, (0,), (1,))
seeds = st.integers(0, 2**32 - 1)


def shift(n, alphabet=A2, rank=1):
    return bn.FiniteShift(alphabet, bn.Quotient((n,) * rank))


def test_cylinder_basics():
    assert CHI.integral() == Fraction(1, 2)
    assert EQ.integral() == Fraction(1, 2)
    f = bn.CylinderFunction(A2, [(0,), (3,)], [1, 1, 2, 2])
    assert f.minimal_support() == ((0,),)
    assert f.minimize().support == ((0,),) and f.minimize() == f
    assert (CHI * CHI) == CHI
    assert (CHI + (1 - CHI)) == ONE
    assert CHI.translate((2,)).support == ((2,),)
    assert bn.CylinderFunction.from_json(f.to_json()) == f
    biased = bn.Alphabet((Fraction(1, 3), Fraction(2, 3)))
    assert bn.CylinderFunction.indicator(biased, (0,), 1).integral() == Fraction(2, 3)
    with pytest.raises(ValueError):
        bn.Alphabet((Fraction(1, 2), Fraction(1, 3)))


@given(seeds)
def test_crossed_product_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (bn.random_crossed(rng, A2, 1) for _ in range(3))
    assert (a * b) * c == a * (b * c)
    assert (a * b).star() == b.star() * a.star()
    assert a.star().star() == a
    assert (a * b).trace() == (b * a).trace()
    assert (a * a.star()).trace() >= 0
    m = bn.as_matrix(a)
    assert bn.CrossedCylinderMatrix.from_json(m.to_json()) == m


def test_shift_action_convention():
    t = bn.CrossedCylinder.monomial(ONE, (1,))
    x = bn.CrossedCylinder.monomial(CHI, (0,))
    # t chi t^-1 = chi o m_{t^-1}, supported at coordinate 1
    conj = t * x * t.star()
    assert list(conj.terms) == [(0,)]
    assert conj.terms[(0,)].minimal_support() == ((1,),)


def test_pushforward_examples():
    s2 = shift(2)
    f = bn.pushforward_morphism(bn.CrossedCylinder.scalar(A2, 1), s2)
    assert f.is_projection() and math.isclose(f.det(), 1)
    p = bn.pushforward(bn.CrossedCylinder.monomial(CHI, (0,)), s2)
    assert p.trace() == Fraction(1, 2)
    assert bn.pushforward_morphism(bn.CrossedCylinder.monomial(CHI, (0,)), s2).is_projection()
    assert bn.pushforward(bn.CrossedCylinder.monomial(CHI, (1,)), s2).trace() == 0


def test_cap():
    with pytest.raises(bn.CapError):
        shift(9)
    with pytest.raises(bn.CapError):
        bn.FiniteShift(bn.Alphabet.uniform(4), bn.Quotient((6,)))
    assert shift(8).action.size == 256


@given(seeds, st.integers(1, 4))
def test_homomorphism(seed, n):
    rng = np.random.default_rng(seed)
    a, b = (bn.random_crossed(rng, A2, 1) for _ in range(2))
    assert bn.homomorphism_check(a, b, shift(n))


def test_trace_injectivity_examples():
    for q in (1, 2, 5):
        tc = bn.trace_injectivity_check(ONE, bn.Quotient((q,)))
        assert tc.lhs == tc.rhs == 1
        tc = bn.trace_injectivity_check(CHI, bn.Quotient((q,)))
        assert tc.lhs == tc.rhs == Fraction(1, 2)
    tc = bn.trace_injectivity_check(EQ, bn.Quotient((1,)))
    assert (tc.lhs, tc.rhs, tc.injective) == (1, Fraction(1, 2), False)


@given(seeds, st.integers(1, 4))
def test_pushed_trace_matches_finite_model(seed, n):
    rng = np.random.default_rng(seed)
    m = bn.random_crossed_matrix(rng, A2, 1, 2, 2)
    q = bn.Quotient((n,))
    assert bn.pushed_trace(m, q) == bn.pushforward(m, bn.FiniteShift(A2, q)).trace()
    if n >= bn.stabilization_threshold(m):
        assert bn.pushed_trace(m, q) == m.trace()


@given(seeds)
def test_stabilization(seed):
    rng = np.random.default_rng(seed)
    m = bn.random_crossed(rng, A2, 1)
    rep = bn.trace_stabilization(m, [1, 2, 3, 4, 8, 16], M=3, use_models_up_to=3)
    assert rep.stable


@given(seeds)
def test_pushforward_determinants(seed):
    rng = np.random.default_rng(seed)
    m = bn.random_crossed_matrix(rng, A2, 1, 2, 2)
    f = bn.pushforward_morphism(m, shift(int(rng.integers(1, 5))))
    assert spectral_density(f).log_det() >= -1e-9


def test_rank_two():
    t = bn.CrossedCylinder.monomial(bn.CylinderFunction.indicator(A2, (0, 0), 1), (1, 0))
    f = bn.pushforward_morphism(t + bn.CrossedCylinder.scalar(A2, 2, 2), shift(2, rank=2))
    assert spectral_density(f).log_det() >= -1e-9


def test_step_approximation():
    rep = bn.step_approximate(ONE, [ONE, ONE], 1)
    assert rep.deviations == [0, 0]
    assert bn.step_approximate(CHI, [CHI], 1).deviations == [0]
    two = bn.CylinderFunction(A2, [(0,), (1,)], [3, 0, 1, 2])
    avg = bn.conditional_average(two, [(0,)])
    assert avg.table == (Fraction(3, 2), Fraction(3, 2))
    rounded = bn.round_values(avg)
    assert rounded.table == (2, 2)
    rep = bn.step_approximate(two, [rounded], 3, declared_l1=[Fraction(3, 2)])
    # |3-2| + |0-2| + |1-2| + |2-2| over four equally likely words
    assert rep.deviations == [1]
    with pytest.raises(bn.ApproximationBoundError):
        bn.step_approximate(two, [rounded.__class__(A2, [], [5])], 3)
    with pytest.raises(bn.ApproximationBoundError):
        bn.step_approximate(two, [rounded], 3, declared_l1=[Fraction(1, 2)])


def test_suite():
    rep = bernoulli_suite(ExperimentConfig(seed=2), samples=5)
    assert rep["ok"]
