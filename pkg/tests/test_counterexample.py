import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2approx import counterexample as cx
from l2approx.finvn import VNMorphism


def test_surd_arithmetic():
    r2 = cx.Surd.root(2)
    assert r2 * r2 == cx.Surd.rational(2, 2)
    assert cx.Surd.root(9) == cx.Surd.rational(3, 9)
    assert math.isclose(float(r2 + cx.Surd.rational(1, 2)), 1 + math.sqrt(2))
    with pytest.raises(ValueError):
        r2 + cx.Surd.root(3)
    assert cx.rational_sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert cx.rational_sqrt(Fraction(2)) is None


def test_log_values():
    assert cx.LogValue.of(Fraction(12)) == cx.LogValue.of(4) + cx.LogValue.of(3)
    assert (cx.LogValue.of(Fraction(1, 8)) + cx.LogValue.of(2, 3)).is_zero()
    assert math.isclose(float(cx.LogValue.of(Fraction(5, 7), Fraction(1, 2))), 0.5 * math.log(5 / 7))
    with pytest.raises(ValueError):
        cx.LogValue.of(0)


def test_epsilon():
    assert cx.epsilon_sq(1) == 0
    assert cx.epsilon_sq(2) == 2 ** 8 - 1
    assert cx.epsilon_sq(3) == 3 ** 16 - 1


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_pieces(k):
    s = cx.epsilon_sq(k)
    u, v = cx.build_uk(k, s), cx.build_vk(k, s)
    a, b = cx.middle_interval(k)
    ident_mid = cx.TwoCopyOperator(1, 1, Fraction(s), [cx.Segment(a, b, Fraction(1), ((cx.Surd.rational(1, s),),))])
    assert u.adjoint() @ u == ident_mid
    assert (u.adjoint() @ v).is_zero()
    p = cx.build_pk(k, s)
    assert p @ p == p and p.adjoint() == p


def test_build_pk_closed_form():
    # eps = 1: on the middle interval p = [[1/2, 1/2], [1/2, 1/2]]
    p = cx.build_pk(1, 1)
    seg = p.at(Fraction(0))
    assert seg.start == 0 and seg.stop == Fraction(1, 2)
    assert [[float(x) for x in r] for r in seg.matrix] == [[0.5, 0.5], [0.5, 0.5]]
    assert p.trace() == Fraction(1, 2)
    assert cx.dim_Ak(2) == Fraction(5, 4)


def test_depth_errors():
    with pytest.raises(cx.DepthError):
        cx.build_pk(3, 1, depth=3)
    with pytest.raises(cx.DepthError):
        cx.build_pk(0, 1)
    with pytest.raises(cx.DepthError):
        cx.build_pk(3, 1).to_vn(cx.DyadicModel(2))


@pytest.mark.parametrize("k", range(1, 9))
def test_determinant_exact(k):
    r = cx.det_pr2_pk(k)
    assert r.log_det == cx.expected_log(k)
    assert abs(r.float_log_det + math.log(k)) <= 1e-12


def test_determinant_eps_one():
    r = cx.det_pr2_pk(1, eps_sq=1)
    assert math.isclose(r.det, 2 ** -0.25, rel_tol=1e-14)
    assert r.log_det == cx.LogValue.of(2, Fraction(-1, 4))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_engine_cross_check(k):
    assert math.isclose(cx.det_via_engine(k), 1 / k, rel_tol=1e-9)


@given(st.integers(1, 6), st.integers(0, 4))
def test_engine_agrees_for_moderate_eps(k, e):
    # small eps keeps every singular value above the zero clamp
    eps_sq = Fraction(e, 3)
    exact = cx.det_pr2_pk(k, eps_sq=eps_sq)
    assert math.isclose(cx.det_via_engine(k, eps_sq=eps_sq), exact.det, rel_tol=1e-9)
    f = cx._retag(cx.build_pr2(), eps_sq) @ cx.build_pk(k, eps_sq)
    assert f.to_vn(cx.DyadicModel(k + 2)).betti() == exact.kernel_dim


def test_dimension_formula():
    dims = [cx.dim_Ak(k) for k in range(1, 13)]
    assert dims == [cx.dim_Ak_formula(k) for k in range(1, 13)]
    assert all(a < b < 2 for a, b in zip(dims, dims[1:]))
    assert cx.dim_Ak(5, eps_sq=cx.epsilon_sq(5)) == cx.dim_Ak_formula(5)


@given(st.integers(0, 2**32 - 1))
def test_kernel_containing_projections_converge(seed):
    rng = np.random.default_rng(seed)
    f = cx.random_exhaustion_case(rng, cells=24)
    rep = cx.verify_kernel_exhaustion(f, cx.exhausting_projections(f, [2, 6, 12, 18, 22]))
    assert rep.converged
    assert rep.errors[-1] <= rep.errors[0] + 1e-12


def test_kernel_containment_violated():
    pr2, ps = cx.dyadic_projections([1, 2, 3], depth=5)
    with pytest.raises(cx.KernelContainmentError):
        cx.verify_kernel_exhaustion(pr2, ps)


def test_nesting_violated():
    rng = np.random.default_rng(0)
    f = cx.random_exhaustion_case(rng, cells=8)
    ps = cx.exhausting_projections(f, [6, 3])
    with pytest.raises(cx.NestingError):
        cx.verify_kernel_exhaustion(f, ps)


def test_dyadic_model():
    d = cx.DyadicModel(3)
    assert d.cells == 8 and d.model.unit_trace() == 1
    assert d.cells_in(Fraction(1, 4), Fraction(1, 2)) == [2, 3]
    p = cx.build_pk(2, 3).to_vn(cx.DyadicModel(4))
    assert isinstance(p, VNMorphism) and p.is_projection()
