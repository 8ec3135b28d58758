import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2approx.approx import (
    FolnerBoxes,
    QuotientChain,
    RegularRep,
    SchemeError,
    check_extension,
    doubling,
    exact_betti_finite,
    exact_betti_free_abelian,
    folner_compress,
    quotient_pushforward,
    reduce_mod,
    regular_rep,
    res_p,
    res_p_full,
    res_p_trace,
    run_approximation,
)
from l2approx.grouprings import (
    GroupError,
    GroupRingElement,
    GroupRingMatrix,
    cyclic,
    dihedral,
    free_abelian,
    laurent,
    quotient_group,
)
from l2approx.harness import approximation_suite, constant_rank_matrix, extension_suite

Z = free_abelian(1)


def one_by_one(a):
    return GroupRingMatrix(a.group, [[a]])


T_MINUS_2 = one_by_one(laurent([-2, 1]))


def test_regular_rep_examples():
    g = cyclic(2)
    assert regular_rep(GroupRingMatrix.identity(g, 1)).det() == 1
    f = regular_rep(one_by_one(GroupRingElement(g, {0: 1, 1: 1})))
    assert math.isclose(f.det(), math.sqrt(2), rel_tol=1e-12)
    assert f.betti() == Fraction(1, 2)
    assert math.isclose(regular_rep(one_by_one(GroupRingElement.scalar(dihedral(3), 5))).det(), 5)


def test_quotient_examples():
    assert math.isclose(quotient_pushforward(T_MINUS_2, 1).det(), 1)
    for fourier in (True, False):
        assert math.isclose(quotient_pushforward(T_MINUS_2, 4, fourier=fourier).det(), 15 ** 0.25,
                            rel_tol=1e-12)
    assert math.isclose(quotient_pushforward(GroupRingMatrix.identity(Z, 2), 7).det(), 1)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_quotient_closed_form(n):
    assert math.isclose(quotient_pushforward(T_MINUS_2, n).log_det(), math.log(2 ** n - 1) / n, rel_tol=1e-12)


def test_reduction_mod_n():
    A = one_by_one(laurent([1, 0, 0, 1], low=-1))
    assert reduce_mod(A, 2).entries[0][0] == GroupRingElement(cyclic(2), {0: 1, 1: 1})


def test_folner_examples():
    assert math.isclose(folner_compress(T_MINUS_2, 1).det(), 2)
    assert math.isclose(folner_compress(T_MINUS_2, 2).det(), 2)
    assert math.isclose(folner_compress(GroupRingMatrix.identity(Z, 1), 5).det(), 1)
    block = folner_compress(T_MINUS_2, 2).blocks[0]
    assert np.allclose(sorted(np.abs(np.linalg.eigvals(block))), [2, 2])


def test_res_p_examples():
    g2 = cyclic(2)
    Q1 = cyclic(1)
    proj = {x: (0,) for x in g2.elements()}
    A = one_by_one(GroupRingElement.scalar(Q1, 3))
    f = res_p(A, g2, g2.elements(), proj)
    assert math.isclose(f.det(), math.sqrt(3), rel_tol=1e-12)
    assert res_p_trace(A, g2, g2.elements(), proj) == Fraction(3, 2)
    assert math.isclose(f.trace().real, 1.5)

    g4 = cyclic(4)
    Q, p = quotient_group(g4, [(0,), (2,)])
    u = next(q for q in Q.elements() if q != Q.identity)
    B = one_by_one(GroupRingElement(Q, {Q.identity: 1, u: 1}))
    assert math.isclose(regular_rep(B).det(), math.sqrt(2), rel_tol=1e-12)
    assert math.isclose(res_p(B, g4, [(0,), (2,)], p).det(), 2 ** 0.25, rel_tol=1e-12)


def test_res_p_trivial_kernel_is_identity_map():
    g = dihedral(3)
    proj = {x: x for x in g.elements()}
    A = one_by_one(GroupRingElement(g, {0: 2, 1: 1, 4: -1}))
    f, h = res_p(A, g, [g.identity], proj), regular_rep(A)
    assert f.max_abs_diff(h) < 1e-12


def test_res_p_full_lift():
    g4 = cyclic(4)
    K = [(0,), (2,)]
    Q, p = quotient_group(g4, K)
    u = next(q for q in Q.elements() if q != Q.identity)
    B = one_by_one(GroupRingElement(Q, {Q.identity: 1, u: 2}))
    full = regular_rep(res_p_full(B, g4, K, p))
    # the full lift is res_p f plus the identity on the complement
    assert math.isclose(full.log_det(), res_p(B, g4, K, p).log_det(), abs_tol=1e-12)


def test_extension_validation():
    g4 = cyclic(4)
    Q, p = quotient_group(g4, [(0,), (2,)])
    with pytest.raises(GroupError):
        check_extension(g4, [(0,)], p, Q)
    bad = dict(p)
    bad[(1,)] = Q.identity
    with pytest.raises(GroupError):
        check_extension(g4, [(0,), (2,)], bad, Q)


def test_extension_suite():
    for case in extension_suite(seed=3, samples=8):
        assert case.ok, case


def test_run_identity():
    rep = run_approximation(GroupRingMatrix.identity(Z, 2), QuotientChain((1, 2, 4)), M=3)
    for s in rep.stages:
        assert np.allclose(s.moments, 1) and s.betti == 0 and abs(s.logdet) < 1e-15
    assert rep.verdicts["conclusion"]


def test_run_t_minus_2():
    rep = run_approximation(T_MINUS_2, QuotientChain(doubling(2, 2048)), M=4)
    lds = [s.logdet for s in rep.stages]
    assert all(a <= b + 1e-15 for a, b in zip(lds, lds[1:]))
    assert abs(math.exp(lds[-1]) - 2) < 1e-3
    v = rep.verdicts
    assert v["norm_bound_ok"] and v["moments_exact"] and v["det_ge_1"]
    assert v["stationary_from_stage"] is not None
    assert rep.limit_moments[0] == 5
    assert rep.to_tsv().count("\n") == len(rep.stages) + 1


def test_run_golden_ratio():
    rep = run_approximation(one_by_one(laurent([-1, -1, 1])), QuotientChain(doubling(2, 2048)), M=3)
    assert abs(math.exp(rep.verdicts["final_logdet"]) - (1 + math.sqrt(5)) / 2) < 1e-3


def test_folner_scheme():
    rep = run_approximation(T_MINUS_2, FolnerBoxes((1, 2, 4, 8)), M=2)
    assert all(abs(s.logdet - math.log(2)) < 1e-12 for s in rep.stages)


def test_scheme_errors():
    with pytest.raises(SchemeError):
        run_approximation(T_MINUS_2, RegularRep())
    with pytest.raises(SchemeError):
        run_approximation(GroupRingMatrix.identity(cyclic(2), 1), QuotientChain((2,)))


def test_exact_betti_oracles():
    g = cyclic(2)
    assert exact_betti_finite(one_by_one(GroupRingElement(g, {0: 1, 1: 1}))) == Fraction(1, 2)
    assert exact_betti_free_abelian(T_MINUS_2) == 0
    zero = GroupRingElement(Z)
    assert exact_betti_free_abelian(GroupRingMatrix(Z, [[laurent([1, 1])], [zero]])) == 1


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_constant_rank_quotients(seed, rows, cols):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(0, min(rows, cols) + 1))
    A = constant_rank_matrix(rng, Z, rows, cols, r)
    assert exact_betti_free_abelian(A) == rows - r
    for n in (1, 3, 4):
        assert quotient_pushforward(A, n).betti() == rows - r


@given(st.integers(0, 10_000))
def test_fourier_matches_circulant(seed):
    rng = np.random.default_rng(seed)
    A = constant_rank_matrix(rng, Z, 2, 2, 2)
    for n in (2, 5):
        a, b = quotient_pushforward(A, n), quotient_pushforward(A, n, fourier=False)
        assert np.allclose(a.moments(3), b.moments(3), rtol=1e-9)
        assert math.isclose(a.log_det(), b.log_det(), rel_tol=1e-9, abs_tol=1e-9)


def test_approximation_suite_small():
    for case in approximation_suite(seed=5, finite=3, lattice=3):
        assert case.ok, case
