import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l2approx.finvn import (
    CellEmbedding,
    EmbeddingError,
    FiniteVNModel,
    ModelError,
    SpectralDensity,
    VNMorphism,
    betti,
    cell_projection,
    cellwise_unitary,
    fk_det,
    induce,
    random_morphism,
    random_unitary,
    restrict,
    spectral_density,
)

HALVES = FiniteVNModel(((Fraction(1, 2), 1), (Fraction(1, 2), 1)))


@st.composite
def models(draw):
    cells = draw(st.integers(1, 3))
    dims = [draw(st.integers(1, 3)) for _ in range(cells)]
    raw = [draw(st.integers(1, 5)) for _ in range(cells)]
    total = sum(r * n for r, n in zip(raw, dims))
    return FiniteVNModel(tuple((Fraction(r, total), n) for r, n in zip(raw, dims)))


@st.composite
def morphisms(draw, square=False):
    model = draw(models())
    d = draw(st.integers(1, 3))
    e = d if square else draw(st.integers(1, 3))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    return random_morphism(model, d, e, rng)


def test_identity_density():
    m = FiniteVNModel.uniform(1)
    F = spectral_density(VNMorphism.identity(m, 2))
    assert F(0.999) == 0 and F(1.0) == 2
    assert fk_det(F) == 1 and betti(F) == 0


def test_zero_density():
    m = FiniteVNModel.uniform(1)
    F = spectral_density(VNMorphism.zero(m, 1))
    assert F.jumps == [(0.0, 1)]
    assert F(0) == 1 and F(10) == 1
    assert fk_det(F) == 1
    assert spectral_density(VNMorphism.zero(m, 3)).betti == 3


def test_diagonal_density():
    F = spectral_density(VNMorphism.diagonal(HALVES, [2, 3]))
    assert [w for _, w in F.jumps] == [Fraction(1, 2)] * 2
    assert np.allclose(F.locations(), [2, 3])
    assert math.isclose(F.det(), math.sqrt(6), rel_tol=1e-12)
    assert F.to_tsv().splitlines()[0] == "lambda\tweight\tcumulative"


def test_restriction_examples():
    f = VNMorphism.diagonal(HALVES, [2, 3])
    r = restrict(f, cell_projection(HALVES, [0, 1]))
    assert r.scaling == 1 and r.full
    assert math.isclose(r.morphism.log_det(), f.log_det(), rel_tol=1e-15)
    # a central projection onto one cell is not full: the law fails, as it should
    r = restrict(f, cell_projection(HALVES, [0]))
    assert not r.full and r.scaling == Fraction(1, 2)
    assert math.isclose(r.morphism.log_det(), math.log(2))
    assert not math.isclose(f.log_det(), float(r.scaling) * r.morphism.log_det())
    with pytest.raises(ModelError):
        restrict(f, [np.eye(1), 2 * np.eye(1)])


@given(morphisms(square=True), st.integers(0, 2**32 - 1))
def test_restriction_law_full(f, seed):
    rng = np.random.default_rng(seed)
    p = []
    for n in f.model.dims:
        u = random_unitary(n, rng)
        k = int(rng.integers(1, n + 1))
        p.append(u[:, :k] @ u[:, :k].conj().T)
    r = restrict(f, p)
    assert r.full
    assert math.isclose(f.log_det(), float(r.scaling) * r.morphism.log_det(), rel_tol=1e-9, abs_tol=1e-9)


def test_induction_examples():
    triv = FiniteVNModel.uniform(1)
    reg = FiniteVNModel.uniform(2)
    emb = CellEmbedding(triv, reg, [[1, 1]])
    f = VNMorphism.diagonal(triv, [2])
    g = induce(f, emb)
    assert math.isclose(g.det(), 2) and math.isclose(f.det(), 2)
    same = CellEmbedding(HALVES, HALVES, [[1, 0], [0, 1]])
    h = VNMorphism.diagonal(HALVES, [2, 3])
    assert induce(h, same).spectral_density().jumps == h.spectral_density().jumps
    with pytest.raises(EmbeddingError):
        CellEmbedding(triv, FiniteVNModel(((Fraction(1, 2), 1),)), [[1]])


@given(morphisms(), st.integers(0, 2**32 - 1))
def test_induction_preserves_spectrum(f, seed):
    rng = np.random.default_rng(seed)
    src = f.model
    # weights are r_c / total, so source cell c fits r_c times into one cell of weight 1 / total
    total = math.lcm(*(w.denominator for w in src.weights))
    mult = [int(w * total) for w in src.weights]
    n = sum(m * k for m, k in zip(mult, src.dims))
    target = FiniteVNModel(((Fraction(1, total), n),))
    emb = CellEmbedding(src, target, [[m] for m in mult], [random_unitary(n, rng)])
    g = induce(f, emb)
    assert np.allclose(g.moments(4), f.moments(4), rtol=1e-12)


def test_algebra():
    rng = np.random.default_rng(1)
    m = FiniteVNModel(((Fraction(1, 4), 1), (Fraction(1, 4), 3)))
    f, g = random_morphism(m, 2, 3, rng), random_morphism(m, 3, 2, rng)
    assert (f @ g).adjoint().max_abs_diff(g.adjoint() @ f.adjoint()) < 1e-12
    u = cellwise_unitary(m, 2, rng)
    assert (u.adjoint() @ u).max_abs_diff(VNMorphism.identity(m, 2)) < 1e-12
    assert math.isclose((f @ u).log_det(), f.log_det(), rel_tol=1e-10)
    assert VNMorphism.loads(f.dumps()).max_abs_diff(f) == 0
    assert FiniteVNModel.from_json(m.to_json()) == m


@given(morphisms())
def test_density_invariants(f):
    F = f.spectral_density()
    assert F.total == f.domain * f.model.unit_trace()
    assert F(1e300) == F.total
    assert 0 <= F.betti <= F.total
    assert np.allclose(f.moments(1)[0] * float(F.total),
                       sum(float(w) * x * x for x, w in F.jumps), rtol=1e-9)
    # adjoint has the same nonzero spectrum, so the same determinant
    assert math.isclose(f.log_det(), f.adjoint().log_det(), rel_tol=1e-9, abs_tol=1e-9)


def test_density_scaling():
    F = SpectralDensity([(0.0, Fraction(1, 2)), (2.0, Fraction(1, 2))], Fraction(1))
    G = F.scaled(Fraction(1, 3))
    assert G.betti == Fraction(1, 6) and G.total == Fraction(1, 3)
