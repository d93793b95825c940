import math

import numpy as np
import pytest

from nilheat.bergman import (
    BergmanSample,
    C_m_relation_residual,
    bergman_grid,
    extract_C0,
    finite_group_act,
    invert_sector_transform,
    inversion_residuals,
    law_residual,
    project_sector_j,
    sector_membership_residual,
    torus_bergman_norm,
    twisted_bergman_inner,
    twisted_bergman_norm,
    twisted_box_radius,
)
from nilheat.errors import IllPosedError, InvalidInputError, InvalidParameterError
from nilheat.heat_transform import sector_transform_via_expansion
from nilheat.heisenberg import CGroupPoint
from nilheat.hermite import hermite_eval_scaled
from nilheat.nilmanifold import FiniteGroupElement, LatticeParams, twisted_periodize
from nilheat.numerics import Grid, SampledField

K1 = LatticeParams(1, 1)
T = 0.02


def _entire_sector(z, w):
    """A twisted average of e^{-4(z^2 + w^2)}: entire and in the k = 1 sector."""
    return twisted_periodize(-K1.lam, lambda X: np.exp(-4.0 * np.sum(X * X, axis=-1)), np.concatenate([z, w], axis=-1))


@pytest.fixture(scope="module")
def exact():
    return BergmanSample.from_function(K1, T, _entire_sector, bergman_grid(1, 12, 2.2, 40))


@pytest.fixture(scope="module")
def plain(exact):
    return exact.with_values(exact.values)


def test_bergman_grid_layout():
    grid = bergman_grid(1, 8, 2.0, 23)
    assert grid.points == (8, 8, 24, 24)
    assert grid.periodic == (True, True, False, False)
    assert grid.axes()[2][12] == pytest.approx(0.0, abs=1e-12)


def test_sample_validation():
    grid = bergman_grid(1, 4, 1.0, 4)
    with pytest.raises(InvalidParameterError):
        BergmanSample(K1, 0.0, SampledField(grid, np.zeros(grid.size)))
    with pytest.raises(InvalidInputError):
        BergmanSample(K1, T, SampledField(Grid.cell(2, 4), np.zeros(16)))
    with pytest.raises(InvalidInputError):
        BergmanSample(LatticeParams(2, 1), T, SampledField(grid, np.zeros(grid.size)))


# ----------------------------- Torus sector ----------------------------- #

def test_torus_norm_of_constant():
    grid = bergman_grid(1, 8, 4.3, 64)
    one = BergmanSample.from_function(None, 0.1, lambda z, w: np.ones(z.shape[:-1]), grid)
    assert torus_bergman_norm(one) == pytest.approx(1.0, rel=1e-12)


def test_torus_norm_of_character():
    t = 0.1
    grid = bergman_grid(1, 8, 4.3, 64)
    wave = BergmanSample.from_function(None, t, lambda z, w: np.exp(2j * np.pi * z[..., 0]), grid)
    assert torus_bergman_norm(wave) == pytest.approx(math.exp(4 * math.pi**2 * t), rel=1e-10)


def test_torus_norm_rejects_twisted_samples(plain):
    with pytest.raises(InvalidInputError):
        torus_bergman_norm(plain)


# ----------------------------- Twisted sector ----------------------------- #

def test_law_residual(exact, plain):
    assert law_residual(exact) < 1e-10
    assert law_residual(plain) < 1e-8


def test_law_residual_of_sampled_data_after_group_action(plain):
    moved = finite_group_act(FiniteGroupElement((1,), K1.order), plain)
    assert moved.func is None
    assert law_residual(moved) < 1e-8


def test_twisted_norm_rejects_random_samples():
    rng = np.random.default_rng(7)
    grid = bergman_grid(1, 8, 1.0, 8)
    noise = BergmanSample(K1, T, SampledField(grid, rng.standard_normal(grid.points)))
    assert law_residual(noise) > 1e-2
    with pytest.raises(InvalidInputError):
        twisted_bergman_norm(noise)


def test_twisted_norm_rejects_samples_breaking_the_x_law(plain):
    # x-periodic data with no twist across the cell boundary
    z, w = plain.zw()
    periodic = np.exp(2j * np.pi * z[..., 0]) * np.exp(-4.0 * w[..., 0] ** 2)
    broken = plain.with_values(periodic)
    assert law_residual(broken) > 1e-3
    with pytest.raises(InvalidInputError):
        twisted_bergman_norm(broken)


def test_twisted_norm_rejects_unlawful_data():
    grid = bergman_grid(1, 8, 1.0, 8)
    flat = BergmanSample.from_function(K1, T, lambda z, w: np.ones(z.shape[:-1]), grid)
    with pytest.raises(InvalidInputError):
        twisted_bergman_norm(flat)
    torus = BergmanSample.from_function(None, T, lambda z, w: np.ones(z.shape[:-1]), grid)
    with pytest.raises(InvalidInputError):
        twisted_bergman_norm(torus)


def test_inner_product_matches_norm(plain):
    assert twisted_bergman_inner(plain, plain).real == pytest.approx(twisted_bergman_norm(plain) ** 2, rel=1e-12)


def test_box_radius():
    assert twisted_box_radius(1, T, 8.0) > twisted_box_radius(1, T)
    a = 4 * math.pi
    with pytest.raises(InvalidParameterError):
        twisted_box_radius(1, T, a / math.tanh(2 * a * T) + 1.0)


@pytest.mark.slow
def test_finite_group_is_unitary(plain):
    base = twisted_bergman_norm(plain)
    for s in FiniteGroupElement.all(1, K1.order):
        assert twisted_bergman_norm(finite_group_act(s, plain)) == pytest.approx(base, rel=1e-6)


def test_finite_group_paths_agree(exact, plain):
    s = FiniteGroupElement((1,), 2)
    np.testing.assert_allclose(finite_group_act(s, plain).values, finite_group_act(s, exact).values, atol=1e-10 * np.max(np.abs(exact.values)))


def test_finite_group_identity(plain):
    np.testing.assert_allclose(finite_group_act(FiniteGroupElement((0,), 2), plain).values, plain.values)


def test_finite_group_rejects(plain):
    with pytest.raises(InvalidInputError):
        finite_group_act(FiniteGroupElement((1,), 4), plain)
    odd = BergmanSample(K1, T, SampledField(bergman_grid(1, 7, 1.0, 4), np.ones(7 * 7 * 16)))
    with pytest.raises(InvalidInputError):
        finite_group_act(FiniteGroupElement((1,), 2), odd)


def test_isotypic_pieces(plain):
    parts = {j: project_sector_j(plain, j) for j in K1.index_set}
    total = sum(P.values for P in parts.values())
    assert np.max(np.abs(total - plain.values)) < 1e-12 * np.max(np.abs(plain.values))
    assert sector_membership_residual(parts[(0,)], (0,)) < 1e-10
    assert sector_membership_residual(parts[(1,)], (1,)) < 1e-10
    assert sector_membership_residual(parts[(1,)], (0,)) > 1e-6


def test_isotypic_pieces_are_orthogonal(plain):
    p0, p1 = project_sector_j(plain, (0,)), project_sector_j(plain, (1,))
    cross = abs(twisted_bergman_inner(p0, p1))
    assert cross < 1e-8 * twisted_bergman_norm(p0) * twisted_bergman_norm(p1)


# ----------------------------- Inversion ----------------------------- #

def test_fourier_relation_on_isotypic_piece(exact):
    piece = project_sector_j(exact, (1,))
    for m in ((1,), (-1,), (2,)):
        assert C_m_relation_residual(piece, (1,), m) < 1e-10


def test_fourier_relation_needs_evaluator(plain):
    with pytest.raises(InvalidInputError):
        C_m_relation_residual(plain, (0,), (1,))


def test_extract_c0_of_zero():
    zero = BergmanSample(K1, T, SampledField(bergman_grid(1, 16, 0.1, 2), np.zeros(16 * 16 * 4)))
    C0 = extract_C0(zero, (0,))
    assert C0.grid.lo == (-3.0,)
    assert not np.any(C0.values)


def test_extract_c0_requires_membership(plain):
    with pytest.raises(InvalidInputError):
        extract_C0(plain, (0,))


def test_inversion_refuses_when_nothing_is_stable():
    zero = BergmanSample(K1, 0.1, SampledField(bergman_grid(1, 16, 0.1, 2), np.zeros(16 * 16 * 4)))
    with pytest.raises(IllPosedError):
        invert_sector_transform(zero, (0,), cap=1.0)


@pytest.fixture(scope="module")
def transformed():
    """T_t(V_{k,j} f) on the real slice for f = Phi_0 + Phi_2/2 shifted by a, j = (1,)."""
    j, t = (1,), 0.1
    a = K1.shift(j)

    def f(y):
        y = np.asarray(y) + a
        return hermite_eval_scaled((0,), K1.lam, y) + 0.5 * hermite_eval_scaled((2,), K1.lam, y)

    def func(z, w):
        return sector_transform_via_expansion(K1, j, f, t, CGroupPoint(z, w, np.zeros(z.shape[:-1])))

    return f, BergmanSample.from_function(K1, t, func, bergman_grid(1, 16, 0.1, 2))


@pytest.mark.slow
def test_inversion_round_trip(transformed):
    f, G = transformed
    line = Grid.cube(1, 4.0, 256)
    assert inversion_residuals(G, (1,), f, [6], line)[0] < 1e-6
    result = invert_sector_transform(G, (1,))
    assert result.amplification <= 1e8
    assert result.coeffs.max_degree == 6


@pytest.mark.slow
def test_inversion_cap(transformed):
    _, G = transformed
    with pytest.raises(IllPosedError) as info:
        invert_sector_transform(G, (1,), max_degree=8)
    assert info.value.alpha == (7,)
