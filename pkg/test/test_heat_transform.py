import math

import numpy as np
import pytest

from nilheat.errors import InvalidInputError, InvalidParameterError
from nilheat.heat_transform import (
    SectorTransform,
    calibrate_c_lambda,
    central_sum,
    eigenbasis_scaling,
    expected_eigen_scaling,
    gaussian_central_transform,
    heat_transform_full,
    heat_transform_manifold,
    heat_transform_separable,
    intertwining_residual,
    manifold_kernel,
    manifold_kernel_norm,
    sector_heat_transform,
    sector_norms,
    torus_heat_extension,
)
from nilheat.heisenberg import GroupPoint, group_mul, heat_kernel
from nilheat.hermite import hermite_eval, hermite_eval_scaled
from nilheat.nilmanifold import (
    FiniteGroupElement,
    LatticeParams,
    ManifoldFunction,
    lattice_element,
    twisted_average,
    weil_brezin_field,
    weil_brezin_j,
)
from nilheat.numerics import Grid, SampledField, gaussian_function

K1 = LatticeParams(1, 1)


@pytest.fixture
def cosine_cell():
    cell = Grid.cell(2, 8)
    return SampledField(cell, np.cos(2 * np.pi * cell.mesh()[..., 0]))


# ----------------------------- Kernel series ----------------------------- #

def test_central_sum_is_poisson_summation():
    t = 0.1
    x, u, xi = np.array([0.2]), np.array([-0.1]), 0.15
    shifts = np.arange(-16, 17)
    g = GroupPoint(np.broadcast_to(x, (len(shifts), 1)), np.broadcast_to(u, (len(shifts), 1)), xi + 0.5 * shifts)
    direct = np.sum(heat_kernel(t, g))
    assert complex(central_sum(t, x, u, xi)) == pytest.approx(complex(direct), rel=1e-8)


def test_manifold_kernel_is_lattice_invariant(rng):
    t = 0.1
    g = GroupPoint(rng.uniform(0, 1, (4, 1)), rng.uniform(0, 1, (4, 1)), rng.uniform(0, 0.5, 4))
    p = GroupPoint([0.3], [0.6], 0.1)
    base = manifold_kernel(t, g, p)
    gam = lattice_element(np.array([1, -1, 1]), 1)
    moved_p = manifold_kernel(t, g, group_mul(gam, p))
    gams = lattice_element(np.broadcast_to(np.array([-1, 0, 2]), (4, 3)), 1)
    moved_g = manifold_kernel(t, group_mul(gams, g), p)
    peak = np.max(np.abs(base))
    assert np.max(np.abs(moved_p - base)) < 1e-10 * peak
    assert np.max(np.abs(moved_g - base)) < 1e-10 * peak


@pytest.mark.slow
def test_manifold_kernel_methods_agree():
    t = 0.1
    g = GroupPoint(np.array([[0.1], [0.7]]), np.array([[0.4], [0.2]]), np.array([0.05, 0.3]))
    p = GroupPoint([0.3], [0.6], 0.1)
    spectral = manifold_kernel(t, g, p)
    direct = manifold_kernel(t, g, p, method="direct")
    np.testing.assert_allclose(direct, spectral, rtol=1e-8)


def test_manifold_kernel_rejects():
    g = GroupPoint([0.1], [0.2], 0.0)
    with pytest.raises(InvalidParameterError):
        manifold_kernel(0.1, g, g, method="fft")
    with pytest.raises(InvalidInputError):
        manifold_kernel(0.1, g, GroupPoint(np.zeros((2, 1)), np.zeros((2, 1)), np.zeros(2)))
    with pytest.raises(InvalidInputError):
        manifold_kernel(0.1, g.as_complex(), g)


def test_heat_transform_preserves_constants():
    one = ManifoldFunction.from_function(1, lambda X: np.ones(X.shape[:-1]), 8)
    p = GroupPoint(np.array([[0.3], [0.9]]), np.array([[0.6], [0.1]]), np.array([0.1, 0.4]))
    np.testing.assert_allclose(heat_transform_manifold(one, 0.1, p), 1.0, rtol=1e-6)


def test_manifold_kernel_norm():
    p = GroupPoint([0.3], [0.6], 0.1)
    norm = manifold_kernel_norm(0.1, p, points=8)
    # integral one over a domain of volume 1/2
    assert norm >= math.sqrt(2.0) * (1 - 1e-6)
    gam = lattice_element(np.array([2, 1, -1]), 1)
    assert manifold_kernel_norm(0.1, group_mul(gam, p), points=8) == pytest.approx(norm, rel=1e-10)


# ----------------------------- T_t on H ----------------------------- #

@pytest.mark.slow
def test_full_transform_matches_separable_route():
    t, sigma, width = 0.1, 0.3, 0.2

    def f(X):
        return np.exp(-(X[..., 0] ** 2 + X[..., 1] ** 2) / (2 * sigma**2) - X[..., 2] ** 2 / (2 * width**2))

    box = SampledField.from_function(f, Grid((-2.2, -2.2, -1.4), (2.2, 2.2, 1.4), (32, 32, 32)))
    phi = SampledField.from_function(lambda X: np.exp(-np.sum(X * X, axis=-1) / (2 * sigma**2)), Grid.cube(2, 2.2, 32))
    p = GroupPoint(np.array([[0.1], [-0.2]]), np.array([[0.05], [0.3]]), np.array([0.0, 0.2]))
    full = heat_transform_full(box, t, p)
    separable = heat_transform_separable(phi, gaussian_central_transform(width), t, p)
    np.testing.assert_allclose(full, separable, rtol=1e-8)


def test_full_transform_needs_odd_dimension():
    with pytest.raises(InvalidInputError):
        heat_transform_full(SampledField(Grid.cube(2, 1.0, 4), np.zeros(16)), 0.1, GroupPoint([0.0], [0.0], 0.0))


def test_gaussian_central_transform():
    psi = gaussian_central_transform(0.5, 0.25)
    assert psi(np.array(0.0)) == pytest.approx(0.5 * math.sqrt(2 * math.pi))
    assert abs(psi(np.array(2.0))) == pytest.approx(0.5 * math.sqrt(2 * math.pi) * math.exp(-0.5))


# ----------------------------- Sector routes ----------------------------- #

def test_torus_extension(cosine_cell):
    t = 0.1
    pts = np.array([[0.1, 0.3], [0.25 + 0.1j, 0.5 - 0.2j]])
    want = math.exp(-4 * math.pi**2 * t) * np.cos(2 * np.pi * pts[:, 0])
    np.testing.assert_allclose(torus_heat_extension(cosine_cell, t, pts), want, rtol=1e-12)
    with pytest.raises(InvalidInputError):
        torus_heat_extension(SampledField(Grid.cube(2, 1.0, 4), np.zeros(16)), t, pts)


def test_convolution_route_on_the_torus(cosine_cell):
    t = 0.05
    pts = np.array([[0.1, 0.3], [0.6, 0.8]])
    got = sector_heat_transform(cosine_cell, t, pts)
    assert got.k == 0 and got.prefactor == 1.0
    np.testing.assert_allclose(got.value(), torus_heat_extension(cosine_cell, t, pts), rtol=1e-10)


def test_sector_heat_transform_rejects(cosine_cell):
    with pytest.raises(InvalidInputError):
        sector_heat_transform(cosine_cell, 0.1, np.zeros((1, 3)))
    with pytest.raises(InvalidInputError):
        sector_heat_transform(SampledField(Grid.cube(2, 1.0, 4), np.zeros(16)), 0.1, np.zeros((1, 2)))
    with pytest.raises(InvalidInputError):
        sector_heat_transform(np.zeros((4, 4)), 0.1, np.zeros((1, 2)))


def test_sector_transform_factors():
    st = SectorTransform(1, 0.1, np.ones(2))
    assert st.prefactor == pytest.approx(math.exp(-0.1 * 16 * math.pi**2))
    assert st.character(0.25) == pytest.approx(-1.0)
    np.testing.assert_allclose(st.value(0.25), -st.prefactor * np.ones(2))


def test_intertwining():
    S = weil_brezin_field(K1, (1,), gaussian_function(0.1, 0.5), 16)
    pts = np.array([[0.2 + 0.05j, 0.4 - 0.1j], [0.7, 0.1 + 0.05j]])
    assert intertwining_residual(S, FiniteGroupElement((1,), 2), 0.1, pts) < 1e-8


def test_expected_eigen_scaling():
    lam = 4 * math.pi
    assert expected_eigen_scaling(K1, 2, 0.1) == pytest.approx(math.exp(-0.1 * lam * lam - 5 * lam * 0.1))


@pytest.mark.parametrize("alpha", [0, 1, 3])
def test_eigen_scaling(rng, alpha):
    t = 0.1
    pts = rng.uniform(0.0, 1.0, (5, 2))
    j = (1,)
    a = K1.shift(j)
    V = weil_brezin_j(K1, j, lambda y: hermite_eval_scaled((alpha,), K1.lam, np.asarray(y) + a), GroupPoint(pts[:, :1], pts[:, 1:], np.zeros(5)))
    ratio = eigenbasis_scaling(K1, j, (alpha,), t, pts)
    expected = expected_eigen_scaling(K1, alpha, t)
    err = np.max(np.abs(ratio - expected) * np.abs(V)) / (expected * np.max(np.abs(V)))
    assert err < 1e-5


@pytest.mark.slow
def test_c_lambda_is_one():
    ratio = calibrate_c_lambda(K1, (0,), lambda y: hermite_eval((0,), y), 0.1, [0.3, 0.7], 32, Grid.cube(1, 8.0, 256))
    assert ratio == pytest.approx(1.0, abs=1e-5)


# ----------------------------- Sector norms ----------------------------- #

@pytest.fixture(scope="module")
def mixed():
    ground = weil_brezin_field(K1, (0,), lambda y: hermite_eval_scaled((0,), K1.lam, y), 16)
    cell = ground.grid
    negative = twisted_average(LatticeParams(1, -1), gaussian_function([0.5, 0.5], 0.3), points=16)
    sectors = {0: SampledField(cell, np.ones(cell.size)), 1: ground.field, -1: negative.field}
    return ManifoldFunction.from_sectors(1, sectors, 8)


def test_sector_norms_rejects_convention(mixed):
    with pytest.raises(InvalidParameterError):
        sector_norms(mixed, 0.1, convention="raw")


@pytest.mark.slow
def test_sector_norms_rows(mixed):
    t = 0.02
    rows = {(r.k, r.j): r for r in sector_norms(mixed, t, cell_points=8, imag_points=32)}
    assert set(rows) == {(0, None), (1, (0,)), (1, (1,)), (-1, None)}
    assert rows[(0, None)].l2_norm == pytest.approx(math.sqrt(0.5), rel=1e-12)
    assert rows[(0, None)].transform_norm == pytest.approx(1.0, rel=1e-8)
    # a Weil-Brezin field is split evenly between the two matrix coefficient pieces
    assert rows[(1, (0,))].l2_norm == pytest.approx(0.5, rel=1e-8)
    assert rows[(1, (1,))].l2_norm == pytest.approx(0.5, rel=1e-8)
    assert rows[(-1, None)].transform_norm is None
    raw = {(r.k, r.j): r for r in sector_norms(mixed, t, convention="prop44", cell_points=8, imag_points=32)}
    lam = K1.lam
    for j in K1.index_set:
        assert rows[(1, j)].transform_norm == pytest.approx(math.exp(t * lam * lam) * raw[(1, j)].transform_norm, rel=1e-12)


@pytest.mark.slow
def test_sector_norms_energy_matches_field(mixed):
    rows = sector_norms(mixed, 0.02, cell_points=4, imag_points=8)
    assert sum(r.l2_norm ** 2 for r in rows) == pytest.approx(mixed.field.norm() ** 2, rel=1e-8)
