import math

import mpmath
import numpy as np
import pytest

from nilheat.errors import AliasingError, InvalidInputError, NonConvergenceError, TruncationWarning
from nilheat.numerics import (
    GaussianBound,
    Grid,
    SampledField,
    evaluate,
    fourier_coefficient,
    fourier_series,
    gaussian_function,
    gaussian_radius,
    integrate,
    lattice_points,
    lattice_sum,
    spectral_shift,
)


def test_grid_rejects_degenerate_axes():
    with pytest.raises(InvalidInputError):
        Grid((0.0,), (0.0,), (8,))
    with pytest.raises(InvalidInputError):
        Grid((0.0,), (1.0,), (0,))
    with pytest.raises(InvalidInputError):
        Grid((0.0, 0.0), (1.0,), (8,))


def test_sampled_field_length_must_match_grid():
    with pytest.raises(InvalidInputError):
        SampledField(Grid.cell(2, 4), np.zeros(15))


def test_cube_has_centre_node():
    g = Grid.cube(1, 2.0, 8)
    assert 0.0 in g.axes()[0]
    assert g.spacing[0] == pytest.approx(0.5)


def test_integrate_constant_on_cell():
    f = SampledField(Grid.cell(2, 16), np.ones(256))
    assert integrate(f) == pytest.approx(1.0, abs=1e-15)


def test_integrate_gaussian(line_grid):
    f = SampledField.from_function(lambda x: np.exp(-x[..., 0] ** 2), line_grid)
    assert integrate(f).real == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_integrate_sine_over_period():
    f = SampledField.from_function(lambda x: np.sin(2 * np.pi * x[..., 0]), Grid.cell(1, 32))
    assert abs(integrate(f)) < 1e-15


def test_integrate_warns_on_undecayed_box():
    f = SampledField(Grid.cube(1, 1.0, 16), np.ones(16))
    with pytest.warns(TruncationWarning):
        integrate(f)


def test_integrate_is_linear(rng, line_grid):
    f = SampledField.from_function(gaussian_function(0.3, 0.8, 1.0, 0.4), line_grid)
    g = SampledField.from_function(gaussian_function(-0.5, 0.6), line_grid)
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = integrate(f.with_values(a * f.values + b * g.values))
    assert abs(lhs - a * integrate(f) - b * integrate(g)) < 1e-12 * (abs(a) + abs(b)) * line_grid.volume


def test_fourier_coefficient_of_central_character():
    grid = Grid((0.0,), (0.5,), (16,), (True,))
    f = SampledField.from_function(lambda xi: np.exp(4j * np.pi * xi[..., 0]), grid)
    assert fourier_coefficient(f, [1]) == pytest.approx(1.0, abs=1e-14)
    assert abs(fourier_coefficient(f, [2])) < 1e-14


def test_fourier_coefficient_of_cosine():
    f = SampledField.from_function(lambda x: 2 * np.cos(2 * np.pi * x[..., 0]), Grid.cell(1, 16))
    assert fourier_coefficient(f, [1]) == pytest.approx(1.0, abs=1e-14)
    assert fourier_coefficient(f, [-1]) == pytest.approx(1.0, abs=1e-14)


def test_fourier_coefficient_partial_axes_returns_field():
    grid = Grid.cell(2, 8)
    f = SampledField.from_function(lambda p: np.exp(2j * np.pi * p[..., 1]) * (1 + p[..., 0]), grid)
    slice_ = fourier_coefficient(f, [1], axes=[1])
    assert isinstance(slice_, SampledField)
    np.testing.assert_allclose(slice_.values, 1 + grid.select([0]).axes()[0], atol=1e-14)


def test_fourier_coefficient_aliasing():
    f = SampledField(Grid.cell(1, 16), np.ones(16))
    with pytest.raises(AliasingError):
        fourier_coefficient(f, [8])


def test_fourier_coefficient_needs_periodic_axis():
    f = SampledField(Grid.cube(1, 1.0, 16), np.ones(16))
    with pytest.raises(InvalidInputError):
        fourier_coefficient(f, [0])


def test_fourier_series_parseval(rng):
    values = rng.normal(size=32) + 1j * rng.normal(size=32)
    _, coeffs = fourier_series(values, 0)
    assert np.sum(np.abs(coeffs) ** 2) == pytest.approx(np.mean(np.abs(values) ** 2), rel=1e-12)


def test_lattice_sum_theta_value():
    res = lattice_sum(lambda m: np.exp(-np.pi * m[:, 0].astype(float) ** 2), 1, 6.0, 1e-12)
    oracle = float(mpmath.jtheta(3, 0, mpmath.exp(-mpmath.pi)))
    assert float(res.value) == pytest.approx(oracle, abs=1e-14)
    assert float(res.value) == pytest.approx(1.0864348, abs=1e-7)
    assert res.tail_bound < 1e-12


def test_lattice_sum_of_zero():
    res = lattice_sum(lambda m: np.zeros(len(m)), 2, 3.0, 1e-12)
    assert res.value == 0.0


def test_lattice_sum_reports_slow_decay():
    with pytest.raises(NonConvergenceError) as info:
        lattice_sum(lambda m: np.exp(-m[:, 0].astype(float) ** 2 / 8), 1, 1.0, 1e-12)
    assert info.value.estimate > 1e-12


def test_lattice_sum_radius_independence():
    bound = GaussianBound(1.0, math.pi)

    def term(m):
        return np.exp(-math.pi * np.sum(m.astype(float) ** 2, axis=1))

    inner = lattice_sum(term, 2, 4.0, 1e-10, bound)
    outer = lattice_sum(term, 2, 6.0, 1e-10, bound)
    assert abs(inner.value - outer.value) <= inner.tail_bound + outer.tail_bound
    oracle = float(mpmath.jtheta(3, 0, mpmath.exp(-mpmath.pi)) ** 2)
    assert float(outer.value) == pytest.approx(oracle, abs=1e-13)


def test_lattice_points_sorted_by_norm():
    pts = lattice_points(2, 1.0)
    assert len(pts) == 5
    assert tuple(pts[0]) == (0, 0)
    norms = np.sum(pts**2, axis=1)
    assert np.all(np.diff(norms) >= 0)


def test_lattice_points_around_centre():
    pts = lattice_points(1, 0.6, center=[2.5])
    assert sorted(int(p) for p in pts[:, 0]) == [2, 3]


def test_evaluate_field_at_nodes_and_outside():
    grid = Grid.cube(1, 1.0, 4)
    f = SampledField(grid, np.arange(4.0))
    np.testing.assert_allclose(evaluate(f, np.array([[-1.0], [0.5], [3.0]])), [0.0, 3.0, 0.0])
    with pytest.raises(InvalidInputError):
        evaluate(f, np.array([[0.1]]))


def test_spectral_shift_translates_gaussian(line_grid):
    x = line_grid.axes()[0]
    shifted = spectral_shift(np.exp(-x**2), [0.3], line_grid.spacing)
    np.testing.assert_allclose(shifted, np.exp(-(x + 0.3) ** 2), atol=1e-12)


def test_gaussian_radius():
    assert gaussian_radius(1.0) == pytest.approx(math.sqrt(math.log(1e14)))
    with pytest.raises(InvalidInputError):
        gaussian_radius(0.0)
