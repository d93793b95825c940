import math

import mpmath
import numpy as np
import pytest

from nilheat.constants import mehler_constant
from nilheat.errors import (
    IllPosedError,
    InvalidInputError,
    InvalidParameterError,
    KernelOverflowError,
    RangeWarning,
    TruncationWarning,
)
from nilheat.hermite import (
    HermiteCoeffs,
    HermiteParams,
    hermite_bergman_grid,
    hermite_bergman_norm,
    hermite_bergman_weight,
    hermite_coefficients,
    hermite_eval,
    hermite_eval_complex,
    hermite_eval_scaled,
    hermite_semigroup_apply,
    hermite_semigroup_coeffs,
    hermite_synthesize,
    max_stable_degree,
    mehler_kernel,
    mehler_series,
    multi_indices,
    sample_entire,
)
from nilheat.numerics import Grid, SampledField, integrate

FOUR_PI = 4.0 * math.pi


def _mp_hermite_function(m, s):
    """Normalised Hermite function through mpmath's physicists' polynomial."""
    s = mpmath.mpf(s)
    norm = mpmath.sqrt(mpmath.power(2, m) * mpmath.factorial(m) * mpmath.sqrt(mpmath.pi))
    return mpmath.hermite(m, s) * mpmath.exp(-s * s / 2) / norm


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        HermiteParams(0.0, 0.1)
    with pytest.raises(InvalidParameterError):
        HermiteParams(1.0, 0.0)
    p = HermiteParams(-FOUR_PI, 0.1)
    assert p.eigenvalue((1, 0)) == pytest.approx(4 * FOUR_PI)
    assert p.eigenvalue(2, n=1) == pytest.approx(5 * FOUR_PI)


def test_multi_indices_graded_order():
    assert multi_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert len(multi_indices(3, 4)) == math.comb(4 + 3, 3)


def test_coeffs_reject_bad_index():
    with pytest.raises(InvalidInputError):
        HermiteCoeffs(2, {(1,): 1.0})
    with pytest.raises(InvalidInputError):
        HermiteCoeffs(1, {(-1,): 1.0})


def test_ground_state_values():
    assert hermite_eval((0,), [0.0]) == pytest.approx(math.pi ** -0.25)
    assert hermite_eval((1,), [0.0]) == pytest.approx(0.0, abs=1e-16)


@pytest.mark.parametrize("m,s", [(4, 1.3), (7, -0.4), (30, 2.5)])
def test_recurrence_matches_mpmath(m, s):
    assert hermite_eval((m,), [s]) == pytest.approx(float(_mp_hermite_function(m, s)), rel=1e-11, abs=1e-14)


def test_hermite_functions_are_normalised():
    grid = Grid.cube(1, 12.0, 512)
    for m in (0, 4, 9):
        f = SampledField.from_function(lambda x, m=m: hermite_eval((m,), x) ** 2, grid)
        assert integrate(f).real == pytest.approx(1.0, abs=1e-12)


def test_scaled_ground_state():
    assert hermite_eval_scaled((0,), FOUR_PI, [0.0]) == pytest.approx(math.sqrt(2.0))
    pts = np.array([0.1, 0.2])
    assert hermite_eval_scaled((0, 0), -FOUR_PI, pts) == pytest.approx(hermite_eval_scaled((0, 0), FOUR_PI, pts))
    with pytest.raises(InvalidParameterError):
        hermite_eval_scaled((0,), 0.0, [0.0])


def test_scaled_function_keeps_unit_norm():
    grid = Grid.cube(1, 3.0, 512)
    f = SampledField.from_function(lambda x: hermite_eval_scaled((2,), FOUR_PI, x), grid)
    assert f.norm() == pytest.approx(1.0, abs=1e-12)


def test_complex_evaluation():
    assert hermite_eval_complex((0,), [1j]) == pytest.approx(math.pi ** -0.25 * math.exp(0.5))
    xs = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_allclose(hermite_eval_complex((5,), xs.astype(complex)), hermite_eval((5,), xs), rtol=1e-13, atol=1e-15)
    z = 0.5 + 0.5j
    h3 = 8 * z**3 - 12 * z
    expected = h3 * np.exp(-z * z / 2) / math.sqrt(8 * 6 * math.sqrt(math.pi))
    assert hermite_eval_complex((3,), [z]) == pytest.approx(expected, rel=1e-13)


def test_complex_evaluation_warns_outside_stable_range():
    with pytest.warns(RangeWarning):
        hermite_eval_complex((2,), [25.0 + 0j])


def test_mehler_constant_pinned_by_ground_state():
    p = HermiteParams(FOUR_PI, 0.1)
    grid = Grid.cube(1, 3.0, 400)
    phi0 = SampledField.from_function(lambda u: hermite_eval_scaled((0,), FOUR_PI, u), grid)
    value = hermite_semigroup_apply(p, phi0, [0.0])
    assert value == pytest.approx(math.exp(-FOUR_PI * 0.1) * math.sqrt(2.0), rel=1e-10)
    assert mehler_constant(1, FOUR_PI) == pytest.approx(1.0)


def test_mehler_symmetric_and_even_in_lambda():
    p = HermiteParams(FOUR_PI, 0.05)
    q = HermiteParams(-FOUR_PI, 0.05)
    assert mehler_kernel(p, [0.3], [-0.2]) == pytest.approx(mehler_kernel(p, [-0.2], [0.3]))
    assert mehler_kernel(q, [0.3], [-0.2]) == pytest.approx(mehler_kernel(p, [0.3], [-0.2]))


def test_mehler_closed_form_equals_series():
    p = HermiteParams(FOUR_PI, 0.05)
    axis = np.linspace(-1, 1, 20)
    X, U = np.meshgrid(axis, axis, indexing="ij")
    closed = mehler_kernel(p, X[..., None], U[..., None])
    series = mehler_series(p, X[..., None], U[..., None], 80)
    assert np.max(np.abs(closed - series)) < 1e-10


def test_mehler_overflow():
    with pytest.raises(KernelOverflowError) as info:
        mehler_kernel(HermiteParams(FOUR_PI, 20.0), [0.0], [0.0])
    assert info.value.threshold > 0


@pytest.mark.parametrize("t", [0.05, 0.1])
def test_eigenrelation(rng, t):
    p = HermiteParams(FOUR_PI, t)
    grid = Grid.cube(1, 4.0, 400)
    x = rng.uniform(-2, 2, (50, 1))
    for m in range(7):
        f = SampledField.from_function(lambda u, m=m: hermite_eval_scaled((m,), FOUR_PI, u), grid)
        got = hermite_semigroup_apply(p, f, x)
        want = math.exp(-(2 * m + 1) * FOUR_PI * t) * hermite_eval_scaled((m,), FOUR_PI, x)
        assert np.max(np.abs(got - want)) < 1e-8


def test_semigroup_law():
    lam = FOUR_PI
    grid = Grid.cube(1, 4.0, 400)

    def f(u):
        return hermite_eval_scaled((0,), lam, u) + hermite_eval_scaled((3,), lam, u)

    start = SampledField.from_function(f, grid)
    once = SampledField(grid, hermite_semigroup_apply(HermiteParams(lam, 0.05), start, grid.mesh()))
    twice = hermite_semigroup_apply(HermiteParams(lam, 0.03), once, np.array([[0.0], [0.4], [-0.7]]))
    direct = hermite_semigroup_apply(HermiteParams(lam, 0.08), start, np.array([[0.0], [0.4], [-0.7]]))
    assert np.max(np.abs(twice - direct)) < 1e-8


def test_semigroup_apply_warns_on_undecayed_input():
    f = SampledField(Grid.cube(1, 1.0, 32), np.ones(32))
    with pytest.warns(TruncationWarning):
        hermite_semigroup_apply(HermiteParams(1.0, 0.1), f, [0.0])


def test_semigroup_apply_at_complex_point_matches_finer_grid():
    p = HermiteParams(1.0, 0.1)
    z = np.array([[0.1 + 0.3j]])
    coarse = hermite_semigroup_apply(p, SampledField.from_function(lambda u: np.exp(-u[..., 0] ** 2), Grid.cube(1, 8.0, 256)), z)
    fine = hermite_semigroup_apply(p, SampledField.from_function(lambda u: np.exp(-u[..., 0] ** 2), Grid.cube(1, 8.0, 512)), z)
    assert abs(coarse - fine) < 1e-8 * abs(fine)


def test_coefficients_round_trip():
    grid = Grid.cube(1, 3.0, 300)
    f = SampledField.from_function(
        lambda u: hermite_eval_scaled((0,), FOUR_PI, u) + 0.5 * hermite_eval_scaled((2,), FOUR_PI, u), grid
    )
    coeffs = hermite_coefficients(f, FOUR_PI, 4)
    assert coeffs.terms[(0,)] == pytest.approx(1.0, abs=1e-10)
    assert coeffs.terms[(2,)] == pytest.approx(0.5, abs=1e-10)
    assert abs(coeffs.terms[(1,)]) < 1e-10
    x = np.array([[0.0], [0.5]])
    np.testing.assert_allclose(hermite_synthesize(coeffs, FOUR_PI, x), f.values[[150, 175]], atol=1e-10)


def test_inverse_semigroup_is_capped():
    p = HermiteParams(FOUR_PI, 0.1)
    limit = max_stable_degree(p, 1)
    assert limit == 6
    ok = HermiteCoeffs(1, {(limit,): 1.0})
    restored = hermite_semigroup_coeffs(hermite_semigroup_coeffs(ok, p), p, inverse=True)
    assert restored.terms[(limit,)] == pytest.approx(1.0)
    with pytest.raises(IllPosedError) as info:
        hermite_semigroup_coeffs(HermiteCoeffs(1, {(limit + 1,): 1.0}), p, inverse=True)
    assert info.value.alpha == (limit + 1,)


def test_bergman_weight_examples():
    p = HermiteParams(FOUR_PI, 0.05)
    at_origin = hermite_bergman_weight(p, [0.0], [0.0])
    assert at_origin == pytest.approx(math.sqrt(8.0) * math.sinh(0.8 * math.pi) ** -0.5)
    assert hermite_bergman_weight(p, [0.3], [0.2]) == pytest.approx(hermite_bergman_weight(p, [-0.3], [-0.2]))


def test_bergman_weight_negative_lambda():
    p = HermiteParams(-FOUR_PI, 0.05)
    with pytest.raises(InvalidParameterError):
        hermite_bergman_weight(p, [0.0], [0.0])
    assert hermite_bergman_weight(p, [0.0], [0.0], use_abs=True) == pytest.approx(
        hermite_bergman_weight(HermiteParams(FOUR_PI, 0.05), [0.0], [0.0])
    )


def test_bergman_norm_is_homogeneous_and_zero_on_zero():
    p = HermiteParams(FOUR_PI, 0.02)
    grid = hermite_bergman_grid(p, 1, max_degree=1)
    F = sample_entire(lambda z: hermite_eval_complex((0,), z * math.sqrt(FOUR_PI)), grid)
    assert hermite_bergman_norm(F.with_values(0 * F.values), p) == 0.0
    assert hermite_bergman_norm(F.with_values(2 * F.values), p) == pytest.approx(2 * hermite_bergman_norm(F, p), rel=1e-12)


@pytest.mark.slow
def test_bergman_isometry_constant_over_degrees():
    lam, t = FOUR_PI, 0.02
    p = HermiteParams(lam, t)
    grid = hermite_bergman_grid(p, 1, max_degree=5)
    ratios = []
    for m in range(6):
        decay = math.exp(-(2 * m + 1) * lam * t)
        F = sample_entire(lambda z, m=m: decay * hermite_eval_scaled((m,), lam, z), grid)
        ratios.append(hermite_bergman_norm(F, p))
    ratios = np.asarray(ratios)
    assert (ratios.max() - ratios.min()) / ratios.mean() < 1e-6
    assert ratios.mean() == pytest.approx(1.0, rel=1e-6)
