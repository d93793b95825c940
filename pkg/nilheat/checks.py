"""
Verification checks: one registered function per numerical identity the library
claims.  Each check draws its randomness from a generator seeded by the run seed
and its own id, so a report is reproducible check by check and independent of the
worker schedule.

A check returns an Outcome; run_check wraps it into a CheckResult with timing,
captured warnings and the pass decision.
"""

from __future__ import annotations

import fnmatch
import logging
import math
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import mpmath
import numpy as np

from .bergman import (
    BergmanSample,
    C_m_relation_residual,
    bergman_grid,
    finite_group_act,
    inversion_residuals,
    project_sector_j,
    torus_bergman_norm,
    twisted_bergman_inner,
    twisted_bergman_norm,
)
from .config import RunConfig
from .errors import NilheatError, NonConvergenceError, TruncationWarning
from .heat_transform import (
    calibrate_c_lambda,
    eigenbasis_scaling,
    expected_eigen_scaling,
    gaussian_central_transform,
    heat_transform_manifold,
    heat_transform_separable,
    intertwining_residual,
    sector_heat_transform,
    sector_transform_via_expansion,
    sector_transform_via_hermite,
    semigroup_residual,
    torus_heat_extension,
)
from .heisenberg import (
    CGroupPoint,
    GroupPoint,
    group_inv,
    group_mul,
    heat_kernel,
    p_kernel,
    twisted_convolution,
    twisted_kernel,
)
from .hermite import (
    HermiteParams,
    hermite_bergman_grid,
    hermite_bergman_norm,
    hermite_eval,
    hermite_eval_scaled,
    hermite_semigroup_apply,
    mehler_kernel,
    mehler_series,
    multi_indices,
    sample_entire,
)
from .nilmanifold import (
    FiniteGroupElement,
    LatticeParams,
    ManifoldFunction,
    SectorFunction,
    average,
    average_field,
    fourier_transform,
    lattice_element,
    matrix_coefficient,
    matrix_coefficient_field,
    nu_pair,
    sector_inner,
    sector_norm,
    twisted_average,
    twisted_periodize,
    weil_brezin_field,
    weil_brezin_j,
)
from .numerics import (
    GaussianBound,
    Grid,
    SampledField,
    fourier_coefficient,
    gaussian_function,
    integrate,
    lattice_sum,
)
from .report import CheckResult

logger = logging.getLogger(__name__)

MODES = ("abs", "constancy", "at_least")

Number = Union[float, complex]


@dataclass
class Outcome:
    """What a check measured.

    mode ``abs`` passes when |computed - expected| <= tolerance, ``constancy`` when the
    relative spread in ``computed`` is at most tolerance, ``at_least`` when
    computed >= expected.
    """

    computed: Number
    expected: Union[Number, str]
    tolerance: float
    mode: str = "abs"
    tail_bound: Optional[float] = None
    detail: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown outcome mode {self.mode!r}; expected one of {MODES}")

    def passed(self) -> bool:
        value = complex(self.computed)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            return False
        if self.mode == "constancy":
            return abs(value) <= self.tolerance
        if self.mode == "at_least":
            return value.real >= float(self.expected)
        return abs(value - complex(self.expected)) <= self.tolerance


CheckFunc = Callable[[RunConfig, np.random.Generator], Outcome]


@dataclass(frozen=True)
class RegisteredCheck:
    check_id: str
    reference: str
    func: CheckFunc
    ref: Optional[str] = None


REGISTRY: Dict[str, RegisteredCheck] = {}


def check(check_id: str, reference: str, ref: Optional[str] = None) -> Callable[[CheckFunc], CheckFunc]:
    """Register a check under a unique id; ``ref`` keys the claim it verifies and is unique too."""

    def wrap(func: CheckFunc) -> CheckFunc:
        if check_id in REGISTRY:
            raise ValueError(f"duplicate check id {check_id!r}")
        if ref is not None and any(entry.ref == ref for entry in REGISTRY.values()):
            raise ValueError(f"duplicate claim ref {ref!r}")
        REGISTRY[check_id] = RegisteredCheck(check_id, reference, func, ref)
        return func

    return wrap


# ----------------------------- Helpers ----------------------------- #

def _points(cfg: RunConfig, length: float, minimum: int = 8) -> int:
    """Node count for an interval of the given length at the configured density, even.

    A density below ``minimum`` nodes is raised to it with a TruncationWarning, so the
    check runs but is reported as failed.
    """
    pts = int(round(cfg.grid * length))
    if pts < minimum:
        warnings.warn(
            f"grid {cfg.grid} gives {pts} nodes over length {length:g}; raised to {minimum}", TruncationWarning, stacklevel=2
        )
        pts = minimum
    return pts + pts % 2


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    peak = float(np.max(np.abs(b))) or 1.0
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / peak


def _spread(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    return float((arr.max() - arr.min()) / abs(arr.mean()))


def _complex_points(rng: np.random.Generator, count: int, dim: int, imag: float = 0.1) -> np.ndarray:
    return rng.uniform(0.0, 1.0, (count, dim)) + 1j * rng.uniform(-imag, imag, (count, dim))


def _random_gaussian(rng: np.random.Generator, n: int, widths=(0.4, 0.7)) -> Callable[[np.ndarray], np.ndarray]:
    return gaussian_function(
        rng.uniform(-0.5, 0.5, n),
        float(rng.uniform(*widths)),
        complex(rng.normal(), rng.normal()),
        rng.uniform(-1.0, 1.0, n),
    )


def _translated_kernel(lam: float, t: float, v: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """X -> e^{-i lam/2 (u.v_x - x.v_u)} p_t^lam(X - v); entire in X."""
    v = np.asarray(v, dtype=float)
    n = len(v) // 2

    def f(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X)
        x, u = X[..., :n], X[..., n:]
        d = X - v
        omega = np.sum(u * v[:n], axis=-1) - np.sum(x * v[n:], axis=-1)
        return np.exp(-0.5j * lam * omega) * p_kernel(lam, t, d[..., :n], d[..., n:])

    return f


# ----------------------------- numerics ----------------------------- #

@check("numerics.linearity", "quadrature is linear in the integrand")
def _numerics_linearity(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    grid = Grid.cube(2, 7.0, _points(cfg, 14.0))
    f = SampledField.from_function(gaussian_function(rng.uniform(-1, 1, 2), 0.7, 1.0, rng.uniform(-1, 1, 2)), grid)
    g = SampledField.from_function(gaussian_function(rng.uniform(-1, 1, 2), 0.5), grid)
    a, b = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
    lhs = integrate(f.with_values(a * f.values + b * g.values))
    diff = abs(lhs - a * integrate(f) - b * integrate(g))
    scale = (abs(a) * float(np.max(np.abs(f.values))) + abs(b) * float(np.max(np.abs(g.values)))) * grid.volume
    return Outcome(diff / scale, 0.0, 1e-12)


@check("numerics.parseval", "Fourier coefficients on the cell satisfy Parseval")
def _numerics_parseval(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    grid = Grid.cell(2, 16)
    modes = [(a, b) for a in range(-4, 5) for b in range(-4, 5)]
    coeffs = rng.normal(size=len(modes)) + 1j * rng.normal(size=len(modes))
    mesh = grid.mesh()
    values = sum(c * np.exp(2j * np.pi * (mesh @ np.asarray(m, dtype=float))) for c, m in zip(coeffs, modes))
    f = SampledField(grid, values)
    total = sum(abs(fourier_coefficient(f, (a, b))) ** 2 for a in range(-7, 8) for b in range(-7, 8))
    mean_sq = integrate(f.with_values(np.abs(values) ** 2), check_decay=False).real / grid.volume
    return Outcome(abs(total - mean_sq) / mean_sq, 0.0, 1e-10, detail={"coefficients": float(np.sum(np.abs(coeffs) ** 2))})


@check("numerics.lattice_radius", "a lattice sum grown by two shells moves by less than its tail bounds")
def _numerics_lattice_radius(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    bound = GaussianBound(1.0, math.pi)

    def term(ms: np.ndarray) -> np.ndarray:
        return np.exp(-math.pi * np.sum(ms.astype(float) ** 2, axis=1))

    inner = lattice_sum(term, 2, 3.0, 1e-8, bound)
    outer = lattice_sum(term, 2, 5.0, 1e-8, bound)
    oracle = float(mpmath.jtheta(3, 0, mpmath.exp(-mpmath.pi)) ** 2)
    return Outcome(
        abs(float(inner.value) - float(outer.value)),
        0.0,
        inner.tail_bound + outer.tail_bound,
        tail_bound=outer.tail_bound,
        detail={"theta_oracle_error": abs(float(outer.value) - oracle), "terms": outer.terms},
    )


# ----------------------------- hermite ----------------------------- #

def _hermite_grid(cfg: RunConfig, n: int) -> Grid:
    return Grid.cube(n, 4.0, _points(cfg, 8.0) if n == 1 else 3 * cfg.grid)


@check("hermite.eigenrelation", "e^{-tH} Phi_alpha = e^{-(2|alpha|+n)|lam|t} Phi_alpha through the Mehler kernel", ref="sec4-eigen")
def _hermite_eigenrelation(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    n, lam = cfg.n, 4.0 * math.pi
    grid = _hermite_grid(cfg, n)
    x = rng.uniform(-2.0, 2.0, (50, n))
    worst = 0.0
    for t in (0.05, 0.1):
        p = HermiteParams(lam, t)
        for alpha in multi_indices(n, 6):
            f = SampledField.from_function(lambda y, a=alpha: hermite_eval_scaled(a, lam, y), grid)
            got = hermite_semigroup_apply(p, f, x)
            want = math.exp(-p.eigenvalue(alpha) * t) * hermite_eval_scaled(alpha, lam, x)
            worst = max(worst, float(np.max(np.abs(got - want))))
    return Outcome(worst, 0.0, 1e-8)


@check("hermite.semigroup", "e^{-sH} e^{-tH} = e^{-(t+s)H} on Phi_0 + Phi_3", ref="sec4-semigroup")
def _hermite_semigroup(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    n, lam, t, s = cfg.n, 4.0 * math.pi, 0.05, 0.1
    grid = _hermite_grid(cfg, n)
    three = (3,) + (0,) * (n - 1)
    f = SampledField.from_function(lambda y: hermite_eval_scaled((0,) * n, lam, y) + hermite_eval_scaled(three, lam, y), grid)
    x = rng.uniform(-2.0, 2.0, (50, n))
    step = f.with_values(hermite_semigroup_apply(HermiteParams(lam, t), f, grid.mesh()).reshape(grid.points))
    two = hermite_semigroup_apply(HermiteParams(lam, s), step, x)
    one = hermite_semigroup_apply(HermiteParams(lam, t + s), f, x)
    return Outcome(float(np.max(np.abs(two - one))), 0.0, 1e-8)


@check("hermite.mehler_series", "closed Mehler kernel equals its eigenfunction series", ref="eq-mehler")
def _hermite_mehler_series(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    axis = np.linspace(-1.0, 1.0, 20)
    X, U = np.meshgrid(axis, axis, indexing="ij")
    p = HermiteParams(4.0 * math.pi, 0.05)
    closed = mehler_kernel(p, X[..., None], U[..., None])
    series = mehler_series(p, X[..., None], U[..., None], 80)
    return Outcome(float(np.max(np.abs(closed - series))), 0.0, 1e-10, detail={"peak": float(np.max(np.abs(closed)))})


@check("hermite.bergman_isometry", "e^{-tH} is an isometry from L2 onto the Hermite-Bergman space", ref="thm42")
def _hermite_bergman_isometry(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    p = HermiteParams(4.0 * math.pi, 0.02)
    grid = hermite_bergman_grid(p, 1, max_degree=5)
    ratios = []
    for a in range(6):
        factor = math.exp(-p.eigenvalue((a,)) * p.t)
        F = sample_entire(lambda z, a=a, c=factor: c * hermite_eval_scaled((a,), p.lam, z), grid)
        ratios.append(hermite_bergman_norm(F, p))
    spread = _spread(ratios)
    return Outcome(spread, "constancy", 1e-6, mode="constancy", detail={"ratio": float(np.mean(ratios))})


# ----------------------------- heisenberg ----------------------------- #

@check("heisenberg.associativity", "the group law is associative with the stated inverse", ref="sec21-law")
def _heisenberg_associativity(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    n = cfg.n

    def draw() -> GroupPoint:
        return GroupPoint(rng.uniform(-3, 3, (100, n)), rng.uniform(-3, 3, (100, n)), rng.uniform(-3, 3, 100))

    a, b, c = draw(), draw(), draw()
    left = group_mul(group_mul(a, b), c)
    right = group_mul(a, group_mul(b, c))
    err = float(np.max(np.abs(left.coords() - right.coords())))
    unit = group_mul(a, group_inv(a))
    inverse_err = float(np.max(np.abs(unit.coords())))
    return Outcome(max(err, inverse_err), 0.0, 1e-12, detail={"inverse": inverse_err})


@check("heisenberg.twisted_semigroup", "p_t *_lam p_s = p_{t+s} for lam = +-4 pi", ref="sec4-twisted")
def _heisenberg_twisted_semigroup(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    pts = rng.uniform(-1.0, 1.0, (20, 2))
    worst = 0.0
    for lam in (4.0 * math.pi, -4.0 * math.pi):
        for t, s in ((0.05, 0.05), (0.05, 0.1)):
            rate = 0.25 * abs(lam) / math.tanh(abs(lam) * t)
            radius = math.sqrt(math.log(1e14) / rate) + 1.0
            grid = Grid.cube(2, radius, _points(cfg, 2.0 * radius))
            f = SampledField.from_function(lambda X, lam=lam, t=t: p_kernel(lam, t, X[..., :1], X[..., 1:]), grid)
            got = twisted_convolution(lam, f, twisted_kernel(lam, s), pts)
            want = p_kernel(lam, t + s, pts[:, :1], pts[:, 1:])
            worst = max(worst, _rel(got, want))
    return Outcome(worst, 0.0, 1e-6)


@check("heisenberg.partial_fourier", "int k_t e^{i lam xi} d xi = e^{-t lam^2} p_t^lam", ref="sec4-partial")
def _heisenberg_partial_fourier(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    t, h = 0.02, 0.01
    xi = -0.6 + h * np.arange(120)
    pts = rng.uniform(-0.2, 0.2, (8, 2 * cfg.n))
    n = cfg.n
    g = GroupPoint(np.broadcast_to(pts[:, None, :n], (8, 120, n)), np.broadcast_to(pts[:, None, n:], (8, 120, n)), np.broadcast_to(xi, (8, 120)))
    kern = heat_kernel(t, g, cfg.lambda_nodes)
    worst = 0.0
    for lam in (4.0 * math.pi, -4.0 * math.pi, 8.0 * math.pi, -8.0 * math.pi):
        got = np.sum(kern * np.exp(1j * lam * xi), axis=1) * h
        want = math.exp(-t * lam * lam) * p_kernel(lam, t, pts[:, :n], pts[:, n:])
        worst = max(worst, _rel(got, want))
    return Outcome(worst, 0.0, 1e-6)


@check("heisenberg.holomorphy", "the continued heat kernel satisfies Cauchy-Riemann in every coordinate", ref="sec22-extension")
def _heisenberg_holomorphy(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    n, t, h = cfg.n, cfg.t, 1e-4
    x = rng.uniform(-1, 1, (10, n)) + 1j * rng.uniform(-0.2, 0.2, (10, n))
    u = rng.uniform(-1, 1, (10, n)) + 1j * rng.uniform(-0.2, 0.2, (10, n))
    xi = rng.uniform(-0.2, 0.2, 10) + 1j * rng.uniform(-0.05, 0.05, 10)

    def K(x_, u_, xi_):
        return heat_kernel(t, CGroupPoint(x_, u_, xi_), cfg.lambda_nodes)

    worst = 0.0
    for coord in range(2 * n + 1):
        def moved(step: complex):
            xs, us, xis = x.copy(), u.copy(), xi.copy()
            if coord < n:
                xs[:, coord] += step
            elif coord < 2 * n:
                us[:, coord - n] += step
            else:
                xis += step
            return K(xs, us, xis)

        d_re = (moved(h) - moved(-h)) / (2 * h)
        d_im = (moved(1j * h) - moved(-1j * h)) / (2 * h)
        peak = float(np.max(np.abs(d_re))) or 1.0
        worst = max(worst, float(np.max(np.abs(d_re + 1j * d_im))) / peak)
    return Outcome(worst, 0.0, 1e-6)


# ----------------------------- nilmanifold ----------------------------- #

@check("nilmanifold.average_invariance", "A(F)(gamma g) = A(F)(g) for lattice elements gamma", ref="sec21-average")
def _nilmanifold_average_invariance(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    n = cfg.n

    def F(g: GroupPoint) -> np.ndarray:
        return np.exp(-(np.sum(g.x ** 2, axis=-1) + np.sum(g.u ** 2, axis=-1)) / 0.1 - g.xi ** 2 / 0.02)

    worst = 0.0
    for _ in range(20):
        m = rng.integers(-1, 2, 2 * n + 1)
        gam = lattice_element(m, n)
        g = GroupPoint(rng.uniform(-0.25, 0.25, n), rng.uniform(-0.25, 0.25, n), float(rng.uniform(-0.25, 0.25)))
        base = average(F, g, cfg.radius, cfg.tol)
        moved = average(F, group_mul(gam, g), cfg.radius, cfg.tol)
        worst = max(worst, abs(moved - base) / (abs(base) or 1.0))
    return Outcome(worst, 0.0, 1e-10)


@check("nilmanifold.twisted_average_intertwining", "A_lam(f *_lam p_t) = (A_lam f) *_lam p_t", ref="sec21-twisted-average")
def _nilmanifold_twisted_average_intertwining(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    lam, t = -params.lam, cfg.t
    centre = rng.uniform(0.0, 1.0, 2)
    f = gaussian_function(centre, 0.3, complex(rng.normal(), rng.normal()))
    # tiling reads the cell samples through the sector law
    S = SectorFunction(params, twisted_average(params, f, _points(cfg, 1.0)).field)
    pts = rng.uniform(0.0, 1.0, (20, 2))
    lhs = sector_heat_transform(S, t, pts).convolution
    grid = Grid.cube(2, 3.0, _points(cfg, 6.0), center=centre)
    sampled = SampledField.from_function(f, grid)
    kernel = twisted_kernel(lam, t)

    def evolved(X: np.ndarray) -> np.ndarray:
        return twisted_convolution(lam, sampled, kernel, X)

    rhs = twisted_periodize(lam, evolved, pts, radius=7.0)
    return Outcome(_rel(lhs, rhs), 0.0, 1e-6)


@check("nilmanifold.sector_orthogonality", "matrix coefficient fields of distinct j are orthogonal in L2(M)", ref="prop36")
def _nilmanifold_sector_orthogonality(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    cell = _points(cfg, 1.0)
    cell += (-cell) % params.order
    f = gaussian_function(rng.uniform(-0.5, 0.5, 1), 0.6, complex(rng.normal(), rng.normal()))
    g = gaussian_function(rng.uniform(-0.5, 0.5, 1), 0.8, complex(rng.normal(), rng.normal()))
    fs = {j: matrix_coefficient_field(params, j, f, cell) for j in params.index_set}
    gs = {j: matrix_coefficient_field(params, j, g, cell) for j in params.index_set}
    worst = 0.0
    for j in params.index_set:
        for jj in params.index_set:
            if j == jj:
                continue
            inner = abs(sector_inner(fs[j], gs[jj]))
            worst = max(worst, inner / (sector_norm(fs[j]) * sector_norm(gs[jj])))
    return Outcome(worst, 0.0, 1e-8)


@check("nilmanifold.norm_ratio", "||M_{k,j} f||_M / ||f|| is one constant across f, k and j", ref="lem35")
def _nilmanifold_norm_ratio(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    cell = 2 * cfg.grid
    cell += (-cell) % 4
    line = Grid((-4.0,), (4.0,), (8 * cell,))
    lam = 4.0 * math.pi
    funcs: List[Callable[[np.ndarray], np.ndarray]] = [
        (lambda y, a=a: hermite_eval_scaled((a,), lam, y)) for a in range(6)
    ]
    for _ in range(4):
        parts = [gaussian_function(rng.uniform(-0.5, 0.5, 1), float(rng.uniform(0.25, 0.45)), complex(rng.normal(), rng.normal())) for _ in range(3)]
        funcs.append(lambda y, parts=parts: sum(p(y) for p in parts))
    normalized: List[float] = []
    constants: Dict[str, float] = {}
    for k in (1, 2):
        params = LatticeParams(1, k)
        per_k = []
        for f in funcs:
            base = SampledField.from_function(f, line).norm()
            for j in params.index_set:
                G = matrix_coefficient_field(params, j, f, cell)
                per_k.append(sector_norm(G) / base)
        normalized.extend(r * (2.0 * k) ** 0.5 for r in per_k)
        constants[f"constant_k{k}"] = float(np.mean(per_k))
    spread = _spread(normalized)
    detail = dict(constants, stated=math.sqrt(2.0), expected_k1=math.sqrt(0.5 / 2.0))
    return Outcome(spread, "constancy", 1e-6, mode="constancy", detail=detail)


@check("nilmanifold.pi_eigenrelation", "nu_j(Pi(s) f) = e^{i pi s.j/k} nu_j(f) in both forms", ref="sec41-symmetry")
def _nilmanifold_pi_eigenrelation(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    grid = Grid.cube(1, 7.0, 896)
    worst, peak = 0.0, 0.0
    for k in (1, 2):
        params = LatticeParams(1, k)
        f = _random_gaussian(rng, 1)
        for j in params.index_set:
            base_f = nu_pair(params, j, f, "fourier", grid=grid)
            base_p = nu_pair(params, j, f, "poisson")
            peak = max(peak, abs(base_f), abs(base_p))
            for s in range(1, params.order):
                shift = s / params.order
                fs = lambda y, shift=shift: f(np.asarray(y) + shift)
                eig = complex(np.exp(1j * math.pi * s * j[0] / k))
                worst = max(
                    worst,
                    abs(nu_pair(params, j, fs, "poisson") - eig * base_p),
                    abs(nu_pair(params, j, fs, "fourier", grid=grid) - eig * base_f),
                )
    return Outcome(worst / (peak or 1.0), 0.0, 1e-10)


@check("nilmanifold.poisson_duality", "the Fourier and Poisson forms of nu_j agree", ref="prop31")
def _nilmanifold_poisson_duality(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    grid = Grid.cube(1, 7.0, 896)
    worst = 0.0
    index = params.index_set
    for _ in range(10):
        f = _random_gaussian(rng, 1, (0.3, 0.8))
        j = index[int(rng.integers(len(index)))]
        worst = max(worst, abs(nu_pair(params, j, f, "fourier", grid=grid) - nu_pair(params, j, f, "poisson")))
    unit = LatticeParams(1, 1)
    gauss = gaussian_function(0.0, 1.0 / math.sqrt(2.0 * math.pi))
    reference = nu_pair(unit, (0,), gauss, "poisson")
    return Outcome(worst, 0.0, 1e-10, detail={"gaussian_nu0": reference.real})


@check("nilmanifold.matrix_coefficient_identity", "M_{k,j}(f, nu)(x,u,xi) = V_{k,j} g_j at (u,-x,xi) with g_j(s) = f^(2ks + j)", ref="prop34")
def _nilmanifold_matrix_coefficient_identity(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    f = gaussian_function(rng.uniform(-0.5, 0.5, 1), 0.5, complex(rng.normal(), rng.normal()), rng.uniform(-1, 1, 1))
    sampled = SampledField.from_function(f, Grid.cube(1, 6.0, 768))
    pts = rng.uniform(-1.0, 1.0, (20, 3))
    worst = 0.0
    for j in params.index_set:
        jv = float(j[0])

        def g_j(s: np.ndarray, jv=jv) -> np.ndarray:
            return fourier_transform(sampled, params.order * np.asarray(s) + jv)

        lhs = matrix_coefficient(params, j, f, GroupPoint(pts[:, :1], pts[:, 1:2], pts[:, 2]))
        rhs = weil_brezin_j(params, j, g_j, GroupPoint(pts[:, 1:2], -pts[:, :1], pts[:, 2]))
        worst = max(worst, _rel(rhs, lhs))
    return Outcome(worst, 0.0, 1e-6)


@check("nilmanifold.averaging_equivariance", "T_t^Gamma(A F) = A(T_t F) at complex points", ref="lem24")
def _nilmanifold_averaging_equivariance(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    t, sigma, width = cfg.t, 0.3, 0.1
    centre = rng.uniform(0.3, 0.7, 2)
    xi0 = float(rng.uniform(0.1, 0.4))

    def phi_fn(X: np.ndarray) -> np.ndarray:
        return np.exp(-np.sum((X - centre) ** 2, axis=-1) / (2 * sigma * sigma))

    def F(g: GroupPoint) -> np.ndarray:
        X = np.concatenate([g.x, g.u], axis=-1)
        return phi_fn(X) * np.exp(-(g.xi - xi0) ** 2 / (2 * width * width))

    phi = SampledField.from_function(phi_fn, Grid.cube(2, 2.3, 32, center=centre))
    central = gaussian_central_transform(width, xi0)
    AF = average_field(F, 1, _points(cfg, 0.75), _points(cfg, 0.5), cfg.radius)
    zw = _complex_points(rng, 5, 2)
    zeta = rng.uniform(0.0, 0.5, 5) + 1j * rng.uniform(-0.05, 0.05, 5)
    p = CGroupPoint(zw[:, :1], zw[:, 1:], zeta)
    lhs = heat_transform_manifold(AF, t, p)

    def evolved(g: GroupPoint) -> np.ndarray:
        return heat_transform_separable(phi, central, t, g, nodes=96)

    rhs = np.array([average(evolved, CGroupPoint(zw[i, :1], zw[i, 1:], zeta[i]), cfg.radius, 1e-8) for i in range(5)])
    return Outcome(_rel(lhs, rhs), 0.0, 1e-5)


# ----------------------------- bergman ----------------------------- #

def _test_sector_functions(rng: np.random.Generator, params: LatticeParams, count: int):
    """Entire sector-k functions A_lam(tau_v p_sigma) and their data."""
    lam = -params.lam
    out = []
    for _ in range(count):
        sigma = float(rng.uniform(0.05, 0.1))
        v = rng.uniform(0.0, 1.0, 2 * params.n)
        f = _translated_kernel(lam, sigma, v)

        def func(z, w, f=f):
            return twisted_periodize(lam, f, np.concatenate([z, w], axis=-1), radius=8.0)

        out.append(func)
    return out


@check("bergman.unitarity", "Pi~_k(s) is unitary on the twisted Bergman space", ref="lem43")
def _bergman_unitarity(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    cell = max(8, cfg.grid // 2)
    cell += (-cell) % params.order
    grid = bergman_grid(1, cell, 2.2, 24)
    worst = 0.0
    for func in _test_sector_functions(rng, params, 10):
        exact = BergmanSample.from_function(params, 0.02, func, grid)
        plain = exact.with_values(exact.values)
        base = twisted_bergman_norm(plain)
        for s in FiniteGroupElement.all(1, params.order):
            moved = twisted_bergman_norm(finite_group_act(s, plain))
            worst = max(worst, abs(moved - base) / base)
    return Outcome(worst, 0.0, 1e-6)


@check("bergman.isotypic_completeness", "the j-projections of a twisted Bergman function sum to it and are orthogonal", ref="cor45")
def _bergman_isotypic_completeness(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    cell = max(8, cfg.grid // 2)
    cell += (-cell) % params.order
    grid = bergman_grid(1, cell, 2.2, 24)
    func = _test_sector_functions(rng, params, 1)[0]
    exact = BergmanSample.from_function(params, 0.02, func, grid)
    G = exact.with_values(exact.values)
    parts = {j: project_sector_j(G, j) for j in params.index_set}
    total = sum(P.values for P in parts.values())
    completeness = _rel(total, G.values)
    cross = 0.0
    norms = {j: twisted_bergman_norm(P) for j, P in parts.items()}
    for j in params.index_set:
        for jj in params.index_set:
            if j < jj:
                cross = max(cross, abs(twisted_bergman_inner(parts[j], parts[jj])) / (norms[j] * norms[jj]))
    return Outcome(max(completeness, cross), 0.0, 1e-8, detail={"completeness": completeness, "cross": cross})


@check("bergman.fourier_relation", "C_m(u) = C_0(u + m) for the x-coefficients of each isotypic piece", ref="thm48-coefficients")
def _bergman_fourier_relation(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    cell = max(8, cfg.grid // 2)
    cell += (-cell) % params.order
    grid = bergman_grid(1, cell, 0.1, 2)
    func = _test_sector_functions(rng, params, 1)[0]
    G = BergmanSample.from_function(params, 0.02, func, grid)
    worst = 0.0
    for j in params.index_set:
        piece = project_sector_j(G, j)
        for m in (-1, 1):
            worst = max(worst, C_m_relation_residual(piece, j, (m,)))
    return Outcome(worst, 0.0, 1e-6)


@check("bergman.isometry_chain", "||T_t A_lam f||_{B_t} / ||A_lam f||_M is one constant (both conventions)", ref="prop44")
def _bergman_isometry_chain(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    lam, t = -params.lam, 0.02
    cell = max(8, (3 * cfg.grid) // 4)
    cell += (-cell) % params.order
    grid = bergman_grid(1, cell, 2.5, 32)
    damping = math.exp(-t * lam * lam)
    ratios = []
    for _ in range(5):
        s = float(rng.uniform(0.04, 0.07))
        v = rng.uniform(0.0, 1.0, 2)
        f = _translated_kernel(lam, s, v)
        evolved = _translated_kernel(lam, s + t, v)
        l2 = sector_norm(twisted_average(params, f, cell))

        def func(z, w, evolved=evolved):
            return damping * twisted_periodize(lam, evolved, np.concatenate([z, w], axis=-1), radius=8.0)

        G = BergmanSample.from_function(params, t, func, grid)
        ratios.append(twisted_bergman_norm(G) / l2)
    raw = float(np.mean(ratios))
    constant = raw / damping if cfg.convention == "thm410" else raw
    detail = {"prop44": raw, "thm410": raw / damping, "convention": cfg.convention, "constant": constant}
    return Outcome(_spread(ratios), "constancy", 1e-5, mode="constancy", detail=detail)


def _round_trip_sample(cfg: RunConfig, rng: np.random.Generator, j):
    params = LatticeParams(1, cfg.k)
    lam, t = params.lam, cfg.t
    a = params.shift(j)

    def f(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y) + a
        return hermite_eval_scaled((0,), lam, y) + 0.5 * hermite_eval_scaled((2,), lam, y)

    def func(z, w):
        pt = CGroupPoint(z, w, np.zeros(z.shape[:-1]))
        return sector_transform_via_expansion(params, j, f, t, pt)

    grid = bergman_grid(1, max(16, cfg.grid // 2) * params.k, 0.1, 2)
    return params, f, BergmanSample.from_function(params, t, func, grid)


@check("bergman.round_trip", "inverting the transform recovers f in the Hermite basis", ref="thm48")
def _bergman_round_trip(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    line = Grid.cube(1, 4.0, 256)
    worst = 0.0
    detail = {}
    for j in ((0,), (1,)):
        params, f, G = _round_trip_sample(cfg, rng, j)
        res = inversion_residuals(G, j, f, [6], line)[0]
        detail[f"j{j[0]}"] = res
        worst = max(worst, res)
    return Outcome(worst, 0.0, 1e-6, detail=detail)


@check("bergman.ill_posedness", "noise in the inversion grows with the truncation degree", ref="thm48-conditioning")
def _bergman_ill_posedness(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params, f, G = _round_trip_sample(cfg, rng, (0,))
    peak = float(np.max(np.abs(G.values)))
    noise = 1e-12 * peak * (rng.normal(size=G.values.shape) + 1j * rng.normal(size=G.values.shape))
    noisy = G.with_values(G.values + noise)
    degrees = [6, 8, 10, 12]
    residuals = inversion_residuals(noisy, (0,), f, degrees, Grid.cube(1, 4.0, 256))
    monotone = all(b >= a for a, b in zip(residuals, residuals[1:]))
    growth = residuals[-1] / residuals[0] if monotone else 0.0
    detail = {f"degree_{d}": r for d, r in zip(degrees, residuals)}
    detail["monotone"] = monotone
    return Outcome(growth, 100.0, 0.0, mode="at_least", detail=detail)


# ----------------------------- heat_transform ----------------------------- #

def _standard_ground_state(y: np.ndarray) -> np.ndarray:
    return hermite_eval((0,), y)


@check("heat_transform.cross_route", "convolution, Hermite, expansion and manifold-kernel routes agree", ref="prop46")
def _heat_transform_cross_route(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    j, t = (0,), cfg.t
    wide = Grid.cube(1, 8.0, 256)
    f = _standard_ground_state
    S = weil_brezin_field(params, j, f, _points(cfg, 1.0))
    real = rng.uniform(0.0, 1.0, (10, 2))
    cplx = _complex_points(rng, 5, 2)
    zeros = np.zeros(5)

    conv_r = sector_heat_transform(S, t, real).value()
    conv_c = sector_heat_transform(S, t, cplx).value()
    herm_r = sector_transform_via_hermite(params, j, f, t, GroupPoint(real[:, :1], real[:, 1:], np.zeros(10)), wide)
    cp = CGroupPoint(cplx[:, :1], cplx[:, 1:], zeros)
    herm_c = sector_transform_via_hermite(params, j, f, t, cp, wide)
    expa_c = sector_transform_via_expansion(params, j, f, t, cp, grid=wide)

    coarse = weil_brezin_field(params, j, f, _points(cfg, 0.75))
    M = ManifoldFunction.from_sectors(1, {params.k: coarse.field}, _points(cfg, 0.5))
    mani_r = heat_transform_manifold(M, t, GroupPoint(real[:, :1], real[:, 1:], np.zeros(10)))
    mani_c = heat_transform_manifold(M, t, cp)

    detail = {
        "hermite_real": _rel(herm_r, conv_r),
        "hermite_complex": _rel(herm_c, conv_c),
        "expansion_complex": _rel(expa_c, conv_c),
        "manifold_real": _rel(mani_r, conv_r),
        "manifold_complex": _rel(mani_c, conv_c),
    }
    return Outcome(max(detail.values()), 0.0, 1e-5, detail=detail)


@check("heat_transform.semigroup", "T_{t+s} = T_t T_s on a sector", ref="sec22-semigroup")
def _heat_transform_semigroup(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    S = weil_brezin_field(params, (0,), _standard_ground_state, _points(cfg, 1.0))
    pts = rng.uniform(0.0, 1.0, (10, 2))
    return Outcome(semigroup_residual(S, cfg.t, 0.05, pts), 0.0, 1e-5)


@check("heat_transform.eigen_scaling", "T_t scales U_{k,j} Phi_alpha by e^{-t lam^2 - (2|alpha|+n)|lam|t}", ref="rem38")
def _heat_transform_eigen_scaling(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    t = cfg.t
    pts = rng.uniform(0.0, 1.0, (5, 2))
    g = GroupPoint(pts[:, :1], pts[:, 1:], np.zeros(5))
    worst = 0.0
    for j in params.index_set:
        a = params.shift(j)
        for alpha in range(4):
            f = lambda y, alpha=alpha, a=a: hermite_eval_scaled((alpha,), params.lam, np.asarray(y) + a)
            V = weil_brezin_j(params, j, f, g)
            ratio = eigenbasis_scaling(params, j, (alpha,), t, pts)
            expected = expected_eigen_scaling(params, alpha, t)
            err = float(np.max(np.abs(ratio - expected) * np.abs(V))) / (expected * (float(np.max(np.abs(V))) or 1.0))
            worst = max(worst, err)
    return Outcome(worst, 0.0, 1e-5)


@check("heat_transform.intertwining", "T_t(Pi_k(s) G) = Pi~_k(s) T_t G", ref="sec41-intertwining")
def _heat_transform_intertwining(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    cell = _points(cfg, 1.0)
    cell += (-cell) % params.order
    parts = [weil_brezin_field(params, j, _random_gaussian(rng, 1), cell) for j in params.index_set]
    S = SectorFunction.from_function(params, lambda pts: sum(P.func(pts) for P in parts), cell)
    pts = _complex_points(rng, 10, 2)
    worst = max(intertwining_residual(S, s, cfg.t, pts) for s in FiniteGroupElement.all(1, params.order))
    return Outcome(worst, 0.0, 1e-5)


@check("heat_transform.c_lambda", "the Hermite route matches the convolution route with c_lam = 1", ref="prop46-constant")
def _heat_transform_c_lambda(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    params = LatticeParams(1, cfg.k)
    point = rng.uniform(0.0, 1.0, 2)
    ratio = calibrate_c_lambda(params, (0,), _standard_ground_state, cfg.t, point, _points(cfg, 1.0), Grid.cube(1, 8.0, 256))
    return Outcome(ratio, 1.0, 1e-5, detail={"point": [float(v) for v in point]})


@check("heat_transform.torus_isometry", "the k = 0 transform is an isometry onto the torus Bergman space", ref="thm41")
def _heat_transform_torus_isometry(cfg: RunConfig, rng: np.random.Generator) -> Outcome:
    t = cfg.t
    cell = Grid.cell(2, 8)
    mesh = cell.mesh()
    x, u = mesh[..., 0], mesh[..., 1]
    grid = bergman_grid(1, 8, 4.3, 64)
    ratios = []
    for values in (np.ones_like(x), np.cos(2 * np.pi * x), np.cos(2 * np.pi * x) * np.cos(2 * np.pi * u)):
        base = SampledField(cell, values.astype(complex))
        sample = BergmanSample.from_function(
            None, t, lambda z, w, base=base: torus_heat_extension(base, t, np.concatenate([z, w], axis=-1)), grid
        )
        ratios.append(torus_bergman_norm(sample) / base.norm())
    return Outcome(_spread(ratios), "constancy", 1e-8, mode="constancy", detail={"ratio": float(np.mean(ratios))})


# ----------------------------- Runner ----------------------------- #

def _check_rng(seed: int, check_id: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(check_id.encode("utf-8"))])


def select_checks(patterns: Optional[Sequence[str]] = None) -> List[str]:
    """Registered ids matching any of the glob patterns, sorted."""
    ids = sorted(REGISTRY)
    if not patterns:
        return ids
    return [cid for cid in ids if any(fnmatch.fnmatchcase(cid, p) for p in patterns)]


def run_check(check_id: str, config: RunConfig) -> CheckResult:
    entry = REGISTRY[check_id]
    rng = _check_rng(config.seed, check_id)
    outcome: Optional[Outcome] = None
    error: Optional[str] = None
    nonconvergent = False
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            outcome = entry.func(config, rng)
        except NonConvergenceError as exc:
            error, nonconvergent = str(exc), True
        except NilheatError as exc:
            error = f"{type(exc).__name__}: {exc}"
        except Exception as exc:  # a broken check must not take the suite down
            logger.exception("check %s crashed", check_id)
            error = f"{type(exc).__name__}: {exc}"
    runtime_ms = int(round((time.perf_counter() - start) * 1000.0))
    notes = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    truncated = any(issubclass(w.category, TruncationWarning) for w in caught)
    if outcome is None:
        return CheckResult(
            check_id, entry.reference, None, None, 0.0, "abs", False, runtime_ms,
            warnings=notes, error=error, nonconvergent=nonconvergent, ref=entry.ref,
        )
    passed = outcome.passed() and not truncated
    log = logger.info if passed else logger.warning
    log("%-45s %s", check_id, "ok" if passed else "FAILED")
    return CheckResult(
        check_id,
        entry.reference,
        outcome.computed,
        outcome.expected,
        outcome.tolerance,
        outcome.mode,
        passed,
        runtime_ms,
        tail_bound=outcome.tail_bound,
        detail=outcome.detail,
        warnings=notes,
        ref=entry.ref,
    )


def run_checks(config: RunConfig, patterns: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """Run the selected checks, in worker processes when ``config.workers`` > 1."""
    config.validate()
    ids = select_checks(patterns)
    logger.info("running %d checks with %d worker(s)", len(ids), config.workers)
    if config.workers == 1 or len(ids) <= 1:
        results = [run_check(cid, config) for cid in ids]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run_check, ids, [config] * len(ids)))
    return sorted(results, key=lambda r: r.check_id)
