"""
Heat kernel transforms.

T_t f = (f * k_t)~ on H, its descent T_t^Gamma to the nilmanifold through the
kernel series K_t^Gamma, and three independent routes to T_t on a central sector.
For F = V_{k,j} f restricted to xi = 0 and lam = 4 pi k:

  convolution   F * k_t = e^{-t lam^2} e^{i lam xi} (G *_{-lam} p_t^{-lam})
  hermite       c_lam e^{-t lam^2} e^{i lam xi} e^{i lam (a.x + x.u/2)}
                sum_m e^{i lam x.m} (e^{-tH(lam)} tau_a f)(u + m + a)
  holomorphic   e^{-t lam^2} V~_{k,j} applied to the Hermite expansion of the
                evolved profile

The first works on cell data alone, the last two need f on R^n.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft as sfft

from .bergman import BergmanSample, bergman_grid, torus_bergman_norm, twisted_bergman_norm, twisted_box_radius
from .config import CONVENTIONS
from .constants import C_LAMBDA, DEFAULT_LAMBDA_NODES, mehler_constant
from .errors import InvalidInputError, InvalidParameterError, TruncationWarning
from .heisenberg import (
    CGroupPoint,
    GroupPoint,
    group_inv,
    group_mul,
    heat_kernel,
    p_kernel,
    p_kernel_euclidean,
    twisted_convolution,
    twisted_kernel,
)
from .hermite import (
    HermiteCoeffs,
    HermiteParams,
    hermite_coefficients,
    hermite_eval_scaled,
    hermite_semigroup_apply,
    hermite_semigroup_coeffs,
    hermite_synthesize,
)
from .nilmanifold import (
    CELL_XI,
    FiniteGroupElement,
    GrowthCertificate,
    LatticeParams,
    ManifoldFunction,
    SectorFunction,
    isotypic_decompose,
    lattice_element,
    manifold_grid,
    mehler_growth,
    sector_group_act,
    sector_project,
    weil_brezin_complex,
    weil_brezin_field,
    weil_brezin_j,
)
from .numerics import DECAY_THRESHOLD, FunctionLike, Grid, SampledField, lattice_sum

logger = logging.getLogger(__name__)

KERNEL_METHODS = ("spectral", "direct")

PROFILE_RADIUS = 4.0

# points where the growth certificate puts |F| below e^-70 times its scale read as zero
_NEGLIGIBLE_LOG = -70.0


def _flatten(g: GroupPoint) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = g.n
    return g.x.reshape(-1, n), g.u.reshape(-1, n), np.asarray(g.xi).reshape(-1)


def _point(g: GroupPoint, i: int) -> GroupPoint:
    x, u, xi = _flatten(g)
    return type(g)(x[i], u[i], xi[i])


# ----------------------------- T_t on H ----------------------------- #

def heat_transform_full(
    f: SampledField,
    t: float,
    p: GroupPoint,
    nodes: int = DEFAULT_LAMBDA_NODES,
    chunk: int = 1024,
) -> np.ndarray:
    """T_t f(p) = int_H f(h) k_t(h^-1 p) dh by quadrature over the (2n+1)-dimensional box of f."""
    dim = f.grid.dim
    if dim % 2 == 0:
        raise InvalidInputError(f"functions on H live on R^(2n+1), got dimension {dim}")
    n = (dim - 1) // 2
    if p.n != n:
        raise InvalidInputError(f"evaluation points have n={p.n}, field has n={n}")
    edge = f.boundary_magnitude()
    if edge > DECAY_THRESHOLD:
        warnings.warn(f"input not decayed at its box (relative magnitude {edge:.2e})", TruncationWarning, stacklevel=2)
    mesh = f.grid.mesh().reshape(-1, dim)
    vals = f.values.reshape(-1)
    keep = np.abs(vals) > 0
    h_inv = group_inv(GroupPoint.from_array(mesh[keep], n))
    vals = vals[keep]
    count = int(np.prod(p.shape)) if p.shape else 1
    out = np.empty(count, dtype=complex)
    for i in range(count):
        q = group_mul(h_inv, _point(p, i))
        out[i] = heat_kernel(t, q, nodes, chunk) @ vals
    return (out * f.grid.cell_volume).reshape(p.shape)


def gaussian_central_transform(width: float, center: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """lam -> int psi(s) e^{i lam s} ds for psi(s) = e^{-(s - center)^2 / 2 width^2}."""
    scale = width * math.sqrt(2.0 * math.pi)
    return lambda lam: scale * np.exp(-0.5 * (width * lam) ** 2 + 1j * lam * center)


def heat_transform_separable(
    phi: SampledField,
    central: Callable[[np.ndarray], np.ndarray],
    t: float,
    p: GroupPoint,
    nodes: int = DEFAULT_LAMBDA_NODES,
    chunk: int = 4096,
) -> np.ndarray:
    """T_t f for f(x,u,xi) = phi(x,u) psi(xi), with ``central`` the transform of psi.

    The central integral is folded into the lambda-integral of the kernel, leaving
    a 2n-dimensional quadrature over the box of phi.
    """
    n2 = phi.grid.dim
    if n2 % 2:
        raise InvalidInputError(f"phi lives on R^(2n), got dimension {n2}")
    n = n2 // 2
    edge = phi.boundary_magnitude()
    if edge > DECAY_THRESHOLD:
        warnings.warn(f"phi not decayed at its box (relative magnitude {edge:.2e})", TruncationWarning, stacklevel=2)
    mesh = phi.grid.mesh().reshape(-1, n2)
    vals = phi.values.reshape(-1)
    keep = np.abs(vals) > 0
    mesh, vals = mesh[keep], vals[keep]
    shifts = GroupPoint(-mesh[None, :, :n], -mesh[None, :, n:], 0.0)
    x, u, xi = _flatten(p)
    targets = type(p)(x[:, None, :], u[:, None, :], xi[:, None])
    q = group_mul(shifts, targets)
    kern = heat_kernel(t, q, nodes, chunk, weight=central)
    return (kern @ vals * phi.grid.cell_volume).reshape(p.shape)


# ----------------------------- Kernel series on the nilmanifold ----------------------------- #

def central_modes(t: float, imag_xi: float = 0.0) -> int:
    """Largest m kept in the central Poisson sum: e^{-t (4 pi m)^2 + 4 pi m |Im xi|} below 1e-17."""
    m = 1
    while -t * (4.0 * math.pi * m) ** 2 + 4.0 * math.pi * m * imag_xi > math.log(1e-17):
        m += 1
    return m


def central_sum(t: float, x: np.ndarray, u: np.ndarray, xi: np.ndarray, modes: Optional[int] = None) -> np.ndarray:
    """sum over c in Z of k_t(x, u, xi + c/2) = 2 sum_m e^{-t (4 pi m)^2} p_t^{4 pi m}(x, u) e^{4 pi i m xi}."""
    xi = np.asarray(xi)
    if modes is None:
        modes = central_modes(t, float(np.max(np.abs(np.imag(xi)), initial=0.0)))
    total = 2.0 * p_kernel_euclidean(t, x, u).astype(complex)
    for m in range(1, modes + 1):
        lam = 4.0 * math.pi * m
        total = total + 4.0 * math.exp(-t * lam * lam) * p_kernel(lam, t, x, u) * np.cos(lam * xi)
    return total


def _kernel_radius(t: float, p: GroupPoint, tol: float, spread: float) -> float:
    imag = p.imag_extent if isinstance(p, CGroupPoint) else 0.0
    n = p.n
    return math.sqrt(4.0 * t * (math.log(1.0 / tol) + 2 * n * imag * imag / (4.0 * t))) + spread + 1.5


def manifold_kernel(
    t: float,
    g: GroupPoint,
    p: GroupPoint,
    method: str = "spectral",
    radius: Optional[float] = None,
    tol: float = 1.0e-12,
    nodes: int = DEFAULT_LAMBDA_NODES,
) -> np.ndarray:
    """K_t^Gamma(g, p) = sum over gamma of k_t(g^-1 gamma p) for real g (any shape) and one point p.

    ``spectral`` sums the lattice in (x, u) and resolves the central direction by
    Poisson summation; ``direct`` sums heat_kernel values over all of Gamma.
    """
    if method not in KERNEL_METHODS:
        raise InvalidParameterError(f"unknown kernel method {method!r}; expected one of {KERNEL_METHODS}")
    if p.shape != ():
        raise InvalidInputError("manifold_kernel takes a single evaluation point")
    if isinstance(g, CGroupPoint):
        raise InvalidInputError("the first kernel argument is a real point of the nilmanifold")
    n = p.n
    gx, gu, gxi = _flatten(g)
    px, pu, pxi = p.x, p.u, p.xi
    centre = np.concatenate([(gx - px.real).mean(axis=0), (gu - pu.real).mean(axis=0)])
    spread = float(np.max(np.sqrt(np.sum((np.concatenate([gx, gu], axis=-1) - np.concatenate([px.real, pu.real]) - centre) ** 2, axis=-1))))
    rad = radius if radius is not None else _kernel_radius(t, p, tol, spread)

    if method == "direct":
        return _manifold_kernel_direct(t, g, p, rad + 2.0, tol, nodes)

    imag_xi = abs(float(np.imag(pxi))) + 0.5 * (rad + float(np.max(np.abs(centre)))) * 2 * n * (p.imag_extent if isinstance(p, CGroupPoint) else 0.0)
    modes = central_modes(t, imag_xi)

    def term(ms: np.ndarray) -> np.ndarray:
        a, b = ms[:, None, :n].astype(float), ms[:, None, n:].astype(float)
        X, U = a + px, b + pu
        XI = pxi + 0.5 * (np.sum(b * px, axis=-1) - np.sum(a * pu, axis=-1))
        qx, qu = X - gx[None], U - gu[None]
        qxi = XI - gxi[None] - 0.5 * (np.sum(gu[None] * X, axis=-1) - np.sum(gx[None] * U, axis=-1))
        return central_sum(t, qx, qu, qxi, modes)

    res = lattice_sum(term, 2 * n, rad, tol, center=centre, relative=True)
    logger.debug("manifold kernel (spectral): radius=%.2f terms=%d modes=%d", rad, res.terms, modes)
    return res.value.reshape(g.shape)


def _manifold_kernel_direct(t: float, g: GroupPoint, p: GroupPoint, radius: float, tol: float, nodes: int) -> np.ndarray:
    n = p.n
    count = int(np.prod(g.shape)) if g.shape else 1
    out = np.empty(count, dtype=complex)
    for i in range(count):
        gi = _point(g, i)
        g_inv = group_inv(gi)
        centre = np.concatenate([gi.x - p.x.real, gi.u - p.u.real, [2.0 * float(gi.xi - np.real(p.xi))]])

        def term(ms: np.ndarray) -> np.ndarray:
            gam = lattice_element(ms, n)
            if isinstance(p, CGroupPoint):
                gam = gam.as_complex()
            return heat_kernel(t, group_mul(g_inv, group_mul(gam, p)), nodes)

        out[i] = lattice_sum(term, 2 * n + 1, radius, tol, center=centre, relative=True).value
    return out.reshape(g.shape)


def _cell_points(grid: Grid, n: int) -> GroupPoint:
    return GroupPoint.from_array(grid.mesh().reshape(-1, 2 * n + 1), n)


def heat_transform_manifold(
    F: ManifoldFunction,
    t: float,
    p: GroupPoint,
    method: str = "spectral",
    radius: Optional[float] = None,
    tol: float = 1.0e-12,
    nodes: int = DEFAULT_LAMBDA_NODES,
) -> np.ndarray:
    """(T_t^Gamma F)(p) = int over the fundamental domain of F(h) K_t^Gamma(h, p) dh."""
    if p.n != F.n:
        raise InvalidInputError(f"evaluation points have n={p.n}, field has n={F.n}")
    h = _cell_points(F.grid, F.n)
    vals = F.field.values.reshape(-1)
    count = int(np.prod(p.shape)) if p.shape else 1
    out = np.empty(count, dtype=complex)
    for i in range(count):
        K = manifold_kernel(t, h, _point(p, i), method, radius, tol, nodes)
        out[i] = np.sum(vals * K)
    return (out * F.grid.cell_volume).reshape(p.shape)


def manifold_kernel_norm(t: float, p: GroupPoint, points: int = 16, xi_points: Optional[int] = None, tol: float = 1.0e-12) -> float:
    """||K_t^Gamma(., p)||_{L2(M)} over the fundamental domain grid."""
    grid = manifold_grid(p.n, points, xi_points)
    K = manifold_kernel(t, _cell_points(grid, p.n), p, tol=tol)
    return math.sqrt(float(np.sum(np.abs(K) ** 2)) * grid.cell_volume)


# ----------------------------- Convolution route ----------------------------- #

@dataclass(frozen=True, eq=False)
class SectorTransform:
    """G *_{-4 pi k} p_t^{-4 pi k} at some points, with the factors F * k_t carries on top."""

    k: int
    t: float
    convolution: np.ndarray = field(repr=False)

    @property
    def prefactor(self) -> float:
        """e^{-t (4 pi k)^2}."""
        return math.exp(-self.t * (4.0 * math.pi * self.k) ** 2)

    def character(self, zeta) -> np.ndarray:
        return np.exp(4j * math.pi * self.k * np.asarray(zeta))

    def value(self, zeta=0.0) -> np.ndarray:
        """F * k_t at (z, w, zeta)."""
        return self.prefactor * self.character(zeta) * self.convolution


def _tile_periodic(f: SampledField, margin: int) -> SampledField:
    reps = 2 * margin + 1
    dim = f.grid.dim
    big = Grid((-float(margin),) * dim, (float(margin + 1),) * dim, tuple(p * reps for p in f.grid.points))
    return SampledField(big, np.tile(f.values, (reps,) * dim))


def sector_heat_transform(
    S: Union[SectorFunction, SampledField],
    t: float,
    points,
    margin: int = 3,
) -> SectorTransform:
    """Unfold the sector data over the integer box [-margin, margin+1)^2n and convolve.

    A SectorFunction of index k uses lam = -4 pi k; a plain periodic cell field is the
    k = 0 sector and gets ordinary convolution with the Euclidean kernel.
    """
    if isinstance(S, SectorFunction):
        k, n = S.params.k, S.params.n
        tiled = S.tile(-margin, margin + 1)
    elif isinstance(S, SampledField):
        if S.grid.dim % 2 or not all(S.grid.periodic):
            raise InvalidInputError("k = 0 data must be a periodic field on the cell [0,1)^2n")
        k, n = 0, S.grid.dim // 2
        tiled = _tile_periodic(S, margin)
    else:
        raise InvalidInputError(f"expected sector data, got {type(S).__name__}")
    lam = -4.0 * math.pi * k
    pts = np.asarray(points)
    if pts.shape[-1] != 2 * n:
        raise InvalidInputError(f"points need trailing dimension {2 * n}, got {pts.shape[-1]}")
    re = np.real(pts)
    gap = float(min(np.min(re + margin), np.min(margin + 1 - re)))
    imag2 = float(np.max(np.sum(np.imag(pts) ** 2, axis=-1), initial=0.0))
    rate = 0.25 / t if k == 0 else 0.25 * abs(lam) / math.tanh(abs(lam) * t)
    reach = math.exp(-rate * (max(gap, 0.0) ** 2 - imag2))
    if reach > DECAY_THRESHOLD:
        warnings.warn(f"kernel not decayed at the unfolded box (relative magnitude {reach:.2e})", TruncationWarning, stacklevel=2)
    conv = twisted_convolution(lam, tiled, twisted_kernel(lam, t), pts, check_decay=False)
    logger.debug("sector transform k=%d t=%g nodes=%d points=%d", k, t, tiled.grid.size, conv.size)
    return SectorTransform(k, t, conv)


def torus_heat_extension(F0: SampledField, t: float, points) -> np.ndarray:
    """k = 0 sector: sum over nu of c_nu e^{-4 pi^2 t |nu|^2} e^{2 pi i nu.(z, w)}."""
    if not all(F0.grid.periodic):
        raise InvalidInputError("the torus extension needs periodic cell data")
    dim = F0.grid.dim
    coeffs = sfft.fftn(F0.values) / F0.grid.size
    freqs = np.stack(np.meshgrid(*[sfft.fftfreq(p, d=1.0 / p) for p in F0.grid.points], indexing="ij"), axis=-1)
    freqs = freqs.reshape(-1, dim)
    coeffs = coeffs.reshape(-1) * np.exp(-4.0 * math.pi ** 2 * t * np.sum(freqs ** 2, axis=-1))
    keep = np.abs(coeffs) > 1e-17 * (float(np.max(np.abs(coeffs))) or 1.0)
    coeffs, freqs = coeffs[keep], freqs[keep]
    pts = np.asarray(points)
    flat = pts.reshape(-1, dim)
    return (np.exp(2j * math.pi * flat @ freqs.T) @ coeffs).reshape(pts.shape[:-1])


# ----------------------------- Hermite routes ----------------------------- #

def profile_grid(n: int) -> Grid:
    """Default quadrature box for functions on R^n."""
    return Grid.cube(n, PROFILE_RADIUS, 128 if n == 1 else 64)


def _sampled(f: FunctionLike, n: int, grid: Optional[Grid]) -> SampledField:
    if isinstance(f, SampledField):
        if f.grid.dim != n:
            raise InvalidInputError(f"profile has dimension {f.grid.dim}, expected {n}")
        return f
    return SampledField.from_function(f, grid or profile_grid(n))


def _translated(f: SampledField, shift: np.ndarray) -> SampledField:
    """tau_shift f(y) = f(y - shift): the same samples on a moved grid."""
    g = f.grid
    return SampledField(Grid(tuple(np.asarray(g.lo) + shift), tuple(np.asarray(g.hi) + shift), g.points, g.periodic), f.values)


def evolved_profile(params: LatticeParams, j: Sequence[int], f: FunctionLike, t: float, grid: Optional[Grid] = None) -> Callable[[np.ndarray], np.ndarray]:
    """w -> (e^{-tH(lam)} tau_a f)(w + a) by Mehler quadrature; complex w allowed."""
    a = params.shift(j)
    hp = HermiteParams(params.lam, t)
    moved = _translated(_sampled(f, params.n, grid), a)
    return lambda w: hermite_semigroup_apply(hp, moved, np.asarray(w) + a)


def sector_transform_via_hermite(
    params: LatticeParams,
    j: Sequence[int],
    f: FunctionLike,
    t: float,
    g: GroupPoint,
    grid: Optional[Grid] = None,
    radius: Optional[float] = None,
    tol: float = 1.0e-10,
) -> np.ndarray:
    """T_t(V_{k,j} f)(g) as the Weil-Brezin series of the Hermite-evolved profile."""
    jv = params.check_index(j)
    profile = evolved_profile(params, jv, f, t, grid)
    n, lam = params.n, params.lam
    a = params.shift(jv)
    x, u, xi = _flatten(g)
    centre = -np.real(u).mean(axis=0)
    spread = float(np.max(np.abs(np.real(u) + centre), initial=0.0))
    rad = radius if radius is not None else 6.0 + spread * math.sqrt(n)

    def term(ms: np.ndarray) -> np.ndarray:
        return np.exp(1j * lam * (ms @ x.T)) * profile(u[None, :, :] + ms[:, None, :])

    total = lattice_sum(term, n, rad, tol, center=centre, relative=True).value
    pref = C_LAMBDA * math.exp(-t * lam * lam) * np.exp(1j * lam * xi) * np.exp(1j * lam * (x @ a + 0.5 * np.sum(x * u, axis=-1)))
    return (pref * total).reshape(g.shape)


@dataclass(frozen=True, eq=False)
class EvolvedExpansion:
    """w -> (e^{-tH(lam)} tau_a f)(w + a) as a Hermite series, entire in w."""

    params: LatticeParams
    j: Tuple[int, ...]
    t: float
    coeffs: HermiteCoeffs
    growth: GrowthCertificate

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w)
        a = self.params.shift(self.j)
        re, im = np.real(w), np.imag(w)
        log_bound = -self.growth.re_rate * np.sum(re * re, axis=-1) + self.growth.im_rate * np.sum(im * im, axis=-1)
        live = log_bound > _NEGLIGIBLE_LOG
        out = np.zeros(w.shape[:-1], dtype=complex)
        if np.any(live):
            out[live] = hermite_synthesize(self.coeffs, self.params.lam, w[live] + a)
        return out


def hermite_expansion(
    params: LatticeParams,
    j: Sequence[int],
    f: FunctionLike,
    t: float,
    max_degree: int = 60,
    grid: Optional[Grid] = None,
) -> EvolvedExpansion:
    """Expand tau_a f in Phi_alpha^lam, damp by the semigroup, and certify the growth.

    |e^{-tH} g(s)| <= ||g|| K_{2t}(s, conj s)^{1/2}; the shift by a costs a factor
    e^{A|a|^2} and half the real decay rate A.
    """
    jv = params.check_index(j)
    a = params.shift(jv)
    sampled = _sampled(f, params.n, grid)
    moved = _translated(sampled, a)
    hp = HermiteParams(params.lam, t)
    coeffs = hermite_semigroup_coeffs(hermite_coefficients(moved, params.lam, max_degree), hp)
    lt = abs(params.lam) * t
    base = mehler_growth(params.lam, 2.0 * t)
    scale = sampled.norm() * math.sqrt(mehler_constant(params.n, params.lam) * (0.5 * math.sinh(4.0 * lt)) ** (-0.5 * params.n))
    growth = GrowthCertificate(scale * math.exp(base.re_rate * float(a @ a)), 0.5 * base.re_rate, base.im_rate)
    return EvolvedExpansion(params, jv, t, coeffs, growth)


def sector_transform_via_expansion(
    params: LatticeParams,
    j: Sequence[int],
    f: FunctionLike,
    t: float,
    p: GroupPoint,
    max_degree: int = 60,
    grid: Optional[Grid] = None,
    tol: float = 1.0e-12,
) -> np.ndarray:
    """e^{-t lam^2} V~_{k,j}(tau_{-a} e^{-tH} tau_a f) at complex points."""
    expansion = hermite_expansion(params, j, f, t, max_degree, grid)
    point = p if isinstance(p, CGroupPoint) else p.as_complex()
    return C_LAMBDA * math.exp(-t * params.lam ** 2) * weil_brezin_complex(params, expansion.j, expansion, point, expansion.growth, tol)


def calibrate_c_lambda(
    params: LatticeParams,
    j: Sequence[int],
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    point: Sequence[float],
    cell_points: int = 32,
    grid: Optional[Grid] = None,
) -> complex:
    """Ratio of the convolution route to the Hermite route (with c_lam = 1) at one real point."""
    n = params.n
    pt = np.asarray(point, dtype=float)
    S = weil_brezin_field(params, j, f, cell_points)
    conv = sector_heat_transform(S, t, pt[None, :]).value()[0]
    herm = sector_transform_via_hermite(params, j, f, t, GroupPoint(pt[:n], pt[n:], 0.0), grid) / C_LAMBDA
    ratio = complex(conv / herm)
    logger.debug("c_lambda calibration at %s: %.12g%+.12gi", pt, ratio.real, ratio.imag)
    return ratio


# ----------------------------- Structure checks ----------------------------- #

def eigenbasis_scaling(params: LatticeParams, j: Sequence[int], alpha: Sequence[int], t: float, points: np.ndarray) -> np.ndarray:
    """T_t(U_{k,j} Phi_alpha) / U_{k,j} Phi_alpha at real points, with U_{k,j} Phi = V_{k,j}(tau_{-a} Phi)."""
    jv = params.check_index(j)
    a = params.shift(jv)
    alpha = tuple(int(v) for v in alpha)
    n = params.n

    def f(y: np.ndarray) -> np.ndarray:
        return hermite_eval_scaled(alpha, params.lam, np.asarray(y) + a)

    pts = np.asarray(points, dtype=float)
    g = GroupPoint(pts[..., :n], pts[..., n:], 0.0)
    return sector_transform_via_hermite(params, jv, f, t, g) / weil_brezin_j(params, jv, f, g)


def expected_eigen_scaling(params: LatticeParams, degree: int, t: float) -> float:
    """e^{-t lam^2 - (2|alpha| + n)|lam| t}."""
    lam = params.lam
    return math.exp(-t * lam * lam - (2 * degree + params.n) * abs(lam) * t)


def intertwining_residual(S: SectorFunction, s: FiniteGroupElement, t: float, points) -> float:
    """max |T_t(Pi_k(s) G) - Pi~_k(s) T_t G| relative to max |T_t(Pi_k(s) G)|."""
    n, order = S.params.n, S.params.order
    pts = np.asarray(points, dtype=complex)
    lhs = sector_heat_transform(sector_group_act(s, S), t, pts).convolution
    sv = np.asarray(s.s, dtype=float)
    moved = pts.copy()
    moved[..., :n] += sv / order
    rhs = np.exp(-1j * math.pi * (pts[..., n:] @ sv)) * sector_heat_transform(S, t, moved).convolution
    peak = float(np.max(np.abs(lhs))) or 1.0
    return float(np.max(np.abs(lhs - rhs))) / peak


def semigroup_residual(S: SectorFunction, t: float, s: float, points) -> float:
    """Transform at t + s against the transform at t of the data evolved for time s."""
    pts = np.asarray(points)
    direct = sector_heat_transform(S, t + s, pts).convolution
    mesh = S.grid.mesh()
    evolved = SectorFunction(S.params, S.field.with_values(sector_heat_transform(S, s, mesh).convolution))
    stepped = sector_heat_transform(evolved, t, pts).convolution
    peak = float(np.max(np.abs(direct))) or 1.0
    return float(np.max(np.abs(direct - stepped))) / peak


# ----------------------------- Sector bookkeeping ----------------------------- #

@dataclass(frozen=True)
class SectorNorm:
    """One row of a sector decomposition; j is None for sectors not split by F_k."""

    k: int
    j: Optional[Tuple[int, ...]]
    l2_norm: float
    transform_norm: Optional[float]
    coeffs: Optional[HermiteCoeffs] = None


def _bergman_points(n: int, k: int, t: float, cell_points: int, imag_points: int, growth_rate: float) -> Grid:
    radius = twisted_box_radius(k, t, growth_rate) if k else math.sqrt(2.0 * t * math.log(1e14)) + 0.5
    return bergman_grid(n, cell_points, radius, imag_points)


def sector_norms(
    F: ManifoldFunction,
    t: float,
    convention: str = "thm410",
    cell_points: int = 16,
    imag_points: int = 24,
    max_degree: int = 40,
    hermite_degree: Optional[int] = None,
    threshold: float = 1.0e-12,
) -> List[SectorNorm]:
    """Per-sector L2(M) norms and transform-side Bergman norms of F.

    thm410 reports the norm of e^{t(4 pi k)^2} T_t F^k, prop44 the raw norm.  Positive
    sectors are split into the pieces U_{k,j} f_j = (nu_j, rho_k(.) f_j); the transform
    norm of a piece is measured on its quarter turn V_{k,j} g_j, which has the same L2
    norm and so the same transform norm.  The k = 0 sector is measured by the torus
    weight.  Negative sectors get a single row with j = None and no transform norm.
    """
    if convention not in CONVENTIONS:
        raise InvalidParameterError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    n = F.n
    nyq = (F.grid.points[-1] - 1) // 2
    total = F.field.norm()
    rows: List[SectorNorm] = []
    for k in range(-nyq, nyq + 1):
        piece = sector_project(F, k)
        field_ = piece if k == 0 else piece.field
        l2 = math.sqrt(CELL_XI) * field_.norm()
        if l2 <= threshold * max(total, 1.0):
            continue
        if k == 0:
            grid = _bergman_points(n, 0, t, cell_points, imag_points, 0.0)
            sample = BergmanSample.from_function(
                None, t, lambda z, w, base=field_: torus_heat_extension(base, t, np.concatenate([z, w], axis=-1)), grid
            )
            rows.append(SectorNorm(0, None, l2, torus_bergman_norm(sample)))
            continue
        if k < 0:
            rows.append(SectorNorm(k, None, l2, None))
            continue
        params = piece.params
        lam = params.lam
        factor = math.exp(t * lam * lam) if convention == "thm410" else 1.0
        for j, g_j in isotypic_decompose(piece).items():
            part = math.sqrt(CELL_XI) * g_j.norm()
            if part <= threshold * max(total, 1.0):
                continue
            expansion = hermite_expansion(params, j, g_j, t, max_degree)
            grid = _bergman_points(n, k, t, cell_points, imag_points, abs(lam))

            def func(z, w, expansion=expansion, j=j):
                pt = CGroupPoint(z, w, np.zeros(z.shape[:-1]))
                return math.exp(-t * lam * lam) * weil_brezin_complex(params, j, expansion, pt, expansion.growth)

            sample = BergmanSample.from_function(params, t, func, grid)
            coeffs = None
            if hermite_degree is not None:
                coeffs = hermite_coefficients(_translated(g_j, params.shift(j)), lam, hermite_degree)
            rows.append(SectorNorm(k, j, part, factor * twisted_bergman_norm(sample), coeffs))
    logger.debug("sector norms: %d rows (convention %s)", len(rows), convention)
    return rows
