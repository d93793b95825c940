"""
The standard lattice Gamma = Z^n x Z^n x (1/2)Z, the nilmanifold M = Gamma\\H,
central Fourier sectors, the invariant distributions nu_j, matrix coefficients and
the Weil-Brezin transforms.

Gamma-invariance is left invariance, F(gamma g) = F(g).  A sector function of index
k is stored as G(x, u) = F(x, u, 0) on the cell [0,1)^2n and obeys

    G(x + m, u + l) = e^{2 pi i k (u.m - x.l)} G(x, u).

Functions on R^n are vectorised callables taking arrays of shape (..., n), or
SampledFields read at their nodes.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, NonConvergenceError
from .heisenberg import GroupPoint, CGroupPoint, group_mul, schrodinger_apply
from .numerics import (
    FunctionLike,
    GaussianBound,
    Grid,
    SampledField,
    evaluate,
    fourier_coefficient,
    fourier_series,
    integrate,
    lattice_points,
    lattice_sum,
)

logger = logging.getLogger(__name__)

CELL_XI = 0.5
DEFAULT_TOL = 1.0e-12


# ----------------------------- Lattice parameters ----------------------------- #

@dataclass(frozen=True)
class LatticeParams:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameterError(f"dimension must be positive, got {self.n}")
        if int(self.k) != self.k or self.k == 0:
            raise InvalidParameterError(f"sector index must be a nonzero integer, got {self.k}")

    @property
    def lam(self) -> float:
        return 4.0 * math.pi * self.k

    @property
    def order(self) -> int:
        """2|k|, the order of the cyclic factors of F_k."""
        return 2 * abs(self.k)

    @property
    def index_set(self) -> List[Tuple[int, ...]]:
        """A_k = {0, ..., 2k-1}^n in lexicographic order."""
        return list(itertools.product(range(self.order), repeat=self.n))

    def check_index(self, j: Sequence[int]) -> Tuple[int, ...]:
        jt = tuple(int(v) for v in np.atleast_1d(j))
        if len(jt) != self.n or any(not 0 <= v < self.order for v in jt):
            raise InvalidParameterError(f"j={jt} is not in A_k for k={self.k}, n={self.n}")
        return jt

    def shift(self, j: Sequence[int]) -> np.ndarray:
        """a = j / 2k."""
        return np.asarray(self.check_index(j), dtype=float) / self.order


def sector_law(k: int, x: np.ndarray, u: np.ndarray, m: np.ndarray, l: np.ndarray) -> np.ndarray:
    """e^{2 pi i k (u.m - x.l)}, the factor relating G(x+m, u+l) to G(x, u)."""
    return np.exp(2j * np.pi * k * (np.sum(u * m, axis=-1) - np.sum(x * l, axis=-1)))


def cell_grid(n: int, points: int) -> Grid:
    """The real cell [0,1)^2n, periodic on every axis."""
    return Grid.cell(2 * n, points)


def manifold_grid(n: int, points: int, xi_points: Optional[int] = None) -> Grid:
    """The fundamental domain [0,1)^n x [0,1)^n x [0,1/2)."""
    base = cell_grid(n, points)
    return base.product(Grid((0.0,), (CELL_XI,), (xi_points or points,), (True,)))


# ----------------------------- Field containers ----------------------------- #

def _extrapolation_residual(values: np.ndarray, law_next: np.ndarray, axis: int, order: int = 6) -> float:
    """Compare the law-extended first slice with polynomial extrapolation past the last node."""
    npts = values.shape[axis]
    if npts < order + 1:
        return float("nan")
    tail = np.take(values, range(npts - order, npts), axis=axis)
    coeffs = [math.comb(order, i) * (-1) ** (order - 1 - i) for i in range(order)]
    extrap = sum(c * np.take(tail, i, axis=axis) for i, c in enumerate(coeffs))
    peak = float(np.max(np.abs(values))) or 1.0
    return float(np.max(np.abs(extrap - law_next))) / peak


@dataclass(frozen=True, eq=False)
class SectorFunction:
    """Cell data G(x, u) of a function in the k-th central sector.

    ``func`` is an optional exact evaluator on R^2n (shape (..., 2n) -> (...)); when it
    is present, off-cell values and the quasi-periodicity residual use it directly.
    """

    params: LatticeParams
    field: SampledField
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        g = self.field.grid
        if g.dim != 2 * self.params.n:
            raise InvalidInputError(f"sector data needs dimension {2 * self.params.n}, got {g.dim}")
        if any(abs(a) > 1e-12 for a in g.lo) or any(abs(b - 1.0) > 1e-12 for b in g.hi):
            raise InvalidInputError("sector data must live on the cell [0,1)^2n")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_function(cls, params: LatticeParams, func: Callable[[np.ndarray], np.ndarray], points: int) -> "SectorFunction":
        grid = cell_grid(params.n, points)
        return cls(params, SampledField.from_function(func, grid), func)

    def at(self, pts: np.ndarray) -> np.ndarray:
        """G at arbitrary real points: exact when ``func`` is known, else node lookup plus the law."""
        pts = np.asarray(pts, dtype=float)
        if self.func is not None:
            return np.asarray(self.func(pts))
        n = self.params.n
        base = np.floor(pts + 1e-9)
        local = pts - base
        inner = evaluate(self.field, local)
        return sector_law(self.params.k, local[..., :n], local[..., n:], base[..., :n], base[..., n:]) * inner

    def tile(self, lo: Sequence[int], hi: Sequence[int]) -> SampledField:
        """Extend the cell samples by the law to the integer box [lo, hi)."""
        n2 = self.grid.dim
        lo = np.broadcast_to(np.asarray(lo, dtype=int), (n2,))
        hi = np.broadcast_to(np.asarray(hi, dtype=int), (n2,))
        npts = self.grid.points
        points = tuple(int(p * (b - a)) for p, a, b in zip(npts, lo, hi))
        big = Grid(tuple(lo.astype(float)), tuple(hi.astype(float)), points)
        return SampledField(big, self.at(big.mesh()))

    def residual(self) -> float:
        """Quasi-periodicity residual relative to max |G|.

        Exact evaluators are checked at the shifted nodes; cell data is checked by
        extrapolating each axis one node past the cell and comparing with the law.
        """
        n = self.params.n
        peak = float(np.max(np.abs(self.values))) or 1.0
        mesh = self.grid.mesh()
        worst = 0.0
        if self.func is not None:
            for axis in range(2 * n):
                step = np.zeros(2 * n)
                step[axis] = 1.0
                lhs = self.func(mesh + step)
                law = sector_law(self.params.k, mesh[..., :n], mesh[..., n:], step[:n], step[n:])
                worst = max(worst, float(np.max(np.abs(lhs - law * self.func(mesh)))) / peak)
            return worst
        for axis in range(2 * n):
            step = np.zeros(2 * n)
            step[axis] = 1.0
            first = np.take(self.values, 0, axis=axis)
            first_pts = np.take(mesh, 0, axis=axis)
            law = sector_law(self.params.k, first_pts[..., :n], first_pts[..., n:], step[:n], step[n:])
            worst = max(worst, _extrapolation_residual(self.values, law * first, axis))
        return worst

    def norm(self) -> float:
        """L2 norm of G over the cell."""
        return self.field.norm()


@dataclass(frozen=True, eq=False)
class ManifoldFunction:
    """Samples of a Gamma-invariant function on [0,1)^n x [0,1)^n x [0,1/2)."""

    n: int
    field: SampledField

    def __post_init__(self):
        g = self.field.grid
        if g.dim != 2 * self.n + 1:
            raise InvalidInputError(f"manifold data needs dimension {2 * self.n + 1}, got {g.dim}")
        if abs(g.hi[-1] - CELL_XI) > 1e-12 or any(abs(b - 1.0) > 1e-12 for b in g.hi[:-1]) or any(abs(a) > 1e-12 for a in g.lo):
            raise InvalidInputError("manifold data must live on [0,1)^2n x [0,1/2)")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @classmethod
    def from_function(cls, n: int, func: Callable[[np.ndarray], np.ndarray], points: int, xi_points: Optional[int] = None) -> "ManifoldFunction":
        return cls(n, SampledField.from_function(func, manifold_grid(n, points, xi_points)))

    @classmethod
    def from_sectors(cls, n: int, sectors: Dict[int, SampledField], xi_points: int) -> "ManifoldFunction":
        """Synthesise F(x,u,xi) = sum_k G_k(x,u) e^{4 pi i k xi}."""
        if not sectors:
            raise InvalidInputError("no sectors given")
        cell = next(iter(sectors.values())).grid
        grid = cell.product(Grid((0.0,), (CELL_XI,), (xi_points,), (True,)))
        xi = grid.axes()[-1]
        vals = np.zeros(grid.points, dtype=complex)
        for k, g in sectors.items():
            if g.grid != cell:
                raise InvalidInputError("sector grids differ")
            vals += g.values[..., None] * np.exp(4j * np.pi * k * xi)
        return cls(n, SampledField(grid, vals))

    def residual(self) -> float:
        """Largest quasi-periodicity residual over the resolvable nonzero sectors."""
        worst = 0.0
        nyq = (self.grid.points[-1] - 1) // 2
        for k in range(-nyq, nyq + 1):
            if k == 0:
                continue
            g = sector_project(self, k)
            if float(np.max(np.abs(g.values))) < 1e-12:
                continue
            worst = max(worst, g.residual())
        return worst


# ----------------------------- Averaging ----------------------------- #

def lattice_element(m: np.ndarray, n: int) -> GroupPoint:
    """gamma = (a, b, c/2) for integer vectors m = (a, b, c)."""
    m = np.asarray(m, dtype=float)
    return GroupPoint(m[..., :n], m[..., n:2 * n], 0.5 * m[..., 2 * n])


def average(
    F: Callable[[GroupPoint], np.ndarray],
    g: GroupPoint,
    radius: float = 6.0,
    tol: float = DEFAULT_TOL,
    bound: Optional[GaussianBound] = None,
) -> complex:
    """A(F)(Gamma g) = sum over gamma in Gamma of F(gamma g), one point g."""
    n = g.n
    if g.shape != ():
        raise InvalidInputError("average takes a single point; loop over arrays")

    def term(ms: np.ndarray) -> np.ndarray:
        gam = lattice_element(ms, n)
        if isinstance(g, CGroupPoint):
            gam = gam.as_complex()
        pts = group_mul(gam, _broadcast(g, len(ms)))
        return np.asarray(F(pts))

    return complex(lattice_sum(term, 2 * n + 1, radius, tol, bound).value)


def average_field(
    F: Callable[[GroupPoint], np.ndarray],
    n: int,
    points: int,
    xi_points: Optional[int] = None,
    radius: float = 6.0,
    tol: float = DEFAULT_TOL,
    chunk: int = 1024,
) -> ManifoldFunction:
    """A(F) sampled on the fundamental domain; F takes GroupPoint arrays of any shape."""
    grid = manifold_grid(n, points, xi_points)
    mesh = grid.mesh().reshape(-1, 2 * n + 1)
    centre = np.full(2 * n + 1, -0.5)
    out = np.empty(len(mesh), dtype=complex)
    for start in range(0, len(mesh), chunk):
        block = GroupPoint.from_array(mesh[None, start:start + chunk], n)

        def term(ms: np.ndarray) -> np.ndarray:
            return np.asarray(F(group_mul(lattice_element(ms[:, None, :], n), block)))

        out[start:start + chunk] = lattice_sum(term, 2 * n + 1, radius, tol, center=centre, relative=True).value
    return ManifoldFunction(n, SampledField(grid, out))


def _broadcast(g: GroupPoint, count: int) -> GroupPoint:
    return type(g)(np.broadcast_to(g.x, (count, g.n)), np.broadcast_to(g.u, (count, g.n)), np.broadcast_to(g.xi, (count,)))


def twisted_periodize(
    lam: float,
    f: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    radius: float = 6.0,
    tol: float = DEFAULT_TOL,
    bound: Optional[GaussianBound] = None,
    chunk: int = 4096,
) -> np.ndarray:
    """sum over (a, b) in Z^2n of e^{i (lam/2)(u.a - x.b)} f(x + a, u + b) at points (..., 2n).

    The tail is measured against the largest value in each block of points.
    """
    pts = np.asarray(points)
    n2 = pts.shape[-1]
    n = n2 // 2
    flat = pts.reshape(-1, n2)
    out = np.empty(len(flat), dtype=complex)
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        x, u = block[:, :n], block[:, n:]

        def term(ms: np.ndarray) -> np.ndarray:
            a, b = ms[:, None, :n], ms[:, None, n:]
            phase = np.exp(0.5j * lam * (np.sum(u[None] * a, axis=-1) - np.sum(x[None] * b, axis=-1)))
            return phase * f(block[None, :, :] + ms[:, None, :])

        out[start:start + chunk] = lattice_sum(term, n2, radius, tol, bound, relative=True).value
    return out.reshape(pts.shape[:-1])


def twisted_average(
    params: LatticeParams,
    f: Callable[[np.ndarray], np.ndarray],
    points: int = 32,
    radius: float = 6.0,
    tol: float = DEFAULT_TOL,
) -> SectorFunction:
    """A_lam f with lam = -4 pi k, so the result satisfies the sector law of index k."""
    lam = -params.lam

    def func(p: np.ndarray) -> np.ndarray:
        return twisted_periodize(lam, f, p, radius, tol)

    return SectorFunction.from_function(params, func, points)


# ----------------------------- Sectors ----------------------------- #

def sector_project(F: ManifoldFunction, k: int):
    """F^k(x,u) = 2 int_0^{1/2} F(x,u,xi) e^{-4 pi i k xi} d xi.

    Returns a SectorFunction for k != 0 and the plain cell field for k = 0.
    """
    g = fourier_coefficient(F.field, [k], axes=[2 * F.n])
    if k == 0:
        return g
    return SectorFunction(LatticeParams(F.n, k), g)


def sector_synthesize(F: SectorFunction, xi_points: int) -> ManifoldFunction:
    return ManifoldFunction.from_sectors(F.params.n, {F.params.k: F.field}, xi_points)


def manifold_inner(F: ManifoldFunction, G: ManifoldFunction) -> complex:
    """<F, G> = int over the fundamental domain of F conj(G), Lebesgue measure."""
    if F.grid != G.grid:
        raise InvalidInputError("fields live on different grids")
    return integrate(F.field.with_values(F.field.values * np.conj(G.field.values)), check_decay=False)


def manifold_norm(F: ManifoldFunction) -> float:
    return math.sqrt(max(manifold_inner(F, F).real, 0.0))


def sector_norm(G: SectorFunction) -> float:
    """L2(M) norm of G(x,u) e^{4 pi i k xi}, that is sqrt(1/2) times the cell norm."""
    return math.sqrt(CELL_XI) * G.norm()


def sector_inner(F: SectorFunction, G: SectorFunction) -> complex:
    """L2(M) inner product of two fields of the same sector."""
    if F.grid != G.grid:
        raise InvalidInputError("fields live on different grids")
    if F.params.k != G.params.k:
        return 0j
    return CELL_XI * integrate(F.field.with_values(F.values * np.conj(G.values)), check_decay=False)


# ----------------------------- Invariant distributions ----------------------------- #

def fourier_transform(f: SampledField, eta: np.ndarray, chunk: int = 64) -> np.ndarray:
    """f^(eta) = int f(x) e^{-2 pi i x.eta} dx by quadrature on the grid of f."""
    eta = np.asarray(eta, dtype=float)
    n = f.grid.dim
    if eta.shape[-1] != n:
        raise InvalidInputError(f"frequencies need trailing dimension {n}")
    mesh = f.grid.mesh().reshape(-1, n)
    vals = f.values.reshape(-1)
    flat = eta.reshape(-1, n)
    out = np.empty(len(flat), dtype=complex)
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        out[start:start + chunk] = np.exp(-2j * np.pi * block @ mesh.T) @ vals
    return (out * f.grid.cell_volume).reshape(eta.shape[:-1])


def nu_pair(
    params: LatticeParams,
    j: Sequence[int],
    f: FunctionLike,
    form: str = "fourier",
    radius: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    grid: Optional[Grid] = None,
) -> complex:
    """(nu_j, f) in either of its two forms.

    fourier: sum_m f^(2km + j)
    poisson: (2k)^-n sum_m e^{-(pi i/k) m.j} f(m / 2k)
    """
    jt = params.check_index(j)
    n, order = params.n, params.order
    jv = np.asarray(jt, dtype=float)
    if form == "fourier":
        if isinstance(f, SampledField):
            sampled = f
        else:
            if grid is None:
                raise InvalidInputError("the fourier form of a callable needs a quadrature grid")
            sampled = SampledField.from_function(f, grid)

        def term(ms: np.ndarray) -> np.ndarray:
            return fourier_transform(sampled, order * ms + jv)

        res = lattice_sum(term, n, radius if radius is not None else 8.0, tol)
    elif form == "poisson":
        if radius is None:
            half = max(max(abs(a), abs(b)) for a, b in zip(f.grid.lo, f.grid.hi)) if isinstance(f, SampledField) else 10.0
            radius = order * half * math.sqrt(n) + 1.0

        def term(ms: np.ndarray) -> np.ndarray:
            phase = np.exp(-1j * np.pi / params.k * (ms @ jv))
            return phase * evaluate(f, ms / order)

        res = lattice_sum(term, n, radius, tol)
        res = type(res)(res.value * float(order) ** (-n), res.tail_bound, res.terms)
    else:
        raise InvalidInputError(f"unknown form {form!r}; expected 'fourier' or 'poisson'")
    logger.debug("nu_pair %s j=%s terms=%d tail=%.2e", form, jt, res.terms, res.tail_bound)
    return complex(res.value)


def matrix_coefficient(
    params: LatticeParams,
    j: Sequence[int],
    f: Callable[[np.ndarray], np.ndarray],
    g: GroupPoint,
    radius: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """(nu_j, rho_k(g) f) = (2k)^-n e^{4 pi i k xi} e^{2 pi i k x.u}
    sum_m e^{-(pi i/k) m.j} e^{2 pi i x.m} f(m/2k + u)."""
    jv = np.asarray(params.check_index(j), dtype=float)
    n, k, order = params.n, params.k, params.order
    x = g.x.reshape(-1, n)
    u = g.u.reshape(-1, n)
    xi = np.asarray(g.xi).reshape(-1)
    centre = -order * u.mean(axis=0)
    rad = radius if radius is not None else 10.0 * order + order * float(np.max(np.abs(u - u.mean(axis=0)), initial=0.0)) * math.sqrt(n)

    def term(ms: np.ndarray) -> np.ndarray:
        phase = np.exp(-1j * np.pi / k * (ms @ jv))[:, None] * np.exp(2j * np.pi * (ms @ x.T))
        return phase * f(ms[:, None, :] / order + u[None, :, :])

    res = lattice_sum(term, n, rad, tol, center=centre).value
    pref = float(order) ** (-n) * np.exp(4j * np.pi * k * xi) * np.exp(2j * np.pi * k * np.sum(x * u, axis=-1))
    return (pref * res).reshape(g.shape)


def matrix_coefficient_pairing(params: LatticeParams, j: Sequence[int], f: SampledField, g: GroupPoint) -> complex:
    """(nu_j, rho_k(g) f) composed literally: Schrodinger action on the grid, then the Poisson form."""
    moved = schrodinger_apply(params.lam, g, f)
    return nu_pair(params, j, moved, form="poisson")


# ----------------------------- Weil-Brezin transforms ----------------------------- #

def weil_brezin(
    params: LatticeParams,
    f: Callable[[np.ndarray], np.ndarray],
    g: GroupPoint,
    radius: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """V_k f(x,u,xi) = e^{4 pi i k xi} e^{2 pi i k x.u} sum_m e^{4 pi i k m.x} f(u + m)."""
    return weil_brezin_j(params, (0,) * params.n, f, g, radius, tol)


def weil_brezin_j(
    params: LatticeParams,
    j: Sequence[int],
    f: Callable[[np.ndarray], np.ndarray],
    g: GroupPoint,
    radius: Optional[float] = None,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """V_{k,j} f = e^{2 pi i j.x} V_k f, left Gamma-invariant."""
    jv = np.asarray(params.check_index(j), dtype=float)
    n, lam = params.n, params.lam
    x = g.x.reshape(-1, n)
    u = g.u.reshape(-1, n)
    xi = np.asarray(g.xi).reshape(-1)
    centre = -u.mean(axis=0)
    rad = radius if radius is not None else 12.0 + float(np.max(np.abs(u - u.mean(axis=0)), initial=0.0)) * math.sqrt(n)

    def term(ms: np.ndarray) -> np.ndarray:
        return np.exp(1j * lam * (ms @ x.T)) * f(u[None, :, :] + ms[:, None, :])

    total = lattice_sum(term, n, rad, tol, center=centre).value
    a = jv / params.order
    pref = np.exp(1j * lam * xi) * np.exp(1j * lam * (x @ a + 0.5 * np.sum(x * u, axis=-1)))
    return (pref * total).reshape(g.shape)


@dataclass(frozen=True)
class GrowthCertificate:
    """|F(s)| <= scale * exp(-re_rate |Re s|^2 + im_rate |Im s|^2) on C^n."""

    scale: float
    re_rate: float
    im_rate: float


def mehler_growth(lam: float, t: float, scale: float = 1.0) -> GrowthCertificate:
    """Gaussian growth of functions bounded by sqrt(K_t^lam(z, conj z))."""
    a = abs(lam)
    return GrowthCertificate(scale, 0.5 * a * math.tanh(a * t), 0.5 * a / math.tanh(a * t))


def weil_brezin_complex(
    params: LatticeParams,
    j: Sequence[int],
    F: Callable[[np.ndarray], np.ndarray],
    p: CGroupPoint,
    growth: GrowthCertificate,
    tol: float = DEFAULT_TOL,
    chunk: int = 2048,
) -> np.ndarray:
    """V~_{k,j} F(z,w,zeta) = e^{i lam zeta} e^{i lam a.z} e^{i (lam/2) z.w} sum_m e^{i lam z.m} F(w + m).

    The tail is certified from ``growth``: each term is bounded by a Gaussian in m whose
    centre moves with Im z.  Points are summed in blocks over one ball that covers
    every centre of the block.
    """
    if growth.re_rate <= 0:
        raise NonConvergenceError(float("inf"), tol, what="Weil-Brezin series (no Gaussian decay in the growth certificate)")
    jv = np.asarray(params.check_index(j), dtype=float)
    n, lam = params.n, params.lam
    if not isinstance(p, CGroupPoint):
        p = p.as_complex()
    z = p.x.reshape(-1, n)
    w = p.u.reshape(-1, n)
    zeta = np.asarray(p.xi).reshape(-1)
    a = jv / params.order
    A = growth.re_rate
    y, c, v = z.imag, w.real, w.imag
    centres = -c - lam * y / (2.0 * A)
    log_scales = (
        math.log(growth.scale)
        + growth.im_rate * np.sum(v * v, axis=-1)
        + lam * lam * np.sum(y * y, axis=-1) / (4.0 * A)
        + lam * np.sum(y * c, axis=-1)
    )
    out = np.empty(len(z), dtype=complex)
    for start in range(0, len(z), chunk):
        sl = slice(start, start + chunk)
        centre = centres[sl].mean(axis=0)
        spread = float(np.max(np.sqrt(np.sum((centres[sl] - centre) ** 2, axis=-1))))
        log_scale = float(np.max(log_scales[sl]))
        reach = math.sqrt(max(log_scale - math.log(tol), 1.0) / A) + 2.0
        radius = reach + spread
        ms = lattice_points(n, radius, centre)
        zb, wb = z[sl], w[sl]
        terms = np.exp(1j * lam * (ms @ zb.T)) * F(wb[None, :, :] + ms[:, None, :])
        out[sl] = terms.sum(axis=0)
        tail = GaussianBound(math.exp(min(log_scale, 700.0)), A).tail(reach, n)
        limit = tol * max(1.0, math.exp(min(log_scale, 700.0)))
        if tail > limit:
            raise NonConvergenceError(tail, limit, what="Weil-Brezin series")
        logger.debug("weil_brezin_complex block=%d radius=%.2f terms=%d tail=%.2e", start, radius, len(ms), tail)
    pref = np.exp(1j * lam * zeta) * np.exp(1j * lam * (z @ a)) * np.exp(0.5j * lam * np.sum(z * w, axis=-1))
    return (pref * out).reshape(p.shape)


def weil_brezin_field(params: LatticeParams, j: Sequence[int], f: Callable[[np.ndarray], np.ndarray], points: int) -> SectorFunction:
    """V_{k,j} f restricted to xi = 0, as sector data on the cell."""
    n = params.n

    def func(pts: np.ndarray) -> np.ndarray:
        return weil_brezin_j(params, j, f, GroupPoint(pts[..., :n], pts[..., n:], 0.0))

    return SectorFunction.from_function(params, func, points)


def matrix_coefficient_field(params: LatticeParams, j: Sequence[int], f: Callable[[np.ndarray], np.ndarray], points: int) -> SectorFunction:
    """x, u -> (nu_j, rho_k(x,u,0) f) as sector data on the cell."""
    n = params.n

    def func(pts: np.ndarray) -> np.ndarray:
        return matrix_coefficient(params, j, f, GroupPoint(pts[..., :n], pts[..., n:], 0.0))

    return SectorFunction.from_function(params, func, points)


# ----------------------------- Decomposition and symmetry ----------------------------- #

def weil_brezin_decompose(G: SectorFunction) -> Dict[Tuple[int, ...], SampledField]:
    """Recover g_j with G = sum_j V_{k,j} g_j on the cell.

    The x-Fourier coefficient of e^{-i(lam/2) x.u} G(x,u) at frequency q = j + 2km is
    g_j(u + m); samples are returned on [-M, M+1)^n with M set by the x resolution.
    """
    params = G.params
    n, order, lam = params.n, params.order, params.lam
    grid = G.grid
    mesh = grid.mesh()
    H = np.exp(-0.5j * lam * np.sum(mesh[..., :n] * mesh[..., n:], axis=-1)) * G.values
    coeffs = H
    idx = None
    for axis in range(n):
        idx, coeffs = fourier_series(coeffs, axis)
    npts = grid.points[0]
    resolvable = [q for q in sorted(set(int(v) for v in idx)) if 2 * abs(q) < npts]
    m_lo = min((q - (q % order)) // order for q in resolvable)
    m_hi = max((q - (q % order)) // order for q in resolvable)
    u_points = grid.points[n:]
    span = m_hi - m_lo + 1
    out: Dict[Tuple[int, ...], SampledField] = {}
    for j in params.index_set:
        box = Grid(tuple([float(m_lo)] * n), tuple([float(m_hi + 1)] * n), tuple(p * span for p in u_points))
        vals = np.zeros(box.points, dtype=complex)
        for ms in itertools.product(range(m_lo, m_hi + 1), repeat=n):
            q = tuple(jj + order * mm for jj, mm in zip(j, ms))
            if any(2 * abs(qq) >= npts for qq in q):
                continue
            sel = tuple(qq % npts for qq in q)
            block = coeffs[sel]
            dest = tuple(slice((mm - m_lo) * p, (mm - m_lo + 1) * p) for mm, p in zip(ms, u_points))
            vals[dest] = block
        out[j] = SampledField(box, vals)
    return out


def quarter_turn(G: SectorFunction) -> SectorFunction:
    """G(-u, x), the pullback along the automorphism (x, u, xi) -> (-u, x, xi).

    The automorphism preserves the lattice, so the result stays in sector k.  Node -u
    wraps to 1 - u and picks up e^{-2 pi i k x} per wrapped axis from the law.
    """
    params = G.params
    n, k = params.n, params.k
    grid = G.grid
    if len(set(grid.points)) != 1:
        raise InvalidInputError(f"a quarter turn needs one resolution on every cell axis, got {grid.points}")
    vals = G.values
    for axis in range(n):
        vals = np.roll(np.flip(vals, axis=axis), 1, axis=axis)
    vals = np.transpose(vals, tuple(range(n, 2 * n)) + tuple(range(n)))
    mesh = grid.mesh()
    wrapped = (mesh[..., n:] > 0.5 * grid.spacing[n]).astype(float)
    vals = np.exp(-2j * np.pi * k * np.sum(wrapped * mesh[..., :n], axis=-1)) * vals
    func = None
    if G.func is not None:
        base = G.func

        def func(pts: np.ndarray) -> np.ndarray:
            pts = np.asarray(pts, dtype=float)
            return base(np.concatenate([-pts[..., n:], pts[..., :n]], axis=-1))

    return SectorFunction(params, G.field.with_values(vals), func)


def isotypic_decompose(G: SectorFunction) -> Dict[Tuple[int, ...], SampledField]:
    """Recover g_j with G = sum_j U_{k,j} f_j, where U_{k,j} f = (nu_j, rho_k(.) f).

    U_{k,j} f(x, u) = V_{k,j} g_j(u, -x) with g_j(s) = f^(2ks + j), so the quarter turn
    of G is sum_j V_{k,j} g_j and the Weil-Brezin split applies.
    """
    return weil_brezin_decompose(quarter_turn(G))


@dataclass(frozen=True)
class FiniteGroupElement:
    """s in F_k = (Z / 2kZ)^n, reduced componentwise."""

    s: Tuple[int, ...]
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise InvalidParameterError(f"group order must be positive, got {self.order}")
        object.__setattr__(self, "s", tuple(int(v) % self.order for v in np.atleast_1d(self.s)))

    def __add__(self, other: "FiniteGroupElement") -> "FiniteGroupElement":
        if other.order != self.order:
            raise InvalidInputError("elements of different groups")
        return FiniteGroupElement(tuple(a + b for a, b in zip(self.s, other.s)), self.order)

    def character(self, j: Sequence[int]) -> complex:
        """e^{i pi s.j / k} = e^{2 pi i s.j / 2k}."""
        return complex(np.exp(2j * np.pi * float(np.dot(self.s, j)) / self.order))

    @classmethod
    def all(cls, n: int, order: int) -> List["FiniteGroupElement"]:
        return [cls(s, order) for s in itertools.product(range(order), repeat=n)]


def _roll_with_law(values: np.ndarray, grid: Grid, shift: np.ndarray, law_of_wrap: Callable[[np.ndarray, int], np.ndarray], axes: Sequence[int]) -> np.ndarray:
    """Values at (p + shift) for p on the cell grid, wrapping with the supplied law factor."""
    out = values
    mesh = grid.mesh()
    for axis, s in zip(axes, shift):
        npts = grid.points[axis]
        steps = s * npts
        if abs(steps - round(steps)) > 1e-9:
            raise InvalidInputError(f"shift {s} is not a multiple of the grid spacing on axis {axis}")
        steps = int(round(steps))
        if steps == 0:
            continue
        rolled = np.roll(out, -steps, axis=axis)
        coord = np.take(mesh, axis, axis=-1)
        wrapped = coord + s >= 1.0 - 1e-12
        factor = law_of_wrap(mesh, axis)
        out = np.where(wrapped, factor * rolled, rolled)
    return out


def sector_group_act(s: FiniteGroupElement, G: SectorFunction) -> SectorFunction:
    """Pi_k(s) G(x,u) = e^{-i pi s.u} G(x + s/2k, u): left translation by (s/2k, 0, 0)."""
    params = G.params
    n, order, k = params.n, params.order, params.k
    if s.order != order or len(s.s) != n:
        raise InvalidInputError(f"{s} is not an element of F_k for k={k}, n={n}")
    shift = np.asarray(s.s, dtype=float) / order
    mesh = G.grid.mesh()
    phase = np.exp(-1j * np.pi * (mesh[..., n:] @ np.asarray(s.s, dtype=float)))

    if G.func is not None:
        f0 = G.func

        def func(p: np.ndarray) -> np.ndarray:
            q = np.array(p, dtype=float, copy=True)
            q[..., :n] += shift
            return np.exp(-1j * np.pi * (p[..., n:] @ np.asarray(s.s, dtype=float))) * f0(q)

        return SectorFunction(params, G.field.with_values(func(mesh)), func)

    def wrap(mesh_: np.ndarray, axis: int) -> np.ndarray:
        # crossing x_i = 1 multiplies by e^{2 pi i k u_i}
        return np.exp(2j * np.pi * k * mesh_[..., n + axis])

    moved = _roll_with_law(G.values, G.grid, shift, wrap, range(n))
    return SectorFunction(params, G.field.with_values(phase * moved))
