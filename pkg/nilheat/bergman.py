"""
Weighted Bergman norms on the complexified cell, the finite symmetry group F_k
acting by Pi~_k, the isotypic pieces B_{t,j} and the inversion of the sector
transform.

A BergmanSample holds G(z, w) on a grid over (x, u, y, v) with z = x + iy,
w = u + iv: the real parts cover the cell [0,1)^2n, the imaginary parts a
symmetric box whose size follows the Gaussian factor of the weight.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

from .constants import INVERSION_CAP, torus_weight_prefactor
from .errors import IllPosedError, InvalidInputError, InvalidParameterError, TruncationWarning
from .hermite import (
    HermiteCoeffs,
    HermiteParams,
    hermite_coefficients,
    hermite_semigroup_coeffs,
    hermite_synthesize,
    max_stable_degree,
)
from .heisenberg import twisted_weight_log
from .nilmanifold import FiniteGroupElement, LatticeParams
from .numerics import DECAY_THRESHOLD, Grid, SampledField, fourier_series

logger = logging.getLogger(__name__)

EntireFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

MEMBERSHIP_TOL = 1.0e-6


def bergman_grid(n: int, cell_points: int, imag_radius: float, imag_points: int) -> Grid:
    """(x, u) over the periodic cell, (y, v) over [-R, R)^2n; y = v = 0 is a node."""
    imag_points += imag_points % 2
    return Grid(
        (0.0,) * (2 * n) + (-imag_radius,) * (2 * n),
        (1.0,) * (2 * n) + (imag_radius,) * (2 * n),
        (cell_points,) * (2 * n) + (imag_points,) * (2 * n),
        (True,) * (2 * n) + (False,) * (2 * n),
    )


def split_complex(mesh: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """(z, w) from grid coordinates laid out as (x, u, y, v)."""
    return mesh[..., :n] + 1j * mesh[..., 2 * n:3 * n], mesh[..., n:2 * n] + 1j * mesh[..., 3 * n:]


@dataclass(frozen=True, eq=False)
class BergmanSample:
    """Samples of G(z, w); ``params`` is None for the torus sector k = 0."""

    params: Optional[LatticeParams]
    t: float
    field: SampledField
    func: Optional[EntireFunction] = None

    def __post_init__(self):
        if not self.t > 0:
            raise InvalidParameterError(f"t must be positive, got {self.t}")
        if self.field.grid.dim % 4:
            raise InvalidInputError(f"Bergman samples need dimension 4n, got {self.field.grid.dim}")
        if self.params is not None and self.params.n != self.n:
            raise InvalidInputError("lattice dimension disagrees with the sample grid")

    @property
    def n(self) -> int:
        return self.field.grid.dim // 4

    @property
    def k(self) -> int:
        return 0 if self.params is None else self.params.k

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @classmethod
    def from_function(cls, params: Optional[LatticeParams], t: float, func: EntireFunction, grid: Grid) -> "BergmanSample":
        n = grid.dim // 4
        z, w = split_complex(grid.mesh(), n)
        return cls(params, t, SampledField(grid, np.asarray(func(z, w), dtype=complex)), func)

    def with_values(self, values: np.ndarray, func: Optional[EntireFunction] = None) -> "BergmanSample":
        return BergmanSample(self.params, self.t, self.field.with_values(values), func)

    def zw(self) -> Tuple[np.ndarray, np.ndarray]:
        return split_complex(self.grid.mesh(), self.n)


def _sampled_law_residual(G: BergmanSample) -> float:
    """The law and holomorphy measured on the samples alone.

    e^{-2 pi i k z.w} G is periodic in x, and e^{2 pi i k z.w} G periodic in u, exactly
    when G obeys the law; being entire, their Fourier coefficients over the cell move
    by e^{-2 pi nu dy} between neighbouring imaginary nodes. Compared next to Im = 0.
    """
    n, k = G.n, G.k
    grid = G.grid
    z, w = G.zw()
    zw = np.sum(z * w, axis=-1)
    worst = 0.0
    for sign, cell_axes in ((-1.0, range(n)), (1.0, range(n, 2 * n))):
        periodic = np.exp(sign * 2j * np.pi * k * zw) * G.values
        coeffs = sfft.fftn(periodic, axes=tuple(cell_axes), norm="forward")
        scale = float(np.max(np.abs(coeffs))) or 1.0
        for c_ax in cell_axes:
            i_ax = c_ax + 2 * n
            npts, ipts = grid.points[c_ax], grid.points[i_ax]
            shape = [1] * grid.dim
            shape[c_ax] = npts
            nu = sfft.fftfreq(npts, 1.0 / npts).reshape(shape)
            step = np.take(np.exp(-2.0 * np.pi * nu * grid.spacing[i_ax]), 0, axis=i_ax)
            centre = int(np.argmin(np.abs(grid.axes()[i_ax])))
            for a in (centre - 1, centre):
                if a < 0 or a + 1 >= ipts:
                    continue
                lo, hi = np.take(coeffs, a, axis=i_ax), np.take(coeffs, a + 1, axis=i_ax)
                worst = max(worst, float(np.max(np.abs(hi - step * lo))) / scale)
    return worst


def law_residual(G: BergmanSample, samples: int = 2048) -> float:
    """max |G(z+m, w+l) - e^{2 pi i k (w.m - z.l)} G(z, w)| over unit generators, relative to max |G|.

    With the exact evaluator a strided subset of the nodes is shifted literally; plain
    samples go through _sampled_law_residual.
    """
    if G.func is None:
        return _sampled_law_residual(G)
    n, k = G.n, G.k
    z, w = G.zw()
    z, w = z.reshape(-1, n), w.reshape(-1, n)
    stride = max(1, len(z) // samples)
    z, w = z[::stride], w[::stride]
    peak = float(np.max(np.abs(G.values))) or 1.0
    base = G.func(z, w)
    worst = 0.0
    for i in range(2 * n):
        step = np.zeros(n)
        step[i % n] = 1.0
        if i < n:
            lhs = G.func(z + step, w)
            law = np.exp(2j * np.pi * k * (w @ step))
        else:
            lhs = G.func(z, w + step)
            law = np.exp(-2j * np.pi * k * (z @ step))
        worst = max(worst, float(np.max(np.abs(lhs - law * base))) / peak)
    return worst


# ----------------------------- Norms ----------------------------- #

def _imag_boundary(G: BergmanSample, integrand: np.ndarray) -> float:
    peak = float(np.max(integrand)) if integrand.size else 0.0
    if peak == 0.0:
        return 0.0
    edge = 0.0
    for axis in range(2 * G.n, 4 * G.n):
        edge = max(edge, float(np.max(np.take(integrand, 0, axis=axis))), float(np.max(np.take(integrand, -1, axis=axis))))
    return edge / peak


def _weighted_norm(G: BergmanSample, log_weight: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        log_mod = 2.0 * np.log(np.abs(G.values))
    integrand = np.exp(log_mod + log_weight)
    edge = _imag_boundary(G, integrand)
    if edge > DECAY_THRESHOLD:
        warnings.warn(f"Bergman integrand not decayed at the imaginary box (relative {edge:.2e})", TruncationWarning, stacklevel=3)
    return math.sqrt(float(np.sum(integrand)) * G.grid.cell_volume)


def torus_weight_log(n: int, t: float, y: np.ndarray, v: np.ndarray) -> np.ndarray:
    """log of (2 pi t)^-n e^{-(y^2 + v^2)/2t}."""
    return math.log(torus_weight_prefactor(n, t)) - (np.sum(y * y, axis=-1) + np.sum(v * v, axis=-1)) / (2.0 * t)


def torus_bergman_norm(F: BergmanSample) -> float:
    """Norm of a k = 0 function against (2 pi t)^-n e^{-(y^2 + v^2)/2t}."""
    if F.k != 0:
        raise InvalidInputError(f"torus norm takes the k = 0 sector, got k={F.k}")
    z, w = F.zw()
    return _weighted_norm(F, torus_weight_log(F.n, F.t, z.imag, w.imag))


def twisted_bergman_norm(G: BergmanSample, lam: Optional[float] = None, law_tol: float = MEMBERSHIP_TOL) -> float:
    """Norm against W_t^lam over the cell times the imaginary box; lam defaults to -4 pi k."""
    if G.params is None:
        raise InvalidInputError("twisted norm needs a nonzero sector")
    residual = law_residual(G)
    if residual > law_tol:
        raise InvalidInputError(f"quasi-periodicity residual {residual:.2e} exceeds {law_tol:.1e}")
    lam = -G.params.lam if lam is None else lam
    z, w = G.zw()
    return _weighted_norm(G, twisted_weight_log(lam, G.t, z, w))


def twisted_bergman_inner(F: BergmanSample, G: BergmanSample, lam: Optional[float] = None) -> complex:
    if F.grid != G.grid:
        raise InvalidInputError("samples live on different grids")
    lam = -F.params.lam if lam is None else lam
    z, w = F.zw()
    weight = np.exp(twisted_weight_log(lam, F.t, z, w))
    return complex(np.sum(F.values * np.conj(G.values) * weight) * F.grid.cell_volume)


def twisted_box_radius(k: int, t: float, growth_rate: float = 0.0) -> float:
    """Imaginary-part radius where W_t^{-4 pi k} times e^{growth |Im|^2} drops below 1e-14."""
    a = 4.0 * math.pi * abs(k)
    rate = a / math.tanh(2.0 * a * t) - growth_rate
    if rate <= 0:
        raise InvalidParameterError(f"integrand grows faster than the weight decays (rate {rate:.3g})")
    return math.sqrt(math.log(1e14) / rate) + 0.5


# ----------------------------- Finite group ----------------------------- #

def _shift_real(G: BergmanSample, s: FiniteGroupElement) -> np.ndarray:
    """G(z + s/2k, w) on the grid, wrapping across x_i = 1 by e^{2 pi i k w_i}."""
    n, k = G.n, G.k
    order = 2 * abs(k)
    z, w = G.zw()
    out = G.values
    grid = G.grid
    for i, si in enumerate(s.s):
        if si == 0:
            continue
        npts = grid.points[i]
        if (npts * si) % order:
            raise InvalidInputError(f"cell points {npts} must be divisible by 2k = {order}")
        steps = npts * si // order
        rolled = np.roll(out, -steps, axis=i)
        x = np.take(grid.mesh(), i, axis=-1)
        wrapped = x + si / order >= 1.0 - 1e-12
        out = np.where(wrapped, np.exp(2j * np.pi * k * w[..., i]) * rolled, rolled)
    return out


def finite_group_act(s: FiniteGroupElement, G: BergmanSample) -> BergmanSample:
    """(Pi~_k(s) G)(z, w) = e^{-i pi s.w} G(z + s/2k, w)."""
    if G.params is None:
        raise InvalidInputError("F_k acts on nonzero sectors only")
    if s.order != G.params.order or len(s.s) != G.n:
        raise InvalidInputError(f"{s} is not an element of F_k for k={G.k}")
    sv = np.asarray(s.s, dtype=float)
    z, w = G.zw()
    if G.func is not None:
        f0, order = G.func, G.params.order

        def func(zz: np.ndarray, ww: np.ndarray) -> np.ndarray:
            return np.exp(-1j * np.pi * (ww @ sv)) * f0(zz + sv / order, ww)

        return G.with_values(func(z, w), func)
    phase = np.exp(-1j * np.pi * (w @ sv))
    return G.with_values(phase * _shift_real(G, s))


def sector_membership_residual(G: BergmanSample, j: Sequence[int]) -> float:
    """max over generators e_i of |G(z + e_i/2k, w) - e^{i pi e_i.(w + j/k)} G(z, w)|, relative to max |G|."""
    if G.params is None:
        raise InvalidInputError("membership is defined for nonzero sectors")
    jt = G.params.check_index(j)
    peak = float(np.max(np.abs(G.values)))
    if peak == 0.0:
        return 0.0
    n, k = G.n, G.k
    z, w = G.zw()
    worst = 0.0
    for i in range(n):
        e = [0] * n
        e[i] = 1
        s = FiniteGroupElement(tuple(e), G.params.order)
        if G.func is not None:
            lhs = G.func(z + np.asarray(e) / G.params.order, w)
        else:
            lhs = _shift_real(G, s)
        rhs = np.exp(1j * np.pi * (w[..., i] + jt[i] / k)) * G.values
        worst = max(worst, float(np.max(np.abs(lhs - rhs))) / peak)
    return worst


def project_sector_j(G: BergmanSample, j: Sequence[int]) -> BergmanSample:
    """(2k)^-n sum over s in F_k of e^{-i pi s.j/k} Pi~_k(s) G."""
    if G.params is None:
        raise InvalidInputError("isotypic projection needs a nonzero sector")
    jt = G.params.check_index(j)
    order = G.params.order
    total = np.zeros_like(G.values)
    for s in FiniteGroupElement.all(G.n, order):
        total += np.conj(s.character(jt)) * finite_group_act(s, G).values
    total /= order ** G.n
    func = None
    if G.func is not None:
        f0 = G.func
        elems = FiniteGroupElement.all(G.n, order)

        def func(zz: np.ndarray, ww: np.ndarray) -> np.ndarray:
            acc = 0
            for s in elems:
                sv = np.asarray(s.s, dtype=float)
                acc = acc + np.conj(s.character(jt)) * np.exp(-1j * np.pi * (ww @ sv)) * f0(zz + sv / order, ww)
            return acc / order ** G.n

    return G.with_values(total, func)


# ----------------------------- Inversion ----------------------------- #

def fourier_coefficients_x(G: BergmanSample, j: Sequence[int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normalised x-coefficients C_m(u) of e^{-i lam a.x} e^{-i(lam/2) x.u} G on the real slice y = v = 0.

    Returns (frequencies q = 2k m, coefficients over the u nodes, u axis values);
    coefficient arrays have the frequency axes first.
    """
    params = G.params
    n, lam = G.n, params.lam
    a = params.shift(j)
    grid = G.grid
    zero = tuple(p // 2 for p in grid.points[2 * n:])
    sl = (slice(None),) * (2 * n) + zero
    real_vals = G.values[sl]
    mesh = grid.mesh()[sl][..., :2 * n]
    x, u = mesh[..., :n], mesh[..., n:]
    H = np.exp(-1j * lam * (x @ a) - 0.5j * lam * np.sum(x * u, axis=-1)) * real_vals
    idx = None
    for axis in range(n):
        idx, H = fourier_series(H, axis)
    return idx, H, grid.axes()[n]


def extract_C0(G: BergmanSample, j: Sequence[int], check_tol: float = MEMBERSHIP_TOL) -> SampledField:
    """C_0 on real w, assembled from C_m(u) = C_0(u + m) across the resolvable m."""
    if G.params is None:
        raise InvalidInputError("inversion needs a nonzero sector")
    residual = sector_membership_residual(G, j)
    if residual > check_tol:
        raise InvalidInputError(f"sample is not in B_(t,j) for j={tuple(j)}: residual {residual:.2e}")
    n, order = G.n, G.params.order
    idx, coeffs, u_axis = fourier_coefficients_x(G, j)
    npts = G.grid.points[0]
    ms = sorted({int(q) // order for q in idx if int(q) % order == 0 and 2 * abs(int(q)) < npts})
    m_lo, m_hi = ms[0], ms[-1]
    nu = G.grid.points[n]
    span = m_hi - m_lo + 1
    box = Grid((float(m_lo),) * n, (float(m_hi + 1),) * n, (nu * span,) * n)
    vals = np.zeros(box.points, dtype=complex)
    for mv in itertools.product(range(m_lo, m_hi + 1), repeat=n):
        sel = tuple((order * m) % npts for m in mv)
        dest = tuple(slice((m - m_lo) * nu, (m - m_lo + 1) * nu) for m in mv)
        vals[dest] = coeffs[sel]
    return SampledField(box, vals)


def C_m_relation_residual(G: BergmanSample, j: Sequence[int], m: Sequence[int]) -> float:
    """max over the u nodes of |C_m(u) - C_0(u + m)| relative to max |C_0(u + m)|.

    C_m comes from the sampled real slice; C_0(u + m) is computed afresh from the exact
    evaluator on the slice translated by m.
    """
    if G.params is None or G.func is None:
        raise InvalidInputError("the C_m relation needs a nonzero sector and an exact evaluator")
    params = G.params
    n, order, lam = G.n, params.order, params.lam
    a = params.shift(j)
    _, coeffs, _ = fourier_coefficients_x(G, j)
    npts = G.grid.points[0]
    direct = coeffs[tuple((order * int(mm)) % npts for mm in m)]
    mesh = G.grid.select(range(2 * n)).mesh()
    x = mesh[..., :n]
    u = mesh[..., n:] + np.asarray(m, dtype=float)
    vals = G.func(x.astype(complex), u.astype(complex))
    H = np.exp(-1j * lam * (x @ a) - 0.5j * lam * np.sum(x * u, axis=-1)) * vals
    shifted = np.mean(H, axis=tuple(range(n)))
    peak = float(np.max(np.abs(shifted))) or 1.0
    return float(np.max(np.abs(direct - shifted))) / peak


@dataclass
class InversionResult:
    params: LatticeParams
    j: Tuple[int, ...]
    t: float
    coeffs: HermiteCoeffs
    amplification: float
    c0: SampledField = field(repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """The recovered f at real points (..., n)."""
        a = self.params.shift(self.j)
        return hermite_synthesize(self.coeffs, self.params.lam, np.asarray(x) + a)


def invert_sector_transform(
    G: BergmanSample,
    j: Sequence[int],
    max_degree: Optional[int] = None,
    cap: float = INVERSION_CAP,
) -> InversionResult:
    """Recover f from G = T_t(V_{k,j} f) restricted to xi = 0.

    C_0(w) = e^{-t lam^2} (e^{-tH} tau_a f)(w + a); the Hermite coefficients of
    e^{t lam^2} C_0(. - a) are divided by the semigroup factors, which are capped.
    """
    params = G.params
    if params is None:
        raise InvalidInputError("inversion needs a nonzero sector")
    jt = params.check_index(j)
    lam, t, n = params.lam, G.t, G.n
    hp = HermiteParams(lam, t)
    limit = max_stable_degree(hp, n, cap)
    degree = limit if max_degree is None else max_degree
    if degree < 0:
        raise IllPosedError((0,) * n, math.exp(hp.eigenvalue(0, n) * t), cap)
    C0 = extract_C0(G, jt)
    a = params.shift(jt)
    shifted = Grid(tuple(np.asarray(C0.grid.lo) + a), tuple(np.asarray(C0.grid.hi) + a), C0.grid.points)
    evolved = SampledField(shifted, math.exp(t * lam * lam) * C0.values)
    coeffs = hermite_coefficients(evolved, lam, degree)
    restored = hermite_semigroup_coeffs(coeffs, hp, inverse=True, cap=cap)
    amp = math.exp(hp.eigenvalue(degree, n) * t)
    logger.debug("inversion j=%s degree=%d amplification=%.3e", jt, degree, amp)
    return InversionResult(params, jt, t, restored, amp, C0)


def inversion_residuals(
    G: BergmanSample,
    j: Sequence[int],
    reference: Callable[[np.ndarray], np.ndarray],
    degrees: Sequence[int],
    grid: Grid,
) -> List[float]:
    """Relative L2 error of the uncapped inversion for each truncation degree."""
    ref = SampledField.from_function(reference, grid)
    norm = ref.norm() or 1.0
    out = []
    for d in degrees:
        res = invert_sector_transform(G, j, max_degree=d, cap=float("inf"))
        diff = SampledField.from_function(res, grid).values - ref.values
        out.append(ref.with_values(diff).norm() / norm)
    return out
