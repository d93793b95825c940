"""
The Heisenberg group H = R^n x R^n x R and its complexification, the Schrodinger
representation, the heat kernel k_t, the twisted kernel p_t^lam, twisted
convolution and the twisted Bergman weight W_t^lam.

Group law: (x,u,xi)(x',u',xi') = (x+x', u+u', xi+xi' + (u.x' - x.u')/2).
Squares of complex vectors are bilinear (z^2 = sum z_j^2), never |z|^2.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constants import (
    DEFAULT_LAMBDA_NODES,
    GAUSSIAN_CUTOFF,
    OVERFLOW_THRESHOLD,
    heat_kernel_constant,
    p_kernel_constant,
)
from .errors import (
    InvalidInputError,
    InvalidParameterError,
    KernelOverflowError,
    ResampleWarning,
    TruncationWarning,
)
from .numerics import DECAY_THRESHOLD, SampledField, spectral_shift

logger = logging.getLogger(__name__)

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ----------------------------- Group ----------------------------- #

@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point (or an array of points) (x, u, xi); x and u have shape (..., n)."""

    x: np.ndarray
    u: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        if not self._complex and (np.iscomplexobj(self.x) or np.iscomplexobj(self.u) or np.iscomplexobj(self.xi)):
            raise InvalidInputError("complex coordinates need a CGroupPoint")
        dtype = complex if self._complex else float
        x = np.asarray(self.x, dtype=dtype)
        u = np.asarray(self.u, dtype=dtype)
        xi = np.asarray(self.xi, dtype=dtype)
        if x.ndim == 0:
            x = x.reshape(1)
        if u.ndim == 0:
            u = u.reshape(1)
        if x.shape != u.shape:
            raise InvalidInputError(f"x and u shapes differ: {x.shape} vs {u.shape}")
        if xi.shape != x.shape[:-1]:
            try:
                xi = np.broadcast_to(xi, x.shape[:-1]).copy()
            except ValueError:
                raise InvalidInputError(f"central coordinate shape {xi.shape} does not match {x.shape[:-1]}") from None
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "xi", xi)

    _complex = False

    @property
    def n(self) -> int:
        return int(self.x.shape[-1])

    @property
    def shape(self):
        return self.x.shape[:-1]

    def as_complex(self) -> "CGroupPoint":
        return CGroupPoint(self.x, self.u, self.xi)

    def coords(self) -> np.ndarray:
        """(x, u) stacked, shape (..., 2n)."""
        return np.concatenate([self.x, self.u], axis=-1)

    @classmethod
    def from_array(cls, arr: np.ndarray, n: int):
        """Split an array of shape (..., 2n+1) into (x, u, xi)."""
        arr = np.asarray(arr)
        if arr.shape[-1] != 2 * n + 1:
            raise InvalidInputError(f"expected trailing dimension {2 * n + 1}, got {arr.shape[-1]}")
        return cls(arr[..., :n], arr[..., n:2 * n], arr[..., 2 * n])


@dataclass(frozen=True, eq=False)
class CGroupPoint(GroupPoint):
    """A point (z, w, zeta) of the complexified group."""

    _complex = True

    @property
    def z(self) -> np.ndarray:
        return self.x

    @property
    def w(self) -> np.ndarray:
        return self.u

    @property
    def zeta(self) -> np.ndarray:
        return self.xi

    @property
    def imag_extent(self) -> float:
        return float(max(np.max(np.abs(self.x.imag), initial=0.0), np.max(np.abs(self.u.imag), initial=0.0)))


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1)


def group_mul(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    if a.n != b.n:
        raise InvalidInputError(f"dimension mismatch: {a.n} vs {b.n}")
    cls = CGroupPoint if isinstance(a, CGroupPoint) or isinstance(b, CGroupPoint) else GroupPoint
    xi = a.xi + b.xi + 0.5 * (_dot(a.u, b.x) - _dot(a.x, b.u))
    return cls(a.x + b.x, a.u + b.u, xi)


def group_inv(a: GroupPoint) -> GroupPoint:
    return type(a)(-a.x, -a.u, -a.xi)


def identity(n: int) -> GroupPoint:
    return GroupPoint(np.zeros(n), np.zeros(n), 0.0)


@dataclass(frozen=True)
class HeatParams:
    t: float
    lam: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise InvalidParameterError(f"t must be positive, got {self.t}")

    def require_lambda(self) -> float:
        if self.lam == 0:
            raise InvalidParameterError("lambda must be nonzero here")
        return self.lam


# ----------------------------- Schrodinger representation ----------------------------- #

def schrodinger_apply(lam: float, g: GroupPoint, phi: SampledField) -> SampledField:
    """pi_lam(x,u,xi) phi(v) = e^{i lam xi} e^{i lam (x.v + x.u/2)} phi(v + u), on the grid of phi.

    The translation is spectral; nodes whose shifted argument leaves the box are
    zero-filled, with a ResampleWarning if anything non-negligible is dropped.
    """
    if lam == 0:
        raise InvalidParameterError("the Schrodinger representation needs lambda != 0")
    if g.shape != ():
        raise InvalidInputError("schrodinger_apply takes a single group element")
    grid = phi.grid
    if grid.dim != g.n:
        raise InvalidInputError(f"field dimension {grid.dim} != group dimension {g.n}")
    x, u, xi = g.x.real, g.u.real, float(np.real(g.xi))
    shifted = spectral_shift(phi.values, u, grid.spacing)
    v = grid.mesh()
    target = v + u
    inside = np.all((target >= np.asarray(grid.lo)) & (target < np.asarray(grid.hi)), axis=-1)
    if not np.all(inside):
        peak = float(np.max(np.abs(phi.values))) or 1.0
        lost = float(np.max(np.abs(shifted[~inside]), initial=0.0)) / peak
        if lost > DECAY_THRESHOLD:
            warnings.warn(f"translation by {u} leaves the grid; zero-filled magnitude {lost:.2e}", ResampleWarning, stacklevel=2)
        shifted = np.where(inside, shifted, 0.0)
    phase = np.exp(1j * lam * (xi + _dot(v, x) + 0.5 * float(np.dot(x, u))))
    return phi.with_values(phase * shifted)


# ----------------------------- Twisted kernel ----------------------------- #

def _check_lt(lam: float, t: float) -> None:
    if not t > 0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    if abs(lam) * t > OVERFLOW_THRESHOLD:
        raise KernelOverflowError(abs(lam) * t, OVERFLOW_THRESHOLD)


def _sq(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def p_kernel(lam: float, t: float, x, u) -> np.ndarray:
    """p_t^lam(x,u) = (4 pi)^-n (lam / sinh lam t)^n e^{-lam coth(lam t)(x^2 + u^2)/4}; even in lam."""
    if lam == 0:
        raise InvalidParameterError("p_kernel needs lambda != 0; use p_kernel_euclidean for the limit")
    _check_lt(lam, t)
    x = np.asarray(x)
    u = np.asarray(u)
    if x.ndim == 0:
        x, u = x.reshape(1), u.reshape(1)
    n = x.shape[-1]
    a = abs(lam)
    pref = p_kernel_constant(n) * (a / math.sinh(a * t)) ** n
    return pref * np.exp(-0.25 * a / math.tanh(a * t) * (_sq(x) + _sq(u)))


def p_kernel_complex(lam: float, t: float, z, w) -> np.ndarray:
    """Entire extension of p_t^lam to C^2n."""
    return p_kernel(lam, t, np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))


def p_kernel_euclidean(t: float, x, u) -> np.ndarray:
    """The lam -> 0 limit (4 pi t)^-n e^{-(x^2 + u^2)/4t}, the Euclidean heat kernel on R^2n."""
    if not t > 0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    x = np.asarray(x)
    u = np.asarray(u)
    if x.ndim == 0:
        x, u = x.reshape(1), u.reshape(1)
    n = x.shape[-1]
    return (4.0 * math.pi * t) ** (-n) * np.exp(-(_sq(x) + _sq(u)) / (4.0 * t))


def twisted_kernel(lam: float, t: float) -> Kernel:
    """p_t^lam as a kernel handle; lam = 0 gives the Euclidean kernel."""
    if lam == 0:
        return lambda x, u: p_kernel_euclidean(t, x, u)
    return lambda x, u: p_kernel(lam, t, x, u)


# ----------------------------- Heat kernel ----------------------------- #

def lambda_cutoff(t: float, growth: float = 0.0) -> float:
    """Lambda such that e^{-t lam^2 + growth |lam|} is below GAUSSIAN_CUTOFF beyond it."""
    base = math.log(1.0 / GAUSSIAN_CUTOFF)
    plain = math.sqrt(base / t) + 4.0
    if growth <= 0:
        return plain
    return max(plain, (growth + math.sqrt(growth * growth + 4.0 * t * base)) / (2.0 * t) + 4.0)


def _spectral_factors(lam: np.ndarray, t: float):
    """(lam / sinh lam t, lam coth lam t) with their lam = 0 limits (1/t, 1/t)."""
    small = np.abs(lam * t) < 1e-8
    safe = np.where(small, 1.0, lam)
    ratio = np.where(small, 1.0 / t, safe / np.sinh(safe * t))
    coth = np.where(small, 1.0 / t, safe / np.tanh(safe * t))
    return ratio, coth


def heat_kernel(
    t: float,
    g: GroupPoint,
    nodes: int = DEFAULT_LAMBDA_NODES,
    chunk: int = 2048,
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> np.ndarray:
    """k_t(g), or its holomorphic extension at a CGroupPoint, by the lambda-integral.

    k_t(z,w,zeta) = (2pi)^-1 (4pi)^-n int e^{-i lam zeta} e^{-t lam^2} (lam/sinh lam t)^n
                    e^{-lam coth(lam t)(z^2 + w^2)/4} d lam

    ``weight(lam)`` multiplies the integrand; with weight = int psi(s) e^{i lam s} ds the
    result is k_t convolved with psi along the centre.
    """
    if not t > 0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    n = g.n
    r2 = (_sq(g.x) + _sq(g.u)).reshape(-1)
    zeta = np.asarray(g.xi).reshape(-1)
    growth = 0.0
    if isinstance(g, CGroupPoint):
        growth = float(np.max(np.abs(zeta.imag), initial=0.0)) + 0.25 * float(np.max(np.maximum(-r2.real, 0.0), initial=0.0))
        if float(np.max(np.abs(zeta.imag), initial=0.0)) > max(1.0, 0.5 * t * lambda_cutoff(t)):
            warnings.warn("central imaginary part outside the certified domain", TruncationWarning, stacklevel=2)
    cutoff = lambda_cutoff(t, growth)
    h = 2.0 * cutoff / nodes
    lam = -cutoff + h * np.arange(nodes)
    ratio, coth = _spectral_factors(lam, t)
    base = np.exp(-t * lam * lam) * ratio ** n
    if weight is not None:
        base = base * weight(lam)
    out = np.empty(len(r2), dtype=complex)
    for start in range(0, len(r2), chunk):
        rr = r2[start:start + chunk, None]
        zz = zeta[start:start + chunk, None]
        integrand = base * np.exp(-1j * lam * zz - 0.25 * coth * rr)
        out[start:start + chunk] = integrand.sum(axis=1)
    out *= h * heat_kernel_constant(n)
    return out.reshape(g.shape)


# ----------------------------- Twisted convolution ----------------------------- #

def twisted_phase(lam: float, x: np.ndarray, u: np.ndarray, xp: np.ndarray, up: np.ndarray) -> np.ndarray:
    """e^{-i (lam/2)(u.x' - x.u')}."""
    return np.exp(-0.5j * lam * (_dot(u, xp) - _dot(x, up)))


def twisted_convolution(lam: float, f: SampledField, kernel: Kernel, points, chunk: int = 64, check_decay: bool = True) -> np.ndarray:
    """(f *_lam K)(x,u) = int f(x',u') K(x-x', u-u') e^{-i(lam/2)(u.x' - x.u')} dx' du'.

    ``points`` has shape (..., 2n), real or complex; complex points need a kernel handle
    that accepts complex arguments (p_kernel does).
    """
    n2 = f.grid.dim
    if n2 % 2:
        raise InvalidInputError(f"twisted convolution acts on R^(2n), got dimension {n2}")
    n = n2 // 2
    edge = f.boundary_magnitude() if check_decay else 0.0
    if edge > DECAY_THRESHOLD:
        warnings.warn(f"convolved field not decayed at its boundary (relative magnitude {edge:.2e})", TruncationWarning, stacklevel=2)
    pts = np.asarray(points)
    if pts.shape[-1] != n2:
        raise InvalidInputError(f"evaluation points need trailing dimension {n2}, got {pts.shape[-1]}")
    flat = pts.reshape(-1, n2)
    mesh = f.grid.mesh().reshape(-1, n2)
    keep = np.abs(f.values.reshape(-1)) > 0
    mesh = mesh[keep]
    vals = f.values.reshape(-1)[keep]
    xp, up = mesh[None, :, :n], mesh[None, :, n:]
    dtype = complex
    out = np.empty(len(flat), dtype=dtype)
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        x, u = block[:, None, :n], block[:, None, n:]
        ker = kernel(x - xp, u - up) * twisted_phase(lam, x, u, xp, up)
        out[start:start + chunk] = ker @ vals
    out *= f.grid.cell_volume
    return out.reshape(pts.shape[:-1])


# ----------------------------- Twisted Bergman weight ----------------------------- #

def twisted_bergman_weight(lam: float, t: float, z, w) -> np.ndarray:
    """W_t^lam(x+iy, u+iv) = e^{lam(u.y - v.x)} p_{2t}^lam(2y, 2v)."""
    if lam == 0:
        raise InvalidParameterError("the twisted Bergman weight needs lambda != 0")
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.ndim == 0:
        z, w = z.reshape(1), w.reshape(1)
    x, y, u, v = z.real, z.imag, w.real, w.imag
    return np.exp(lam * (_dot(u, y) - _dot(v, x))) * p_kernel(lam, 2.0 * t, 2.0 * y, 2.0 * v)


def twisted_weight_log(lam: float, t: float, z, w) -> np.ndarray:
    """log W_t^lam, for integrands whose factors separately leave double range."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if z.ndim == 0:
        z, w = z.reshape(1), w.reshape(1)
    n = z.shape[-1]
    a = abs(lam)
    _check_lt(lam, 2.0 * t)
    x, y, u, v = z.real, z.imag, w.real, w.imag
    log_pref = math.log(p_kernel_constant(n)) + n * math.log(a / math.sinh(2.0 * a * t))
    return lam * (_dot(u, y) - _dot(v, x)) + log_pref - a / math.tanh(2.0 * a * t) * (_sq(y) + _sq(v))
