"""
Hermite functions, the Mehler kernel and the Hermite semigroup e^{-tH(lam)},
H(lam) = -Laplacian + lam^2 |x|^2, together with the Hermite-Bergman weight.

Conventions
-----------
- Phi_alpha is the L2-normalised Hermite function, built from the recurrence
  phi_{m+1}(s) = sqrt(2/(m+1)) s phi_m(s) - sqrt(m/(m+1)) phi_{m-1}(s).
- Phi_alpha^lam(x) = |lam|^{n/4} Phi_alpha(sqrt|lam| x) has eigenvalue (2|alpha| + n)|lam|.
- Kernels depend on |lam| only, except the Hermite-Bergman prefactor (see
  ``hermite_bergman_weight``).
- Points are arrays of shape (..., n); complex arrays evaluate the entire extension.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    HERMITE_STABLE_DEGREE,
    HERMITE_STABLE_RADIUS,
    INVERSION_CAP,
    OVERFLOW_THRESHOLD,
    hermite_bergman_constant,
    mehler_constant,
)
from .errors import (
    IllPosedError,
    InvalidInputError,
    InvalidParameterError,
    KernelOverflowError,
    RangeWarning,
    TruncationWarning,
)
from .numerics import DECAY_THRESHOLD, Grid, SampledField, gaussian_radius, integrate

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]
Points = Union[np.ndarray, Sequence[float], float]

_QUARTER_PI = math.pi ** -0.25


# ----------------------------- Parameters ----------------------------- #

@dataclass(frozen=True)
class HermiteParams:
    lam: float
    t: float

    def __post_init__(self):
        if self.lam == 0 or not math.isfinite(self.lam):
            raise InvalidParameterError(f"lambda must be nonzero and finite, got {self.lam}")
        if not self.t > 0:
            raise InvalidParameterError(f"t must be positive, got {self.t}")

    @property
    def scale(self) -> float:
        return abs(self.lam)

    def eigenvalue(self, alpha: Union[MultiIndex, int], n: Optional[int] = None) -> float:
        """(2|alpha| + n)|lam|; pass an int degree together with n."""
        if isinstance(alpha, int):
            if n is None:
                raise InvalidInputError("degree given without dimension")
            return (2 * alpha + n) * self.scale
        return (2 * sum(alpha) + len(alpha)) * self.scale

    def check_overflow(self, factor: float = 1.0) -> None:
        product = factor * self.scale * self.t
        if product > OVERFLOW_THRESHOLD:
            raise KernelOverflowError(product, OVERFLOW_THRESHOLD)


@dataclass
class HermiteCoeffs:
    """Finitely supported map alpha -> complex coefficient."""

    n: int
    terms: Dict[MultiIndex, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean: Dict[MultiIndex, complex] = {}
        for alpha, c in self.terms.items():
            a = tuple(int(v) for v in np.atleast_1d(alpha))
            if len(a) != self.n or min(a) < 0:
                raise InvalidInputError(f"multi-index {a} is not in N^{self.n}")
            clean[a] = complex(c)
        self.terms = dict(sorted(clean.items(), key=lambda kv: grlex_key(kv[0])))

    @property
    def max_degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def norm(self) -> float:
        return math.sqrt(sum(abs(c) ** 2 for c in self.terms.values()))

    def scaled(self, factor: Callable[[MultiIndex], float]) -> "HermiteCoeffs":
        return HermiteCoeffs(self.n, {a: c * factor(a) for a, c in self.terms.items()})

    def truncated(self, max_degree: int) -> "HermiteCoeffs":
        return HermiteCoeffs(self.n, {a: c for a, c in self.terms.items() if sum(a) <= max_degree})


# ----------------------------- Multi-indices ----------------------------- #

def grlex_key(alpha: MultiIndex) -> Tuple:
    return (sum(alpha),) + tuple(-a for a in alpha)


def multi_indices(n: int, max_degree: int) -> List[MultiIndex]:
    """All alpha in N^n with |alpha| <= max_degree, graded lexicographic order."""
    if n < 1:
        raise InvalidInputError(f"dimension must be positive, got {n}")
    out = [a for a in itertools.product(range(max_degree + 1), repeat=n) if sum(a) <= max_degree]
    return sorted(out, key=grlex_key)


# ----------------------------- Hermite functions ----------------------------- #

def hermite_table(s: np.ndarray, degree: int) -> np.ndarray:
    """phi_0..phi_degree at every entry of s, shape (degree + 1,) + s.shape."""
    s = np.asarray(s)
    dtype = complex if np.iscomplexobj(s) else float
    out = np.empty((degree + 1,) + s.shape, dtype=dtype)
    out[0] = _QUARTER_PI * np.exp(-0.5 * s * s)
    if degree >= 1:
        out[1] = math.sqrt(2.0) * s * out[0]
    for m in range(1, degree):
        out[m + 1] = math.sqrt(2.0 / (m + 1)) * s * out[m] - math.sqrt(m / (m + 1)) * out[m - 1]
    return out


def _as_points(x: Points, n: int) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != n:
        raise InvalidInputError(f"points have trailing dimension {arr.shape[-1]}, expected {n}")
    return arr


def _product(alpha: MultiIndex, s: np.ndarray) -> np.ndarray:
    out = None
    for i, a in enumerate(alpha):
        factor = hermite_table(s[..., i], a)[a]
        out = factor if out is None else out * factor
    return out


def hermite_eval(alpha: Sequence[int], x: Points) -> np.ndarray:
    """Phi_alpha(x) = prod_i phi_{alpha_i}(x_i)."""
    alpha = tuple(int(a) for a in alpha)
    s = _as_points(x, len(alpha))
    if np.iscomplexobj(s):
        raise InvalidInputError("hermite_eval takes real points; use hermite_eval_complex")
    return _product(alpha, s.astype(float))


def hermite_eval_scaled(alpha: Sequence[int], lam: float, x: Points) -> np.ndarray:
    """Phi_alpha^lam(x) = |lam|^{n/4} Phi_alpha(sqrt|lam| x); real or complex x."""
    if lam == 0:
        raise InvalidParameterError("lambda must be nonzero")
    alpha = tuple(int(a) for a in alpha)
    s = _as_points(x, len(alpha)) * math.sqrt(abs(lam))
    if np.iscomplexobj(s):
        return abs(lam) ** (0.25 * len(alpha)) * hermite_eval_complex(alpha, s)
    return abs(lam) ** (0.25 * len(alpha)) * _product(alpha, s.astype(float))


def hermite_eval_complex(alpha: Sequence[int], z: Points) -> np.ndarray:
    """Entire extension of Phi_alpha; warns outside |z_i| <= 20, |alpha| <= 200."""
    alpha = tuple(int(a) for a in alpha)
    s = _as_points(z, len(alpha))
    if sum(alpha) > HERMITE_STABLE_DEGREE or (s.size and float(np.max(np.abs(s))) > HERMITE_STABLE_RADIUS):
        warnings.warn(
            f"complex Hermite evaluation outside the stable range |z| <= {HERMITE_STABLE_RADIUS:g}, "
            f"|alpha| <= {HERMITE_STABLE_DEGREE} (alpha={alpha})",
            RangeWarning,
            stacklevel=2,
        )
    return _product(alpha, s.astype(complex))


def hermite_basis(lam: float, x: Points, n: int, max_degree: int) -> Tuple[List[MultiIndex], np.ndarray]:
    """Phi_alpha^lam for every |alpha| <= max_degree at points x, shape (len(alphas),) + x.shape[:-1]."""
    s = _as_points(x, n) * math.sqrt(abs(lam))
    tables = [hermite_table(s[..., i], max_degree) for i in range(n)]
    alphas = multi_indices(n, max_degree)
    pref = abs(lam) ** (0.25 * n)
    out = np.empty((len(alphas),) + s.shape[:-1], dtype=tables[0].dtype)
    for r, alpha in enumerate(alphas):
        v = tables[0][alpha[0]]
        for i in range(1, n):
            v = v * tables[i][alpha[i]]
        out[r] = pref * v
    return alphas, out


# ----------------------------- Mehler kernel ----------------------------- #

def _sq(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def mehler_kernel(p: HermiteParams, x: Points, u: Points) -> np.ndarray:
    """K_t^lam(x, u), the kernel of e^{-tH(lam)}; complex points give the entire extension."""
    p.check_overflow(2.0)
    x = np.asarray(x)
    u = np.asarray(u)
    n = x.shape[-1] if x.ndim else 1
    x = _as_points(x, n)
    u = _as_points(u, n)
    lt = p.scale * p.t
    pref = mehler_constant(n, p.lam) * (0.5 * math.sinh(2.0 * lt)) ** (-0.5 * n)
    expo = -0.25 * p.scale * (math.tanh(lt) * _sq(x + u) + _sq(x - u) / math.tanh(lt))
    return pref * np.exp(expo)


def mehler_series(p: HermiteParams, x: Points, u: Points, max_degree: int = 80) -> np.ndarray:
    """Sum over |alpha| <= max_degree of e^{-(2|alpha|+n)|lam|t} Phi_alpha^lam(x) Phi_alpha^lam(u)."""
    x = np.asarray(x)
    n = x.shape[-1] if x.ndim else 1
    alphas, bx = hermite_basis(p.lam, _as_points(x, n), n, max_degree)
    _, bu = hermite_basis(p.lam, _as_points(np.asarray(u), n), n, max_degree)
    weights = np.array([math.exp(-p.eigenvalue(a) * p.t) for a in alphas])
    return np.tensordot(weights, bx * bu, axes=(0, 0))


# ----------------------------- Semigroup ----------------------------- #

def hermite_semigroup_apply(p: HermiteParams, f: SampledField, x_eval: Points, chunk: int = 256) -> np.ndarray:
    """(e^{-tH(lam)} f)(x_eval) by quadrature against the Mehler kernel."""
    n = f.grid.dim
    edge = f.boundary_magnitude()
    if edge > DECAY_THRESHOLD:
        warnings.warn(f"input not decayed at its grid boundary (relative magnitude {edge:.2e})", TruncationWarning, stacklevel=2)
    pts = _as_points(x_eval, n)
    flat = pts.reshape(-1, n)
    u = f.grid.mesh().reshape(-1, n)
    vals = f.values.reshape(-1)
    out = np.empty(len(flat), dtype=complex)
    for start in range(0, len(flat), chunk):
        block = flat[start:start + chunk]
        ker = mehler_kernel(p, block[:, None, :], u[None, :, :])
        out[start:start + chunk] = ker @ vals * f.grid.cell_volume
    return out.reshape(pts.shape[:-1])


def hermite_semigroup_coeffs(coeffs: HermiteCoeffs, p: HermiteParams, inverse: bool = False, cap: float = INVERSION_CAP) -> HermiteCoeffs:
    """Multiply coefficient alpha by e^{-(2|alpha|+n)|lam|t}, or its reciprocal when inverse."""
    if not inverse:
        return coeffs.scaled(lambda a: math.exp(-p.eigenvalue(a) * p.t))
    for alpha in coeffs.terms:
        amp = math.exp(p.eigenvalue(alpha) * p.t)
        if amp > cap:
            raise IllPosedError(alpha, amp, cap)
    return coeffs.scaled(lambda a: math.exp(p.eigenvalue(a) * p.t))


def max_stable_degree(p: HermiteParams, n: int, cap: float = INVERSION_CAP) -> int:
    """Largest N with e^{(2N+n)|lam|t} <= cap."""
    return max(int(math.floor((math.log(cap) / (p.scale * p.t) - n) / 2.0)), -1)


def hermite_coefficients(f: SampledField, lam: float, max_degree: int) -> HermiteCoeffs:
    """c_alpha = integral of f * Phi_alpha^lam over the grid of f."""
    n = f.grid.dim
    alphas, basis = hermite_basis(lam, f.grid.mesh(), n, max_degree)
    vals = f.values
    terms = {}
    for r, alpha in enumerate(alphas):
        terms[alpha] = complex(np.sum(vals * basis[r]) * f.grid.cell_volume)
    return HermiteCoeffs(n, terms)


def hermite_synthesize(coeffs: HermiteCoeffs, lam: float, x: Points) -> np.ndarray:
    """Sum of c_alpha Phi_alpha^lam(x); complex x evaluates the entire extension."""
    pts = _as_points(x, coeffs.n)
    if not coeffs.terms:
        return np.zeros(pts.shape[:-1], dtype=complex)
    if np.iscomplexobj(pts) and float(np.max(np.abs(pts))) * math.sqrt(abs(lam)) > HERMITE_STABLE_RADIUS:
        warnings.warn("synthesis point outside the stable complex range", RangeWarning, stacklevel=2)
    alphas, basis = hermite_basis(lam, pts, coeffs.n, coeffs.max_degree)
    index = {a: r for r, a in enumerate(alphas)}
    out = np.zeros(pts.shape[:-1], dtype=complex)
    for alpha, c in coeffs.terms.items():
        out = out + c * basis[index[alpha]]
    return out


# ----------------------------- Hermite-Bergman space ----------------------------- #

def hermite_bergman_weight(p: HermiteParams, x: Points, y: Points, use_abs: bool = False) -> np.ndarray:
    """U_t^lam(x, y) = c (sinh 4 lam t)^{-n/2} e^{lam tanh(2 lam t) x^2} e^{-lam coth(2 lam t) y^2}.

    The exponents are even in lam.  For lam < 0 the prefactor is taken verbatim, which
    is real only for even n; odd n raises unless ``use_abs``.
    """
    p.check_overflow(4.0)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if x.ndim else 1
    x = _as_points(x, n)
    y = _as_points(np.asarray(y, dtype=float), n)
    lam = p.scale if use_abs else p.lam
    s4 = math.sinh(4.0 * lam * p.t)
    if s4 < 0 and n % 2:
        raise InvalidParameterError(
            f"U_t^lam with lam={p.lam} < 0 has a non-real prefactor for odd n={n}; pass use_abs=True"
        )
    pref = hermite_bergman_constant(n, p.lam) * (abs(s4) ** (-0.5 * n)) * (np.sign(s4) ** (n // 2))
    two = 2.0 * p.scale * p.t
    expo = p.scale * math.tanh(two) * _sq(x) - p.scale / math.tanh(two) * _sq(y)
    return pref * np.exp(expo)


def hermite_bergman_rates(p: HermiteParams) -> Tuple[float, float]:
    """Gaussian decay rates in x and y of |Phi^lam(x+iy)|^2 U_t^lam."""
    two = 2.0 * p.scale * p.t
    return p.scale * (1.0 - math.tanh(two)), p.scale * (1.0 / math.tanh(two) - 1.0)


def hermite_bergman_grid(p: HermiteParams, n: int, max_degree: int = 5, spacing: float = 0.08) -> Grid:
    """Box over (x, y) capturing the decay of |e^{-tH}Phi_alpha|^2 U for |alpha| <= max_degree."""
    radii = []
    for rate in hermite_bergman_rates(p):
        r = gaussian_radius(rate)
        for _ in range(4):
            slack = 2.0 * max_degree * math.log(max(r * math.sqrt(p.scale), 1.0) * 2.0)
            r = math.sqrt((math.log(1e14) + slack) / rate)
        radii.append(r)
    h = min(spacing, math.pi / math.sqrt(60.0 * max(hermite_bergman_rates(p))))
    lo, hi, pts = [], [], []
    for r in radii:
        m = int(math.ceil(2 * r / h))
        m += m % 2
        lo.append(-r)
        hi.append(r)
        pts.append(m)
    logger.debug("hermite-bergman box: radii=%s points=%s", radii, pts)
    return Grid(tuple(lo[:1] * n + lo[1:] * n), tuple(hi[:1] * n + hi[1:] * n), tuple(pts[:1] * n + pts[1:] * n))


def hermite_bergman_norm(F: SampledField, p: HermiteParams, use_abs: bool = False) -> float:
    """sqrt of the integral of |F(x+iy)|^2 U_t^lam(x, y) over the (x, y) box of F."""
    n2 = F.grid.dim
    if n2 % 2:
        raise InvalidInputError(f"Hermite-Bergman samples live on R^(2n), got dimension {n2}")
    n = n2 // 2
    mesh = F.grid.mesh()
    weight = hermite_bergman_weight(p, mesh[..., :n], mesh[..., n:], use_abs=use_abs)
    integrand = F.with_values(np.abs(F.values) ** 2 * weight)
    value = integrate(integrand).real
    return math.sqrt(max(value, 0.0))


def sample_entire(func: Callable[[np.ndarray], np.ndarray], grid: Grid) -> SampledField:
    """Sample an entire function of z in C^n on an (x, y) grid over R^(2n)."""
    mesh = grid.mesh()
    n = grid.dim // 2
    z = mesh[..., :n] + 1j * mesh[..., n:]
    return SampledField(grid, np.asarray(func(z), dtype=complex))
