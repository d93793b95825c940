"""
Grids, rectangle-rule quadrature, certified lattice sums and periodic Fourier
coefficients.  Everything else in nilheat is built on these four pieces.

Nodes on every axis are ``lo + i*h`` with ``h = (hi - lo) / N``.  On periodic axes
that is the rectangle rule; on decayed integrands it agrees with the trapezoid rule
up to the boundary magnitude, which ``integrate`` reports as a TruncationWarning.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft as sfft

from .constants import GAUSSIAN_CUTOFF
from .errors import AliasingError, InvalidInputError, NonConvergenceError, TruncationWarning

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float], float]
VectorFunction = Callable[[np.ndarray], np.ndarray]

DECAY_THRESHOLD = 1.0e-10


# ----------------------------- Grids ----------------------------- #

@dataclass(frozen=True)
class Grid:
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    points: Tuple[int, ...]
    periodic: Tuple[bool, ...] = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        pts = tuple(int(v) for v in np.atleast_1d(self.points))
        if len(pts) == 1 and len(lo) > 1:
            pts = pts * len(lo)
        per = tuple(bool(v) for v in np.atleast_1d(self.periodic)) if len(self.periodic) else (False,) * len(lo)
        if len(per) == 1 and len(lo) > 1:
            per = per * len(lo)
        if not (len(lo) == len(hi) == len(pts) == len(per)):
            raise InvalidInputError(f"grid axes disagree: lo={lo}, hi={hi}, points={pts}, periodic={per}")
        if not lo:
            raise InvalidInputError("grid has no axes")
        for i, (a, b, p) in enumerate(zip(lo, hi, pts)):
            if p <= 0:
                raise InvalidInputError(f"axis {i}: points_per_axis must be positive, got {p}")
            if not a < b:
                raise InvalidInputError(f"axis {i}: lo={a} must be below hi={b}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "periodic", per)

    @classmethod
    def cube(cls, dim: int, radius: float, points: int, center: ArrayLike = 0.0) -> "Grid":
        """Symmetric box [c - r, c + r)^dim; the center is a node when points is even."""
        c = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
        return cls(tuple(c - radius), tuple(c + radius), (points,) * dim)

    @classmethod
    def cell(cls, dim: int, points: int, period: float = 1.0) -> "Grid":
        """One period [0, period)^dim with periodic axes."""
        return cls((0.0,) * dim, (float(period),) * dim, (points,) * dim, (True,) * dim)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / np.asarray(self.points)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(np.asarray(self.hi) - np.asarray(self.lo)))

    def axes(self) -> list:
        return [a + h * np.arange(p) for a, h, p in zip(self.lo, self.spacing, self.points)]

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape ``points + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def product(self, other: "Grid") -> "Grid":
        return Grid(self.lo + other.lo, self.hi + other.hi, self.points + other.points, self.periodic + other.periodic)

    def select(self, axes: Sequence[int]) -> "Grid":
        axes = list(axes)
        return Grid(
            tuple(self.lo[i] for i in axes),
            tuple(self.hi[i] for i in axes),
            tuple(self.points[i] for i in axes),
            tuple(self.periodic[i] for i in axes),
        )


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.size != self.grid.size:
            raise InvalidInputError(f"values length {vals.size} != product of points_per_axis {self.grid.size}")
        object.__setattr__(self, "values", vals.reshape(self.grid.points).astype(complex, copy=False))

    @classmethod
    def from_function(cls, f: VectorFunction, grid: Grid) -> "SampledField":
        return cls(grid, np.asarray(f(grid.mesh()), dtype=complex))

    def with_values(self, values: np.ndarray) -> "SampledField":
        return SampledField(self.grid, values)

    def boundary_magnitude(self) -> float:
        """Largest |value| on the faces of non-periodic axes, relative to max |value|."""
        peak = float(np.max(np.abs(self.values))) if self.values.size else 0.0
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for axis, periodic in enumerate(self.grid.periodic):
            if periodic:
                continue
            first = np.take(self.values, 0, axis=axis)
            last = np.take(self.values, -1, axis=axis)
            edge = max(edge, float(np.max(np.abs(first))), float(np.max(np.abs(last))))
        return edge / peak

    def norm(self) -> float:
        return math.sqrt(integrate(self.with_values(np.abs(self.values) ** 2), check_decay=False).real)


def gaussian_radius(rate: float, rel: float = GAUSSIAN_CUTOFF, offset: float = 0.0) -> float:
    """Radius R with exp(-rate * (R - offset)^2) < rel."""
    if rate <= 0:
        raise InvalidInputError(f"Gaussian rate must be positive, got {rate}")
    return offset + math.sqrt(math.log(1.0 / rel) / rate)


# ----------------------------- Quadrature ----------------------------- #

def integrate(f: SampledField, check_decay: bool = True) -> complex:
    """Tensor rectangle-rule integral of a sampled field."""
    if f.values.size == 0:
        raise InvalidInputError("cannot integrate over an empty grid")
    if check_decay:
        edge = f.boundary_magnitude()
        if edge > DECAY_THRESHOLD:
            warnings.warn(f"integrand boundary magnitude {edge:.2e} (relative)", TruncationWarning, stacklevel=2)
    return complex(np.sum(f.values) * f.grid.cell_volume)


def fourier_coefficient(f: SampledField, m: Sequence[int], axes: Optional[Sequence[int]] = None):
    """Normalised Fourier coefficient over the selected periodic axes.

    Returns ``(1/P) * int f(x) exp(-2 pi i m.x / period) dx``; a complex number when
    every axis is selected, otherwise a SampledField over the remaining axes.
    """
    axes = list(range(f.grid.dim)) if axes is None else [int(a) for a in axes]
    m = [int(v) for v in np.atleast_1d(m)]
    if len(m) != len(axes):
        raise InvalidInputError(f"index {m} does not match the {len(axes)} selected axes")
    for a in axes:
        if not f.grid.periodic[a]:
            raise InvalidInputError(f"axis {a} is not flagged periodic")
    npts = [f.grid.points[a] for a in axes]
    if any(2 * abs(mi) >= p for mi, p in zip(m, npts)):
        raise AliasingError(m, npts)

    vals = f.values
    grid_axes = f.grid.axes()
    for a, mi in zip(axes, m):
        period = f.grid.hi[a] - f.grid.lo[a]
        phase = np.exp(-2j * np.pi * mi * grid_axes[a] / period)
        shape = [1] * f.grid.dim
        shape[a] = -1
        vals = vals * phase.reshape(shape)
    coeff = np.mean(vals, axis=tuple(axes))
    rest = [a for a in range(f.grid.dim) if a not in axes]
    if not rest:
        return complex(coeff)
    return SampledField(f.grid.select(rest), coeff)


def fourier_series(values: np.ndarray, axis: int, lo: float = 0.0, period: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """All resolvable normalised coefficients along one periodic axis.

    Returns ``(indices, coefficients)`` with the coefficient axis in place of ``axis``.
    """
    npts = values.shape[axis]
    coeffs = sfft.fft(values, axis=axis) / npts
    idx = sfft.fftfreq(npts, d=1.0 / npts).astype(int)
    if lo != 0.0:
        shape = [1] * values.ndim
        shape[axis] = -1
        coeffs = coeffs * np.exp(-2j * np.pi * idx * lo / period).reshape(shape)
    return idx, coeffs


def spectral_shift(values: np.ndarray, shift: Sequence[float], spacing: Sequence[float]) -> np.ndarray:
    """Band-limited translation g(x) = f(x + shift) of a field decayed within its box."""
    out = sfft.fftn(values)
    for axis, (s, h) in enumerate(zip(shift, spacing)):
        npts = values.shape[axis]
        freq = sfft.fftfreq(npts, d=h)
        shape = [1] * values.ndim
        shape[axis] = -1
        out = out * np.exp(2j * np.pi * freq * s).reshape(shape)
    return sfft.ifftn(out)


# ----------------------------- Lattice sums ----------------------------- #

@dataclass(frozen=True)
class GaussianBound:
    """|term(gamma)| <= scale * exp(-rate * |gamma - center|^2)."""

    scale: float
    rate: float
    center: Tuple[float, ...] = ()

    def tail(self, radius: float, dim: int) -> float:
        r_eff = max(radius, 0.0)
        total = 0.0
        r = int(math.floor(r_eff))
        while True:
            rr = max(float(r), r_eff)
            term = (2 * r + 3) ** dim * math.exp(-self.rate * rr * rr)
            total += term
            if r > r_eff + 2 and term < 1e-300 + 1e-18 * total:
                break
            r += 1
        return self.scale * total


@dataclass(frozen=True)
class LatticeSum:
    value: np.ndarray
    tail_bound: float
    terms: int


@lru_cache(maxsize=64)
def _ball(dim: int, radius: float) -> np.ndarray:
    r = int(math.floor(radius))
    rng = range(-r, r + 1)
    pts = np.array(list(itertools.product(rng, repeat=dim)), dtype=int).reshape(-1, dim)
    keep = np.sum(pts.astype(float) ** 2, axis=1) <= radius * radius + 1e-12
    pts = pts[keep]
    order = np.lexsort(tuple(pts[:, i] for i in reversed(range(dim))) + (np.sum(pts**2, axis=1),))
    out = pts[order]
    out.setflags(write=False)
    return out


def lattice_points(dim: int, radius: float, center: Optional[Sequence[float]] = None) -> np.ndarray:
    """Integer vectors gamma with |gamma - center| <= radius, sorted by norm."""
    if center is None:
        return _ball(int(dim), float(radius))
    c = np.asarray(center, dtype=float)
    base = np.rint(c).astype(int)
    pts = _ball(int(dim), float(radius) + math.sqrt(dim)) + base
    keep = np.sum((pts - c) ** 2, axis=1) <= radius * radius + 1e-12
    return pts[keep]


def lattice_sum(
    term: Callable[[np.ndarray], np.ndarray],
    dim: int,
    radius: float,
    tol: float,
    bound: Optional[GaussianBound] = None,
    center: Optional[Sequence[float]] = None,
    relative: bool = False,
) -> LatticeSum:
    """Sum ``term`` over the integer lattice ball of the given radius.

    ``term`` receives an (N, dim) integer array and returns shape (N, ...); the sum
    runs over the first axis.  With a GaussianBound the tail is certified, otherwise
    it is estimated from the outermost shell.  A tail above ``tol`` (times the largest
    summed value when ``relative``) raises.
    """
    if center is None and bound is not None and bound.center:
        center = bound.center
    pts = lattice_points(dim, radius, center)
    if len(pts) == 0:
        raise InvalidInputError(f"no lattice points within radius {radius}")
    vals = np.asarray(term(pts))
    value = np.sum(vals, axis=0)

    if bound is not None:
        tail = bound.tail(radius, dim)
    else:
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        dist = np.sqrt(np.sum((pts - c) ** 2, axis=1))
        shell = dist > radius - 1.0
        mags = np.abs(vals.reshape(len(pts), -1)).max(axis=1)
        edge = float(mags[shell].max()) if np.any(shell) else float(mags.max())
        outer = len(lattice_points(dim, radius + 1.0)) - len(lattice_points(dim, radius))
        tail = 2.0 * edge * max(outer, 1)
    logger.debug("lattice sum: dim=%d radius=%.2f terms=%d tail=%.2e", dim, radius, len(pts), tail)
    limit = tol * max(1.0, float(np.max(np.abs(value), initial=0.0))) if relative else tol
    if tail > limit:
        raise NonConvergenceError(tail, limit)
    return LatticeSum(value, tail, len(pts))


# ----------------------------- Test functions ----------------------------- #

FunctionLike = Union[SampledField, VectorFunction]


def evaluate(f: FunctionLike, pts: np.ndarray) -> np.ndarray:
    """Values of a callable or of a sampled field at points of shape (..., d).

    Sampled fields are looked up at their nodes; points off the node lattice raise,
    points outside the box read as zero.
    """
    pts = np.asarray(pts)
    if callable(f):
        return np.asarray(f(pts))
    grid = f.grid
    if pts.shape[-1] != grid.dim:
        raise InvalidInputError(f"points have dimension {pts.shape[-1]}, field has {grid.dim}")
    pos = (pts - np.asarray(grid.lo)) / grid.spacing
    idx = np.rint(pos)
    if np.any(np.abs(pos - idx) > 1e-6):
        raise InvalidInputError("points do not lie on the nodes of the sampled field")
    idx = idx.astype(int)
    inside = np.all((idx >= 0) & (idx < np.asarray(grid.points)), axis=-1)
    safe = np.where(inside[..., None], idx, 0)
    vals = f.values[tuple(np.moveaxis(safe, -1, 0))]
    return np.where(inside, vals, 0.0)


def gaussian_function(center: ArrayLike = 0.0, width: float = 1.0, amplitude: complex = 1.0, frequency: ArrayLike = 0.0) -> VectorFunction:
    """x -> amplitude * exp(-|x - center|^2 / (2 width^2) + 2 pi i frequency.x)."""
    c = np.asarray(center, dtype=float)
    fr = np.asarray(frequency, dtype=float)

    def f(x: np.ndarray) -> np.ndarray:
        d = np.asarray(x) - c
        return amplitude * np.exp(-np.sum(d * d, axis=-1) / (2.0 * width * width) + 2j * np.pi * np.sum(np.asarray(x) * fr, axis=-1))

    return f
