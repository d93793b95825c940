"""Exception hierarchy and warning categories shared by every nilheat module."""

from __future__ import annotations

from typing import Optional, Sequence


class NilheatError(Exception):
    """Root of all library errors."""


class InvalidInputError(NilheatError, ValueError):
    """Malformed fields: empty or mismatched grids, broken quasi-periodicity."""


class InvalidParameterError(NilheatError, ValueError):
    """A scalar parameter outside its admissible range (lambda = 0, t <= 0, ...)."""


class AliasingError(NilheatError):
    """A Fourier index the grid cannot resolve."""

    def __init__(self, index: Sequence[int], points: Sequence[int]):
        self.index = tuple(int(i) for i in index)
        self.points = tuple(int(p) for p in points)
        super().__init__(
            f"Fourier index {self.index} is beyond the Nyquist limit of a grid with {self.points} points"
        )


class NonConvergenceError(NilheatError):
    """A truncated series whose tail bound exceeds the requested tolerance."""

    def __init__(self, estimate: float, tol: float, what: str = "lattice sum"):
        self.estimate = float(estimate)
        self.tol = float(tol)
        super().__init__(f"{what} did not converge: tail estimate {self.estimate:.3e} > tol {self.tol:.3e}")


class KernelOverflowError(NilheatError, OverflowError):
    """sinh/cosh factors would overflow double precision."""

    def __init__(self, product: float, threshold: float):
        self.product = float(product)
        self.threshold = float(threshold)
        super().__init__(f"|lambda|*t = {self.product:.4g} exceeds the overflow threshold {self.threshold:.4g}")


class IllPosedError(NilheatError):
    """Backward heat flow amplification above the conditioning cap."""

    def __init__(self, alpha: Sequence[int], amplification: float, cap: float):
        self.alpha = tuple(int(a) for a in alpha)
        self.amplification = float(amplification)
        self.cap = float(cap)
        super().__init__(
            f"inverting the Hermite semigroup at alpha={self.alpha} amplifies by "
            f"{self.amplification:.3e} > cap {self.cap:.1e}"
        )


class ConfigError(NilheatError):
    """Configuration validation failure; always names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ParseError(NilheatError):
    """Input table parse failure; always names the line."""

    def __init__(self, line: int, message: str, path: Optional[str] = None):
        self.line = int(line)
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")


class TruncationWarning(UserWarning):
    """An integrand or series was cut where it had not decayed enough."""


class RangeWarning(UserWarning):
    """Complex Hermite evaluation outside the documented stable range."""


class ResampleWarning(UserWarning):
    """A shifted field left its grid and was zero-filled."""
