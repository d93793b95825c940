"""Frozen normalisation constants.

Every constant the library fixes by convention lives here together with the
identity that pins it.  ``manifest(n)`` is printed into every report and table
header so the numbers behind a run can be audited in one place.
"""

from __future__ import annotations

import math
from typing import Dict

# ---- kernel normalisations ---- #


def p_kernel_constant(n: int) -> float:
    """(4 pi)^-n, pinned by p_t *_lam p_s = p_{t+s}."""
    return (4.0 * math.pi) ** (-n)


def heat_kernel_constant(n: int) -> float:
    """(2 pi)^-1 (4 pi)^-n, pinned by the partial Fourier relation with p_t."""
    return (4.0 * math.pi) ** (-n) / (2.0 * math.pi)


def mehler_constant(n: int, lam: float) -> float:
    """(|lam| / 4 pi)^(n/2), pinned by the ground-state eigenrelation."""
    return (abs(lam) / (4.0 * math.pi)) ** (0.5 * n)


def hermite_bergman_constant(n: int, lam: float) -> float:
    """(2 |lam| / pi)^(n/2): makes e^{-tH(lam)} an exact isometry onto the weighted space."""
    return (2.0 * abs(lam) / math.pi) ** (0.5 * n)


def torus_weight_prefactor(n: int, t: float) -> float:
    """(2 pi t)^-n: the constant function has torus Bergman norm one."""
    return (2.0 * math.pi * t) ** (-n)


# The kernel of pi_lam(k_t) equals e^{-t lam^2} times the Mehler kernel exactly.
C_LAMBDA = 1.0

INVERSION_CAP = 1.0e8
HERMITE_STABLE_RADIUS = 20.0
HERMITE_STABLE_DEGREE = 200
OVERFLOW_THRESHOLD = 350.0
DEFAULT_LAMBDA_NODES = 2048
GAUSSIAN_CUTOFF = 1.0e-14


def manifest(n: int, t: float = 0.1, k: int = 1) -> Dict[str, object]:
    """Constants with provenance, keyed by name (deterministic ordering by key)."""
    lam = 4.0 * math.pi * k
    return {
        "c_lambda": {"value": C_LAMBDA, "pinned_by": "kernel of pi_lam(k_t) = e^{-t lam^2} K_t^lam"},
        "heat_kernel": {"value": heat_kernel_constant(n), "pinned_by": "int k_t e^{i lam xi} dxi = e^{-t lam^2} p_t^lam"},
        "hermite_bergman": {"value": hermite_bergman_constant(n, lam), "pinned_by": "Hermite-Bergman norm ratio equal to one"},
        "hermite_stable_range": {"value": [HERMITE_STABLE_RADIUS, HERMITE_STABLE_DEGREE], "pinned_by": "|z| <= 20, |alpha| <= 200"},
        "inversion_cap": {"value": INVERSION_CAP, "pinned_by": "e^{(2N+n)|lam|t} <= cap"},
        "lambda_nodes": {"value": DEFAULT_LAMBDA_NODES, "pinned_by": "uniform grid on [-L, L], L = sqrt(ln(1e14)/t) + 4"},
        "mehler": {"value": mehler_constant(n, lam), "pinned_by": "int K Phi_0 = e^{-n|lam|t} Phi_0"},
        "p_kernel": {"value": p_kernel_constant(n), "pinned_by": "p_t *_lam p_s = p_{t+s}"},
        "torus_weight": {"value": torus_weight_prefactor(n, t), "pinned_by": "torus Bergman norm of 1 equals 1"},
    }
