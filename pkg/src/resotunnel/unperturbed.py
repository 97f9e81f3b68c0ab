"""Quadrature geometry of the unperturbed (b = 0) landscape.

With the coupling switched off the Hamiltonian depends on the radius
u = cos^2 p + cos^2 q alone, so cell areas, oscillation frequencies and
cell-to-cell crossing actions all reduce to one-dimensional integrals in u.
These serve both as the production path for the perturbative ladder
formulas and as independent oracles for the trajectory machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import OutOfRange
from .model import ModelParams

TWO_PI = 2.0 * math.pi


@lru_cache(maxsize=65536)
def cell_area(u: float) -> float:
    """Area of {cos^2 p + cos^2 q <= u} within one elementary cell.

    Parameter-free geometry; grows from 0 to pi^2/2 as u goes 0 -> 1.
    """
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return math.pi ** 2 / 2.0
    if u > 1.0 - 1e-8:
        # asymptotic complement from A'(v) ~ 2 ln(4/(1-v)) near the
        # separatrix; relative error O((1-u)) of an O(1-u) correction
        eps1 = 1.0 - u
        return math.pi ** 2 / 2.0 - 2.0 * eps1 * (1.0 + math.log(4.0 / eps1))
    if u > 0.99:
        # the direct integrand develops an interior arcsin singularity as
        # u -> 1; integrate the smooth derivative form from u instead
        val, _ = quad(cell_area_deriv, u, 1.0, limit=200, epsabs=1e-13,
                      epsrel=1e-12)
        return math.pi ** 2 / 2.0 - val
    p_lo = math.acos(math.sqrt(u))

    def strip(p):
        v = u - math.cos(p) ** 2
        return 2.0 * math.asin(math.sqrt(v)) if v > 0 else 0.0

    val, _ = quad(strip, p_lo, math.pi - p_lo, limit=200, epsabs=1e-13,
                  epsrel=1e-12)
    return val


def cell_area_deriv(u: float) -> float:
    """dA/du = 2 * integral dt / sqrt((1 - u sin^2 t)(1 - u cos^2 t)),
    which reduces to the complete elliptic integral 4 K(m)/(2 - u) with
    m = (u/(2-u))^2.  Logarithmically divergent at the separatrix u = 1;
    the modulus is clamped one ulp below 1 so that quadrature probes of the
    endpoint stay finite."""
    if not 0.0 < u <= 1.0:
        raise ValueError("need 0 < u <= 1")
    from scipy.special import ellipk

    m = min((u / (2.0 - u)) ** 2, 1.0 - 1e-16)
    return 4.0 * float(ellipk(m)) / (2.0 - u)


@lru_cache(maxsize=65536)
def crossing_sigma_u(u: float) -> float:
    """Full-loop imaginary action of the b = 0 crossing between adjacent
    cells at radius u: on the symmetry plane Re p = pi/2 the barrier reads
    sinh^2(Im p) = cos^2 q - u, giving 2 * integral of asinh(sqrt(...))."""
    if not 0.0 < u < 1.0:
        raise ValueError("need 0 < u < 1")
    q_turn = math.acos(math.sqrt(u))

    def integrand(q):
        v = math.cos(q) ** 2 - u
        return math.asinh(math.sqrt(v)) if v > 0 else 0.0

    val, _ = quad(integrand, -q_turn, q_turn, limit=200, epsabs=1e-13,
                  epsrel=1e-12)
    return 2.0 * val


def u_of_cell_area(S: float) -> float:
    """Invert A(u) = S on (0, 1)."""
    if not 0.0 < S < math.pi ** 2 / 2.0:
        raise OutOfRange(f"action {S:g} outside (0, pi^2/2)")
    return brentq(lambda u: cell_area(u) - S, 1e-14, 1.0 - 1e-14,
                  xtol=1e-15, rtol=8.9e-16)


@dataclass(frozen=True)
class UnperturbedLevel:
    """One action-quantized level of the b = 0 landscape."""

    m: int
    u: float
    energy: float
    omega: float
    sigma: float


def unperturbed_level(m: int, hbar: float, params: ModelParams) -> UnperturbedLevel:
    """EBK level of the b = 0 system: the torus with action 2 pi hbar (m+1/2).

    The action coordinate runs across both branches (inner below the
    resonant radius, outer above), so arbitrarily excited cell states are
    covered until the cell area is exhausted.
    """
    S = TWO_PI * hbar * (m + 0.5)
    u = u_of_cell_area(S)
    energy = 0.5 * params.a1 * u + params.a2 * u * u
    dH = 0.5 * params.a1 + 2.0 * params.a2 * u
    omega = abs(TWO_PI * dH / cell_area_deriv(u))
    return UnperturbedLevel(m=m, u=u, energy=energy, omega=omega,
                            sigma=crossing_sigma_u(u))


def unperturbed_splitting_quad(m: int, hbar: float, params: ModelParams) -> float:
    """(2 hbar omega / pi) exp(-sigma/(2 hbar)) for the b = 0 level m."""
    lev = unperturbed_level(m, hbar, params)
    return 2.0 * hbar * lev.omega / math.pi * math.exp(-lev.sigma / (2.0 * hbar))
