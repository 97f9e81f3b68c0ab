"""Tunneling splittings: unperturbed, complex-path, direct, perturbative
chain-assisted, and the crossover criterion between the mechanisms.

The unperturbed (b = 0) reference system is handled entirely by quadrature:
the landscape depends on the radius u = cos^2 p + cos^2 q alone, so areas,
frequencies and crossing actions reduce to one-dimensional integrals.  The
perturbed quantities come from the `classical` (tori) and `complexpath`
(crossing actions) modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import complexpath as cpath
from .classical import INNER, OUTER, ebk_energy, torus
from .errors import NoRoot, PeakSingularity, ResonantDenominator
from .model import ModelParams, eval_H, pendulum_params, separatrix_energy
from .unperturbed import (
    UnperturbedLevel,
    cell_area,
    cell_area_deriv,
    crossing_sigma_u,
    u_of_cell_area,
    unperturbed_level,
    unperturbed_splitting_quad,
)

TWO_PI = 2.0 * math.pi

#: records closer to the coupling-amplitude pole than this are flagged;
#: calibrated so the integer N nearest a pole carries the flag
NEAR_PEAK_GATE = 0.25
#: below this the sine denominator counts as an actual pole
PEAK_GATE = 1e-8


# ----------------------------------------------------------------------
# splitting formulas of the perturbed system


def unperturbed_splitting(n: int, hbar: float, params: ModelParams,
                          periodic_prefactor: bool = True) -> float:
    """Asymptotic splitting hbar*omega_n*exp(-Sigma/(2 hbar)) of the b = 0
    system, computed from the integrated torus and the shot crossing.

    With periodic_prefactor (default) the periodic-array prefactor
    2 hbar omega / pi is used instead of hbar omega.
    """
    if params.b_mod != 0.0:
        raise ValueError("unperturbed_splitting needs b_mod = 0")
    E = ebk_energy(n, hbar, INNER, params)
    tor = torus(params, E, INNER)
    sig = cpath.direct_sigma(params, E).sigma
    pref = 2.0 * hbar * tor.frequency / math.pi if periodic_prefactor \
        else hbar * tor.frequency
    return pref * math.exp(-sig / (2.0 * hbar))


def coupling_amplitude(E_n: float, hbar: float, params: ModelParams):
    """Chain-crossing coupling amplitude and its sine denominator.

    A = exp(-sigma_c/(2 hbar)) / (2 sin[(S_in - S_out)/(2 l hbar)]).
    Raises PeakSingularity when the denominator is below the pole gate.
    """
    s_in = torus(params, E_n, INNER).action
    s_out = torus(params, E_n, OUTER).action
    sig_c = cpath.chain_sigma(params, E_n).sigma
    denom = 2.0 * math.sin((s_in - s_out) / (2.0 * params.ell * hbar))
    if abs(denom) < PEAK_GATE:
        raise PeakSingularity(
            f"quantized outer torus: sine denominator {denom:.2e}")
    amp = math.exp(-sig_c / (2.0 * hbar)) / denom
    return amp, denom


def outer_splitting(E: float, hbar: float, params: ModelParams) -> float:
    """Splitting of the outer-tori doublet across the main separatrix:
    (2 hbar omega_out / pi) exp(-sigma_tilde/(2 hbar))."""
    tor = torus(params, E, OUTER)
    sig = cpath.separatrix_sigma(params, E).sigma
    return 2.0 * hbar * tor.frequency / math.pi * math.exp(-sig / (2.0 * hbar))


@dataclass
class SplittingRecord:
    """One (N, phi, b, n) comparison point across the prediction methods."""

    N: float
    hbar: float
    n: int
    phi: float
    b_mod: float
    E_n: float = math.nan
    dE_exact: float = math.nan
    dE_complex_path: float = math.nan
    dE_direct: float = math.nan
    dE_rat: float = math.nan
    dE_unpert: float = math.nan
    diagnostics: dict = field(default_factory=dict)
    flags: set = field(default_factory=set)


def resonance_assisted_splitting(n: int, hbar: float,
                                 params: ModelParams) -> SplittingRecord:
    """Two-step complex-path splitting |A|^2 * deltaE(E_n) with diagnostics.

    The crossing of the chain appears twice (once on each side), hence the
    squared amplitude.  Pole-adjacent records are flagged rather than
    raised: `near_peak` within the soft gate, `peak` with an infinite
    sentinel at the pole itself.
    """
    rec = SplittingRecord(N=math.pi / (2.0 * hbar), hbar=hbar, n=n,
                          phi=params.phi, b_mod=params.b_mod)
    E_n = ebk_energy(n, hbar, INNER, params)
    rec.E_n = E_n
    t_in = torus(params, E_n, INNER)
    t_out = torus(params, E_n, OUTER)
    sig_c = cpath.chain_sigma(params, E_n).sigma
    sig_t = cpath.separatrix_sigma(params, E_n).sigma
    d_out = outer_splitting(E_n, hbar, params)
    rec.diagnostics.update(
        sigma_c=sig_c, sigma_tilde=sig_t, S_in=t_in.action, S_out=t_out.action,
        omega_in=t_in.frequency, omega_out=t_out.frequency, delta_e_outer=d_out)
    try:
        amp, denom = coupling_amplitude(E_n, hbar, params)
    except PeakSingularity:
        rec.flags.add("peak")
        rec.diagnostics.update(A_T=math.inf, denom=0.0)
        rec.dE_complex_path = math.inf
        return rec
    rec.diagnostics.update(A_T=amp, denom=denom)
    if abs(denom) < NEAR_PEAK_GATE:
        rec.flags.add("near_peak")
    rec.dE_complex_path = amp * amp * d_out
    return rec


def direct_splitting(n: int, hbar: float, params: ModelParams) -> float:
    """Direct crossing splitting (2 hbar omega_in / pi) exp(-Sigma/(2 hbar))."""
    E_n = ebk_energy(n, hbar, INNER, params)
    tor = torus(params, E_n, INNER)
    sig = cpath.direct_sigma(params, E_n).sigma
    return 2.0 * hbar * tor.frequency / math.pi * math.exp(-sig / (2.0 * hbar))


# ----------------------------------------------------------------------
# perturbative chain-assisted prediction


@lru_cache(maxsize=256)
def island_area(params: ModelParams) -> float:
    """Phase-space area of one cell's regular region (midpoint quadrature
    of the indicator H > E_separatrix on a 1024^2 grid)."""
    e_sep = separatrix_energy(params)
    npts = 1024
    xs = (np.arange(npts) + 0.5) * math.pi / npts
    P, Q = np.meshgrid(xs, xs, indexing="ij")
    H = eval_H(P, Q, params)
    frac = float(np.mean(H > e_sep))
    return frac * math.pi ** 2


def k_cutoff(n: int, hbar: float, params: ModelParams, area=None) -> int:
    """Highest chain-coupled excitation: the ladder must stay inside the
    regular region, k_c = floor[(A/(2 pi hbar) - (2n+1)/2)/l]."""
    if area is None:
        area = island_area(params)
    return int(math.floor((area / (TWO_PI * hbar) - (2 * n + 1) / 2.0)
                          / params.ell))


def rat_splitting(n: int, hbar: float, params: ModelParams,
                  return_terms: bool = False):
    """Perturbative chain-assisted splitting.

    dE_n = dE0_n + sum_{k=1}^{k_c} |B_{n,kl}|^2 dE0_{n+kl}, where B chains
    the single-harmonic matrix elements A = 2|b| hbar^{l/2} e^{i phi}
    sqrt((m+l)!/m!) over the unperturbed energy denominators.  The phase
    drops out of |B|^2, so the result is phi-independent by construction.
    """
    ell = params.ell
    total = unperturbed_splitting_quad(n, hbar, params)
    terms = [total]
    kc = k_cutoff(n, hbar, params)
    # the ladder states live in the unperturbed cell, whose area pi^2/2 can
    # be smaller than the perturbed regular region (phi near pi); cap the
    # ladder at existing b = 0 levels
    k_exist = int(math.floor(
        (0.999 * (math.pi ** 2 / 2.0) / (TWO_PI * hbar) - n - 0.5) / ell))
    kc = min(kc, k_exist)
    if kc >= 1:
        E0_n = unperturbed_level(n, hbar, params).energy
        step_amp = 2.0 * params.b_mod * hbar ** (ell / 2.0)
        B = 1.0
        for p in range(1, kc + 1):
            m_hi = n + p * ell
            m_lo = m_hi - ell
            ratio = math.sqrt(math.factorial(m_hi) / math.factorial(m_lo))
            lev = unperturbed_level(m_hi, hbar, params)
            dE = E0_n - lev.energy
            if abs(dE) < 1e-12:
                raise ResonantDenominator(
                    f"unperturbed levels {n} and {m_hi} degenerate")
            B *= step_amp * ratio / dE
            term = B * B * 2.0 * hbar * lev.omega / math.pi \
                * math.exp(-lev.sigma / (2.0 * hbar))
            terms.append(term)
            total += term
    if return_terms:
        return total, terms
    return total


# ----------------------------------------------------------------------
# crossover criterion between direct and chain-assisted tunneling


@dataclass(frozen=True)
class CriterionResult:
    hbar_peak: float
    N_peak: float
    hbar_res: float
    N_res: float


def hbar_peak(n: int, params: ModelParams, nu: int = 1, n_min=4, n_max=64) -> float:
    """Planck's constant of the nu-th coupling-amplitude pole for level n:
    S_out - S_in = 2 pi hbar l nu at the quantized energy E_n(hbar)."""

    def gap(hbar):
        E = ebk_energy(n, hbar, INNER, params)
        ds = torus(params, E, OUTER).action - torus(params, E, INNER).action
        return ds - TWO_PI * hbar * params.ell * nu

    from .errors import ResotunnelError

    prev = None
    for N in np.linspace(n_min, n_max, 2 * (n_max - n_min) + 1):
        hb = math.pi / (2.0 * N)
        try:
            val = gap(hb)
        except (ResotunnelError, ValueError):
            prev = None
            continue
        if prev is not None:
            hb_prev, val_prev = prev
            if val_prev * val < 0:
                return brentq(gap, min(hb, hb_prev), max(hb, hb_prev),
                              xtol=1e-12)
        prev = (hb, val)
    raise NoRoot(f"no amplitude pole found for n={n} in N range "
                 f"[{n_min}, {n_max}]")


def hbar_res(n: int, params: ModelParams, rhs: float = 256.0 / math.pi) -> CriterionResult:
    """Crossover Planck constant between the direct and the chain-assisted
    regimes: root of the pendulum-geometry criterion.

    LHS = (dA_chain)^2/(l hbar A_chain) * sqrt(dE0_{n+l}/dE0_n) /
    (hbar/hbar_peak - 1), solved on (hbar_peak, 10 hbar_peak) and capped by
    the existence of the ladder level n + l; |m V| is used under the radical
    since the chain mass is negative here.
    """
    pend = pendulum_params(params)
    d_area = 16.0 * math.sqrt(2.0 * abs(pend.mass * pend.V(pend.I_res)))
    a_chain = TWO_PI * pend.I_res
    hb_peak = hbar_peak(n, params)

    def lhs(hb):
        r = unperturbed_splitting_quad(n + params.ell, hb, params) \
            / unperturbed_splitting_quad(n, hb, params)
        return d_area ** 2 / (params.ell * hb * a_chain) * math.sqrt(r) \
            / (hb / hb_peak - 1.0)

    # the ladder level n + l must still fit inside the b = 0 cell area
    hb_edge = (math.pi ** 2 / 2.0) / (TWO_PI * (n + params.ell + 0.5))
    hb_hi = min(10.0 * hb_peak, hb_edge * (1.0 - 1e-9))
    if hb_hi <= hb_peak:
        raise NoRoot("ladder level vanishes before the pole is cleared")

    def f(hb):
        return lhs(hb) - rhs

    grid = np.linspace(hb_peak * (1.0 + 1e-6), hb_hi, 200)
    val_prev = f(grid[0])
    for k in range(1, len(grid)):
        val = f(grid[k])
        if val_prev * val < 0:
            root = brentq(f, float(grid[k - 1]), float(grid[k]), xtol=1e-12)
            return CriterionResult(hbar_peak=hb_peak,
                                   N_peak=math.pi / (2.0 * hb_peak),
                                   hbar_res=root,
                                   N_res=math.pi / (2.0 * root))
        val_prev = val
    raise NoRoot(f"criterion LHS never crosses {rhs:g} on the bracket")
