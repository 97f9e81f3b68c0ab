"""Torus Hilbert space, symmetrized quantization and exact splittings.

The Hamiltonian is quantized on the finite Hilbert space of strictly
periodic states on the torus [-pi, pi] x [-pi, pi].  The dimension is
D = 2*pi/hbar = 4N with N = pi/(2*hbar) integer, which puts the four cell
centers (+-pi/2, +-pi/2) on the grid.  Each monomial cos^m(p) cos^n(q) is
quantized with the symmetrization rule f(p)g(q) -> (f g + g f)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_hermite

from .errors import PoorLocalization, SolverFailure, UnsupportedOrder
from .model import ModelParams, monomials

TWO_PI = 2.0 * math.pi


class TorusGrid:
    """Discretization of the torus at hbar = pi/(2N), dimension D = 4N."""

    def __init__(self, N: int):
        if int(N) != N or N < 2:
            raise ValueError("N must be an integer >= 2")
        self.N = int(N)
        self.D = 4 * self.N
        self.hbar = TWO_PI / self.D
        j = np.arange(self.D)
        self.q_points = -math.pi + TWO_PI * j / self.D
        self.p_points = -math.pi + TWO_PI * j / self.D

    def fourier_kernel(self) -> np.ndarray:
        """F[k, j] = exp(-i p_k q_j / hbar) / sqrt(D), position -> momentum."""
        phase = np.outer(self.p_points, self.q_points) / self.hbar
        return np.exp(-1j * phase) / math.sqrt(self.D)

    def reflection_index(self) -> np.ndarray:
        """Grid permutation implementing q -> -q (j -> (D - j) mod D)."""
        return (self.D - np.arange(self.D)) % self.D

    def __repr__(self):
        return f"TorusGrid(N={self.N})"


def build_hamiltonian(params: ModelParams, grid: TorusGrid) -> np.ndarray:
    """Dense D x D matrix of the symmetrized quantization of the model.

    H = sum over monomials of coeff * (Cp^m Cq^n + Cq^n Cp^m)/2 with
    Cq = diag(cos q_j) and Cp = F^dagger diag(cos p_k) F.
    """
    if params.ell != 4:
        raise UnsupportedOrder("quantization is implemented for ell = 4")
    terms = monomials(params)
    F = grid.fourier_kernel()
    cosq = np.cos(grid.q_points)
    Cp = F.conj().T @ (np.cos(grid.p_points)[:, None] * F)
    max_m = max(t.m for t in terms)
    cp_pow = [np.eye(grid.D, dtype=complex), Cp]
    for _ in range(2, max_m + 1):
        cp_pow.append(cp_pow[-1] @ Cp)
    H = np.zeros((grid.D, grid.D), dtype=complex)
    for t in terms:
        A = cp_pow[t.m]
        d = cosq ** t.n
        H += (0.5 * t.coeff) * (A * d[None, :] + d[:, None] * A)
    return H


@dataclass
class SpectrumResult:
    """Full eigensolution with parity labels under the grid reflection."""

    energies: np.ndarray
    states: np.ndarray            # eigenvectors as columns
    parity: np.ndarray            # +-1 under q -> -q
    hnorm: float                  # spectral norm estimate of H
    quartet_overlaps: dict = field(default_factory=dict)  # n -> (D, 4) |overlap|^2


def diagonalize(H: np.ndarray, grid: TorusGrid) -> SpectrumResult:
    """Dense eigensolution; degenerate subspaces rotated to parity eigenbasis."""
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(str(exc)) from exc
    ridx = grid.reflection_index()
    hnorm = float(np.max(np.abs(w)))
    ctol = 1e-11 * max(hnorm, 1.0)
    i = 0
    D = grid.D
    while i < D:
        j = i + 1
        while j < D and w[j] - w[j - 1] < ctol:
            j += 1
        if j - i > 1:
            sub = V[:, i:j]
            rsub = sub.conj().T @ sub[ridx, :]
            rsub = 0.5 * (rsub + rsub.conj().T)
            _, U = np.linalg.eigh(rsub)
            V[:, i:j] = sub @ U
        i = j
    par = np.real(np.einsum("ij,ij->j", V.conj(), V[ridx, :]))
    parity = np.where(par >= 0.0, 1, -1)
    return SpectrumResult(energies=w, states=V, parity=parity, hnorm=hnorm)


def local_state(n: int, center, grid: TorusGrid, params: ModelParams) -> np.ndarray:
    """Periodized n-th harmonic oscillator state at center = (q0, p0).

    The quadratic expansion of the Hamiltonian at a cell center is an
    isotropic oscillator with frequency a1 and unit m*omega, so the position
    width is sqrt(hbar) independent of a1.  Image sum over 3 periodic copies.
    """
    if n > 4:
        raise ValueError("local states are supported for n <= 4")
    hbar = grid.hbar
    if math.sqrt(hbar * (n + 0.5)) > math.pi / 4:
        raise PoorLocalization(
            f"oscillator state n={n} spreads beyond a quarter cell at N={grid.N}")
    q0, p0 = center
    w = math.sqrt(hbar)
    norm0 = 1.0 / (math.pi ** 0.25 * math.sqrt(w) * math.sqrt(2.0 ** n * math.factorial(n)))
    psi = np.zeros(grid.D, dtype=complex)
    for shift in (-TWO_PI, 0.0, TWO_PI):
        x = grid.q_points - q0 + shift
        phi = norm0 * eval_hermite(n, x / w) * np.exp(-x * x / (2.0 * hbar))
        psi += phi * np.exp(1j * p0 * x / hbar)
    return psi / np.linalg.norm(psi)


@dataclass
class QuartetStates:
    """The four local states and their signed combinations for level n."""

    n: int
    locals: dict          # 'RU','LU','LD','RD' -> vector
    combos: dict          # '++','-+','+-','--' -> vector


def quartet_states(n: int, grid: TorusGrid, params: ModelParams) -> QuartetStates:
    """Signed combinations of the four local oscillator states (with the
    i prefactor on the +- and -- members)."""
    half = math.pi / 2
    centers = {
        "RU": (half, half),
        "LU": (-half, half),
        "LD": (-half, -half),
        "RD": (half, -half),
    }
    loc = {k: local_state(n, c, grid, params) for k, c in centers.items()}
    # phase convention: the grid reflection q -> -q maps an n-th oscillator
    # state at (q0, p0) to (-1)^n times the state at (-q0, -p0); absorbing
    # that sign into the lower row makes the combination parities below
    # independent of n (+1 for ++ and --, -1 for +- and -+).
    sign = (-1.0) ** n
    loc["LD"] = sign * loc["LD"]
    loc["RD"] = sign * loc["RD"]
    ru, lu, ld, rd = loc["RU"], loc["LU"], loc["LD"], loc["RD"]
    combos = {
        "++": 0.5 * (ru + lu + ld + rd),
        "-+": 0.5 * (ru - lu - ld + rd),
        "+-": 0.5j * (ru + lu - ld - rd),
        "--": 0.5j * (ru - lu + ld - rd),
    }
    for key, vec in combos.items():
        combos[key] = vec / np.linalg.norm(vec)
    return QuartetStates(n=n, locals=loc, combos=combos)


@dataclass
class SplittingResult:
    """Exact splitting of the (++, -+) doublet for one level index."""

    n: int
    delta_e: float
    picks: dict           # label -> (index, energy, |overlap|^2)
    flags: set
    ties: dict

    @property
    def low_confidence(self):
        return "low_confidence" in self.flags


def assign_quartet(spectrum: SpectrumResult, quartets: QuartetStates,
                   labels=("++", "-+", "+-", "--"), overlap_threshold=0.25,
                   tie_tol=1e-6):
    """Pick, for each quartet label, the eigenstate of maximal |overlap|^2.

    Returns (picks, flags, ties): picks maps label -> (index, energy,
    overlap2); flags collects 'low_confidence' and 'ambiguous' conditions
    rather than raising, since hybridized states near peaks are physically
    meaningful; on a tie both contenders are kept in ties[label].
    """
    V = spectrum.states
    picks = {}
    ties = {}
    flags = set()
    ov_all = np.empty((V.shape[1], len(labels)))
    for col, label in enumerate(labels):
        amps = V.conj().T @ quartets.combos[label]
        ov = np.abs(amps) ** 2
        ov_all[:, col] = ov
        order = np.argsort(ov)
        best = int(order[-1])
        if len(order) > 1 and ov[order[-1]] - ov[order[-2]] < tie_tol:
            flags.add("ambiguous")
            second = int(order[-2])
            ties[label] = [(best, float(spectrum.energies[best]), float(ov[best])),
                           (second, float(spectrum.energies[second]),
                            float(ov[second]))]
        if ov[best] < overlap_threshold:
            flags.add("low_confidence")
        picks[label] = (best, float(spectrum.energies[best]), float(ov[best]))
    spectrum.quartet_overlaps[quartets.n] = ov_all
    return picks, flags, ties


def exact_splitting(n: int, grid: TorusGrid, params: ModelParams,
                    spectrum: SpectrumResult | None = None,
                    quartets: QuartetStates | None = None) -> SplittingResult:
    """Exact tunneling splitting |E(++) - E(-+)| from dense diagonalization."""
    if spectrum is None:
        spectrum = diagonalize(build_hamiltonian(params, grid), grid)
    if quartets is None:
        quartets = quartet_states(n, grid, params)
    picks, flags, ties = assign_quartet(spectrum, quartets)
    delta = abs(picks["++"][1] - picks["-+"][1])
    return SplittingResult(n=n, delta_e=delta, picks=picks, flags=flags,
                           ties=ties)
