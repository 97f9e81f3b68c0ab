"""Normal-form resonance-chain Hamiltonians.

The model is a quartic oscillator normal form with an order-ell resonant
coupling, made 2pi-periodic in both canonical coordinates by substituting
(cos p, cos q) for the plane coordinates.  With a1 > 0 and a2 < 0 each
elementary cell of the torus carries a volcano-shaped energy profile whose
crown breaks up into a chain of ell islands once the coupling |b| is
switched on.  Every function here is entire in (p, q), so real and complex
arguments are both accepted; complex evaluation is what the trajectory
modules rely on.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateModel, UnsupportedOrder

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Classical model definition: H = h0(cos^2 p + cos^2 q) + Re[b (cos p + i cos q)^ell].

    a1, a2 set the radial (volcano) profile, b = b_mod * exp(i phi) the
    resonant coupling, ell the resonance order.  The radial profile is
    always the quartic a1*I + a2*(2I)^2; ell only enters the resonant term.
    """

    a1: float = 1.0
    a2: float = -0.55
    b_mod: float = 0.05
    phi: float = 0.0
    ell: int = 4

    def __post_init__(self):
        if self.b_mod < 0:
            raise ValueError("b_mod is a modulus and must be >= 0")
        if int(self.ell) != self.ell or self.ell < 3:
            raise ValueError("ell must be an integer >= 3")
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "a1", float(self.a1))
        object.__setattr__(self, "a2", float(self.a2))
        object.__setattr__(self, "b_mod", float(self.b_mod))

    @property
    def b(self) -> complex:
        return self.b_mod * cmath.exp(1j * self.phi)

    def replace(self, **kw) -> "ModelParams":
        d = dict(a1=self.a1, a2=self.a2, b_mod=self.b_mod, phi=self.phi, ell=self.ell)
        d.update(kw)
        return ModelParams(**d)


@dataclass(frozen=True)
class Monomial:
    """One term coeff * cos^m(p) * cos^n(q) of the expanded Hamiltonian."""

    m: int
    n: int
    coeff: float


@dataclass(frozen=True)
class PendulumParams:
    """Local pendulum describing the island chain around the crown.

    H_loc(I, theta) = K0 + (I - I_res)^2 / (2*mass) + 2*v_coeff*I^2*cos(ell*theta + phi_res)
    """

    K0: float
    I_res: float
    phi_res: float
    mass: float
    v_coeff: float

    def V(self, I):
        """Coupling amplitude V(I) = v_coeff * I^2."""
        return self.v_coeff * I * I


def eval_normal_form(p, q, params: ModelParams):
    """Normal-form energy h(p, q) on the plane; entire in both arguments.

    For real arguments this is a1*(p^2+q^2)/2 + a2*(p^2+q^2)^2 + Re[b (p+iq)^ell].
    The resonant term is continued analytically as
    (b z^ell + conj(b) w^ell)/2 with z = p + iq and w = p - iq treated as
    independent variables, the unique entire continuation.
    """
    z = p + 1j * q
    w = p - 1j * q
    i2 = p * p + q * q
    b = params.b
    val = (0.5 * params.a1 * i2 + params.a2 * i2 * i2
           + 0.5 * (b * z ** params.ell + b.conjugate() * w ** params.ell))
    if np.isrealobj(p) and np.isrealobj(q):
        return val.real
    return val


def eval_H(p, q, params: ModelParams):
    """Periodic Hamiltonian H(p, q) = h(cos p, cos q)."""
    return eval_normal_form(np.cos(p), np.cos(q), params)


def grad_H(p, q, params: ModelParams):
    """(dH/dp, dH/dq) evaluated analytically; valid for complex arguments."""
    x = np.cos(p)
    y = np.cos(q)
    z = x + 1j * y
    w = x - 1j * y
    i2 = x * x + y * y
    b = params.b
    bc = b.conjugate()
    ell = params.ell
    zp = z ** (ell - 1)
    wp = w ** (ell - 1)
    hx = params.a1 * x + 4.0 * params.a2 * x * i2 + 0.5 * ell * (b * zp + bc * wp)
    hy = params.a1 * y + 4.0 * params.a2 * y * i2 + 0.5j * ell * (b * zp - bc * wp)
    dp = -np.sin(p) * hx
    dq = -np.sin(q) * hy
    if np.isrealobj(p) and np.isrealobj(q):
        return dp.real, dq.real
    return dp, dq


def monomials(params: ModelParams) -> list[Monomial]:
    """Expand H into coeff * cos^m(p) cos^n(q) terms (quartic resonance only).

    This decomposition is the single source of truth for quantization.
    Terms with exactly zero coefficient are dropped.
    """
    if params.ell != 4:
        raise UnsupportedOrder("monomial expansion is only defined for ell = 4")
    c = params.b_mod * math.cos(params.phi)
    s = params.b_mod * math.sin(params.phi)
    raw = [
        (2, 0, 0.5 * params.a1),
        (0, 2, 0.5 * params.a1),
        (4, 0, params.a2 + c),
        (0, 4, params.a2 + c),
        (2, 2, 2.0 * params.a2 - 6.0 * c),
        (3, 1, -4.0 * s),
        (1, 3, 4.0 * s),
    ]
    return [Monomial(m, n, co) for m, n, co in raw if co != 0.0]


def eval_monomials(p, q, params: ModelParams):
    """Reconstruct H from the monomial decomposition (consistency oracle)."""
    x = np.cos(p)
    y = np.cos(q)
    total = 0.0
    for mono in monomials(params):
        total = total + mono.coeff * x ** mono.m * y ** mono.n
    return total


def pendulum_params(params: ModelParams) -> PendulumParams:
    """Coefficients of the local pendulum around the resonant torus."""
    if params.a2 == 0:
        raise DegenerateModel("pendulum reduction needs a2 != 0")
    return PendulumParams(
        K0=-params.a1 ** 2 / (16.0 * params.a2),
        I_res=-params.a1 / (8.0 * params.a2),
        phi_res=params.phi,
        mass=1.0 / (8.0 * params.a2),
        v_coeff=2.0 * params.b_mod,
    )


def _refine_min(f, lo, mid, hi, xtol):
    """Golden-section refinement with a fallback for flat/tied brackets."""
    from scipy.optimize import minimize_scalar

    try:
        res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden",
                              options={"xtol": xtol})
        return res.fun
    except ValueError:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": xtol})
        return res.fun


def crown_energy(params: ModelParams) -> float:
    """Maximum energy along the volcano crown (upper bound for torus pairs).

    For b = 0 this is the maximum of the radial profile a1*x/2 + a2*x^2 over
    x = cos^2 p + cos^2 q in [0, 2].  For b != 0 the crown circle
    x = -a1/(4 a2) is sampled at 512 points and the maximum refined by
    golden-section search.
    """
    if params.a2 >= 0:
        raise DegenerateModel("crown requires a2 < 0")
    xstar = -params.a1 / (4.0 * params.a2)
    if params.b_mod == 0.0:
        candidates = [0.0, 2.0]
        if 0.0 <= xstar <= 2.0:
            candidates.append(xstar)
        return max(0.5 * params.a1 * x + params.a2 * x * x for x in candidates)

    r = math.sqrt(xstar)

    def ring_energy(alpha):
        x = r * math.cos(alpha)
        y = r * math.sin(alpha)
        if abs(x) > 1.0 or abs(y) > 1.0:
            return -math.inf
        return eval_normal_form(x, y, params)

    alphas = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    vals = np.array([ring_energy(a) for a in alphas])
    k = int(np.argmax(vals))
    lo = alphas[k] - TWO_PI / 512
    hi = alphas[k] + TWO_PI / 512
    return -_refine_min(lambda a: -ring_energy(a), lo, alphas[k], hi, 1e-10)


def separatrix_energy(params: ModelParams) -> float:
    """Energy of the saddle between adjacent cells (main separatrix).

    The ridge between two q-adjacent cells lies on the symmetry line q = 0,
    so the pass energy is the local maximum of p -> H(p, 0) near p = pi/2.
    By the quarter-rotation symmetry all four passes of a cell are
    equivalent.
    """
    if params.a2 >= 0:
        raise DegenerateModel("separatrix requires a2 < 0")

    def line_energy(p):
        return eval_H(p, 0.0, params)

    ps = np.linspace(0.0, math.pi, 1025)
    vals = np.array([line_energy(p) for p in ps])
    k = int(np.argmax(vals))
    lo = ps[max(k - 1, 0)]
    hi = ps[min(k + 1, len(ps) - 1)]
    return -_refine_min(lambda p: -line_energy(p), lo, ps[k], hi, 1e-12)


def radial_roots(E: float, params: ModelParams):
    """Solve a1*u/2 + a2*u^2 = E for the unperturbed radius u = cos^2 p + cos^2 q.

    Returns (u_minus, u_plus), the inner and outer contour radii of
    the b = 0 landscape.  Raises NoTorus-style ValueError when E is above
    the crown.
    """
    disc = params.a1 ** 2 + 16.0 * params.a2 * E
    if disc < 0:
        raise ValueError("energy above the unperturbed crown")
    root = math.sqrt(disc)
    u_minus = (-params.a1 + root) / (4.0 * params.a2)
    u_plus = (-params.a1 - root) / (4.0 * params.a2)
    return u_minus, u_plus


CONFIG_KEYS = ("a1", "a2", "b_mod", "phi", "ell")


def write_config(params: ModelParams, path):
    """Serialize to the flat key=value format."""
    with open(path, "w") as fh:
        for key in CONFIG_KEYS:
            fh.write(f"{key} = {getattr(params, key)!r}\n")


def read_config(path) -> ModelParams:
    """Parse the flat key=value format written by write_config."""
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            values[key] = val.strip()
    kwargs = {}
    for key, raw in values.items():
        kwargs[key] = int(raw) if key == "ell" else float(raw)
    return ModelParams(**kwargs)
