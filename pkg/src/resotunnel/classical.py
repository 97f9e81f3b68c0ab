"""Real classical dynamics: orbits, tori, actions and EBK quantization.

Orbits are integrated with an adaptive high-order Runge-Kutta scheme; the
state is augmented with the winding angle around the cell center (for
first-return detection) and the running action integral p dq.  Tori are
located by root finding along scan rays from the island center and
classified by their mean radial coordinate u = cos^2 p + cos^2 q relative
to the resonant radius u* = -a1/(4 a2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import NoReturn, NoTorus, OpenContour, OutOfRange, SeparatrixProximity
from .model import ModelParams, crown_energy, eval_H

TWO_PI = 2.0 * math.pi
CELL_CENTER = (math.pi / 2, math.pi / 2)

INNER = "inner"
OUTER = "outer"

#: adaptive integrator settings; splittings are exponentially sensitive to
#: actions, so the tolerances are kept very tight
RTOL = 1e-12
ATOL = 1e-13
_METHOD = "DOP853"


def _vector_field(params: ModelParams, center):
    """RHS closure for [p, q, theta, A] with scalar math (hot path)."""
    a1, a2 = params.a1, params.a2
    b = params.b
    ell = params.ell
    ellm1 = ell - 1
    pc, qc = center
    cos, sin = math.cos, math.sin

    def rhs(t, y):
        p, q = y[0], y[1]
        x = cos(p)
        yy = cos(q)
        i2 = x * x + yy * yy
        bz = b * complex(x, yy) ** ellm1
        hx = a1 * x + 4.0 * a2 * x * i2 + ell * bz.real
        hy = a1 * yy + 4.0 * a2 * yy * i2 - ell * bz.imag
        dq = -sin(p) * hx      # dH/dp
        dp = sin(q) * hy       # -dH/dq
        rp = p - pc
        rq = q - qc
        r2 = rp * rp + rq * rq
        dth = (rp * dq - rq * dp) / r2 if r2 > 1e-300 else 0.0
        return (dp, dq, dth, p * dq)

    return rhs


@dataclass
class Orbit:
    """One integrated real orbit; closed when period is not None."""

    times: np.ndarray
    samples: np.ndarray        # (M, 2) columns p, q
    energy: float
    period: float | None = None
    action: float | None = None
    winding: int | None = None


def integrate_orbit(start, params: ModelParams, *, t_max=None, first_return=False,
                    center=CELL_CENTER, period_cap=None, n_samples=2048) -> Orbit:
    """Integrate Hamilton's equations from a real phase point.

    Stops either after the fixed duration t_max or at the first return to
    the launch ray from `center` with matching circulation (first_return).
    Raises NoReturn when no return occurs within the period cap.
    """
    p0, q0 = float(start[0]), float(start[1])
    energy = float(eval_H(p0, q0, params))
    if period_cap is None:
        period_cap = 1e4 * TWO_PI / abs(params.a1)
    theta0 = math.atan2(q0 - center[1], p0 - center[0])
    y0 = (p0, q0, theta0, 0.0)
    rhs = _vector_field(params, center)

    if first_return:
        def ev_plus(t, y):
            return y[2] - theta0 - TWO_PI

        def ev_minus(t, y):
            return y[2] - theta0 + TWO_PI

        ev_plus.terminal = True
        ev_minus.terminal = True
        sol = solve_ivp(rhs, (0.0, period_cap), y0, method=_METHOD,
                        rtol=RTOL, atol=ATOL, dense_output=True,
                        events=(ev_plus, ev_minus))
        t_end = None
        winding = None
        for k, te in enumerate(sol.t_events):
            if len(te):
                t_end = float(te[0])
                winding = 1 if k == 0 else -1
        if t_end is None:
            raise NoReturn(
                f"no first return within t={period_cap:g} from ({p0:.4f}, {q0:.4f})")
        yT = sol.sol(t_end)
        if math.hypot(yT[0] - p0, yT[1] - q0) > 1e-6:
            raise NoReturn("launch-ray crossing does not close on the launch point")
        ts = np.linspace(0.0, t_end, n_samples + 1)
        ys = sol.sol(ts)
        return Orbit(times=ts, samples=ys[:2].T.copy(), energy=energy,
                     period=t_end, action=abs(float(yT[3])), winding=winding)

    if t_max is None:
        raise ValueError("need t_max when first_return is False")
    ts = np.linspace(0.0, float(t_max), n_samples + 1)
    sol = solve_ivp(rhs, (0.0, float(t_max)), y0, method=_METHOD,
                    rtol=RTOL, atol=ATOL, t_eval=ts)
    return Orbit(times=sol.t, samples=sol.y[:2].T.copy(), energy=energy)


@dataclass
class RealTorus:
    """One invariant torus at fixed energy with its action data."""

    energy: float
    branch: str                # INNER or OUTER
    action: float
    period: float
    frequency: float
    samples: np.ndarray        # (M, 2), closed: first row == last row (tol)
    times: np.ndarray
    launch: tuple
    center: tuple
    u_mean: float

    def point_at(self, s: float):
        """Phase point at time s along the torus (by index interpolation)."""
        s = s % self.period
        k = int(round(s / self.period * (len(self.times) - 1)))
        return tuple(self.samples[k])


def _ray_candidates(E, params, center, n_rays=16, n_samples=513):
    """Launch candidates with H = E along scan rays from the center.

    Yields (radius, point) per ray sorted by radius.
    """
    pc, qc = center
    for i in range(n_rays):
        alpha = TWO_PI * i / n_rays
        ca, sa = math.cos(alpha), math.sin(alpha)
        rmax = (math.pi / 2) / max(abs(ca), abs(sa)) * 0.999
        rr = np.linspace(0.0, rmax, n_samples)
        vals = eval_H(pc + rr * ca, qc + rr * sa, params) - E
        roots = []
        for k in range(len(rr) - 1):
            if vals[k] == 0.0:
                roots.append(rr[k])
            elif vals[k] * vals[k + 1] < 0:
                f = lambda r: eval_H(pc + r * ca, qc + r * sa, params) - E
                roots.append(brentq(f, rr[k], rr[k + 1], xtol=1e-14))
        pts = [(r, (pc + r * ca, qc + r * sa)) for r in roots if r > 1e-12]
        yield pts


def find_torus(E: float, branch: str, params: ModelParams, *,
               center=CELL_CENTER, period_cap=None) -> RealTorus:
    """Locate the inner or outer torus at energy E around a cell center.

    Branch identity is settled by integrating the candidate orbit: it must
    wind once around the center, and its mean u = cos^2 p + cos^2 q must lie
    below (inner) or above (outer) the resonant radius u*.  Candidates that
    do not wind (chain-band islands, separatrix lingering) are abandoned
    after a fail-fast budget well below the declared period cap.
    """
    if branch not in (INNER, OUTER):
        raise ValueError(f"unknown branch {branch!r}")
    crown = crown_energy(params)
    if not (0.0 < E < crown):
        raise NoTorus(f"E={E:g} outside (0, crown={crown:g})")
    if period_cap is None:
        period_cap = 1e4 * TWO_PI / abs(params.a1)
    probe_cap = min(period_cap, 60.0 * TWO_PI / abs(params.a1))
    ustar = -params.a1 / (4.0 * params.a2)
    cap_hit = False
    for pts in _ray_candidates(E, params, center):
        if not pts:
            continue
        ordered = pts if branch == INNER else list(reversed(pts))
        for r, pt in ordered:
            try:
                orbit = integrate_orbit(pt, params, first_return=True,
                                        center=center, period_cap=probe_cap)
            except NoReturn:
                cap_hit = True
                continue
            except SeparatrixProximity:
                cap_hit = True
                continue
            u = np.cos(orbit.samples[:, 0]) ** 2 + np.cos(orbit.samples[:, 1]) ** 2
            u_mean = float(np.mean(u))
            got = INNER if u_mean < ustar else OUTER
            if got != branch:
                continue
            return RealTorus(
                energy=E, branch=branch, action=orbit.action,
                period=orbit.period, frequency=TWO_PI / orbit.period,
                samples=orbit.samples, times=orbit.times, launch=pt,
                center=center, u_mean=u_mean)
    if cap_hit:
        raise SeparatrixProximity(f"period cap exceeded near E={E:g}")
    raise NoTorus(f"no {branch} torus found at E={E:g}")


@lru_cache(maxsize=4096)
def _torus_cached(params: ModelParams, E: float, branch: str, center) -> RealTorus:
    return find_torus(E, branch, params, center=center)


def torus(params: ModelParams, E: float, branch: str, center=CELL_CENTER) -> RealTorus:
    """Memoized find_torus (tori are immutable by convention)."""
    return _torus_cached(params, float(E), branch, tuple(center))


def torus_action(tor: RealTorus) -> float:
    """Contour integral of p dq over the sampled orbit, Richardson refined.

    The trapezoidal polygon estimate has O(h^2) error; combining the full
    and half-resolution estimates cancels it.  The sign is normalized
    positive regardless of sample orientation.
    """
    s = tor.samples
    if math.hypot(s[0, 0] - s[-1, 0], s[0, 1] - s[-1, 1]) > 1e-8:
        raise OpenContour("torus samples do not close")

    def trapezoid(pts):
        p = pts[:, 0]
        q = pts[:, 1]
        return float(np.sum(0.5 * (p[1:] + p[:-1]) * (q[1:] - q[:-1])))

    full = trapezoid(s)
    half = trapezoid(s[::2])
    refined = full + (full - half) / 3.0
    return abs(refined)


def action_of_energy(params: ModelParams, E: float, branch: str) -> float:
    """S(E) on the requested branch (memoized through `torus`)."""
    return torus(params, E, branch).action


def ebk_energy(n: int, hbar: float, branch: str, params: ModelParams) -> float:
    """Solve S_branch(E) = 2 pi hbar (n + 1/2) for the torus energy.

    Residual in the action is below 1e-10 at the returned energy.
    """
    if n < 0 or hbar <= 0:
        raise ValueError("need n >= 0 and hbar > 0")
    target = TWO_PI * hbar * (n + 0.5)
    crown = crown_energy(params)

    def f(E):
        return action_of_energy(params, E, branch) - target

    if branch == INNER:
        # cheap feasibility gate: the inner branch ends at the lower chain
        # separatrix, whose pendulum estimate is a1^2/(16(|b| - a2)); the
        # b = 0 cell area at that radius bounds the attainable action to O(b^2)
        chain_bottom = params.a1 ** 2 / (16.0 * (params.b_mod - params.a2)) \
            if params.b_mod > 0 else crown
        from .model import radial_roots
        from .unperturbed import cell_area
        u_lo, _ = radial_roots(min(0.998 * chain_bottom, 0.999 * crown), params)
        if target > 1.02 * cell_area(u_lo):
            raise OutOfRange(
                f"inner action target {target:g} unattainable below the chain")
        # S_in grows with E from 0; dS/dE = T >= 2 pi / a1, so the harmonic
        # energy bounds the root from above (when it is attainable)
        e_hi = min(params.a1 * hbar * (n + 0.5), 0.998 * chain_bottom,
                   0.999 * crown)
        val_hi = None
        for _ in range(80):
            try:
                val_hi = f(e_hi)
            except (NoTorus, SeparatrixProximity, NoReturn):
                val_hi = None
                e_hi *= 0.95
                continue
            if val_hi >= 0.0:
                break
            try:
                e_next = e_hi * 1.01
                v2 = f(e_next)
            except (NoTorus, SeparatrixProximity, NoReturn):
                raise OutOfRange(
                    f"inner action target {target:g} unattainable below the chain")
            e_hi, val_hi = e_next, v2
        if val_hi is None or val_hi < 0.0:
            raise OutOfRange(
                f"inner action target {target:g} unattainable below the chain")
        e_lo = 1e-9 * e_hi
        return brentq(f, e_lo, e_hi, xtol=1e-14, rtol=1e-15)

    # outer branch: S_out decreases with E
    e_lo, e_hi = None, 0.97 * crown
    base = 1e-4 * crown
    for _ in range(60):
        try:
            if f(base) >= 0.0:
                e_lo = base
                break
        except (NoTorus, SeparatrixProximity, NoReturn):
            pass
        base *= 1.5
        if base >= e_hi:
            break
    if e_lo is None:
        raise OutOfRange(f"outer action target {target:g} unattainable")
    for _ in range(60):
        try:
            if f(e_hi) <= 0.0:
                break
        except (NoTorus, SeparatrixProximity, NoReturn):
            pass
        e_hi = 0.5 * (e_hi + e_lo)
    return brentq(f, e_lo, e_hi, xtol=1e-14, rtol=1e-15)


def dump_torus_csv(tor: RealTorus, path):
    """CSV dump with header s,p,q (s = time along the orbit)."""
    with open(path, "w") as fh:
        fh.write("s,p,q\n")
        for t, (p, q) in zip(tor.times, tor.samples):
            fh.write(f"{t:.12e},{p:.12e},{q:.12e}\n")
