"""Complexified dynamics along parametrized complex-time paths.

The complex Hamilton equations dp/ds = -(dH/dq)(dt/ds), dq/ds =
(dH/dp)(dt/ds) are integrated as a real system in (Re p, Im p, Re q, Im q)
plus the two running action integrals.  Crossings between real tori are
found by shooting: the launch phase along the source torus and the
imaginary duration are adjusted until the trajectory lands on the real
plane, then the landing orbit is classified by cell and branch.

Sign convention: an imaginary-time segment means dt/ds = IMAG_TIME_SIGN * i
with IMAG_TIME_SIGN = -1 (Wick-like descent), and all reported imaginary
actions are positive full-loop values.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .classical import INNER, OUTER, RealTorus, integrate_orbit, torus
from .errors import (
    BranchCollision,
    EscapeDetected,
    NoConvergence,
    NoReturn,
    SeparatrixProximity,
    StepFailure,
    WrongBranch,
)
from .model import ModelParams, PendulumParams, eval_H

TWO_PI = 2.0 * math.pi

#: one global constant fixes which way imaginary time runs; flipping it only
#: conjugates trajectories and flips the sign of accumulated sigma
IMAG_TIME_SIGN = -1.0

REAL_FORWARD = "real"
IMAG_FORWARD = "imag"

RTOL = 1e-12
ATOL = 1e-13
_METHOD = "DOP853"


@dataclass(frozen=True)
class TimePath:
    """Descending-staircase time path: ordered (direction, duration) legs."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((str(d), float(T)) for d, T in self.segments)
        for d, T in segs:
            if d not in (REAL_FORWARD, IMAG_FORWARD):
                raise ValueError(f"unknown direction {d!r}")
            if T <= 0:
                raise ValueError("segment durations must be positive")
        object.__setattr__(self, "segments", segs)


@dataclass
class ComplexTrajectory:
    """Complexified orbit with accumulated action parts."""

    s: np.ndarray
    p: np.ndarray             # complex
    q: np.ndarray             # complex
    sigma: np.ndarray         # running Re p d(Im q) + Im p d(Re q)
    s_real: np.ndarray        # running Re p d(Re q)
    energy: complex

    @property
    def sigma_accum(self) -> float:
        return float(self.sigma[-1])

    @property
    def s_real_accum(self) -> float:
        return float(self.s_real[-1])


def _complex_rhs(params: ModelParams, dtds: complex):
    a1, a2 = params.a1, params.a2
    b = params.b
    bc = b.conjugate()
    ell = params.ell
    ellm1 = ell - 1
    cos, sin = cmath.cos, cmath.sin

    def rhs(s, y):
        p = complex(y[0], y[1])
        q = complex(y[2], y[3])
        x = cos(p)
        yy = cos(q)
        i2 = x * x + yy * yy
        z = x + 1j * yy
        w = x - 1j * yy
        zp = z ** ellm1
        wp = w ** ellm1
        hx = a1 * x + 4.0 * a2 * x * i2 + 0.5 * ell * (b * zp + bc * wp)
        hy = a1 * yy + 4.0 * a2 * yy * i2 + 0.5j * ell * (b * zp - bc * wp)
        dq = -sin(p) * hx * dtds         # (dH/dp) dt/ds
        dp = sin(q) * hy * dtds          # -(dH/dq) dt/ds
        dsigma = y[0] * dq.imag + y[1] * dq.real
        dsreal = y[0] * dq.real
        return (dp.real, dp.imag, dq.real, dq.imag, dsigma, dsreal)

    return rhs


def _leg_dtds(direction: str) -> complex:
    return 1.0 + 0.0j if direction == REAL_FORWARD else IMAG_TIME_SIGN * 1j


def _escape_event(bound):
    def ev(s, y):
        return y[1] * y[1] + y[3] * y[3] - bound * bound

    ev.terminal = True
    return ev


def integrate_complex(start, path: TimePath, params: ModelParams, *,
                      escape_bound=5.0, samples_per_leg=400,
                      raise_on_escape=True) -> ComplexTrajectory:
    """Integrate along the given complex-time path, accumulating actions."""
    p0 = complex(start[0])
    q0 = complex(start[1])
    energy = eval_H(p0, q0, params)
    y = [p0.real, p0.imag, q0.real, q0.imag, 0.0, 0.0]
    s_off = 0.0
    ss, ps, qs, sigs, srs = [], [], [], [], []
    for direction, duration in path.segments:
        rhs = _complex_rhs(params, _leg_dtds(direction))
        sol = solve_ivp(rhs, (0.0, duration), y, method=_METHOD, rtol=RTOL,
                        atol=ATOL, dense_output=True,
                        events=(_escape_event(escape_bound),))
        if sol.status == -1:
            raise StepFailure(sol.message)
        ts = np.linspace(0.0, sol.t[-1], samples_per_leg + 1)
        ys = sol.sol(ts)
        ss.append(ts + s_off)
        ps.append(ys[0] + 1j * ys[1])
        qs.append(ys[2] + 1j * ys[3])
        sigs.append(ys[4])
        srs.append(ys[5])
        s_off += sol.t[-1]
        y = list(sol.y[:, -1])
        if sol.status == 1 and raise_on_escape:
            raise EscapeDetected(
                f"‖Im(p,q)‖ exceeded {escape_bound} at s={s_off:.4f}")
        if sol.status == 1:
            break
    return ComplexTrajectory(
        s=np.concatenate(ss), p=np.concatenate(ps), q=np.concatenate(qs),
        sigma=np.concatenate(sigs), s_real=np.concatenate(srs), energy=energy)


# ----------------------------------------------------------------------
# shooting: land a purely imaginary-time leg back on the real plane


@dataclass
class Landing:
    """One converged imaginary-time crossing from a source torus."""

    launch_phase: float       # time along the source torus
    tau: float                # imaginary duration (|T_c|/2 of the loop)
    launch_point: tuple
    landing_point: tuple
    residual: float
    sigma_leg: float          # signed Im integral of p dq over the half loop
    branch: str               # branch of the landing orbit
    cell: tuple               # cell offsets (k_p, k_q) relative to the source


@dataclass
class ImaginaryActionResult:
    """Full-loop imaginary action of a torus-to-torus crossing."""

    sigma: float
    half_period_imag: float
    landing_residual: float
    landing_point: tuple
    launch_point: tuple
    launch_phase: float
    branch: str
    cell: tuple
    landings: list = field(default_factory=list)     # same-family landings
    alternates: list = field(default_factory=list)   # other families (sigma values)


class _TorusShooter:
    """Shared machinery: launch-point interpolation and imaginary legs."""

    def __init__(self, tor: RealTorus, params: ModelParams, escape_bound=5.0):
        self.torus = tor
        self.params = params
        self.escape_bound = escape_bound
        # periodic interpolant of the torus samples for fast phase -> point;
        # the integrator closes the orbit to ~1e-10, snap it exactly
        pts = tor.samples.copy()
        pts[-1] = pts[0]
        self.spline = CubicSpline(tor.times, pts, bc_type="periodic")

    def point(self, s0: float):
        p, q = self.spline(s0 % self.torus.period)
        return float(p), float(q)

    def leg(self, s0: float, tau: float, dense=False):
        """Imaginary-time leg of duration tau from torus phase s0."""
        p0, q0 = self.point(s0)
        rhs = _complex_rhs(self.params, _leg_dtds(IMAG_FORWARD))
        y0 = [p0, 0.0, q0, 0.0, 0.0, 0.0]
        sol = solve_ivp(rhs, (0.0, tau), y0, method=_METHOD, rtol=RTOL,
                        atol=ATOL, dense_output=dense,
                        events=(_escape_event(self.escape_bound),))
        if sol.status == -1:
            raise StepFailure(sol.message)
        return sol

    def residual(self, s0: float, tau: float):
        sol = self.leg(s0, tau)
        y = sol.y[:, -1]
        if sol.status == 1 or sol.t[-1] < tau:
            return None, y
        return np.array([y[1], y[3]]), y

    def refine(self, s0: float, tau: float, max_iter=40, tol=1e-9):
        """Damped Newton on (s0, tau) for Im p = Im q = 0 at the landing."""
        v = np.array([s0, tau])

        def F(vv):
            r, y = self.residual(vv[0], max(vv[1], 1e-6))
            return r, y

        r, y = F(v)
        if r is None:
            raise NoConvergence("leg escapes before the landing", None)
        best = float(np.hypot(*r))
        for _ in range(max_iter):
            if best < tol:
                break
            J = np.empty((2, 2))
            ok = True
            for k in range(2):
                h = 1e-6 * max(1.0, abs(v[k]))
                vp = v.copy(); vp[k] += h
                vm = v.copy(); vm[k] -= h
                rp, _ = F(vp)
                rm, _ = F(vm)
                if rp is None or rm is None:
                    ok = False
                    break
                J[:, k] = (rp - rm) / (2 * h)
            if not ok:
                raise NoConvergence("finite-difference stencil escaped", best)
            try:
                step = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                raise NoConvergence("singular shooting Jacobian", best)
            lam = 1.0
            for _ in range(12):
                r_new, y_new = F(v + lam * step)
                if r_new is not None and np.hypot(*r_new) < best:
                    v = v + lam * step
                    r, y = r_new, y_new
                    best = float(np.hypot(*r))
                    break
                lam *= 0.5
            else:
                raise NoConvergence("Newton line search stalled", best)
        if best >= tol:
            raise NoConvergence("shooting did not converge", best)
        return float(v[0]), float(max(v[1], 1e-6)), y, best


def _classify_landing(point, params: ModelParams, source_center):
    """Branch and relative cell of the real orbit through a landing point."""
    kp = round((point[0] - math.pi / 2) / math.pi)
    kq = round((point[1] - math.pi / 2) / math.pi)
    center = (math.pi / 2 + math.pi * kp, math.pi / 2 + math.pi * kq)
    orbit = integrate_orbit(point, params, first_return=True, center=center,
                            period_cap=400.0 * TWO_PI / abs(params.a1))
    u = np.cos(orbit.samples[:, 0]) ** 2 + np.cos(orbit.samples[:, 1]) ** 2
    ustar = -params.a1 / (4.0 * params.a2)
    branch = INNER if float(np.mean(u)) < ustar else OUTER
    skp = round((source_center[0] - math.pi / 2) / math.pi)
    skq = round((source_center[1] - math.pi / 2) / math.pi)
    return branch, (kp - skp, kq - skq)


def _seed_phases(tor: RealTorus, n_extra: int):
    """Symmetric points of the torus (extrema of p and q) first, then fill."""
    seeds = []
    for col in (0, 1):
        for pick in (np.argmax, np.argmin):
            seeds.append(float(tor.times[int(pick(tor.samples[:, col]))]))
    fill = np.linspace(0.0, tor.period, n_extra, endpoint=False)
    out = []
    for s in seeds + list(fill):
        if all(abs(s - t) > 1e-3 * tor.period for t in out):
            out.append(s)
    return out


def find_landings(tor: RealTorus, params: ModelParams, *, n_phases=16,
                  tau_max=8.0, candidate_gate=1e-4, escape_bound=5.0,
                  scan_points=1500, target=None, max_target_hits=None) -> list[Landing]:
    """Scan launch phases for imaginary-time crossings back to the real plane.

    For each seed phase the leg is integrated to tau_max (or escape) and the
    squared distance to the real plane g(s) = (Im p)^2 + (Im q)^2 is scanned
    for local minima below the candidate gate; each candidate is polished by
    a 2x2 Newton iteration in (launch phase, imaginary duration).

    `target` = (branch, adjacent_flag) enables an early exit once
    `max_target_hits` matching landings have converged.  Candidates whose
    (tau, sigma) signature duplicates an already converged landing are not
    re-polished (repeated loop traversals and same-family launches).
    """
    shooter = _TorusShooter(tor, params, escape_bound)
    landings: list[Landing] = []

    def known_signature(tau, sig):
        # keep refining a signature until two independent launches hold it
        # (launch-point independence stays checkable), then skip duplicates
        count = 0
        for ld in landings:
            if abs(tau - ld.tau) < 0.08 and \
                    abs(abs(sig) - abs(ld.sigma_leg)) < 2e-2 * max(abs(ld.sigma_leg), 1e-12):
                count += 1
        return count >= 2

    def target_hits():
        if target is None:
            return 0
        branch, adjacent = target
        count = 0
        for ld in landings:
            adj = abs(ld.cell[0]) + abs(ld.cell[1]) == 1
            if ld.branch == branch and (adj if adjacent else ld.cell == (0, 0)):
                count += 1
        return count

    for s0 in _seed_phases(tor, max(n_phases - 4, 0)):
        if max_target_hits is not None and target_hits() >= max_target_hits:
            break
        try:
            sol = shooter.leg(s0, tau_max, dense=True)
        except StepFailure:
            continue
        t_end = sol.t[-1]
        if t_end <= 0:
            continue
        ts = np.linspace(0.0, t_end, scan_points)
        ys = sol.sol(ts)
        g = ys[1] ** 2 + ys[3] ** 2
        for k in range(1, len(ts) - 1):
            if g[k] < candidate_gate and g[k] <= g[k - 1] and g[k] <= g[k + 1]:
                if known_signature(float(ts[k]), float(ys[4][k])):
                    continue
                try:
                    s0r, taur, yend, res = shooter.refine(s0, float(ts[k]))
                except NoConvergence:
                    continue
                point = (float(yend[0]), float(yend[2]))
                try:
                    branch, cell = _classify_landing(point, params, tor.center)
                except (NoReturn, SeparatrixProximity):
                    continue
                landings.append(Landing(
                    launch_phase=s0r % tor.period, tau=taur,
                    launch_point=shooter.point(s0r),
                    landing_point=point, residual=res,
                    sigma_leg=float(yend[4]), branch=branch, cell=cell))
    return _dedupe(landings, tor.period)


def _dedupe(landings, period):
    out = []
    for ld in sorted(landings, key=lambda l: l.residual):
        dup = False
        for kept in out:
            ds = abs(ld.launch_phase - kept.launch_phase)
            ds = min(ds, period - ds)
            if ds < 1e-6 * period and abs(ld.tau - kept.tau) < 1e-8:
                dup = True
                break
        if not dup:
            out.append(ld)
    return out


def _filter_repetitions(landings):
    """Drop landings that are m-fold traversals of a shorter crossing."""
    base = sorted(landings, key=lambda l: l.tau)
    keep = []
    for ld in base:
        repeated = False
        for short in keep:
            m = round(ld.tau / short.tau)
            if m >= 2 and abs(ld.tau - m * short.tau) < 0.05 * short.tau and \
                    abs(abs(ld.sigma_leg) - m * abs(short.sigma_leg)) \
                    < 2e-2 * m * abs(short.sigma_leg):
                repeated = True
                break
        if not repeated:
            keep.append(ld)
    return keep


def _group_families(landings, rel_tol=1e-3):
    """Cluster landings by |sigma| of the full loop."""
    families = []
    for ld in sorted(landings, key=lambda l: abs(l.sigma_leg)):
        sig = 2.0 * abs(ld.sigma_leg)
        placed = False
        for fam in families:
            if abs(sig - fam["sigma"]) < rel_tol * fam["sigma"]:
                fam["members"].append(ld)
                placed = True
                break
        if not placed:
            families.append({"sigma": sig, "members": [ld]})
    return families


def _result_from_family(fam, others) -> ImaginaryActionResult:
    best = min(fam["members"], key=lambda l: l.residual)
    return ImaginaryActionResult(
        sigma=fam["sigma"],
        half_period_imag=best.tau,
        landing_residual=best.residual,
        landing_point=best.landing_point,
        launch_point=best.launch_point,
        launch_phase=best.launch_phase,
        branch=best.branch,
        cell=best.cell,
        landings=list(fam["members"]),
        alternates=[f["sigma"] for f in others])


def _shoot(E, params, source_branch, target_branch, target_adjacent,
           max_target_hits=None, **kw):
    tor = torus(params, E, source_branch)
    landings = find_landings(tor, params, target=(target_branch, target_adjacent),
                             max_target_hits=max_target_hits, **kw)

    def is_target(ld):
        adj = abs(ld.cell[0]) + abs(ld.cell[1]) == 1
        return ld.branch == target_branch and (adj if target_adjacent
                                               else ld.cell == (0, 0))

    hits = [ld for ld in _filter_repetitions(landings) if is_target(ld)]
    if not hits:
        if landings:
            kinds = {(ld.branch, ld.cell) for ld in landings}
            raise WrongBranch(
                f"no landing on {'adjacent' if target_adjacent else 'same'}-cell "
                f"{target_branch} torus at E={E:g}; found {sorted(kinds)}")
        raise NoConvergence(f"no landings converged at E={E:g}", None)
    fams = _group_families(hits)
    return _result_from_family(fams[0], fams[1:])


def shoot_chain_crossing(E: float, params: ModelParams, **kw) -> ImaginaryActionResult:
    """Imaginary action sigma_c of the loop crossing the resonance chain
    (inner torus -> outer torus of the same cell).

    Thin chains (small |b|) produce shallow approaches to the real plane, so
    a failed default scan is retried with a loose candidate gate and a dense
    seed grid.
    """
    torus(params, E, OUTER)  # both tori must exist
    kw.setdefault("max_target_hits", 3)
    try:
        return _shoot(E, params, INNER, OUTER, target_adjacent=False, **kw)
    except (WrongBranch, NoConvergence):
        kw.update(n_phases=32, candidate_gate=3e-2, escape_bound=8.0)
        return _shoot(E, params, INNER, OUTER, target_adjacent=False, **kw)


def shoot_separatrix_crossing(E: float, params: ModelParams, thorough=False,
                              **kw) -> ImaginaryActionResult:
    """Imaginary action sigma_tilde of the loop connecting the outer tori of
    adjacent cells.  The smallest-action family is returned with the other
    families kept in `alternates`.

    The dominant (smallest sigma) family approaches the real plane closely
    and is usually found by the default scan; when it is not (crossings far
    from the symmetry axis, phi near pi), and always with `thorough=True`,
    the candidate gate, escape bound and seed grid are widened, which also
    picks up subdominant families.
    """
    if not thorough:
        try:
            return _shoot(E, params, OUTER, OUTER, target_adjacent=True, **kw)
        except (WrongBranch, NoConvergence):
            pass
    kw.setdefault("n_phases", 96)
    kw.setdefault("tau_max", 9.0)
    kw.setdefault("candidate_gate", 2.5e-1)
    kw.setdefault("escape_bound", 16.0)
    kw.setdefault("scan_points", 2500)
    return _shoot(E, params, OUTER, OUTER, target_adjacent=True, **kw)


def shoot_direct(E: float, params: ModelParams, **kw) -> ImaginaryActionResult:
    """Imaginary action Sigma of the manifold directly connecting the inner
    tori of adjacent cells (single imaginary-time leg).

    For well-developed chains the launch window on the torus is narrow, so a
    failed default scan is retried once with a dense seed grid and a loose
    candidate gate.
    """
    kw.setdefault("max_target_hits", 3)
    try:
        return _shoot(E, params, INNER, INNER, target_adjacent=True, **kw)
    except (WrongBranch, NoConvergence):
        kw.update(n_phases=64, candidate_gate=3e-2, escape_bound=8.0,
                  tau_max=max(16.0, kw.get("tau_max", 0.0)))
        return _shoot(E, params, INNER, INNER, target_adjacent=True, **kw)


@lru_cache(maxsize=4096)
def chain_sigma(params: ModelParams, E: float) -> ImaginaryActionResult:
    return shoot_chain_crossing(E, params)


@lru_cache(maxsize=4096)
def separatrix_sigma(params: ModelParams, E: float) -> ImaginaryActionResult:
    return shoot_separatrix_crossing(E, params)


@lru_cache(maxsize=4096)
def direct_sigma(params: ModelParams, E: float) -> ImaginaryActionResult:
    return shoot_direct(E, params)


# ----------------------------------------------------------------------
# pendulum oracle for the chain crossing


def sigma_pendulum(E: float, pend: PendulumParams, params: ModelParams) -> float:
    """Chain-crossing imaginary action from the local pendulum (oracle).

    Energy conservation in the pendulum is a quadratic in the action
    coordinate, A(theta) I^2 + B I + C = 0 with A = 1/(2m) + 2 v cos(l
    theta + phi).  Below the chain band the two real branches merge only at
    complex angles theta = theta_sym + i y on the symmetry line where
    cos -> -cosh(l y); the loop action is twice the enclosed branch gap.
    Above the band the roots are complex at every real angle and the loop
    action is the full-period integral of |Im I|, doubled.
    """
    ell = params.ell
    inv2m = 1.0 / (2.0 * pend.mass)
    B = -pend.I_res / pend.mass
    C = pend.K0 + pend.I_res ** 2 * inv2m - E

    def disc_of_A(A):
        return B * B - 4.0 * A * C

    a_lo = inv2m - 2.0 * pend.v_coeff   # cos = -1
    a_hi = inv2m + 2.0 * pend.v_coeff   # cos = +1
    if disc_of_A(a_lo) > 0.0:
        # below the chain: vertical line in complex theta at the symmetry angle
        if pend.v_coeff == 0.0 or C == 0.0:
            raise BranchCollision("no chain: branches never merge (v = 0)")
        # branches merge where A = B^2/(4C); on the symmetry line
        # A(y) = 1/(2m) - 2 v cosh(l y)
        cosh_star = (inv2m - B * B / (4.0 * C)) / (2.0 * pend.v_coeff)
        if cosh_star < 1.0:
            raise BranchCollision("energy inside the chain band")
        y_star = math.acosh(cosh_star) / ell

        def gap(y):
            A = inv2m - 2.0 * pend.v_coeff * math.cosh(ell * y)
            d = disc_of_A(A)
            if d <= 0.0:
                return 0.0
            return math.sqrt(d) / abs(A)

        val, _ = quad(gap, 0.0, y_star, limit=200, epsabs=1e-12, epsrel=1e-11)
        return 2.0 * val
    if disc_of_A(a_hi) < 0.0:
        # above the chain: complex roots at every real angle
        def im_gap(theta):
            A = inv2m + 2.0 * pend.v_coeff * math.cos(ell * theta)
            d = disc_of_A(A)
            return math.sqrt(-d) / (2.0 * abs(A))

        val, _ = quad(im_gap, 0.0, TWO_PI / ell, limit=200,
                      epsabs=1e-12, epsrel=1e-11)
        return 2.0 * val
    raise BranchCollision("the two real branches merge: E is in the chain band")


# ----------------------------------------------------------------------
# unperturbed (b = 0) crossing action by quadrature


def sigma_unperturbed(E: float, params: ModelParams, branch: str = INNER) -> float:
    """Full-loop imaginary action of the b = 0 crossing between adjacent
    cells at radius u_branch(E), by quadrature on the symmetry plane
    Re p = pi/2 where sinh^2(Im p) = cos^2 q - u."""
    from .model import radial_roots

    u_minus, u_plus = radial_roots(E, params)
    u = u_minus if branch == INNER else u_plus
    if not (0.0 < u < 1.0):
        raise BranchCollision(f"no crossing barrier at u={u:g}")
    q_turn = math.acos(math.sqrt(u))

    def integrand(q):
        val = math.cos(q) ** 2 - u
        if val <= 0.0:
            return 0.0
        return math.asinh(math.sqrt(val))

    val, _ = quad(integrand, -q_turn, q_turn, limit=200, epsabs=1e-13,
                  epsrel=1e-12)
    return 2.0 * val


def dump_trajectory_csv(traj: ComplexTrajectory, path):
    """CSV dump with header s,Re_p,Im_p,Re_q,Im_q."""
    with open(path, "w") as fh:
        fh.write("s,Re_p,Im_p,Re_q,Im_q\n")
        for s, p, q in zip(traj.s, traj.p, traj.q):
            fh.write(f"{s:.12e},{p.real:.12e},{p.imag:.12e},"
                     f"{q.real:.12e},{q.imag:.12e}\n")
