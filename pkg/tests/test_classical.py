"""Tests for orbit integration, torus construction and EBK quantization."""

import math

import numpy as np
import pytest

from resotunnel import classical as C
from resotunnel.errors import NoReturn, NoTorus, OpenContour, OutOfRange
from resotunnel.model import ModelParams, crown_energy, eval_H, radial_roots

DEFAULTS = ModelParams()
TILTED = ModelParams(phi=math.pi / 4)


def test_island_center_is_stationary():
    orbit = C.integrate_orbit((math.pi / 2, math.pi / 2), DEFAULTS, t_max=5.0)
    dev = np.max(np.abs(orbit.samples - np.array([math.pi / 2, math.pi / 2])))
    assert dev < 1e-9


def test_torus_energy_conservation():
    for branch in (C.INNER, C.OUTER):
        tor = C.find_torus(0.035, branch, TILTED)
        drift = np.max(np.abs(eval_H(tor.samples[:, 0], tor.samples[:, 1],
                                     TILTED) - tor.energy))
        assert drift < 1e-9 * max(1.0, abs(tor.energy))
        assert tor.action > 0
        assert abs(tor.frequency * tor.period - 2 * math.pi) < 1e-10


def test_no_return_near_crown_maximum():
    # orbits near a crown maximum circle the maximum, never the cell center
    ustar = -DEFAULTS.a1 / (4 * DEFAULTS.a2)
    p0 = math.acos(math.sqrt(ustar)) + 0.01
    with pytest.raises(NoReturn):
        C.integrate_orbit((p0, math.pi / 2), DEFAULTS, first_return=True,
                          period_cap=200.0)


def test_find_torus_branches():
    tor_in = C.find_torus(0.035, C.INNER, TILTED)
    tor_out = C.find_torus(0.035, C.OUTER, TILTED)
    ustar = -TILTED.a1 / (4 * TILTED.a2)
    assert tor_in.u_mean < ustar < tor_out.u_mean
    assert tor_in.action < tor_out.action
    with pytest.raises(NoTorus):
        C.find_torus(1.1 * crown_energy(TILTED), C.INNER, TILTED)


def test_annulus_area_against_monte_carlo():
    # b = 0: S_out - S_in is the area between the two radial contours
    params = DEFAULTS.replace(b_mod=0.0)
    E = 0.035
    s_in = C.find_torus(E, C.INNER, params).action
    s_out = C.find_torus(E, C.OUTER, params).action
    u_minus, u_plus = radial_roots(E, params)
    rng = np.random.default_rng(42)
    n = 10_000_000
    ps = rng.uniform(0.0, math.pi, n)
    qs = rng.uniform(0.0, math.pi, n)
    u = np.cos(ps) ** 2 + np.cos(qs) ** 2
    mc_area = math.pi ** 2 * np.count_nonzero((u > u_minus) & (u < u_plus)) / n
    assert (s_out - s_in) == pytest.approx(mc_area, rel=1e-3)


def test_torus_action_richardson():
    tor = C.find_torus(0.035, C.INNER, TILTED)
    val = C.torus_action(tor)
    assert val == pytest.approx(tor.action, rel=1e-8)
    # reversing the sample orientation does not flip the reported action
    import dataclasses

    rev = dataclasses.replace(tor, samples=tor.samples[::-1].copy(),
                              times=tor.times.copy())
    assert C.torus_action(rev) == pytest.approx(val, rel=1e-8)
    broken = dataclasses.replace(tor, samples=tor.samples[:-100].copy())
    with pytest.raises(OpenContour):
        C.torus_action(broken)


def test_action_harmonic_limit():
    # for E -> 0 the island is a harmonic oscillator with frequency a1,
    # so S(E) -> 2 pi E / a1
    E = 1e-5
    tor = C.find_torus(E, C.INNER, DEFAULTS)
    assert tor.action == pytest.approx(2 * math.pi * E / DEFAULTS.a1, rel=1e-3)


def test_action_derivative_is_period():
    E = 0.035
    h = 1e-5
    for branch in (C.INNER, C.OUTER):
        tor = C.find_torus(E, branch, TILTED)
        s_plus = C.find_torus(E + h, branch, TILTED).action
        s_minus = C.find_torus(E - h, branch, TILTED).action
        dSdE = (s_plus - s_minus) / (2 * h)
        assert abs(dSdE) == pytest.approx(tor.period, rel=1e-5)


def test_action_monotone_on_energy_grid():
    # stay below the chain band (lower separatrix near 0.104 for defaults)
    energies = np.linspace(0.004, 0.095, 20)
    s_in = [C.find_torus(E, C.INNER, DEFAULTS).action for E in energies]
    s_out = [C.find_torus(E, C.OUTER, DEFAULTS).action for E in energies]
    assert np.all(np.diff(s_in) > 0)      # inner action grows with E
    assert np.all(np.diff(s_out) < 0)     # outer contour shrinks toward the crown
    assert np.all(np.array(s_in) < np.array(s_out))


def test_ebk_energy_residual():
    hbar = math.pi / 40
    for n in (0, 1):
        E = C.ebk_energy(n, hbar, C.INNER, DEFAULTS)
        target = 2 * math.pi * hbar * (n + 0.5)
        s = C.find_torus(E, C.INNER, DEFAULTS).action
        assert abs(s - target) < 1e-10


def test_ebk_harmonic_limit():
    hbar = 1e-3
    E0 = C.ebk_energy(0, hbar, C.INNER, DEFAULTS)
    assert E0 == pytest.approx(DEFAULTS.a1 * hbar / 2, rel=5e-3)


def test_ebk_out_of_range():
    with pytest.raises(OutOfRange):
        C.ebk_energy(50, math.pi / 20, C.INNER, DEFAULTS)


def test_torus_csv_roundtrip(tmp_path):
    tor = C.find_torus(0.035, C.INNER, DEFAULTS)
    path = tmp_path / "torus.csv"
    C.dump_torus_csv(tor, path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(tor.times), 3)
    assert np.allclose(data[:, 1:], tor.samples, atol=1e-11)


def test_ebk_outer_branch():
    # the outer action decreases with E; quantize an outer torus directly
    hbar = math.pi / 40
    E = C.ebk_energy(6, hbar, C.OUTER, DEFAULTS)
    target = 2 * math.pi * hbar * 6.5
    s = C.find_torus(E, C.OUTER, DEFAULTS).action
    assert abs(s - target) < 1e-10
