"""Tests for the normal-form model and its expansions."""

import math

import numpy as np
import pytest

from resotunnel.errors import DegenerateModel, UnsupportedOrder
from resotunnel.model import (
    ModelParams,
    crown_energy,
    eval_H,
    eval_monomials,
    eval_normal_form,
    grad_H,
    monomials,
    pendulum_params,
    radial_roots,
    read_config,
    separatrix_energy,
    write_config,
)

DEFAULTS = ModelParams()  # a1=1, a2=-0.55, |b|=0.05, phi=0, ell=4


def test_normal_form_origin_vanishes():
    for params in [DEFAULTS, DEFAULTS.replace(phi=1.1, b_mod=0.3)]:
        assert eval_normal_form(0.0, 0.0, params) == 0.0


def test_normal_form_point_values():
    # hand-evaluated: a1/2 + a2 = -0.05 at b=0, and the quartic term
    # restores it to zero at phi=0, |b|=0.05
    p0 = DEFAULTS.replace(b_mod=0.0)
    assert eval_normal_form(1.0, 0.0, p0) == pytest.approx(-0.05, abs=1e-15)
    assert eval_normal_form(1.0, 0.0, DEFAULTS) == pytest.approx(0.0, abs=1e-15)


def test_H_point_values():
    assert eval_H(math.pi / 2, math.pi / 2, DEFAULTS) == pytest.approx(0.0, abs=1e-15)
    # cos p = cos q = 1: a1 + 4 a2 - 4|b| = -1.4
    assert eval_H(0.0, 0.0, DEFAULTS) == pytest.approx(-1.4, abs=1e-14)


def test_H_even_and_periodic():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-math.pi, math.pi, size=(100, 2))
    for p, q in pts:
        h = eval_H(p, q, DEFAULTS)
        assert eval_H(-p, q, DEFAULTS) == pytest.approx(h, abs=1e-14)
        assert eval_H(p, -q, DEFAULTS) == pytest.approx(h, abs=1e-14)
        assert abs(eval_H(p + 2 * math.pi, q, DEFAULTS) - h) < 1e-14
        assert abs(eval_H(p, q + 2 * math.pi, DEFAULTS) - h) < 1e-14


def test_analyticity_cauchy_riemann():
    # finite-difference Cauchy-Riemann residual in each complex argument
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(20):
        p = complex(rng.uniform(-2, 2), rng.uniform(-0.5, 0.5))
        q = complex(rng.uniform(-2, 2), rng.uniform(-0.5, 0.5))
        for arg in ("p", "q"):
            def f(dz):
                if arg == "p":
                    return eval_H(p + dz, q, DEFAULTS)
                return eval_H(p, q + dz, DEFAULTS)

            d_re = (f(h) - f(-h)) / (2 * h)
            d_im = (f(1j * h) - f(-1j * h)) / (2 * h)
            assert abs(d_re - d_im / 1j) < 1e-6


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(11)
    h = 1e-6
    for params in [DEFAULTS, DEFAULTS.replace(phi=2.0, b_mod=0.08, ell=5)]:
        for _ in range(10):
            p = complex(rng.uniform(-2, 2), rng.uniform(-0.4, 0.4))
            q = complex(rng.uniform(-2, 2), rng.uniform(-0.4, 0.4))
            gp, gq = grad_H(p, q, params)
            fd_p = (eval_H(p + h, q, params) - eval_H(p - h, q, params)) / (2 * h)
            fd_q = (eval_H(p, q + h, params) - eval_H(p, q - h, params)) / (2 * h)
            assert abs(gp - fd_p) < 1e-7
            assert abs(gq - fd_q) < 1e-7


def test_monomials_defaults():
    terms = {(t.m, t.n): t.coeff for t in monomials(DEFAULTS)}
    assert len(terms) == 5  # sin(0) = 0 kills the (3,1) and (1,3) terms
    assert terms[(2, 2)] == pytest.approx(-1.4)
    assert terms[(2, 0)] == pytest.approx(0.5)
    assert terms[(4, 0)] == pytest.approx(-0.5)


def test_monomials_quarter_phase():
    terms = {(t.m, t.n): t.coeff for t in monomials(DEFAULTS.replace(phi=math.pi / 2))}
    assert terms[(4, 0)] == pytest.approx(-0.55, abs=1e-16)
    assert terms[(3, 1)] == pytest.approx(-0.2)
    assert terms[(1, 3)] == pytest.approx(0.2)


def test_monomials_reconstruction():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-math.pi, math.pi, size=(100, 2))
    for params in [DEFAULTS, DEFAULTS.replace(phi=0.8), DEFAULTS.replace(phi=4.0, b_mod=0.01)]:
        for p, q in pts:
            assert eval_monomials(p, q, params) == pytest.approx(
                eval_H(p, q, params), abs=1e-12)


def test_monomials_reject_other_orders():
    with pytest.raises(UnsupportedOrder):
        monomials(DEFAULTS.replace(ell=5))


def test_pendulum_params_values():
    pend = pendulum_params(DEFAULTS)
    assert pend.K0 == pytest.approx(0.11363636363636363, rel=1e-12)
    assert pend.I_res == pytest.approx(0.22727272727272727, rel=1e-12)
    assert pend.mass == pytest.approx(-0.22727272727272727, rel=1e-12)
    assert pend.V(pend.I_res) == pytest.approx(0.0051652892561983465, rel=1e-12)
    for phi in [0.0, 1.0, 5.0]:
        assert pendulum_params(DEFAULTS.replace(phi=phi)).phi_res == pytest.approx(phi)
    with pytest.raises(DegenerateModel):
        pendulum_params(DEFAULTS.replace(a2=0.0))


def test_crown_energy():
    b0 = DEFAULTS.replace(b_mod=0.0)
    assert crown_energy(b0) == pytest.approx(0.11363636363636363, rel=1e-12)
    # island center sits below the crown
    assert eval_H(math.pi / 2, math.pi / 2, DEFAULTS) < crown_energy(DEFAULTS)
    # the figure energy is inside the well
    assert 0.035 < crown_energy(DEFAULTS)
    # on the crown circle H = K0 + |b| u*^2 cos(4 alpha + phi), max K0 + |b| u*^2
    ustar = 1.0 / 2.2
    assert crown_energy(DEFAULTS) == pytest.approx(
        0.11363636363636363 + 0.05 * ustar ** 2, rel=1e-9)
    with pytest.raises(DegenerateModel):
        crown_energy(DEFAULTS.replace(a2=0.1))


def test_separatrix_energy():
    # saddle between adjacent cells: a1/2 + a2 + |b| cos(phi) at the
    # symmetric point, shifted upward only when sin(phi) != 0
    assert separatrix_energy(DEFAULTS) == pytest.approx(0.0, abs=1e-12)
    assert separatrix_energy(DEFAULTS.replace(phi=math.pi)) == pytest.approx(-0.1, rel=1e-10)
    assert separatrix_energy(DEFAULTS.replace(b_mod=0.0)) == pytest.approx(-0.05, rel=1e-10)
    assert separatrix_energy(DEFAULTS.replace(phi=math.pi / 2)) > -0.05


def test_radial_roots():
    u_minus, u_plus = radial_roots(0.035, DEFAULTS)
    for u in (u_minus, u_plus):
        assert 0.5 * u - 0.55 * u * u == pytest.approx(0.035, abs=1e-14)
    assert 0 < u_minus < 1 / 2.2 < u_plus


def test_config_roundtrip(tmp_path):
    params = ModelParams(a1=1.25, a2=-0.4, b_mod=0.02, phi=2.5, ell=4)
    path = tmp_path / "model.cfg"
    write_config(params, path)
    assert read_config(path) == params


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(b_mod=-0.1)
    with pytest.raises(ValueError):
        ModelParams(ell=2)
    # phi normalized into [0, 2 pi)
    assert ModelParams(phi=2 * math.pi + 0.5).phi == pytest.approx(0.5)
