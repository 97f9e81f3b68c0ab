"""Tests for the splitting formulas and the crossover criterion."""

import math

import numpy as np
import pytest

from resotunnel import classical as C
from resotunnel import complexpath as X
from resotunnel import semiclassics as S
from resotunnel.errors import PeakSingularity
from resotunnel.model import ModelParams

DEFAULTS = ModelParams()


# ---------------- unperturbed quadrature machinery ----------------


def test_cell_area_endpoints():
    assert S.cell_area(1.0) == pytest.approx(math.pi ** 2 / 2, rel=1e-12)
    assert S.cell_area(0.0) == 0.0
    # harmonic limit: A(u) -> pi u for small u
    assert S.cell_area(1e-4) == pytest.approx(math.pi * 1e-4, rel=1e-3)


def test_cell_area_deriv_matches_fd():
    for u in (0.1, 0.45, 0.8):
        h = 1e-6
        fd = (S.cell_area(u + h) - S.cell_area(u - h)) / (2 * h)
        assert S.cell_area_deriv(u) == pytest.approx(fd, rel=1e-5)


def test_u_of_cell_area_roundtrip():
    for u in (0.05, 0.4545, 0.93):
        assert S.u_of_cell_area(S.cell_area(u)) == pytest.approx(u, abs=1e-12)


def test_unperturbed_level_consistency():
    # the quadrature level must agree with the trajectory machinery
    params = DEFAULTS.replace(b_mod=0.0)
    hbar = math.pi / 40
    lev = S.unperturbed_level(0, hbar, params)
    E_ode = C.ebk_energy(0, hbar, C.INNER, params)
    assert lev.energy == pytest.approx(E_ode, abs=1e-9)
    tor = C.torus(params, E_ode, C.INNER)
    assert lev.omega == pytest.approx(tor.frequency, rel=1e-6)
    assert lev.sigma == pytest.approx(X.shoot_direct(lev.energy, params).sigma,
                                      rel=1e-6)


def test_unperturbed_frequency_dip_locations():
    # a torus quantized right on the crown has vanishing frequency; the
    # prediction dips there, near N = 3, 9, 15 for n = 0, 1, 2
    ustar = -DEFAULTS.a1 / (4 * DEFAULTS.a2)
    s_star = S.cell_area(ustar)
    dips = [math.pi ** 2 * (n + 0.5) / s_star for n in (0, 1, 2)]
    assert 2.5 < dips[0] < 3.5
    assert 8.5 < dips[1] < 9.5
    assert 14.5 < dips[2] < 15.7
    # and the frequency really vanishes there
    hbar_dip = s_star / (2 * math.pi * 0.5)
    lev = S.unperturbed_level(0, hbar_dip, DEFAULTS.replace(b_mod=0.0))
    assert abs(lev.omega) < 1e-9


def test_unperturbed_omega_harmonic_limit():
    params = DEFAULTS.replace(b_mod=0.0)
    lev = S.unperturbed_level(0, 1e-4, params)
    assert lev.omega == pytest.approx(params.a1, rel=1e-3)


def test_unperturbed_splitting_slope():
    # hbar = pi/2N makes the exponent -Sigma(E_0(N)) N / pi, so the fitted
    # slope of ln dE0 vs N must match -Delta[N Sigma]/(pi Delta N); the
    # prefactor drift hbar*omega is the only correction (few percent)
    params = DEFAULTS.replace(b_mod=0.0)
    Ns = np.arange(8, 33, 2)
    logs = []
    exponents = {}
    for N in Ns:
        hbar = math.pi / (2 * int(N))
        logs.append(math.log(S.unperturbed_splitting(0, hbar, params)))
        if N in (8, 32):
            E = C.ebk_energy(0, hbar, C.INNER, params)
            exponents[N] = N * X.shoot_direct(E, params).sigma
    slope = np.polyfit(Ns, logs, 1)[0]
    predicted = -(exponents[32] - exponents[8]) / (32 - 8) / math.pi
    assert slope == pytest.approx(predicted, rel=0.05)


def test_unperturbed_splitting_prefactor_flag():
    params = DEFAULTS.replace(b_mod=0.0)
    hbar = math.pi / 24
    full = S.unperturbed_splitting(0, hbar, params)
    single = S.unperturbed_splitting(0, hbar, params, periodic_prefactor=False)
    assert full == pytest.approx(2.0 / math.pi * single, rel=1e-12)


def test_unperturbed_splitting_requires_b0():
    with pytest.raises(ValueError):
        S.unperturbed_splitting(0, math.pi / 24, DEFAULTS)


# ---------------- coupling amplitude and the two-step formula ----------------


def test_coupling_amplitude_consistency():
    hbar = math.pi / 40
    E = C.ebk_energy(0, hbar, C.INNER, DEFAULTS)
    amp, denom = S.coupling_amplitude(E, hbar, DEFAULTS)
    sig_c = X.chain_sigma(DEFAULTS, E).sigma
    assert amp * denom == pytest.approx(math.exp(-sig_c / (2 * hbar)), rel=1e-12)
    s_in = C.torus(DEFAULTS, E, C.INNER).action
    s_out = C.torus(DEFAULTS, E, C.OUTER).action
    assert denom == pytest.approx(
        2 * math.sin((s_in - s_out) / (2 * DEFAULTS.ell * hbar)), rel=1e-12)


def test_peak_singularity_at_pole():
    hb_peak = S.hbar_peak(0, DEFAULTS)
    E = C.ebk_energy(0, hb_peak, C.INNER, DEFAULTS)
    with pytest.raises(PeakSingularity):
        S.coupling_amplitude(E, hb_peak, DEFAULTS)
    rec = S.resonance_assisted_splitting(0, hb_peak, DEFAULTS)
    assert "peak" in rec.flags
    assert math.isinf(rec.diagnostics["A_T"])
    assert math.isinf(rec.dE_complex_path)


def test_peak_located_between_13_and_14():
    hb_peak = S.hbar_peak(0, DEFAULTS)
    assert 13.0 <= math.pi / (2 * hb_peak) <= 14.0


def test_near_peak_flag_at_closest_integer():
    flagged = []
    for N in (12, 13, 14, 15):
        rec = S.resonance_assisted_splitting(0, math.pi / (2 * N), DEFAULTS)
        if rec.flags:
            flagged.append(N)
    assert flagged in ([13], [14], [13, 14])


def test_record_factorization_bit_for_bit():
    rec = S.resonance_assisted_splitting(0, math.pi / 40,
                                         ModelParams(phi=math.pi / 2))
    d = rec.diagnostics
    assert rec.dE_complex_path == d["A_T"] ** 2 * d["delta_e_outer"]
    for key in ("sigma_c", "sigma_tilde", "S_in", "S_out",
                "omega_in", "omega_out", "denom"):
        assert math.isfinite(d[key])


def test_outer_splitting_phi_trend():
    # rotating the chain from 0 to pi pushes the crossing away from the
    # symmetry axis and kills the outer splitting by orders of magnitude
    hbar = math.pi / 50
    e0 = C.ebk_energy(0, hbar, C.INNER, DEFAULTS)
    d0 = S.outer_splitting(e0, hbar, DEFAULTS)
    ppi = ModelParams(phi=math.pi)
    epi = C.ebk_energy(0, hbar, C.INNER, ppi)
    dpi = S.outer_splitting(epi, hbar, ppi)
    assert d0 / dpi > 100.0


def test_outer_splitting_phi_symmetric():
    hbar = math.pi / 44
    a = ModelParams(phi=math.pi / 2)
    b = ModelParams(phi=3 * math.pi / 2)
    ea = C.ebk_energy(0, hbar, C.INNER, a)
    eb = C.ebk_energy(0, hbar, C.INNER, b)
    assert S.outer_splitting(ea, hbar, a) == pytest.approx(
        S.outer_splitting(eb, hbar, b), rel=1e-5)


# ---------------- direct splitting ----------------


def test_direct_splitting_b0_equals_unperturbed():
    params = DEFAULTS.replace(b_mod=0.0)
    hbar = math.pi / 20
    assert S.direct_splitting(0, hbar, params) == pytest.approx(
        S.unperturbed_splitting(0, hbar, params), rel=1e-9)


def test_direct_splitting_small_b_tracks_exact():
    from resotunnel.quantum import TorusGrid, exact_splitting

    params = ModelParams(b_mod=0.001, phi=math.pi / 4)
    for N in (8, 10, 12):
        hbar = math.pi / (2 * N)
        pred = S.direct_splitting(0, hbar, params)
        exact = exact_splitting(0, TorusGrid(N), params).delta_e
        assert 0.5 < pred / exact < 2.0


# ---------------- perturbative ladder ----------------


def test_island_area_b0_oracle():
    params = DEFAULTS.replace(b_mod=0.0)
    area = S.island_area(params)
    # independent 1D route: outer action at the separatrix energy
    from resotunnel.model import radial_roots, separatrix_energy

    e_sep = separatrix_energy(params)
    _, u_plus = radial_roots(e_sep + 1e-9, params)
    assert area == pytest.approx(S.cell_area(u_plus), rel=0.01)


def test_island_area_decreases_with_b():
    areas = [S.island_area(DEFAULTS.replace(b_mod=b)) for b in (0.0, 0.01, 0.05)]
    assert areas[0] >= areas[1] >= areas[2]


def test_k_cutoff_formula():
    hbar = math.pi / 40
    area = S.island_area(DEFAULTS)
    expected = math.floor((area / (2 * math.pi * hbar) - 0.5) / 4)
    assert S.k_cutoff(0, hbar, DEFAULTS) == expected


def test_rat_single_step_reproduced_independently():
    # at N = 12 the cutoff is one step; rebuild it from the ladder formula
    hbar = math.pi / 24
    assert S.k_cutoff(0, hbar, DEFAULTS) == 1
    total = S.rat_splitting(0, hbar, DEFAULTS)
    base = S.unperturbed_splitting_quad(0, hbar, DEFAULTS)
    lev0 = S.unperturbed_level(0, hbar, DEFAULTS)
    lev4 = S.unperturbed_level(4, hbar, DEFAULTS)
    amp = 2 * DEFAULTS.b_mod * hbar ** 2 * math.sqrt(math.factorial(4))
    B = amp / (lev0.energy - lev4.energy)
    expected = base + B ** 2 * S.unperturbed_splitting_quad(4, hbar, DEFAULTS)
    assert total == pytest.approx(expected, rel=1e-12)


def test_rat_phi_independent():
    hbar = math.pi / 48
    vals = {S.rat_splitting(0, hbar, DEFAULTS.replace(phi=phi))
            for phi in (0.0, 1.0, math.pi)}
    assert len(vals) == 1


def test_rat_reduces_to_unperturbed_at_b0():
    params = DEFAULTS.replace(b_mod=0.0)
    hbar = math.pi / 48
    assert S.rat_splitting(0, hbar, params) == \
        S.unperturbed_splitting_quad(0, hbar, params)


def test_rat_overestimates_at_phi_pi():
    from resotunnel.quantum import TorusGrid, exact_splitting

    params = ModelParams(phi=math.pi)
    hbar = math.pi / 48
    rat = S.rat_splitting(0, hbar, params)
    exact = exact_splitting(0, TorusGrid(24), params).delta_e
    assert rat / exact > 10.0


# ---------------- crossover criterion ----------------


def test_criterion_values():
    res0 = S.hbar_res(0, DEFAULTS)
    assert res0.N_res == pytest.approx(9.0, abs=2.0)
    assert res0.hbar_res > res0.hbar_peak
    res_small = S.hbar_res(0, ModelParams(b_mod=0.001))
    assert res_small.N_res == pytest.approx(13.0, abs=2.0)


def test_chain_area_values():
    from resotunnel.model import pendulum_params

    pend = pendulum_params(DEFAULTS)
    d_area = 16 * math.sqrt(2 * abs(pend.mass * pend.V(pend.I_res)))
    assert d_area == pytest.approx(0.7753, abs=2e-4)
    assert 2 * math.pi * pend.I_res == pytest.approx(1.428, abs=1e-3)
