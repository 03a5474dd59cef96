import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fchlab.curve import MeanderParams, ModeBasis, build_curve
from fchlab.rclflow import (RclConfig, RclState, ReducedMode, Slaving, equilibrium_p0, mass_for_radius, meander_rates,
                            meander_rhs, normal_velocity, p0_star, parameter_rates, reduced_energy, run_reduced,
                            shape_U, slaved_sigma, stationary_sigma, step_curve)

N1 = 17


@pytest.fixture(scope="module")
def basis():
    return ModeBasis(3.0, N1)


def cfg_for(consts, **kw):
    base = dict(eps=0.1, eta1=1.45, eta2=2.0, R0=3.0, N1=N1, sigma0=0.5 * consts.sigma1_star)
    base.update(kw)
    return RclConfig(**base)


def test_config_validation(consts):
    with pytest.raises(ValueError):
        RclConfig(0.1, 1.45, 2.0, 3.0)
    with pytest.raises(ValueError):
        RclConfig(0.1, 1.45, 2.0, 3.0, M0=1.0, sigma0=0.0)
    with pytest.raises(ValueError):
        RclConfig(0.1, 1.45, 2.0, -3.0, sigma0=0.0)
    with pytest.raises(ValueError):
        RclConfig(0.1, 1.45, 2.0, 3.0, sigma0=0.0, slaving="bogus")
    cfg = cfg_for(consts)
    assert cfg.time_step == pytest.approx(0.1 * 81 / (1e-4 * 8**4))
    assert cfg.alpha_value == 0.0


@pytest.mark.parametrize("slaving", list(Slaving))
def test_slaving_reproduces_sigma0_on_base_circle(consts, slaving):
    cfg = cfg_for(consts, slaving=slaving)
    assert slaved_sigma(MeanderParams.zeros(N1), cfg, consts) == pytest.approx(cfg.sigma0, abs=1e-13)


def test_leading_slaving_is_linear(consts):
    cfg = cfg_for(consts)
    c0 = 2 * np.pi * consts.m0**2 / (consts.B2_far * (4 * np.pi) ** 2 * consts.m1**2)
    assert cfg.c0(consts) == pytest.approx(c0, rel=1e-14)
    s = slaved_sigma(MeanderParams.zeros(N1).with_mode(0, 0.1), cfg, consts)
    assert s == pytest.approx(cfg.sigma0 - c0 * consts.m1**2 * 3.0 * 0.1 / consts.m0, rel=1e-13)


def test_mass_slaving_conserves_mass(consts):
    cfg = cfg_for(consts, slaving="mass", eps=0.2)
    for p0 in (-0.2, 0.0, 0.3):
        s = slaved_sigma(MeanderParams.zeros(N1).with_mode(0, p0), cfg, consts)
        L = 2 * np.pi * 3.0 * (1 + p0)
        mass = L * (consts.m0 + 0.2 * consts.eta_d * consts.m2) + s * (
            consts.B2_far * cfg.area + 0.2 * L * consts.B2_excess)
        assert mass == pytest.approx(cfg.mass(consts), rel=1e-13)


def test_slaved_sigma_ignores_shape(consts):
    cfg = cfg_for(consts)
    a = slaved_sigma(MeanderParams.zeros(N1).with_mode(0, 0.05), cfg, consts)
    b = slaved_sigma(MeanderParams.zeros(N1).with_mode(0, 0.05).with_mode(6, 0.1).with_mode(1, 0.4), cfg, consts)
    assert a == b


@pytest.mark.parametrize("alpha", [None, 0.3])
def test_circle_is_stationary_at_stationary_sigma(consts, alpha):
    cfg = cfg_for(consts, alpha=alpha)
    for R in (2.0, 3.0, 4.5):
        curve = build_curve(ModeBasis(3.0, N1), MeanderParams.zeros(N1).with_mode(0, R / 3.0 - 1))
        V = normal_velocity(curve, stationary_sigma(cfg, consts, R), cfg, consts)
        assert np.max(np.abs(V)) < 1e-15


def test_circle_grows_below_sigma1_star(consts, basis):
    # kappa < 0 for the counter-clockwise circle; V > 0 means outward motion
    cfg = cfg_for(consts)
    curve = build_curve(basis, MeanderParams.zeros(N1))
    rates = parameter_rates(curve, normal_velocity(curve, 0.0, cfg, consts))
    assert rates[0] > 0
    assert np.max(np.abs(rates[1:])) < 1e-14 * abs(rates[0]) + 1e-18


def test_circle_rate_matches_radius_ode(consts):
    cfg = cfg_for(consts)
    R = 3.3
    curve = build_curve(ModeBasis(3.0, N1), MeanderParams.zeros(N1).with_mode(0, R / 3.0 - 1))
    sigma = 0.2
    V = normal_velocity(curve, sigma, cfg, consts)
    dR = float(np.mean(V))
    assert parameter_rates(curve, V)[0] * 3.0 == pytest.approx(dR, rel=1e-12)


@pytest.mark.parametrize("j", [1, 2])
def test_translation_rate(consts, basis, j):
    # a uniform normal velocity along one translation mode moves the curve rigidly
    curve = build_curve(basis, MeanderParams.zeros(N1))
    V = curve.modes()[j] * 0.01
    rates = parameter_rates(curve, V)
    assert rates[j] == pytest.approx(0.01 * np.sqrt(2), rel=1e-12)
    assert np.max(np.abs(np.delete(rates, j))) < 1e-14


def test_flow_is_translation_invariant(consts, basis):
    cfg = cfg_for(consts)
    p = MeanderParams.zeros(N1).with_mode(0, 0.05).with_mode(5, 0.03).with_mode(8, -0.02)
    q = p.with_mode(1, 0.7).with_mode(2, -0.4)
    a = step_curve(RclState(p, 0.1), cfg, consts, basis).p.as_vector() - p.as_vector()
    b = step_curve(RclState(q, 0.1), cfg, consts, basis).p.as_vector() - q.as_vector()
    np.testing.assert_allclose(b, a, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.3, 0.5), st.floats(-1, 1), st.floats(-1, 1), st.floats(-0.05, 0.05), st.integers(3, N1 - 1))
def test_length_identity(p0, p1, p2, a, j):
    p = MeanderParams.zeros(N1).with_mode(0, p0).with_mode(1, p1).with_mode(2, p2).with_mode(j, a)
    curve = build_curve(ModeBasis(3.0, N1), p)
    assert curve.total_length == pytest.approx(2 * np.pi * 3.0 * (1 + p0), rel=1e-8)


def test_p0_star_signs(consts):
    # sigma0 above sigma1* gives a longer circle, below gives a shorter one
    assert p0_star(cfg_for(consts, sigma0=0.5 * consts.sigma1_star), consts) > 0
    assert p0_star(cfg_for(consts, sigma0=1.5 * consts.sigma1_star), consts) < 0
    assert p0_star(cfg_for(consts, sigma0=consts.sigma1_star), consts) == pytest.approx(0, abs=1e-15)


def test_p0_star_first_order_correction(consts):
    cfg = cfg_for(consts, alpha=0.2)
    p00 = p0_star(cfg, consts, first_order=False)
    corr = (0.5 / (9 * (1 + p00) ** 2) + 0.2) / (cfg.c0(consts) * 3.0)
    assert p0_star(cfg, consts) == pytest.approx(p00 + 0.1 * corr, rel=1e-13)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.025])
def test_equilibrium_approaches_p0_star(consts, eps):
    cfg = cfg_for(consts, eps=eps)
    pe, ps = equilibrium_p0(cfg, consts), p0_star(cfg, consts)
    assert abs(pe - ps) < 0.05 * eps / 0.1 * abs(ps)


@pytest.mark.parametrize("slaving", list(Slaving))
def test_mass_for_radius_inverts_equilibrium(consts, slaving):
    cfg = cfg_for(consts, slaving=slaving, eps=0.2)
    M0 = mass_for_radius(cfg, consts, 3.4)
    probe = RclConfig(0.2, 1.45, 2.0, 3.0, N1=N1, M0=M0, slaving=slaving)
    assert 3.0 * (1 + equilibrium_p0(probe, consts)) == pytest.approx(3.4, rel=1e-10)


def test_meander_rhs_examples(consts):
    cfg = cfg_for(consts)
    U = shape_U(ModeBasis(3.0, N1))
    ps = p0_star(cfg, consts)
    # at the equilibrium circle nothing moves
    assert np.max(np.abs(meander_rhs(MeanderParams.zeros(N1).with_mode(0, ps), cfg, consts, U))) == 0
    # p0 relaxes linearly toward p0*
    r = meander_rhs(MeanderParams.zeros(N1).with_mode(0, ps + 0.1), cfg, consts, U)
    assert r[0] == pytest.approx(-1e-3 * cfg.c0(consts) / 3.0 * 0.1, rel=1e-13)
    # a shape mode at p0 = p0* decays at the bending rate
    p = MeanderParams.zeros(N1).with_mode(0, ps).with_mode(7, 0.01)
    r = meander_rhs(p, cfg, consts, U)
    assert r[7] == pytest.approx(-meander_rates(cfg)[4] * 0.01, rel=1e-12)
    np.testing.assert_array_equal(np.delete(r, 7), 0.0)


def test_meander_rates_values(consts):
    rates = meander_rates(cfg_for(consts))
    beta = np.array([2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8], dtype=float)
    np.testing.assert_allclose(rates, 1e-4 * (beta**2 - 1) ** 2 / 81, rtol=1e-14)


def test_shape_U_pairing_entries(basis):
    # int s Theta_c' Theta_s over one period is -beta pi for each cos/sin pair
    U = shape_U(basis)
    assert U.shape == (N1 - 3, N1 - 3)
    for i, beta in enumerate(range(2, 9)):
        assert U[2 * i, 2 * i + 1] == pytest.approx(-beta * np.pi, rel=1e-3)


@pytest.fixture(scope="module")
def both_levels(consts, basis):
    cfg = cfg_for(consts, eps=0.2, dt=2.0, t_end=2000.0, record_every=10)
    p = MeanderParams.zeros(N1).with_mode(9, 0.01)
    init = RclState(p, 0.0)
    full = run_reduced(cfg, consts, basis, init, ReducedMode.FULL_CURVE)
    ode = run_reduced(cfg, consts, basis, init, ReducedMode.MEANDER_ODE)
    return cfg, full, ode


def test_levels_agree_on_p0(consts, both_levels):
    cfg, full, ode = both_levels
    assert full.halted is None and ode.halted is None
    assert full.p0[-1] == pytest.approx(ode.p0[-1], rel=0.05)
    assert ode.p0[-1] == pytest.approx(p0_star(cfg, consts), rel=1e-6)
    assert full.p0[-1] == pytest.approx(equilibrium_p0(cfg, consts), rel=1e-4)


def test_reduced_energy_decreases(both_levels):
    _, full, _ = both_levels
    assert np.all(np.diff(full.energy) <= 1e-12 * abs(full.energy[0]))


def test_sigma_relaxes_to_stationary_value(consts, both_levels):
    cfg, full, _ = both_levels
    R = 3.0 * (1 + full.p0[-1])
    assert full.sigma[-1] == pytest.approx(stationary_sigma(cfg, consts, R), abs=1e-6)
    assert abs(full.sigma[-1] - consts.sigma1_star) < 2 * cfg.eps


def test_shape_mode_decays(both_levels):
    _, full, ode = both_levels
    assert abs(full.mode(9)[-1]) < 1e-3 * 0.01
    assert abs(ode.mode(9)[-1]) < 1e-3 * 0.01


def test_trajectory_csv(tmp_path, both_levels):
    _, full, _ = both_levels
    full.to_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0][0] == "time [nondim]" and rows[0][1] == "p0 [-]"
    assert len(rows) == len(full.times) + 1


def test_domain_exit_halts(consts, basis):
    cfg = cfg_for(consts, dt=1.0, t_end=10.0, delta=0.01, domain_C=1.0)
    traj = run_reduced(cfg, consts, basis, RclState(MeanderParams.zeros(N1).with_mode(4, 0.02), 0.0))
    assert traj.halted is not None and "admissible" in traj.halted


def test_reduced_energy_of_circle(consts, basis):
    cfg = cfg_for(consts)
    curve = build_curve(basis, MeanderParams.zeros(N1))
    e = reduced_energy(curve, consts.sigma1_star, cfg, consts)
    assert e == pytest.approx(0.5 * consts.nu_s * 2 * np.pi / 3.0, rel=1e-10)
