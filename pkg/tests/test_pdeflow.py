import csv
import warnings

import numpy as np
import pytest

from fchlab.curve import MeanderParams, ModeBasis, build_curve
from fchlab.field import Grid2D, synthesize_bilayer
from fchlab.pdeflow import BlowUp, PdeConfig, Scheme, Stepper, default_stabilization, run, step

EPS = 0.2


def smooth_field(grid, rng, mean=-0.5, amp=0.2, kmax=3):
    X, Y = grid.points[..., 0], grid.points[..., 1]
    u = np.full_like(X, mean)
    for kx in range(-kmax, kmax + 1):
        for ky in range(-kmax, kmax + 1):
            if kx or ky:
                a, ph = rng.standard_normal(), rng.uniform(0, 2 * np.pi)
                u += amp / (kx * kx + ky * ky) * a * np.cos(kx * X + ky * Y + ph)
    return u


def integrate(u, grid, scheme, dt, t):
    cfg = PdeConfig(EPS, 1.45, 2.0, dt, t, scheme=scheme)
    stepper = Stepper(grid, cfg)
    for _ in range(int(round(t / dt))):
        u = stepper.step(u)
    return u


@pytest.fixture(scope="module")
def small():
    return Grid2D(2 * np.pi, 32)


def test_config_validation():
    with pytest.raises(ValueError):
        PdeConfig(EPS, 1.45, 2.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        PdeConfig(EPS, 1.45, 2.0, 0.1, 1.0, stabilization_c=-1.0)
    with pytest.raises(ValueError):
        PdeConfig(EPS, 1.45, 2.0, 0.1, 1.0, scheme="Euler")
    assert PdeConfig(EPS, 1.45, 2.0, 0.1, 1.0, scheme="Sbdf2").scheme is Scheme.SBDF2


def test_default_stabilization(spec):
    u = np.linspace(spec.b_minus, spec.b_plus, 2001)
    assert default_stabilization(spec) == pytest.approx(np.max(np.abs(spec.derivatives()[2](u))) ** 2, rel=1e-4)
    assert default_stabilization(spec) == pytest.approx(21.16, rel=1e-3)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_constant_state_is_fixed(small, scheme, spec):
    # a constant field has Pi0 F = 0
    u = np.full((small.N, small.N), spec.b_minus + 0.3)
    cfg = PdeConfig(EPS, 1.45, 2.0, 1e-3, 1.0, scheme=scheme)
    s = Stepper(small, cfg)
    v = u
    for _ in range(5):
        v = s.step(v)
    assert np.max(np.abs(v - u)) < 1e-13


@pytest.mark.parametrize("scheme", list(Scheme))
def test_mean_is_preserved(small, rng, scheme):
    u = smooth_field(small, rng)
    v = integrate(u, small, scheme, 2e-3, 0.1)
    assert abs(v.mean() - u.mean()) < 1e-14
    assert np.max(np.abs(v - u)) > 1e-4


def test_single_step_helper_matches_stepper(small, rng):
    u = smooth_field(small, rng)
    cfg = PdeConfig(EPS, 1.45, 2.0, 1e-3, 1.0)
    np.testing.assert_array_equal(step(u, small, cfg), Stepper(small, cfg).step(u))


def test_imex_converges_to_rk4(small, rng):
    u0 = smooth_field(small, rng)
    t = 0.2
    ref = integrate(u0, small, Scheme.RK4, 1e-4, t)
    e1 = [np.max(np.abs(integrate(u0, small, Scheme.SEMI_IMPLICIT, dt, t) - ref)) for dt in (4e-3, 2e-3, 1e-3)]
    e2 = [np.max(np.abs(integrate(u0, small, Scheme.SBDF2, dt, t) - ref)) for dt in (4e-3, 2e-3, 1e-3)]
    r1 = np.log2(np.array(e1[:-1]) / np.array(e1[1:]))
    r2 = np.log2(np.array(e2[:-1]) / np.array(e2[1:]))
    assert np.all(np.abs(r1 - 1.0) < 0.2)
    assert np.all(r2 > 1.7)
    assert e2[-1] < e1[-1]


def test_rk4_is_fourth_order(small, rng):
    u0 = smooth_field(small, rng)
    t = 0.1
    ref = integrate(u0, small, Scheme.RK4, 2.5e-4, t)
    a = np.max(np.abs(integrate(u0, small, Scheme.RK4, 5e-3, t) - ref))
    b = np.max(np.abs(integrate(u0, small, Scheme.RK4, 2.5e-3, t) - ref))
    assert 3.5 < np.log2(a / b) < 4.5


def test_rk4_warns_and_blows_up(small, rng):
    u0 = smooth_field(small, rng)
    cfg = PdeConfig(EPS, 1.45, 2.0, 0.2, 20.0, scheme=Scheme.RK4)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        with pytest.raises(BlowUp) as exc:
            run(u0, small, cfg)
    assert any("stability" in str(x.message) for x in w)
    assert np.all(np.isfinite(exc.value.last_state))
    assert exc.value.time >= 0.0


def test_nonfinite_initial_field(small):
    u = np.zeros((small.N, small.N))
    u[0, 0] = np.nan
    with pytest.raises(ValueError):
        run(u, small, PdeConfig(EPS, 1.45, 2.0, 0.01, 0.1))


@pytest.fixture(scope="module")
def bilayer_run(profiles):
    grid = Grid2D(2 * np.pi, 64)
    curve = build_curve(ModeBasis(1.6, 9), MeanderParams.zeros(9).with_mode(5, 0.02))
    u0 = synthesize_bilayer(grid, curve, profiles, 1.5 * profiles.constants.sigma1_star, EPS)
    cfg = PdeConfig(EPS, 1.45, 2.0, 0.01, 2.0, snapshot_every=50)
    return grid, u0, run(u0, grid, cfg, keep_snapshots=True, check_energy_every_step=True)


def test_energy_decreases_on_bilayer(bilayer_run):
    _, _, res = bilayer_run
    assert res.max_energy_increase < 0.0
    assert np.all(np.diff(res.series.energy_values) < 0)


def test_run_bookkeeping(bilayer_run, tmp_path):
    grid, u0, res = bilayer_run
    assert res.steps == 200
    np.testing.assert_allclose(res.series.times, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert len(res.snapshots) == 5
    np.testing.assert_allclose(res.series.mass_values, u0.mean(), atol=1e-14)
    res.series.to_csv(tmp_path / "ts.csv")
    rows = list(csv.reader(open(tmp_path / "ts.csv")))
    assert rows[0] == ["time [nondim]", "mass [nondim]", "energy [nondim]", "length [nondim]", "p0_est [-]"]
    assert len(rows) == 6


def test_extract_hook_is_recorded(small, rng):
    u0 = smooth_field(small, rng)
    calls = []

    def hook(u):
        calls.append(1)
        return 1.0, 2.0

    res = run(u0, small, PdeConfig(EPS, 1.45, 2.0, 0.01, 0.1, snapshot_every=5), extract_hook=hook)
    assert len(calls) == 3
    assert res.series.p0_estimates == [2.0, 2.0, 2.0]
