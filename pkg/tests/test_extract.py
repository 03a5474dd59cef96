import csv

import numpy as np
import pytest

from fchlab.curve import MeanderParams, ModeBasis, build_curve
from fchlab.extract import (ExtractConfig, ExtractionError, Interface, default_level, fit_modes, locate_interface,
                            radial_mode_amplitudes)
from fchlab.field import Grid2D, synthesize_bilayer

EPS = 0.2
R0 = 3.0
N1 = 17


@pytest.fixture(scope="module")
def grid():
    return Grid2D(2 * np.pi, 128)


@pytest.fixture(scope="module")
def basis():
    return ModeBasis(R0, N1)


def field_for(grid, basis, profiles, p):
    return synthesize_bilayer(grid, build_curve(basis, p), profiles, profiles.constants.sigma1_star, EPS)


def polar_interface(radius_fn, n=512, center=(0.0, 0.0)):
    th = 2 * np.pi * np.arange(n) / n
    r = radius_fn(th)
    return Interface(th, r, np.asarray(center, float), r - 0.1, r + 0.1, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ExtractConfig(n_rays=8)
    with pytest.raises(ValueError):
        ExtractConfig(n_rays=64, N1=17)
    assert ExtractConfig(n_rays=68, N1=17).n_rays == 68


def test_default_level(spec, profile):
    lvl = default_level(spec)
    assert spec.b_minus < lvl < profile.turning_point
    assert ExtractConfig(level=0.1).resolved_level(spec) == 0.1


def test_fit_of_exact_circle(basis):
    itf = polar_interface(lambda th: np.full_like(th, 3.3), n=4096, center=(0.2, -0.1))
    p = fit_modes(itf, basis)
    assert p.p0 == pytest.approx(0.1, abs=1e-6)
    assert p.p1 == pytest.approx(0.2 * np.sqrt(2 * np.pi * R0), rel=1e-12)
    assert p.p2 == pytest.approx(-0.1 * np.sqrt(2 * np.pi * R0), rel=1e-12)
    assert np.max(np.abs(p.p_hat)) < 1e-12


def test_fit_of_single_harmonic(basis):
    # r = R0 + a cos(3 theta) corresponds to shape mode j = 5 with amplitude a sqrt(pi R0)
    a = 0.02
    itf = polar_interface(lambda th: R0 + a * np.cos(3 * th))
    p = fit_modes(itf, basis)
    assert p.as_vector()[5] == pytest.approx(a * np.sqrt(np.pi * R0), rel=1e-12)
    others = np.delete(p.p_hat, 2)
    assert np.max(np.abs(others)) < 1e-12


def test_fit_needs_enough_rays(basis):
    itf = polar_interface(lambda th: np.full_like(th, R0), n=16)
    with pytest.raises(ExtractionError):
        fit_modes(itf, basis)


def test_radial_amplitudes():
    itf = polar_interface(lambda th: 2.0 + 0.03 * np.sin(4 * th + 0.5) - 0.01 * np.cos(7 * th))
    amp = radial_mode_amplitudes(itf, kmax=10)
    expect = np.zeros(10)
    expect[3], expect[6] = 0.03, 0.01
    np.testing.assert_allclose(amp, expect, atol=1e-13)


def test_roundtrip_circle(grid, basis, profiles):
    u = field_for(grid, basis, profiles, MeanderParams.zeros(N1))
    itf = locate_interface(grid, u)
    assert itf.skipped == 0
    np.testing.assert_allclose(itf.radius, R0, atol=grid.h / 20)
    p = fit_modes(itf, basis)
    assert abs(p.p0) < 1e-4
    assert max(abs(p.p1), abs(p.p2)) < 1e-3
    assert np.max(np.abs(p.p_hat)) < 1e-3


def test_translation_equivariance(grid, basis, profiles):
    u = field_for(grid, basis, profiles, MeanderParams.zeros(N1).with_mode(5, 0.05))
    a = locate_interface(grid, u)
    b = locate_interface(grid, np.roll(u, (6, -4), axis=(0, 1)))
    np.testing.assert_allclose(b.center - a.center, [6 * grid.h, -4 * grid.h], atol=1e-9)
    np.testing.assert_allclose(b.radius, a.radius, atol=1e-9)


def test_roundtrip_translated_shape(grid, basis, profiles):
    amp = 4 * grid.h * np.sqrt(np.pi * R0)
    p = MeanderParams.zeros(N1).with_mode(0, 0.05).with_mode(1, 0.5).with_mode(5, amp)
    q = fit_modes(locate_interface(grid, field_for(grid, basis, profiles, p)), basis)
    assert q.p0 == pytest.approx(0.05, abs=2e-3)
    assert q.p1 == pytest.approx(0.5, abs=1e-2)
    assert q.as_vector()[5] == pytest.approx(amp, rel=0.05)


def test_interface_csv(tmp_path):
    itf = polar_interface(lambda th: np.full_like(th, 2.0), n=32)
    itf.to_csv(tmp_path / "i.csv")
    rows = list(csv.reader(open(tmp_path / "i.csv")))
    assert rows[0] == ["theta [rad]", "radius [nondim]", "x [nondim]", "y [nondim]"]
    assert float(rows[1][2]) == pytest.approx(2.0)


def test_uniform_field_is_rejected(grid, spec):
    with pytest.raises(ExtractionError):
        locate_interface(grid, np.full((grid.N, grid.N), spec.b_minus))


def test_two_bilayers_abort(grid, profiles):
    small = ModeBasis(1.2, 9)
    u1 = synthesize_bilayer(grid, build_curve(small, MeanderParams.zeros(9)), profiles, 0.0, EPS)
    u = np.maximum(u1, np.roll(u1, grid.N // 2, axis=0))
    with pytest.raises(ExtractionError):
        locate_interface(grid, u)
