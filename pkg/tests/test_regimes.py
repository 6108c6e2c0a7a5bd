import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from cyltfm import CylinderGeometry, FlowField, ReleaseProfile
from cyltfm.geometry import UnitSystem
from cyltfm.modal_transform import CuboidObserver, eval_release
from cyltfm.regimes import (
    RegimeParams,
    baseline_series,
    classify,
    diffusion_for_alpha,
    dispersion_factor,
    dispersive_solution,
    flow_dominant_solution,
    taylor_aris_diffusivity,
)
from cyltfm.series import fwhm, peak, support_width

GEOM = CylinderGeometry()
FLOW = FlowField(50.0)
UNIFORM = ReleaseProfile.uniform()


def test_dispersion_factor_si_examples():
    assert dispersion_factor(2.5e-12, 1e-4, 5e-5, 1e-4) == pytest.approx(1e-3, rel=1e-12)
    assert dispersion_factor(5e-9, 1e-4, 5e-5, 1e-4) == pytest.approx(2.0, rel=1e-12)
    assert dispersion_factor(5e-12, 1e-4, 5e-5, 1e-4) == pytest.approx(2e-3, rel=1e-12)


def test_dispersion_factor_is_unit_free():
    u = UnitSystem(1e-4, 100.0)
    D = u.diffusivity(2.5e-10)
    assert D == pytest.approx(2.5)
    assert dispersion_factor(D, 1.0, 50.0, 1.0) == pytest.approx(0.1)
    assert diffusion_for_alpha(0.1, 1.0, 50.0, 1.0) == pytest.approx(2.5)


def test_dispersion_factor_needs_flow():
    with pytest.raises(ValueError):
        dispersion_factor(1.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        dispersion_factor(1.0, 1.0, 1.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(D=st.floats(1e-6, 1e3), d=st.floats(1e-3, 10), v0=st.floats(1e-2, 1e3), R0=st.floats(0.1, 5), f=st.floats(1.01, 4))
def test_alpha_monotonicity(D, d, v0, R0, f):
    a = dispersion_factor(D, d, v0, R0)
    assert dispersion_factor(f * D, d, v0, R0) > a
    assert dispersion_factor(D, f * d, v0, R0) > a
    assert dispersion_factor(D, d, f * v0, R0) < a
    assert dispersion_factor(D, d, v0, f * R0) < a
    assert diffusion_for_alpha(a, d, v0, R0) == pytest.approx(D, rel=1e-12)


@pytest.mark.parametrize("alpha,label", [(1e-5, "flow-dominant"), (1e-3, "flow-dominant"), (1e-2, "flow-dominant"), (0.1, "mixed"), (1.0, "mixed"), (2.0, "dispersive")])
def test_classification(alpha, label):
    assert classify(alpha) == label


def test_regime_params():
    p = RegimeParams.from_params(2.5, 1.0, 50.0, 1.0)
    assert p.alpha == pytest.approx(0.1) and p.label == "mixed"


def test_taylor_aris_examples():
    D_eff, pe = taylor_aris_diffusivity(50.0, 25.0, 1.0)
    assert pe == pytest.approx(0.5)
    assert D_eff == pytest.approx(50 * (1 + 0.25 / 48))
    assert D_eff == pytest.approx(50.260, abs=1e-3)
    with pytest.raises(ValueError):
        taylor_aris_diffusivity(0.0, 25.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(D=st.floats(1e-4, 1e4), v=st.floats(0, 1e3))
def test_effective_diffusivity_exceeds_molecular(D, v):
    assert taylor_aris_diffusivity(D, v, 1.0)[0] >= D


# --- flow-dominant ---------------------------------------------------------------------

def test_advection_at_zero_time_is_release():
    rng = np.random.default_rng(0)
    x = np.stack([rng.uniform(0, 1, 50), rng.uniform(-3, 3, 50), rng.uniform(0, 2, 50)], axis=-1)
    for prof in (UNIFORM, ReleaseProfile.point(0.5)):
        np.testing.assert_array_equal(flow_dominant_solution(prof, FLOW, x, 0.0), eval_release(prof, x))


def test_advection_arrival_on_axis():
    obs = [CuboidObserver((0.0, math.pi / 2, 2.0))]
    t = np.arange(901) * 2e-4
    s = baseline_series("flow-dominant", UNIFORM, FLOW, GEOM, obs, t)
    onset = t[np.flatnonzero(s.values[0] > 0)[0]]
    # the release tail (z = 0.85) reaches z = 2 at (2 - 1.15) / 50
    assert onset == pytest.approx(0.017, abs=2.1e-4)
    tp, vp = peak(t, s.values[0])
    assert tp == pytest.approx(0.02, abs=1e-6)
    assert vp == pytest.approx(6.4e-5, rel=1e-6)
    # the whole pulse lasts z0 / v0, its half-maximum width is half of that
    assert support_width(t, s.values[0], level=1e-9) == pytest.approx(0.006, abs=4e-4)
    assert fwhm(t, s.values[0]) == pytest.approx(0.003, rel=1e-3)


def test_advection_conserves_axial_mass():
    def mass(r, t):
        # Gauss-Legendre on the advected support, where the integrand is smooth
        shift = FLOW.velocity(r) * t
        z, wz = oracles.gl(0.85 + shift, 1.15 + shift, 64)
        x = np.stack([np.full_like(z, r), np.zeros_like(z), z], axis=-1)
        return np.sum(wz * flow_dominant_solution(UNIFORM, FLOW, x, t))

    for r in (0.0, 0.4, 0.9):
        assert mass(r, 0.1) == pytest.approx(0.15, rel=1e-12)
        assert mass(r, 0.1) == pytest.approx(mass(r, 0.0), rel=1e-12)


# --- dispersive --------------------------------------------------------------------------

def test_dispersive_at_zero_time_is_axial_marginal():
    z = np.linspace(0, 2, 41)
    x = np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=-1)
    ref = UNIFORM.cross_section_fraction(GEOM) * UNIFORM.axial(z)
    np.testing.assert_allclose(dispersive_solution(UNIFORM, FLOW, 2.5, GEOM, x, 0.0), ref)


@pytest.mark.parametrize("t", [0.005, 0.02])
def test_free_dispersive_moments(t):
    D = 50.0
    z, wz = oracles.gl(-20.0, 30.0, 3000)
    x = np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=-1)
    p = dispersive_solution(UNIFORM, FLOW, D, GEOM, x, t, boundary="free")
    m0, m1 = np.sum(wz * p), np.sum(wz * p * z)
    # raised cosine of width w centred at 1: mean 1, variance w^2 (1/12 - 1/(2 pi^2))
    mean0, var0 = 1.0, 0.3**2 * (1 / 12 - 1 / (2 * math.pi**2))
    mean = m1 / m0
    var = np.sum(wz * p * (z - mean) ** 2) / m0
    D_eff, _ = taylor_aris_diffusivity(D, FLOW.v_eff, 1.0)
    assert mean - mean0 == pytest.approx(FLOW.v_eff * t, rel=1e-8)
    assert var - var0 == pytest.approx(2 * D_eff * t, rel=1e-8)
    assert m0 == pytest.approx(UNIFORM.cross_section_fraction(GEOM) * 0.15, rel=1e-8)


def test_absorbing_image_vanishes_at_inlet():
    x = np.array([[0.0, 0.0, 0.0], [0.5, 1.0, 0.0]])
    np.testing.assert_allclose(dispersive_solution(UNIFORM, FLOW, 50.0, GEOM, x, 0.01), 0.0, atol=1e-14)
    free = dispersive_solution(UNIFORM, FLOW, 50.0, GEOM, [0.0, 0.0, 0.0], 0.01, boundary="free")
    assert free > 0
    with pytest.raises(ValueError):
        dispersive_solution(UNIFORM, FLOW, 50.0, GEOM, x, 0.01, boundary="robin")


def test_baseline_series_format():
    obs = [CuboidObserver((0.0, math.pi / 2, 2.0), name="a"), CuboidObserver((0.3, 0.0, 3.0), name="b")]
    t = np.linspace(0, 0.05, 11)
    s = baseline_series("dispersive", UNIFORM, FLOW, GEOM, obs, t, D=50.0)
    assert s.values.shape == (2, 11) and s.names == ("a", "b")
    assert s.source == "dispersive" and s.meta["boundary"] == "absorbing"
    assert s.values[0, 3] == pytest.approx(obs[0].volume * dispersive_solution(UNIFORM, FLOW, 50.0, GEOM, obs[0].center, t[3]))
    with pytest.raises(ValueError):
        baseline_series("ballistic", UNIFORM, FLOW, GEOM, obs, t)
