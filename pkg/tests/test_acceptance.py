"""Acceptance criteria at their stated tolerances.

Each test records a PASS/FAIL line in ``conftest.ACCEPTANCE`` before asserting,
so the terminal summary lists every criterion even when some fail. The heavy
runs (Q = 6000 exponentials, 500-realization particle simulations) take several
minutes each on one core; results are shared through module fixtures.
"""
import math
import time

import numpy as np
import pytest

import conftest
import test_dynamics
import test_eigensystem
import test_flow_coupling
import test_pbs
from cyltfm import CylinderGeometry, FlowField, ReleaseProfile
from cyltfm.dynamics import SimulationConfig, guard_horizon, simulate
from cyltfm.modal_transform import CuboidObserver, modal_mass, transform_initial
from cyltfm.model import ChannelModel
from cyltfm.pbs import PbsConfig, realization_rng, run_pbs, sample_initial
from cyltfm.regimes import baseline_series, diffusion_for_alpha
from cyltfm.series import ConcentrationSeries, fwhm, normalized_rmse, peak

GEOM = CylinderGeometry(1.0, 10.0)
V0 = 50.0
FLOW = FlowField(V0)
TAU = 100.0  # seconds per normalized time unit
UNIFORM = ReleaseProfile.uniform()
RX = CuboidObserver((0.0, math.pi / 2, 2.0), name="rx")
CONFIG = SimulationConfig(T=2e-4, steps=900)  # 0.02 s steps up to 18 s
MASS_TIMES = np.linspace(0.0, 0.18, 10)


def D_of(alpha):
    return diffusion_for_alpha(alpha, 1.0, V0, GEOM.R0)


def record(key, ok, msg):
    conftest.ACCEPTANCE[key] = (bool(ok), msg)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {msg}")
    assert ok, msg


def rel(a, b):
    return abs(a - b) / abs(b)


# --- shared heavy runs ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def uniform_runs():
    """Memoized TFM runs of the uniform release keyed by ``(alpha, q)``."""
    cache = {}

    def get(alpha, q=(0, 30, 200)):
        if (alpha, q) not in cache:
            t0 = time.perf_counter()
            model = ChannelModel.build(GEOM, q)
            es = model.eigensystem
            Ad = model.discretize(D_of(alpha), V0, CONFIG.T)
            s = simulate(
                Ad, transform_initial(UNIFORM, es), [RX], CONFIG,
                snapshot_times=MASS_TIMES, snapshot_fn=lambda y: modal_mass(es, y),
                t_obs=guard_horizon(UNIFORM.z_e, GEOM.Z0, V0),
            )
            s.meta["seconds"] = time.perf_counter() - t0
            del Ad
            cache[(alpha, q)] = s
        return cache[(alpha, q)]

    return get


@pytest.fixture(scope="module")
def pbs_uniform():
    t0 = time.perf_counter()
    cfg = PbsConfig(n_tx=1000, dt=1e-4, realizations=500)
    s = run_pbs(UNIFORM, GEOM, D_of(0.1), FLOW, [RX], 0.18, cfg, record_every=2)
    s.meta["seconds"] = time.perf_counter() - t0
    return s


def _describe(s: ConcentrationSeries):
    tp, vp = peak(s.times, s.values[0])
    return tp * TAU, vp


# --- 1: mixed regime against particles --------------------------------------------------------

def test_criterion_1_mixed_regime_matches_pbs(uniform_runs, pbs_uniform):
    tfm = uniform_runs(0.1)
    err = normalized_rmse(pbs_uniform, tfm)
    minutes = (tfm.meta["seconds"] + pbs_uniform.meta["seconds"]) / 60
    tp, vp = _describe(tfm)
    msg = f"NRMSE {err:.4f} (<= 0.07), runtime {minutes:.1f} min (<= 10), TFM peak {vp:.3e} at {tp:.2f} s"
    record("1", err <= 0.07 and minutes <= 10, msg)


# --- 2: flow-dominant baseline ---------------------------------------------------------------

@pytest.fixture(scope="module")
def flow_dominant(uniform_runs):
    tfm = uniform_runs(1e-3)
    adv = baseline_series("flow-dominant", UNIFORM, FLOW, GEOM, [RX], tfm.times)
    return tfm, adv


def test_criterion_2a_peak_arrival(flow_dominant):
    tfm, _ = flow_dominant
    tp, _ = _describe(tfm)
    record("2a", rel(tp, 2.0) <= 0.10, f"peak arrival {tp:.3f} s (2.0 s +- 10%)")


def test_criterion_2b_pulse_width(flow_dominant):
    # The advected raised cosine of full width z0 spans z0/v0 = 0.6 s at the
    # observer; its half-maximum width is half that. See the decision ledger.
    tfm, adv = flow_dominant
    w = fwhm(tfm.times, tfm.values[0]) * TAU
    w_adv = fwhm(adv.times, adv.values[0]) * TAU
    record("2b", rel(w, 0.6) <= 0.15, f"FWHM {w:.3f} s (0.6 s +- 15%); advection baseline FWHM {w_adv:.3f} s")


def test_criterion_2c_matches_advection(flow_dominant):
    tfm, adv = flow_dominant
    err = normalized_rmse(adv, tfm)
    record("2c", err <= 0.10, f"NRMSE vs advection {err:.4f} (<= 0.10)")


# --- 3: dispersive baseline ------------------------------------------------------------------

def test_criterion_3_dispersive_baseline(uniform_runs):
    tfm = uniform_runs(2.0)
    ta = baseline_series("dispersive", UNIFORM, FLOW, GEOM, [RX], tfm.times, D=D_of(2.0))
    (tp, vp), (tb, vb) = _describe(tfm), _describe(ta)
    ok = rel(tp, tb) <= 0.15 and rel(vp, vb) <= 0.15
    msg = f"peak time {tp:.3f} s vs {tb:.3f} s ({rel(tp, tb):.1%}), amplitude {vp:.4e} vs {vb:.4e} ({rel(vp, vb):.1%}); limit 15%"
    record("3", ok, msg)


# --- 4: truncation convergence ---------------------------------------------------------------

def test_criterion_4_eigenvalue_count_convergence(uniform_runs):
    ref = uniform_runs(0.1)
    e500 = normalized_rmse(ref, uniform_runs(0.1, (0, 5, 100)))
    e100 = normalized_rmse(ref, uniform_runs(0.1, (0, 2, 50)))
    msg = f"Q=500 NRMSE {e500:.4f} (<= 0.03), Q=100 NRMSE {e100:.4f} (> Q=500)"
    record("4", e500 <= 0.03 and e100 > e500, msg)


# --- 5: point release against particles ------------------------------------------------------

def test_criterion_5_point_release_matches_pbs():
    point = ReleaseProfile.point(0.5)
    obs = [CuboidObserver((0.5, math.pi / 2, 2.0), name="rx")]
    D = D_of(1e-2)
    t0 = time.perf_counter()
    tfm = ChannelModel.build(GEOM, (8, 15, 100)).run(point, obs, D, V0, CONFIG)
    cfg = PbsConfig(n_tx=1000, dt=5e-5, realizations=500)
    pbs = run_pbs(point, GEOM, D, FLOW, obs, 0.18, cfg, record_every=4)
    minutes = (time.perf_counter() - t0) / 60
    err = normalized_rmse(pbs, tfm)
    record("5", err <= 0.12 and minutes <= 15, f"Q={tfm.meta['Q']}, NRMSE {err:.4f} (<= 0.12), runtime {minutes:.1f} min (<= 15)")


# --- 6: structural and property checks ---------------------------------------------------------

def _check(fn, *args):
    try:
        fn(*args)
    except AssertionError as exc:
        return False, f"{fn.__name__}: {exc}".splitlines()[0]
    return True, fn.__name__


def _record_checks(key, checks):
    results = [_check(*c) for c in checks]
    ok = all(r[0] for r in results)
    record(key, ok, "; ".join(("ok " if r[0] else "FAILED ") + r[1] for r in results))


def test_criterion_6a_eigensystem_invariants():
    _record_checks("6a", [(test_eigensystem.test_bi_orthogonality,), (test_eigensystem.test_neumann_residual_and_spacing,)])


def test_criterion_6b_K_uni_quadrature():
    _record_checks("6b", [(test_flow_coupling.test_K_uni_matches_3d_quadrature, GEOM)])


def test_criterion_6c_superposition_equals_state_space():
    _record_checks("6c", [(test_dynamics.test_superposition_matches_state_space, ChannelModel.build(GEOM, (2, 3, 8)))])


def test_criterion_6d_zero_flow_reduction():
    _record_checks("6d", [(test_dynamics.test_zero_flow_matches_separable_diffusion_series, GEOM)])


def test_criterion_6e_mass_and_imaginary_residue(uniform_runs):
    # Closed-form mass of the modal state over the guard horizon in the
    # flow-dominant run, where no particle reaches z = 0 or z = Z0 yet.
    s = uniform_runs(1e-3)
    masses = np.array([s.meta["snapshots"][t] for t in MASS_TIMES])
    drift = float(np.abs(masses / masses[0] - 1).max())
    release = UNIFORM.mass(GEOM)
    resid = max(uniform_runs(a).meta["imag_residue"] for a in (1e-3, 0.1, 2.0))
    ok = drift <= 5e-3 and resid <= 1e-8
    msg = f"mass drift {drift:.2e} (<= 5e-3, initial {masses[0]:.6f} vs release {release:.6f}), imaginary residue {resid:.1e} (<= 1e-8)"
    record("6e", ok, msg)


def test_criterion_6f_pbs_statistics():
    samples = sample_initial(UNIFORM, 100_000, realization_rng(7, 0), GEOM)
    _record_checks("6f", [(test_pbs.test_variance_growth_pure_diffusion,), (test_pbs.test_uniform_radial_cdf, samples)])


# --- 7: documented limitation at very small dispersion ----------------------------------------

def test_criterion_7_flow_dominant_limit(uniform_runs):
    tfm = uniform_runs(1e-5)
    adv = baseline_series("flow-dominant", UNIFORM, FLOW, GEOM, [RX], tfm.times)
    (tp, vp), (ta, va) = _describe(tfm), _describe(adv)
    pre = normalized_rmse(adv, tfm, t_range=(0.0, ta / TAU))
    ok = rel(tp, ta) <= 0.10 and rel(vp, va) <= 0.10 and pre <= 0.10
    # post-peak ringing is expected and only reported
    after = tfm.values[0][tfm.times > ta / TAU]
    swing = float(-after.min() / vp) if after.size else 0.0
    crossings = int(np.count_nonzero(np.diff(np.sign(after)) != 0))
    msg = (
        f"peak {vp:.4e} at {tp:.3f} s vs advection {va:.4e} at {ta:.3f} s, pre-peak NRMSE {pre:.4f} (<= 0.10); "
        f"post-peak oscillation: undershoot {swing:.1%} of peak, {crossings} sign changes (reported only)"
    )
    record("7", ok, msg)
