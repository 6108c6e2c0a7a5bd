"""Dispersion factor, regime labels and the two limiting-regime baselines.

* Flow-dominant limit: diffusion is dropped and the release is carried along
  the streamlines, ``p(r, phi, z, t) = p_init(r, phi, z - v(r) t)``.
* Dispersive limit (Taylor-Aris): plug flow at ``v_eff = v0 / 2`` with the
  effective axial diffusivity ``D (1 + Pe^2 / 48)``, ``Pe = v_eff R0 / D``,
  and a concentration that is uniform over the cross-section.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CylinderGeometry, FlowField
from .modal_transform import ReleaseProfile, eval_release
from .quadrature import gauss_legendre
from .series import ConcentrationSeries

__all__ = [
    "FLOW_DOMINANT_MAX",
    "DISPERSIVE_MIN",
    "RegimeParams",
    "dispersion_factor",
    "classify",
    "diffusion_for_alpha",
    "taylor_aris_diffusivity",
    "flow_dominant_solution",
    "dispersive_solution",
    "baseline_series",
]

FLOW_DOMINANT_MAX = 0.05
DISPERSIVE_MIN = 1.0


def dispersion_factor(D, d, v0, R0) -> float:
    """``alpha = 2 D d / (v0 R0^2)``; any consistent unit system works."""
    if v0 == 0:
        raise ValueError("dispersion factor is undefined without flow (v0 = 0)")
    if not (v0 > 0 and R0 > 0):
        raise ValueError("need v0 > 0 and R0 > 0")
    return 2.0 * D * d / (v0 * R0**2)


def diffusion_for_alpha(alpha, d, v0, R0) -> float:
    """Inverse of :func:`dispersion_factor` in ``D``."""
    return alpha * v0 * R0**2 / (2.0 * d)


def classify(alpha: float) -> str:
    if alpha < FLOW_DOMINANT_MAX:
        return "flow-dominant"
    if alpha > DISPERSIVE_MIN:
        return "dispersive"
    return "mixed"


@dataclass(frozen=True)
class RegimeParams:
    d: float
    alpha: float
    label: str

    @classmethod
    def from_params(cls, D, d, v0, R0):
        a = dispersion_factor(D, d, v0, R0)
        return cls(d, a, classify(a))


def taylor_aris_diffusivity(D, v_eff, R0):
    """``(D_eff, Pe)`` of the Taylor-Aris approximation."""
    if D <= 0:
        raise ValueError("Taylor-Aris dispersion needs D > 0")
    pe = v_eff * R0 / D
    return D * (1.0 + pe**2 / 48.0), pe


def flow_dominant_solution(profile: ReleaseProfile, flow: FlowField, x, t):
    """Pure advection along streamlines: ``p_init(r, phi, z - v(r) t)``.

    Points whose characteristic starts outside the cylinder receive zero, as
    the release never reaches them.
    """
    x = np.array(x, dtype=float)
    src = x.copy()
    src[..., 2] = x[..., 2] - flow.velocity(x[..., 0]) * t
    vals = np.zeros(src.shape[:-1])
    ok = src[..., 2] >= 0
    vals[ok] = eval_release(profile, src[ok])
    return vals if vals.ndim else float(vals)


def _gauss(u, var):
    return np.exp(-(u**2) / (2 * var)) / np.sqrt(2 * math.pi * var)


def dispersive_solution(profile: ReleaseProfile, flow: FlowField, D, geometry: CylinderGeometry, x, t, boundary="absorbing"):
    """Taylor-Aris plug-flow concentration at points ``x`` and time ``t``.

    The axial marginal of the release is convolved with a Gaussian of
    variance ``2 D_eff t`` drifting at ``v_eff``. ``boundary="absorbing"``
    adds the image term that keeps ``p(z = 0) = 0`` like the full model;
    ``"free"`` is the unbounded-line kernel.
    """
    if boundary not in ("absorbing", "free"):
        raise ValueError(f"unknown boundary {boundary!r}")
    x = np.asarray(x, dtype=float)
    z = x[..., 2]
    scale = profile.amplitude * profile.cross_section_fraction(geometry)
    if t <= 0:
        return scale * profile.axial(z) if np.ndim(z) else float(scale * profile.axial(z))
    v = flow.v_eff
    D_eff, _ = taylor_aris_diffusivity(D, v, geometry.R0)
    var = 2.0 * D_eff * t
    zf = np.atleast_1d(z).ravel()

    def kernel(zeta):
        g = _gauss(zf[None, :] - zeta[:, None] - v * t, var)
        if boundary == "absorbing":
            g = g - np.exp(-v * zeta / D_eff)[:, None] * _gauss(zf[None, :] + zeta[:, None] - v * t, var)
        return g * profile.axial(zeta)[:, None]

    lo, hi = profile.z_support
    # absolute floor from the largest value the free kernel can reach, so
    # that points where the image cancels the direct term still converge
    floor = 1e-13 * (hi - lo) / math.sqrt(2 * math.pi * var)
    val = scale * gauss_legendre(kernel, lo, hi, n0=32, rtol=1e-10, atol=floor, label="Taylor-Aris convolution")
    val = val.reshape(np.shape(z))
    return val if val.ndim else float(val)


def baseline_series(kind, profile, flow, geometry, observers, times, D=None, boundary="absorbing") -> ConcentrationSeries:
    """Baseline cube series ``V_cube * p(x_RX, t)`` in the TFM series format.

    ``kind`` is ``"flow-dominant"`` or ``"dispersive"``; both are evaluated
    at the observer centers.
    """
    observers = list(observers)
    times = np.asarray(times, dtype=float)
    vals = np.empty((len(observers), len(times)))
    for i, obs in enumerate(observers):
        c = np.asarray(obs.center, dtype=float)
        for j, t in enumerate(times):
            if kind == "flow-dominant":
                p = flow_dominant_solution(profile, flow, c, t)
            elif kind == "dispersive":
                p = dispersive_solution(profile, flow, D, geometry, c, t, boundary=boundary)
            else:
                raise ValueError(f"unknown baseline {kind!r}")
            vals[i, j] = obs.volume * p
    meta = {"baseline": kind}
    if kind == "dispersive":
        meta.update(boundary=boundary, convolved_with="axial release marginal")
    return ConcentrationSeries(times, vals, tuple(o.name for o in observers), source=kind, meta=meta)
