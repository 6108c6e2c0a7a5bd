"""Particle-based Brownian-dynamics reference simulation.

Particles drift with the Poiseuille velocity and take Gaussian steps of
standard deviation ``sqrt(2 D dt)`` per Cartesian axis (Euler-Maruyama). The
radial wall reflects specularly; the end caps at ``z = 0`` and ``z = Z0``
absorb. The receiver counts particles inside an axis-aligned cube.

Randomness is reproducible per realization: realization ``i`` draws from a
Philox stream keyed by ``(seed, i)`` in a fixed layout, so results do not
depend on how realizations are batched.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CylinderGeometry, FlowField
from .modal_transform import CuboidObserver, ReleaseProfile, eval_release
from .series import ConcentrationSeries

__all__ = [
    "PbsConfig",
    "ParticleState",
    "SamplingError",
    "realization_rng",
    "sample_initial",
    "step",
    "reflect_and_absorb",
    "observe",
    "run_pbs",
]

log = logging.getLogger(__name__)

# Steps of noise drawn per RNG call; part of the stream layout.
NOISE_BLOCK = 64


class SamplingError(RuntimeError):
    """Rejection sampling accepted too few proposals."""


@dataclass(frozen=True)
class PbsConfig:
    """Particle simulation settings (normalized ``dt``).

    The defaults are the reduced desk-scale setting: 500 realizations of
    1000 particles with ``dt = 1e-4`` (0.01 s for ``tau = 100 s``).
    """

    n_tx: int = 1000
    dt: float = 1e-4
    realizations: int = 500
    seed: int = 2021
    batch: int = 50

    def __post_init__(self):
        if not self.dt > 0 or self.realizations < 1 or self.n_tx < 1:
            raise ValueError("PbsConfig needs dt > 0, realizations >= 1, n_tx >= 1")


@dataclass
class ParticleState:
    xyz: np.ndarray
    alive: np.ndarray

    @classmethod
    def from_positions(cls, xyz):
        xyz = np.array(xyz, dtype=float, ndmin=2)
        return cls(xyz, np.ones(len(xyz), dtype=bool))

    @property
    def count(self) -> int:
        return int(self.alive.sum())


def realization_rng(seed: int, realization: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, realization])))


def _proposal_box(profile: ReleaseProfile, geometry: CylinderGeometry):
    zlo, zhi = profile.z_support
    if profile.kind == "uniform":
        R0 = geometry.R0
        return np.array([-R0, -R0, zlo]), np.array([R0, R0, zhi])
    rlo, rhi = profile.r_support
    half = 0.5 * profile.phi0
    phis = [profile.phi_e - half, profile.phi_e + half]
    # extremes of an annular sector sit at its corners or where it crosses an axis
    for c in np.arange(-4, 5) * (math.pi / 2):
        if profile.phi_e - half <= c <= profile.phi_e + half:
            phis.append(c)
    pts = [(r * math.cos(p), r * math.sin(p)) for r in (rlo, rhi) for p in phis]
    pts = np.array(pts)
    lo = np.append(pts.min(axis=0), zlo)
    hi = np.append(pts.max(axis=0), zhi)
    return lo, hi


def sample_initial(profile: ReleaseProfile, count: int, rng: np.random.Generator, geometry: CylinderGeometry, min_acceptance=1e-3):
    """Draw ``count`` Cartesian positions distributed proportionally to ``p_init``.

    Proposals are uniform in a Cartesian box around the support, so accepted
    points respect the cylindrical volume element automatically.
    """
    lo, hi = _proposal_box(profile, geometry)
    peak = profile.amplitude if profile.amplitude > 0 else 1.0
    out = np.empty((count, 3))
    filled = proposed = 0
    batch = max(2 * count, 1024)
    while filled < count:
        cand = lo + (hi - lo) * rng.random((batch, 3))
        r = np.hypot(cand[:, 0], cand[:, 1])
        phi = np.arctan2(cand[:, 1], cand[:, 0])
        dens = np.where(r <= geometry.R0, eval_release(profile, np.stack([r, phi, cand[:, 2]], axis=-1)), 0.0)
        keep = cand[rng.random(batch) * peak < dens]
        proposed += batch
        take = min(len(keep), count - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
        if proposed >= 100 * batch and filled / proposed < min_acceptance:
            raise SamplingError(
                f"acceptance rate {filled / proposed:.2e} below {min_acceptance:g} "
                f"(box {lo} .. {hi}, {profile.kind} release)"
            )
    return out


def reflect_and_absorb(state: ParticleState, geometry: CylinderGeometry) -> ParticleState:
    """Mirror particles beyond the wall back inside; kill those past the end caps.

    The signed radial coordinate is reflected at ``+-R0`` until it lies inside
    (``r -> 2 R0 - r``, angle unchanged). Dead particles keep ``nan``
    positions, so every later comparison on them is false.
    """
    xyz, alive = state.xyz, state.alive
    R0 = geometry.R0
    r2 = xyz[:, 0] * xyz[:, 0] + xyz[:, 1] * xyz[:, 1]
    out = np.flatnonzero(r2 > R0 * R0)
    if out.size:
        r = np.sqrt(r2[out])
        s = r.copy()
        for _ in range(64):
            hi = s > R0
            lo = s < -R0
            if not (hi.any() or lo.any()):
                break
            s = np.where(hi, 2 * R0 - s, np.where(lo, -2 * R0 - s, s))
        scale = s / r
        xyz[out, 0] *= scale
        xyz[out, 1] *= scale
    z = xyz[:, 2]
    dead = np.flatnonzero((z < 0) | (z > geometry.Z0))
    if dead.size:
        alive[dead] = False
        xyz[dead] = np.nan
    return state


def step(state: ParticleState, dt: float, D: float, flow: FlowField, geometry: CylinderGeometry, noise) -> ParticleState:
    """Advance all alive particles by one Euler-Maruyama step.

    ``noise`` is either a ``numpy.random.Generator`` or an ``(n, 3)`` array of
    standard normal draws. Dead particles sit at ``nan`` and stay there.
    """
    xyz = state.xyz
    if isinstance(noise, np.random.Generator):
        noise = noise.standard_normal(xyz.shape)
    drift = flow.v0 * dt * (1.0 - (xyz[:, 0] * xyz[:, 0] + xyz[:, 1] * xyz[:, 1]) / flow.R0**2)
    xyz += math.sqrt(2.0 * D * dt) * noise
    xyz[:, 2] += drift
    return reflect_and_absorb(state, geometry)


def observe(state: ParticleState, observer: CuboidObserver, weight: float) -> float:
    """Concentration estimate ``weight * count / V_cube`` for one realization."""
    inside = observer.contains(state.xyz[state.alive])
    return weight * int(inside.sum()) / observer.volume


def _count(xyz, observers):
    # dead particles are nan and never fall inside a cube
    return np.array([np.count_nonzero(obs.contains(xyz)) for obs in observers], dtype=np.int64)


def run_pbs(profile: ReleaseProfile, geometry: CylinderGeometry, D: float, flow: FlowField, observers, t_end: float, config: PbsConfig = PbsConfig(), record_every: int = 1):
    """Run all realizations and return the averaged cube series.

    The returned values are ``w * mean count``, i.e. ``V_cube`` times the
    concentration estimate, with particle weight ``w = mass / n_tx``.
    Integer counts are summed across realizations, so the reduction is exact
    and independent of batching.
    """
    profile.validate(geometry)
    observers = list(observers)
    for obs in observers:
        obs.validate(geometry)
    n_steps = int(round(t_end / config.dt))
    rec = np.arange(0, n_steps + 1, record_every)
    counts = np.zeros((len(observers), len(rec)), dtype=np.int64)
    alive_counts = np.zeros(len(rec), dtype=np.int64)
    n = config.n_tx
    for first in range(0, config.realizations, config.batch):
        ids = range(first, min(first + config.batch, config.realizations))
        rngs = [realization_rng(config.seed, i) for i in ids]
        xyz = np.concatenate([sample_initial(profile, n, g, geometry) for g in rngs])
        state = ParticleState(xyz, np.ones(len(xyz), dtype=bool))
        noise = None
        ri = 0
        for k in range(n_steps + 1):
            if k > 0:
                j = (k - 1) % NOISE_BLOCK
                if j == 0:
                    noise = np.concatenate([g.standard_normal((NOISE_BLOCK, n, 3)) for g in rngs], axis=1)
                step(state, config.dt, D, flow, geometry, noise[j])
            if ri < len(rec) and rec[ri] == k:
                counts[:, ri] += _count(state.xyz, observers)
                alive_counts[ri] += state.count
                ri += 1
        log.debug("PBS realizations %d..%d done", ids.start, ids.stop - 1)
    weight = profile.mass(geometry) / n
    values = weight * counts / config.realizations
    series = ConcentrationSeries(
        rec * config.dt,
        values,
        tuple(o.name for o in observers),
        source="pbs",
        meta={"n_tx": n, "realizations": config.realizations, "dt": config.dt, "seed": config.seed, "weight": weight},
    )
    series.meta["counts"] = counts
    series.meta["alive"] = alive_counts
    return series
