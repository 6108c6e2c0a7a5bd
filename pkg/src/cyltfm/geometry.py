"""Physical parameters of the duct, the medium and the laminar flow.

All solver code works in normalized units: lengths are divided by a
reference length ``rho`` and times by a reference time ``tau``.
:class:`UnitSystem` converts between the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CylinderGeometry",
    "UnitSystem",
    "MediumParams",
    "FlowField",
    "TABLE_I",
    "to_cartesian",
    "inside_cylinder",
]

# Physical parameters of the reference duct (SI units).
TABLE_I = {
    "R0": 100e-6,
    "Z0": 1e-3,
    "v0": 50e-6,
    "d": 100e-6,
    "D_min": 2.5e-12,
    "D_max": 5e-9,
    "rho": 100e-6,
    "tau": 1e2,
}


def _require_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class CylinderGeometry:
    """Normalized cylinder of radius ``R0`` and length ``Z0``."""

    R0: float = 1.0
    Z0: float = 10.0

    def __post_init__(self):
        _require_positive("R0", self.R0)
        _require_positive("Z0", self.Z0)

    @property
    def volume(self) -> float:
        return math.pi * self.R0**2 * self.Z0


@dataclass(frozen=True)
class UnitSystem:
    """Reference length ``rho`` (m) and reference time ``tau`` (s)."""

    rho: float = TABLE_I["rho"]
    tau: float = TABLE_I["tau"]

    def __post_init__(self):
        _require_positive("rho", self.rho)
        _require_positive("tau", self.tau)

    def length(self, meters):
        return meters / self.rho

    def length_si(self, value):
        return value * self.rho

    def time(self, seconds):
        return seconds / self.tau

    def time_si(self, value):
        return value * self.tau

    def velocity(self, m_per_s):
        return m_per_s * self.tau / self.rho

    def velocity_si(self, value):
        return value * self.rho / self.tau

    def diffusivity(self, m2_per_s):
        return m2_per_s * self.tau / self.rho**2

    def diffusivity_si(self, value):
        return value * self.rho**2 / self.tau


@dataclass(frozen=True)
class MediumParams:
    """Normalized diffusion coefficient."""

    D: float

    def __post_init__(self):
        if not (math.isfinite(self.D) and self.D >= 0):
            raise ValueError(f"D must be finite and >= 0, got {self.D!r}")


@dataclass(frozen=True)
class FlowField:
    """Poiseuille profile ``v(r) = v0 (1 - r^2/R0^2)`` along the axis."""

    v0: float
    R0: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.v0):
            raise ValueError(f"v0 must be finite, got {self.v0!r}")
        _require_positive("R0", self.R0)

    @property
    def v_eff(self) -> float:
        """Cross-sectional mean velocity."""
        return 0.5 * self.v0

    def velocity(self, r):
        r = np.asarray(r, dtype=float)
        return self.v0 * (1.0 - (r / self.R0) ** 2)


def to_cartesian(x):
    """Convert ``(r, phi, z)`` (last axis) to Cartesian ``(x, y, z)``."""
    x = np.asarray(x, dtype=float)
    r, phi, z = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def inside_cylinder(x, geometry: CylinderGeometry, tol: float = 1e-12) -> np.ndarray:
    """Boolean mask of cylindrical points inside the closed cylinder."""
    x = np.asarray(x, dtype=float)
    r, z = x[..., 0], x[..., 2]
    scale_r = tol * geometry.R0
    scale_z = tol * geometry.Z0
    return (
        np.isfinite(x).all(axis=-1)
        & (r >= -scale_r)
        & (r <= geometry.R0 + scale_r)
        & (z >= -scale_z)
        & (z <= geometry.Z0 + scale_z)
    )
