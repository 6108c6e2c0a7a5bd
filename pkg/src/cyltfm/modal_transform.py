"""Release profiles, forward transform and concentration reconstruction.

A modal state ``y`` is a complex vector with one entry per mode of the
:class:`~cyltfm.eigensystem.ModeTable`. The forward transform projects a
concentration onto the adjoint eigenfunctions, the output equation sums the
primal eigenfunctions weighted by ``1/N_mu``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .eigensystem import EigenSystem, eval_eigvec_K1
from .geometry import CylinderGeometry, inside_cylinder, to_cartesian
from .quadrature import gauss_legendre

__all__ = [
    "ImaginaryResidueError",
    "ReleaseProfile",
    "SourceSpec",
    "CuboidObserver",
    "raised_cosine",
    "eval_release",
    "transform_initial",
    "transform_source",
    "output_c1",
    "observation_weights",
    "concentration_at",
    "cube_concentration",
    "reconstruct",
    "reconstruct_grid",
    "snapshot_yz",
    "modal_mass",
]

QUAD_RTOL = 1e-10


class ImaginaryResidueError(ArithmeticError):
    """The reconstructed concentration carries a non-negligible imaginary part."""


def raised_cosine(chi, chi0, chi_e):
    """``0.5 (1 + cos(2 pi (chi - chi_e) / chi0))`` on its support, else 0."""
    chi = np.asarray(chi, dtype=float)
    d = chi - chi_e
    inside = np.abs(d) <= 0.5 * chi0
    return np.where(inside, 0.5 * (1.0 + np.cos(2 * np.pi * d / chi0)), 0.0)


def _wrap(angle):
    return (np.asarray(angle) + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class ReleaseProfile:
    """Raised-cosine initial distribution.

    ``uniform`` releases are constant over the cross-section and shaped only
    along ``z``. ``point`` releases are a product of raised cosines in ``r``,
    ``phi`` and ``z``. Profiles are unnormalized: the peak equals
    ``amplitude``.
    """

    kind: str = "uniform"
    z0: float = 0.3
    z_e: float = 1.0
    r0: float | None = None
    r_e: float | None = None
    phi0: float | None = None
    phi_e: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "point"):
            raise ValueError(f"unknown release kind {self.kind!r}")
        if not self.z0 > 0 or self.amplitude < 0:
            raise ValueError("release width must be positive and amplitude >= 0")
        if self.kind == "point":
            if None in (self.r0, self.r_e, self.phi0, self.phi_e):
                raise ValueError("point release needs r0, r_e, phi0 and phi_e")
            if not (self.r0 > 0 and 0 < self.phi0 <= 2 * math.pi):
                raise ValueError("point release widths must be positive")

    @classmethod
    def uniform(cls, z0=0.3, z_e=1.0, amplitude=1.0):
        return cls("uniform", z0=z0, z_e=z_e, amplitude=amplitude)

    @classmethod
    def point(cls, r_e, r0=0.4, phi0=math.pi / 4, phi_e=math.pi / 2, z0=0.4, z_e=1.0, amplitude=1.0):
        return cls("point", z0=z0, z_e=z_e, r0=r0, r_e=r_e, phi0=phi0, phi_e=phi_e, amplitude=amplitude)

    @property
    def z_support(self):
        return self.z_e - 0.5 * self.z0, self.z_e + 0.5 * self.z0

    @property
    def r_support(self):
        if self.kind == "uniform":
            return None
        return self.r_e - 0.5 * self.r0, self.r_e + 0.5 * self.r0

    def validate(self, geometry: CylinderGeometry):
        """Raise ``ValueError`` if the support leaves the cylinder."""
        lo, hi = self.z_support
        if lo < 0 or hi > geometry.Z0:
            raise ValueError(f"release z-support [{lo:g}, {hi:g}] outside [0, {geometry.Z0:g}]")
        if self.kind == "point":
            lo, hi = self.r_support
            if lo < 0 or hi > geometry.R0:
                raise ValueError(f"release r-support [{lo:g}, {hi:g}] outside [0, {geometry.R0:g}]")

    def mass(self, geometry: CylinderGeometry) -> float:
        """Total amount ``int_V p_init dV`` (closed form)."""
        axial = 0.5 * self.z0
        if self.kind == "uniform":
            return self.amplitude * math.pi * geometry.R0**2 * axial
        return self.amplitude * (self.r_e * 0.5 * self.r0) * (0.5 * self.phi0) * axial

    def cross_section_fraction(self, geometry: CylinderGeometry) -> float:
        """Cross-sectional mean of the ``r``-``phi`` factor."""
        if self.kind == "uniform":
            return 1.0
        return (self.r_e * 0.5 * self.r0) * (0.5 * self.phi0) / (math.pi * geometry.R0**2)

    def axial(self, z):
        return raised_cosine(z, self.z0, self.z_e)


def eval_release(profile: ReleaseProfile, x):
    """Evaluate the release profile at cylindrical points ``x = (r, phi, z)``."""
    x = np.asarray(x, dtype=float)
    val = profile.amplitude * profile.axial(x[..., 2])
    if profile.kind == "point":
        val = val * raised_cosine(x[..., 0], profile.r0, profile.r_e)
        val = val * raised_cosine(_wrap(x[..., 1] - profile.phi_e), profile.phi0, 0.0)
    return val


@dataclass(frozen=True)
class SourceSpec:
    """Separable injection ``f_s(x, t) = f_t(t) f_x(x)``.

    ``waveform`` holds the discrete input sequence ``f_t[k]`` fed to the state
    recursion; use :meth:`from_function` to sample a continuous pulse.
    """

    profile: ReleaseProfile
    waveform: np.ndarray

    @classmethod
    def from_function(cls, profile, f_t, T, steps):
        k = np.arange(steps)
        return cls(profile, T * np.asarray([f_t(kk * T) for kk in k], dtype=float))


def _axial_factors(profile, wavenumbers):
    lo, hi = profile.z_support
    return gauss_legendre(
        lambda z: np.sin(np.outer(z, wavenumbers)) * profile.axial(z)[:, None],
        lo,
        hi,
        n0=max(32, 2 * len(wavenumbers)),
        rtol=QUAD_RTOL,
        label="axial release transform",
    )


def _radial_factors(profile, es: EigenSystem):
    """Radial integrals ``int J_n(k r) f(r) r dr`` for all stored orders, shape (N+1, M)."""
    R0 = es.geometry.R0
    N, M = es.roots.shape[0] - 1, es.roots.shape[1]
    if profile.kind == "uniform":
        out = np.zeros((N + 1, M))
        out[0, 0] = 0.5 * R0**2  # Neumann roots k > 0 integrate to exactly zero
        return out
    lo, hi = profile.r_support
    out = np.empty((N + 1, M))
    for n in range(N + 1):
        k = es.roots[n]
        out[n] = gauss_legendre(
            lambda r: special.jv(n, np.outer(r, k)) * (raised_cosine(r, profile.r0, profile.r_e) * r)[:, None],
            lo,
            hi,
            n0=max(32, 2 * M),
            rtol=QUAD_RTOL,
            label=f"radial release transform n={n}",
        )
    return out


def _azimuthal_factors(profile, orders):
    orders = np.asarray(orders)
    if profile.kind == "uniform":
        return np.where(orders == 0, 2 * math.pi, 0.0).astype(complex)
    half = 0.5 * profile.phi0
    base = gauss_legendre(
        lambda u: np.exp(-1j * np.outer(u, orders)) * raised_cosine(u, profile.phi0, 0.0)[:, None],
        -half,
        half,
        n0=max(32, 2 * int(np.abs(orders).max(initial=0))),
        rtol=QUAD_RTOL,
        label="azimuthal release transform",
    )
    return np.exp(-1j * orders * profile.phi_e) * base


def transform_initial(profile: ReleaseProfile, es: EigenSystem) -> np.ndarray:
    """Forward transform ``y_init[mu] = int_V conj(K4~(x, mu)) p_init(x) dV``.

    Both the profile and the eigenfunctions separate in ``(r, phi, z)``, so
    every entry is a product of three one-dimensional integrals.
    """
    profile.validate(es.geometry)
    t = es.table
    radial = _radial_factors(profile, es)
    sign = np.where((t.n < 0) & (np.abs(t.n) % 2 == 1), -1.0, 1.0)
    orders = np.array(t.orders)
    azim = _azimuthal_factors(profile, orders)
    axial = _axial_factors(profile, es.wavenumbers)
    block = np.repeat(np.arange(len(orders)), t.block_size)
    y = profile.amplitude * sign * radial[np.abs(t.n), t.m] * azim[block] * axial[t.nu - 1]
    return y.astype(complex)


def transform_source(spec: SourceSpec, es: EigenSystem):
    """Return the spatial modal vector of the source and its discrete waveform."""
    return transform_initial(spec.profile, es), np.asarray(spec.waveform, dtype=float)


def output_c1(x, es: EigenSystem) -> np.ndarray:
    """Output vector with entries ``K1(x, mu) / N_mu``."""
    return eval_eigvec_K1(es, x) / es.N_mu


def _fold_factor(es: EigenSystem) -> np.ndarray:
    if es.table.folded:
        return np.where(es.table.n > 0, 2.0, 1.0)
    return np.ones(es.size)


def observation_weights(x, es: EigenSystem) -> np.ndarray:
    """Weights ``w`` with ``p(x) = Re(w @ y)``.

    For folded tables the entries of orders ``n >= 1`` are doubled: the
    stored order and its mirror ``-n`` contribute complex-conjugate terms.
    """
    return output_c1(x, es) * _fold_factor(es)


def _residue_part(w, y, es: EigenSystem):
    if es.table.folded:
        mask = es.table.n == 0
        return np.tensordot(w[..., mask], y[mask], axes=(-1, 0)).imag
    return np.tensordot(w, y, axes=(-1, 0)).imag


def concentration_at(x, y, es: EigenSystem, rtol=1e-8):
    """Concentration ``Re(c1^T(x) y)`` at one or more points.

    Raises :class:`ImaginaryResidueError` if the imaginary part exceeds
    ``rtol`` times the magnitude of the summed terms.
    """
    y = np.asarray(y)
    w = observation_weights(x, es)
    val = np.tensordot(w, y, axes=(-1, 0))
    resid = np.abs(_residue_part(w, y, es))
    scale = np.tensordot(np.abs(w), np.abs(y), axes=(-1, 0))
    if np.any(resid > rtol * np.maximum(scale, np.finfo(float).tiny)):
        raise ImaginaryResidueError(
            f"imaginary residue {np.max(resid):.3e} exceeds {rtol:g} x term magnitude"
        )
    return val.real


@dataclass(frozen=True)
class CuboidObserver:
    """Axis-aligned cube receiver centred at ``center = (r, phi, z)``."""

    center: tuple
    edge: float = 0.04
    name: str = "rx"

    @property
    def volume(self) -> float:
        return self.edge**3

    @property
    def center_cartesian(self) -> np.ndarray:
        return to_cartesian(np.asarray(self.center, dtype=float))

    def validate(self, geometry: CylinderGeometry):
        if not self.edge > 0:
            raise ValueError("observer edge must be positive")
        xc, yc, zc = self.center_cartesian
        h = 0.5 * self.edge
        corner = math.hypot(abs(xc) + h, abs(yc) + h)
        if corner > geometry.R0 or zc - h < 0 or zc + h > geometry.Z0:
            raise ValueError(f"observer {self.name!r} cube is not inside the cylinder")

    def contains(self, xyz) -> np.ndarray:
        """Boolean mask of Cartesian points inside the cube."""
        d = np.abs(np.asarray(xyz) - self.center_cartesian)
        return np.all(d <= 0.5 * self.edge, axis=-1)


def cube_concentration(observer: CuboidObserver, y, es: EigenSystem):
    """``V_cube * p(x_RX)`` under the uniform-concentration assumption."""
    return observer.volume * concentration_at(np.asarray(observer.center, float), y, es)


def reconstruct(x, y, es: EigenSystem):
    """Real concentration at points ``x`` without the residue check."""
    return np.tensordot(observation_weights(x, es), np.asarray(y), axes=(-1, 0)).real


def reconstruct_grid(es: EigenSystem, y, r, phi, z) -> np.ndarray:
    """Concentration on the tensor grid ``r x z`` at fixed angle ``phi``.

    Evaluated order by order through the separable structure, so memory stays
    ``O(len(r) M + len(z) L)`` per order instead of ``O(points x Q)``.
    """
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    t = es.table
    y = np.asarray(y)
    zs = np.sin(np.outer(z, es.wavenumbers))  # (Pz, L)
    out = np.zeros((len(r), len(z)))
    fold = _fold_factor(es)
    for b, n in enumerate(t.orders):
        sl = t.block_slice(b)
        coef = (y[sl] / es.N_mu[sl]).reshape(t.M, t.L)
        radial = special.jv(n, np.outer(r, es.roots[abs(n)]))  # (Pr, M)
        part = radial @ coef @ zs.T
        out += fold[sl][0] * (np.exp(1j * n * phi) * part).real
    return out


def snapshot_yz(es: EigenSystem, y, ygrid, zgrid) -> np.ndarray:
    """Concentration in the plane through the axis at ``phi = +-pi/2``.

    Rows follow ``ygrid`` (``y = r sin(pi/2)``), columns follow ``zgrid``.
    """
    ygrid = np.asarray(ygrid, dtype=float)
    out = np.empty((len(ygrid), len(zgrid)))
    pos = ygrid >= 0
    if pos.any():
        out[pos] = reconstruct_grid(es, y, ygrid[pos], math.pi / 2, zgrid)
    if (~pos).any():
        out[~pos] = reconstruct_grid(es, y, -ygrid[~pos], -math.pi / 2, zgrid)
    return out


def modal_mass(es: EigenSystem, y) -> float:
    """``int_V p dV`` of the reconstruction, evaluated in closed form per mode."""
    t = es.table
    R0, Z0 = es.geometry.R0, es.geometry.Z0
    sel = t.n == 0
    k = es.k[sel]
    lam = es.lam[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        radial = np.where(k == 0, 0.5 * R0**2, R0 * special.j1(k * R0) / np.where(k == 0, 1, k))
    axial = (1 - np.cos(lam * Z0)) / lam
    coef = np.asarray(y)[sel] / es.N_mu[sel]
    return float(np.real(np.sum(coef * 2 * math.pi * radial * axial)))
