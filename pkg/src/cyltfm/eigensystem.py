"""Bessel roots, axial wavenumbers, eigenvalues and eigenfunctions.

Modes are indexed by triples ``(n, m, nu)``: Bessel order ``n``, radial root
index ``m`` (0-based) and axial index ``nu`` (1-based, ``nu = 0`` carries no
content because ``sin(0 z)`` vanishes). Within a :class:`ModeTable` the linear
index runs order-major, then ``m``, then ``nu``, so every Bessel order owns a
contiguous block of ``M * L`` states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, special

from .geometry import CylinderGeometry, inside_cylinder

__all__ = [
    "RootFindingError",
    "ModeTable",
    "EigenSystem",
    "bessel",
    "bessel_deriv",
    "compute_roots",
    "compute_wavenumbers",
    "compute_eigenvalues",
    "compute_scalings",
    "build_eigensystem",
    "eval_eigvec_K1",
    "eval_adjoint_K3",
    "eval_adjoint_K4",
]

_SCAN_STEP = math.pi / 4


class RootFindingError(RuntimeError):
    """A requested Bessel-derivative root could not be bracketed."""

    def __init__(self, n, m, ceiling):
        super().__init__(
            f"could not bracket root m={m} of J_{n}' below x={ceiling:.6g}"
        )
        self.n = n
        self.m = m
        self.ceiling = ceiling


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("Bessel argument must be finite")
    return x


def bessel(n, x):
    """Bessel function of the first kind ``J_n(x)`` for integer ``n``."""
    return special.jv(n, _check_finite(x))


def bessel_deriv(n, x):
    """Derivative ``J_n'(x)``."""
    return special.jvp(n, _check_finite(x))


def _derivative_roots(n: int, count: int) -> np.ndarray:
    """First ``count`` strictly positive zeros of ``J_n'``."""
    if count <= 0:
        return np.empty(0)
    # J_n' keeps one sign on (0, j'_{n,1}) and j'_{n,1} > n.
    start = max(0.5 * _SCAN_STEP, n - 1.0)
    ceiling = n + (count + 2) * math.pi + 2.0 * n ** (1.0 / 3.0) + 5.0
    grid = np.arange(start, ceiling + _SCAN_STEP, _SCAN_STEP)
    vals = special.jvp(n, grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            if a > 0 and (not roots or a > roots[-1]):
                roots.append(a)
        elif fa * fb < 0:
            roots.append(
                optimize.brentq(
                    lambda x: special.jvp(n, x),
                    a,
                    b,
                    xtol=1e-13 * max(1.0, b),
                    rtol=4 * np.finfo(float).eps,
                    maxiter=200,
                )
            )
        if len(roots) == count:
            return np.array(roots)
    raise RootFindingError(n, len(roots), ceiling)


def compute_roots(N: int, M: int, R0: float) -> np.ndarray:
    """Radial roots ``k[n, m]`` with ``J_n'(k R0) = 0``, shape ``(N + 1, M)``.

    Order 0 starts with the root ``k = 0`` (the constant radial mode). Higher
    orders hold strictly positive roots only, since ``J_n(0 r)`` vanishes
    identically for ``n >= 1``.
    """
    if N < 0 or M < 1:
        raise ValueError(f"need N >= 0 and M >= 1, got N={N}, M={M}")
    if not R0 > 0:
        raise ValueError("R0 must be positive")
    k = np.empty((N + 1, M))
    for n in range(N + 1):
        if n == 0:
            x = np.concatenate([[0.0], _derivative_roots(0, M - 1)])
        else:
            x = _derivative_roots(n, M)
        k[n] = x / R0
    return k


def compute_wavenumbers(L: int, Z0: float) -> np.ndarray:
    """Axial wavenumbers ``nu * pi / Z0`` for ``nu = 1..L``."""
    if L < 1:
        raise ValueError(f"need L >= 1, got {L}")
    return np.arange(1, L + 1) * math.pi / Z0


@dataclass(frozen=True)
class ModeTable:
    """Truncation ``q = [N, M, L]`` and the index map ``mu <-> (n, m, nu)``.

    With ``folded=True`` only orders ``n >= 0`` are stored; the negative
    orders are recovered from ``J_{-n} = (-1)^n J_n`` when reconstructing.
    """

    N: int
    M: int
    L: int
    folded: bool = True

    def __post_init__(self):
        if self.N < 0 or self.M < 1 or self.L < 1:
            raise ValueError(f"invalid truncation N={self.N}, M={self.M}, L={self.L}")

    @property
    def orders(self) -> tuple:
        if self.folded:
            return tuple(range(self.N + 1))
        return tuple(range(-self.N, self.N + 1))

    @property
    def block_size(self) -> int:
        return self.M * self.L

    @property
    def size(self) -> int:
        return len(self.orders) * self.block_size

    @cached_property
    def n(self) -> np.ndarray:
        return np.repeat(np.array(self.orders), self.block_size)

    @cached_property
    def m(self) -> np.ndarray:
        return np.tile(np.repeat(np.arange(self.M), self.L), len(self.orders))

    @cached_property
    def nu(self) -> np.ndarray:
        return np.tile(np.arange(1, self.L + 1), len(self.orders) * self.M)

    def index(self, n: int, m: int, nu: int) -> int:
        if not (0 <= m < self.M and 1 <= nu <= self.L):
            raise IndexError(f"mode ({n}, {m}, {nu}) outside table")
        try:
            b = self.orders.index(n)
        except ValueError:
            raise IndexError(f"order {n} not in table") from None
        return b * self.block_size + m * self.L + (nu - 1)

    def triple(self, mu: int) -> tuple:
        return int(self.n[mu]), int(self.m[mu]), int(self.nu[mu])

    def block_slice(self, b: int) -> slice:
        return slice(b * self.block_size, (b + 1) * self.block_size)


def compute_eigenvalues(D, table: ModeTable, roots, wavenumbers) -> np.ndarray:
    """``s_mu = -D (k_{n,m}^2 + lambda_nu^2)`` for every mode of the table."""
    k = roots[np.abs(table.n), table.m]
    lam = wavenumbers[table.nu - 1]
    return -D * (k**2 + lam**2)


def compute_scalings(table: ModeTable, geometry: CylinderGeometry, roots, wavenumbers):
    """Return ``(N_r, N_phi, N_z)`` arrays; their product is ``N_mu``."""
    R0, Z0 = geometry.R0, geometry.Z0
    n = np.abs(table.n)
    k = roots[n, table.m]
    lam = wavenumbers[table.nu - 1]
    assert np.all(lam != 0), "nu = 0 must never enter the mode table"
    with np.errstate(divide="ignore", invalid="ignore"):
        n_r = np.where(
            k == 0,
            0.5 * R0**2,
            0.5 * R0**2 / k**2 * (k**2 - n**2 / R0**2) * special.jv(n, k * R0) ** 2,
        )
    n_phi = np.full(table.size, 2 * math.pi)
    n_z = np.full(table.size, 0.5 * Z0)
    return n_r, n_phi, n_z


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Everything that depends only on geometry and truncation."""

    geometry: CylinderGeometry
    table: ModeTable
    roots: np.ndarray
    wavenumbers: np.ndarray
    k: np.ndarray = field(init=False, repr=False)
    lam: np.ndarray = field(init=False, repr=False)
    N_r: np.ndarray = field(init=False, repr=False)
    N_phi: np.ndarray = field(init=False, repr=False)
    N_z: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = self.table
        if self.roots.shape != (t.N + 1, t.M) or self.wavenumbers.shape != (t.L,):
            raise ValueError("roots/wavenumbers do not match the mode table")
        set_ = object.__setattr__
        set_(self, "k", self.roots[np.abs(t.n), t.m])
        set_(self, "lam", self.wavenumbers[t.nu - 1])
        n_r, n_phi, n_z = compute_scalings(t, self.geometry, self.roots, self.wavenumbers)
        set_(self, "N_r", n_r)
        set_(self, "N_phi", n_phi)
        set_(self, "N_z", n_z)

    @property
    def N_mu(self) -> np.ndarray:
        return self.N_r * self.N_phi * self.N_z

    @property
    def size(self) -> int:
        return self.table.size

    def eigenvalues(self, D: float) -> np.ndarray:
        return compute_eigenvalues(D, self.table, self.roots, self.wavenumbers)

    def with_table(self, table: ModeTable) -> "EigenSystem":
        """Same geometry with a sub-table (roots and wavenumbers are sliced)."""
        return EigenSystem(
            self.geometry,
            table,
            self.roots[: table.N + 1, : table.M].copy(),
            self.wavenumbers[: table.L].copy(),
        )


def build_eigensystem(geometry: CylinderGeometry, table: ModeTable) -> EigenSystem:
    roots = compute_roots(table.N, table.M, geometry.R0)
    lam = compute_wavenumbers(table.L, geometry.Z0)
    return EigenSystem(geometry, table, roots, lam)


def _points(es: EigenSystem, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 3:
        raise ValueError("points must be given as (r, phi, z)")
    if not np.all(inside_cylinder(x, es.geometry)):
        raise ValueError("point outside the cylinder")
    return x


def _factors(es: EigenSystem, x, mu):
    x = _points(es, x)
    sel = slice(None) if mu is None else mu
    n = es.table.n[sel]
    k = es.k[sel]
    lam = es.lam[sel]
    r = x[..., 0, None]
    phi = x[..., 1, None]
    z = x[..., 2, None]
    radial = special.jv(n, k * r)
    azimuthal = np.exp(1j * n * phi)
    return radial * azimuthal, lam, lam * z


def eval_eigvec_K1(es: EigenSystem, x, mu=None):
    """``K1 = J_n(k r) e^{j n phi} sin(lambda z)`` at ``x = (r, phi, z)``."""
    rad_az, _, arg = _factors(es, x, mu)
    return rad_az * np.sin(arg)


def eval_adjoint_K3(es: EigenSystem, x, mu=None):
    """``K3~ = lambda J_n(k r) e^{j n phi} cos(lambda z)``."""
    rad_az, lam, arg = _factors(es, x, mu)
    return lam * rad_az * np.cos(arg)


def eval_adjoint_K4(es: EigenSystem, x, mu=None):
    """``K4~ = J_n(k r) e^{j n phi} sin(lambda z)``."""
    return eval_eigvec_K1(es, x, mu)
