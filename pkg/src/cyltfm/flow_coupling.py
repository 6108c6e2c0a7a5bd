"""Feedback matrices for the uniform and parabolic parts of the laminar flow.

Both matrices couple only modes of equal Bessel order, so they are stored per
order. Within an order block they factor into a radial ``M x M`` matrix and
an axial ``L x L`` matrix::

    K_block[(m', nu'), (m, nu)] = radial[m', m] * axial[nu', nu]

with the ``1/N_mu`` normalisation folded into the factors. ``block(b)``
materialises the dense ``(M L) x (M L)`` block on demand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .eigensystem import EigenSystem
from .quadrature import QuadratureError, leggauss

__all__ = [
    "FeedbackMatrices",
    "ClosedLoopMatrix",
    "axial_coupling",
    "axial_feedback_factor",
    "radial_r3_integrals",
    "build_K_uni",
    "build_K_par",
    "assemble_A_c",
]


def axial_coupling(nu, nu_p, Z0):
    """``int_0^Z0 cos(lambda_nu' z) sin(lambda_nu z) dz`` in closed form."""
    nu = np.asarray(nu)
    nu_p = np.asarray(nu_p)
    parity = 1 - (-1.0) ** (nu + nu_p)
    denom = (nu**2 - nu_p**2).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = Z0 / math.pi * nu * parity / denom
    return np.where(nu == nu_p, 0.0, val)


def axial_feedback_factor(L: int, Z0: float) -> np.ndarray:
    """``lambda_nu' * A(nu, nu') / N_z`` indexed ``[nu' - 1, nu - 1]``."""
    nu = np.arange(1, L + 1)
    lam = nu * math.pi / Z0
    A = axial_coupling(nu[None, :], nu[:, None], Z0)
    return lam[:, None] * A / (0.5 * Z0)


@dataclass(frozen=True, eq=False)
class FeedbackMatrices:
    """Block-diagonal feedback matrix in factored form.

    ``radial[n]`` is the normalised radial factor of Bessel order ``|n|``;
    ``axial`` is shared by every order.
    """

    kind: str
    table: object
    radial: tuple
    axial: np.ndarray

    def radial_for_block(self, b: int) -> np.ndarray:
        return self.radial[abs(self.table.orders[b])]

    def block(self, b: int) -> np.ndarray:
        return np.kron(self.radial_for_block(b), self.axial)

    @property
    def n_blocks(self) -> int:
        return len(self.table.orders)

    def dense(self) -> np.ndarray:
        """Full ``Q x Q`` matrix (small tables only)."""
        return linalg.block_diag(*[self.block(b) for b in range(self.n_blocks)])


@dataclass(frozen=True, eq=False)
class ClosedLoopMatrix:
    """``A_c = diag(s) + v0 (K_uni - K_par / R0^2)`` as dense per-order blocks."""

    blocks: tuple
    eigensystem: EigenSystem
    D: float
    v0: float

    @property
    def table(self):
        return self.eigensystem.table

    def dense(self) -> np.ndarray:
        return linalg.block_diag(*self.blocks)

    def apply(self, y) -> np.ndarray:
        t = self.table
        out = np.empty_like(np.asarray(y), dtype=complex)
        for b, A in enumerate(self.blocks):
            sl = t.block_slice(b)
            out[sl] = A @ y[sl]
        return out


def build_K_uni(es: EigenSystem) -> FeedbackMatrices:
    """Uniform-flow feedback ``K_uni = <c1^T, c3~^H>`` in closed form.

    Azimuthal orthogonality gives ``2 pi delta_{n n'}`` and radial
    orthogonality of the Neumann modes gives ``N_r delta_{m m'}``, so after
    division by ``N_mu`` the radial factor is the identity.
    """
    t = es.table
    radial = []
    for n in range(t.N + 1):
        n_r = np.array([es.N_r[t.index(n, m, 1)] for m in range(t.M)])
        gram = np.diag(n_r)  # int J_n(k_m' r) J_n(k_m r) r dr
        azimuthal = 2 * math.pi / (2 * math.pi)  # 2 pi delta / N_phi
        radial.append(azimuthal * gram / n_r[None, :])
    return FeedbackMatrices("uni", t, tuple(radial), axial_feedback_factor(t.L, es.geometry.Z0))


def radial_r3_integrals(n: int, k: np.ndarray, R0: float, rtol=1e-10, n_start=None, max_nodes=16384):
    """``int_0^R0 J_n(k_i r) J_n(k_j r) r^3 dr`` for all pairs of ``k``.

    Gauss-Legendre with ``4 M + 16`` nodes, doubled until two successive
    matrices agree to ``rtol`` relative to their largest entry.
    """
    M = len(k)
    nodes = n_start or 4 * M + 16

    def rule(n_nodes):
        x, w = leggauss(n_nodes)
        r = 0.5 * R0 * (x + 1)
        J = special.jv(n, np.outer(r, k))  # (nodes, M)
        return (J * (0.5 * R0 * w * r**3)[:, None]).T @ J

    prev = rule(nodes)
    while True:
        nodes *= 2
        cur = rule(nodes)
        diff = np.abs(cur - prev)
        scale = np.abs(cur).max()
        if diff.max() <= rtol * scale:
            return cur
        if nodes >= max_nodes:
            i, j = np.unravel_index(np.argmax(diff), diff.shape)
            raise QuadratureError(
                f"K_par radial quadrature did not converge for n={n}, m={i}, m'={j} "
                f"(difference {diff.max():.3e})"
            )
        prev = cur


def build_K_par(es: EigenSystem, rtol=1e-10) -> FeedbackMatrices:
    """Parabolic-flow feedback ``K_par = <c1^T r^2, c3~^H>``.

    The ``r^3``-weighted radial integrals have no general closed form and are
    computed by converged Gauss-Legendre quadrature for every order.
    """
    t = es.table
    R0 = es.geometry.R0
    radial = []
    for n in range(t.N + 1):
        k = es.roots[n]
        n_r = np.array([es.N_r[t.index(n, m, 1)] for m in range(t.M)])
        P = radial_r3_integrals(n, k, R0, rtol=rtol)
        radial.append(P / n_r[None, :])
    return FeedbackMatrices("par", t, tuple(radial), axial_feedback_factor(t.L, es.geometry.Z0))


def assemble_A_c(es: EigenSystem, K_uni: FeedbackMatrices, K_par: FeedbackMatrices, v0: float, D: float) -> ClosedLoopMatrix:
    """Closed-loop state matrix for diffusion coefficient ``D`` and peak velocity ``v0``."""
    t = es.table
    s = es.eigenvalues(D)
    R0sq = es.geometry.R0 ** 2
    blocks = []
    for b in range(len(t.orders)):
        sl = t.block_slice(b)
        if v0 == 0:
            A = np.diag(s[sl])
        else:
            radial = K_uni.radial_for_block(b) - K_par.radial_for_block(b) / R0sq
            A = np.kron(v0 * radial, K_uni.axial)
            A[np.diag_indices_from(A)] += s[sl]
        blocks.append(A)
    return ClosedLoopMatrix(tuple(blocks), es, float(D), float(v0))
