"""Independent reference computations used by the tests.

Nothing here imports the package's quadrature or Bessel code: special
functions come from mpmath and integrals from plain Gauss-Legendre tensor
rules built on numpy's node tables.
"""
import math

import mpmath
import numpy as np

mpmath.mp.dps = 30


def bessel_j(n, x):
    return float(mpmath.besselj(n, x))


def bessel_jp(n, x):
    return float(mpmath.besselj(n, x, derivative=1))


def neumann_root(n, m):
    """m-th positive zero of J_n' (m >= 1)."""
    return float(mpmath.besseljzero(n, m, derivative=1))


def quad1d(f, a, b):
    return float(mpmath.quad(f, [a, (a + b) / 2, b]))


def gl(a, b, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def cylinder_rule(R0, Z0, nr=48, nphi=32, nz=96, r=None, phi=None, z=None):
    """Tensor Gauss-Legendre points ``(P, 3)`` and weights including ``r``."""
    rr, wr = gl(0.0, R0, nr) if r is None else gl(*r, nr)
    pp, wp = gl(0.0, 2 * math.pi, nphi) if phi is None else gl(*phi, nphi)
    zz, wz = gl(0.0, Z0, nz) if z is None else gl(*z, nz)
    R, P, Z = np.meshgrid(rr, pp, zz, indexing="ij")
    W = (wr * rr)[:, None, None] * wp[None, :, None] * wz[None, None, :]
    return np.stack([R.ravel(), P.ravel(), Z.ravel()], axis=-1), W.ravel()


def raised_cosine(x, width, center):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x - center) <= width / 2, 0.5 * (1 + np.cos(2 * np.pi / width * (x - center))), 0.0)


def neumann_norm(n, k, R0):
    """``int_0^R0 J_n(k r)^2 r dr`` at a Neumann root ``k`` (closed form)."""
    if k == 0:
        return R0**2 / 2 if n == 0 else 0.0
    kr = mpmath.mpf(k) * R0
    return float(R0**2 / 2 * (1 - mpmath.mpf(n) ** 2 / kr**2) * mpmath.besselj(n, kr) ** 2)


def diffusion_series(modes, y, D, t, x, R0, Z0):
    """Separable pure-diffusion solution ``sum_mu y_mu e^{s_mu t} K1_mu(x) / N_mu``.

    ``modes`` lists ``(n, m, nu)`` over both signs of ``n``; ``x`` is one
    cylindrical point.
    """
    r, phi, z = x
    total = mpmath.mpc(0)
    for (n, m, nu), ym in zip(modes, y):
        k = neumann_root(abs(n), m + 1) / R0  # mpmath counts 0 as the first J_0' zero
        lam = nu * math.pi / Z0
        N = neumann_norm(abs(n), k, R0) * 2 * math.pi * Z0 / 2
        K1 = mpmath.besselj(n, k * r) * mpmath.expj(n * phi) * mpmath.sin(lam * z)
        total += complex(ym) * mpmath.exp(-D * (k**2 + lam**2) * t) * K1 / N
    return complex(total)
