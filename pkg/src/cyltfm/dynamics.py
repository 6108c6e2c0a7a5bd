"""Discrete-time closed-loop model: exponential, state recursion, kernels.

The closed-loop matrix is block diagonal over Bessel orders and every block
is real. Complex modal states are therefore propagated as two real columns
(real and imaginary part) per block.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .eigensystem import EigenSystem, eval_adjoint_K4
from .flow_coupling import ClosedLoopMatrix
from .modal_transform import observation_weights
from .series import ConcentrationSeries

__all__ = [
    "ExponentialError",
    "GuardHorizonWarning",
    "SimulationConfig",
    "DiscreteStateMatrix",
    "discretize",
    "evolve",
    "iter_states",
    "simulate",
    "guard_horizon",
    "greens_function",
    "resolvent_apply",
    "verify_exponential",
]

log = logging.getLogger(__name__)

VERIFY_RTOL = 1e-10
# Taylor verification is skipped in "auto" mode above this many flops per block.
VERIFY_BUDGET = 2e10


class ExponentialError(ArithmeticError):
    """Matrix exponential of a block failed or could not be verified."""


class GuardHorizonWarning(UserWarning):
    """Observation time runs past the boundary re-entry horizon."""


def guard_horizon(z_e: float, Z0: float, v0: float) -> float:
    """Latest trustworthy observation time ``(Z0 - z_e) / v0`` (``inf`` without flow)."""
    return math.inf if v0 <= 0 else (Z0 - z_e) / v0


@dataclass(frozen=True)
class SimulationConfig:
    """Sampling interval ``T``, number of steps and horizon guard (normalized).

    ``t_obs`` of ``None`` means "derive from the release"; ``guard=False``
    disables the check entirely. ``store_every`` sets the decimation of full
    modal states kept for snapshots.
    """

    T: float = 2e-4
    steps: int = 900
    t_obs: float | None = None
    guard: bool = True
    store_every: int = 10

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("sampling interval T must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")

    @property
    def t_end(self) -> float:
        return self.steps * self.T


@dataclass(frozen=True, eq=False)
class DiscreteStateMatrix:
    """``exp(A_c T)`` per order block, plus provenance."""

    blocks: tuple
    eigensystem: EigenSystem
    T: float
    D: float
    v0: float
    verified: tuple = ()

    @property
    def table(self):
        return self.eigensystem.table

    def dense(self) -> np.ndarray:
        return linalg.block_diag(*self.blocks)

    def apply(self, y) -> np.ndarray:
        y = np.asarray(y)
        out = np.empty(y.shape, dtype=np.result_type(y, float))
        for b, Ad in enumerate(self.blocks):
            sl = self.table.block_slice(b)
            out[sl] = Ad @ y[sl]
        return out


def _taylor_flow(A, v, T, tol=1e-16):
    """Integrate ``v' = A v`` over ``[0, T]`` with Taylor substeps.

    Substeps are short enough that ``||A|| h <= 1/2`` so the series converges
    geometrically; terms are added until they drop below ``tol`` relative.
    """
    norm = np.linalg.norm(A, 1)
    n_sub = max(1, int(math.ceil(2 * norm * T)))
    h = T / n_sub
    matvecs = 0
    for _ in range(n_sub):
        term = v
        acc = v.copy()
        for j in range(1, 80):
            term = (A @ term) * (h / j)
            matvecs += 1
            acc += term
            if np.abs(term).max() <= tol * np.abs(acc).max():
                break
        v = acc
    return v, matvecs


def verify_exponential(A, Ad, T, probes=2, seed=0):
    """Relative mismatch between ``Ad @ v`` and a Taylor integration of ``v' = A v``."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((A.shape[0], probes))
    ref, _ = _taylor_flow(A, V, T)
    return float(np.abs(Ad @ V - ref).max() / np.abs(ref).max())


def _verify_cost(A, T):
    n = A.shape[0]
    n_sub = max(1, int(math.ceil(2 * np.linalg.norm(A, 1) * T)))
    return n_sub * 20 * 2 * n * n


def discretize(A_c: ClosedLoopMatrix, T: float, verify="auto", rtol=VERIFY_RTOL) -> DiscreteStateMatrix:
    """Impulse-invariant discretization ``A_c^d = exp(A_c T)`` block by block.

    Parameters
    ----------
    verify : {"auto", True, False}
        Cross-check each block against an independent Taylor integration on
        random probe vectors. ``"auto"`` skips blocks whose check would cost
        more than ``VERIFY_BUDGET`` flops.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    blocks = []
    checked = []
    for b, A in enumerate(A_c.blocks):
        if A_c.v0 == 0:
            Ad = np.diag(np.exp(np.diag(A) * T))
        else:
            Ad = linalg.expm(A * T)
        if not np.all(np.isfinite(Ad)):
            raise ExponentialError(f"non-finite exponential in block {b} (order {A_c.table.orders[b]})")
        do = verify is True or (verify == "auto" and _verify_cost(A, T) <= VERIFY_BUDGET)
        if do and A_c.v0 != 0:
            err = verify_exponential(A, Ad, T)
            if err > rtol:
                raise ExponentialError(f"block {b}: exponential mismatch {err:.3e} against Taylor reference")
            checked.append((b, err))
        blocks.append(Ad)
    return DiscreteStateMatrix(tuple(blocks), A_c.eigensystem, float(T), A_c.D, A_c.v0, tuple(checked))


def _as_columns(y):
    """Complex vector -> real ``(Q, 2)`` array."""
    y = np.asarray(y)
    return np.stack([y.real, y.imag], axis=-1).astype(float)


def iter_states(Ad: DiscreteStateMatrix, y_init, steps, source=None):
    """Yield ``(k, y[k])`` of ``y[k] = Ad y[k-1] + f[k] + y_init delta[k]``.

    ``source`` is ``None`` or a pair ``(f_spatial, waveform)``; the forcing
    at step ``k`` is ``waveform[k] * f_spatial`` (zero past the waveform).
    States are yielded as complex vectors; the same buffer is not reused.
    """
    t = Ad.table
    y_init = np.asarray(y_init)
    if y_init.shape != (t.size,):
        raise ValueError(f"state has length {y_init.shape}, table needs {t.size}")
    if source is not None:
        f_sp, wave = source
        f_sp = _as_columns(f_sp)
        if f_sp.shape[0] != t.size:
            raise ValueError("source vector length does not match the mode table")
        wave = np.asarray(wave, dtype=float)
    Y = _as_columns(y_init)
    if source is not None and len(wave) > 0:
        Y = Y + wave[0] * f_sp
    yield 0, Y[:, 0] + 1j * Y[:, 1]
    for k in range(1, steps + 1):
        nxt = np.empty_like(Y)
        for b, blk in enumerate(Ad.blocks):
            sl = t.block_slice(b)
            nxt[sl] = blk @ Y[sl]
        if source is not None and k < len(wave) and wave[k] != 0:
            nxt += wave[k] * f_sp
        Y = nxt
        yield k, Y[:, 0] + 1j * Y[:, 1]


def evolve(Ad: DiscreteStateMatrix, y_init, steps, source=None, store_every=1) -> np.ndarray:
    """Trajectory ``y[0], y[store_every], ...`` as a complex ``(K, Q)`` array."""
    out = [y for k, y in iter_states(Ad, y_init, steps, source) if k % store_every == 0]
    return np.array(out)


def simulate(Ad: DiscreteStateMatrix, y_init, observers, config: SimulationConfig, source=None, snapshot_times=(), snapshot_fn=None, t_obs=None) -> ConcentrationSeries:
    """Cube series at every observer for ``config.steps`` steps.

    Parameters
    ----------
    observers : sequence of CuboidObserver
    snapshot_times : normalized times at which ``snapshot_fn(y)`` is stored
        in ``series.meta["snapshots"]`` (nearest step).
    t_obs : guard horizon used when ``config.t_obs`` is ``None``.
    """
    if abs(Ad.T - config.T) > 1e-12 * config.T:
        raise ValueError(f"discrete matrix built for T={Ad.T}, config uses T={config.T}")
    es = Ad.eigensystem
    observers = list(observers)
    for obs in observers:
        obs.validate(es.geometry)
    W = np.array([obs.volume * observation_weights(np.asarray(obs.center, float), es) for obs in observers])
    Wr, Wi = W.real, W.imag
    fold_n0 = es.table.n == 0
    values = np.empty((len(observers), config.steps + 1))
    resid = 0.0
    snaps = {}
    want = {int(round(t / config.T)): t for t in snapshot_times}
    for k, y in iter_states(Ad, y_init, config.steps, source):
        values[:, k] = Wr @ y.real - Wi @ y.imag
        # n = 0 terms must sum to a real number on their own
        im = W[:, fold_n0] @ y[fold_n0] if es.table.folded else W @ y
        resid = max(resid, float(np.abs(im.imag).max(initial=0.0)))
        if k in want and snapshot_fn is not None:
            snaps[want[k]] = snapshot_fn(y)
    times = np.arange(config.steps + 1) * config.T
    series = ConcentrationSeries(times, values, tuple(o.name for o in observers), source="tfm")
    peak_mag = float(np.abs(values).max(initial=0.0))
    series.meta["imag_residue"] = resid / peak_mag if peak_mag > 0 else resid
    if snaps:
        series.meta["snapshots"] = snaps
    horizon = config.t_obs if config.t_obs is not None else t_obs
    if config.guard and horizon is not None and config.t_end > horizon * (1 + 1e-12):
        msg = (
            f"observation horizon {config.t_end:g} exceeds guard {horizon:g}; "
            "particles leaving through z = Z0 may re-enter the modal solution"
        )
        series.warnings.append(msg)
        warnings.warn(msg, GuardHorizonWarning, stacklevel=2)
    return series


def greens_function(A_c: ClosedLoopMatrix, t: float, x, xi):
    """Concentration Green's function ``g(t, x | xi) = c1^T(x) exp(A_c t) conj(K4~(xi))``.

    ``xi`` may hold many source points (shape ``(..., 3)``); the result then
    has shape ``xi.shape[:-1]``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    es = A_c.eigensystem
    w = observation_weights(np.asarray(x, float), es)
    xi = np.asarray(xi, float)
    src = np.conj(eval_adjoint_K4(es, xi.reshape(-1, 3)))  # (P, Q)
    # for folded tables the mirror order -n contributes the complex
    # conjugate of order n, which the doubled weights already account for
    total = np.zeros(src.shape[0])
    for b, A in enumerate(A_c.blocks):
        sl = es.table.block_slice(b)
        E = np.diag(np.exp(np.diag(A) * t)) if A_c.v0 == 0 else linalg.expm(A * t)
        total += ((w[sl] @ E) @ src[:, sl].T).real
    out = total.reshape(xi.shape[:-1])
    return float(out) if out.ndim == 0 else out


def resolvent_apply(A_c: ClosedLoopMatrix, s: complex, b, rtol=1e-10) -> np.ndarray:
    """Solve ``(s I - A_c) x = b`` block by block (transfer-function view).

    Raises :class:`numpy.linalg.LinAlgError` when the residual exceeds
    ``rtol * ||b||``, which signals a shift too close to an eigenvalue.
    """
    b = np.asarray(b, dtype=complex)
    t = A_c.table
    x = np.empty_like(b)
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        for i, A in enumerate(A_c.blocks):
            sl = t.block_slice(i)
            M = s * np.eye(A.shape[0]) - A
            x[sl] = linalg.solve(M, b[sl])
        res = np.linalg.norm(s * x - A_c.apply(x) - b)
    nb = np.linalg.norm(b)
    if not res <= rtol * max(nb, np.finfo(float).tiny):
        raise np.linalg.LinAlgError(f"resolvent residual {res / nb:.3e} exceeds {rtol:g} (shift near an eigenvalue?)")
    return x
