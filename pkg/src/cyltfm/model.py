"""Convenience wrapper tying geometry, truncation and feedback matrices together."""
from __future__ import annotations

import time

import numpy as np

from .dynamics import DiscreteStateMatrix, SimulationConfig, discretize, guard_horizon, simulate
from .eigensystem import EigenSystem, ModeTable, build_eigensystem
from .flow_coupling import FeedbackMatrices, assemble_A_c, build_K_par, build_K_uni
from .geometry import CylinderGeometry
from .modal_transform import ReleaseProfile, snapshot_yz, transform_initial

__all__ = ["ChannelModel"]


class ChannelModel:
    """Geometry-dependent part of the model, reusable across ``D`` and ``v0``.

    Examples
    --------
    >>> m = ChannelModel.build(CylinderGeometry(), (0, 2, 8))
    >>> m.table.size
    16
    """

    def __init__(self, eigensystem: EigenSystem, K_uni: FeedbackMatrices, K_par: FeedbackMatrices):
        self.eigensystem = eigensystem
        self.K_uni = K_uni
        self.K_par = K_par
        self.timings = {}

    @classmethod
    def build(cls, geometry: CylinderGeometry, q, folded=True):
        t0 = time.perf_counter()
        es = build_eigensystem(geometry, ModeTable(*q, folded=folded))
        model = cls(es, build_K_uni(es), build_K_par(es))
        model.timings["build"] = time.perf_counter() - t0
        return model

    @property
    def table(self) -> ModeTable:
        return self.eigensystem.table

    @property
    def geometry(self) -> CylinderGeometry:
        return self.eigensystem.geometry

    def closed_loop(self, D, v0):
        return assemble_A_c(self.eigensystem, self.K_uni, self.K_par, v0, D)

    def discretize(self, D, v0, T, verify="auto") -> DiscreteStateMatrix:
        t0 = time.perf_counter()
        Ad = discretize(self.closed_loop(D, v0), T, verify=verify)
        self.timings["expm"] = time.perf_counter() - t0
        return Ad

    def run(self, profile: ReleaseProfile, observers, D, v0, config: SimulationConfig, Ad=None, snapshot_times=(), snapshot_grid=None):
        """Cube series for an initial release; ``Ad`` may be passed to reuse an exponential.

        ``snapshot_grid = (ygrid, zgrid)`` selects the y-z plane for snapshots.
        """
        Ad = Ad if Ad is not None else self.discretize(D, v0, config.T)
        y0 = transform_initial(profile, self.eigensystem)
        fn = None
        if snapshot_grid is not None:
            yg, zg = snapshot_grid
            fn = lambda y: snapshot_yz(self.eigensystem, y, yg, zg)  # noqa: E731
        t0 = time.perf_counter()
        series = simulate(
            Ad, y0, observers, config,
            snapshot_times=snapshot_times, snapshot_fn=fn,
            t_obs=guard_horizon(profile.z_e, self.geometry.Z0, v0),
        )
        self.timings["evolve"] = time.perf_counter() - t0
        series.meta.update(Q=self.table.size, q=(self.table.N, self.table.M, self.table.L), D=D, v0=v0)
        return series
