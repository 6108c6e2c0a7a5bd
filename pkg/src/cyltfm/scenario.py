"""Scenario files (TOML) and their conversion to normalized solver inputs.

Values are SI (metres, seconds, m^2/s) unless ``units.normalized = true``.
Angles are always radians. Omitted keys fall back to the reference duct
of :data:`~cyltfm.geometry.TABLE_I` with a uniform release and ``alpha = 0.1``.

Sections and keys::

    [units]      normalized, rho, tau
    [geometry]   R0, Z0
    [medium]     D | alpha
    [flow]       v0, d
    [modes]      N, M, L, folded
    [release]    kind, z0, z_e, r0, r_e, phi0, phi_e, amplitude
    [[observers]] name, r, phi, z, edge
    [sim]        tfm, T, t_end, guard, t_obs, store_every, verify,
                 snapshot_times, snapshot_ny, snapshot_nz
    [pbs]        enabled, n_tx, dt, realizations, seed, batch
    [baselines]  enabled, dispersive_boundary
    [output]     dir
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

from .dynamics import SimulationConfig, guard_horizon
from .geometry import TABLE_I, CylinderGeometry, FlowField, UnitSystem
from .modal_transform import CuboidObserver, ReleaseProfile
from .pbs import PbsConfig
from .regimes import diffusion_for_alpha, dispersion_factor

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario"]


class ScenarioError(ValueError):
    """Invalid scenario; ``problems`` lists ``(key path, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n" + "\n".join(f"  {k}: {m}" for k, m in self.problems))


# (kind, default) per key. Defaults are normalized; only user-supplied values
# are converted from SI.
_SCHEMA = {
    "units": {"normalized": ("bool", False), "rho": ("pos", TABLE_I["rho"]), "tau": ("pos", TABLE_I["tau"])},
    "geometry": {"R0": ("length", 1.0), "Z0": ("length", 10.0)},
    "medium": {"D": ("diffusivity", None), "alpha": ("nonneg", None)},
    "flow": {"v0": ("velocity", 50.0), "d": ("length", 1.0)},
    "modes": {"N": ("int", 0), "M": ("int", 30), "L": ("int", 200), "folded": ("bool", True)},
    "release": {
        "kind": ("str", "uniform"),
        "z0": ("length", None),
        "z_e": ("length", 1.0),
        "r0": ("length", 0.4),
        "r_e": ("length", 0.5),
        "phi0": ("angle", math.pi / 4),
        "phi_e": ("angle", math.pi / 2),
        "amplitude": ("nonneg", 1.0),
    },
    "observers": {"name": ("str", None), "r": ("coord", 0.0), "phi": ("angle", math.pi / 2), "z": ("coord", 2.0), "edge": ("length", 0.04)},
    "sim": {
        "tfm": ("bool", True),
        "T": ("time", 2e-4),
        "t_end": ("time", 0.18),
        "guard": ("bool", True),
        "t_obs": ("time", None),
        "store_every": ("int", 10),
        "verify": ("verify", "auto"),
        "snapshot_times": ("times", []),
        "snapshot_ny": ("int", 81),
        "snapshot_nz": ("int", 201),
    },
    "pbs": {
        "enabled": ("bool", False),
        "n_tx": ("int", 1000),
        "dt": ("time", 1e-4),
        "realizations": ("int", 500),
        "seed": ("int", 2021),
        "batch": ("int", 50),
    },
    "baselines": {"enabled": ("bool", True), "dispersive_boundary": ("str", "absorbing")},
    "output": {"dir": ("str", "out")},
}

# normalized axial width of each release kind
_RELEASE_Z0 = {"uniform": 0.3, "point": 0.4}


@dataclass
class Scenario:
    """Fully normalized scenario; ``raw`` keeps the decoded input mapping."""

    units: UnitSystem
    normalized_input: bool
    geometry: CylinderGeometry
    D: float
    flow: FlowField
    d: float
    q: tuple
    folded: bool
    release: ReleaseProfile
    observers: list
    sim: SimulationConfig
    run_tfm: bool
    verify: object
    snapshot_times: list
    snapshot_shape: tuple
    pbs: PbsConfig
    pbs_enabled: bool
    baselines: bool
    dispersive_boundary: str
    output_dir: str
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self) -> float:
        return dispersion_factor(self.D, self.d, self.flow.v0, self.geometry.R0)

    @property
    def t_obs(self) -> float:
        if self.sim.t_obs is not None:
            return self.sim.t_obs
        return guard_horizon(self.release.z_e, self.geometry.Z0, self.flow.v0)

    def with_D(self, D: float) -> "Scenario":
        return replace(self, D=float(D))


def _convert(kind, value, units: UnitSystem):
    if kind in ("length", "coord"):
        return units.length(value)
    if kind == "time":
        return units.time(value)
    if kind == "times":
        return [units.time(v) for v in value]
    if kind == "velocity":
        return units.velocity(value)
    if kind == "diffusivity":
        return units.diffusivity(value)
    return value


def _check(kind, value):
    num = isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "str":
        return isinstance(value, str)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool) and value >= 0
    if kind == "verify":
        return value in ("auto", True, False)
    if kind == "times":
        return isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0 for v in value)
    if not (num and math.isfinite(value)):
        return False
    if kind == "angle":
        return True
    if kind in ("nonneg", "diffusivity", "coord"):
        return value >= 0
    return value > 0  # length, time, velocity, pos


def _section(data, name, problems, units=None, prefix=None):
    """Validated, normalized values of one section (defaults filled in)."""
    schema = _SCHEMA[name]
    prefix = prefix or name
    out = {k: v for k, (_, v) in schema.items()}
    if not isinstance(data, dict):
        problems.append((prefix, "must be a table"))
        return out
    for key, value in data.items():
        if key not in schema:
            problems.append((f"{prefix}.{key}", "unknown key"))
            continue
        kind = schema[key][0]
        if not _check(kind, value):
            problems.append((f"{prefix}.{key}", f"invalid value {value!r} (expected {kind})"))
            continue
        out[key] = _convert(kind, value, units) if units is not None else value
    return out


def parse_scenario(data: dict) -> Scenario:
    """Validate a decoded TOML mapping and return the normalized scenario.

    All problems are collected and raised together as :class:`ScenarioError`.
    """
    problems = []
    for key in data:
        if key not in _SCHEMA:
            problems.append((key, "unknown section"))
    u = _section(data.get("units", {}), "units", problems)
    units = UnitSystem(u["rho"], u["tau"])
    conv = None if u["normalized"] else units
    sec = {name: _section(data.get(name, {}), name, problems, conv) for name in _SCHEMA if name not in ("units", "observers")}

    geometry = None
    try:
        geometry = CylinderGeometry(sec["geometry"]["R0"], sec["geometry"]["Z0"])
    except ValueError as exc:
        problems.append(("geometry", str(exc)))
    R0 = geometry.R0 if geometry else 1.0
    v0, d = sec["flow"]["v0"], sec["flow"]["d"]
    flow = FlowField(v0, R0)

    med = sec["medium"]
    if med["D"] is not None and med["alpha"] is not None:
        problems.append(("medium", "give either D or alpha, not both"))
    if med["D"] is not None:
        D = med["D"]
    else:
        D = diffusion_for_alpha(0.1 if med["alpha"] is None else med["alpha"], d, v0, R0)

    m = sec["modes"]
    q = (m["N"], m["M"], m["L"])
    if m["M"] < 1 or m["L"] < 1:
        problems.append(("modes", "M and L must be >= 1"))

    r = sec["release"]
    release = None
    if r["kind"] not in _RELEASE_Z0:
        problems.append(("release.kind", f"unknown release kind {r['kind']!r}"))
    else:
        z0 = r["z0"] if r["z0"] is not None else _RELEASE_Z0[r["kind"]]
        try:
            if r["kind"] == "uniform":
                release = ReleaseProfile.uniform(z0=z0, z_e=r["z_e"], amplitude=r["amplitude"])
            else:
                release = ReleaseProfile.point(
                    r_e=r["r_e"], r0=r["r0"], phi0=r["phi0"], phi_e=r["phi_e"],
                    z0=z0, z_e=r["z_e"], amplitude=r["amplitude"],
                )
            if geometry is not None:
                release.validate(geometry)
        except ValueError as exc:
            problems.append(("release", str(exc)))
            release = None

    observers = []
    obs_data = data.get("observers", [{}])
    if not isinstance(obs_data, list) or not obs_data:
        problems.append(("observers", "must be a non-empty array of tables"))
        obs_data = []
    for i, od in enumerate(obs_data):
        o = _section(od, "observers", problems, conv, prefix=f"observers[{i}]")
        name = o["name"] or ("rx" if len(obs_data) == 1 else f"rx{i}")
        try:
            obs = CuboidObserver((o["r"], o["phi"], o["z"]), o["edge"], name)
            if geometry is not None:
                obs.validate(geometry)
            observers.append(obs)
        except ValueError as exc:
            problems.append((f"observers[{i}]", str(exc)))
    if len({o.name for o in observers}) != len(observers):
        problems.append(("observers", "observer names must be unique"))

    s = sec["sim"]
    sim = None
    try:
        sim = SimulationConfig(T=s["T"], steps=int(round(s["t_end"] / s["T"])), t_obs=s["t_obs"], guard=s["guard"], store_every=max(1, s["store_every"]))
    except ValueError as exc:
        problems.append(("sim", str(exc)))

    p = sec["pbs"]
    pbs = None
    try:
        pbs = PbsConfig(n_tx=p["n_tx"], dt=p["dt"], realizations=p["realizations"], seed=p["seed"], batch=max(1, p["batch"]))
    except ValueError as exc:
        problems.append(("pbs", str(exc)))

    b = sec["baselines"]
    if b["dispersive_boundary"] not in ("absorbing", "free"):
        problems.append(("baselines.dispersive_boundary", "must be 'absorbing' or 'free'"))
    if problems:
        raise ScenarioError(problems)
    return Scenario(
        units=units, normalized_input=u["normalized"], geometry=geometry, D=float(D), flow=flow, d=float(d),
        q=q, folded=m["folded"], release=release, observers=observers, sim=sim, run_tfm=s["tfm"],
        verify=s["verify"], snapshot_times=list(s["snapshot_times"]),
        snapshot_shape=(s["snapshot_ny"], s["snapshot_nz"]), pbs=pbs, pbs_enabled=p["enabled"],
        baselines=b["enabled"], dispersive_boundary=b["dispersive_boundary"],
        output_dir=sec["output"]["dir"], raw=data,
    )


def load_scenario(path) -> Scenario:
    """Read and validate a TOML scenario file (an empty file gives the defaults)."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioError([(str(path), f"TOML syntax error: {exc}")]) from None
    return parse_scenario(data)
