"""Command line front end.

Verbs::

    cyltfm run <scenario.toml> [--out DIR] [--baselines-only]
    cyltfm cache warm <scenario.toml>
    cyltfm compare <scenario.toml> [--out DIR]
    cyltfm sweep <scenario.toml> --param {D,alpha} --values V [V ...]

The cache directory defaults to ``$CYLTFM_CACHE_DIR`` (or the user cache
directory); ``--cache-dir`` overrides it and ``--no-cache`` bypasses it.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .cache import ModelCache
from .dynamics import GuardHorizonWarning
from .model import ChannelModel
from .pbs import run_pbs
from .regimes import baseline_series, classify
from .scenario import Scenario, ScenarioError, load_scenario
from .series import ConcentrationSeries, fwhm, normalized_rmse, peak

__all__ = ["main", "run_scenario", "write_series", "write_snapshot"]

log = logging.getLogger("cyltfm")


def write_series(path, series: ConcentrationSeries, units):
    """CSV with header ``time_s,<observer>...``; times in seconds, 15 significant digits."""
    t = units.time_si(series.times)
    data = np.column_stack([t, series.values.T])
    header = ",".join(["time_s", *series.names])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.15g")


def write_snapshot(path, grid, ygrid, zgrid, t_norm, units):
    """Row-major values (rows over ``y``, columns over ``z``) after ``#`` header lines."""
    header = "\n".join([
        "y-z plane concentration p(x, t) (normalized)",
        f"time_s = {units.time_si(t_norm):.15g}",
        f"y: {len(ygrid)} points from {ygrid[0]:.15g} to {ygrid[-1]:.15g} (normalized)",
        f"z: {len(zgrid)} points from {zgrid[0]:.15g} to {zgrid[-1]:.15g} (normalized)",
        "layout: row-major, rows = y, columns = z",
    ])
    np.savetxt(path, grid, delimiter=",", header=header, fmt="%.15g")


def _model(sc: Scenario, cache: ModelCache | None):
    if cache is None:
        return ChannelModel.build(sc.geometry, sc.q, folded=sc.folded), False
    try:
        return cache.get_or_build(sc.geometry, sc.q, folded=sc.folded)
    except OSError as exc:
        log.warning("cache unavailable (%s); building in memory", exc)
        return ChannelModel.build(sc.geometry, sc.q, folded=sc.folded), False


def _metrics(ref: ConcentrationSeries, other: ConcentrationSeries):
    # None when the reference never leaves zero (e.g. no particle reached the cube)
    out = {}
    for name in ref.names:
        e = normalized_rmse(ref, other, name)
        out[name] = e if math.isfinite(e) else None
    return out


def _summary(series: ConcentrationSeries, units):
    out = {}
    for name in series.names:
        tp, vp = peak(series.times, series[name])
        out[name] = {
            "peak_time_s": units.time_si(tp),
            "peak_value": vp,
            "fwhm_s": units.time_si(fwhm(series.times, series[name])),
        }
    return out


def run_scenario(sc: Scenario, out_dir, cache: ModelCache | None = None, with_pbs=None, with_baselines=None, with_tfm=None, prefix=""):
    """Run one scenario and write its artifacts; returns the report dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with_pbs = sc.pbs_enabled if with_pbs is None else with_pbs
    with_baselines = sc.baselines if with_baselines is None else with_baselines
    with_tfm = sc.run_tfm if with_tfm is None else with_tfm
    report = {
        "D": sc.D,
        "D_si": sc.units.diffusivity_si(sc.D),
        "v0": sc.flow.v0,
        "q": list(sc.q),
        "alpha": sc.alpha if sc.flow.v0 > 0 else None,
        "regime": classify(sc.alpha) if sc.flow.v0 > 0 else "no flow",
        "release": sc.release.kind,
        "observers": {o.name: list(o.center) for o in sc.observers},
        "t_obs_guard_s": sc.units.time_si(sc.t_obs) if math.isfinite(sc.t_obs) else None,
        "warnings": [],
        "timing_s": {},
        "files": [],
    }
    times = np.arange(sc.sim.steps + 1) * sc.sim.T
    tfm = None
    if with_tfm:
        model, hit = _model(sc, cache)
        report["cache_hit"] = hit
        t0 = time.perf_counter()
        Ad = model.discretize(sc.D, sc.flow.v0, sc.sim.T, verify=sc.verify)
        report["timing_s"]["expm"] = time.perf_counter() - t0
        report["exponential_checks"] = [{"block": b, "rel_err": e} for b, e in Ad.verified]
        ny, nz = sc.snapshot_shape
        ygrid = np.linspace(-sc.geometry.R0, sc.geometry.R0, ny)
        zgrid = np.linspace(0.0, sc.geometry.Z0, nz)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GuardHorizonWarning)
            tfm = model.run(
                sc.release, sc.observers, sc.D, sc.flow.v0, sc.sim, Ad=Ad,
                snapshot_times=sc.snapshot_times, snapshot_grid=(ygrid, zgrid),
            )
        report["timing_s"]["evolve"] = time.perf_counter() - t0
        report["warnings"] += tfm.warnings
        report["imag_residue"] = tfm.meta["imag_residue"]
        report["tfm"] = _summary(tfm, sc.units)
        path = out / f"{prefix}series_tfm.csv"
        write_series(path, tfm, sc.units)
        report["files"].append(path.name)
        snaps = tfm.meta.get("snapshots", {})
        if snaps:
            (out / "snapshots").mkdir(exist_ok=True)
        for t_norm, grid in sorted(snaps.items()):
            path = out / "snapshots" / f"{prefix}snapshot_t{sc.units.time_si(t_norm):.6g}s.csv"
            write_snapshot(path, grid, ygrid, zgrid, t_norm, sc.units)
            report["files"].append(f"snapshots/{path.name}")
    if with_pbs:
        t0 = time.perf_counter()
        every = max(1, int(round(sc.sim.T / sc.pbs.dt)))
        pbs = run_pbs(sc.release, sc.geometry, sc.D, sc.flow, sc.observers, sc.sim.t_end, sc.pbs, record_every=every)
        report["timing_s"]["pbs"] = time.perf_counter() - t0
        pbs.meta.pop("counts", None)
        pbs.meta.pop("alive", None)
        report["pbs"] = {**pbs.meta, **{"summary": _summary(pbs, sc.units)}}
        path = out / f"{prefix}series_pbs.csv"
        write_series(path, pbs, sc.units)
        report["files"].append(path.name)
        if tfm is not None:
            report["nrmse_tfm_vs_pbs"] = _metrics(pbs, tfm)
    if with_baselines and sc.flow.v0 > 0:
        kinds = ["flow-dominant"] + (["dispersive"] if sc.D > 0 else [])
        report["baselines"] = {}
        for kind in kinds:
            bs = baseline_series(kind, sc.release, sc.flow, sc.geometry, sc.observers, times, D=sc.D, boundary=sc.dispersive_boundary)
            path = out / f"{prefix}series_{kind}.csv"
            write_series(path, bs, sc.units)
            report["files"].append(path.name)
            entry = {"meta": bs.meta, "summary": _summary(bs, sc.units)}
            if tfm is not None:
                entry["nrmse_vs_tfm"] = _metrics(tfm, bs)
            report["baselines"][kind] = entry
    with open(out / f"{prefix}report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
    return report


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _parser():
    p = argparse.ArgumentParser(prog="cyltfm", description="Diffusion and laminar flow in a cylindrical duct.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--cache-dir", help="cache directory (overrides $CYLTFM_CACHE_DIR)")
    p.add_argument("--no-cache", action="store_true", help="do not read or write the cache")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a scenario and write series, snapshots and a report")
    r.add_argument("scenario")
    r.add_argument("--out")
    r.add_argument("--baselines-only", action="store_true", help="skip the model and PBS, emit only the reference curves")

    c = sub.add_parser("cache", help="cache management")
    csub = c.add_subparsers(dest="action", required=True)
    w = csub.add_parser("warm", help="build and store the geometry data of a scenario")
    w.add_argument("scenario")
    inv = csub.add_parser("invalidate", help="drop the cached entry of a scenario")
    inv.add_argument("scenario")

    cmp_ = sub.add_parser("compare", help="model + PBS + baselines with error report")
    cmp_.add_argument("scenario")
    cmp_.add_argument("--out")

    s = sub.add_parser("sweep", help="repeat a scenario over diffusion coefficients")
    s.add_argument("scenario")
    s.add_argument("--param", choices=("D", "alpha"), default="D")
    s.add_argument("--values", type=float, nargs="+", required=True, help="D in the scenario's units, or alpha")
    s.add_argument("--out")
    return p


def _sweep(sc: Scenario, args, cache):
    out = Path(args.out or sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v in args.values:
        if args.param == "alpha":
            D = v * sc.flow.v0 * sc.geometry.R0**2 / (2 * sc.d)
        else:
            D = v if sc.normalized_input else sc.units.diffusivity(v)
        case = sc.with_D(D)
        rep = run_scenario(case, out, cache, prefix=f"{args.param}={v:g}_")
        name = sc.observers[0].name
        row = [v, case.D, case.alpha, rep["regime"]]
        tfm = rep.get("tfm", {}).get(name, {})
        row += [tfm.get("peak_time_s", float("nan")), tfm.get("peak_value", float("nan")), tfm.get("fwhm_s", float("nan"))]
        row.append(rep.get("nrmse_tfm_vs_pbs", {}).get(name, float("nan")))
        rows.append(row)
        log.info("%s=%g done (alpha=%.4g)", args.param, v, case.alpha)
    with open(out / "sweep_summary.csv", "w") as fh:
        fh.write(f"{args.param}_value,D_normalized,alpha,regime,peak_time_s,peak_value,fwhm_s,nrmse_vs_pbs\n")
        for r in rows:
            fh.write(",".join(x if isinstance(x, str) else f"{x:.15g}" for x in r) + "\n")
    return rows


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cache = None if args.no_cache else ModelCache(args.cache_dir)
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2

    if args.verb == "run":
        if args.baselines_only:
            rep = run_scenario(sc, args.out or sc.output_dir, cache, with_pbs=False, with_baselines=True, with_tfm=False)
        else:
            rep = run_scenario(sc, args.out or sc.output_dir, cache)
    elif args.verb == "compare":
        rep = run_scenario(sc, args.out or sc.output_dir, cache, with_pbs=True, with_baselines=True, with_tfm=True)
    elif args.verb == "cache":
        if cache is None:
            print("--no-cache given; nothing to do", file=sys.stderr)
            return 2
        if args.action == "warm":
            _, hit = cache.get_or_build(sc.geometry, sc.q, folded=sc.folded)
            print(f"{'hit' if hit else 'built'} {cache.path(sc.geometry, sc.q)}")
        else:
            print("removed" if cache.invalidate(sc.geometry, sc.q) else "no entry")
        return 0
    else:
        _sweep(sc, args, cache)
        return 0
    for w in rep["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps({k: rep[k] for k in ("alpha", "regime", "files")}, default=_json_default))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
