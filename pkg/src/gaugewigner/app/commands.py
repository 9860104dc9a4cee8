"""Run orchestration: ``run``, ``verify`` and ``export``.

A run is computed fully in memory, written to a temporary sibling directory
and renamed into place, so a failed run never leaves partial output.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from ..evolve import (NumericalInstability, Trajectory, evolve_liouville, evolve_schrodinger,
                      evolve_weak_giwe, fs_from_psi)
from ..fields import symmetric_to_landau_chi
from ..grid import boundary_mass
from ..kernels import apply_weak_rhs, build_kernels
from ..observe import (continuity_residual, current_from_Fs, density, gauge_deviation,
                       momentum_integral)
from .config import ConfigError, ScenarioConfig
from .io import (RunManifest, grid_axes, make_check, read_array, write_array, write_csv)
from .plotting import plot_lines, plot_map
from .suites import SUITES, cubic_chi, run_suite

logger = logging.getLogger(__name__)

OUTPUT_ENV = "GAUGEWIGNER_OUTPUT"
EXPORTS = ("slice", "density", "current", "timeseries", "snapshot", "kernels", "all")

#: default tolerance of each named run check
CHECK_DEFAULTS = {
    "norm_conservation": 1e-8,
    "boundary_mass": 1e-8,
    "continuity": 1e-3,
    "gauge_invariance": 1e-6,
    "kernel_annihilation": 1e-9,
}


class RunNotFound(FileNotFoundError):
    """Export target is not a completed run directory (CLI exit code 2)."""


def output_root(root: str | Path | None = None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get(OUTPUT_ENV, "."))


def run_dir_for(cfg: ScenarioConfig, root: str | Path | None = None) -> Path:
    return output_root(root) / cfg.output_dir / f"{cfg.scenario}-{cfg.hash()[:12]}"


def _gauge_function(cfg: ScenarioConfig):
    if cfg.scenario == "uniform_B_symmetric":
        return symmetric_to_landau_chi(cfg.params.get("B", 1.0))
    if cfg.grid["dim"] == 2:
        return cubic_chi()
    return lambda r, t: 0.05 * r[0] ** 3 + 0.1 * r[0] ** 2


def _evolve(cfg: ScenarioConfig):
    grid = cfg.build_grid()
    field = cfg.build_field()
    psi0 = cfg.build_state(grid, field)
    evo = cfg.evolution_config()
    engine = evo.engine
    kernels = None
    psi_traj = None
    F0 = fs_from_psi(psi0, field)
    if engine == "weak_giwe":
        kernels = build_kernels(field, grid, order=cfg.quadrature_order)
        traj = evolve_weak_giwe(F0, field, evo, kernels=kernels)
    elif engine == "schrodinger":
        psi_traj = evolve_schrodinger(psi0, field, evo, fd_order=6)
        traj = Trajectory(engine="schrodinger")
        for t, psi in zip(psi_traj.times, psi_traj.snapshots):
            traj.append(t, fs_from_psi(psi, field))
    else:
        traj = evolve_liouville(F0, field, evo)
    return grid, field, psi0, kernels, traj, psi_traj


def _checks(cfg: ScenarioConfig, field, psi0, kernels, traj) -> list:
    out = []
    for entry in cfg.verify:
        name = entry["name"]
        tol = entry.get("tol", CHECK_DEFAULTS[name])
        if name == "norm_conservation":
            out.append(make_check(name, traj.norm_drift, tol))
        elif name == "boundary_mass":
            out.append(make_check(name, max(traj.log["boundary_mass"]), tol))
        elif name == "continuity":
            if len(traj.times) < 3:
                out.append(make_check(name, np.nan, tol, "needs >= 3 snapshots"))
            else:
                out.append(make_check(name, float(np.max(continuity_residual(traj, field))), tol))
        elif name == "gauge_invariance":
            dev = gauge_deviation(psi0, field, _gauge_function(cfg))
            out.append(make_check(name, dev["F_s"], tol,
                                  f"F_w {dev['F_w']:.3e}, f_w {dev['f_w']:.3e}"))
        elif name == "kernel_annihilation":
            K = kernels or build_kernels(field, traj.final.grid, order=cfg.quadrature_order)
            val = max(float(np.max(np.abs(momentum_integral(apply_weak_rhs(np.real(F.data), K),
                                                            F.grid))))
                      for F in (traj.snapshots[0], traj.final))
            out.append(make_check(name, val, tol))
    return out


def cmd_run(config_path: str | Path, root: str | Path | None = None) -> tuple[RunManifest, Path]:
    """Execute one configured run; returns the manifest and the run directory."""
    t_start = time.perf_counter()
    try:
        cfg = ScenarioConfig.load(config_path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {config_path}") from None
    unknown = [c["name"] for c in cfg.verify if c["name"] not in CHECK_DEFAULTS]
    if unknown:
        raise ConfigError(f"verify: unknown checks {unknown}; choose from {sorted(CHECK_DEFAULTS)}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        grid, field, psi0, kernels, traj, _ = _evolve(cfg)
        final = np.real(traj.final.data)
        if not np.all(np.isfinite(final)):
            raise NumericalInstability("non-finite values in the final snapshot")
        checks = _checks(cfg, field, psi0, kernels, traj)
    warn_msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})

    run_dir = run_dir_for(cfg, root)
    run_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=run_dir.parent))
    try:
        manifest = RunManifest(config_hash=cfg.hash())
        (tmp / "config.json").write_text(cfg.to_json())
        manifest.add_artifact(tmp, tmp / "config.json", kind="config")
        snap_dir = tmp / "snapshots"
        snap_dir.mkdir()
        axes = grid_axes(grid)
        for i, (t, F) in enumerate(zip(traj.times, traj.snapshots)):
            b, s = write_array(snap_dir / f"Fs_{i:04d}", np.real(F.data), axes,
                               units="1/(length*momentum)^d",
                               tags={"kind": "F_s", "t": t, "engine": traj.engine,
                                     "momentum": "kinetic", "P_order": "ascending"})
            manifest.add_artifact(tmp, b, F.data.shape, "snapshot")
            manifest.add_artifact(tmp, s, kind="sidecar")
        ts = write_csv(tmp / "timeseries.csv", ["t", "boundary_mass", "norm"],
                       [traj.times, traj.log["boundary_mass"], traj.log["norm"]])
        manifest.add_artifact(tmp, ts, (len(traj.times), 3), "csv")
        diag = {"engine": traj.engine, "n_snapshots": len(traj.times),
                "norm_drift": traj.norm_drift, "times": traj.times,
                "norm": traj.log["norm"], "boundary_mass": traj.log["boundary_mass"],
                "warnings": warn_msgs, "valid": all(c.passed for c in checks)}
        if len(traj.times) >= 3:
            try:
                diag["continuity_residual"] = continuity_residual(traj, field).tolist()
            except ValueError as exc:
                diag["continuity_residual"] = str(exc)
        (tmp / "diagnostics.json").write_text(json.dumps(_finite_json(diag), indent=2,
                                                         sort_keys=True))
        manifest.add_artifact(tmp, tmp / "diagnostics.json", kind="diagnostics")
        for c in checks:
            manifest.add_check(c)
        manifest.wall_time = time.perf_counter() - t_start
        manifest.write(tmp)
        if run_dir.exists():
            shutil.rmtree(run_dir)
        os.replace(tmp, run_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    logger.info("run written to %s", run_dir)
    return manifest, run_dir


def _finite_json(x):
    if isinstance(x, dict):
        return {k: _finite_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_json(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def cmd_verify(suite: str, root: str | Path | None = None) -> tuple[RunManifest, Path]:
    """Run a named suite; writes ``verify/<suite>/{checks.csv,manifest.json}``."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    t_start = time.perf_counter()
    checks = run_suite(suite)
    out_dir = output_root(root) / "verify" / suite
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash=f"suite:{suite}", kind="verify")
    for c in checks:
        manifest.add_check(c)
    path = out_dir / "checks.json"
    path.write_text(json.dumps([c.to_dict() for c in checks], indent=2, sort_keys=True))
    manifest.add_artifact(out_dir, path, (len(checks),), "checks")
    manifest.wall_time = time.perf_counter() - t_start
    manifest.write(out_dir)
    return manifest, out_dir


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _load_run(run_dir: Path):
    if not (run_dir / "manifest.json").is_file() or not (run_dir / "config.json").is_file():
        raise RunNotFound(f"not a completed run directory: {run_dir}")
    cfg = ScenarioConfig.load(run_dir / "config.json")
    snaps = sorted((run_dir / "snapshots").glob("Fs_*.bin"))
    if not snaps:
        raise RunNotFound(f"run has no snapshots: {run_dir}")
    return cfg, snaps


def _snapshot(cfg: ScenarioConfig, path: Path):
    from ..transforms import PhaseSpaceFunction
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = cfg.build_grid()
    return PhaseSpaceFunction(grid, read_array(path), kind="F_s",
                              t=meta["conventions"]["t"])


def cmd_export(run_dir: str | Path, what: str, index: int = -1,
               r0: list[float] | None = None) -> list[Path]:
    """Write CSV + PNG views (or raw arrays) of a completed run into ``exports/``."""
    run_dir = Path(run_dir)
    if what not in EXPORTS:
        raise ConfigError(f"unknown export {what!r}; choose from {EXPORTS}")
    cfg, snaps = _load_run(run_dir)
    manifest = RunManifest.read(run_dir)
    out_dir = run_dir / "exports"
    out_dir.mkdir(exist_ok=True)
    kinds = EXPORTS[:-1] if what == "all" else (what,)
    try:
        snap_path = snaps[index]
    except IndexError:
        raise ConfigError(f"snapshot index {index} out of range ({len(snaps)} snapshots)") from None
    F = _snapshot(cfg, snap_path)
    grid = F.grid
    field = cfg.build_field()
    written: list[Path] = []
    names = "xy"[: grid.dim]
    for kind in kinds:
        if kind == "slice":
            if r0 is None:
                init = cfg.initial.get("gaussian") or cfg.initial["superposition"][0]
                r0 = init["center"]
            idx = tuple(int(np.argmin(np.abs(grid.r - c))) for c in r0)
            sl = np.real(F.data[(slice(None),) * grid.dim + idx])
            if grid.dim == 1:
                cols, head = [grid.P, sl], ["P", "F_s"]
                png = plot_lines(grid.P, [sl], ["F_s"], out_dir / "slice",
                                 "P", "F_s", f"F_s at r={grid.r[idx[0]]:.3g}, t={F.t:.3g}")
            else:
                Px, Py = np.meshgrid(grid.P, grid.P, indexing="ij")
                cols, head = [Px, Py, sl], ["P_x", "P_y", "F_s"]
                png = plot_map(grid.P, grid.P, sl, out_dir / "slice", "P_x", "P_y",
                               f"F_s at r=({grid.r[idx[0]]:.3g}, {grid.r[idx[1]]:.3g})")
            written += [write_csv(out_dir / "slice.csv", head, cols), png]
        elif kind in ("density", "current"):
            vals = [density(F)] if kind == "density" else current_from_Fs(F, field.m)
            labels = ["P"] if kind == "density" else [f"j_{a}" for a in names]
            mesh = np.meshgrid(*([grid.r] * grid.dim), indexing="ij")
            written.append(write_csv(out_dir / f"{kind}.csv", list(names) + labels,
                                     list(mesh) + vals))
            if grid.dim == 1:
                written.append(plot_lines(grid.r, vals, labels, out_dir / kind, "x", kind,
                                          f"{kind} at t={F.t:.3g}"))
            else:
                mag = vals[0] if kind == "density" else np.hypot(*vals)
                written.append(plot_map(grid.r, grid.r, mag, out_dir / kind, "x", "y",
                                        f"{kind} at t={F.t:.3g}", diverging=False))
        elif kind == "timeseries":
            t, bm, norm = [], [], []
            for p in snaps:
                meta = json.loads(p.with_suffix(".json").read_text())
                data = read_array(p)
                t.append(meta["conventions"]["t"])
                norm.append(float(data.sum()) * grid.dV_P * grid.dV_r)
                bm.append(boundary_mass(data, range(2 * grid.dim)))
            written.append(write_csv(out_dir / "timeseries.csv", ["t", "boundary_mass", "norm"],
                                     [t, bm, norm]))
            dev = np.abs(np.asarray(norm) - norm[0]) + 1e-300
            written.append(plot_lines(np.asarray(t), [np.asarray(bm) + 1e-300, dev],
                                      ["boundary mass", "|norm - norm(0)|"],
                                      out_dir / "timeseries", "t", "", logy=True))
        elif kind == "snapshot":
            b, s = write_array(out_dir / f"{snap_path.stem}", np.real(F.data), grid_axes(grid),
                               tags={"kind": "F_s", "t": F.t, "momentum": "kinetic"})
            written += [b, s]
        elif kind == "kernels":
            K = build_kernels(field, grid, order=cfg.quadrature_order)
            for key, k in K.kernels().items():
                b, s = write_array(out_dir / f"kernel_{key}", k, grid_axes(grid),
                                   tags={"kernel": key, "argument": "momentum difference",
                                         "order": cfg.quadrature_order})
                written += [b, s]
    for p in written:
        shape = None
        if p.suffix == ".bin":
            shape = json.loads(p.with_suffix(".json").read_text())["shape"]
        manifest.add_artifact(run_dir, p, shape, f"export:{p.suffix[1:]}")
    manifest.write(run_dir)
    return written
