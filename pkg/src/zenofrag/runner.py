"""Experiment execution: single runs, tau sweeps, CSV/manifest output.

A run executes build -> initial state -> evolve -> analysis and writes

* ``survival.csv``      (t_fs, P)
* ``populations.csv``   (t_fs, live_<ch>..., absorbed_<ch>..., depleted_<ch>...)
* ``rates.csv``         (tau_fs, gamma_cm1, lifetime_ps, rmse, model, seed, status)
* ``spectral.csv``      (omega_au, g_au), when spectral analysis is enabled
* ``manifest.json``     resolved config + seeds + unit constants + version

plus PNG figures and gnuplot scripts unless plots are disabled.  Floats are
written with shortest round-trip formatting, so re-running from the manifest
reproduces every CSV byte for byte.  Sweeps run one simulation per tau plus a
free run; workers are independent, and rows are assembled in sorted order so
serial and parallel execution give identical files.
"""

from __future__ import annotations

import concurrent.futures
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, plots
from .analysis import (
    DecayFit,
    default_fit_window,
    fit_exponential,
    spectral_density,
    survival_series,
)
from .config import RunConfig
from .model import initial_quasibound_state
from .propagate import Trajectory, evolve
from .units import (
    AMU_TO_ME,
    ANGSTROM_TO_BOHR,
    CM1_TO_HARTREE,
    FS_TO_AU,
    hartree_to_cm1,
)

UNIT_CONSTANTS = {
    "fs_to_au_time": FS_TO_AU,
    "cm1_to_hartree": CM1_TO_HARTREE,
    "angstrom_to_bohr": ANGSTROM_TO_BOHR,
    "amu_to_electron_mass": AMU_TO_ME,
}

RATES_HEADER = "tau_fs,gamma_cm1,lifetime_ps,rmse,model,seed,status"


def _fmt(value) -> str:
    return repr(float(value))


@dataclass
class OutputBundle:
    out_dir: Path
    manifest_path: Path
    csv_paths: dict
    figure_paths: dict
    trajectory: Trajectory
    fit: Optional[DecayFit]
    warnings: list = field(default_factory=list)
    status: str = "ok"


def _model_name(config: RunConfig) -> str:
    if config.schedule is None:
        return "free"
    return config.schedule.kind


def _write_csv(path: Path, header: str, rows) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(",".join(row) + "\n")
    return path


def write_survival_csv(path: Path, trajectory: Trajectory) -> Path:
    t_fs = trajectory.times / FS_TO_AU
    p = np.abs(trajectory.survival_amps) ** 2
    rows = ([_fmt(t), _fmt(v)] for t, v in zip(t_fs, p))
    return _write_csv(path, "t_fs,P", rows)


def write_populations_csv(path: Path, trajectory: Trajectory) -> Path:
    labels = trajectory.labels
    header = "t_fs," + ",".join(
        [f"live_{ch}" for ch in labels]
        + [f"absorbed_{ch}" for ch in labels]
        + [f"depleted_{ch}" for ch in labels]
    )
    t_fs = trajectory.times / FS_TO_AU
    blocks = np.hstack([trajectory.populations, trajectory.absorbed,
                        trajectory.depleted])
    rows = ([_fmt(t)] + [_fmt(v) for v in row] for t, row in zip(t_fs, blocks))
    return _write_csv(path, header, rows)


def write_spectral_csv(path: Path, density) -> Path:
    rows = ([_fmt(w), _fmt(g)] for w, g in zip(density.omegas, density.g))
    return _write_csv(path, "omega_au,g_au", rows)


def _rates_row(tau_fs, fit: Optional[DecayFit], model: str, seed,
               status: str = "ok") -> list[str]:
    return [
        _fmt(tau_fs) if tau_fs is not None else "",
        _fmt(fit.gamma_cm1) if fit else "",
        _fmt(fit.lifetime_ps) if fit else "",
        _fmt(fit.rmse) if fit else "",
        model,
        str(seed) if seed is not None else "",
        status,
    ]


def run_experiment(config: RunConfig, out_dir=None) -> OutputBundle:
    """Execute one experiment and write its output bundle.

    Fit problems are reported as warnings in the manifest and in the bundle;
    the propagation itself failing raises after the manifest is written.
    """
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    notes: list[str] = []
    csv_paths: dict = {}
    figure_paths: dict = {}

    system = config.build_system()
    wp0 = initial_quasibound_state(system, config.initial_level)

    try:
        trajectory = evolve(wp0, system, config.propagation, schedule=config.schedule)
    except Exception as exc:
        _write_manifest(out / "manifest.json", config, seeds=_seeds(config),
                        results={"error": str(exc)}, outputs=[],
                        warnings_list=notes, status="failed")
        raise

    csv_paths["survival"] = write_survival_csv(out / "survival.csv", trajectory)
    csv_paths["populations"] = write_populations_csv(out / "populations.csv", trajectory)

    series = survival_series(trajectory)
    fit = None
    window = config.fit_window or default_fit_window(series)
    try:
        fit = fit_exponential(series, window)
        if fit.rmse > 1e-2:
            notes.append(f"exponential fit rmse {fit.rmse:.3e} exceeds 1e-2")
    except ValueError as exc:
        notes.append(f"exponential fit failed: {exc}")

    seed = config.schedule.seed if config.schedule else None
    tau_fs = config.schedule.tau / FS_TO_AU if config.schedule else None
    csv_paths["rates"] = _write_csv(
        out / "rates.csv", RATES_HEADER,
        [_rates_row(tau_fs, fit, _model_name(config), seed)],
    )

    density = None
    if config.spectral and system.couplings:
        try:
            density = spectral_density(system, wp0, n_points=config.omega_points)
            csv_paths["spectral"] = write_spectral_csv(out / "spectral.csv", density)
        except ValueError as exc:
            notes.append(f"spectral density skipped: {exc}")

    if config.plots:
        t_fs = trajectory.times / FS_TO_AU
        p = np.abs(trajectory.survival_amps) ** 2
        figure_paths["survival"] = plots.survival_figure(
            t_fs, p, out / "survival.png", fit=fit)
        acc = {f"live {ch}": trajectory.populations[:, i]
               for i, ch in enumerate(trajectory.labels)}
        for i, ch in enumerate(trajectory.labels):
            acc[f"absorbed {ch}"] = trajectory.absorbed[:, i]
        dep_tot = trajectory.depleted.sum(axis=1)
        if dep_tot[-1] > 0:
            acc["depleted (all)"] = dep_tot
        figure_paths["populations"] = plots.populations_figure(
            t_fs, acc, out / "populations.png")
        if density is not None:
            figure_paths["spectral"] = plots.spectral_figure(
                density.omegas / CM1_TO_HARTREE,
                density.g,
                density.omega_b / CM1_TO_HARTREE,
                out / "spectral.png",
            )
        plots.write_survival_gnuplot(out / "survival.gp")

    results = {}
    if fit is not None:
        results = {
            "gamma_cm1": fit.gamma_cm1,
            "lifetime_ps": fit.lifetime_ps,
            "fit_rmse": fit.rmse,
            "fit_window_fs": [fit.fit_window[0] / FS_TO_AU,
                              fit.fit_window[1] / FS_TO_AU],
        }
    if density is not None:
        results["omega_b_au"] = density.omega_b
        results["golden_rule_gamma_cm1"] = hartree_to_cm1(
            2.0 * np.pi * density.at(density.omega_b))
    results["final_accounted_probability"] = float(trajectory.accounted_totals()[-1])
    results["n_measurements"] = trajectory.n_measurements

    manifest = _write_manifest(
        out / "manifest.json", config, seeds=_seeds(config), results=results,
        outputs=sorted(str(p.name) for p in
                       list(csv_paths.values()) + list(figure_paths.values())),
        warnings_list=notes, status="ok" if not notes else "warnings",
    )
    return OutputBundle(
        out_dir=out, manifest_path=manifest, csv_paths=csv_paths,
        figure_paths=figure_paths, trajectory=trajectory, fit=fit,
        warnings=notes, status="ok" if not notes else "warnings",
    )


def _seeds(config: RunConfig) -> dict:
    if config.schedule is not None:
        return {"measurement": config.schedule.seed}
    block = config.resolved.get("measurement") or {}
    return {"measurement": block.get("seed")}


def _write_manifest(path: Path, config: RunConfig, seeds, results, outputs,
                    warnings_list=None, status="ok") -> Path:
    document = {
        "tool": "zenofrag",
        "version": __version__,
        "status": status,
        "units": UNIT_CONSTANTS,
        "seeds": seeds,
        "config": config.resolved,
        "results": results,
        "outputs": outputs,
        "warnings": warnings_list or [],
    }
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _tau_dir_name(tau_fs: Optional[float]) -> str:
    if tau_fs is None:
        return "free"
    return f"tau_{tau_fs:g}fs"


def _sweep_worker(args):
    config, tau_au, out_dir = args
    tau_fs = tau_au / FS_TO_AU if tau_au is not None else None
    sub = config.with_overrides(
        out_dir=out_dir,
        tau=tau_au if tau_au is not None else None,
        measurement_off=tau_au is None,
    )
    try:
        bundle = run_experiment(sub)
        fit = bundle.fit
        seed = sub.schedule.seed if sub.schedule else None
        trajectory = bundle.trajectory
        return {
            "tau_fs": tau_fs,
            "row": _rates_row(tau_fs, fit, _model_name(sub), seed),
            "t_fs": (trajectory.times / FS_TO_AU).tolist(),
            "survival": (np.abs(trajectory.survival_amps) ** 2).tolist(),
            "gamma_cm1": fit.gamma_cm1 if fit else None,
        }
    except Exception as exc:  # the row records the failure, the sweep goes on
        model = "free" if tau_au is None else (config.schedule.kind
                                               if config.schedule else "?")
        return {
            "tau_fs": tau_fs,
            "row": _rates_row(tau_fs, None, model, None, status=f"failed: {exc}"),
            "t_fs": None,
            "survival": None,
            "gamma_cm1": None,
        }


@dataclass
class SweepResult:
    out_dir: Path
    rates_path: Path
    rows: list
    gamma_free_cm1: Optional[float]
    figure_paths: dict
    warnings: list


def sweep_tau(config: RunConfig, tau_list=None, threads: int = 1,
              out_dir=None) -> SweepResult:
    """One run per tau plus one free run; rows sorted by tau ascending with
    the free row first.  Serial and parallel execution write identical bytes.
    """
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    notes: list[str] = []

    taus = list(tau_list) if tau_list is not None else list(config.tau_list)
    if config.schedule is None and taus:
        block = (config.resolved.get("measurement") or {})
        if not block.get("kind"):
            raise ValueError("sweep needs a measurement block to define the "
                             "measurement kind and targets")
    unique = sorted(set(taus))
    if len(unique) != len(taus):
        dupes = sorted({t for t in taus if taus.count(t) > 1})
        notes.append(
            "duplicate tau values deduplicated: "
            + ", ".join(f"{t / FS_TO_AU:g} fs" for t in dupes)
        )
        warnings.warn(notes[-1], stacklevel=2)

    jobs = [(config, None, str(out / _tau_dir_name(None)))]
    jobs += [(config, tau, str(out / _tau_dir_name(tau / FS_TO_AU)))
             for tau in unique]

    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_sweep_worker, jobs))
    else:
        outcomes = [_sweep_worker(job) for job in jobs]

    outcomes.sort(key=lambda o: (o["tau_fs"] is not None, o["tau_fs"] or 0.0))
    rows = [o["row"] for o in outcomes]
    rates_path = _write_csv(out / "rates.csv", RATES_HEADER, rows)

    gamma_free = outcomes[0]["gamma_cm1"] if outcomes else None
    figure_paths = {}
    if config.plots:
        measured = [o for o in outcomes[1:] if o["gamma_cm1"] is not None]
        if measured:
            figure_paths["rates"] = plots.rates_figure(
                [o["tau_fs"] for o in measured],
                [o["gamma_cm1"] for o in measured],
                gamma_free,
                out / "rates.png",
            )
        curves = [(_tau_dir_name(o["tau_fs"]), o["t_fs"], o["survival"])
                  for o in outcomes if o["t_fs"] is not None]
        if curves:
            figure_paths["survival_overlay"] = plots.survival_overlay_figure(
                curves, out / "survival_overlay.png")
        plots.write_rates_gnuplot(out / "rates.gp")

    return SweepResult(out_dir=out, rates_path=rates_path, rows=rows,
                       gamma_free_cm1=gamma_free, figure_paths=figure_paths,
                       warnings=notes)
