"""Batch front end: ``optosync <scenario> --config <path|preset> [--output DIR] [--render] [--workers N]``.

Exit status: 0 success, 2 configuration error, 3 runtime divergence (partial
artifacts and ``failed_cells.json`` are still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import PRESETS, SCENARIOS, ConfigError, RunConfig, load_config
from .dynamics import attractor_report, evolve
from .lyapunov import classify_logic
from .measures import measure_series, time_average
from .model import MeanState, vacuum_covariance
from .svg import render_heatmap, render_series
from .sweep import find_logic_regions, sweep_lyapunov, sweep_sp_bar

__all__ = ["main", "run", "EXIT_OK", "EXIT_CONFIG", "EXIT_DIVERGENCE"]

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 2, 3

log = logging.getLogger("optosync")


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.artifacts: list[str] = []
        self.failed: list[dict] = []

    def path(self, name) -> Path:
        p = self.out / name
        self.artifacts.append(name)
        return p

    def svg(self, name, doc):
        if self.cfg.render:
            self.path(name).write_text(doc, encoding="utf-8")

    def echo(self):
        return self.cfg.to_dict()


def _simulate(r: _Run):
    cfg = r.cfg
    sim = cfg.simulate
    cases = sim["cases"] or [{"label": "run", "mu": cfg.params.mu, "lam": cfg.params.lam}]
    init = MeanState.initial(sim["theta0"], sim["beta"])
    summary = []
    for case in cases:
        params = cfg.params.replace(mu=case["mu"], lam=case["lam"])
        cov0 = vacuum_covariance() if sim["covariance"] else None
        traj = evolve(params, init, cov0, cfg.integrator)
        label = case["label"]
        io.write_trajectory_csv(r.path(f"{label}_trajectory.csv"), traj)
        entry = {"label": label, "mu": case["mu"], "lam": case["lam"],
                 "terminated_early": traj.terminated_early, "reason": traj.reason,
                 "samples": len(traj)}
        if len(traj) >= 2:
            ms = measure_series(traj, sp_prefactor=sim["sp_prefactor"])
            io.write_measures_csv(r.path(f"{label}_measures.csv"), ms)
            tail = ms.times >= ms.times[-1] - 0.1 * (ms.times[-1] - ms.times[0])
            theta_mod = np.angle(np.exp(1j * ms.theta))
            entry.update(theta_final=float(ms.theta[-1]),
                         theta_final_wrapped=float(theta_mod[-1]),
                         theta_tail_max_abs=float(np.max(np.abs(ms.theta[tail]))),
                         theta_tail_ptp=float(np.ptp(ms.theta[tail])))
            if sim["covariance"]:
                entry["sp_bar"] = time_average(ms.times, ms.sp_prime)
                entry["sc_prime_final"] = float(ms.sc_prime[-1])
            r.svg(f"{label}_theta.svg",
                  render_series(ms.times, {"theta / pi": ms.theta / math.pi},
                                title=f"phase error, mu={case['mu']:g}, lambda={case['lam']:g}"))
            if sim["covariance"]:
                r.svg(f"{label}_measures.svg",
                      render_series(ms.times, {"S_c'": ms.sc_prime, "S_p'": ms.sp_prime},
                                    title=f"synchronization measures, mu={case['mu']:g}, lambda={case['lam']:g}"))
        if traj.terminated_early:
            r.failed.append({"label": label, "mu": case["mu"], "lam": case["lam"], "reason": traj.reason})
        summary.append(entry)
    io.write_json(r.path("simulate.json"), {"cases": summary, "config": r.echo(),
                                            "tool_version": io.tool_version()})


def _sweep_lyap(r: _Run):
    cfg = r.cfg
    field = sweep_lyapunov(cfg.params, cfg.grid, cfg.lyapunov, cfg.integrator, workers=cfg.workers)
    for name in io.write_sweep(r.out / "lyapunov", field, r.echo()):
        r.artifacts.append(name.name)
    r.svg("lyapunov_sign.svg", render_heatmap(field, "sign", "largest Lyapunov exponent: sign"))
    r.svg("lyapunov.svg", render_heatmap(field, "continuous", "largest Lyapunov exponent"))
    r.failed += [{"mu": m, "lam": l} for m, l in field.failed_cells()]
    return field


def _sweep_spbar(r: _Run):
    cfg = r.cfg
    s = cfg.sweep_spbar
    field = sweep_sp_bar(cfg.params, cfg.grid, T=s["T"], integrator=cfg.integrator,
                         workers=cfg.workers, theta0=s["theta0"], beta=s["beta"],
                         sp_prefactor=s["sp_prefactor"], t_skip=s["t_skip"])
    for name in io.write_sweep(r.out / "sp_bar", field, r.echo()):
        r.artifacts.append(name.name)
    r.svg("sp_bar.svg", render_heatmap(field, "continuous", "time-averaged S_p'"))
    r.failed += [{"mu": m, "lam": l} for m, l in field.failed_cells()]


def _logic(r: _Run):
    cfg = r.cfg
    lg = cfg.logic
    res = classify_logic(cfg.params, lg["mu_on"], lg["lambda_on"], cfg.lyapunov, cfg.integrator)
    for (mu, lam), lr in zip(res.corners, res.results):
        io.write_json(r.path(f"lyapunov_mu{mu:g}_lam{lam:g}.json"),
                      {**lr.to_dict(), "mu": mu, "lam": lam, "config": r.echo()})
        if lr.classification == "divergent":
            r.failed.append({"mu": mu, "lam": lam})
    report = {"truth_table": res.to_dict(), "requested_gate": lg["gate"],
              "matches_requested": res.gate == lg["gate"], "config": r.echo(),
              "tool_version": io.tool_version()}
    if lg["search"]:
        field = _sweep_lyap(r)
        cells = find_logic_regions(field, lg["gate"])
        report["region"] = {
            "gate": lg["gate"], "cells": cells,
            "bounds": None if not cells else {
                "mu": [min(c[0] for c in cells), max(c[0] for c in cells)],
                "lambda": [min(c[1] for c in cells), max(c[1] for c in cells)]},
        }
    io.write_json(r.path("logic.json"), report)


def _calibrate(r: _Run):
    cfg = r.cfg
    cal = cfg.calibrate
    entries = [attractor_report(cfg.params.replace(E=E), cfg.integrator) for E in cal["E_values"]]

    def usable(e):
        return e["bounded"] and e["attractor"] == "limit-cycle"

    default = cal["default_E"]
    ok = [e for e in entries if usable(e)]
    exact = [e for e in ok if e["E"] == default]
    chosen = exact[0] if exact else (min(ok, key=lambda e: abs(e["E"] - default)) if ok else None)
    for e in entries:
        e["chosen"] = e is chosen
    io.write_json(r.path("calibrate.json"), {
        "default_E": default,
        "chosen_E": None if chosen is None else chosen["E"],
        "default_is_usable": bool(exact),
        "entries": entries,
        "criterion": "bounded mean field with a limit-cycle attractor for both systems",
        "config": r.echo(), "tool_version": io.tool_version()})


_HANDLERS = {"simulate": _simulate, "sweep-lyapunov": _sweep_lyap, "sweep-spbar": _sweep_spbar,
             "logic": _logic, "calibrate-drive": _calibrate}


def run(cfg: RunConfig) -> int:
    """Execute a validated configuration; returns the exit status."""
    r = _Run(cfg)
    r.out.mkdir(parents=True, exist_ok=True)
    io.write_json(r.path("config.json"), cfg.to_dict())
    _HANDLERS[cfg.scenario](r)
    status = EXIT_DIVERGENCE if r.failed else EXIT_OK
    if r.failed:
        io.write_json(r.path("failed_cells.json"), {"failed": r.failed, "config": cfg.to_dict()})
        log.error("%d run(s) diverged; see %s", len(r.failed), r.out / "failed_cells.json")
    io.write_json(r.out / "manifest.json", {"scenario": cfg.scenario, "exit_status": status,
                                            "artifacts": sorted(set(r.artifacts)),
                                            "tool_version": io.tool_version()})
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="optosync", description=__doc__.splitlines()[0])
    ap.add_argument("scenario", nargs="?", choices=SCENARIOS,
                    help="scenario to run; overrides the 'scenario' field of the config")
    ap.add_argument("--config", required=True,
                    help=f"JSON config file or a packaged preset ({', '.join(PRESETS)})")
    ap.add_argument("--output", help="output directory (overrides 'output_dir')")
    ap.add_argument("--render", action="store_true", help="also write SVG figures")
    ap.add_argument("--workers", type=int, help="worker processes for sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="optosync: %(message)s")
    try:
        cfg = load_config(args.config, args.scenario)
        changes = {}
        if args.output:
            changes["output_dir"] = args.output
        if args.render:
            changes["render"] = True
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            changes["workers"] = args.workers
        cfg = dataclasses.replace(cfg, **changes)
    except ConfigError as exc:
        print(f"optosync: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s into %s", cfg.scenario, cfg.output_dir)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
