"""JSON run configuration: parsing, validation with line diagnostics, and echo.

Top-level keys (all physical quantities in units of ``omega1``)::

    scenario     simulate | sweep-lyapunov | sweep-spbar | logic | calibrate-drive
    params       SystemParams fields (omega1, omega2, delta1, delta2, g, E,
                 kappa, gamma, mu, lam, n_b)
    integrator   IntegratorConfig fields (dt, t_end, sample_every, method,
                 rel_tol, abs_tol, overflow_guard)
    lyapunov     LyapunovConfig fields (delta0, renorm_interval, t_transient,
                 t_total, theta0, beta, neutral_tol)
    grid         GridSpec fields (mu_min, mu_max, mu_steps, lambda_min,
                 lambda_max, lambda_steps)
    simulate     theta0, beta, covariance (bool), sp_prefactor, cases
                 (list of {label, mu, lam}; default: the single params point)
    sweep_spbar  T, t_skip, theta0, beta, sp_prefactor
    logic        mu_on, lambda_on (required), gate (AND | OR | XOR), search (bool)
    calibrate    E_values (required, list), default_E
    output_dir, render, workers, note
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .dynamics import IntegratorConfig
from .lyapunov import LyapunovConfig
from .model import DomainError, SystemParams
from .sweep import GridSpec

__all__ = ["ConfigError", "RunConfig", "SCENARIOS", "PRESETS", "load_config", "parse_config",
           "load_preset_text"]

SCENARIOS = ("simulate", "sweep-lyapunov", "sweep-spbar", "logic", "calibrate-drive")
PRESETS = ("fig2", "fig3b", "fig4", "fig5")

_SECTION_DEFAULTS = {
    "simulate": {"theta0": math.pi / 2, "beta": 1.0, "covariance": True, "sp_prefactor": 0.5,
                 "cases": None},
    "sweep_spbar": {"T": 2000.0, "t_skip": 0.0, "theta0": math.pi / 2, "beta": 1.0,
                    "sp_prefactor": 0.5},
    "logic": {"mu_on": None, "lambda_on": None, "gate": "AND", "search": False},
    "calibrate": {"E_values": None, "default_E": 20.0},
}
_TOP_KEYS = {"scenario", "params", "integrator", "lyapunov", "grid", "output_dir", "render",
             "workers", "note", *_SECTION_DEFAULTS}


class ConfigError(ValueError):
    """Invalid configuration document; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class RunConfig:
    scenario: str
    params: SystemParams = field(default_factory=SystemParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    lyapunov: LyapunovConfig = field(default_factory=LyapunovConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    simulate: dict = field(default_factory=lambda: dict(_SECTION_DEFAULTS["simulate"]))
    sweep_spbar: dict = field(default_factory=lambda: dict(_SECTION_DEFAULTS["sweep_spbar"]))
    logic: dict = field(default_factory=lambda: dict(_SECTION_DEFAULTS["logic"]))
    calibrate: dict = field(default_factory=lambda: dict(_SECTION_DEFAULTS["calibrate"]))
    output_dir: str = "optosync-out"
    render: bool = False
    workers: int = 1
    note: str = ""

    def to_dict(self) -> dict:
        """Full effective configuration; ``parse_config`` of its JSON gives this config back."""
        return {
            "scenario": self.scenario,
            "params": self.params.to_dict(),
            "integrator": self.integrator.to_dict(),
            "lyapunov": self.lyapunov.to_dict(),
            "grid": self.grid.to_dict(),
            "simulate": dict(self.simulate),
            "sweep_spbar": dict(self.sweep_spbar),
            "logic": dict(self.logic),
            "calibrate": dict(self.calibrate),
            "output_dir": self.output_dir,
            "render": self.render,
            "workers": self.workers,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _line_of(text: str, path: tuple) -> int | None:
    """Best-effort 1-based line of the key at ``path`` in a JSON document."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if not m:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _build(cls, section: str, data, text):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be an object", _line_of(text, (section,)))
    known = {f.name for f in dataclasses.fields(cls)}
    for k in data:
        if k not in known:
            raise ConfigError(f"unknown field '{section}.{k}' (allowed: {', '.join(sorted(known))})",
                              _line_of(text, (section, k)))
    for k, v in data.items():
        if k not in ("method",) and (isinstance(v, bool) or not isinstance(v, (int, float))):
            raise ConfigError(f"field '{section}.{k}' must be a number, got {v!r}",
                              _line_of(text, (section, k)))
    try:
        return cls(**data)
    except (DomainError, TypeError) as exc:
        bad = next((k for k in data if k in str(exc)), None)
        line = _line_of(text, (section, bad)) if bad else _line_of(text, (section,))
        raise ConfigError(f"section '{section}': {exc}", line) from None


def _section(name, data, text):
    out = dict(_SECTION_DEFAULTS[name])
    if data is None:
        return out
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be an object", _line_of(text, (name,)))
    for k, v in data.items():
        if k not in out:
            raise ConfigError(f"unknown field '{name}.{k}' (allowed: {', '.join(sorted(out))})",
                              _line_of(text, (name, k)))
        out[k] = v
    return out


def _require_number(sec, name, key, text, positive=False, signed=False):
    v = sec[key]
    ok = not isinstance(v, bool) and isinstance(v, (int, float)) and math.isfinite(v)
    if ok and positive:
        ok = v > 0
    elif ok and not signed:
        ok = v >= 0
    if not ok:
        kind = "positive number" if positive else ("number" if signed else "number >= 0")
        raise ConfigError(f"field '{name}.{key}' must be a finite {kind}, got {v!r}",
                          _line_of(text, (name, key)))


def parse_config(text: str, scenario_override: str | None = None) -> RunConfig:
    """Parse and validate a configuration document given as JSON text."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object", 1)
    for k in doc:
        if k not in _TOP_KEYS:
            raise ConfigError(f"unknown top-level field '{k}' (allowed: {', '.join(sorted(_TOP_KEYS))})",
                              _line_of(text, (k,)))
    scenario = scenario_override or doc.get("scenario")
    if not scenario:
        raise ConfigError("missing field 'scenario' (one of: " + ", ".join(SCENARIOS) + ")",
                          _line_of(text, ("scenario",)))
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r} (one of: {', '.join(SCENARIOS)})",
                          _line_of(text, ("scenario",)))

    params = _build(SystemParams, "params", doc.get("params"), text)
    integrator = doc.get("integrator")
    if isinstance(integrator, dict) and "method" in integrator and not isinstance(integrator["method"], str):
        raise ConfigError("field 'integrator.method' must be a string", _line_of(text, ("integrator", "method")))
    integrator = _build(IntegratorConfig, "integrator", integrator, text)
    lyap = _build(LyapunovConfig, "lyapunov", doc.get("lyapunov"), text)
    grid = _build(GridSpec, "grid", doc.get("grid"), text)
    sim = _section("simulate", doc.get("simulate"), text)
    spb = _section("sweep_spbar", doc.get("sweep_spbar"), text)
    logic = _section("logic", doc.get("logic"), text)
    cal = _section("calibrate", doc.get("calibrate"), text)

    # section-level checks
    for key in ("theta0",):
        _require_number(sim, "simulate", key, text, signed=True)
        _require_number(spb, "sweep_spbar", key, text, signed=True)
    for key in ("beta", "sp_prefactor"):
        _require_number(sim, "simulate", key, text, positive=True)
        _require_number(spb, "sweep_spbar", key, text, positive=True)
    _require_number(spb, "sweep_spbar", "T", text, positive=True)
    _require_number(spb, "sweep_spbar", "t_skip", text)
    if not spb["t_skip"] < spb["T"]:
        raise ConfigError("need sweep_spbar.t_skip < sweep_spbar.T", _line_of(text, ("sweep_spbar", "t_skip")))
    if not isinstance(sim["covariance"], bool):
        raise ConfigError("field 'simulate.covariance' must be true or false",
                          _line_of(text, ("simulate", "covariance")))
    if sim["cases"] is not None:
        if not isinstance(sim["cases"], list) or not sim["cases"]:
            raise ConfigError("field 'simulate.cases' must be a non-empty list",
                              _line_of(text, ("simulate", "cases")))
        cases = []
        for n, c in enumerate(sim["cases"]):
            if not isinstance(c, dict) or set(c) - {"label", "mu", "lam"} or not {"mu", "lam"} <= set(c):
                raise ConfigError(f"simulate.cases[{n}] needs exactly 'mu', 'lam' and optional 'label'",
                                  _line_of(text, ("simulate", "cases")))
            try:
                params.replace(mu=c["mu"], lam=c["lam"])
            except DomainError as exc:
                raise ConfigError(f"simulate.cases[{n}]: {exc}", _line_of(text, ("simulate", "cases"))) from None
            cases.append({"label": str(c.get("label", f"case{n}")), "mu": float(c["mu"]),
                          "lam": float(c["lam"])})
        sim["cases"] = cases
    if scenario == "logic":
        for key in ("mu_on", "lambda_on"):
            if logic[key] is None:
                raise ConfigError(f"missing field 'logic.{key}' for scenario 'logic'",
                                  _line_of(text, ("logic",)))
            _require_number(logic, "logic", key, text)
    if not isinstance(logic["gate"], str) or logic["gate"].upper() not in ("AND", "OR", "XOR"):
        raise ConfigError("field 'logic.gate' must be AND, OR or XOR", _line_of(text, ("logic", "gate")))
    logic["gate"] = logic["gate"].upper()
    if not isinstance(logic["search"], bool):
        raise ConfigError("field 'logic.search' must be true or false", _line_of(text, ("logic", "search")))
    if scenario == "calibrate-drive":
        ev = cal["E_values"]
        if ev is None:
            raise ConfigError("missing field 'calibrate.E_values' for scenario 'calibrate-drive'",
                              _line_of(text, ("calibrate",)))
        if not isinstance(ev, list) or not ev or any(
                isinstance(e, bool) or not isinstance(e, (int, float)) or not math.isfinite(e) or e < 0
                for e in ev):
            raise ConfigError("field 'calibrate.E_values' must be a non-empty list of numbers >= 0",
                              _line_of(text, ("calibrate", "E_values")))
        cal["E_values"] = [float(e) for e in ev]
    _require_number(cal, "calibrate", "default_E", text)

    output_dir = doc.get("output_dir", "optosync-out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("field 'output_dir' must be a non-empty string", _line_of(text, ("output_dir",)))
    render = doc.get("render", False)
    if not isinstance(render, bool):
        raise ConfigError("field 'render' must be true or false", _line_of(text, ("render",)))
    workers = doc.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("field 'workers' must be an integer >= 1", _line_of(text, ("workers",)))
    note = doc.get("note", "")
    if not isinstance(note, str):
        raise ConfigError("field 'note' must be a string", _line_of(text, ("note",)))
    return RunConfig(scenario=scenario, params=params, integrator=integrator, lyapunov=lyap,
                     grid=grid, simulate=sim, sweep_spbar=spb, logic=logic, calibrate=cal,
                     output_dir=output_dir, render=render, workers=workers, note=note)


def load_preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r} (available: {', '.join(PRESETS)})")
    return resources.files("optosync.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")


def load_config(path_or_preset: str, scenario_override: str | None = None) -> RunConfig:
    """Load a config file, or a packaged preset by name (fig2, fig3b, fig4, fig5)."""
    p = Path(path_or_preset)
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    elif path_or_preset in PRESETS:
        text = load_preset_text(path_or_preset)
    else:
        raise ConfigError(f"config file not found: {path_or_preset}")
    return parse_config(text, scenario_override)
