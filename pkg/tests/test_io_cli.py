import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from optosync import io
from optosync.cli import EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_OK, main
from optosync.config import PRESETS, ConfigError, load_config, parse_config
from optosync.dynamics import IntegratorConfig, evolve
from optosync.measures import measure_series
from optosync.model import MeanState, SystemParams, vacuum_covariance
from optosync.svg import SIGN_COLORS, render_heatmap, render_series
from optosync.sweep import GridSpec, SweepField


def field_of(cls, values=None, status=None):
    cls = np.array(cls, dtype=object)
    nm, nl = cls.shape
    g = GridSpec(0.0, 0.01 if nm > 1 else 0.0, nm, 0.0, 0.2 if nl > 1 else 0.0, nl)
    vals = np.where(cls == "sync", -0.01, 0.01) if values is None else np.asarray(values, float)
    st = np.full(cls.shape, "ok", dtype=object) if status is None else np.array(status, dtype=object)
    return SweepField(grid=g, values=vals, kind="lyapunov", status=st, stderr=np.zeros(cls.shape),
                      classification=cls)


def assert_standalone_svg(doc):
    root = ET.fromstring(doc.encode("utf-8"))
    assert root.tag == "{http://www.w3.org/2000/svg}svg" and root.get("version") == "1.1"
    assert "href" not in doc and "http://" not in doc.replace('xmlns="http://www.w3.org/2000/svg"', "")
    return root


def fills(root):
    return [e.get("fill") for e in root.iter("{http://www.w3.org/2000/svg}rect")]


def test_trajectory_csv_roundtrip(tmp_path):
    traj = evolve(SystemParams.fig2(mu=0.004, lam=0.16), MeanState.initial(1.0), vacuum_covariance(),
                  IntegratorConfig(t_end=5.0, sample_every=100))
    path = io.write_trajectory_csv(tmp_path / "t.csv", traj)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:9] == list(io.TRAJECTORY_MEAN_COLUMNS) and len(header) == 9 + 36
    assert header[9] == "C_0_0" and header[-1] == "C_7_7"
    t, z, C = io.read_trajectory_csv(path)
    assert np.array_equal(t, traj.times) and np.array_equal(z, traj.means)
    assert np.array_equal(C, traj.covs)


def test_trajectory_csv_without_cov(tmp_path):
    traj = evolve(SystemParams.fig2(), MeanState.initial(), None, IntegratorConfig(t_end=1.0, sample_every=50))
    t, z, C = io.read_trajectory_csv(io.write_trajectory_csv(tmp_path / "t.csv", traj))
    assert C is None and np.array_equal(z, traj.means)


def test_measures_csv(tmp_path):
    traj = evolve(SystemParams.fig2(), MeanState.initial(1.0), vacuum_covariance(),
                  IntegratorConfig(t_end=2.0, sample_every=100))
    path = io.write_measures_csv(tmp_path / "m.csv", measure_series(traj))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,theta,sc_prime,sp_prime,mean_q_minus,mean_p_minus"
    assert len(lines) == len(traj.times) + 1


def test_sweep_export(tmp_path):
    f = field_of([["no-sync", "sync"], ["sync", "sync"]], status=[["ok", "ok"], ["divergent", "ok"]])
    f.values[1, 0] = math.nan
    c, j = io.write_sweep(tmp_path / "s", f, {"scenario": "x"})
    mu, lam, val, status = io.read_sweep_csv(c)
    assert list(mu) == [0.0, 0.0, 0.01, 0.01] and list(lam) == [0.0, 0.2, 0.0, 0.2]
    assert status == ["ok", "ok", "divergent", "ok"] and math.isnan(val[2])
    head = json.loads(j.read_text())
    assert head["grid"]["mu_steps"] == 2 and head["config"] == {"scenario": "x"}
    assert head["failed_cells"] == [[0.01, 0.0]] and "tool_version" in head


def test_heatmap_sign_all_negative():
    f = field_of([["sync"] * 3] * 2)
    root = assert_standalone_svg(render_heatmap(f, "sign"))
    cells = [x for x in fills(root) if x in SIGN_COLORS.values()]
    assert cells.count(SIGN_COLORS["negative"]) == 6 + 1  # six cells plus the legend swatch
    assert cells.count(SIGN_COLORS["positive"]) == 1


def test_heatmap_single_cell_and_hatching():
    f = field_of([["no-sync"]], status=[["divergent"]])
    doc = render_heatmap(f, "continuous")
    root = assert_standalone_svg(doc)
    assert "url(#hatch)" in fills(root)
    assert "μ" in doc and "λ" in doc
    doc = render_heatmap(field_of([["marginal"]], status=[["marginal"]]), "sign")
    assert SIGN_COLORS["marginal"] in doc


def test_heatmap_continuous_colorbar():
    f = field_of([["sync", "no-sync"], ["no-sync", "sync"]], values=[[-1, 0], [1, 2]])
    root = assert_standalone_svg(render_heatmap(f, "continuous"))
    texts = [e.text for e in root.iter("{http://www.w3.org/2000/svg}text")]
    assert "2" in texts and "-1" in texts


def test_series_svg():
    t = np.linspace(0, 10, 50)
    assert_standalone_svg(render_series(t, {"a": np.sin(t), "b <&>": np.cos(t)}, title="x & y"))


def test_presets_parse_and_roundtrip():
    for name in PRESETS:
        cfg = load_config(name)
        assert "calibrated" in cfg.note
        assert parse_config(cfg.to_json()).to_dict() == cfg.to_dict()
    fig5 = load_config("fig5")
    assert [(c["mu"], c["lam"]) for c in fig5.simulate["cases"]] == [
        (0.0, 0.0), (0.0, 0.16), (0.004, 0.0), (0.004, 0.16)]
    assert fig5.simulate["theta0"] == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("text,needle,line", [
    ('{\n  "scenario": ""\n}', "missing field 'scenario'", 2),
    ('{\n  "params": {}\n}', "missing field 'scenario'", None),
    ('{\n  "scenario": "simulate",\n  "params": {\n    "kappa": -1\n  }\n}', "kappa", 4),
    ('{\n  "scenario": "simulate",\n  "paramz": {}\n}', "unknown top-level field 'paramz'", 3),
    ('{\n  "scenario": "logic"\n}', "logic.mu_on", None),
    ('{\n  "scenario": "simulate",\n  "workers": 0\n}', "workers", 3),
    ('{\n  "scenario": "simulate",\n  "grid": {"mu_steps": "a"}\n}', "grid.mu_steps", 3),
    ('{\n  "scenario": "simulate",,\n}', "invalid JSON", 2),
])
def test_config_errors(text, needle, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)
    if line is not None:
        assert exc.value.line == line


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "scenario": ""\n}')
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert "scenario" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG

    cfg = {"scenario": "simulate", "integrator": {"t_end": 20.0, "sample_every": 50},
           "simulate": {"theta0": 1.0}}
    good = tmp_path / "good.json"
    good.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(good), "--output", str(out), "--render"]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"config.json", "manifest.json", "simulate.json", "run_trajectory.csv",
            "run_measures.csv", "run_theta.svg"} <= names
    echoed = (out / "config.json").read_text()
    again = parse_config(echoed)
    assert again.to_dict() == json.loads(echoed)
    assert again.render and again.output_dir == str(out)

    div = dict(cfg, integrator={"t_end": 300.0, "overflow_guard": 50.0})
    divp = tmp_path / "div.json"
    divp.write_text(json.dumps(div))
    out2 = tmp_path / "out2"
    assert main(["--config", str(divp), "--output", str(out2)]) == EXIT_DIVERGENCE
    failed = json.loads((out2 / "failed_cells.json").read_text())
    assert failed["failed"][0]["reason"].startswith("divergence at t=")
    assert (out2 / "run_trajectory.csv").exists()


def test_cli_sweep_divergence_manifest(tmp_path):
    cfg = {"scenario": "sweep-lyapunov", "integrator": {"overflow_guard": 50.0},
           "lyapunov": {"t_transient": 10.0, "t_total": 200.0},
           "grid": {"mu_min": 0.0, "mu_max": 0.004, "mu_steps": 2,
                    "lambda_min": 0.0, "lambda_max": 0.0, "lambda_steps": 1},
           "output_dir": str(tmp_path / "o"), "render": True}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["--config", str(p)]) == EXIT_DIVERGENCE
    failed = json.loads((tmp_path / "o" / "failed_cells.json").read_text())["failed"]
    assert len(failed) == 2
    assert (tmp_path / "o" / "lyapunov.csv").exists()
    ET.parse(tmp_path / "o" / "lyapunov_sign.svg")


def test_cli_calibrate(tmp_path):
    cfg = {"scenario": "calibrate-drive", "calibrate": {"E_values": [5.0, 20.0], "default_E": 20.0},
           "integrator": {"t_end": 2000.0}, "output_dir": str(tmp_path / "c")}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["--config", str(p)]) == EXIT_OK
    rep = json.loads((tmp_path / "c" / "calibrate.json").read_text())
    assert rep["chosen_E"] == 20.0 and rep["default_is_usable"]
    by_e = {e["E"]: e for e in rep["entries"]}
    assert by_e[20.0]["chosen"] and by_e[20.0]["attractor"] == "limit-cycle"
    assert not by_e[5.0]["chosen"]
    assert all(set(e) >= {"bounded", "divergent", "chaotic"} for e in rep["entries"])


def test_cli_logic(tmp_path):
    cfg = {"scenario": "logic", "logic": {"mu_on": 0.004, "lambda_on": 0.16},
           "output_dir": str(tmp_path / "l")}
    p = tmp_path / "l.json"
    p.write_text(json.dumps(cfg))
    assert main(["--config", str(p)]) == EXIT_OK
    rep = json.loads((tmp_path / "l" / "logic.json").read_text())
    assert rep["truth_table"]["gate"] == "AND" and rep["matches_requested"]
    lj = json.loads((tmp_path / "l" / "lyapunov_mu0.004_lam0.16.json").read_text())
    assert lj["classification"] == "sync" and "config" in lj
