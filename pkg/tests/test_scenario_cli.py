import csv
import json
import math
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from heatline import cli
from heatline.errors import ConfigurationError, CutoffError
from heatline.heat import ProtocolInstance, swap_unitary, tpm_distribution
from heatline.operators import HermitianOperator, basis_state
from heatline.scenario import THETA_HEADER, emit, parse_scenario, run_scenario

SCENARIOS = resources.files("heatline") / "scenarios"

IDENTITY = {
    "mode": "exact",
    "reservoir": {"hamiltonian": [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.5]], "beta": 0.5},
    "system_state": "plus",
    "protocol": "identity",
}


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def read_rows(path):
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


def test_golden_minimal_scenario_defaults():
    config = parse_scenario(SCENARIOS / "minimal_swap.json")
    assert config.mode == "exact"
    assert config.gap_cluster_tol == 1e-9
    assert config.tail_tolerance == 1e-6
    assert config.time_grid == "auto"
    assert config.outputs == ("theta_samples", "distribution", "moments", "landauer")
    assert config.gate_order == "caption"


def test_negative_beta_names_field(tmp_path):
    doc = json.loads((SCENARIOS / "minimal_swap.json").read_text())
    doc["reservoir"]["beta"] = -1
    path = write(tmp_path, doc)
    with pytest.raises(ConfigurationError, match=r"reservoir\.beta") as info:
        parse_scenario(path)
    line = next(i for i, l in enumerate(path.read_text().splitlines(), 1) if '"beta"' in l)
    assert f"{path}:{line}:" in str(info.value)


@pytest.mark.parametrize("mutate, needle", [
    (lambda d: d["reservoir"].update(hamiltonian=[[0, 1], [0, 0]]), "reservoir.hamiltonian"),
    (lambda d: d.update(protocol={"matrix": [[1, 1], [0, 1]]}), "protocol.matrix"),
    (lambda d: d.update(protocol={"matrix": np.eye(3).tolist()}), "protocol.matrix"),
    (lambda d: d.update(mode="shots"), "shots"),
    (lambda d: d.pop("reservoir"), "reservoir"),
    (lambda d: d.update(colour="blue"), "colour"),
    (lambda d: d.update(outputs=["elimination"]), "outputs"),
])
def test_invalid_scenarios(tmp_path, mutate, needle):
    doc = json.loads((SCENARIOS / "minimal_swap.json").read_text())
    mutate(doc)
    with pytest.raises(ConfigurationError, match=needle):
        parse_scenario(write(tmp_path, doc))


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "mode": "exact",\n  "reservoir": ,\n}')
    with pytest.raises(ConfigurationError, match=r"bad\.json:3:"):
        parse_scenario(path)


def test_ion_working_point_scenario_attaches_ratio():
    config = parse_scenario(SCENARIOS / "ion_working_point.json")
    assert config.ion.lamb_dicke == 0.07
    assert config.adiabaticity_ratio == pytest.approx(100 / 21, rel=1e-12)
    assert round(config.adiabaticity_ratio, 2) == 4.76


def test_identity_scenario(tmp_path):
    bundle = run_scenario(parse_scenario(write(tmp_path, IDENTITY)))
    assert bundle.distribution.atoms == [(0.0, pytest.approx(1.0, abs=1e-12))]
    np.testing.assert_allclose(bundle.theta_samples.theta, 1.0, atol=1e-12)
    for v in bundle.landauer.as_dict().values():
        if not isinstance(v, bool):
            assert abs(v) < 1e-10
    emit(bundle, tmp_path / "out")
    rows = read_rows(tmp_path / "out" / "theta.csv")
    assert rows[0] == THETA_HEADER
    for row in rows[1:]:
        assert float(row[1]) == pytest.approx(1.0, abs=1e-12)
        assert float(row[2]) == pytest.approx(0.0, abs=1e-12)


def test_swap_scenario_matches_worked_example(tmp_path):
    bundle = run_scenario(parse_scenario(SCENARIOS / "minimal_swap.json"))
    h = HermitianOperator(np.diag([0.0, 1.0]))
    oracle = tpm_distribution(ProtocolInstance(swap_unitary(2), h, 1.0, basis_state(2, 1)))
    p = 1 / (1 + math.exp(-1))
    assert bundle.distribution.probability_at(1.0) == pytest.approx(p, abs=1e-12)
    np.testing.assert_allclose(bundle.distribution.p, oracle.p, atol=1e-14)
    np.testing.assert_allclose(bundle.reconstruction.distribution.probability_at(1.0), p, atol=1e-8)


def test_emitted_files_format(tmp_path):
    bundle = run_scenario(parse_scenario(SCENARIOS / "shots_swap.json"))
    files = emit(bundle, tmp_path)
    assert [f.name for f in files] == ["theta.csv", "distribution.csv", "summary.json"]
    theta_text = (tmp_path / "theta.csv").read_text()
    assert theta_text.splitlines()[0] == "t,re_theta,im_theta,stderr_re,stderr_im"
    for f in ("theta.csv", "distribution.csv"):
        assert bundle.provenance["config_sha256"] in (tmp_path / f).read_text()
    rows = read_rows(tmp_path / "distribution.csv")
    assert rows[0] == ["q", "p", "p_reconstructed"]
    for col in (1, 2):
        assert abs(sum(float(r[col]) for r in rows[1:]) - 1) < 1e-9
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["provenance"]["seed"] == 20261014


def test_summary_round_trips_losslessly(tmp_path):
    bundle = run_scenario(parse_scenario(SCENARIOS / "shots_swap.json"))
    emit(bundle, tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["moments"]["oracle"] == [float(m) for m in bundle.moments["oracle"]]
    for key, value in bundle.landauer.as_dict().items():
        assert summary["landauer"][key] == value
    rows = read_rows(tmp_path / "theta.csv")[1:]
    re = [float(r[1]) for r in rows]
    assert re == [float(x) for x in bundle.theta_samples.theta.real]


def test_non_finite_written_as_null():
    from heatline.scenario import to_json

    assert json.loads(to_json({"a": math.inf, "b": [math.nan, 1.5]})) == {"a": None, "b": [None, 1.5]}


def test_runs_are_byte_identical(tmp_path):
    for name in ("shots_swap.json", "ion_working_point.json"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{name}_{k}"
            emit(run_scenario(parse_scenario(SCENARIOS / name)), out)
            outs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        assert outs[0] == outs[1]


def test_ion_scenario_outputs():
    bundle = run_scenario(parse_scenario(SCENARIOS / "ion_working_point.json"))
    omega = bundle.config.ion.mode_frequency
    assert bundle.distribution.probability_at(omega) > 0
    assert "conditional_phase_drive_times" in bundle.extras
    np.testing.assert_allclose(bundle.reconstruction.distribution.p.sum(), 1.0, atol=1e-9)


def test_seed_precedence(tmp_path, monkeypatch):
    ns = cli.build_parser().parse_args(["validate", "x.json"])
    assert cli.overrides_from_args(ns, environ={}) == {}
    assert cli.overrides_from_args(ns, environ={"HEATLINE_SEED": "7"}) == {"seed": 7}
    ns = cli.build_parser().parse_args(["validate", "x.json", "--seed", "3"])
    assert cli.overrides_from_args(ns, environ={"HEATLINE_SEED": "7"}) == {"seed": 3}
    ns = cli.build_parser().parse_args(["run", "x.json", "--out", "o", "--set", "reservoir.beta=0.25"])
    assert cli.overrides_from_args(ns, environ={}) == {"reservoir.beta": 0.25}


def test_env_seed_changes_shots(tmp_path, monkeypatch):
    monkeypatch.setenv("HEATLINE_SEED", "5")
    assert cli.main(["run", str(SCENARIOS / "shots_swap.json"), "--out", str(tmp_path / "a")]) == 0
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["provenance"]["seed"] == 5


def test_exit_codes(tmp_path, capsys):
    good = SCENARIOS / "minimal_swap.json"
    assert cli.main(["validate", str(good)]) == cli.EXIT_OK
    assert cli.main(["run", str(good), "--out", str(tmp_path / "ok")]) == cli.EXIT_OK
    bad = dict(IDENTITY, reservoir={"hamiltonian": [[0, 0], [0, 1]], "beta": -1})
    assert cli.main(["validate", str(write(tmp_path, bad, "bad.json"))]) == cli.EXIT_CONFIG
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    cutoff = dict(IDENTITY, reservoir={"oscillator": {"mode_frequency": 1e6, "temperature": 1e-3,
                                                      "fock_cutoff": 3}})
    cutoff["protocol"] = "identity"
    path = write(tmp_path, cutoff, "cutoff.json")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "c")]) == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
    short = dict(IDENTITY, time_grid=[0.0, 0.1])
    path = write(tmp_path, short, "short.json")
    assert cli.main(["run", str(path), "--out", str(tmp_path / "s")]) == cli.EXIT_NUMERICAL


def test_cutoff_error_carries_scenario_context(tmp_path):
    doc = dict(IDENTITY, reservoir={"oscillator": {"mode_frequency": 1e6, "temperature": 1e-3, "fock_cutoff": 3}})
    path = write(tmp_path, doc)
    with pytest.raises(CutoffError, match=str(path)):
        run_scenario(parse_scenario(path))


def test_sweep(tmp_path):
    path = write(tmp_path, dict(IDENTITY, protocol={"matrix": np.eye(9).tolist()}, system_state="zero"))
    swap_doc = json.loads((SCENARIOS / "minimal_swap.json").read_text())
    path = write(tmp_path, swap_doc, "swap.json")
    out = tmp_path / "sweep"
    rc = cli.main(["sweep", str(path), "--param", "reservoir.beta", "--values", "0,0.5,1,2",
                   "--out", str(out), "--workers", "2"])
    assert rc == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["value"]) for r in rows] == [0, 0.5, 1, 2]
    for r in rows:
        beta = float(r["value"])
        assert float(r["average_heat"]) == pytest.approx(1 / (1 + math.exp(-beta)), abs=1e-12)
        assert (out / r["out_dir"] / "summary.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "heatline", "validate", str(SCENARIOS / "ion_working_point.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "adiabaticity ratio 4.76" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "heatline", "validate", str(tmp_path / "nope.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
