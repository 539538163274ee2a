import io
import json
import math

import pytest
import yaml

from epiagents import cli, experiment
from epiagents.epidemics import CSV_HEADER
from epiagents.experiment import (
    RAW_HEADER,
    ExperimentConfig,
    ExperimentIOError,
    load_config,
    run_experiment,
)


def cycle_config(tmp_path, **over):
    base = dict(graph_family="cycle", beta=0.2, strategy={"kind": "targeted_max_degree", "mu": 1.0},
                replications=100, sweep=[50, 100, 150, 200], base_seed=4,
                raw_csv=str(tmp_path / "raw.csv"), summary_json=str(tmp_path / "summary.json"))
    base.update(over)
    return ExperimentConfig(**base)


def test_zero_replications_rejected_without_output(tmp_path):
    with pytest.raises(ValueError):
        cycle_config(tmp_path, replications=0)
    assert not list(tmp_path.iterdir())


@pytest.mark.parametrize("bad", [
    dict(model="SEIR"), dict(beta=0.0), dict(horizon=-1.0), dict(graph_family="hypercube"),
    dict(strategy={"kind": "uniform", "mu": -1}), dict(initial={"kind": "fixed", "nodes": [0], "k": 0, "x": 1}),
    dict(sweep=[50, 50]), dict(fit_target="eventual_infected"), dict(beta={50: 0.1}),
    dict(horizon=math.inf, max_events=None),
])
def test_validation(tmp_path, bad):
    with pytest.raises((ValueError, TypeError)):
        cycle_config(tmp_path, **bad)


def test_sweep_end_to_end_and_deterministic(tmp_path):
    cfg = cycle_config(tmp_path)
    report = run_experiment(cfg)
    first = (tmp_path / "raw.csv").read_bytes()
    assert len(report.points) == 4
    assert report.regression is not None and math.isfinite(report.regression["exponent"])
    assert report.verdict in ("subcritical", "critical", "supercritical")
    for p in report.points:
        assert "censored_fraction" in p and p["replications"] == 100
    lines = first.decode().splitlines()
    assert lines[0] == ",".join(RAW_HEADER) and len(lines) == 401
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["sweep"] == [50, 100, 150, 200]
    assert summary["version"]
    run_experiment(cycle_config(tmp_path))
    assert (tmp_path / "raw.csv").read_bytes() == first


def test_censored_points_block_regression(tmp_path):
    cfg = cycle_config(tmp_path, graph_family="complete", beta=0.5, strategy={"kind": "null"},
                       sweep=[10, 20, 30], replications=20, max_events=50)
    report = run_experiment(cfg)
    assert report.verdict == "exceeds horizon" and report.regression is None
    assert all(p["censored_fraction"] >= 0.1 for p in report.points)


def test_beta_mapping_and_exponent(tmp_path):
    cfg = cycle_config(tmp_path, graph_family="star", beta={10: 0.3, 20: 0.2, 40: 0.1}, sweep=[10, 20, 40],
                       raw_csv=None, summary_json=None, replications=20)
    assert cfg.beta_at(20) == 0.2
    report = run_experiment(cfg)
    assert [p["beta"] for p in report.points] == [0.3, 0.2, 0.1]
    assert [p["node_count"] for p in report.points] == [11, 21, 41]
    cfg = cycle_config(tmp_path, graph_family="star", beta=1.0, beta_exponent=-0.7, sweep=[100])
    assert cfg.beta_at(100) == pytest.approx(100 ** -0.7)


def test_sir_fit_on_eventual_infected(tmp_path):
    cfg = cycle_config(tmp_path, model="SIR", fit_target="eventual_infected", raw_csv=None, summary_json=None)
    report = run_experiment(cfg)
    assert report.regression["target"] == "eventual_infected"
    assert all(p["mean_eventual_infected"] >= 1 for p in report.points)


def test_io_failure_keeps_finished_points(tmp_path, monkeypatch):
    real_open = open

    class Flaky(io.StringIO):
        flushes = 0

        def flush(self):
            Flaky.flushes += 1
            if Flaky.flushes == 2:
                raise OSError("disk full")

    def fake_open(path, *a, **k):
        if str(path).endswith("raw.csv"):
            return Flaky()
        return real_open(path, *a, **k)

    monkeypatch.setattr(experiment, "open", fake_open, raising=False)
    with pytest.raises(ExperimentIOError) as info:
        run_experiment(cycle_config(tmp_path, replications=10))
    assert len(info.value.report.points) == 2
    assert "2 point(s)" in str(info.value)


def test_summary_io_failure(tmp_path):
    (tmp_path / "blocked").mkdir()
    cfg = cycle_config(tmp_path, replications=10, summary_json=str(tmp_path / "blocked"))
    with pytest.raises(ExperimentIOError) as info:
        run_experiment(cfg)
    assert len(info.value.report.points) == 4
    assert (tmp_path / "raw.csv").exists()


def write_yaml(tmp_path, data):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_yaml_round_trip(tmp_path):
    data = {"graph": {"family": "gnp", "params": {"p": 0.2, "seed": 1}}, "model": "SIS", "beta": 0.3,
            "strategy": {"kind": "uniform", "mu": 1.0}, "replications": 5, "sweep": [10, 20, 30],
            "horizon": "inf", "output": {"raw_csv": str(tmp_path / "r.csv")}}
    cfg = load_config(write_yaml(tmp_path, data))
    assert cfg.graph_params == {"p": 0.2, "seed": 1} and cfg.raw_csv.endswith("r.csv")
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({**cfg.to_dict(), "replicatons": 3})


# --- CLI ------------------------------------------------------------------------

def test_cli_metrics(capsys):
    assert cli.main(["metrics", "cycle:n=8", "--eta", "2,4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lambda1"] == pytest.approx(2.0) and out["eta"] == {"2": 1.0, "4": 0.5}


def test_cli_simulate_and_sweep(tmp_path, capsys):
    data = {"graph": {"family": "cycle"}, "beta": 0.2, "strategy": {"kind": "targeted_max_degree", "mu": 1.0},
            "replications": 30, "sweep": [20, 40, 80], "base_seed": 1}
    path = write_yaml(tmp_path, data)
    assert cli.main(["simulate", str(path), "--n", "40"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 31
    assert cli.main(["sweep", str(path), "--raw-csv", str(tmp_path / "raw.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["points"]) == 3 and (tmp_path / "raw.csv").exists()
    assert cli.main(["simulate", str(path), "--n", "41"]) == 2


def test_cli_bounds_and_classify(capsys):
    assert cli.main(["bounds", "beta=0.1", "d_max=4", "mu=1", "n=100"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regime"] == "SUBCRITICAL" and out["certificate"]["margin"] == pytest.approx(0.6)
    assert cli.main(["bounds", "chain=lower", "beta=0.02", "gamma=0.7", "alpha=0.5", "n=30", "eta=25"]) == 0
    assert json.loads(capsys.readouterr().out)["regime"] == "SUPERCRITICAL-CANDIDATE"
    assert cli.main(["classify", "graph=star:leaves=100", "beta=0.05", "kind=targeted_max_degree", "mu=1"]) == 0
    assert json.loads(capsys.readouterr().out)["regime"] == "CRITICAL-CANDIDATE"
    assert cli.main(["classify", "graph=complete:n=30", "beta=0.02", "kind=linear_scaling", "gamma=0.9",
                     "alpha=0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["regime"] == "SUPERCRITICAL-CANDIDATE" and out["certificate"]["m"] == 5


def test_cli_errors(capsys):
    assert cli.main(["bounds", "beta=1"]) == 2
    assert cli.main(["bounds", "oops"]) == 2
    assert cli.main(["metrics", "/nonexistent/graph.txt"]) == 2
    with pytest.raises(SystemExit):
        cli.main([])
