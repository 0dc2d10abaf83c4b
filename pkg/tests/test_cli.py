import csv
import json

import pytest
import yaml
from click.testing import CliRunner

from interdc.cli import AGG_FIELDS, RAW_FIELDS, REQUEST_FIELDS, aggregate, expand_grid, main


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    return json.loads(lines[0][len("# config: "):]), list(csv.DictReader(lines[1:]))


@pytest.fixture
def one_transfer(tmp_path):
    (tmp_path / "net.yaml").write_text(yaml.safe_dump({"edges": [["a", "b", 1.0], ["b", "c", 1.0]]}))
    (tmp_path / "trace.jsonl").write_text('{"arrival": 0, "src": "a", "receivers": ["c"], "volume": 3}\n')
    cfg = tmp_path / "run.yaml"
    cfg.write_text(yaml.safe_dump({"topology": "net.yaml", "trace_file": "trace.jsonl", "scheme": "P2P_SHORTEST"}))
    return cfg


def test_run_minimal_config(tmp_path, one_transfer):
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["run", "--config", str(one_transfer), "--out", str(out)])
    assert res.exit_code == 0, res.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["receivers"] == 1
    assert summary["metrics"]["mean"] == 3.0
    assert summary["metrics"]["bandwidth"] == pytest.approx(6.0)
    config, rows = read_csv(out / "requests.csv")
    assert config["scheme"] == "P2P_SHORTEST"
    assert list(rows[0]) == REQUEST_FIELDS
    assert rows[0]["completion_time"] == "3"
    log = (out / "run_log.jsonl").read_text().splitlines()
    assert "config" in json.loads(log[0]) and len(log) == 2


def test_unknown_scheme_lists_valid_ones(tmp_path):
    res = CliRunner().invoke(main, ["run", "--scheme", "FLOODING", "--out", str(tmp_path)])
    assert res.exit_code != 0
    assert "DCCAST" in res.output and "MP_DCROUTE" in res.output


def test_malformed_config_exits_nonzero(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scheme: DCCAST\nunknown_knob: 3\n")
    res = CliRunner().invoke(main, ["run", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert res.exit_code != 0 and "unknown_knob" in res.output
    topo = tmp_path / "topo_cfg.yaml"
    topo.write_text("topology: missing.yaml\n")
    res = CliRunner().invoke(main, ["run", "--config", str(topo), "--out", str(tmp_path / "o")])
    assert res.exit_code != 0


def _run(tmp_path, name, *extra):
    out = tmp_path / name
    args = ["run", "--scheme", "DCCAST", "--receivers", "3", "--lambda", "2", "--out", str(out), *extra]
    cfg = tmp_path / "small.yaml"
    cfg.write_text("preset: p2mp\ntrace: {arrivals: 40}\n")
    res = CliRunner().invoke(main, ["run", "--config", str(cfg), *args[1:]])
    assert res.exit_code == 0, res.output
    return (out / "requests.csv").read_bytes(), json.loads((out / "summary.json").read_text())


def test_seed_override_is_repeatable(tmp_path):
    a, sa = _run(tmp_path, "a", "--seed", "7")
    b, sb = _run(tmp_path, "b", "--seed", "7")
    c, sc = _run(tmp_path, "c")
    assert a == b
    assert a != c
    assert sa["seed"] == 7 and sc["seed"] == 0
    assert sa["config"]["trace"]["receivers"] == 3


def test_every_override_reaches_the_resolved_config(tmp_path):
    out = tmp_path / "o"
    res = CliRunner().invoke(main, ["run", "--scheme", "PARALLEL_TREES", "--policy", "SRPT", "--pf", "1.3",
                                    "--nmax", "3", "--kpaths", "3", "--ktrees", "2", "--percentile", "99",
                                    "--receivers", "2", "--out", str(out)])
    assert res.exit_code == 0, res.output
    cfg = json.loads((out / "summary.json").read_text())["config"]
    assert cfg["options"] == {"p_f": 1.3, "n_max": 3, "k_paths": 3, "k_trees": 2}
    assert cfg["policy"] == "SRPT" and cfg["percentile"] == 99.0


def write_grid(tmp_path, grid, gain=None):
    doc = {"base": {"preset": "p2mp", "trace": {"arrivals": 15}}, "grid": grid}
    if gain:
        doc["gain"] = gain
    path = tmp_path / "grid.yaml"
    path.write_text(yaml.safe_dump(doc))
    return path


def test_sweep_counts_rows(tmp_path):
    grid = {"schemes": ["DCCAST", "P2P_SHORTEST"], "rates": [0.5, 2.0], "receivers": [2], "seeds": [1, 2, 3]}
    path = write_grid(tmp_path, grid, gain=["DCCAST", "P2P_SHORTEST"])
    out = tmp_path / "sweep"
    res = CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(out)])
    assert res.exit_code == 0, res.output
    _, raw = read_csv(out / "raw.csv")
    config, agg = read_csv(out / "summary.csv")
    assert len(raw) == 12 and len(agg) == 4
    assert list(raw[0]) == RAW_FIELDS and list(agg[0]) == AGG_FIELDS
    assert config["gain"] == ["DCCAST", "P2P_SHORTEST"]
    dccast = [r for r in agg if r["scheme"] == "DCCAST"]
    assert all(r["gain_baseline"] == "P2P_SHORTEST" and float(r["gain_bandwidth"]) > 0 for r in dccast)
    assert all(r["gain_bandwidth"] == "" for r in agg if r["scheme"] == "P2P_SHORTEST")


def test_gain_is_mean_of_matched_seed_ratios():
    rows = [{"scheme": s, "rate": 1, "receivers": 2, "seed": k, "policy": "FCFS", "error": None,
             "mean": m, "median": m, "tail": m, "bandwidth": m, "admitted_ratio": 1.0,
             "admitted_traffic_ratio": 1.0}
            for s, k, m in [("A", 1, 2.0), ("A", 2, 6.0), ("B", 1, 4.0), ("B", 2, 4.0), ("B", 3, 9.0)]]
    agg = {r["scheme"]: r for r in aggregate(rows, ("A", "B"))}
    assert agg["A"]["gain_mean"] == pytest.approx((0.5 + 1.5) / 2)
    assert agg["A"]["mean_avg"] == 4.0 and agg["A"]["mean_std"] == 2.0
    assert agg["B"]["seeds"] == 3 and "gain_mean" not in agg["B"]


def test_empty_grid_gives_header_only(tmp_path):
    path = write_grid(tmp_path, {"schemes": [], "seeds": []})
    out = tmp_path / "empty"
    res = CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(out)])
    assert res.exit_code == 0, res.output
    _, raw = read_csv(out / "raw.csv")
    _, agg = read_csv(out / "summary.csv")
    assert raw == [] and agg == []
    assert (out / "raw.csv").read_text().splitlines()[1] == ",".join(RAW_FIELDS)
    assert expand_grid({}) == []


def test_failing_cell_is_recorded_and_sweep_continues(tmp_path):
    grid = {"schemes": ["DCCAST", "DCROUTE"], "seeds": [1]}
    path = write_grid(tmp_path, grid)
    out = tmp_path / "partial"
    res = CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(out)])
    assert res.exit_code == 0, res.output
    _, raw = read_csv(out / "raw.csv")
    by_scheme = {r["scheme"]: r for r in raw}
    assert by_scheme["DCCAST"]["error"] == "" and by_scheme["DCCAST"]["mean"] != ""
    assert by_scheme["DCROUTE"]["error"].startswith("SchemeError") and by_scheme["DCROUTE"]["mean"] == ""
    _, agg = read_csv(out / "summary.csv")
    assert {r["scheme"]: r["errors"] for r in agg} == {"DCCAST": "0", "DCROUTE": "1"}


def test_parallel_sweep_matches_serial(tmp_path, monkeypatch):
    grid = {"schemes": ["DCCAST", "QUICKCAST"], "seeds": [1, 2]}
    path = write_grid(tmp_path, grid)
    CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(tmp_path / "serial")])
    monkeypatch.setenv("INTERDC_WORKERS", "2")
    res = CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(tmp_path / "pool")])
    assert res.exit_code == 0, res.output
    for name in ("raw.csv", "summary.csv"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()
    monkeypatch.setenv("INTERDC_WORKERS", "many")
    res = CliRunner().invoke(main, ["sweep", "--config", str(path), "--out", str(tmp_path / "x")])
    assert res.exit_code != 0


def test_oracle_commands():
    res = CliRunner().invoke(main, ["oracle", "iris-theorem1"])
    assert res.exit_code == 0 and res.output.strip().endswith("PASS")
    assert json.loads(res.output.rsplit("PASS", 1)[0])["counterexamples"] == 0
    res = CliRunner().invoke(main, ["oracle", "steiner-ratio"])
    assert res.exit_code == 0
    res = CliRunner().invoke(main, ["oracle", "nonsense"])
    assert res.exit_code != 0 and "bwrh-gap" in res.output
