import json
import math

import numpy as np
import pytest

from interdc.netgraph import Timeline, Topology, bundled_topology, line_topology
from interdc.scheduling import fcfs_forward_fill
from interdc.simkit import (ConfigError, ScenarioConfig, SchemeError, SchemeOptions, TraceConfig, TransferRequest,
                            compute_metrics, generate_trace, preset, read_trace, run_scenario, write_trace)
from interdc.simkit.engine import ALL_SCHEMES, resolve_scheme
from interdc.simkit.metrics import expected_bandwidth, percentile
from interdc.simkit.trace import draw_sizes, load_cdf, pareto_shape


def req(i, src, dst, volume, arrival=0, deadline=None):
    dst = (dst,) if isinstance(dst, str) else tuple(dst)
    return TransferRequest(i, src, dst, volume, arrival, deadline)


# ---------------------------------------------------------------------- traces

def test_zero_rate_gives_empty_trace():
    topo = bundled_topology("gscale_standin")
    assert generate_trace(topo, TraceConfig(rate=0.0), seed=1) == []


def test_exponential_sample_mean():
    sizes = draw_sizes(TraceConfig(size_mean=20.0), np.random.default_rng(0), 100_000)
    assert abs(sizes.mean() - 20.0) / 20.0 < 0.05


def test_pareto_shape_from_mean_and_minimum():
    assert pareto_shape(20.0, 2.0) == pytest.approx(10 / 9)
    cfg = TraceConfig(size_dist="pareto", size_mean=20.0, size_min=2.0, size_cap=2000.0)
    sizes = draw_sizes(cfg, np.random.default_rng(0), 50_000)
    assert sizes.min() >= 2.0 and sizes.max() <= 2000.0


def test_trace_is_seeded_and_well_formed():
    topo = bundled_topology("gscale_standin")
    cfg = preset("p2mp", arrivals=200, receivers=4)
    a = generate_trace(topo, cfg, seed=5)
    assert a == generate_trace(topo, cfg, seed=5)
    assert a != generate_trace(topo, cfg, seed=6)
    arrivals = [r.arrival for r in a]
    assert arrivals == sorted(arrivals)
    for r in a:
        assert len(r.receivers) == 4 and r.source not in r.receivers
        assert r.volume >= 10.0


def test_deadline_preset_sets_deadlines_after_arrival():
    topo = bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("deadline_unicast", arrivals=100), seed=2)
    assert all(r.deadline > r.arrival and r.volume > 0 for r in trace)


def test_trace_validation_errors():
    topo = bundled_topology("gscale_standin")
    for bad in (TraceConfig(rate=-1), TraceConfig(receivers=0), TraceConfig(size_dist="weibull"),
                TraceConfig(size_dist="empirical"), TraceConfig(demand="window")):
        with pytest.raises(ValueError):
            generate_trace(topo, bad, seed=0)
    with pytest.raises(ValueError):
        generate_trace(topo, TraceConfig(receivers=12), seed=0)
    with pytest.raises(ValueError, match="valid"):
        preset("hadoop")


def test_empirical_sizes_from_user_cdf(tmp_path):
    cdf = tmp_path / "sizes.cdf"
    cdf.write_text("# value prob\n1 0.0\n10 0.5\n100 1.0\n")
    values, probs = load_cdf(cdf)
    assert values.tolist() == [1, 10, 100]
    sizes = draw_sizes(TraceConfig(size_dist="empirical", cdf_file=str(cdf)), np.random.default_rng(0), 10_000)
    assert 1 <= sizes.min() and sizes.max() <= 100
    assert np.median(sizes) == pytest.approx(10, rel=0.1)
    (tmp_path / "bad.cdf").write_text("1 0.5\n2 0.2\n")
    with pytest.raises(ValueError):
        load_cdf(tmp_path / "bad.cdf")


def test_trace_file_round_trip(tmp_path):
    trace = [req(0, "a", "b", 2.5, 1), TransferRequest(1, "a", ("b", "c"), 1.0, 3, 9, (0, 1))]
    path = tmp_path / "t.jsonl"
    write_trace(path, trace)
    assert read_trace(path) == trace
    path.write_text('{"src": "a"}\n')
    with pytest.raises(ValueError, match=":1:"):
        read_trace(path)


def test_request_validation():
    with pytest.raises(ValueError):
        req(0, "a", "b", 0.0)
    with pytest.raises(ValueError):
        req(0, "a", "a", 1.0)
    with pytest.raises(ValueError):
        TransferRequest(0, "a", ("b",), 1.0, 0, None, (1, 0))


# ------------------------------------------------------------------ scenarios

def test_single_transfer_on_idle_path():
    topo = line_topology(["a", "b", "c"])
    result = run_scenario(topo, [req(0, "a", "c", 3.0)], "P2P_SHORTEST", "FCFS")
    (rec,) = result.records
    assert rec.completion == {"c": 3}
    assert result.bandwidth == pytest.approx(6.0)


def test_two_fair_transfers_finish_together():
    topo = Topology([("a", "b", 1.0)])
    trace = [req(0, "a", "b", 3.0), req(1, "a", "b", 3.0)]
    result = run_scenario(topo, trace, "MIN_HOP", "MAXMIN_FAIR")
    assert [r.completion["b"] for r in result.records] == [6, 6]


def test_fcfs_serves_earlier_request_first():
    topo = Topology([("a", "b", 1.0)])
    trace = [req(0, "a", "b", 2.0), req(1, "a", "b", 2.0)]
    result = run_scenario(topo, trace, "MIN_HOP", "FCFS")
    assert [r.completion["b"] for r in result.records] == [2, 4]


def test_srpt_serves_smaller_request_first():
    topo = Topology([("a", "b", 1.0)])
    trace = [req(0, "a", "b", 5.0), req(1, "a", "b", 1.0)]
    result = run_scenario(topo, trace, "MIN_HOP", "SRPT")
    assert [r.completion["b"] for r in result.records] == [6, 1]


def test_infeasible_deadlines_admit_nothing():
    topo = line_topology(["a", "b", "c"])
    trace = [req(i, "a", "c", 50.0, i, i + 2) for i in range(4)]
    for scheme in ("DCROUTE", "MP_DCROUTE", "DDCCAST"):
        result = run_scenario(topo, trace, scheme)
        report = compute_metrics(result)
        assert report.admitted == 0 and report.bandwidth == 0.0
        assert math.isnan(report.mean)


def test_deadline_scheme_needs_deadlines():
    topo = line_topology(["a", "b"])
    with pytest.raises(SchemeError):
        run_scenario(topo, [req(0, "a", "b", 1.0)], "DCROUTE")
    with pytest.raises(SchemeError):
        run_scenario(topo, [req(0, "a", "b", 1.0, 0, 5)], "DCROUTE", "FCFS")
    with pytest.raises(SchemeError):
        run_scenario(topo, [req(0, "a", "b", 1.0)], "DCCAST", "ALAP")


def test_unknown_scheme_lists_valid_names():
    with pytest.raises(SchemeError) as err:
        resolve_scheme("FLOODING")
    for name in ("DCCAST", "IRIS", "MP_DCROUTE", "BWRH"):
        assert name in str(err.value)


def test_scheme_names_normalise():
    assert resolve_scheme("mp-dcroute")[0] == "MP_DCROUTE"
    assert resolve_scheme("MINSUM(load)")[0] == "MINSUM(load)"


def test_deadline_runs_meet_every_deadline():
    topo = bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("deadline_unicast", arrivals=120, rate=5.0), seed=3)
    for scheme in ("DCROUTE", "MP_DCROUTE"):
        report = compute_metrics(run_scenario(topo, trace, scheme, options=SchemeOptions(k_paths=2)))
        assert report.deadline_misses == 0
        assert 0 < report.admitted <= len(trace)


# -------------------------------------------------------------------- metrics

def test_metrics_single_receiver():
    topo = Topology([("a", "b", 1.0)])
    report = compute_metrics(run_scenario(topo, [req(0, "a", "b", 4.0)], "MIN_HOP", "FCFS"))
    assert (report.mean, report.median, report.tail) == (4.0, 4.0, 4.0)
    report.check()


def test_tree_bandwidth_counts_each_edge():
    topo = Topology([("s", "a", 1.0), ("a", "b", 1.0), ("a", "c", 1.0)])
    result = run_scenario(topo, [req(0, "s", ("b", "c"), 10.0)], "DCCAST")
    assert result.bandwidth == pytest.approx(30.0)
    assert expected_bandwidth(result.records) == pytest.approx(30.0)


def test_percentile_changes_only_tail():
    topo = bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("p2mp", arrivals=60), seed=4)
    result = run_scenario(topo, trace, "DCCAST")
    a = compute_metrics(result, 99.0).summary(include_runtime=False)
    b = compute_metrics(result, 99.9).summary(include_runtime=False)
    diff = {k for k in a if a[k] != b[k]}
    assert diff <= {"tail", "percentile"} and "percentile" in diff
    with pytest.raises(ValueError):
        compute_metrics(result, 0)


def test_percentile_helper():
    assert math.isnan(percentile([], 50))
    assert percentile([1, 2, 3, 10], 99.9) == 10
    assert percentile([1, 2, 3, 4], 50) == 3


@pytest.mark.parametrize("scheme", sorted(set(ALL_SCHEMES) - {"DCROUTE", "MP_DCROUTE", "DDCCAST", "BWR_EXACT"}))
def test_every_dynamic_scheme_completes_and_conserves_bandwidth(scheme):
    topo = bundled_topology("geant_standin")
    receivers = 1 if resolve_scheme(scheme)[1] is not None else 3
    trace = generate_trace(topo, preset("p2mp", arrivals=30, receivers=receivers, rate=2.0), seed=1)
    result = run_scenario(topo, trace, scheme, seed=1)
    report = compute_metrics(result)
    assert report.receivers == sum(len(r.receivers) for r in trace)
    assert result.bandwidth == pytest.approx(expected_bandwidth(result.records), rel=1e-6)
    assert result.max_overload <= 1e-9
    assert report.bandwidth >= sum(r.volume for r in trace) - 1e-6
    report.check()


def test_repeat_runs_are_identical():
    topo = bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("p2mp", arrivals=50), seed=9)
    a = compute_metrics(run_scenario(topo, trace, "QUICKCAST")).summary(include_runtime=False)
    b = compute_metrics(run_scenario(topo, trace, "QUICKCAST")).summary(include_runtime=False)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


# --------------------------------------------------------------------- config

def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError, match="unknown config keys"):
        ScenarioConfig.from_dict({"schema": "x"})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"scheme": "FLOODING"})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"percentile": 0})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"trace": {"colour": 1}})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"options": {"k_paths": 2, "depth": 3}})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict([1, 2])


def test_config_overrides_and_resolution(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("scheme: QUICKCAST\npreset: p2mp\ntrace: {arrivals: 10}\n")
    cfg = ScenarioConfig.load(path).with_overrides(seed=4, rate=2.0, receivers=2, p_f=1.3, scheme=None)
    assert cfg.scheme == "QUICKCAST" and cfg.seed == 4
    resolved = cfg.resolved()
    assert resolved["trace"]["rate"] == 2.0 and resolved["trace"]["receivers"] == 2
    assert resolved["options"]["p_f"] == 1.3
    topo = cfg.load_topology()
    assert len(cfg.build_trace(topo)) == 10


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        ScenarioConfig.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("scheme: [unclosed\n")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(bad)


@pytest.mark.parametrize("seed", range(8))
def test_fcfs_slot_greedy_equals_forward_fill_reservations(seed):
    """Serving flows greedily by arrival each slot gives the same finish slots as
    reserving each flow's path forward from its arrival, one flow at a time."""
    topo = bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("unicast_flows", arrivals=40, rate=2.0, size_mean=3.0), seed)
    result = run_scenario(topo, trace, "MIN_HOP", "FCFS")
    tl = Timeline(topo)
    for rec in sorted(result.records, key=lambda r: (r.request.arrival, r.request.id)):
        tl.t_now = rec.request.arrival
        alloc = fcfs_forward_fill(tl, rec.routes[0], rec.request.volume)
        (rcv,) = rec.request.receivers
        assert rec.completion[rcv] == max(alloc.rates)
