"""Command-line entry points: single runs, parameter sweeps, oracle checks."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np
import yaml

from .netgraph import TopologyError
from .oracles import CHECKS, run_check
from .simkit.config import ConfigError, ScenarioConfig
from .simkit.engine import ALL_SCHEMES, SchemeError, run_scenario
from .simkit.metrics import compute_metrics

WORKERS_ENV = "INTERDC_WORKERS"

REQUEST_FIELDS = ["request_id", "receiver", "source", "arrival", "volume", "deadline", "admitted",
                  "partition", "routes", "completion_slot", "completion_time"]
RAW_FIELDS = ["scheme", "policy", "rate", "receivers", "seed", "requests", "admitted", "admitted_ratio",
              "admitted_traffic_ratio", "mean", "median", "tail", "percentile", "bandwidth", "deadline_misses",
              "error"]
AGG_METRICS = ["mean", "median", "tail", "bandwidth", "admitted_ratio", "admitted_traffic_ratio"]
GAIN_METRICS = ["mean", "median", "tail", "bandwidth", "admitted_traffic_ratio"]
AGG_FIELDS = (["scheme", "policy", "rate", "receivers", "seeds", "errors"]
              + [f"{m}_{s}" for m in AGG_METRICS for s in ("avg", "std")]
              + ["gain_baseline"] + [f"gain_{m}" for m in GAIN_METRICS])


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _config_comment(resolved: dict) -> str:
    return "# config: " + json.dumps(resolved, sort_keys=True) + "\n"


def _write_csv(path: Path, fields: list[str], rows: list[dict], header_comment: str = "") -> None:
    buf = io.StringIO()
    buf.write(header_comment)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fields})
    path.write_text(buf.getvalue())


def request_rows(result) -> list[dict]:
    rows = []
    for rec in result.records:
        req = rec.request
        group_of = {r: i for i, grp in enumerate(rec.partitions) for r in grp}
        for rcv in req.receivers:
            done = rec.completion.get(rcv)
            rows.append({
                "request_id": req.id, "receiver": rcv, "source": req.source, "arrival": req.arrival,
                "volume": req.volume, "deadline": req.deadline, "admitted": rec.admitted,
                "partition": group_of.get(rcv), "routes": len(rec.routes),
                "completion_slot": done, "completion_time": None if done is None else done - req.arrival,
            })
    return rows


def run_log_lines(result, topo) -> list[str]:
    lines = []
    for rec in result.records:
        lines.append(json.dumps({
            **rec.request.to_record(),
            "admitted": rec.admitted,
            "partitions": [list(p) for p in rec.partitions],
            "routes": [[f"{u}->{v}" for u, v in (topo.edges[e] for e in r)] for r in rec.routes],
            "delivered": rec.delivered,
            "completion": rec.completion,
        }, sort_keys=True))
    return lines


def execute(cfg: ScenarioConfig):
    topo = cfg.load_topology()
    trace = cfg.build_trace(topo)
    result = run_scenario(topo, trace, cfg.scheme, cfg.policy, cfg.scheme_options(),
                          cfg.background_traffic(topo), cfg.slot_width, cfg.seed)
    return topo, trace, result, compute_metrics(result, cfg.percentile)


def _load_config(config_path: str | None) -> ScenarioConfig:
    if config_path is None:
        return ScenarioConfig.from_dict({})
    return ScenarioConfig.load(config_path)


@click.group()
def main():
    """Inter-datacenter bulk transfer simulator."""


@main.command("run")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Scenario YAML file.")
@click.option("--scheme", help=f"One of: {', '.join(ALL_SCHEMES)}.")
@click.option("--policy", help="ALAP, FCFS, SRPT or MAXMIN_FAIR.")
@click.option("--lambda", "rate", type=float, help="Arrival rate per slot.")
@click.option("--receivers", type=int, help="Receivers per transfer.")
@click.option("--pf", "p_f", type=float, help="Partitioning factor.")
@click.option("--nmax", "n_max", type=int, help="Largest number of partitions.")
@click.option("--kpaths", "k_paths", type=int, help="Disjoint paths for multipath admission.")
@click.option("--ktrees", "k_trees", type=int, help="Disjoint trees per transfer.")
@click.option("--seed", type=int)
@click.option("--percentile", type=float, help="Tail percentile, e.g. 99.9 or 100 for the slowest.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
def cmd_run(config_path, out_dir, **overrides):
    """Run one scenario and write summary.json, requests.csv and run_log.jsonl."""
    try:
        cfg = _load_config(config_path).with_overrides(**overrides)
        topo, trace, result, report = execute(cfg)
    except (ConfigError, SchemeError, TopologyError, KeyError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    resolved = cfg.resolved()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": resolved, "seed": cfg.seed, "metrics": report.summary()}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_csv(out / "requests.csv", REQUEST_FIELDS, request_rows(result), _config_comment(resolved))
    log = [json.dumps({"config": resolved}, sort_keys=True)] + run_log_lines(result, topo)
    (out / "run_log.jsonl").write_text("\n".join(log) + "\n")
    m = report
    click.echo(f"{m.scheme} [{m.policy}] requests={m.requests} admitted={m.admitted} "
               f"mean={m.mean:.4g} median={m.median:.4g} p{m.percentile:g}={m.tail:.4g} "
               f"bandwidth={m.bandwidth:.6g} runtime={m.runtime:.2f}s")


# ------------------------------------------------------------------ sweep

def _sweep_cell(args):
    base, scheme, rate, receivers, seed = args
    row = {"scheme": scheme, "rate": rate, "receivers": receivers, "seed": seed}
    try:
        cfg = ScenarioConfig.from_dict(base["config"], base["base_dir"]).with_overrides(
            scheme=scheme, rate=rate, receivers=receivers, seed=seed)
        _, _, _, m = execute(cfg)
        row.update({k: getattr(m, k) for k in RAW_FIELDS if hasattr(m, k) and k not in row})
        row["policy"] = m.policy
    except Exception as exc:  # a failing cell must not stop the sweep
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def expand_grid(grid: dict) -> list[tuple]:
    schemes = grid.get("schemes") or []
    rates = grid.get("rates") or [None]
    receivers = grid.get("receivers") or [None]
    seeds = grid.get("seeds") or []
    return list(itertools.product(schemes, rates, receivers, seeds))


def aggregate(rows: list[dict], gain: tuple[str, str] | None = None) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["scheme"], r["rate"], r["receivers"]), []).append(r)
    lookup = {(r["scheme"], r["rate"], r["receivers"], r["seed"]): r for r in rows if not r.get("error")}
    out = []
    for (scheme, rate, receivers), cells in groups.items():
        ok = [c for c in cells if not c.get("error")]
        agg = {"scheme": scheme, "policy": ok[0]["policy"] if ok else None, "rate": rate,
               "receivers": receivers, "seeds": len(cells), "errors": len(cells) - len(ok)}
        for m in AGG_METRICS:
            vals = np.array([c[m] for c in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            agg[f"{m}_avg"] = float(vals.mean()) if len(vals) else None
            agg[f"{m}_std"] = float(vals.std()) if len(vals) else None
        if gain and scheme == gain[0]:
            agg["gain_baseline"] = gain[1]
            for m in GAIN_METRICS:
                ratios = []
                for c in ok:
                    other = lookup.get((gain[1], rate, receivers, c["seed"]))
                    if other is not None and other[m] and not math.isnan(other[m]):
                        ratios.append(c[m] / other[m])
                agg[f"gain_{m}"] = float(np.mean(ratios)) if ratios else None
        out.append(agg)
    return out


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise click.ClickException(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@main.command("sweep")
@click.option("--config", "grid_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Grid YAML: base scenario under 'base', lists under 'grid', optional 'gain: [A, B]'.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="sweep_out", show_default=True)
def cmd_sweep(grid_path, out_dir):
    """Run every scheme x rate x receivers x seed cell; write raw.csv and summary.csv."""
    try:
        grid_doc = yaml.safe_load(Path(grid_path).read_text()) or {}
        base = grid_doc.get("base", {})
        ScenarioConfig.from_dict(base, Path(grid_path).parent)
    except (yaml.YAMLError, ConfigError) as exc:
        raise click.ClickException(f"bad grid config: {exc}") from None
    gain = tuple(grid_doc["gain"]) if grid_doc.get("gain") else None
    if gain is not None and len(gain) != 2:
        raise click.ClickException("gain needs exactly two scheme names")
    cells = expand_grid(grid_doc.get("grid", {}))
    payload = {"config": base, "base_dir": str(Path(grid_path).parent)}
    jobs = [(payload, *c) for c in cells]
    workers = _workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, jobs))
    else:
        rows = [_sweep_cell(j) for j in jobs]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = _config_comment({"base": base, "grid": grid_doc.get("grid", {}), "gain": list(gain) if gain else None})
    _write_csv(out / "raw.csv", RAW_FIELDS, rows, header)
    _write_csv(out / "summary.csv", AGG_FIELDS, aggregate(rows, gain), header)
    failed = sum(1 for r in rows if r.get("error"))
    click.echo(f"{len(rows)} cells, {failed} failed -> {out}")


@main.command("oracle")
@click.argument("check_name")
def cmd_oracle(check_name):
    """Compare heuristics against exhaustive search: bwrh-gap, steiner-ratio, iris-theorem1."""
    if check_name not in CHECKS:
        raise click.ClickException(f"unknown check {check_name!r}; valid: {', '.join(CHECKS)}")
    stats, ok = run_check(check_name)
    click.echo(json.dumps(stats, indent=2, default=str))
    click.echo("PASS" if ok else "FAIL")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
