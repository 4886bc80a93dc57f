"""Command-line entry point.

Exit codes: 0 success, 1 runtime error, 2 configuration or usage error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import oracles
from .config import ConfigError, PipelineConfig, load_config
from .events import EventParseError, read_events
from .pipeline import profile_from_run, run_pipeline, write_outputs
from .provgraph import build_frequency_db
from .sim import (
    compare,
    generate_workload,
    read_replay_csv,
    workload_from_replay,
    write_replay_csv,
)

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _config(path, seed) -> PipelineConfig:
    cfg = load_config(path)
    if seed is not None:
        cfg.seed = seed
        cfg.sim.rng_seed = seed
    return cfg


def _events(log):
    if log == "-":
        return read_events(sys.stdin)
    return read_events(log)


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ConfigError as exc:
            click.echo(str(exc), err=True)
            ctx.exit(EXIT_CONFIG)
        except (EventParseError, OSError, ValueError, KeyError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_RUNTIME)


config_opt = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                          default=None, help="TOML config file (defaults if omitted).")
seed_opt = click.option("--seed", type=int, default=None, help="Override the config seed.")


@click.group(cls=_Group)
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Serverless-style provenance graph detection pipeline and simulator."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@config_opt
@click.option("--log", "log_path", required=True, help="JSONL event log ('-' for stdin).")
@click.option("--mode", type=click.Choice(["serverless", "static"]), default=None)
@seed_opt
@click.option("--out-dir", type=click.Path(file_okay=False), default="out", show_default=True)
def run(config_path, log_path, mode, seed, out_dir):
    """Run the full pipeline on a log and write latency/packing/alert outputs."""
    cfg = _config(config_path, seed)
    out = run_pipeline(cfg, _events(log_path), mode=mode)
    write_outputs(out, cfg, out_dir)
    s = out.report.stats
    click.echo(f"mode={out.report.mode} intervals={s['intervals']} alerts={out.report.alert_count}")
    if s["intervals"]:
        click.echo(f"latency_ms mean={s['mean']:.2f} std={s['std']:.2f} cv={s['cv']:.4f} p95={s['p95']:.2f}")
    click.echo(f"outputs written to {out_dir}")


def _compare_table(res: dict) -> str:
    rows = [f"{'metric':<18}{'serverless':>14}{'static':>14}{'reduction':>12}"]
    for k in ("mean", "std", "cv", "p95", "max", "instance_seconds"):
        a, b = res["serverless"].get(k), res["static"].get(k)
        if a is None or b is None:
            continue
        red = res["reduction"].get(k)
        red_s = f"{100 * red:>11.1f}%" if red is not None else f"{'':>12}"
        rows.append(f"{k:<18}{a:>14.4f}{b:>14.4f}{red_s}")
    return "\n".join(rows)


@main.command(name="compare")
@config_opt
@click.option("--log", "log_path", default=None, help="Derive the workload from a log via the pipeline.")
@click.option("--workload", "workload_path", default=None, help="Replay CSV workload.")
@click.option("--flat", is_flag=True, help="Synthetic workload with burstiness disabled.")
@click.option("--static-instances", type=int, default=None, help="Override sim.static_instances.")
@seed_opt
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
def compare_cmd(config_path, log_path, workload_path, flat, static_instances, seed, out_dir):
    """Serverless vs static on one identical workload; prints mean/std/cv."""
    cfg = _config(config_path, seed)
    if static_instances is not None:
        cfg.sim.static_instances = static_instances
        cfg.validate()
    workload = load_workload(cfg, log_path, workload_path, flat)
    res = compare(workload, cfg.sim)
    click.echo(_compare_table(res))
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        Path(out_dir, "compare.json").write_text(json.dumps(res, sort_keys=True, indent=2) + "\n")


def load_workload(cfg: PipelineConfig, log_path=None, workload_path=None, flat=False) -> list:
    if log_path and workload_path:
        raise click.UsageError("give at most one of --log and --workload")
    ms = cfg.provgraph.interval_seconds * 1000.0
    if log_path:
        return run_pipeline(cfg, _events(log_path)).workload
    if workload_path:
        return workload_from_replay(read_replay_csv(workload_path), ms, cfg.featurize.unit_budget,
                                    cfg.partitioner.capacity, cfg.sim.gnn_cost_per_edge)
    spec = cfg.workload
    if flat:
        spec = spec.flat()
        spec.supernode_prob = 0.0
    return generate_workload(spec, cfg.seed, cfg.featurize.unit_budget, cfg.partitioner.capacity,
                             cfg.sim.gnn_cost_per_edge)


@main.command(name="gen-workload")
@config_opt
@seed_opt
@click.option("--flat", is_flag=True, help="Disable burst episodes and supernode spikes.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def gen_workload(config_path, seed, flat, out_path):
    """Write a synthetic workload as a replay CSV."""
    cfg = _config(config_path, seed)
    jobs = load_workload(cfg, flat=flat)
    write_replay_csv(out_path, jobs, cfg.sim.gnn_cost_per_edge)
    click.echo(f"wrote {len(jobs) // 2} intervals to {out_path}")


@main.command(name="fit-profile")
@config_opt
@click.option("--log", "log_path", required=True, help="Benign JSONL log.")
@seed_opt
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def fit_profile_cmd(config_path, log_path, seed, out_path):
    """Fit the benign centroid/radius profile from a benign log."""
    cfg = _config(config_path, seed)
    cfg.detector.profile = ""
    out = run_pipeline(cfg, _events(log_path))
    prof = profile_from_run(out, cfg.detector.quantile, cfg.detector.eps)
    prof.save(out_path)
    click.echo(f"profile: dim={prof.centroid.shape[0]} radius={prof.radius:.6f} -> {out_path}")


@main.command(name="build-freqdb")
@click.option("--log", "log_path", required=True, help="Training JSONL log.")
@click.option("--threshold", type=float, default=10, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def build_freqdb(log_path, threshold, out_path):
    """Count edge signatures over a training log."""
    if threshold.is_integer():
        threshold = int(threshold)
    db = build_frequency_db(_events(log_path), threshold)
    db.save(out_path)
    click.echo(f"{len(db.counts)} signatures -> {out_path}")


@main.command(name="oracle")
@click.argument("check", type=click.Choice(["all"] + sorted(oracles.ORACLES)))
@click.option("--seeds", type=int, default=None, help="Number of randomized instances.")
@click.option("--nodes", type=int, default=None, help="Graph size, where the check takes one.")
@click.option("--base-seed", type=int, default=0, show_default=True)
def oracle_cmd(check, seeds, nodes, base_seed):
    """Check optimized paths against brute-force references."""
    names = sorted(oracles.ORACLES) if check == "all" else [check]
    ok = True
    for name in names:
        fn = oracles.ORACLES[name]
        kwargs = {"base_seed": base_seed}
        if seeds is not None:
            kwargs["seeds"] = seeds
        if nodes is not None:
            if name in ("gnn-equivalence", "gnn-reference", "featurize"):
                kwargs["nodes"] = nodes
            elif name in ("locality", "bookkeeping", "packing"):
                kwargs["max_nodes"] = nodes
        rep = fn(**kwargs)
        click.echo(rep.line())
        ok &= rep.ok
    if not ok:
        sys.exit(EXIT_RUNTIME)


if __name__ == "__main__":
    main()
