"""Regenerate the files bundled in src/provfaas/data.

    python scripts/make_fixtures.py
"""

from pathlib import Path

from provfaas.config import load_config
from provfaas.events import write_events
from provfaas.sim import generate_workload, write_replay_csv
from provfaas.synthetic import synthetic_log

DATA = Path(__file__).resolve().parents[1] / "src" / "provfaas" / "data"


def main():
    write_events(synthetic_log(n_intervals=3, seed=11, attack_interval=2, events_per_interval=400, scratch_prob=0.5), DATA / "sample_trace.jsonl")
    write_events(synthetic_log(n_intervals=8, seed=5, events_per_interval=400, scratch_prob=0.5), DATA / "benign_train.jsonl")
    cfg = load_config(DATA / "default.toml")
    jobs = generate_workload(cfg.workload, cfg.seed, cfg.featurize.unit_budget,
                             cfg.partitioner.capacity, cfg.sim.gnn_cost_per_edge)
    write_replay_csv(DATA / "bursty_workload.csv", jobs, cfg.sim.gnn_cost_per_edge)


if __name__ == "__main__":
    main()
