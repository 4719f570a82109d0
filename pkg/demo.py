"""Demo script for the matching cache simulator."""

import logging

from matching_cache.cache_sim import ExperimentRunner, summarize_results
from matching_cache.config import ExperimentConfig, NetworkConfig, ScenarioConfig
from matching_cache.matching import run_deferred_acceptance
from matching_cache.types import AgentId, PreferenceOrder
from matching_cache.utils import format_experiment_report


def two_by_two():
    """Two videos competing for two single-slot SBSs."""
    v, s = AgentId.proposer, AgentId.receiver
    videos = [
        PreferenceOrder(v(0), (s(0), s(1)), quota=1),
        PreferenceOrder(v(1), (s(0), s(1)), quota=1),
    ]
    sbs = [
        PreferenceOrder(s(0), (v(1), v(0)), quota=1),
        PreferenceOrder(s(1), (v(0), v(1)), quota=1),
    ]
    matching, trace = run_deferred_acceptance(videos, sbs)
    for line in trace.to_lines():
        print(line)
    print(f"Matching: {matching.to_dict()}\n")


def main():
    """Run a reduced caching experiment end to end."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    print("Matching Cache Demo\n")

    two_by_two()

    config = ScenarioConfig(
        network=NetworkConfig(num_sps=10, num_sbs=20, num_ues=60, num_videos=30),
        experiment=ExperimentConfig(
            beta_list=[0.25, 1.0],
            request_sweep=[50, 100, 200],
            seeds=[0, 1],
        ),
    )
    runner = ExperimentRunner(config)
    results = runner.run()

    summary = summarize_results(results)
    print(format_experiment_report(summary.to_dict("records"), verbose=True))
    print(f"\nAudit Log Entries: {len(runner.get_audit_log())}")


if __name__ == "__main__":
    main()
