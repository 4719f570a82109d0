"""Utility functions for the caching simulator."""

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

STREAMS = ("topology", "social", "popularity", "random_placement", "requests")


def save_json(data: Any, filepath: Union[str, Path]) -> None:
    """Save a JSON-compatible tree to a file."""
    with open(filepath, "w") as f:
        json.dump(data, f, indent=2, default=str)


def load_json(filepath: Union[str, Path]) -> Any:
    """Load a JSON file."""
    with open(filepath, "r") as f:
        return json.load(f)


def spawn_generators(seed: int, names: Sequence[str] = STREAMS) -> Dict[str, np.random.Generator]:
    """Independent named random streams derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def as_generator(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    """Accept either a seed or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def zipf_weights(n: int, exponent: float) -> np.ndarray:
    """Normalized weights rank^-exponent for ranks 1..n."""
    if exponent <= 0:
        raise ValueError(f"Zipf exponent must be positive, got {exponent}")
    weights = np.arange(1, n + 1, dtype=float) ** -exponent
    return weights / weights.sum()


def format_experiment_report(summary: Iterable[Dict[str, Any]], verbose: bool = False) -> str:
    """Format aggregated experiment rows for display."""
    rows: List[Dict[str, Any]] = list(summary)
    report = []
    report.append("=" * 50)
    report.append("CACHING EXPERIMENT REPORT")
    report.append("=" * 50)

    for row in rows:
        report.append(
            f"beta={row['beta']:.2f} requests={row['requests']:>5d} "
            f"sat MA/RA={row['sat_ma']:.3f}/{row['sat_ra']:.3f} "
            f"time MA/RA={row['time_ma']:.3f}/{row['time_ra']:.3f}"
        )

    if verbose and rows:
        gains = [row["sat_ma"] / row["sat_ra"] for row in rows if row["sat_ra"] > 0]
        if gains:
            report.append(f"\nBest MA/RA satisfaction gain: {max(gains):.2f}x")

    report.append("=" * 50)
    return "\n".join(report)
