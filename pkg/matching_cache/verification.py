"""Random-instance property suite and brute-force stable matching oracle."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Optional

import numpy as np

from .matching import (
    ChoiceFunction,
    ChoiceRule,
    Matching,
    PreferenceInput,
    index_preferences,
    find_instability,
    is_pairwise_stable,
    is_valid_matching,
    run_deferred_acceptance,
    verify_trace_propositions,
)
from .types import AgentId, PreferenceOrder, Side

logger = logging.getLogger(__name__)

ORACLE_LIMIT = 4
MAX_VERIFY_SIZE = 10


@dataclass
class MatchingInstance:
    """Both sides' preference orders of one matching problem."""

    proposer_prefs: List[PreferenceOrder]
    receiver_prefs: List[PreferenceOrder]

    @property
    def size(self) -> int:
        return max(len(self.proposer_prefs), len(self.receiver_prefs))

    def to_dict(self) -> Dict[str, Any]:
        def side(prefs: List[PreferenceOrder]) -> List[Dict[str, Any]]:
            return [
                {"index": p.owner.index, "ranking": [a.index for a in p.ranking], "quota": p.quota}
                for p in prefs
            ]

        return {"proposers": side(self.proposer_prefs), "receivers": side(self.receiver_prefs)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MatchingInstance":
        def side(rows: List[Dict[str, Any]], owner_side: Side) -> List[PreferenceOrder]:
            return [
                PreferenceOrder(
                    owner=AgentId(owner_side, row["index"]),
                    ranking=tuple(AgentId(owner_side.opposite, i) for i in row["ranking"]),
                    quota=row["quota"],
                )
                for row in rows
            ]

        return cls(
            proposer_prefs=side(data["proposers"], Side.PROPOSER),
            receiver_prefs=side(data["receivers"], Side.RECEIVER),
        )


def random_instance(
    rng: np.random.Generator, max_size: int, max_quota: Optional[int] = None
) -> MatchingInstance:
    """
    Draw a random instance with 1..max_size agents per side.

    Every agent ranks a random subset of the opposite side in random order.
    Quotas go up to 2 on oracle-sized instances and up to 3 otherwise.
    """
    num_proposers = int(rng.integers(1, max_size + 1))
    num_receivers = int(rng.integers(1, max_size + 1))
    if max_quota is None:
        max_quota = 2 if max(num_proposers, num_receivers) <= ORACLE_LIMIT else 3

    def side(count: int, others: int, owner_side: Side) -> List[PreferenceOrder]:
        prefs = []
        for i in range(count):
            length = int(rng.integers(0, others + 1))
            order = rng.permutation(others)[:length]
            prefs.append(
                PreferenceOrder(
                    owner=AgentId(owner_side, i),
                    ranking=tuple(AgentId(owner_side.opposite, int(j)) for j in order),
                    quota=int(rng.integers(1, max_quota + 1)),
                )
            )
        return prefs

    return MatchingInstance(
        proposer_prefs=side(num_proposers, num_receivers, Side.PROPOSER),
        receiver_prefs=side(num_receivers, num_proposers, Side.RECEIVER),
    )


def enumerate_matchings(
    proposer_prefs: PreferenceInput, receiver_prefs: PreferenceInput
) -> Iterator[Matching]:
    """Yield every quota-feasible matching over mutually acceptable pairs."""
    proposers = index_preferences(proposer_prefs, Side.PROPOSER)
    receivers = index_preferences(receiver_prefs, Side.RECEIVER)
    order = sorted(proposers, key=lambda a: a.index)
    acceptable = {
        v: [s for s in proposers[v].ranking if s in receivers and receivers[s].accepts(v)]
        for v in order
    }
    load = {s: 0 for s in receivers}

    def assign(position: int, chosen: List[tuple]) -> Iterator[Matching]:
        if position == len(order):
            yield Matching(frozenset(chosen))
            return
        v = order[position]
        options = acceptable[v]

        def extend(start: int, taken: int) -> Iterator[Matching]:
            yield from assign(position + 1, chosen)
            if taken == proposers[v].quota:
                return
            for i in range(start, len(options)):
                s = options[i]
                if load[s] >= receivers[s].quota:
                    continue
                load[s] += 1
                chosen.append((v, s))
                yield from extend(i + 1, taken + 1)
                chosen.pop()
                load[s] -= 1

        yield from extend(0, 0)

    yield from assign(0, [])


def enumerate_stable_matchings(
    proposer_prefs: PreferenceInput,
    receiver_prefs: PreferenceInput,
    max_agents: int = ORACLE_LIMIT,
) -> List[Matching]:
    """Brute-force every pairwise-stable matching of a small instance."""
    proposers = index_preferences(proposer_prefs, Side.PROPOSER)
    receivers = index_preferences(receiver_prefs, Side.RECEIVER)
    if max(len(proposers), len(receivers)) > max_agents:
        raise ValueError(
            f"Brute-force enumeration is limited to {max_agents} agents per side"
        )
    p_rules = {a: ChoiceFunction(p) for a, p in proposers.items()}
    r_rules = {a: ChoiceFunction(p) for a, p in receivers.items()}
    return [
        m
        for m in enumerate_matchings(proposers, receivers)
        if find_instability(m, p_rules, r_rules).stable
    ]


@dataclass
class InstanceCheck:
    """Property verdicts for one instance."""

    structurally_valid: bool
    stable: bool
    trace_holds: bool
    oracle_agrees: Optional[bool]
    deterministic: bool = True
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class VerificationSummary:
    """Pass/fail counts of a verification run."""

    trials: int
    passed: int
    failed: int
    oracle_checked: int
    counterexample: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.failed == 0


class VerificationSuite:
    """Run the matching theorems against random seeded instances."""

    def __init__(
        self,
        max_size: int = ORACLE_LIMIT,
        receiver_choice_factory: Optional[Callable[[PreferenceOrder], ChoiceRule]] = None,
    ):
        """
        Initialize verification suite.

        Args:
            max_size: Largest number of agents per side in a random instance
            receiver_choice_factory: Replaces every receiver's choice rule inside the
                engine; the checks still use the true preferences (fault injection)
        """
        if not 1 <= max_size <= MAX_VERIFY_SIZE:
            raise ValueError(f"max_size must be in 1..{MAX_VERIFY_SIZE}, got {max_size}")
        self.max_size = max_size
        self.receiver_choice_factory = receiver_choice_factory
        self.audit_log: List[Dict[str, Any]] = []

    def _run_engine(self, instance: MatchingInstance):
        overrides = None
        if self.receiver_choice_factory is not None:
            overrides = {
                p.owner: self.receiver_choice_factory(p) for p in instance.receiver_prefs
            }
        return run_deferred_acceptance(
            instance.proposer_prefs, instance.receiver_prefs, receiver_choice=overrides
        )

    def check_instance(self, instance: MatchingInstance) -> InstanceCheck:
        """Run the engine twice on one instance and check every property."""
        matching, trace = self._run_engine(instance)
        repeat_matching, repeat_trace = self._run_engine(instance)

        failures = []
        deterministic = (
            matching == repeat_matching and trace.to_lines() == repeat_trace.to_lines()
        )
        if not deterministic:
            failures.append("nondeterministic output: a second run gave another matching or trace")

        valid = is_valid_matching(matching, instance.proposer_prefs, instance.receiver_prefs)
        if not valid:
            failures.append("matching violates quotas")

        stability = is_pairwise_stable(matching, instance.proposer_prefs, instance.receiver_prefs)
        if not stability.stable:
            v, s = stability.blocking_pair
            failures.append(f"unstable ({stability.reason}) at ({v}, {s})")

        trace_report = verify_trace_propositions(trace)
        failures.extend(str(v) for v in trace_report.violations)

        oracle_agrees = None
        if instance.size <= ORACLE_LIMIT:
            stable_set = enumerate_stable_matchings(
                instance.proposer_prefs, instance.receiver_prefs
            )
            oracle_agrees = matching in stable_set
            if not oracle_agrees:
                failures.append("output not among brute-force stable matchings")

        return InstanceCheck(
            structurally_valid=valid,
            stable=stability.stable,
            trace_holds=trace_report.holds,
            oracle_agrees=oracle_agrees,
            deterministic=deterministic,
            failures=failures,
        )

    def run(self, trials: int, seed: int = 0) -> VerificationSummary:
        """Check `trials` random instances drawn from one seeded stream."""
        if trials < 0:
            raise ValueError(f"trials must be non-negative, got {trials}")
        rng = np.random.default_rng(seed)
        passed = failed = oracle_checked = 0
        counterexample = None

        for trial in range(trials):
            instance = random_instance(rng, self.max_size)
            check = self.check_instance(instance)
            if check.oracle_agrees is not None:
                oracle_checked += 1
            if check.passed:
                passed += 1
                continue
            failed += 1
            logger.warning("trial %d failed: %s", trial, "; ".join(check.failures))
            if counterexample is None:
                counterexample = {
                    "trial": trial,
                    "seed": seed,
                    "failures": check.failures,
                    "instance": instance.to_dict(),
                }

        summary = VerificationSummary(trials, passed, failed, oracle_checked, counterexample)
        self._log_run(summary, seed)
        return summary

    def _log_run(self, summary: VerificationSummary, seed: int) -> None:
        """Log the run for audit purposes."""
        self.audit_log.append(
            {
                "seed": seed,
                "max_size": self.max_size,
                "trials": summary.trials,
                "passed": summary.passed,
                "failed": summary.failed,
                "oracle_checked": summary.oracle_checked,
            }
        )

    def get_audit_log(self) -> List[Dict[str, Any]]:
        """Get audit log of verification runs."""
        return self.audit_log
