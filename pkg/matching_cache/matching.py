"""Many-to-many matching engine: choice functions, deferred acceptance and verifiers.

Proposers are videos (their SPS acts on their behalf) and receivers are SBSs.
Choice functions are quota truncations of a strict ranking; agents missing from
a ranking are unacceptable to its owner. Any callable with the
``ChoiceRule`` signature can be swapped in per agent for testing.
"""

import heapq
import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Optional,
    Tuple,
    Union,
)

from .exceptions import NonTerminationError
from .types import AgentId, PreferenceOrder, Side

logger = logging.getLogger(__name__)

ChoiceRule = Callable[[FrozenSet[AgentId]], FrozenSet[AgentId]]
Pair = Tuple[AgentId, AgentId]
PreferenceInput = Union[Iterable[PreferenceOrder], Mapping[AgentId, PreferenceOrder]]

SUBSTITUTABILITY_GUARD = 15


class ChoiceFunction:
    """Quota-truncation choice function derived from a PreferenceOrder."""

    def __init__(self, pref: PreferenceOrder):
        self.pref = pref
        self._position = {agent: i for i, agent in enumerate(pref.ranking)}

    def __call__(self, candidates: Iterable[AgentId]) -> FrozenSet[AgentId]:
        acceptable = [a for a in set(candidates) if a in self._position]
        if len(acceptable) <= self.pref.quota:
            return frozenset(acceptable)
        return frozenset(
            heapq.nsmallest(self.pref.quota, acceptable, key=self._position.__getitem__)
        )

    def __repr__(self) -> str:
        return f"ChoiceFunction(owner={self.pref.owner}, quota={self.pref.quota})"


def choice_set(pref: PreferenceOrder, candidates: Iterable[AgentId]) -> FrozenSet[AgentId]:
    """Return the min(quota, acceptable) highest-ranked members of candidates."""
    return ChoiceFunction(pref)(candidates)


@dataclass(frozen=True)
class Matching:
    """Set of (proposer, receiver) pairs with per-agent partner lookup."""

    pairs: FrozenSet[Pair] = frozenset()
    _partners: Dict[AgentId, FrozenSet[AgentId]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        partners: Dict[AgentId, set] = {}
        for proposer, receiver in self.pairs:
            if proposer.side is not Side.PROPOSER or receiver.side is not Side.RECEIVER:
                raise ValueError(f"Pair ({proposer}, {receiver}) is not proposer-receiver")
            partners.setdefault(proposer, set()).add(receiver)
            partners.setdefault(receiver, set()).add(proposer)
        object.__setattr__(
            self, "_partners", {agent: frozenset(p) for agent, p in partners.items()}
        )

    def partners(self, agent: AgentId) -> FrozenSet[AgentId]:
        """µ(agent): the opposite-side agents matched to agent."""
        return self._partners.get(agent, frozenset())

    def sorted_pairs(self) -> List[Pair]:
        """Pairs ordered by (video index, SBS index)."""
        return sorted(self.pairs, key=lambda p: (p[0].index, p[1].index))

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> Dict[str, List[List[int]]]:
        """Serialize as {"pairs": [[video, sbs], ...]} in sorted order."""
        return {"pairs": [[v.index, s.index] for v, s in self.sorted_pairs()]}


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round of deferred acceptance."""

    index: int
    proposals: FrozenSet[Pair]
    rejections: FrozenSet[Pair]
    choice_sets: Mapping[AgentId, FrozenSet[AgentId]]
    received: Mapping[AgentId, FrozenSet[AgentId]]

    def to_line(self) -> str:
        """One log line: round index, proposals and rejections."""
        proposals = ",".join(f"{v}>{s}" for v, s in _sorted_pairs(self.proposals))
        rejections = ",".join(f"{s}!{v}" for v, s in _sorted_pairs(self.rejections))
        return (
            f"round={self.index} proposals={len(self.proposals)} [{proposals}] "
            f"rejections={len(self.rejections)} [{rejections}]"
        )


@dataclass
class MatchingTrace:
    """Per-round history of a deferred acceptance run, with the preferences it used."""

    proposer_prefs: Dict[AgentId, PreferenceOrder]
    receiver_prefs: Dict[AgentId, PreferenceOrder]
    rounds: List[RoundRecord] = field(default_factory=list)

    @property
    def num_rounds(self) -> int:
        """Rounds run, including the final round without rejections."""
        return len(self.rounds)

    @property
    def total_rejections(self) -> int:
        return sum(len(r.rejections) for r in self.rounds)

    def to_lines(self) -> List[str]:
        """to_line() of every round, in order."""
        return [record.to_line() for record in self.rounds]

    def to_dict(self) -> Dict[str, object]:
        """Both preference sides plus the round lines, for JSON export."""
        def prefs_dict(prefs: Mapping[AgentId, PreferenceOrder]) -> Dict[str, object]:
            return {
                str(owner): {"ranking": [a.index for a in p.ranking], "quota": p.quota}
                for owner, p in sorted(prefs.items(), key=lambda kv: kv[0].index)
            }

        return {
            "proposers": prefs_dict(self.proposer_prefs),
            "receivers": prefs_dict(self.receiver_prefs),
            "rounds": self.to_lines(),
        }


def write_trace_log(trace: MatchingTrace, filepath: Union[str, Path]) -> None:
    """Write a trace to a text file, one round per line."""
    with open(filepath, "w") as f:
        for line in trace.to_lines():
            f.write(line + "\n")


@dataclass
class StabilityReport:
    """Outcome of a pairwise-stability check."""

    stable: bool
    blocking_pair: Optional[Pair] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.stable


class Proposition(Enum):
    """Trace properties of the deferred acceptance run."""

    ROUND_NUMBERING = "round_numbering"
    OFFERS_REMAIN_OPEN = "offers_remain_open"
    REJECTIONS_ARE_FINAL = "rejections_are_final"


@dataclass
class PropositionViolation:
    proposition: Proposition
    round: int
    proposer: Optional[AgentId]
    receiver: Optional[AgentId]
    detail: str

    def __str__(self) -> str:
        return f"[{self.proposition.value}] round {self.round}: {self.detail}"


@dataclass
class TraceReport:
    """Outcome of a trace check; empty violations means every proposition held."""

    violations: List[PropositionViolation] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.holds


def _sorted_pairs(pairs: Iterable[Pair]) -> List[Pair]:
    return sorted(pairs, key=lambda p: (p[0].index, p[1].index))


def index_preferences(prefs: PreferenceInput, side: Side) -> Dict[AgentId, PreferenceOrder]:
    """
    Key preference orders by owner and check they belong to one side.

    Args:
        prefs: Preference orders as a sequence or a mapping keyed by owner
        side: The side every owner must be on

    Returns:
        Dict from owner AgentId to its PreferenceOrder

    Raises:
        ValueError: On an owner from the wrong side or a duplicate owner
    """
    items = prefs.values() if isinstance(prefs, Mapping) else prefs
    indexed: Dict[AgentId, PreferenceOrder] = {}
    for pref in items:
        if pref.owner.side is not side:
            raise ValueError(f"{pref.owner} is not a {side.value}")
        if pref.owner in indexed:
            raise ValueError(f"Duplicate preference order for {pref.owner}")
        indexed[pref.owner] = pref
    return indexed


def _choice_rules(
    prefs: Mapping[AgentId, PreferenceOrder],
    overrides: Optional[Mapping[AgentId, ChoiceRule]],
) -> Dict[AgentId, ChoiceRule]:
    rules: Dict[AgentId, ChoiceRule] = {a: ChoiceFunction(p) for a, p in prefs.items()}
    if overrides:
        rules.update(overrides)
    return rules


def _check_references(
    prefs: Mapping[AgentId, PreferenceOrder], others: Mapping[AgentId, PreferenceOrder]
) -> None:
    for owner, pref in prefs.items():
        missing = [a for a in pref.ranking if a not in others]
        if missing:
            raise ValueError(
                f"{owner} ranks agents without preferences: {', '.join(map(str, missing))}"
            )


def run_deferred_acceptance(
    proposer_prefs: PreferenceInput,
    receiver_prefs: PreferenceInput,
    proposer_choice: Optional[Mapping[AgentId, ChoiceRule]] = None,
    receiver_choice: Optional[Mapping[AgentId, ChoiceRule]] = None,
) -> Tuple[Matching, MatchingTrace]:
    """
    Run proposer-side deferred acceptance with simultaneous rounds.

    Each round every proposer offers itself to its choice set among the
    receivers that have not rejected it; each receiver keeps its choice set of
    the offers and rejects the rest. Stops after the first round without
    rejections.

    Args:
        proposer_prefs: Preference orders of the proposers (videos)
        receiver_prefs: Preference orders of the receivers (SBSs)
        proposer_choice: Optional per-agent choice rule overrides
        receiver_choice: Optional per-agent choice rule overrides

    Returns:
        The final Matching and the full MatchingTrace
    """
    proposers = index_preferences(proposer_prefs, Side.PROPOSER)
    receivers = index_preferences(receiver_prefs, Side.RECEIVER)
    _check_references(proposers, receivers)
    _check_references(receivers, proposers)

    p_rules = _choice_rules(proposers, proposer_choice)
    r_rules = _choice_rules(receivers, receiver_choice)
    proposer_order = sorted(proposers, key=lambda a: a.index)
    receiver_order = sorted(receivers, key=lambda a: a.index)

    trace = MatchingTrace(proposer_prefs=proposers, receiver_prefs=receivers)
    rejected_by: Dict[AgentId, set] = {v: set() for v in proposer_order}
    held: Dict[AgentId, FrozenSet[AgentId]] = {s: frozenset() for s in receiver_order}
    max_rounds = len(proposers) * len(receivers) + 1

    k = 0
    while True:
        if k >= max_rounds:
            raise NonTerminationError(
                f"Deferred acceptance did not terminate within {max_rounds} rounds"
            )

        choice_sets: Dict[AgentId, FrozenSet[AgentId]] = {}
        received: Dict[AgentId, set] = {s: set() for s in receiver_order}
        for v in proposer_order:
            available = frozenset(s for s in proposers[v].ranking if s not in rejected_by[v])
            chosen = frozenset(p_rules[v](available)) & available
            choice_sets[v] = chosen
            for s in chosen:
                received[s].add(v)

        rejections = set()
        for s in receiver_order:
            offered = frozenset(received[s])
            kept = frozenset(r_rules[s](offered)) & offered
            for v in offered - kept:
                rejections.add((v, s))
                rejected_by[v].add(s)
            held[s] = kept

        record = RoundRecord(
            index=k,
            proposals=frozenset((v, s) for v, chosen in choice_sets.items() for s in chosen),
            rejections=frozenset(rejections),
            choice_sets=choice_sets,
            received={s: frozenset(vs) for s, vs in received.items()},
        )
        trace.rounds.append(record)
        logger.debug(
            "round %d: %d proposals, %d rejections",
            k,
            len(record.proposals),
            len(record.rejections),
        )
        k += 1
        if not rejections:
            break

    matching = Matching(frozenset((v, s) for s, vs in held.items() for v in vs))
    logger.debug(
        "deferred acceptance finished in %d rounds with %d pairs", k, len(matching)
    )
    return matching, trace


def is_valid_matching(
    matching: Matching, proposer_prefs: PreferenceInput, receiver_prefs: PreferenceInput
) -> bool:
    """Check the structural conditions: known agents and quotas on both sides."""
    proposers = index_preferences(proposer_prefs, Side.PROPOSER)
    receivers = index_preferences(receiver_prefs, Side.RECEIVER)
    for v, s in matching.pairs:
        if v not in proposers or s not in receivers:
            return False
    for prefs in (proposers, receivers):
        for agent, pref in prefs.items():
            if len(matching.partners(agent)) > pref.quota:
                return False
    return True


def is_pairwise_stable(
    matching: Matching,
    proposer_prefs: PreferenceInput,
    receiver_prefs: PreferenceInput,
    proposer_choice: Optional[Mapping[AgentId, ChoiceRule]] = None,
    receiver_choice: Optional[Mapping[AgentId, ChoiceRule]] = None,
) -> StabilityReport:
    """
    Check pairwise stability of a matching.

    A matching is unstable if some agent would drop one of its partners
    (individual rationality), or if an unmatched pair (v, s) has s in
    C_v(µ(v) ∪ {s}) and v in C_s(µ(s) ∪ {v}).
    """
    proposers = index_preferences(proposer_prefs, Side.PROPOSER)
    receivers = index_preferences(receiver_prefs, Side.RECEIVER)
    return find_instability(
        matching,
        _choice_rules(proposers, proposer_choice),
        _choice_rules(receivers, receiver_choice),
    )


def find_instability(
    matching: Matching,
    p_rules: Mapping[AgentId, ChoiceRule],
    r_rules: Mapping[AgentId, ChoiceRule],
) -> StabilityReport:
    """Stability check over prebuilt choice rules; see is_pairwise_stable."""
    proposer_order = sorted(p_rules, key=lambda a: a.index)
    receiver_order = sorted(r_rules, key=lambda a: a.index)

    for rules, order in ((p_rules, proposer_order), (r_rules, receiver_order)):
        for agent in order:
            current = matching.partners(agent)
            dropped = current - rules[agent](current)
            if dropped:
                other = min(dropped, key=lambda a: a.index)
                pair = (agent, other) if agent.side is Side.PROPOSER else (other, agent)
                return StabilityReport(False, pair, "individually_irrational")

    for v in proposer_order:
        mu_v = matching.partners(v)
        for s in receiver_order:
            if s in mu_v:
                continue
            if s not in p_rules[v](mu_v | {s}):
                continue
            if v in r_rules[s](matching.partners(s) | {v}):
                return StabilityReport(False, (v, s), "blocking_pair")

    return StabilityReport(True)


def check_substitutability(
    pref: Union[PreferenceOrder, ChoiceRule],
    universe: Iterable[AgentId],
    guard: int = SUBSTITUTABILITY_GUARD,
) -> bool:
    """
    Exhaustively check that removing one chosen agent never drops another.

    Args:
        pref: A PreferenceOrder (checked through its ChoiceFunction) or any ChoiceRule
        universe: Agents whose subsets are enumerated
        guard: Largest universe accepted

    Returns:
        True if for every subset S and k, k' in C(S), k is in C(S without k')
    """
    agents = sorted(set(universe), key=lambda a: a.sort_key)
    if len(agents) > guard:
        raise ValueError(
            f"Universe of {len(agents)} agents exceeds the enumeration guard of {guard}"
        )
    rule: ChoiceRule = ChoiceFunction(pref) if isinstance(pref, PreferenceOrder) else pref

    for size in range(len(agents) + 1):
        for subset in combinations(agents, size):
            offered = frozenset(subset)
            chosen = rule(offered)
            for removed in chosen:
                after = rule(offered - {removed})
                if any(k not in after for k in chosen if k != removed):
                    return False
    return True


def verify_trace_propositions(
    trace: MatchingTrace,
    receiver_choice: Optional[Mapping[AgentId, ChoiceRule]] = None,
) -> TraceReport:
    """
    Check that offers remain open and that rejections are final.

    Offers remain open: a receiver in C_v at round k-1 that did not reject v is
    still in C_v at round k. Rejections are final: once s rejects v at round k,
    v is never in C_s(P_s(p) ∪ {v}) for p >= k, and v never proposes to s again.
    """
    report = TraceReport()
    r_rules = _choice_rules(trace.receiver_prefs, receiver_choice)

    for position, record in enumerate(trace.rounds):
        if record.index != position:
            report.violations.append(
                PropositionViolation(
                    Proposition.ROUND_NUMBERING,
                    position,
                    None,
                    None,
                    f"round at position {position} is numbered {record.index}",
                )
            )

    for k in range(1, len(trace.rounds)):
        previous, current = trace.rounds[k - 1], trace.rounds[k]
        for v, chosen in sorted(previous.choice_sets.items(), key=lambda kv: kv[0].index):
            still_open = current.choice_sets.get(v, frozenset())
            for s in sorted(chosen, key=lambda a: a.index):
                if (v, s) not in previous.rejections and s not in still_open:
                    report.violations.append(
                        PropositionViolation(
                            Proposition.OFFERS_REMAIN_OPEN,
                            k,
                            v,
                            s,
                            f"{s} held {v} at round {k - 1} but left its choice set",
                        )
                    )

    for k, record in enumerate(trace.rounds):
        for v, s in _sorted_pairs(record.rejections):
            rule = r_rules.get(s)
            for p in range(k, len(trace.rounds)):
                offered = trace.rounds[p].received.get(s, frozenset())
                if p > k and v in offered:
                    report.violations.append(
                        PropositionViolation(
                            Proposition.REJECTIONS_ARE_FINAL,
                            p,
                            v,
                            s,
                            f"{v} proposed to {s} again after rejection at round {k}",
                        )
                    )
                if rule is not None and v in rule(offered | {v}):
                    report.violations.append(
                        PropositionViolation(
                            Proposition.REJECTIONS_ARE_FINAL,
                            p,
                            v,
                            s,
                            f"{s} would choose {v} at round {p} after rejecting it "
                            f"at round {k}",
                        )
                    )

    return report
