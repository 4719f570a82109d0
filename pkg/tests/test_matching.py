"""Tests for the matching engine."""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matching_cache.matching import (
    ChoiceFunction,
    Matching,
    MatchingTrace,
    Proposition,
    check_substitutability,
    choice_set,
    is_pairwise_stable,
    is_valid_matching,
    run_deferred_acceptance,
    verify_trace_propositions,
    write_trace_log,
)
from matching_cache.types import AgentId, PreferenceOrder
from matching_cache.verification import enumerate_stable_matchings, random_instance

V = AgentId.proposer
S = AgentId.receiver


def video(index, ranking, quota=1):
    return PreferenceOrder(V(index), tuple(S(i) for i in ranking), quota)


def sbs(index, ranking, quota=1):
    return PreferenceOrder(S(index), tuple(V(i) for i in ranking), quota)


@pytest.fixture
def two_by_two():
    """Both videos want s0 first; s0 prefers v0."""
    proposers = [video(0, [0, 1]), video(1, [0, 1])]
    receivers = [sbs(0, [0, 1]), sbs(1, [1, 0])]
    return proposers, receivers


class TestPreferenceOrder:
    """Test suite for PreferenceOrder validation."""

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="duplicates"):
            video(0, [1, 1])

    def test_rejects_zero_quota(self):
        with pytest.raises(ValueError, match="at least 1"):
            video(0, [0], quota=0)

    def test_rejects_same_side(self):
        with pytest.raises(ValueError, match="same-side"):
            PreferenceOrder(V(0), (V(1),), 1)

    def test_rejects_negative_index(self):
        with pytest.raises(ValueError):
            AgentId.proposer(-1)

    def test_rank_of(self):
        pref = sbs(0, [2, 0, 1])
        assert pref.rank_of(V(2)) == 0
        assert pref.rank_of(V(1)) == 2
        assert not pref.accepts(V(3))


class TestChoiceSet:
    """Test suite for quota-truncation choice functions."""

    def test_all_candidates_fit(self):
        pref = sbs(0, [0, 1, 2], quota=2)
        assert choice_set(pref, {V(1), V(2)}) == {V(1), V(2)}

    def test_truncates_to_best(self):
        pref = sbs(0, [0, 1, 2], quota=1)
        assert choice_set(pref, {V(1), V(2), V(0)}) == {V(0)}

    def test_empty_candidates(self):
        assert choice_set(sbs(0, [0, 1], quota=3), set()) == frozenset()

    def test_unranked_never_chosen(self):
        pref = sbs(0, [0], quota=3)
        assert choice_set(pref, {V(0), V(5)}) == {V(0)}

    @given(
        st.permutations(range(6)),
        st.integers(min_value=1, max_value=6),
        st.sets(st.integers(min_value=0, max_value=7)),
    )
    def test_idempotent_and_bounded(self, ranking, quota, candidates):
        pref = sbs(0, ranking, quota)
        offered = {V(i) for i in candidates}
        chosen = choice_set(pref, offered)
        assert chosen <= offered
        assert len(chosen) <= quota
        assert choice_set(pref, chosen) == chosen

    def test_repr_names_owner(self):
        assert "s0" in repr(ChoiceFunction(sbs(0, [0])))


class TestDeferredAcceptance:
    """Test suite for run_deferred_acceptance."""

    def test_mutual_first_choice(self):
        matching, trace = run_deferred_acceptance([video(1, [1])], [sbs(1, [1])])
        assert matching.pairs == {(V(1), S(1))}
        assert trace.num_rounds == 1
        assert trace.total_rejections == 0

    def test_one_rejection(self, two_by_two):
        proposers, receivers = two_by_two
        matching, trace = run_deferred_acceptance(proposers, receivers)

        assert matching.pairs == {(V(0), S(0)), (V(1), S(1))}
        assert trace.num_rounds == 2
        assert trace.rounds[0].rejections == {(V(1), S(0))}
        assert trace.rounds[1].rejections == frozenset()

    def test_many_to_many(self):
        proposers = [video(0, [0, 1], quota=2), video(1, [0, 1], quota=2), video(2, [1], quota=1)]
        receivers = [sbs(0, [1, 0, 2], quota=1), sbs(1, [2, 0, 1], quota=2)]
        matching, _ = run_deferred_acceptance(proposers, receivers)

        assert matching.partners(S(0)) == {V(1)}
        assert matching.partners(S(1)) == {V(2), V(0)}
        assert matching.partners(V(0)) == {S(1)}

    def test_unacceptable_pairs_never_match(self):
        matching, trace = run_deferred_acceptance([video(0, [0])], [sbs(0, [])])
        assert len(matching) == 0
        assert trace.rounds[0].rejections == {(V(0), S(0))}

    def test_empty_instance(self):
        matching, trace = run_deferred_acceptance([], [])
        assert len(matching) == 0
        assert trace.num_rounds == 1

    def test_rejects_dangling_reference(self):
        with pytest.raises(ValueError, match="without preferences"):
            run_deferred_acceptance([video(0, [3])], [sbs(0, [0])])

    def test_rejects_wrong_side(self):
        with pytest.raises(ValueError, match="is not a proposer"):
            run_deferred_acceptance([sbs(0, [0])], [video(0, [0])])

    def test_accepts_mappings(self, two_by_two):
        proposers, receivers = two_by_two
        as_lists, _ = run_deferred_acceptance(proposers, receivers)
        as_maps, _ = run_deferred_acceptance(
            {p.owner: p for p in proposers}, {r.owner: r for r in receivers}
        )
        assert as_lists == as_maps

    def test_trace_lines(self, two_by_two, tmp_path):
        _, trace = run_deferred_acceptance(*two_by_two)
        assert trace.to_lines() == [
            "round=0 proposals=2 [v0>s0,v1>s0] rejections=1 [s0!v1]",
            "round=1 proposals=2 [v0>s0,v1>s1] rejections=0 []",
        ]

        path = tmp_path / "trace.log"
        write_trace_log(trace, path)
        assert path.read_text().splitlines() == trace.to_lines()

        data = trace.to_dict()
        assert data["proposers"]["v0"] == {"ranking": [0, 1], "quota": 1}
        assert len(data["rounds"]) == 2

    def test_matching_to_dict(self, two_by_two):
        matching, _ = run_deferred_acceptance(*two_by_two)
        assert matching.to_dict() == {"pairs": [[0, 0], [1, 1]]}


class TestStability:
    """Test suite for the stability and validity checks."""

    def test_empty_rankings_are_stable(self):
        report = is_pairwise_stable(Matching(), [video(0, [])], [sbs(0, [])])
        assert report.stable
        assert report.blocking_pair is None

    def test_blocking_pair_witness(self):
        proposers = [video(1, [1, 2])]
        receivers = [sbs(1, [1]), sbs(2, [1])]
        report = is_pairwise_stable(Matching({(V(1), S(2))}), proposers, receivers)

        assert not report
        assert report.blocking_pair == (V(1), S(1))
        assert report.reason == "blocking_pair"

    def test_individually_irrational(self):
        report = is_pairwise_stable(Matching({(V(0), S(0))}), [video(0, [0])], [sbs(0, [])])
        assert not report.stable
        assert report.reason == "individually_irrational"
        assert report.blocking_pair == (V(0), S(0))

    def test_over_quota_is_invalid(self):
        proposers = [video(0, [0]), video(1, [0])]
        receivers = [sbs(0, [0, 1], quota=1)]
        matching = Matching({(V(0), S(0)), (V(1), S(0))})
        assert not is_valid_matching(matching, proposers, receivers)

    def test_unknown_agent_is_invalid(self):
        matching = Matching({(V(4), S(0))})
        assert not is_valid_matching(matching, [video(0, [0])], [sbs(0, [0])])

    def test_matching_rejects_reversed_pair(self):
        with pytest.raises(ValueError, match="not proposer-receiver"):
            Matching({(S(0), V(0))})


class TestSubstitutability:
    """Test suite for check_substitutability."""

    @pytest.mark.parametrize("quota", [1, 2, 3, 5])
    def test_quota_truncation_passes(self, quota):
        universe = [V(i) for i in range(5)]
        assert check_substitutability(sbs(0, [3, 1, 4, 0, 2], quota), universe)

    def test_pathological_rule_fails(self):
        a, b, c = V(0), V(1), V(2)

        def rule(offered):
            if offered == {a, b, c}:
                return frozenset({a, b})
            if offered == {a, c}:
                return frozenset({c})
            return frozenset(offered)

        assert not check_substitutability(rule, [a, b, c])

    def test_guard(self):
        with pytest.raises(ValueError, match="guard"):
            check_substitutability(sbs(0, [0]), [V(i) for i in range(16)])


class TestTracePropositions:
    """Test suite for verify_trace_propositions."""

    def test_trivial_trace_holds(self):
        _, trace = run_deferred_acceptance([video(0, [0])], [sbs(0, [0])])
        assert verify_trace_propositions(trace).holds

    def test_re_proposal_after_rejection(self, two_by_two):
        _, trace = run_deferred_acceptance(*two_by_two)
        last = trace.rounds[1]
        corrupted = replace(
            last,
            proposals=last.proposals | {(V(1), S(0))},
            received={S(0): frozenset({V(0), V(1)}), S(1): frozenset({V(1)})},
        )
        bad = MatchingTrace(trace.proposer_prefs, trace.receiver_prefs, [trace.rounds[0], corrupted])

        report = verify_trace_propositions(bad)
        assert not report.holds
        assert [v.proposition for v in report.violations] == [Proposition.REJECTIONS_ARE_FINAL]
        assert report.violations[0].round == 1
        assert (report.violations[0].proposer, report.violations[0].receiver) == (V(1), S(0))

    def test_withdrawn_offer(self, two_by_two):
        _, trace = run_deferred_acceptance(*two_by_two)
        last = trace.rounds[1]
        choice_sets = dict(last.choice_sets)
        choice_sets[V(0)] = frozenset()
        bad = MatchingTrace(
            trace.proposer_prefs,
            trace.receiver_prefs,
            [trace.rounds[0], replace(last, choice_sets=choice_sets)],
        )

        report = verify_trace_propositions(bad)
        assert [v.proposition for v in report.violations] == [Proposition.OFFERS_REMAIN_OPEN]

    def test_round_numbering(self, two_by_two):
        _, trace = run_deferred_acceptance(*two_by_two)
        bad = MatchingTrace(
            trace.proposer_prefs,
            trace.receiver_prefs,
            [trace.rounds[0], replace(trace.rounds[1], index=5)],
        )
        report = verify_trace_propositions(bad)
        assert Proposition.ROUND_NUMBERING in {v.proposition for v in report.violations}


seeds = st.integers(min_value=0, max_value=2**32 - 1)


class TestMatchingProperties:
    """Property tests over random seeded instances."""

    @settings(max_examples=300, deadline=None)
    @given(seeds)
    def test_output_is_valid_and_stable(self, seed):
        instance = random_instance(np.random.default_rng(seed), max_size=10)
        matching, trace = run_deferred_acceptance(instance.proposer_prefs, instance.receiver_prefs)

        assert is_valid_matching(matching, instance.proposer_prefs, instance.receiver_prefs)
        assert is_pairwise_stable(matching, instance.proposer_prefs, instance.receiver_prefs)
        assert verify_trace_propositions(trace).holds
        assert trace.total_rejections <= len(instance.proposer_prefs) * len(
            instance.receiver_prefs
        )

    @settings(max_examples=150, deadline=None)
    @given(seeds)
    def test_output_among_brute_force_stable_matchings(self, seed):
        instance = random_instance(np.random.default_rng(seed), max_size=4)
        matching, _ = run_deferred_acceptance(instance.proposer_prefs, instance.receiver_prefs)
        stable = enumerate_stable_matchings(instance.proposer_prefs, instance.receiver_prefs)
        assert matching in stable

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_deterministic(self, seed):
        instance = random_instance(np.random.default_rng(seed), max_size=10)
        first, first_trace = run_deferred_acceptance(
            instance.proposer_prefs, instance.receiver_prefs
        )
        second, second_trace = run_deferred_acceptance(
            instance.proposer_prefs, instance.receiver_prefs
        )
        assert first == second
        assert first_trace.to_lines() == second_trace.to_lines()

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_rejections_shrink_each_round(self, seed):
        instance = random_instance(np.random.default_rng(seed), max_size=10)
        _, trace = run_deferred_acceptance(instance.proposer_prefs, instance.receiver_prefs)
        assert len(trace.rounds[-1].rejections) == 0
        assert all(len(r.rejections) > 0 for r in trace.rounds[:-1])
