"""Preference orders of both sides: SBSs rank videos, videos rank SBSs."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .network import Topology, World
from .popularity import LocalPopularityTable, i_interests, i_social
from .types import AgentId, FactorReading, PopularityMode, PreferenceOrder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExpectedDemand:
    """Predicted requesters of each video at each SBS."""

    requesters: Dict[Tuple[int, int], Tuple[int, ...]] = field(default_factory=dict)

    def requesters_of(self, sbs: int, video: int) -> Tuple[int, ...]:
        """UEs expected to request the video through the SBS, possibly none."""
        return self.requesters.get((sbs, video), ())

    def mean_radio(self, topology: Topology, sbs: int, video: int) -> Optional[float]:
        """Mean radio capacity over the expected requesters, None if there are none."""
        ues = self.requesters_of(sbs, video)
        if not ues:
            return None
        return float(np.mean(topology.radio_capacity[list(ues)]))


def expected_demand(world: World, popularity: LocalPopularityTable) -> ExpectedDemand:
    """
    Predict who will request each video where.

    Zipf mode: every UE attached to the SBS when P(m, v) > 0. Social mode:
    friends of the sharer attached to the SBS whose social or interest term
    is positive.
    """
    topology, catalog = world.topology, world.catalog
    requesters: Dict[Tuple[int, int], Tuple[int, ...]] = {}

    if popularity.mode is PopularityMode.ZIPF:
        for sbs in range(topology.num_sbs):
            ues = tuple(int(u) for u in topology.ues_at(sbs))
            if not ues:
                continue
            for video in np.flatnonzero(popularity.row(sbs) > 0):
                requesters[(sbs, int(video))] = ues
        return ExpectedDemand(requesters)

    settings = world.config.popularity
    gamma, reading = settings.gamma, settings.factor_reading
    for video in range(catalog.num_videos):
        sharer = int(world.history.sharer_of[video])
        category = int(catalog.category[video])
        by_sbs: Dict[int, List[int]] = {}
        for friend in world.graph.friends(sharer):
            interest_owner = friend if reading is FactorReading.VIEWER else sharer
            interest = gamma * i_social(world.history, world.graph, friend, sharer, reading) + (
                1.0 - gamma
            ) * i_interests(world.history, interest_owner, category)
            if interest > 0:
                by_sbs.setdefault(int(topology.attachment[friend]), []).append(friend)
        for sbs, friends in by_sbs.items():
            requesters[(sbs, video)] = tuple(friends)
    return ExpectedDemand(requesters)


def download_time(
    topology: Topology,
    demand: ExpectedDemand,
    sps: int,
    sbs: int,
    video: int,
    size: float = 1.0,
) -> Optional[float]:
    """
    Expected download time of a video through an SBS, in time slots.

    size / min(b_ij, mean radio capacity of the expected requesters at j).
    None when j has no expected requester or no link to the owner SPS.
    """
    if not topology.is_connected(sps, sbs):
        return None
    mean_radio = demand.mean_radio(topology, sbs, video)
    if mean_radio is None:
        return None
    return size / min(topology.backhaul(sps, sbs), mean_radio)


def idle_download_time(
    topology: Topology, sps: int, sbs: int, size: float = 1.0
) -> Optional[float]:
    """
    Download time through an SBS with no expected requester of the video.

    Uses the mean radio capacity of every UE attached to the SBS, or the
    backhaul alone when none is attached. None without a link to the SPS.
    """
    if not topology.is_connected(sps, sbs):
        return None
    capacity = topology.backhaul(sps, sbs)
    attached = topology.ues_at(sbs)
    if len(attached):
        capacity = min(capacity, float(np.mean(topology.radio_capacity[attached])))
    return size / capacity


@dataclass
class PreferenceProfile:
    """Preference orders for every SBS with storage and every video that can reach one."""

    sbs_prefs: Dict[int, PreferenceOrder]
    video_prefs: Dict[int, PreferenceOrder]

    def proposer_prefs(self) -> List[PreferenceOrder]:
        return [self.video_prefs[v] for v in sorted(self.video_prefs)]

    def receiver_prefs(self) -> List[PreferenceOrder]:
        return [self.sbs_prefs[s] for s in sorted(self.sbs_prefs)]

    def to_dict(self) -> Dict[str, Any]:
        def side(prefs: Dict[int, PreferenceOrder]) -> Dict[str, Any]:
            return {
                str(i): {"ranking": [a.index for a in p.ranking], "quota": p.quota}
                for i, p in sorted(prefs.items())
            }

        return {"sbs": side(self.sbs_prefs), "videos": side(self.video_prefs)}


def build_preference_profile(
    world: World,
    popularity: LocalPopularityTable,
    video_quota_cap: Optional[int] = None,
    demand: Optional[ExpectedDemand] = None,
) -> PreferenceProfile:
    """
    Build both sides' preference orders.

    SBSs rank videos by descending P with ties broken by video index;
    zero-popularity videos are still ranked, last. Videos rank every storing
    SBS connected to their owner: first those with expected requesters by
    ascending download time, then the rest by their idle download time, ties
    broken by SBS index. A video's quota is the number of SBSs it ranks,
    capped by video_quota_cap. SBSs with zero storage and videos whose owner
    reaches no storing SBS take no part in the matching.
    """
    topology, catalog = world.topology, world.catalog
    if popularity.values.shape != (topology.num_sbs, catalog.num_videos):
        raise ValueError("popularity table does not cover every (SBS, video) pair")
    if demand is None:
        demand = expected_demand(world, popularity)

    storing = [s for s in range(topology.num_sbs) if topology.storage_quota[s] >= 1]

    video_prefs: Dict[int, PreferenceOrder] = {}
    for video in range(catalog.num_videos):
        sps = int(catalog.owner[video])
        timed = []
        for sbs in storing:
            t = download_time(topology, demand, sps, sbs, video, catalog.size)
            if t is not None:
                timed.append((0, t, sbs))
                continue
            t = idle_download_time(topology, sps, sbs, catalog.size)
            if t is not None:
                timed.append((1, t, sbs))
        if not timed:
            continue
        timed.sort()
        quota = len(timed) if video_quota_cap is None else min(len(timed), video_quota_cap)
        video_prefs[video] = PreferenceOrder(
            owner=AgentId.proposer(video),
            ranking=tuple(AgentId.receiver(sbs) for _, _, sbs in timed),
            quota=quota,
        )

    sbs_prefs: Dict[int, PreferenceOrder] = {}
    proposing = sorted(video_prefs)
    for sbs in storing:
        row = popularity.row(sbs)
        ranked = sorted(proposing, key=lambda v: (-row[v], v))
        sbs_prefs[sbs] = PreferenceOrder(
            owner=AgentId.receiver(sbs),
            ranking=tuple(AgentId.proposer(v) for v in ranked),
            quota=int(topology.storage_quota[sbs]),
        )

    logger.debug(
        "profile: %d SBSs with storage, %d proposing videos (of %d)",
        len(storing),
        len(video_prefs),
        catalog.num_videos,
    )
    return PreferenceProfile(sbs_prefs=sbs_prefs, video_prefs=video_prefs)
