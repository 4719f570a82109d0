"""Physical and social world: SPSs, SBSs, UEs, links, catalog, friendships and histories."""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import networkx as nx
import numpy as np

from .config import ScenarioConfig
from .exceptions import TopologyError
from .types import Connectivity
from .utils import as_generator, save_json, spawn_generators, zipf_weights

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Topology:
    """
    Links and quotas of the network.

    backhaul_capacity is a (K, M) table where 0 means SPS i is not connected
    to SBS j. radio_capacity[n] is the capacity between UE n and its serving
    SBS attachment[n].
    """

    num_sps: int
    num_sbs: int
    num_ues: int
    backhaul_capacity: np.ndarray
    radio_capacity: np.ndarray
    attachment: np.ndarray
    storage_quota: np.ndarray
    backhaul_budget: np.ndarray
    radio_budget: np.ndarray
    _ues_by_sbs: Tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.backhaul_capacity.shape != (self.num_sps, self.num_sbs):
            raise TopologyError("backhaul table does not match K x M")
        if (self.backhaul_capacity < 0).any() or (self.radio_capacity <= 0).any():
            raise TopologyError("link capacities must be positive where present")
        if (self.storage_quota < 0).any():
            raise TopologyError("storage quotas must be non-negative")
        by_sbs = tuple(
            _frozen(np.flatnonzero(self.attachment == j)) for j in range(self.num_sbs)
        )
        object.__setattr__(self, "_ues_by_sbs", by_sbs)

    def is_connected(self, sps: int, sbs: int) -> bool:
        """True when SPS sps has a backhaul link to SBS sbs."""
        return bool(self.backhaul_capacity[sps, sbs] > 0)

    def backhaul(self, sps: int, sbs: int) -> float:
        """
        Backhaul capacity b(sps, sbs).

        Raises:
            KeyError: If the pair has no link
        """
        capacity = float(self.backhaul_capacity[sps, sbs])
        if capacity <= 0:
            raise KeyError(f"SPS {sps} is not connected to SBS {sbs}")
        return capacity

    def radio(self, sbs: int, ue: int) -> float:
        """Radio capacity r(sbs, ue); KeyError when the UE is attached elsewhere."""
        if int(self.attachment[ue]) != sbs:
            raise KeyError(f"UE {ue} is not attached to SBS {sbs}")
        return float(self.radio_capacity[ue])

    def ues_at(self, sbs: int) -> np.ndarray:
        """Indices of the UEs attached to an SBS, ascending."""
        return self._ues_by_sbs[sbs]

    def connected_sps(self, sbs: int) -> np.ndarray:
        """SPSs with a backhaul link to the SBS."""
        return np.flatnonzero(self.backhaul_capacity[:, sbs] > 0)

    def with_storage_quota(self, quota: Union[int, np.ndarray]) -> "Topology":
        """Copy of the topology with new storage quotas (scalar or per SBS)."""
        quota_array = np.broadcast_to(np.asarray(quota, dtype=int), (self.num_sbs,)).copy()
        return replace(self, storage_quota=_frozen(quota_array))

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready view of the capacities, attachment and storage quotas."""
        return {
            "num_sps": self.num_sps,
            "num_sbs": self.num_sbs,
            "num_ues": self.num_ues,
            "backhaul_capacity": self.backhaul_capacity.tolist(),
            "radio_capacity": self.radio_capacity.tolist(),
            "attachment": self.attachment.tolist(),
            "storage_quota": self.storage_quota.tolist(),
            "backhaul_budget": self.backhaul_budget.tolist(),
            "radio_budget": self.radio_budget.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Catalog:
    """Videos with their owner SPS and category; one uniform size in Mbit."""

    num_videos: int
    num_categories: int
    owner: np.ndarray
    category: np.ndarray
    size: float = 1.0

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"Video size must be positive, got {self.size}")
        if len(self.owner) != self.num_videos or len(self.category) != self.num_videos:
            raise ValueError("owner and category tables must cover every video")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_videos": self.num_videos,
            "num_categories": self.num_categories,
            "owner": self.owner.tolist(),
            "category": self.category.tolist(),
            "size": self.size,
        }


class SocialGraph:
    """Undirected friendship graph over UEs 0..N-1."""

    def __init__(self, graph: nx.Graph):
        if nx.number_of_selfloops(graph) > 0:
            raise ValueError("Friendship graph must be irreflexive")
        self.graph = graph
        self._friends = {
            node: tuple(sorted(graph.neighbors(node))) for node in sorted(graph.nodes)
        }

    @property
    def num_users(self) -> int:
        return self.graph.number_of_nodes()

    def friends(self, user: int) -> Tuple[int, ...]:
        return self._friends.get(user, ())

    def degree(self, user: int) -> int:
        """F_l, the number of friends of user l."""
        return len(self.friends(user))

    def are_friends(self, a: int, b: int) -> bool:
        return self.graph.has_edge(a, b)

    def edges(self) -> List[Tuple[int, int]]:
        return sorted(tuple(sorted(e)) for e in self.graph.edges)


@dataclass(frozen=True, eq=False)
class UserHistory:
    """
    Sharing and viewing counts.

    viewed_from[(l, n)] is the number of videos shared by n and viewed by l,
    defined only for friend pairs. The category tables are indexed [g, user].
    """

    viewed_from: Dict[Tuple[int, int], int]
    shared_by_category: np.ndarray
    viewed_by_category: np.ndarray
    sharer_of: np.ndarray

    def alpha(self, viewer: int, sharer: int) -> int:
        """Views user viewer made of videos shared by sharer (0 when none)."""
        return self.viewed_from.get((viewer, sharer), 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "viewed_from": [[l, n, c] for (l, n), c in sorted(self.viewed_from.items())],
            "shared_by_category": self.shared_by_category.tolist(),
            "viewed_by_category": self.viewed_by_category.tolist(),
            "sharer_of": self.sharer_of.tolist(),
        }


@dataclass(frozen=True, eq=False)
class World:
    """Everything generated for one seed."""

    config: ScenarioConfig
    topology: Topology
    catalog: Catalog
    graph: SocialGraph
    history: UserHistory

    def with_storage_quota(self, quota: Union[int, np.ndarray]) -> "World":
        """Copy of the world with new storage quotas on every SBS."""
        return replace(self, topology=self.topology.with_storage_quota(quota))

    def reachable_videos(self, sbs: int) -> np.ndarray:
        """Videos whose owner SPS has a backhaul link to the SBS."""
        connected = self.topology.backhaul_capacity[:, sbs] > 0
        return np.flatnonzero(connected[self.catalog.owner])

    def friends_at(self, user: int, sbs: int) -> List[int]:
        """Friends of user attached to sbs."""
        attachment = self.topology.attachment
        return [f for f in self.graph.friends(user) if attachment[f] == sbs]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "topology": self.topology.to_dict(),
            "catalog": self.catalog.to_dict(),
            "friendships": [list(e) for e in self.graph.edges()],
            "history": self.history.to_dict(),
        }


def generate_topology(config: ScenarioConfig, seed: Seed) -> Topology:
    """
    Build links and attachment.

    Each SBS gets B/M of backhaul split equally over its connected SPSs and
    R/M of radio split equally over its attached UEs. UEs attach uniformly at
    random. Storage quotas start at the catalog size.
    """
    net = config.network
    rng = as_generator(seed)
    K, M, N = net.num_sps, net.num_sbs, net.num_ues

    if net.connectivity is Connectivity.COMPLETE:
        connected = np.ones((K, M), dtype=bool)
    else:
        connected = rng.random((K, M)) < net.connectivity_probability

    sps_per_sbs = connected.sum(axis=0)
    isolated = np.flatnonzero(sps_per_sbs == 0)
    if isolated.size:
        raise TopologyError(
            f"SBS(s) {isolated.tolist()} have no connected SPS "
            f"(connectivity_probability={net.connectivity_probability})"
        )

    backhaul_budget = np.full(M, net.backhaul_total / M)
    backhaul = np.where(connected, (backhaul_budget / sps_per_sbs)[None, :], 0.0)

    attachment = rng.integers(0, M, N)
    ue_counts = np.bincount(attachment, minlength=M)
    radio_budget = np.full(M, net.radio_total / M)
    radio = radio_budget[attachment] / ue_counts[attachment]

    topology = Topology(
        num_sps=K,
        num_sbs=M,
        num_ues=N,
        backhaul_capacity=_frozen(backhaul),
        radio_capacity=_frozen(radio),
        attachment=_frozen(attachment),
        storage_quota=_frozen(np.full(M, net.num_videos, dtype=int)),
        backhaul_budget=_frozen(backhaul_budget),
        radio_budget=_frozen(radio_budget),
    )
    if backhaul.max() >= radio.min():
        logger.warning(
            "backhaul links are not slower than radio links (max b=%.4g, min r=%.4g)",
            backhaul.max(),
            radio.min(),
        )
    logger.debug("topology: K=%d M=%d N=%d, %d backhaul links", K, M, N, int(connected.sum()))
    return topology


def generate_social_world(
    config: ScenarioConfig, topology: Topology, seed: Seed
) -> Tuple[SocialGraph, UserHistory, Catalog]:
    """
    Draw friendships, histories and the catalog.

    Friendships follow an Erdos-Renyi process. Each user has a Zipf affinity
    over categories (randomly permuted) that drives both sharing and viewing
    counts. alpha_ln never exceeds the shares of n. Each video gets an owner
    SPS (uniform), a sharer (proportional to shares) and a category drawn from
    the sharer's affinity.
    """
    social, net = config.social, config.network
    rng = as_generator(seed)
    N, G, V = topology.num_ues, net.num_categories, net.num_videos

    graph = SocialGraph(
        nx.gnp_random_graph(N, social.edge_probability, seed=int(rng.integers(2**31)))
    )

    base = zipf_weights(G, social.category_exponent)
    affinity = np.stack([base[rng.permutation(G)] for _ in range(N)])

    total_shares = rng.poisson(social.mean_shares, N)
    total_views = rng.poisson(social.mean_views, N)
    shared = np.stack([rng.multinomial(total_shares[l], affinity[l]) for l in range(N)], axis=1)
    viewed = np.stack([rng.multinomial(total_views[l], affinity[l]) for l in range(N)], axis=1)

    viewed_from: Dict[Tuple[int, int], int] = {}
    for viewer in range(N):
        for sharer in graph.friends(viewer):
            viewed_from[(viewer, sharer)] = int(
                rng.binomial(total_shares[sharer], social.view_probability)
            )

    owner = rng.integers(0, topology.num_sps, V)
    share_mass = total_shares.sum()
    sharer_p = total_shares / share_mass if share_mass > 0 else np.full(N, 1.0 / N)
    sharer_of = rng.choice(N, size=V, p=sharer_p)
    category = np.array([rng.choice(G, p=affinity[n]) for n in sharer_of], dtype=int)

    history = UserHistory(
        viewed_from=viewed_from,
        shared_by_category=_frozen(shared),
        viewed_by_category=_frozen(viewed),
        sharer_of=_frozen(sharer_of),
    )
    catalog = Catalog(
        num_videos=V,
        num_categories=G,
        owner=_frozen(owner),
        category=_frozen(category),
        size=net.video_size,
    )
    logger.debug(
        "social world: %d friendships, %d shares, %d views",
        graph.graph.number_of_edges(),
        int(total_shares.sum()),
        int(total_views.sum()),
    )
    return graph, history, catalog


def build_world(config: ScenarioConfig, seed: int) -> World:
    """Generate the full world for a seed; the same seed reproduces it exactly."""
    streams = spawn_generators(seed)
    topology = generate_topology(config, streams["topology"])
    graph, history, catalog = generate_social_world(config, topology, streams["social"])
    return World(config=config, topology=topology, catalog=catalog, graph=graph, history=history)


def save_world(world: World, filepath: Union[str, Path]) -> None:
    """Write the world snapshot as JSON."""
    save_json(world.to_dict(), filepath)
