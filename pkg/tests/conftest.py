"""Pytest configuration and fixtures."""

from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pytest

from matching_cache.config import (
    ExperimentConfig,
    NetworkConfig,
    PopularityConfig,
    ScenarioConfig,
    SocialConfig,
)
from matching_cache.network import Catalog, SocialGraph, Topology, UserHistory, World, build_world
from matching_cache.types import PopularityMode


@pytest.fixture
def small_config():
    """Reduced zipf scenario that runs in well under a second."""
    return ScenarioConfig(
        network=NetworkConfig(num_sps=3, num_sbs=4, num_ues=20, num_videos=12, num_categories=3),
        social=SocialConfig(edge_probability=0.3),
        popularity=PopularityConfig(mode=PopularityMode.ZIPF),
        experiment=ExperimentConfig(
            beta_list=[0.25, 1.0], request_sweep=[5, 10, 20], seeds=[0, 1]
        ),
    )


@pytest.fixture
def social_config(small_config):
    """Same scenario with the social popularity pipeline."""
    small_config.popularity.mode = PopularityMode.SOCIAL
    return small_config


@pytest.fixture
def small_world(small_config):
    return build_world(small_config, seed=0)


@pytest.fixture
def make_world():
    """Build a World from hand-written tables."""

    def _make(
        attachment: Sequence[int],
        backhaul: Sequence[Sequence[float]],
        radio: Sequence[float],
        owner: Sequence[int],
        category: Optional[Sequence[int]] = None,
        edges: Sequence[Tuple[int, int]] = (),
        viewed_from: Optional[Dict[Tuple[int, int], int]] = None,
        shared: Optional[List[List[int]]] = None,
        viewed: Optional[List[List[int]]] = None,
        sharer_of: Optional[Sequence[int]] = None,
        num_categories: int = 1,
        storage_quota: Optional[int] = None,
        config: Optional[ScenarioConfig] = None,
    ) -> World:
        backhaul_table = np.asarray(backhaul, dtype=float)
        num_sps, num_sbs = backhaul_table.shape
        num_ues, num_videos = len(attachment), len(owner)
        radio_table = np.asarray(radio, dtype=float)
        attachment_table = np.asarray(attachment, dtype=int)

        topology = Topology(
            num_sps=num_sps,
            num_sbs=num_sbs,
            num_ues=num_ues,
            backhaul_capacity=backhaul_table,
            radio_capacity=radio_table,
            attachment=attachment_table,
            storage_quota=np.full(
                num_sbs, num_videos if storage_quota is None else storage_quota, dtype=int
            ),
            backhaul_budget=backhaul_table.sum(axis=0),
            radio_budget=np.bincount(attachment_table, weights=radio_table, minlength=num_sbs),
        )
        graph = nx.Graph()
        graph.add_nodes_from(range(num_ues))
        graph.add_edges_from(edges)
        zeros = np.zeros((num_categories, num_ues), dtype=int)
        history = UserHistory(
            viewed_from=dict(viewed_from or {}),
            shared_by_category=zeros if shared is None else np.asarray(shared, dtype=int),
            viewed_by_category=zeros if viewed is None else np.asarray(viewed, dtype=int),
            sharer_of=np.asarray(
                sharer_of if sharer_of is not None else [0] * num_videos, dtype=int
            ),
        )
        catalog = Catalog(
            num_videos=num_videos,
            num_categories=num_categories,
            owner=np.asarray(owner, dtype=int),
            category=np.asarray(category if category is not None else [0] * num_videos),
        )
        return World(
            config=config or ScenarioConfig(),
            topology=topology,
            catalog=catalog,
            graph=SocialGraph(graph),
            history=history,
        )

    return _make


@pytest.fixture
def triangle_world(make_world):
    """
    Three users: sharer 0 and viewer 1 on SBS 0, user 2 on SBS 1.

    Friendships 0-1 and 1-2. User 1 has seen 3 of 0's shares and 1 of 2's,
    shares only category 0, and has 6 views in category 0 and 4 in category 1.
    Video 0 (category 0) was shared by user 0.
    """
    return make_world(
        attachment=[0, 0, 1],
        backhaul=[[1.0, 1.0]],
        radio=[2.0, 2.0, 2.0],
        owner=[0],
        category=[0],
        edges=[(0, 1), (1, 2)],
        viewed_from={(1, 0): 3, (1, 2): 1, (0, 1): 1, (2, 1): 5},
        shared=[[2, 4, 1], [1, 0, 1]],
        viewed=[[3, 6, 2], [3, 4, 2]],
        sharer_of=[0],
        num_categories=2,
    )
