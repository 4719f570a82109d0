"""Local popularity of videos at SBSs, from the social model or a synthetic Zipf law."""

import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from .config import ScenarioConfig
from .network import SocialGraph, Topology, UserHistory, World
from .types import FactorReading, PopularityMode
from .utils import as_generator, zipf_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalPopularityTable:
    """P(m, v) for every SBS m (rows) and video v (columns)."""

    values: np.ndarray
    mode: PopularityMode = PopularityMode.SOCIAL

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("popularity table must be two-dimensional")
        if (self.values < 0).any():
            raise ValueError("popularity values must be non-negative")
        self.values.setflags(write=False)

    @property
    def num_sbs(self) -> int:
        """Number of SBS rows."""
        return self.values.shape[0]

    @property
    def num_videos(self) -> int:
        """Number of video columns."""
        return self.values.shape[1]

    def value(self, sbs: int, video: int) -> float:
        """P(sbs, video) as a Python float."""
        return float(self.values[sbs, video])

    def row(self, sbs: int) -> np.ndarray:
        """Read-only popularity row of one SBS, indexed by video."""
        return self.values[sbs]

    def to_frame(self) -> pd.DataFrame:
        """Table as a DataFrame with rows sbs0.. and columns v0.."""
        return pd.DataFrame(
            self.values,
            index=pd.Index([f"sbs{m}" for m in range(self.num_sbs)], name="sbs"),
            columns=[f"v{v}" for v in range(self.num_videos)],
        )

    def to_csv(self, filepath: Union[str, Path]) -> None:
        """
        Write the table as CSV.

        Args:
            filepath: Destination path; values are written with 6 significant digits
        """
        self.to_frame().to_csv(filepath, float_format="%.6g")


def _check_category(history: UserHistory, category: int) -> None:
    num_categories = history.shared_by_category.shape[0]
    if not 0 <= category < num_categories:
        raise ValueError(f"Category {category} is outside 0..{num_categories - 1}")


def i_social(
    history: UserHistory,
    graph: SocialGraph,
    viewer: int,
    sharer: int,
    reading: FactorReading = FactorReading.VIEWER,
) -> float:
    """
    Share of viewer's attention that goes to sharer's videos.

    alpha_ln over the sum of alpha_lj across l's friends j; the literal
    reading divides by the sum of alpha_jl instead. 0 with no history.
    """
    if not graph.are_friends(viewer, sharer):
        raise ValueError(f"Users {viewer} and {sharer} are not friends")
    friends = graph.friends(viewer)
    if reading is FactorReading.VIEWER:
        total = sum(history.alpha(viewer, j) for j in friends)
    else:
        total = sum(history.alpha(j, viewer) for j in friends)
    if total == 0:
        return 0.0
    return history.alpha(viewer, sharer) / total


def i_sharing(
    history: UserHistory,
    topology: Topology,
    graph: SocialGraph,
    user: int,
    category: int,
    sbs: int,
) -> float:
    """F_l^m * S_gl / sum_i S_il: friends of l at m times l's share of category g."""
    _check_category(history, category)
    shares = history.shared_by_category[:, user]
    total = shares.sum()
    if total == 0:
        return 0.0
    friends_at_sbs = sum(1 for f in graph.friends(user) if topology.attachment[f] == sbs)
    return friends_at_sbs * float(shares[category]) / float(total)


def i_interests(history: UserHistory, user: int, category: int) -> float:
    """Fraction of the user's views that fall in category g; 0 with no history."""
    _check_category(history, category)
    views = history.viewed_by_category[:, user]
    total = views.sum()
    if total == 0:
        return 0.0
    return float(views[category]) / float(total)


def local_popularity(
    world: World,
    gamma: float,
    sbs: int,
    video: int,
    reading: FactorReading = FactorReading.VIEWER,
) -> float:
    """
    Predicted demand for a video at an SBS.

    Sums, over the friends l of the video's sharer n that are attached to the
    SBS, I_sharing(l) * (gamma * I_social(l, n) + (1 - gamma) * I_interests(l)).
    The literal reading takes the interest term from the sharer's history.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must be in [0, 1], got {gamma}")
    sharer = int(world.history.sharer_of[video])
    category = int(world.catalog.category[video])
    interest_owner = None if reading is FactorReading.VIEWER else sharer

    total = 0.0
    for friend in world.friends_at(sharer, sbs):
        sharing = i_sharing(world.history, world.topology, world.graph, friend, category, sbs)
        if sharing == 0.0:
            continue
        social = i_social(world.history, world.graph, friend, sharer, reading)
        interests = i_interests(
            world.history, friend if interest_owner is None else interest_owner, category
        )
        total += sharing * (gamma * social + (1.0 - gamma) * interests)
    return total


class SocialPopularityModel:
    """Compute the full popularity table from the social world."""

    def __init__(
        self,
        world: World,
        gamma: float = 0.5,
        reading: FactorReading = FactorReading.VIEWER,
    ):
        """
        Initialize social popularity model.

        Args:
            world: Generated world with histories
            gamma: Weight of social interactions against user interests
            reading: Whose history normalizes the factors
        """
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {gamma}")
        self.world = world
        self.gamma = gamma
        self.reading = reading

    def sbs_with_audience(self, video: int) -> Dict[int, List[int]]:
        """Friends of the video's sharer grouped by their serving SBS."""
        sharer = int(self.world.history.sharer_of[video])
        groups: Dict[int, List[int]] = defaultdict(list)
        for friend in self.world.graph.friends(sharer):
            groups[int(self.world.topology.attachment[friend])].append(friend)
        return dict(groups)

    def table(self) -> LocalPopularityTable:
        topology, catalog = self.world.topology, self.world.catalog
        values = np.zeros((topology.num_sbs, catalog.num_videos))
        for video in range(catalog.num_videos):
            for sbs in self.sbs_with_audience(video):
                values[sbs, video] = local_popularity(
                    self.world, self.gamma, sbs, video, self.reading
                )
        logger.debug("social popularity: %d non-zero entries", int((values > 0).sum()))
        return LocalPopularityTable(values, PopularityMode.SOCIAL)


def zipf_popularity_table(
    num_sbs: int, num_videos: int, exponent: float, seed: Union[int, np.random.Generator]
) -> LocalPopularityTable:
    """Per SBS, Zipf weights assigned to a random permutation of the videos."""
    rng = as_generator(seed)
    weights = zipf_weights(num_videos, exponent)
    values = np.empty((num_sbs, num_videos))
    for sbs in range(num_sbs):
        values[sbs, rng.permutation(num_videos)] = weights
    return LocalPopularityTable(values, PopularityMode.ZIPF)


def build_popularity_table(
    world: World, config: ScenarioConfig, seed: Union[int, np.random.Generator]
) -> LocalPopularityTable:
    """Popularity table in the configured mode."""
    settings = config.popularity
    if settings.mode is PopularityMode.ZIPF:
        return zipf_popularity_table(
            world.topology.num_sbs, world.catalog.num_videos, settings.zipf_exponent, seed
        )
    return SocialPopularityModel(world, settings.gamma, settings.factor_reading).table()
