"""Type definitions and data structures shared across the simulator."""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple


class Side(Enum):
    """Which side of the market an agent sits on."""

    PROPOSER = "proposer"
    RECEIVER = "receiver"

    @property
    def opposite(self) -> "Side":
        return Side.RECEIVER if self is Side.PROPOSER else Side.PROPOSER


class PopularityMode(Enum):
    """Source of the local popularity table."""

    SOCIAL = "social"
    ZIPF = "zipf"


class RequestMode(Enum):
    """How a request picks its video."""

    POPULARITY_WEIGHTED = "popularity_weighted"
    STRICT_UNIFORM = "strict_uniform"


class Connectivity(Enum):
    """SPS-SBS backhaul wiring."""

    COMPLETE = "complete"
    RANDOM = "random"


class FactorReading(Enum):
    """Whose history normalizes the social and interest factors."""

    VIEWER = "viewer"
    LITERAL = "literal"


@dataclass(frozen=True)
class AgentId:
    """A video (proposer) or an SBS (receiver)."""

    side: Side
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"Agent index must be non-negative, got {self.index}")

    @classmethod
    def proposer(cls, index: int) -> "AgentId":
        return cls(Side.PROPOSER, index)

    @classmethod
    def receiver(cls, index: int) -> "AgentId":
        return cls(Side.RECEIVER, index)

    @property
    def sort_key(self) -> Tuple[str, int]:
        return (self.side.value, self.index)

    def __str__(self) -> str:
        prefix = "v" if self.side is Side.PROPOSER else "s"
        return f"{prefix}{self.index}"


@dataclass(frozen=True)
class PreferenceOrder:
    """Strict ranking of opposite-side agents with a quota."""

    owner: AgentId
    ranking: Tuple[AgentId, ...]
    quota: int

    def __post_init__(self):
        object.__setattr__(self, "ranking", tuple(self.ranking))
        if self.quota < 1:
            raise ValueError(f"Quota of {self.owner} must be at least 1, got {self.quota}")
        if len(set(self.ranking)) != len(self.ranking):
            raise ValueError(f"Ranking of {self.owner} contains duplicates")
        wrong_side = [a for a in self.ranking if a.side is self.owner.side]
        if wrong_side:
            raise ValueError(
                f"Ranking of {self.owner} lists same-side agents: "
                f"{', '.join(str(a) for a in wrong_side)}"
            )

    def rank_of(self, agent: AgentId) -> int:
        """Position of agent in the ranking (0 is best); raises ValueError if unranked."""
        return self.ranking.index(agent)

    def accepts(self, agent: AgentId) -> bool:
        return agent in self.ranking
