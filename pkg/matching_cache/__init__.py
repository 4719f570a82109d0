"""Matching Cache - proactive video caching at small base stations as a many-to-many matching game."""

__version__ = "0.1.0"

from .types import (
    AgentId,
    Connectivity,
    FactorReading,
    PopularityMode,
    PreferenceOrder,
    RequestMode,
    Side,
)
from .exceptions import (
    CacheSimError,
    ConfigError,
    MalformedResultsError,
    NonTerminationError,
    TopologyError,
    UnstableMatchingError,
)
from .config import ConfigManager, ScenarioConfig
from .matching import (
    ChoiceFunction,
    Matching,
    MatchingTrace,
    check_substitutability,
    choice_set,
    is_pairwise_stable,
    is_valid_matching,
    run_deferred_acceptance,
    verify_trace_propositions,
)
from .verification import VerificationSuite, enumerate_stable_matchings
from .network import World, build_world, generate_social_world, generate_topology
from .popularity import (
    LocalPopularityTable,
    SocialPopularityModel,
    i_interests,
    i_sharing,
    i_social,
    local_popularity,
    zipf_popularity_table,
)
from .preferences import (
    PreferenceProfile,
    build_preference_profile,
    download_time,
    idle_download_time,
)
from .cache_sim import (
    ExperimentResult,
    ExperimentRunner,
    Placement,
    RequestTrace,
    expected_download_time,
    generate_requests,
    place_matching,
    place_random,
    run_experiment,
    serve_requests,
)

__all__ = [
    "types",
    "exceptions",
    "config",
    "matching",
    "verification",
    "network",
    "popularity",
    "preferences",
    "cache_sim",
    "cli",
]
