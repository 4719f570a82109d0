"""Cache placement (matching and random), request generation, serving and the experiment sweep."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import ScenarioConfig
from .exceptions import ConfigError, MalformedResultsError, UnstableMatchingError
from .matching import is_pairwise_stable, run_deferred_acceptance, verify_trace_propositions
from .network import World, build_world
from .popularity import LocalPopularityTable, build_popularity_table
from .preferences import PreferenceProfile, build_preference_profile
from .types import AgentId, RequestMode
from .utils import as_generator, spawn_generators

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["beta", "requests", "seed", "sat_ma", "sat_ra", "time_ma", "time_ra"]


@dataclass(frozen=True)
class Placement:
    """Cache contents per SBS, with matching statistics when produced by the matching."""

    cached: Dict[int, FrozenSet[int]]
    rounds: Optional[int] = None
    rejections: Optional[int] = None

    def videos_at(self, sbs: int) -> FrozenSet[int]:
        return self.cached.get(sbs, frozenset())

    def is_cached(self, sbs: int, video: int) -> bool:
        return video in self.videos_at(sbs)

    @property
    def total_cached(self) -> int:
        return sum(len(v) for v in self.cached.values())

    def mask(self, num_sbs: int, num_videos: int) -> np.ndarray:
        table = np.zeros((num_sbs, num_videos), dtype=bool)
        for sbs, videos in self.cached.items():
            table[sbs, list(videos)] = True
        return table

    def validate(self, world: World) -> None:
        """Raise ValueError if a cache exceeds its quota or holds an unreachable video."""
        topology, catalog = world.topology, world.catalog
        for sbs, videos in self.cached.items():
            if len(videos) > topology.storage_quota[sbs]:
                raise ValueError(f"SBS {sbs} caches {len(videos)} videos over its quota")
            for video in videos:
                if not topology.is_connected(int(catalog.owner[video]), sbs):
                    raise ValueError(f"SBS {sbs} caches video {video} from an unconnected SPS")

    def to_dict(self) -> Dict[str, List[int]]:
        return {str(sbs): sorted(videos) for sbs, videos in sorted(self.cached.items())}


def place_matching(world: World, profile: PreferenceProfile, verify: bool = True) -> Placement:
    """
    Cache placement from deferred acceptance with videos proposing.

    With verify set, the matching must pass the stability check and the
    trace propositions, otherwise UnstableMatchingError is raised.
    """
    proposers, receivers = profile.proposer_prefs(), profile.receiver_prefs()
    matching, trace = run_deferred_acceptance(proposers, receivers)

    if verify:
        stability = is_pairwise_stable(matching, proposers, receivers)
        if not stability.stable:
            v, s = stability.blocking_pair
            raise UnstableMatchingError(f"placement is unstable ({stability.reason}) at ({v}, {s})")
        report = verify_trace_propositions(trace)
        if not report.holds:
            raise UnstableMatchingError(
                "trace violates: " + "; ".join(str(v) for v in report.violations[:5])
            )

    cached = {
        sbs: frozenset(v.index for v in matching.partners(AgentId.receiver(sbs)))
        for sbs in range(world.topology.num_sbs)
    }
    logger.debug(
        "matching placement: %d rounds, %d rejections, %d cached copies",
        trace.num_rounds,
        trace.total_rejections,
        len(matching),
    )
    return Placement(cached, rounds=trace.num_rounds, rejections=trace.total_rejections)


def place_random(world: World, seed: Union[int, np.random.Generator]) -> Placement:
    """Fill each SBS with a uniform sample of the videos its SPSs can provide."""
    rng = as_generator(seed)
    cached = {}
    for sbs in range(world.topology.num_sbs):
        reachable = world.reachable_videos(sbs)
        count = min(int(world.topology.storage_quota[sbs]), len(reachable))
        chosen = rng.choice(reachable, size=count, replace=False) if count else []
        cached[sbs] = frozenset(int(v) for v in chosen)
    return Placement(cached)


@dataclass(frozen=True, eq=False)
class RequestTrace:
    """Requests as parallel arrays of UE and video indices."""

    ues: np.ndarray
    videos: np.ndarray

    def __post_init__(self):
        if len(self.ues) != len(self.videos):
            raise ValueError("ues and videos must have the same length")

    def __len__(self) -> int:
        return len(self.ues)

    def head(self, count: int) -> "RequestTrace":
        """The first `count` requests."""
        return RequestTrace(self.ues[:count], self.videos[:count])

    def pairs(self) -> List[Tuple[int, int]]:
        return list(zip(self.ues.tolist(), self.videos.tolist()))


def generate_requests(
    world: World,
    popularity: LocalPopularityTable,
    count: int,
    seed: Union[int, np.random.Generator],
    mode: RequestMode = RequestMode.POPULARITY_WEIGHTED,
) -> RequestTrace:
    """
    Draw requests: the UE uniformly, the video from the popularity row of the
    UE's SBS (uniform over the catalog if that row is all zero), or uniformly
    in strict-uniform mode.
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    rng = as_generator(seed)
    num_videos = world.catalog.num_videos
    ues = rng.integers(0, world.topology.num_ues, count)

    if mode is RequestMode.STRICT_UNIFORM:
        return RequestTrace(ues, rng.integers(0, num_videos, count))

    draws = rng.random(count)
    sbs_of = world.topology.attachment[ues]
    videos = np.empty(count, dtype=int)
    for sbs in np.unique(sbs_of):
        idx = np.flatnonzero(sbs_of == sbs)
        row = popularity.row(int(sbs))
        if row.sum() <= 0:
            row = np.ones(num_videos)
        cdf = np.cumsum(row)
        cdf = cdf / cdf[-1]
        videos[idx] = np.minimum(np.searchsorted(cdf, draws[idx], side="right"), num_videos - 1)
    return RequestTrace(ues, videos)


@dataclass
class ServiceReport:
    """Outcome of serving one batch of requests."""

    satisfaction_ratio: float
    mean_download_time: float
    local: int
    remote: int
    unserved: int
    download_times: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))


def _request_times(
    world: World, placement: Placement, requests: RequestTrace, active: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Local flags, unserved flags and download times of every request while the
    first `active` of them share the links.

    A request outside the active prefix is timed as if it joined the batch.
    """
    topology, catalog = world.topology, world.catalog
    ues, videos = requests.ues, requests.videos
    outside = np.arange(len(requests)) >= active
    sbs_of = topology.attachment[ues]
    local = placement.mask(topology.num_sbs, catalog.num_videos)[sbs_of, videos]

    radio_load = np.bincount(ues[:active], minlength=topology.num_ues)[ues] + outside
    rate = topology.radio_capacity[ues] / radio_load

    owner = catalog.owner[videos]
    backhaul = topology.backhaul_capacity[owner, sbs_of]
    unserved = ~local & (backhaul <= 0)
    remote = ~local & ~unserved
    if remote.any():
        links = owner * topology.num_sbs + sbs_of
        busy = remote & ~outside
        link_load = np.bincount(links[busy], minlength=topology.num_sps * topology.num_sbs)
        load = link_load[links[remote]] + outside[remote]
        rate[remote] = np.minimum(rate[remote], backhaul[remote] / load)

    times = catalog.size / rate
    if unserved.any():
        served = ~unserved
        times[unserved] = times[served].max() if served.any() else times.max()
    return local, unserved, times


def serve_requests(world: World, placement: Placement, trace: RequestTrace) -> ServiceReport:
    """
    Serve a batch of concurrent requests.

    A request is local when its video is cached at the UE's SBS, remote
    otherwise. Every link's capacity is shared equally among the requests of
    the batch that use it; a request's time is size over the smallest share
    along its path (radio only when local, backhaul then radio when remote).
    Remote requests whose owner SPS has no link to the SBS are unserved and
    get the worst served time of the batch.
    """
    count = len(trace)
    if count == 0:
        return ServiceReport(0.0, 0.0, 0, 0, 0)

    local, unserved, times = _request_times(world, placement, trace, count)
    if unserved.any():
        logger.debug("%d requests unserved: owner SPS not connected", int(unserved.sum()))

    return ServiceReport(
        satisfaction_ratio=float(local.sum()) / count,
        mean_download_time=float(times.mean()),
        local=int(local.sum()),
        remote=int((~local & ~unserved).sum()),
        unserved=int(unserved.sum()),
        download_times=times,
    )


def expected_download_time(
    world: World, placement: Placement, reference: RequestTrace, active: int
) -> float:
    """
    Mean download time over a reference request stream under a load of `active` requests.

    The first `active` requests of the reference are in flight; every other
    reference request is timed as one more request joining them. Each
    request's time only grows with `active`, so the mean is non-decreasing
    in the load.

    Args:
        world: Scenario world
        placement: Cache contents
        reference: Request stream the mean is taken over
        active: Number of concurrent requests, at most len(reference)

    Returns:
        Mean time in slots, 0.0 for an empty reference
    """
    if not 0 <= active <= len(reference):
        raise ValueError(f"active must be in 0..{len(reference)}, got {active}")
    if len(reference) == 0:
        return 0.0
    _, _, times = _request_times(world, placement, reference, active)
    return float(times.mean())


@dataclass
class ExperimentResult:
    """
    One (beta, request count, seed) point for MA and RA.

    Satisfaction is measured on the first `requests` requests of the seed's
    stream. Download time is the mean over the whole stream with `requests`
    of them in flight.
    """

    beta: float
    requests: int
    seed: int
    sat_ma: float
    sat_ra: float
    time_ma: float
    time_ra: float


def storage_quota_for(beta: float, num_videos: int) -> int:
    """q_s = round(beta * V)."""
    if not 0.0 < beta <= 1.0:
        raise ConfigError(f"beta must be in (0, 1], got {beta}")
    return int(round(beta * num_videos))


def _run_seed(
    config: ScenarioConfig, seed: int
) -> Tuple[List[ExperimentResult], List[Dict[str, Any]]]:
    """Every beta and sweep point for one seed, sharing the world and the request stream."""
    settings = config.experiment
    streams = spawn_generators(seed)
    world = build_world(config, seed)
    popularity = build_popularity_table(world, config, streams["popularity"])
    master = generate_requests(
        world,
        popularity,
        max(settings.request_sweep),
        streams["requests"],
        settings.request_mode,
    )

    results: List[ExperimentResult] = []
    audit: List[Dict[str, Any]] = []
    for beta in settings.beta_list:
        sized = world.with_storage_quota(storage_quota_for(beta, world.catalog.num_videos))
        profile = build_preference_profile(sized, popularity, settings.video_quota_cap)
        ma = place_matching(sized, profile, verify=settings.verify_matching)
        ra = place_random(sized, streams["random_placement"])

        for count in settings.request_sweep:
            trace = master.head(count)
            served_ma = serve_requests(sized, ma, trace)
            served_ra = serve_requests(sized, ra, trace)
            results.append(
                ExperimentResult(
                    beta=beta,
                    requests=count,
                    seed=seed,
                    sat_ma=served_ma.satisfaction_ratio,
                    sat_ra=served_ra.satisfaction_ratio,
                    time_ma=expected_download_time(sized, ma, master, count),
                    time_ra=expected_download_time(sized, ra, master, count),
                )
            )

        audit.append(
            {
                "seed": seed,
                "beta": beta,
                "storage_quota": int(sized.topology.storage_quota[0]),
                "matching_rounds": ma.rounds,
                "rejections": ma.rejections,
                "verified": settings.verify_matching,
                "cached_ma": ma.total_cached,
                "cached_ra": ra.total_cached,
            }
        )
        logger.info(
            "seed %d beta %.2f: %d rounds, %d cached (MA) vs %d (RA)",
            seed,
            beta,
            ma.rounds,
            ma.total_cached,
            ra.total_cached,
        )
    return results, audit


class ExperimentRunner:
    """Run the beta x request sweep over seed replicates and keep an audit log."""

    def __init__(self, config: ScenarioConfig):
        """
        Initialize experiment runner.

        Args:
            config: Validated scenario configuration
        """
        self.config = config.validate()
        self.audit_log: List[Dict[str, Any]] = []

    def run(self) -> List[ExperimentResult]:
        """
        Run every replicate.

        Returns:
            Results sorted by beta, request count and seed
        """
        seeds = list(self.config.experiment.seeds)
        workers = min(self.config.experiment.workers, len(seeds))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(_run_seed, [self.config] * len(seeds), seeds))
        else:
            outcomes = [_run_seed(self.config, seed) for seed in seeds]

        results: List[ExperimentResult] = []
        for seed_results, seed_audit in outcomes:
            results.extend(seed_results)
            self.audit_log.extend(seed_audit)

        beta_order = {b: i for i, b in enumerate(self.config.experiment.beta_list)}
        results.sort(key=lambda r: (beta_order[r.beta], r.requests, r.seed))
        return results

    def get_audit_log(self) -> List[Dict[str, Any]]:
        """Get audit log of replicates."""
        return self.audit_log


def run_experiment(config: ScenarioConfig) -> List[ExperimentResult]:
    """Run the full sweep for a configuration."""
    return ExperimentRunner(config).run()


def results_to_frame(results: List[ExperimentResult]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in results], columns=RESULT_COLUMNS)


def write_results_csv(results: List[ExperimentResult], filepath: Union[str, Path]) -> None:
    """Write result rows with a header and 6 significant digits."""
    results_to_frame(results).to_csv(filepath, index=False, float_format="%.6g")


def read_results_csv(filepath: Union[str, Path]) -> pd.DataFrame:
    """Load a result CSV, checking the schema."""
    try:
        frame = pd.read_csv(filepath)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise MalformedResultsError(f"Cannot parse {filepath}: {e}") from e
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise MalformedResultsError(f"{filepath} is missing column(s): {', '.join(missing)}")
    if frame.empty:
        raise MalformedResultsError(f"{filepath} has no result rows")
    numeric = frame[RESULT_COLUMNS].apply(pd.to_numeric, errors="coerce")
    if numeric.isna().any().any():
        raise MalformedResultsError(f"{filepath} has non-numeric values")
    return numeric


def summarize_results(results: Union[List[ExperimentResult], pd.DataFrame]) -> pd.DataFrame:
    """Mean over seeds for each (beta, requests) point."""
    frame = results if isinstance(results, pd.DataFrame) else results_to_frame(results)
    return (
        frame.groupby(["beta", "requests"], sort=True)[["sat_ma", "sat_ra", "time_ma", "time_ra"]]
        .mean()
        .reset_index()
    )
