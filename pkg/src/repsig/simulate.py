"""Monte Carlo harness for error-rate and stopping-time verification.

Generates observation streams under a chosen effect model, converts running
means into two-sided p-values with the normal approximation, drives the
monitor, and aggregates stop rates with binomial confidence intervals.
Trials draw from counter-based substreams keyed by (seed, trial, criterion),
so results are reproducible bit-for-bit and independent of trial ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError
from .monitor import Decision, Outcome, SignificanceRecord, init_monitor, update
from .planio import plan_hash, plan_to_dict
from .plans import PlanVariant, TestPlan, require_valid
from .stats_core import AlwaysValidParams, always_valid_curve, p_from_z_two_sided

__all__ = [
    "GaussianStream",
    "BernoulliDiffStream",
    "StreamConfig",
    "RunningStats",
    "running_pvalue",
    "required_n_for_z",
    "StopTimeSummary",
    "SimulationReport",
    "PairedReport",
    "run_trials",
    "compare_always_valid",
]

RNG_ID = "philox-seedseq(entropy=seed, spawn_key=(trial, criterion))"

_Z_95 = 1.959963984540054


@dataclass(frozen=True)
class GaussianStream:
    """I.i.d. normal observations with the given true mean and sd."""

    mu: float
    sigma: float

    kind = "gaussian"

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, n)


@dataclass(frozen=True)
class BernoulliDiffStream:
    """Per-observation difference of two Bernoulli draws (test minus control).

    Values land in {-1, 0, 1}; the mean is q - baseline, so q == baseline is
    a null stream.
    """

    q: float
    baseline: float

    kind = "bernoulli_diff"

    def __post_init__(self):
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"q must be in (0, 1), got {self.q}")
        if not (0.0 < self.baseline < 1.0):
            raise DomainError(f"baseline must be in (0, 1), got {self.baseline}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        test = rng.random(n) < self.q
        control = rng.random(n) < self.baseline
        return test.astype(np.float64) - control.astype(np.float64)


Distribution = Union[GaussianStream, BernoulliDiffStream]


@dataclass(frozen=True)
class StreamConfig:
    """Observation budget and decision cadence for one simulated test."""

    distribution: Distribution
    n_max: int
    decision_every: int
    seed: int | None = None

    def __post_init__(self):
        if self.decision_every < 1:
            raise DomainError(f"decision_every must be >= 1, got {self.decision_every}")
        if self.n_max < self.decision_every:
            raise DomainError(
                f"n_max {self.n_max} must cover at least one decision point "
                f"of {self.decision_every} observations"
            )

    @property
    def num_decision_points(self) -> int:
        return self.n_max // self.decision_every

    def to_dict(self) -> dict:
        d = {"kind": self.distribution.kind}
        if isinstance(self.distribution, GaussianStream):
            d.update(mu=self.distribution.mu, sigma=self.distribution.sigma)
        else:
            d.update(q=self.distribution.q, baseline=self.distribution.baseline)
        return {
            "distribution": d,
            "n_max": self.n_max,
            "decision_every": self.decision_every,
            "seed": self.seed,
        }


class RunningStats:
    """Welford accumulator for the running mean and sample sd."""

    __slots__ = ("count", "mean", "_m2")

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    @property
    def sd(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self._m2 / (self.count - 1))


def running_pvalue(stats: RunningStats) -> float:
    """Two-sided p-value of the running mean against zero.

    Z = |mean| * sqrt(n) / sd. A degenerate sample (sd == 0) collapses to
    p = 0 for a nonzero mean and p = 1 otherwise, the limits of the formula.
    """
    if stats.count < 2:
        raise DomainError("running p-value needs at least two observations")
    sd = stats.sd
    if sd == 0.0:
        return 0.0 if stats.mean != 0.0 else 1.0
    z = abs(stats.mean) * math.sqrt(stats.count) / sd
    return p_from_z_two_sided(z)


def required_n_for_z(z: float, mu: float, sigma: float) -> int:
    """Observations needed for the running mean to reach score z: ceil(z^2 (sigma/mu)^2)."""
    if not (z > 0 and math.isfinite(z)):
        raise DomainError(f"z must be positive, got {z}")
    if mu == 0 or not math.isfinite(mu):
        raise DomainError("mu must be nonzero and finite; no finite n reaches significance")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise DomainError(f"sigma must be positive, got {sigma}")
    return math.ceil(z * z * (sigma / mu) ** 2)


@dataclass(frozen=True)
class StopTimeSummary:
    """Distribution summary of the decision index at StopSuccess."""

    count: int
    mean: float | None = None
    median: float | None = None
    q10: float | None = None
    q25: float | None = None
    q75: float | None = None
    q90: float | None = None
    min: int | None = None
    max: int | None = None

    @classmethod
    def from_indices(cls, indices: list[int]) -> "StopTimeSummary":
        if not indices:
            return cls(count=0)
        arr = np.asarray(indices, dtype=float)
        q10, q25, q50, q75, q90 = np.percentile(arr, [10, 25, 50, 75, 90])
        return cls(
            count=len(indices),
            mean=float(arr.mean()),
            median=float(q50),
            q10=float(q10),
            q25=float(q25),
            q75=float(q75),
            q90=float(q90),
            min=int(arr.min()),
            max=int(arr.max()),
        )

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "q10": self.q10,
            "q25": self.q25,
            "q75": self.q75,
            "q90": self.q90,
            "min": self.min,
            "max": self.max,
        }


@dataclass(frozen=True)
class ArmResult:
    """Stop statistics for one decision rule over the common trial set."""

    stop_rate: float
    stop_rate_ci: tuple[float, float]
    stop_time_summary: StopTimeSummary
    stop_index_counts: dict[int, int]
    end_failures: int = 0

    def to_dict(self) -> dict:
        return {
            "stop_rate": self.stop_rate,
            "stop_rate_ci": list(self.stop_rate_ci),
            "stop_time_summary": self.stop_time_summary.to_dict(),
            "stop_index_counts": {str(k): v for k, v in sorted(self.stop_index_counts.items())},
            "end_failures": self.end_failures,
        }


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate of one Monte Carlo run, reproducible from its config echo."""

    trials: int
    stop_rate: float
    stop_rate_ci: tuple[float, float]
    stop_time_summary: StopTimeSummary
    stop_index_counts: dict[int, int]
    end_failures: int
    seed: int
    rng: str
    plan_hash: str
    config: dict

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "stop_rate": self.stop_rate,
            "stop_rate_ci": list(self.stop_rate_ci),
            "stop_time_summary": self.stop_time_summary.to_dict(),
            "stop_index_counts": {str(k): v for k, v in sorted(self.stop_index_counts.items())},
            "end_failures": self.end_failures,
            "seed": self.seed,
            "rng": self.rng,
            "plan_hash": self.plan_hash,
            "config": self.config,
        }


@dataclass(frozen=True)
class PairedReport:
    """Repeated-significance and always-valid arms run on identical streams."""

    trials: int
    repeated: ArmResult
    always_valid: ArmResult
    rho: float
    comparator_alpha: float
    min_observations: int
    seed: int
    rng: str
    plan_hash: str
    config: dict

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "arms": {
                "repeated_significance": self.repeated.to_dict(),
                "always_valid": self.always_valid.to_dict(),
            },
            "comparator": {
                "rho": self.rho,
                "alpha": self.comparator_alpha,
                "min_observations": self.min_observations,
            },
            "seed": self.seed,
            "rng": self.rng,
            "plan_hash": self.plan_hash,
            "config": self.config,
        }


def _trial_rng(seed: int, trial: int, criterion: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial, criterion))
    return np.random.Generator(np.random.Philox(ss))


def _stats_track(obs: np.ndarray, decision_every: int, num_points: int):
    """Running (z, p) at each decision boundary, vectorized.

    Matches RunningStats/running_pvalue on every prefix (direct-formula
    variance agrees with Welford to ~1e-12 relative at these scales).
    """
    boundary = np.arange(1, num_points + 1) * decision_every
    n = boundary.astype(np.float64)
    total = np.cumsum(obs)[boundary - 1]
    total_sq = np.cumsum(obs * obs)[boundary - 1]
    mean = total / n
    var = np.maximum((total_sq - n * mean * mean) / (n - 1.0), 0.0)
    sd = np.sqrt(var)
    nonzero = sd > 0.0
    z = np.where(nonzero, np.abs(mean) * np.sqrt(n) / np.where(nonzero, sd, 1.0), 0.0)
    p = special.erfc(z / math.sqrt(2.0))
    degenerate = ~nonzero
    p[degenerate & (mean != 0.0)] = 0.0
    p[degenerate & (mean == 0.0)] = 1.0
    z[degenerate & (mean != 0.0)] = math.inf
    return z, p


def _binomial_ci(successes: int, trials: int) -> tuple[float, float]:
    rate = successes / trials
    half = _Z_95 * math.sqrt(rate * (1.0 - rate) / trials)
    return (max(0.0, rate - half), min(1.0, rate + half))


def _check_compat(plan: TestPlan, stream: StreamConfig) -> int:
    require_valid(plan)
    if stream.decision_every < 2:
        raise ConfigError(
            "the first decision point needs at least two observations; "
            f"decision_every is {stream.decision_every}"
        )
    available = stream.num_decision_points
    last = plan.max_decision_index()
    if last is not None and last > available:
        raise ConfigError(
            f"plan schedules {last} decision points but the stream only "
            f"provides {available} (n_max // decision_every)"
        )
    return available


def _resolve_seed(stream: StreamConfig, seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    if stream.seed is not None:
        return int(stream.seed)
    raise ConfigError("no seed given: pass one explicitly or set it on the stream config")


def _plan_points(plan: TestPlan, available: int) -> int:
    last = plan.max_decision_index()
    return available if last is None else min(last, available)


def run_trials(
    plan: TestPlan, stream: StreamConfig, trials: int, seed: int | None = None
) -> SimulationReport:
    """Estimate the stop rate of a plan under the stream's effect model.

    Each trial replays a fresh observation stream through the monitor until a
    terminal decision or stream exhaustion (unbounded plans are truncated at
    the stream's final decision point and simply never fail).
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    available = _check_compat(plan, stream)
    master_seed = _resolve_seed(stream, seed)
    num_points = _plan_points(plan, available)

    fixed = plan.variant in (PlanVariant.FIXED_ONCE, PlanVariant.FIXED_REPEATED)
    criterion_ids = plan.criterion_ids()

    stop_indices: list[int] = []
    failures = 0
    for trial in range(trials):
        decision = _run_one_trial(
            plan, stream, master_seed, trial, num_points, fixed, criterion_ids
        )
        if decision.outcome is Outcome.STOP_SUCCESS:
            stop_indices.append(decision.at)
        elif decision.outcome is Outcome.END_FAILURE:
            failures += 1

    counts: dict[int, int] = {}
    for t in stop_indices:
        counts[t] = counts.get(t, 0) + 1
    successes = len(stop_indices)
    return SimulationReport(
        trials=trials,
        stop_rate=successes / trials,
        stop_rate_ci=_binomial_ci(successes, trials),
        stop_time_summary=StopTimeSummary.from_indices(stop_indices),
        stop_index_counts=counts,
        end_failures=failures,
        seed=master_seed,
        rng=RNG_ID,
        plan_hash=plan_hash(plan),
        config={"stream": stream.to_dict(), "trials": trials, "plan": plan_to_dict(plan)},
    )


def _run_one_trial(
    plan: TestPlan,
    stream: StreamConfig,
    master_seed: int,
    trial: int,
    num_points: int,
    fixed: bool,
    criterion_ids: tuple[str, ...],
) -> Decision:
    de = stream.decision_every
    if fixed:
        tracks = {}
        points_for = {}
        for j, sched in enumerate(plan.criteria):
            pts = min(sched.num_decision_points, num_points)
            rng = _trial_rng(master_seed, trial, j)
            obs = stream.distribution.sample(rng, pts * de)
            _, p = _stats_track(obs, de, pts)
            tracks[sched.criterion_id] = p.tolist()
            points_for[sched.criterion_id] = pts
        state = init_monitor(plan)
        decision = state.decision
        for t in range(1, num_points + 1):
            pvalues = {
                cid: tracks[cid][t - 1] for cid in tracks if t <= points_for[cid]
            }
            decision = update(state, SignificanceRecord(t, pvalues))
            if decision.is_terminal:
                break
        return decision

    cid = criterion_ids[0]
    rng = _trial_rng(master_seed, trial, 0)
    obs = stream.distribution.sample(rng, num_points * de)
    _, p_track = _stats_track(obs, de, num_points)
    p_list = p_track.tolist()
    state = init_monitor(plan)
    decision = state.decision
    for t in range(1, num_points + 1):
        decision = update(state, SignificanceRecord(t, {cid: p_list[t - 1]}))
        if decision.is_terminal:
            break
    return decision


def compare_always_valid(
    plan: TestPlan,
    params: AlwaysValidParams,
    stream: StreamConfig,
    trials: int,
    seed: int | None = None,
) -> PairedReport:
    """Run the plan's monitor and the always-valid bound on identical streams.

    The comparator arm stops at the first decision boundary where the running
    |Z| meets the always-valid required score at the boundary's observation
    count; ``params.t`` acts as the minimum observation count before the
    comparator may stop.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    available = _check_compat(plan, stream)
    ids = plan.criterion_ids()
    if len(ids) != 1:
        raise ConfigError("the paired comparison needs a single-criterion plan")
    master_seed = _resolve_seed(stream, seed)
    num_points = _plan_points(plan, available)
    cid = ids[0]
    de = stream.decision_every

    obs_counts = np.arange(1, num_points + 1) * de
    av_required = always_valid_curve(params.rho, params.alpha, obs_counts)
    av_allowed = obs_counts >= params.t

    rep_stops: list[int] = []
    rep_failures = 0
    av_stops: list[int] = []
    for trial in range(trials):
        rng = _trial_rng(master_seed, trial, 0)
        obs = stream.distribution.sample(rng, num_points * de)
        z_track, p_track = _stats_track(obs, de, num_points)

        state = init_monitor(plan)
        for t in range(1, num_points + 1):
            decision = update(state, SignificanceRecord(t, {cid: float(p_track[t - 1])}))
            if decision.is_terminal:
                if decision.outcome is Outcome.STOP_SUCCESS:
                    rep_stops.append(decision.at)
                else:
                    rep_failures += 1
                break

        hit = np.nonzero((z_track >= av_required) & av_allowed)[0]
        if hit.size:
            av_stops.append(int(hit[0]) + 1)

    def _arm(stops: list[int], failures: int = 0) -> ArmResult:
        counts: dict[int, int] = {}
        for t in stops:
            counts[t] = counts.get(t, 0) + 1
        return ArmResult(
            stop_rate=len(stops) / trials,
            stop_rate_ci=_binomial_ci(len(stops), trials),
            stop_time_summary=StopTimeSummary.from_indices(stops),
            stop_index_counts=counts,
            end_failures=failures,
        )

    return PairedReport(
        trials=trials,
        repeated=_arm(rep_stops, rep_failures),
        always_valid=_arm(av_stops),
        rho=params.rho,
        comparator_alpha=params.alpha,
        min_observations=params.t,
        seed=master_seed,
        rng=RNG_ID,
        plan_hash=plan_hash(plan),
        config={"stream": stream.to_dict(), "trials": trials, "plan": plan_to_dict(plan)},
    )
