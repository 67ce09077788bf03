"""Discrete-time single-cell congestion simulator.

Poisson UE arrivals drive per-application offered load through a token-bucket
shaper (committed rate, excess rate, burst buffer) and a priority scheduler
into a fixed-capacity link. Congestion is injected as extra offered load on
the broadband class during scheduled windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigTuple, PRIORITY_LEVELS, QOS_MODELS, RATE_LABEL
from .errors import ConfigError, InvalidActionError


@dataclass(frozen=True)
class AppClass:
    """Traffic class served by the cell."""

    kind: str  # "mMTC" | "eMBB" | "URLLC"
    default_priority: str  # "L" | "M" | "H"
    default_qos_model: str  # "BE" | "RTPS" | "UGS"
    per_ue_demand_mbps: float

    def __post_init__(self):
        if self.default_priority not in PRIORITY_LEVELS:
            raise ConfigError(f"unknown priority {self.default_priority!r}")
        if self.default_qos_model not in QOS_MODELS:
            raise ConfigError(f"unknown QoS model {self.default_qos_model!r}")
        if not self.per_ue_demand_mbps > 0:
            raise ConfigError("per-UE demand must be > 0")


# App1/App2/App3: sensors / broadband video / critical low-latency.
DEFAULT_APPS = (
    AppClass("mMTC", "L", "BE", per_ue_demand_mbps=0.5),
    AppClass("eMBB", "M", "RTPS", per_ue_demand_mbps=5.0),
    AppClass("URLLC", "H", "UGS", per_ue_demand_mbps=1.0),
)
CONGESTED_APP_INDEX = 1  # injected load lands on the broadband class

_PRIORITY_RANK = {"L": 0, "M": 1, "H": 2}


@dataclass(frozen=True)
class ShaperConfig:
    """Token-bucket parameters: committed rate, excess rate, burst buffer."""

    cir_mbps: float
    eir_mbps: float
    ebs_mbit: float

    def __post_init__(self):
        if self.cir_mbps < 0 or self.eir_mbps < 0 or self.ebs_mbit < 0:
            raise ConfigError("shaper rates and buffer must be >= 0")


@dataclass(frozen=True)
class CongestionWindow:
    """Extra offered load (Mbps) injected during [start_s, end_s)."""

    start_s: float
    end_s: float
    extra_mbps: float

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise ConfigError("congestion window must have end > start")
        if self.extra_mbps < 0:
            raise ConfigError("injected load must be >= 0")

    def load_at(self, t: float, ramp_s: float) -> float:
        """Injected load at time t: trapezoid profile that builds up over
        ramp_s after the window opens and tails off toward its end."""
        if not self.start_s <= t < self.end_s:
            return 0.0
        if ramp_s <= 0:
            return self.extra_mbps
        factor = min((t - self.start_s) / ramp_s, (self.end_s - t) / ramp_s, 1.0)
        return self.extra_mbps * factor


@dataclass(frozen=True)
class LoadPulse:
    """Synchronized duty-cycled reporting: an app class adds mbps of offered
    load every period_ticks ticks (sensor bursts, telemetry heartbeats)."""

    app_index: int
    period_ticks: int
    mbps: float

    def __post_init__(self):
        if self.app_index < 0 or self.period_ticks < 1 or self.mbps < 0:
            raise ConfigError("pulse needs app_index >= 0, period >= 1, mbps >= 0")


DEFAULT_PULSES = (LoadPulse(0, 4, 5.0), LoadPulse(2, 6, 10.0))


@dataclass(frozen=True)
class SimConfig:
    capacity_mbps: float = 100.0
    arrival_rate: float = 1.2  # mean UE arrivals per tick
    num_ues_max: int = 30
    # Per-class admission quotas (slicing-style admission control); arrivals
    # beyond a class's quota are rejected. Empty tuple disables the quotas.
    ue_quota: tuple[int, ...] = (9, 4, 8)
    tick_s: float = 1.0
    duration_s: float = 100.0
    mean_holding_ticks: float = 400.0  # mean UE dwell time (exponential)
    congestion: tuple[CongestionWindow, ...] = ()
    congestion_ramp_s: float = 3.0  # build-up/tail-off time of injected load
    pulses: tuple[LoadPulse, ...] = DEFAULT_PULSES
    # Burst telemetry activates once a congestion event is confirmed (fully
    # ramped window); False applies the pulses on every tick.
    pulses_gated: bool = True
    report_quantum_mbps: float = 0.5  # monitoring granularity; 0 disables
    rate_multiplier: float = 1.0  # value installed by a "GR" assignment
    rng_seed: int = 0

    def __post_init__(self):
        if not self.capacity_mbps > 0:
            raise ConfigError("capacity must be > 0")
        if self.arrival_rate < 0:
            raise ConfigError("arrival rate must be >= 0")
        if not self.tick_s > 0:
            raise ConfigError("tick must be > 0")
        if self.num_ues_max < 0:
            raise ConfigError("num_ues_max must be >= 0")
        if any(q < 0 for q in self.ue_quota):
            raise ConfigError("per-class quotas must be >= 0")
        if not self.mean_holding_ticks > 0:
            raise ConfigError("mean holding time must be > 0")
        if self.congestion_ramp_s < 0:
            raise ConfigError("congestion ramp must be >= 0")
        if self.report_quantum_mbps < 0:
            raise ConfigError("report quantum must be >= 0")
        if self.rate_multiplier < 0:
            raise ConfigError("rate multiplier must be >= 0")


@dataclass(frozen=True)
class TickObservation:
    """Aggregate result of one monitoring interval."""

    timestamp_s: float
    offered_mbps: tuple[float, ...]  # per app
    conformant_mbps: float
    excess_mbps: float
    buffered_mbit: float  # total buffered at tick end
    dropped_mbps: float
    observed_bw_mbps: float

    @property
    def offered_total_mbps(self) -> float:
        return sum(self.offered_mbps)


def sample_arrivals(arrival_rate: float, rng: np.random.Generator) -> int:
    """Poisson arrival count for one tick."""
    if arrival_rate < 0:
        raise ConfigError(f"arrival rate must be >= 0, got {arrival_rate}")
    return int(rng.poisson(arrival_rate))


def shape(
    offered_mbps: float,
    cfg: ShaperConfig,
    buffered_in_mbit: float,
    tick_s: float,
) -> tuple[float, float, float, float]:
    """Serve one tick of traffic through the token-bucket shaper.

    Service order: committed rate first, then excess rate, then buffer up to
    the burst size, then drop. Returns (conformant_mbps, excess_mbps,
    buffered_out_mbit, dropped_mbps); volume is conserved exactly:
    offered*tick + buffered_in == (conformant + excess + dropped)*tick + buffered_out.
    """
    if offered_mbps < 0 or buffered_in_mbit < 0 or tick_s <= 0:
        raise ConfigError("shape() inputs must be non-negative with tick > 0")
    total_mbit = offered_mbps * tick_s + buffered_in_mbit
    conformant = min(cfg.cir_mbps * tick_s, total_mbit)
    remaining = total_mbit - conformant
    excess = min(cfg.eir_mbps * tick_s, remaining)
    remaining -= excess
    buffered_out = min(cfg.ebs_mbit, remaining)
    dropped = remaining - buffered_out
    return (conformant / tick_s, excess / tick_s, buffered_out, dropped / tick_s)


# QoS-model stance -> shaper parameters, as fractions of link capacity.
# BE serves opportunistically (excess rate only); RTPS splits committed and
# excess evenly; UGS commits the app's full demand (no buffering needed).
BE_EIR_FRACTION = 0.30
RTPS_CIR_FRACTION = 0.25
RTPS_EIR_FRACTION = 0.25
STANCE_EBS_MBIT = 2.0


@dataclass
class _AppState:
    priority: str
    qos_model: str
    rate_multiplier: float
    buffered_mbit: float = 0.0
    ue_count: int = 0


class Simulator:
    """Mutable stepping state for one cell; instances are single-threaded."""

    def __init__(self, config: SimConfig, apps: tuple[AppClass, ...] = DEFAULT_APPS):
        if not apps:
            raise ConfigError("need at least one app class")
        self.config = config
        self.apps = apps
        self._rng = np.random.default_rng(config.rng_seed)
        self._tick_index = 0
        self._ues: list[tuple[float, int]] = []  # (departure tick, app index)
        self._app_state = [
            _AppState(a.default_priority, a.default_qos_model, 1.0) for a in apps
        ]
        self.fixed_offered_mbps: tuple[float, ...] | None = None

    def apply_action(self, action: ConfigTuple) -> None:
        """Install one per-app assignment each: priority level, QoS-model
        stance, or generation-rate multiplier. Applying the same action twice
        is a no-op."""
        if len(action.assignments) != len(self.apps):
            raise InvalidActionError(
                f"action has {len(action.assignments)} assignments, expected {len(self.apps)}"
            )
        for state, value in zip(self._app_state, action.assignments):
            if value in _PRIORITY_RANK:
                state.priority = value
            elif value in QOS_MODELS:
                state.qos_model = value
            elif value == RATE_LABEL:
                state.rate_multiplier = self.config.rate_multiplier
            else:
                raise InvalidActionError(f"unknown assignment {value!r}")

    def _effective_shaper(self, app_index: int, offered_mbps: float) -> ShaperConfig:
        stance = self._app_state[app_index].qos_model
        cap = self.config.capacity_mbps
        if stance == "BE":
            return ShaperConfig(0.0, BE_EIR_FRACTION * cap, STANCE_EBS_MBIT)
        if stance == "RTPS":
            return ShaperConfig(RTPS_CIR_FRACTION * cap, RTPS_EIR_FRACTION * cap, STANCE_EBS_MBIT)
        # UGS: committed rate tracks demand, nothing buffered or dropped.
        return ShaperConfig(offered_mbps, 0.0, 0.0)

    def _update_population(self) -> None:
        t = float(self._tick_index)
        counts = [0] * len(self.apps)
        if self._ues:
            self._ues = [ue for ue in self._ues if ue[0] > t]
            for _, app in self._ues:
                counts[app] += 1
        quota = self.config.ue_quota
        arrivals = sample_arrivals(self.config.arrival_rate, self._rng)
        for _ in range(arrivals):
            if len(self._ues) >= self.config.num_ues_max:
                break
            app = int(self._rng.integers(0, len(self.apps)))
            if quota and app < len(quota) and counts[app] >= quota[app]:
                continue  # class admission quota exhausted
            holding = float(self._rng.exponential(self.config.mean_holding_ticks))
            self._ues.append((t + holding, app))
            counts[app] += 1
        for state, n in zip(self._app_state, counts):
            state.ue_count = n

    def _offered_loads(self, now_s: float) -> list[float]:
        if self.fixed_offered_mbps is not None:
            base = list(self.fixed_offered_mbps)
        else:
            self._update_population()
            base = [
                st.ue_count * app.per_ue_demand_mbps
                for st, app in zip(self._app_state, self.apps)
            ]
            ramp = self.config.congestion_ramp_s
            pulses_on = not self.config.pulses_gated or any(
                w.load_at(now_s, ramp) == w.extra_mbps > 0 for w in self.config.congestion
            )
            if pulses_on:
                for pulse in self.config.pulses:
                    if pulse.app_index < len(base) and self._tick_index % pulse.period_ticks == 0:
                        base[pulse.app_index] += pulse.mbps
        offered = [b * st.rate_multiplier for b, st in zip(base, self._app_state)]
        extra = sum(
            w.load_at(now_s, self.config.congestion_ramp_s) for w in self.config.congestion
        )
        if extra:
            offered[CONGESTED_APP_INDEX] += extra
        return offered

    def step(self) -> TickObservation:
        """Advance one monitoring interval and return the aggregate observation."""
        tick = self.config.tick_s
        now = self._tick_index * tick
        offered = self._offered_loads(now)

        requests = []  # per app: rate admitted by its shaper
        conformant_total = excess_total = dropped_total = buffered_total = 0.0
        for i, off in enumerate(offered):
            state = self._app_state[i]
            cfg = self._effective_shaper(i, off)
            conformant, excess, buffered_out, dropped = shape(
                off, cfg, state.buffered_mbit, tick
            )
            state.buffered_mbit = buffered_out
            requests.append(conformant + excess)
            conformant_total += conformant
            excess_total += excess
            dropped_total += dropped
            buffered_total += buffered_out

        # Priority scheduler: higher rank first, app index breaks ties.
        order = sorted(
            range(len(self.apps)),
            key=lambda i: (-_PRIORITY_RANK[self._app_state[i].priority], i),
        )
        remaining = self.config.capacity_mbps
        served_total = 0.0
        for i in order:
            served = min(requests[i], remaining)
            served_total += served
            remaining -= served

        quantum = self.config.report_quantum_mbps
        if quantum > 0:
            # Floor keeps the reported value within capacity; the epsilon
            # stops float summation noise from flipping exact multiples.
            served_total = math.floor(served_total / quantum + 1e-9) * quantum

        self._tick_index += 1
        return TickObservation(
            timestamp_s=now,
            offered_mbps=tuple(offered),
            conformant_mbps=conformant_total,
            excess_mbps=excess_total,
            buffered_mbit=buffered_total,
            dropped_mbps=dropped_total,
            observed_bw_mbps=served_total,
        )


def run(config: SimConfig, policy=None, apps: tuple[AppClass, ...] = DEFAULT_APPS) -> list[TickObservation]:
    """Run for duration/tick intervals; bit-identical given (config, policy).

    `policy`, when given, is called as policy(tick_index, last_observation)
    before each tick and may return a ConfigTuple to apply (or None).
    """
    n_ticks = int(round(config.duration_s / config.tick_s))
    sim = Simulator(config, apps)
    observations: list[TickObservation] = []
    last: TickObservation | None = None
    for t in range(n_ticks):
        if policy is not None:
            action = policy(t, last)
            if action is not None:
                sim.apply_action(action)
        last = sim.step()
        observations.append(last)
    return observations


def write_series_csv(observations: list[TickObservation], path, per_app: bool = False) -> None:
    """Emit `time_s,bandwidth_mbps` rows (UTF-8, LF); optional per-app offered columns."""
    lines = []
    if per_app:
        app_cols = ",".join(f"offered_app{i + 1}_mbps" for i in range(len(observations[0].offered_mbps)))
        lines.append(f"time_s,bandwidth_mbps,{app_cols}")
        for o in observations:
            apps_part = ",".join(repr(v) for v in o.offered_mbps)
            lines.append(f"{o.timestamp_s!r},{o.observed_bw_mbps!r},{apps_part}")
    else:
        lines.append("time_s,bandwidth_mbps")
        for o in observations:
            lines.append(f"{o.timestamp_s!r},{o.observed_bw_mbps!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a dataset CSV; returns (time_s, bandwidth_mbps) arrays."""
    from .errors import DataError

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = header.split(",")
        if fields[:2] != ["time_s", "bandwidth_mbps"]:
            raise DataError(f"{path}: expected header time_s,bandwidth_mbps, got {header!r}")
        times, values = [], []
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{line_no}: bad row {line!r}") from exc
    if not math.isfinite(sum(values)):
        raise DataError(f"{path}: series contains non-finite values")
    return np.asarray(times, dtype=float), np.asarray(values, dtype=float)
