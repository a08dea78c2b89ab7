"""Deterministic slotted simulation engine.

The engine advances 1 ms TTIs, spawns Poisson arrivals, hands eligible
devices to the access scheme under test, and applies the shared ARQ chain:
feedback for a transmission in TTI i arrives at i + ack_delay, a NACKed
device backs off uniformly and retries no earlier than i + ack_delay + 1,
and the final NACK drops the device.

Determinism contract: (config, seed) -> trace is a pure function. Each
concern draws from its own named RNG sub-stream (arrivals, backoff,
scheme) so adding draws to one cannot perturb another.
"""

from __future__ import annotations

import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


def substream(seed: int, label: str) -> np.random.Generator:
    """Independent generator for one named concern under a master seed."""
    ss = np.random.SeedSequence([seed, zlib.crc32(label.encode())])
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Configuration types


@dataclass(frozen=True)
class TrafficConfig:
    """Poisson arrival process and payload parameters."""

    arrival_rate_lambda: float
    packet_size_bytes: int = 8
    mean_waiting_time_ms: float = 0.5

    def __post_init__(self):
        if self.arrival_rate_lambda < 0:
            raise ValueError("arrival rate must be non-negative")
        if self.packet_size_bytes <= 0:
            raise ValueError("packet size must be positive")
        if self.mean_waiting_time_ms < 0:
            raise ValueError("waiting offset must be non-negative")


@dataclass(frozen=True)
class ArqConfig:
    """Feedback delay, backoff window, and retransmission budget."""

    ack_delay_ttis: int = 3
    backoff_min_ttis: int = 0
    backoff_max_ttis: int = 10
    max_retransmissions: int = 4

    def __post_init__(self):
        if self.ack_delay_ttis < 1:
            raise ValueError("ack delay must be at least one TTI")
        if not 0 <= self.backoff_min_ttis <= self.backoff_max_ttis:
            raise ValueError("backoff window bounds out of order")
        if self.max_retransmissions < 0:
            raise ValueError("retransmission budget must be non-negative")


class DeviceState(Enum):
    IDLE = "idle"
    BACKLOGGED = "backlogged"
    AWAITING_FEEDBACK = "awaiting_feedback"
    SUCCEEDED = "succeeded"
    DROPPED = "dropped"


@dataclass
class Device:
    """One machine-type device attempting a single short-packet access."""

    id: int
    arrival_tti: int
    state: DeviceState = DeviceState.BACKLOGGED
    completion_tti: Optional[int] = None
    attempts_used: int = 0
    nacks: int = 0
    next_attempt_tti: int = 0

    def __post_init__(self):
        if self.next_attempt_tti < self.arrival_tti:
            self.next_attempt_tti = self.arrival_tti

    @property
    def latency_ttis(self) -> Optional[int]:
        if self.completion_tti is None:
            return None
        return self.completion_tti - self.arrival_tti + 1


@dataclass
class SimClock:
    """Monotone TTI counter; one step is 1 ms."""

    tti_index: int = 0
    tti_duration_ms: float = 1.0

    def advance(self) -> int:
        self.tti_index += 1
        return self.tti_index


class DropSignal(Exception):
    """Raised when backoff is requested for a device out of attempts."""


# ---------------------------------------------------------------------------
# Core operations


def generate_arrivals(rng: np.random.Generator, traffic: TrafficConfig,
                      n_ttis: int) -> np.ndarray:
    """Poisson arrival counts per TTI; same seed, same sequence."""
    if n_ttis <= 0:
        raise ValueError("horizon must be positive")
    if traffic.arrival_rate_lambda < 0:
        raise ValueError("arrival rate must be non-negative")
    if traffic.arrival_rate_lambda == 0:
        return np.zeros(n_ttis, dtype=np.int64)
    return rng.poisson(traffic.arrival_rate_lambda, size=n_ttis)


def apply_backoff(device: Device, rng: np.random.Generator, arq: ArqConfig,
                  now_tti: int) -> int:
    """Retry TTI after a NACK for a transmission in now_tti.

    Feedback lands at now + ack_delay, so the earliest retry is the TTI
    after that (zero backoff draw). Raises DropSignal when the device has
    already spent its retransmission budget.
    """
    if device.nacks >= arq.max_retransmissions:
        raise DropSignal(f"device {device.id} has no attempts remaining")
    draw = int(rng.integers(arq.backoff_min_ttis, arq.backoff_max_ttis + 1))
    return now_tti + arq.ack_delay_ttis + 1 + draw


# ---------------------------------------------------------------------------
# Scheme interface


@dataclass
class SchemeReport:
    """What a scheme resolved during one TTI.

    successes: devices whose data the base station received this TTI.
    failures: (device, reference_tti) pairs; the NACK chain runs from the
        reference transmission TTI. Devices dispatched earlier but absent
        from all lists stay in flight inside the scheme (frame buffering,
        grant pipelines) and must be resolved in a later report.
    drops: devices leaving without retry (fresh-arrival modes).
    attempts: transmissions attempted this TTI, for the trace record.
    """

    successes: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    drops: list = field(default_factory=list)
    attempts: int = 0


class Scheme:
    """Base class for access schemes driven by the engine.

    Subclasses override on_tti; new_attempters are devices dispatched this
    TTI (eligible and backlogged). The scheme owns them until it reports
    each one exactly once as a success or failure.
    """

    name = "base"

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        raise NotImplementedError

    def pending_count(self) -> int:
        """Devices currently buffered inside the scheme."""
        return 0


# ---------------------------------------------------------------------------
# Trace


@dataclass
class SimTrace:
    """Per-TTI counters plus per-device outcomes for one scenario run."""

    n_ttis: int
    arrivals: np.ndarray
    attempts: np.ndarray
    successes: np.ndarray
    failures: np.ndarray
    latency_samples_ttis: np.ndarray
    success_ttis: np.ndarray
    n_arrivals: int
    n_successes: int
    n_drops: int
    n_pending: int
    mean_waiting_time_ms: float
    tti_duration_ms: float = 1.0

    def conservation_holds(self) -> bool:
        return self.n_arrivals == self.n_successes + self.n_drops + self.n_pending

    def latencies_ms(self) -> np.ndarray:
        return (self.latency_samples_ttis * self.tti_duration_ms
                + self.mean_waiting_time_ms)


@dataclass
class ScenarioConfig:
    """Everything one deterministic run needs."""

    scheme: str
    traffic: TrafficConfig
    seed: int
    horizon_ttis: int = 10_000
    arq: ArqConfig = field(default_factory=ArqConfig)
    scheme_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon_ttis <= 0:
            raise ValueError("horizon must be positive")


def run_scenario(config: ScenarioConfig) -> SimTrace:
    """Run one scenario to its horizon and return the trace.

    Per-TTI order: deliver pending feedback (drops and backoff), spawn this
    TTI's arrivals, dispatch every backlogged device whose retry timer
    expired, let the scheme resolve, then fold the report back into device
    state. Pending devices at the horizon (in backoff, awaiting feedback,
    or buffered inside the scheme) are counted separately and excluded
    from latency.
    """
    from .schemes import make_scheme  # deferred: schemes import this module

    rng_arrivals = substream(config.seed, "arrivals")
    rng_backoff = substream(config.seed, "backoff")
    rng_scheme = substream(config.seed, "scheme")

    scheme = make_scheme(config.scheme, config.scheme_params, config.arq,
                         config.seed)
    arrivals = generate_arrivals(rng_arrivals, config.traffic,
                                 config.horizon_ttis)

    horizon = config.horizon_ttis
    arq = config.arq
    attempts_per_tti = np.zeros(horizon, dtype=np.int64)
    successes_per_tti = np.zeros(horizon, dtype=np.int64)
    failures_per_tti = np.zeros(horizon, dtype=np.int64)
    latencies: list = []
    success_ttis: list = []

    wake_at: defaultdict = defaultdict(list)       # tti -> devices to dispatch
    feedback_at: defaultdict = defaultdict(list)   # tti -> (device, ref_tti)
    n_drops = 0
    n_devices = 0
    in_flight = 0  # devices currently owned by the scheme
    n_waiting = 0  # devices parked in wake_at (includes beyond-horizon retries)

    def deliver_nack(device: Device, at_tti: int) -> None:
        # The NACK consumes one attempt; the final one drops the device,
        # otherwise it backs off and retries no earlier than the next TTI.
        nonlocal n_drops, n_waiting
        device.nacks += 1
        if device.nacks >= arq.max_retransmissions:
            device.state = DeviceState.DROPPED
            n_drops += 1
        else:
            device.state = DeviceState.BACKLOGGED
            draw = int(rng_backoff.integers(arq.backoff_min_ttis,
                                            arq.backoff_max_ttis + 1))
            device.next_attempt_tti = at_tti + 1 + draw
            wake_at[device.next_attempt_tti].append(device)
            n_waiting += 1

    clock = SimClock()
    for now in range(horizon):
        clock.tti_index = now

        # 1. Feedback scheduled for this TTI.
        for device, _ref in feedback_at.pop(now, ()):
            deliver_nack(device, now)

        # 2. Arrivals bind to this TTI boundary and may transmit at once.
        for _ in range(int(arrivals[now])):
            dev = Device(id=n_devices, arrival_tti=now, next_attempt_tti=now)
            n_devices += 1
            wake_at[now].append(dev)
            n_waiting += 1

        # 3. Dispatch and resolve.
        attempters = wake_at.pop(now, [])
        n_waiting -= len(attempters)
        attempters.sort(key=lambda d: d.id)
        for dev in attempters:
            dev.state = DeviceState.AWAITING_FEEDBACK
            dev.attempts_used += 1
        in_flight += len(attempters)
        report = scheme.on_tti(now, attempters, rng_scheme)

        # 4. Fold the report back into engine state.
        for dev in report.successes:
            dev.state = DeviceState.SUCCEEDED
            dev.completion_tti = now
            latencies.append(dev.latency_ttis)
            success_ttis.append(now)
        for dev in report.drops:
            dev.state = DeviceState.DROPPED
            n_drops += 1
        for dev, ref_tti in report.failures:
            delivery = max(now, ref_tti + arq.ack_delay_ttis)
            if delivery >= horizon:
                dev.state = DeviceState.AWAITING_FEEDBACK
                n_waiting += 1  # feedback clipped by the horizon, stays pending
            elif delivery == now:
                # Decision point already at or past the nominal ack instant
                # (frame-end resolutions); the device learns immediately.
                deliver_nack(dev, now)
            else:
                feedback_at[delivery].append((dev, ref_tti))
        in_flight -= (len(report.successes) + len(report.failures)
                      + len(report.drops))
        attempts_per_tti[now] = report.attempts
        successes_per_tti[now] = len(report.successes)
        failures_per_tti[now] = len(report.failures) + len(report.drops)

    # Feedback scheduled inside the horizon but not yet delivered.
    n_feedback_pending = sum(len(v) for v in feedback_at.values())
    n_successes = len(latencies)
    n_pending = n_devices - n_successes - n_drops
    trace = SimTrace(
        n_ttis=horizon,
        arrivals=arrivals,
        attempts=attempts_per_tti,
        successes=successes_per_tti,
        failures=failures_per_tti,
        latency_samples_ttis=np.asarray(latencies, dtype=np.int64),
        success_ttis=np.asarray(success_ttis, dtype=np.int64),
        n_arrivals=n_devices,
        n_successes=n_successes,
        n_drops=n_drops,
        n_pending=n_pending,
        mean_waiting_time_ms=config.traffic.mean_waiting_time_ms,
        tti_duration_ms=clock.tti_duration_ms,
    )
    if not trace.conservation_holds():
        raise AssertionError("conservation violated: arrivals != "
                             "successes + drops + pending")
    # Pending devices live in exactly one place: inside the scheme, parked
    # for a future wake-up, or waiting on undelivered feedback.
    if n_pending != in_flight + n_waiting + n_feedback_pending:
        raise AssertionError("pending devices unaccounted for")
    if scheme.pending_count() != in_flight:
        raise AssertionError("scheme lost or duplicated in-flight devices")
    return trace
