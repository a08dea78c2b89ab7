"""Multi-stage connection-setup baseline modeled by its timing constants.

A device first contends on a 54-preamble random access channel; only a
preamble chosen by nobody else succeeds (singleton capture). A successful
request waits for the grant round-trip and the connection setup before its
one-TTI data transmission is served from a 44-PRB/TTI scheduled queue.
Collided requests back off over a 0..20 ms window and give up after 10
attempts; those constants arrive through the ARQ config (see
``default_arq``), keeping the engine's NACK chain in charge.
"""

from __future__ import annotations

from collections import Counter, deque

import numpy as np

from ..core import ArqConfig, Scheme, SchemeReport
from .common import take_params


class MultiStageBaselineScheme(Scheme):
    name = "multi-stage-baseline"
    DEFAULTS = {
        "preambles": 54,
        "grant_delay_ttis": 10,
        "setup_delay_ttis": 40,
        "data_prbs_per_tti": 44,
    }

    @staticmethod
    def default_arq() -> ArqConfig:
        # 20 ms backoff window, 10 total attempts.
        return ArqConfig(ack_delay_ttis=3, backoff_min_ttis=0,
                         backoff_max_ttis=20, max_retransmissions=9)

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.n_preambles = int(p["preambles"])
        self.grant_delay = int(p["grant_delay_ttis"])
        self.setup_delay = int(p["setup_delay_ttis"])
        self.data_capacity = int(p["data_prbs_per_tti"])
        if min(self.n_preambles, self.data_capacity) < 1:
            raise ValueError("preamble pool and data capacity must be positive")
        self.ready: deque = deque()  # (ready_tti, device), ready_tti monotone

    def pending_count(self) -> int:
        return len(self.ready)

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport()

        # Scheduled data: serve connected devices whose setup completed.
        served = 0
        while (self.ready and served < self.data_capacity
               and self.ready[0][0] <= now):
            _, dev = self.ready.popleft()
            report.successes.append(dev)
            served += 1
        report.attempts += served

        # Random access stage: singleton preambles win a grant.
        report.attempts += len(new_attempters)
        if new_attempters:
            picks = rng.integers(0, self.n_preambles, size=len(new_attempters))
            tally = Counter(int(p) for p in picks)
            ready_tti = now + self.grant_delay + self.setup_delay
            for dev, pre in zip(new_attempters, picks):
                if tally[int(pre)] == 1:
                    self.ready.append((ready_tti, dev))
                else:
                    report.failures.append((dev, now))
        return report
