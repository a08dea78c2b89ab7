"""Uniform-contention schemes: slotted ALOHA and the 4-layer grant-free map.

Both pick one opportunity uniformly at random per attempt and succeed only
when alone on it. They differ in the opportunity pool: plain slotted ALOHA
contends over the data PRBs of one TTI, while the grant-free variant
multiplies each of its 50 PRBs by 4 ideal spatial layers, giving 200
opportunities per TTI.
"""

from __future__ import annotations

import numpy as np

from ..core import ArqConfig, Scheme, SchemeReport
from ..resources import PRBS_PER_TTI
from .common import take_params, uniform_contention


class SlottedAlohaScheme(Scheme):
    """Baseline slotted ALOHA over the data opportunities of one TTI.

    mode "arq" routes collisions through the shared NACK/backoff chain;
    mode "fresh" drops them immediately, which makes the offered load equal
    the arrival rate and the throughput follow n(1-1/R)^(n-1).
    """

    name = "slotted-aloha"
    DEFAULTS = {"opportunities": PRBS_PER_TTI, "mode": "arq"}

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.opportunities = int(p["opportunities"])
        if self.opportunities < 1:
            raise ValueError("need at least one opportunity per TTI")
        self.mode = p["mode"]
        if self.mode not in ("arq", "fresh"):
            raise ValueError("mode must be 'arq' or 'fresh'")

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport(attempts=len(new_attempters))
        won = uniform_contention(len(new_attempters), self.opportunities, rng)
        for dev, ok in zip(new_attempters, won):
            if ok:
                report.successes.append(dev)
            elif self.mode == "fresh":
                report.drops.append(dev)
            else:
                report.failures.append((dev, now))
        return report


class NotaftScheme(SlottedAlohaScheme):
    """Grant-free one-shot access over PRBs x ideal spatial layers.

    A transmission is lost only when another device picks the same
    (PRB, layer) pair; retransmissions follow the shared ARQ chain.
    """

    name = "notaft"
    DEFAULTS = {"prbs": PRBS_PER_TTI, "layers": 4, "mode": "arq"}

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        prbs, layers = int(p["prbs"]), int(p["layers"])
        if prbs < 1 or layers < 1:
            raise ValueError("PRB and layer counts must be positive")
        self.opportunities = prbs * layers
        self.mode = p["mode"]
        if self.mode not in ("arq", "fresh"):
            raise ValueError("mode must be 'arq' or 'fresh'")
