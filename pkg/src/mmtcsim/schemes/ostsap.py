"""One-stage and two-stage preamble-based access over a shared data grid.

Both schemes draw a preamble uniformly from a pool of S = N * M_D and map
it to one of M_D data resources (over-provisioning factor N). The
one-stage variant sends preamble and data in the same TTI; the two-stage
variant sends the preamble first, receives feedback after the ack delay,
and transmits data one TTI later, so its floor latency is ack_delay + 2
TTIs. Preamble detection is ideal; losses come from resource contention
resolved by the capture model (single- or two-user detection).
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..capture import CaptureModel, resolve_data_resource
from ..core import ArqConfig, Scheme, SchemeReport
from ..resources import PreamblePlan, map_preamble_to_data_resource
from .common import take_params

FEEDBACK_VARIANTS = ("bitmap", "resource-index", "queue")


def _capture_from_name(name: str) -> CaptureModel:
    if name == "sud":
        return CaptureModel.sud()
    if name == "mud2":
        return CaptureModel.mud(2)
    raise ValueError("capture must be 'sud' or 'mud2'")


class OneStageScheme(Scheme):
    """Preamble and data in the same TTI, data resource fixed by preamble."""

    name = "one-stage"
    DEFAULTS = {"preambles": 54, "data_resources": 54, "capture": "sud"}

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.plan = PreamblePlan(n_preambles=int(p["preambles"]),
                                 n_data_resources=int(p["data_resources"]))
        self.capture = _capture_from_name(p["capture"])

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport(attempts=len(new_attempters))
        if not new_attempters:
            return report
        picks = rng.integers(0, self.plan.n_preambles,
                             size=len(new_attempters))
        by_resource = defaultdict(list)
        for dev, pre in zip(new_attempters, picks):
            res = map_preamble_to_data_resource(int(pre), self.plan)
            by_resource[res].append((dev, int(pre)))
        for res in sorted(by_resource):
            entries = by_resource[res]
            decoded = resolve_data_resource([pre for _, pre in entries],
                                            self.capture, rng)
            decoded = set(decoded)
            for j, (dev, _pre) in enumerate(entries):
                if j in decoded:
                    report.successes.append(dev)
                else:
                    report.failures.append((dev, now))
        return report


class TwoStageScheme(Scheme):
    """Preamble first, grant feedback after the ack delay, then data.

    Feedback variants:
      bitmap         every detected preamble is announced; all its senders
                     transmit on the mapped resource (no arbitration).
      resource-index the base station grants at most one preamble per data
                     resource (two distinct ones under two-user detection);
                     ungranted requests are refused immediately.
      queue          like resource-index, but surplus requests shift to the
                     next TTI with a free slot on their resource instead of
                     being refused.
    """

    name = "two-stage"
    DEFAULTS = {"preambles": 54, "data_resources": 54, "capture": "sud",
                "feedback": "resource-index"}

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.plan = PreamblePlan(n_preambles=int(p["preambles"]),
                                 n_data_resources=int(p["data_resources"]))
        self.capture = _capture_from_name(p["capture"])
        self.feedback = p["feedback"]
        if self.feedback not in FEEDBACK_VARIANTS:
            raise ValueError(f"feedback must be one of {FEEDBACK_VARIANTS}")
        self.grant_capacity = 2 if self.capture.kind == "mud" else 1
        self.ack_delay = arq.ack_delay_ttis
        self.data_at: defaultdict = defaultdict(list)  # tti -> (dev, res, pre)
        self.slot_load: defaultdict = defaultdict(dict)  # tti -> {res: count}
        self.queue_head: dict = {}  # res -> earliest candidate data TTI
        self._in_flight = 0

    def pending_count(self) -> int:
        return self._in_flight

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport()

        # Data stage for grants that matured this TTI.
        batch = self.data_at.pop(now, [])
        self.slot_load.pop(now, None)
        report.attempts += len(batch)
        by_resource = defaultdict(list)
        for dev, res, pre in batch:
            by_resource[res].append((dev, pre))
        for res in sorted(by_resource):
            entries = by_resource[res]
            decoded = set(resolve_data_resource([pre for _, pre in entries],
                                                self.capture, rng))
            for j, (dev, _pre) in enumerate(entries):
                if j in decoded:
                    report.successes.append(dev)
                else:
                    report.failures.append((dev, now))
                self._in_flight -= 1

        # Preamble stage for fresh requests; detection is ideal, so the
        # feedback variant alone decides who transmits data and when.
        report.attempts += len(new_attempters)
        if new_attempters:
            picks = rng.integers(0, self.plan.n_preambles,
                                 size=len(new_attempters))
            by_preamble = defaultdict(list)
            for dev, pre in zip(new_attempters, picks):
                by_preamble[int(pre)].append(dev)
            self._run_feedback(now, by_preamble, report)
        return report

    def _run_feedback(self, now, by_preamble, report):
        data_tti = now + self.ack_delay + 1
        per_resource = defaultdict(list)
        for pre in sorted(by_preamble):
            res = map_preamble_to_data_resource(pre, self.plan)
            per_resource[res].append(pre)

        if self.feedback == "bitmap":
            for res, pres in per_resource.items():
                for pre in pres:
                    self._schedule(data_tti, res, pre, by_preamble[pre])
        elif self.feedback == "resource-index":
            for res, pres in per_resource.items():
                granted = pres[:self.grant_capacity]
                for pre in granted:
                    self._schedule(data_tti, res, pre, by_preamble[pre])
                for pre in pres[self.grant_capacity:]:
                    for dev in by_preamble[pre]:
                        report.failures.append((dev, now))
        else:  # queue
            for res, pres in per_resource.items():
                for pre in pres:
                    t = max(self.queue_head.get(res, 0), data_tti)
                    while self.slot_load[t].get(res, 0) >= self.grant_capacity:
                        t += 1
                    self.slot_load[t][res] = self.slot_load[t].get(res, 0) + 1
                    self.queue_head[res] = t
                    self._schedule(t, res, pre, by_preamble[pre])

    def _schedule(self, tti, res, pre, devices):
        for dev in devices:
            self.data_at[tti].append((dev, res, pre))
            self._in_flight += 1
