"""Radio resource accounting: PRB grids, preamble pools, frame geometries.

The framework slices a 10 MHz carrier into 50 PRBs per 1 ms TTI; one PRB is
1 ms x 180 kHz and carries one 8-byte packet. Plans here describe how a
scheme splits those PRBs between control and data, how preamble pools map to
data resources, and how signature/contention frames are dimensioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

PRBS_PER_TTI = 50
TTI_MS = 1.0
PACKET_BYTES = 8


@dataclass(frozen=True)
class ResourcePlan:
    """Per-TTI split of the PRB grid for one scheme."""

    name: str
    total_prbs: int = PRBS_PER_TTI
    control_prbs: int = 0
    data_prbs: int = PRBS_PER_TTI
    spatial_layers: int = 1

    def __post_init__(self):
        for msg in check_resource_plan(self.total_prbs, self.control_prbs,
                                       self.data_prbs, self.spatial_layers):
            raise ValueError(f"{self.name}: {msg}")


def check_resource_plan(total, control, data, layers) -> list:
    """Diagnostics for a PRB split; empty list means valid."""
    problems = []
    if control + data != total:
        problems.append(
            f"control ({control}) + data ({data}) PRBs must equal the "
            f"{total}-PRB grid")
    if data <= 0:
        problems.append("a plan needs at least one data PRB")
    if control < 0:
        problems.append("control PRB count cannot be negative")
    if layers < 1:
        problems.append("spatial layer count must be >= 1")
    return problems


def opportunities_per_tti(plan: ResourcePlan) -> int:
    """Simultaneous transmission opportunities the plan offers each TTI."""
    return plan.data_prbs * plan.spatial_layers


@dataclass(frozen=True)
class PreamblePlan:
    """Preamble pool of size S over M_D data resources, S = N * M_D.

    The fixed mapping sends preamble i to resource i // N, so every resource
    has exactly N preambles pointing at it.
    """

    n_preambles: int
    n_data_resources: int

    def __post_init__(self):
        if self.n_preambles < 1 or self.n_data_resources < 1:
            raise ValueError("preamble pool and resource count must be positive")
        if self.n_preambles % self.n_data_resources != 0:
            raise ValueError(
                f"pool of {self.n_preambles} preambles does not divide evenly "
                f"over {self.n_data_resources} data resources")

    @property
    def overprovisioning(self) -> int:
        return self.n_preambles // self.n_data_resources


def map_preamble_to_data_resource(preamble: int, plan: PreamblePlan) -> int:
    if not 0 <= preamble < plan.n_preambles:
        raise IndexError(f"preamble {preamble} outside pool of {plan.n_preambles}")
    return preamble // plan.overprovisioning


def preamble_pool_control_cost(n_preambles: int) -> int:
    """PRBs consumed per TTI by generating a pool of PRACH preambles.

    Linear fit through the two known pool costs (54 preambles = 6 PRBs,
    216 = 12); values away from those anchors are a flagged linear
    extrapolation, not a measured cost.
    """
    return round(6 + (n_preambles - 54) / 27)


@dataclass(frozen=True)
class SignatureFramePlan:
    """Bloom-signature frame: L PRACH subframes of M preambles, k hash bits."""

    n_subframes: int
    preambles_per_prach: int = 216
    hashes: int = 1

    def __post_init__(self):
        if self.n_subframes < 1 or self.preambles_per_prach < 1:
            raise ValueError("frame dimensions must be positive")
        if not 1 <= self.hashes <= self.n_subframes * self.preambles_per_prach:
            raise ValueError("hash count must fit the signature grid")

    @property
    def n_positions(self) -> int:
        return self.n_subframes * self.preambles_per_prach


def signature_fp_rate(lam: float, n_subframes: int, hashes: int,
                      preambles_per_prach: int = 216,
                      p_d: float = 0.99, p_f: float = 1e-3) -> float:
    """Analytic false-positive rate of the signature filter at arrival rate lam.

    Expected contenders per frame are lam * L (arrivals accumulate for one
    frame, then transmit in the next); each contender lights `hashes` of the
    L*M positions, observed through detection probability p_d and false-alarm
    probability p_f.
    """
    n = max(1.0, lam * n_subframes)
    fill = 1.0 - (1.0 - p_f) * math.exp(
        -p_d * hashes * n / (n_subframes * preambles_per_prach))
    return fill ** hashes


def dimension_signature_plan(lam: float, preambles_per_prach: int = 216,
                             p_d: float = 0.99, p_f: float = 1e-3,
                             fp_budget: float = 1e-3,
                             max_subframes: int = 64) -> SignatureFramePlan:
    """Pick (L, k) for a target arrival rate.

    Minimizes the frame length L subject to the analytic false-positive rate
    staying under fp_budget, with at most one signature bit per subframe
    (k <= L: a device transmits a single preamble per PRACH occasion). When
    no (L, k) meets the budget the load has saturated the filter; the lookup
    then returns the FP-minimizing frame, whose length shrinks as the load
    grows because fewer hash bits keep the filter near its optimal fill.
    """
    if lam < 0:
        raise ValueError("arrival rate cannot be negative")
    for n_subframes in range(1, max_subframes + 1):
        for hashes in range(1, n_subframes + 1):
            fp = signature_fp_rate(lam, n_subframes, hashes,
                                   preambles_per_prach, p_d, p_f)
            if fp <= fp_budget:
                return SignatureFramePlan(n_subframes, preambles_per_prach, hashes)
    best = min(range(1, max_subframes + 1),
               key=lambda k: signature_fp_rate(lam, k, k, preambles_per_prach,
                                               p_d, p_f))
    return SignatureFramePlan(best, preambles_per_prach, best)


@dataclass(frozen=True)
class FramePlan:
    """Contention frame of S slots with R replicas per contender."""

    slots_per_frame: int = 10
    replicas: int = 2
    replica_cap: int = 3

    def __post_init__(self):
        if self.slots_per_frame < 1:
            raise ValueError("a frame needs at least one slot")
        if not 1 <= self.replicas <= self.slots_per_frame:
            raise ValueError("replica count must fit inside the frame")
        if not 1 <= self.replica_cap <= self.slots_per_frame:
            raise ValueError("replica cap must fit inside the frame")


RESOURCE_PLANS = {
    "sa-50": ResourcePlan("sa-50", 50, 0, 50, 1),
    # Pure-protocol grid for the one/two-stage study: 54 data resources so
    # pools of 54/108/216 preambles give integer over-provisioning 1/2/4.
    "ostsap-54": ResourcePlan("ostsap-54", 54, 0, 54, 1),
    "notaft-4layer": ResourcePlan("notaft-4layer", 50, 0, 50, 4),
    # Signature access: a 216-preamble PRACH costs 12 PRBs, leaving 38 for data.
    "sbaia-216": ResourcePlan("sbaia-216", 50, 12, 38, 1),
    # Cellular multi-stage baseline: 54 preambles cost 6 PRBs.
    "lte-54": ResourcePlan("lte-54", 50, 6, 44, 1),
    "craplnc-50": ResourcePlan("craplnc-50", 50, 0, 50, 1),
    "ccra-50": ResourcePlan("ccra-50", 50, 0, 50, 1),
    # Collaborative decoding: 12 collision blocks x 4 repetition slots.
    "scf-48": ResourcePlan("scf-48", 50, 2, 48, 1),
}


def get_resource_plan(name: str) -> ResourcePlan:
    try:
        return RESOURCE_PLANS[name]
    except KeyError:
        known = ", ".join(sorted(RESOURCE_PLANS))
        raise KeyError(f"unknown resource plan '{name}' (known: {known})") from None
