"""Signature-based access: Bloom-coded preamble activations over a frame.

Each contending device owns a registered identity whose signature (k hashed
bit positions over L PRACH subframes x M preambles) it transmits across the
frame. The base station superposes what it detects per subframe, then
membership-tests every registered identity against the observed bitmap: an
identity is decoded when all of its signature bits are present. Detection
noise (per-bit miss and false alarm) makes never-transmitted identities
occasionally pass the test; such false positives consume grant slots like
real devices.

Two decision instants bound the achievable latency: "upper" decides every
identity at frame end, "lower" decides each identity at the subframe
carrying its last signature bit. Decoded devices join a shared grant queue
served at the data-PRB rate left over by the PRACH overhead.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..capture import DetectionModel, detect_bitmap
from ..core import ArqConfig, Scheme, SchemeReport
from ..resources import SignatureFramePlan, dimension_signature_plan
from .common import take_params


@dataclass(frozen=True)
class Signature:
    """A device identity's activation pattern over the L x M frame grid."""

    owner: int
    positions: tuple  # sorted unique flat indices in [0, L*M)

    def last_subframe(self, preambles_per_prach: int) -> int:
        return self.positions[-1] // preambles_per_prach


def build_signature(identity: int, plan: SignatureFramePlan) -> Signature:
    """Deterministic k-hash signature; collisions may merge set bits."""
    n = plan.n_positions
    positions = set()
    for j in range(plan.hashes):
        digest = hashlib.blake2b(f"{identity}:{j}".encode(),
                                 digest_size=8).digest()
        positions.add(int.from_bytes(digest, "big") % n)
    return Signature(identity, tuple(sorted(positions)))


def scheme_signature_frame(active_identities, plan: SignatureFramePlan,
                           detection: DetectionModel,
                           rng: np.random.Generator,
                           universe_size: int):
    """One whole frame in isolation: superpose, membership-test, decode.

    Returns (decoded identities, false positives) where false positives are
    decoded identities that never transmitted.
    """
    m = plan.preambles_per_prach
    transmitted = np.zeros((plan.n_subframes, m), dtype=bool)
    for u in active_identities:
        for pos in build_signature(u, plan).positions:
            transmitted[pos // m, pos % m] = True
    observed = np.zeros_like(transmitted)
    for sub in range(plan.n_subframes):
        observed[sub] = detect_bitmap(transmitted[sub], detection, rng)
    flat = observed.reshape(-1)
    decoded = [u for u in range(universe_size)
               if flat[list(build_signature(u, plan).positions)].all()]
    active = set(int(u) for u in active_identities)
    false_positives = [u for u in decoded if u not in active]
    return decoded, false_positives


class SbaiaScheme(Scheme):
    name = "sbaia"
    DEFAULTS = {
        "preambles_per_prach": 216,
        "grants_per_tti": 38,
        "universe_size": 1024,
        "p_d": 0.99,
        "p_f": 1e-3,
        "fp_budget": 1e-3,
        "bound": "upper",
        "frame_subframes": 0,  # 0: dimension from mean_arrivals
        "hashes": 0,
        "mean_arrivals": None,
    }

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        m = int(p["preambles_per_prach"])
        if int(p["frame_subframes"]) > 0:
            self.plan = SignatureFramePlan(int(p["frame_subframes"]), m,
                                           max(1, int(p["hashes"])))
        else:
            if p["mean_arrivals"] is None:
                raise ValueError("signature dimensioning needs mean_arrivals "
                                 "(or an explicit frame_subframes/hashes)")
            self.plan = dimension_signature_plan(
                float(p["mean_arrivals"]), preambles_per_prach=m,
                p_d=float(p["p_d"]), p_f=float(p["p_f"]),
                fp_budget=float(p["fp_budget"]))
        self.bound = p["bound"]
        if self.bound not in ("upper", "lower"):
            raise ValueError("bound must be 'upper' or 'lower'")
        self.detection = DetectionModel(p_d=float(p["p_d"]),
                                        p_f=float(p["p_f"]))
        self.grants_per_tti = int(p["grants_per_tti"])
        self.universe = int(p["universe_size"])
        if self.grants_per_tti < 1 or self.universe < 1:
            raise ValueError("grant rate and universe must be positive")
        self.ack_delay = arq.ack_delay_ttis

        # Precomputed signature table for the whole registered universe.
        plan = self.plan
        self._positions = np.zeros((self.universe, plan.hashes), dtype=np.int64)
        self._last_subframe = np.zeros(self.universe, dtype=np.int64)
        for u in range(self.universe):
            sig = build_signature(u, plan)
            pos = np.asarray(sig.positions, dtype=np.int64)
            # duplicate-pad so every row has exactly `hashes` entries
            padded = np.resize(pos, plan.hashes)
            self._positions[u] = padded
            self._last_subframe[u] = sig.last_subframe(plan.preambles_per_prach)
        self._due_at: dict = {}  # subframe -> identities whose last bit is there
        for sub in range(plan.n_subframes):
            self._due_at[sub] = np.nonzero(self._last_subframe == sub)[0]

        # Identity pool: lowest free identity binds to a contender.
        self._next_fresh = 0
        self._freed: list = []
        # Frame state.
        self.waiting: list = []
        self.enrolled: dict = {}   # identity -> device
        self.unsigned: list = []   # contenders the pool could not cover
        self._sub_bits: list = []  # per-subframe preamble lists this frame
        self._sub_tx_count: list = []
        self.observed = np.zeros((plan.n_subframes, plan.preambles_per_prach),
                                 dtype=bool)
        self.grant_queue: deque = deque()  # (eligible_tti, device or None)
        self._in_flight = 0

    # -- identity pool -----------------------------------------------------
    def _take_identity(self):
        if self._freed:
            self._freed.sort()
            return self._freed.pop(0)
        if self._next_fresh < self.universe:
            u = self._next_fresh
            self._next_fresh += 1
            return u
        return None

    def _release_identity(self, u: int) -> None:
        self._freed.append(u)

    def pending_count(self) -> int:
        return self._in_flight

    # -- frame machinery ---------------------------------------------------
    def _start_frame(self) -> None:
        plan = self.plan
        self.observed[:] = False
        self._sub_bits = [[] for _ in range(plan.n_subframes)]
        self._sub_tx_count = [0] * plan.n_subframes
        self.enrolled = {}
        self.unsigned = []
        for dev in self.waiting:
            u = self._take_identity()
            if u is None:
                self.unsigned.append(dev)
                continue
            self.enrolled[u] = dev
            subs_seen = set()
            for pos in self._positions[u]:
                sub, pre = divmod(int(pos), plan.preambles_per_prach)
                self._sub_bits[sub].append(pre)
                subs_seen.add(sub)
            for sub in subs_seen:
                self._sub_tx_count[sub] += 1
        self.waiting = []

    def _test_identities(self, candidates: np.ndarray) -> np.ndarray:
        if candidates.size == 0:
            return candidates
        flat = self.observed.reshape(-1)
        passed = flat[self._positions[candidates]].all(axis=1)
        return candidates[passed]

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        plan = self.plan
        report = SchemeReport()

        # Serve the grant queue: ghosts burn slots without producing data.
        served = 0
        while (self.grant_queue and served < self.grants_per_tti
               and self.grant_queue[0][0] <= now):
            _, dev = self.grant_queue.popleft()
            served += 1
            if dev is not None:
                report.successes.append(dev)
                self._in_flight -= 1
        report.attempts += len(report.successes)

        self.waiting.extend(new_attempters)
        self._in_flight += len(new_attempters)
        sub = now % plan.n_subframes
        if sub == 0:
            self._start_frame()

        # Superpose this subframe's activations under detection noise.
        transmitted = np.zeros(plan.preambles_per_prach, dtype=bool)
        if self._sub_bits:
            transmitted[self._sub_bits[sub]] = True
        self.observed[sub] = detect_bitmap(transmitted, self.detection, rng)
        report.attempts += self._sub_tx_count[sub] if self._sub_tx_count else 0

        # Decisions.
        if self.bound == "lower":
            decoded = self._test_identities(self._due_at[sub])
            self._apply_decisions(decoded, now)
        if sub == plan.n_subframes - 1:
            if self.bound == "upper":
                decoded = self._test_identities(np.arange(self.universe))
                self._apply_decisions(decoded, now)
            # Everyone still enrolled missed detection; unsigned contenders
            # time out too. Both learn at frame end and retry via backoff.
            ref = max(0, now - self.ack_delay)
            for u in sorted(self.enrolled):
                report.failures.append((self.enrolled[u], ref))
                self._release_identity(u)
                self._in_flight -= 1
            self.enrolled = {}
            for dev in self.unsigned:
                report.failures.append((dev, ref))
                self._in_flight -= 1
            self.unsigned = []
        return report

    def _apply_decisions(self, decoded: np.ndarray, now: int) -> None:
        for u in decoded:
            u = int(u)
            dev = self.enrolled.pop(u, None)
            # Real contender: grant; never-transmitted identity: ghost grant.
            self.grant_queue.append((now + 1, dev))
            if dev is not None:
                self._release_identity(u)
