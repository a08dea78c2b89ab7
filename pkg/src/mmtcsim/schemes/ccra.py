"""Coded random access with compressed-sensing activity detection.

Contenders pick a preamble from a fixed pool; the preamble addresses both a
pilot block on a common overloaded control channel and a fixed pattern of
at most three replica slots inside the TTI-wide contention frame (one slot
per data PRB). The receiver first recovers the active pilot blocks from the
control channel (block-sparse recovery by default), then runs peeling
interference cancellation over the replica patterns of the users it can
see: a slot holding exactly one uncancelled replica yields its owner, whose
other replicas are cancelled everywhere, until nothing new decodes. Users
missed on the control channel stay invisible; their replicas block slots
without ever being cancellable, as do the replicas of two contenders that
drew the same preamble.

Throughput studies run in fresh-arrival mode (losses leave); the latency
variant routes losses through the shared backoff chain.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..core import ArqConfig, Scheme, SchemeReport, substream
from ..sparse import (
    BlockSparsityPattern,
    CcraControlConfig,
    detected_blocks,
    generate_control_problem,
    hihtp_solve,
)
from .common import take_params


def peel_frame(replica_slots, visible) -> list:
    """Fixpoint of peeling cancellation; confluent in processing order.

    replica_slots: per-user iterables of slot indices.
    visible: per-user flags; invisible users' replicas occupy slots but can
    never be decoded or cancelled.
    """
    n = len(replica_slots)
    occupancy: defaultdict = defaultdict(int)
    for slots in replica_slots:
        for s in slots:
            occupancy[s] += 1
    resolved = []
    done = [False] * n
    progress = True
    while progress:
        progress = False
        for u in range(n):
            if done[u] or not visible[u]:
                continue
            if any(occupancy[s] == 1 for s in replica_slots[u]):
                resolved.append(u)
                done[u] = True
                for s in replica_slots[u]:
                    occupancy[s] -= 1
                progress = True
    return resolved


class CcraScheme(Scheme):
    name = "ccra"
    DEFAULTS = {
        "slots_per_frame": 50,
        "frames_per_tti": 1,
        "replica_cap": 3,
        "pool_size": 256,          # preambles = control pilot blocks
        "control": "hihtp",        # "hihtp" | "perfect" | "bernoulli"
        "control_p": 0.95,         # detection probability for "bernoulli"
        "control_snr_db": 15.0,
        "control_rows": 128,
        "control_block_len": 2,
        "control_k_blocks": 0,     # 0: estimate activity from the data
        "energy_threshold": 0.1,
        "mode": "fresh",           # throughput protocol; "arq" for latency
    }

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.mode = p["mode"]
        if self.mode not in ("fresh", "arq"):
            raise ValueError("mode must be 'fresh' or 'arq'")
        self.slots = int(p["slots_per_frame"])
        self.frames_per_tti = int(p["frames_per_tti"])
        self.replica_cap = int(p["replica_cap"])
        self.pool = int(p["pool_size"])
        if min(self.slots, self.frames_per_tti, self.pool) < 1:
            raise ValueError("frame geometry must be positive")
        if not 1 <= self.replica_cap <= self.slots:
            raise ValueError("replica cap must fit inside the frame")
        self.control = p["control"]
        if self.control not in ("hihtp", "perfect", "bernoulli"):
            raise ValueError("control must be hihtp, perfect, or bernoulli")
        self.control_p = float(p["control_p"])
        self.energy_threshold = float(p["energy_threshold"])
        self.control_k = int(p["control_k_blocks"])
        self.control_cfg = CcraControlConfig(
            n_blocks=self.pool,
            block_len=int(p["control_block_len"]),
            n_rows=int(p["control_rows"]),
            k_blocks=max(1, min(self.control_k, self.pool)),
            k_per_block=1,
        )
        self.control_sigma = 10.0 ** (-float(p["control_snr_db"]) / 20.0)
        # The preamble -> replica-pattern map is fixed per scenario seed.
        table_rng = substream(seed, "ccra-patterns")
        self.patterns = [
            tuple(int(s) for s in table_rng.choice(
                self.slots, size=self.replica_cap, replace=False))
            for _ in range(self.pool)
        ]

    # -- control channel ---------------------------------------------------
    def _sparsity_target(self, a: np.ndarray, y: np.ndarray) -> int:
        """Assumed active-block count for the recovery, from the data.

        Matched-filter block energies sit near a common noise floor for
        silent blocks; counting clear outliers and padding generously is
        enough, since overestimating the sparsity only admits ghosts that
        the energy filter removes later.
        """
        if self.control_k > 0:
            return min(self.control_k, self.pool)
        cfg = self.control_cfg
        mf = np.abs(a.conj().T @ y).reshape(cfg.n_blocks, cfg.block_len)
        norms = np.linalg.norm(mf, axis=1)
        floor = float(np.median(norms))
        k_hat = int(np.sum(norms > 2.0 * floor))
        return int(np.clip(2 * k_hat + 4, 4, self.pool // 2))

    def detect(self, present, rng: np.random.Generator) -> set:
        """Subset of the present preambles the control channel recovers."""
        present = sorted(present)
        if not present:
            return set()
        if self.control == "perfect":
            return set(present)
        if self.control == "bernoulli":
            draws = rng.random(len(present))
            return {p for p, d in zip(present, draws) if d < self.control_p}
        cfg = self.control_cfg
        a, y, _, _ = generate_control_problem(
            cfg, rng, sigma=self.control_sigma,
            active_blocks=np.asarray(present, dtype=np.int64))
        pattern = BlockSparsityPattern(cfg.n_blocks, cfg.block_len,
                                       self._sparsity_target(a, y),
                                       cfg.k_per_block)
        res = hihtp_solve(a, y, pattern)
        blocks = detected_blocks(res.support, cfg)
        x = res.x.reshape(cfg.n_blocks, cfg.block_len)
        energies = np.linalg.norm(x, axis=1)
        detected = {int(b) for b in blocks
                    if energies[b] >= self.energy_threshold}
        # Ghost detections address patterns holding no signal; the decode
        # attempts there find nothing, so only truly present users matter.
        return detected & set(present)

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport(attempts=len(new_attempters))
        if not new_attempters:
            return report
        n = len(new_attempters)
        frame_pick = rng.integers(0, self.frames_per_tti, size=n)
        preamble_pick = rng.integers(0, self.pool, size=n)
        frames = defaultdict(list)
        for idx, dev in enumerate(new_attempters):
            frames[int(frame_pick[idx])].append((dev, int(preamble_pick[idx])))

        for f in sorted(frames):
            members = frames[f]
            present = {pre for _, pre in members}
            seen = self.detect(present, rng)
            replica_slots = [self.patterns[pre] for _, pre in members]
            visible = [pre in seen for _, pre in members]
            resolved = set(peel_frame(replica_slots, visible))
            for i, (dev, _pre) in enumerate(members):
                if i in resolved:
                    report.successes.append(dev)
                elif self.mode == "fresh":
                    report.drops.append(dev)
                else:
                    report.failures.append((dev, now))
        return report
