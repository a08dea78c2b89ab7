"""Frame slotted ALOHA with network-coded collision recovery.

Each TTI carries several parallel contention frames (50 PRBs = 5 frames of
10 slots). A contender picks one frame, R distinct slots inside it, and a
nonzero precoding coefficient per replica from GF(2^n). Slots are
multiuser-detection slots, not erasure slots: the receiver attacks each
collider individually by cancelling stronger arrivals first, and when at
least two colliders stay undecoded it can still land the field sum of the
leftovers as one extra equation. Both outcomes are abstracted by decode
tables keyed on SNR and collider count. Everything decoded becomes a row
of a linear system over the field; recovery runs singleton peeling first,
then rank analysis of what remains, and every determined contender is
served.

The full joint detector of the underlying receiver is deliberately
abstracted into the decode tables; see the package documentation.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..capture import resolve_decode_table
from ..core import ArqConfig, Scheme, SchemeReport
from ..gf import Field, ff_solve, get_field
from ..resources import FramePlan
from .common import take_params


def resolve_frame(rows: np.ndarray, n_unknowns: int, field: Field) -> list:
    """Indices of contenders recoverable from the decoded rows.

    Stage one peels singleton rows (a row touching one unknown pins it and
    cancels its contribution everywhere). If unknowns remain, stage two
    runs full elimination over the residual system and adds every unknown
    that ends up determined.
    """
    if n_unknowns == 0:
        return []
    rows = np.asarray(rows, dtype=np.int64).reshape(-1, n_unknowns)
    rows = rows.copy()
    known = np.zeros(n_unknowns, dtype=bool)
    progress = True
    while progress:
        progress = False
        for r in range(rows.shape[0]):
            support = np.nonzero(rows[r])[0]
            if support.size == 1 and not known[support[0]]:
                known[support[0]] = True
                rows[:, support[0]] = 0
                progress = True
    live = np.nonzero(~known)[0]
    if live.size and rows.size:
        residual = rows[:, live]
        residual = residual[np.any(residual, axis=1)]
        if residual.size:
            sol = ff_solve(residual, np.zeros(residual.shape[0],
                                              dtype=np.int64), field)
            known[live[sol.determined]] = True
    return [int(i) for i in np.nonzero(known)[0]]


class CraplncScheme(Scheme):
    name = "craplnc"
    DEFAULTS = {
        "slots_per_frame": 10,
        "replicas": 2,
        "frames_per_tti": 5,
        "field_n": 8,          # GF(2^n) precoding alphabet
        "precoding": True,
        "snr_db": 15.0,
        "decode_table": "craplnc-mud",   # individual packets out of a slot
        "sum_table": "craplnc-plnc",     # field sum of the undecoded rest
        "mode": "fresh",       # throughput protocol; "arq" for latency runs
    }

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.plan = FramePlan(slots_per_frame=int(p["slots_per_frame"]),
                              replicas=int(p["replicas"]))
        self.frames_per_tti = int(p["frames_per_tti"])
        if self.frames_per_tti < 1:
            raise ValueError("need at least one frame per TTI")
        self.field = get_field(2, int(p["field_n"]))
        self.precoding = bool(p["precoding"])
        self.snr_db = float(p["snr_db"])
        self.table = resolve_decode_table(p["decode_table"])
        self.sum_table = resolve_decode_table(p["sum_table"])
        self.mode = p["mode"]
        if self.mode not in ("fresh", "arq"):
            raise ValueError("mode must be 'fresh' or 'arq'")

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport()
        if not new_attempters:
            return report
        plan = self.plan
        n = len(new_attempters)
        report.attempts = n
        frame_pick = rng.integers(0, self.frames_per_tti, size=n)
        frames = defaultdict(list)
        for idx, dev in enumerate(new_attempters):
            frames[int(frame_pick[idx])].append(dev)

        for f in sorted(frames):
            members = frames[f]
            k = len(members)
            # Replica placement and precoding coefficients.
            slot_map = defaultdict(list)  # slot -> [(member_idx, coeff)]
            for i in range(k):
                slots = rng.choice(plan.slots_per_frame, size=plan.replicas,
                                   replace=False)
                if self.precoding:
                    coeffs = rng.integers(1, self.field.order,
                                          size=plan.replicas)
                else:
                    coeffs = np.ones(plan.replicas, dtype=np.int64)
                for s, c in zip(slots, coeffs):
                    slot_map[int(s)].append((i, int(c)))
            # Per-slot decode attempts feed the frame's linear system.
            rows = []
            for s in sorted(slot_map):
                colliders = slot_map[s]
                p_ind = self.table.p_decode(self.snr_db, len(colliders))
                undecoded = []
                for i, c in colliders:
                    if rng.random() < p_ind:
                        row = np.zeros(k, dtype=np.int64)
                        row[i] = c
                        rows.append(row)
                    else:
                        undecoded.append((i, c))
                if len(undecoded) >= 2 and rng.random() < \
                        self.sum_table.p_decode(self.snr_db, len(undecoded)):
                    row = np.zeros(k, dtype=np.int64)
                    for i, c in undecoded:
                        row[i] = self.field.add(row[i], c)
                    rows.append(row)
            resolved = set()
            if rows:
                resolved = set(resolve_frame(np.stack(rows), k, self.field))
            for i, dev in enumerate(members):
                if i in resolved:
                    report.successes.append(dev)
                elif self.mode == "fresh":
                    report.drops.append(dev)
                else:
                    report.failures.append((dev, now))
        return report
