"""Collaborative short-packet access via finite-field equation collection.

Devices repeat their transmission over four frequency slots of one resource
block (12 blocks x 4 slots = 48 PRBs). A bank of mini base stations listens;
each (mini-BS, slot) pair decodes one linear equation over GF(p) in the
colliding devices' messages with a probability read from the decode table.
Every device contributes two field unknowns (the real/imaginary message
split), so a block with n colliders is resolved exactly when the stacked
coefficient matrix reaches rank 2n; then all n devices are served, otherwise
none are. Blocks drawing more than the collider cap are never resolvable.

Throughput studies run in fresh-arrival mode (losses leave); the latency
variant routes losses through the shared backoff chain.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..capture import resolve_decode_table
from ..core import ArqConfig, Scheme, SchemeReport
from ..gf import Field, ff_rank, ff_solve, get_field
from .common import take_params


def collect_block_equations(n_devices: int, n_mini_bs: int, n_slots: int,
                            p_decode: float, field: Field,
                            rng: np.random.Generator) -> np.ndarray:
    """Decoded equation rows for one collision block.

    Each of the n_mini_bs * n_slots receiver/slot pairs yields, with
    probability p_decode, one row of nonzero GF(p) coefficients over the
    2 * n_devices message unknowns.
    """
    n_unknowns = 2 * n_devices
    rows = []
    for _ in range(n_mini_bs * n_slots):
        if rng.random() < p_decode:
            rows.append(rng.integers(1, field.order, size=n_unknowns))
    if not rows:
        return np.zeros((0, n_unknowns), dtype=np.int64)
    return np.stack(rows).astype(np.int64)


def block_resolvable(equations: np.ndarray, n_devices: int,
                     field: Field) -> bool:
    """True iff the equations pin every message: rank equals 2 * n_devices.

    Cross-checked against full elimination every call (rank criterion and
    per-unknown determination must agree).
    """
    n_unknowns = 2 * n_devices
    if equations.shape[0] < n_unknowns:
        full_rank = False
    else:
        full_rank = ff_rank(equations, field) == n_unknowns
    if equations.shape[0]:
        sol = ff_solve(equations,
                       np.zeros(equations.shape[0], dtype=np.int64), field)
        determined_all = bool(sol.determined.all())
    else:
        determined_all = n_unknowns == 0
    assert full_rank == determined_all, \
        "rank criterion disagrees with elimination"
    return full_rank


class ScfScheme(Scheme):
    name = "scf"
    DEFAULTS = {
        "blocks": 12,
        "freq_slots": 4,
        "mini_bs": 8,
        "max_colliders": 9,
        "field_p": 257,
        "snr_db": 20.0,
        "decode_table": "scf-cf",
        "mode": "fresh",
    }

    def __init__(self, params: dict, arq: ArqConfig, seed: int):
        p = take_params(params, self.DEFAULTS, self.name)
        self.blocks = int(p["blocks"])
        self.freq_slots = int(p["freq_slots"])
        self.mini_bs = int(p["mini_bs"])
        self.max_colliders = int(p["max_colliders"])
        if min(self.blocks, self.freq_slots, self.mini_bs,
               self.max_colliders) < 1:
            raise ValueError("topology dimensions must be positive")
        self.field = get_field(int(p["field_p"]), 1)
        self.snr_db = float(p["snr_db"])
        self.table = resolve_decode_table(p["decode_table"])
        self.mode = p["mode"]
        if self.mode not in ("fresh", "arq"):
            raise ValueError("mode must be 'fresh' or 'arq'")

    def _lose(self, report: SchemeReport, dev, now: int) -> None:
        if self.mode == "fresh":
            report.drops.append(dev)
        else:
            report.failures.append((dev, now))

    def on_tti(self, now: int, new_attempters: list,
               rng: np.random.Generator) -> SchemeReport:
        report = SchemeReport(attempts=len(new_attempters))
        if not new_attempters:
            return report
        picks = rng.integers(0, self.blocks, size=len(new_attempters))
        blocks = defaultdict(list)
        for dev, b in zip(new_attempters, picks):
            blocks[int(b)].append(dev)
        for b in sorted(blocks):
            members = blocks[b]
            n = len(members)
            if n > self.max_colliders:
                for dev in members:
                    self._lose(report, dev, now)
                continue
            p_decode = self.table.p_decode(self.snr_db, n)
            eqs = collect_block_equations(n, self.mini_bs, self.freq_slots,
                                          p_decode, self.field, rng)
            if block_resolvable(eqs, n, self.field):
                report.successes.extend(members)
            else:
                for dev in members:
                    self._lose(report, dev, now)
        return report
