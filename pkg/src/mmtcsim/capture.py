"""Reception models: collision resolution, preamble detection, decode tables.

Three capture models cover the schemes' physical-layer abstractions:

* ``sud`` - single-user detection, a packet survives only if it is alone on
  its resource.
* ``mud`` - idealized multi-user detection of order K: all packets on a
  resource are decoded when at most K are superimposed and they used
  pairwise distinct preambles; otherwise all are lost.
* ``table`` - per-packet success probability looked up from an
  :class:`SnrDecodeTable` keyed on (SNR, collider count).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class SnrDecodeTable:
    """Decode probability as a function of SNR and collider count.

    Probabilities must be non-increasing in the collider count at fixed SNR;
    collider counts beyond the table decode with probability zero.
    """

    def __init__(self, name: str, probs: dict):
        self.name = name
        self._probs = {}
        by_snr = {}
        for (snr, n), p in probs.items():
            if n < 1:
                raise ValueError(f"{name}: collider count must be >= 1, got {n}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}: p_decode {p} outside [0, 1]")
            self._probs[(float(snr), int(n))] = float(p)
            by_snr.setdefault(float(snr), []).append((int(n), float(p)))
        if not self._probs:
            raise ValueError(f"{name}: empty decode table")
        for snr, pairs in by_snr.items():
            pairs.sort()
            for (n1, p1), (n2, p2) in zip(pairs, pairs[1:]):
                if p2 > p1 + 1e-12:
                    raise ValueError(
                        f"{name}: p_decode increases from {p1} to {p2} between "
                        f"{n1} and {n2} colliders at {snr} dB")
        self.snrs = sorted(by_snr)
        self._max_n = {snr: max(n for n, _ in pairs) for snr, pairs in by_snr.items()}

    def p_decode(self, snr_db: float, n_colliders: int) -> float:
        snr = float(snr_db)
        if snr not in self._max_n:
            raise KeyError(
                f"{self.name}: no entries at {snr_db} dB (have {self.snrs})")
        if n_colliders < 1 or n_colliders > self._max_n[snr]:
            return 0.0
        return self._probs[(snr, int(n_colliders))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["snr_db", "n_colliders", "p_decode"])
            for (snr, n) in sorted(self._probs):
                writer.writerow([f"{snr:g}", n, f"{self._probs[(snr, n)]:.6g}"])

    @classmethod
    def from_csv(cls, path, name: Optional[str] = None) -> "SnrDecodeTable":
        probs = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"snr_db", "n_colliders", "p_decode"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise ValueError(
                    f"decode table {path} must have columns {sorted(required)}")
            for row in reader:
                probs[(float(row["snr_db"]), int(row["n_colliders"]))] = float(
                    row["p_decode"])
        return cls(name or str(path), probs)


def builtin_decode_table(name: str) -> SnrDecodeTable:
    """Load a decode table shipped inside the package by bare name."""
    from importlib import resources
    ref = resources.files("mmtcsim").joinpath("presets", "tables",
                                              f"{name}.csv")
    with resources.as_file(ref) as path:
        return SnrDecodeTable.from_csv(path, name=name)


def resolve_decode_table(spec) -> SnrDecodeTable:
    """Accept a table instance, a CSV file path, or a builtin table name."""
    if isinstance(spec, SnrDecodeTable):
        return spec
    spec = str(spec)
    if os.path.exists(spec):
        return SnrDecodeTable.from_csv(spec)
    return builtin_decode_table(spec)


@dataclass(frozen=True)
class CaptureModel:
    """Resolution rule applied to the packets superimposed on one resource."""

    kind: str  # "sud" | "mud" | "table"
    mud_order: int = 1
    table: Optional[SnrDecodeTable] = None
    snr_db: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("sud", "mud", "table"):
            raise ValueError(f"unknown capture kind '{self.kind}'")
        if self.kind == "mud" and self.mud_order < 1:
            raise ValueError("mud order must be >= 1")
        if self.kind == "table" and (self.table is None or self.snr_db is None):
            raise ValueError("table capture needs a decode table and an SNR")

    @classmethod
    def sud(cls) -> "CaptureModel":
        return cls("sud")

    @classmethod
    def mud(cls, order: int = 2) -> "CaptureModel":
        return cls("mud", mud_order=order)

    @classmethod
    def from_table(cls, table: SnrDecodeTable, snr_db: float) -> "CaptureModel":
        return cls("table", table=table, snr_db=snr_db)


def resolve_data_resource(preambles: Sequence, model: CaptureModel,
                          rng: Optional[np.random.Generator] = None) -> list:
    """Indices of the decoded packets among those sharing one data resource.

    ``preambles`` lists the preamble identity each packet arrived with; use
    None for schemes without preambles (treated as indistinguishable, so
    multi-user detection cannot separate them).
    """
    n = len(preambles)
    if n == 0:
        return []
    if model.kind == "sud":
        return [0] if n == 1 else []
    if model.kind == "mud":
        if n > model.mud_order:
            return []
        if n > 1 and (any(p is None for p in preambles)
                      or len(set(preambles)) < n):
            return []
        return list(range(n))
    p = model.table.p_decode(model.snr_db, n)
    if p <= 0.0:
        return []
    draws = rng.random(n)
    return [i for i in range(n) if draws[i] < p]


@dataclass(frozen=True)
class DetectionModel:
    """Per-preamble activity detection with miss and false-alarm rates."""

    p_d: float = 0.99
    p_f: float = 1e-3

    def __post_init__(self):
        if not (0.0 <= self.p_d <= 1.0 and 0.0 <= self.p_f <= 1.0):
            raise ValueError("detection probabilities must lie in [0, 1]")

    @classmethod
    def perfect(cls) -> "DetectionModel":
        return cls(p_d=1.0, p_f=0.0)


def detect_preamble(activated: bool, model: DetectionModel,
                    rng: np.random.Generator) -> bool:
    """Whether the receiver declares one preamble position active."""
    p = model.p_d if activated else model.p_f
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    return bool(rng.random() < p)


def detect_bitmap(activated: np.ndarray, model: DetectionModel,
                  rng: np.random.Generator) -> np.ndarray:
    """Vectorized detection over a boolean activation bitmap."""
    activated = np.asarray(activated, dtype=bool)
    draws = rng.random(activated.shape)
    return np.where(activated, draws < model.p_d, draws < model.p_f)
