#!/usr/bin/env python3
"""Regenerate the decode-probability tables shipped with the package.

The simulator abstracts link-level reception into tables of
P(decode | SNR, collider count). This script derives those numbers from a
stylized physical model so they are reproducible and auditable rather than
hand-tuned:

* Channels are i.i.d. Rayleigh, h ~ CN(0, I_n), per receiver and slot.
* "craplnc-mud" is the per-packet success probability of power-ordered
  successive interference cancellation: packets are decoded strongest
  first, each treating the still-undecoded ones as noise, and decoding
  stops at the first outage. The table entry is the marginal probability
  that a given packet among n colliders gets through. The message rate is
  the short-code operating point of the replica scheme (64 info bits in
  164 coded symbols, about 0.4 bit/s/Hz).
* A receiver decodes a finite-field linear combination a of the n
  colliding unit-power messages when the computation rate

      R(h, a) = log2+ ( 1 / (||a||^2 - P |h^H a|^2 / (1 + P ||h||^2)) )

  reaches the message rate (log2+ is max(log2(.), 0), P the transmit SNR).
  For n = 1 and a = [1] this reduces to the plain outage condition
  log2(1 + P |h|^2) >= rate.
* "craplnc-plnc" asks for the sum combination a = (1, ..., 1) at the same
  0.4 bit/s/Hz: the probability that the field sum of everything left in
  a slot is decodable after SIC has run dry.
* "scf-cf" lets the receiver pick the best combination from a small
  candidate set (unit vectors, the all-ones vector, quantized-MMSE
  scalings round(alpha * h)) at 1 bit/s/Hz. Any of them yields one usable
  equation row.

All tables are forced non-increasing in the collider count (physics says
so; Monte Carlo noise should not be allowed to say otherwise).

Run from the repository root:

    python3 tools/calibrate_decode_tables.py

The CSVs land in src/mmtcsim/presets/tables/ and are committed; the
simulator never calls this script at run time.
"""

from __future__ import annotations

import argparse
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from mmtcsim.capture import SnrDecodeTable  # noqa: E402

TABLES_DIR = (pathlib.Path(__file__).resolve().parent.parent
              / "src" / "mmtcsim" / "presets" / "tables")


def computation_rate(h: np.ndarray, a: np.ndarray, power: float) -> float:
    """Nazer-Gastpar computation rate for combination a at transmit SNR P."""
    norm_a = float(np.vdot(a, a).real)
    if norm_a == 0.0:
        return 0.0
    cross = abs(np.vdot(h, a)) ** 2
    denom = norm_a - power * cross / (1.0 + power * float(np.vdot(h, h).real))
    if denom <= 0.0:
        return float("inf")
    return max(0.0, -np.log2(denom))


def best_rate_sum(h: np.ndarray, power: float) -> float:
    return computation_rate(h, np.ones(len(h)), power)


def best_rate_search(h: np.ndarray, power: float) -> float:
    """Best rate over unit vectors, all-ones, and quantized-MMSE scalings."""
    n = len(h)
    best = best_rate_sum(h, power)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        best = max(best, computation_rate(h, e, power))
    for alpha in (0.5, 1.0, 1.5, 2.0):
        a = np.round(alpha * h.real) + 1j * np.round(alpha * h.imag)
        if np.any(a):
            best = max(best, computation_rate(h, a, power))
    return best


def sic_decoded_count(gains: np.ndarray, rate: float) -> int:
    """Packets recovered by strongest-first SIC before the first outage."""
    order = np.sort(gains)[::-1]
    decoded = 0
    remaining = float(order.sum())
    for g in order:
        remaining -= g
        if np.log2(1.0 + g / (1.0 + remaining)) < rate:
            break
        decoded += 1
    return decoded


def decode_probability(snr_db: float, n: int, rate: float, trials: int,
                       rng: np.random.Generator, mode: str) -> float:
    power = 10.0 ** (snr_db / 10.0)
    hits = 0
    for _ in range(trials):
        h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
        if mode == "sic":
            hits += sic_decoded_count(power * np.abs(h) ** 2, rate)
        elif mode == "sum":
            hits += best_rate_sum(h, power) >= rate
        else:
            hits += best_rate_search(h, power) >= rate
    if mode == "sic":
        return hits / (trials * n)
    return hits / trials


def build_table(name: str, snrs, max_n: int, rate: float, trials: int,
                seed: int, mode: str) -> SnrDecodeTable:
    rng = np.random.default_rng(seed)
    probs = {}
    for snr in snrs:
        running = 1.0
        for n in range(1, max_n + 1):
            p = decode_probability(snr, n, rate, trials, rng, mode)
            running = min(running, p)  # enforce monotone in collider count
            probs[(float(snr), n)] = round(running, 4)
    return SnrDecodeTable(name, probs)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=20240915)
    ap.add_argument("--out", type=pathlib.Path, default=TABLES_DIR)
    args = ap.parse_args(argv)

    args.out.mkdir(parents=True, exist_ok=True)
    jobs = [
        # name, snr grid, max colliders, message rate, slot decoder model
        ("craplnc-mud", (5.0, 10.0, 15.0, 20.0), 10, 0.4, "sic"),
        ("craplnc-plnc", (5.0, 10.0, 15.0, 20.0), 10, 0.4, "sum"),
        ("scf-cf", (5.0, 10.0, 15.0, 20.0, 25.0, 30.0), 9, 1.0, "search"),
    ]
    for name, snrs, max_n, rate, mode in jobs:
        table = build_table(name, snrs, max_n, rate, args.trials,
                            args.seed, mode)
        path = args.out / f"{name}.csv"
        table.to_csv(path)
        print(f"wrote {path}")
        for snr in snrs:
            row = [f"{table.p_decode(snr, n):.3f}" for n in range(1, max_n + 1)]
            print(f"  {snr:5.1f} dB: {' '.join(row)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
