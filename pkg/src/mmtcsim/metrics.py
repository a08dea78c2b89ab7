"""KPI reduction over simulation traces.

Every sweep point reports the same two KPIs side by side: protocol
throughput (served devices per TTI) and access latency (arrival at the
device to successful reception, in TTIs and in ms with the mean waiting
offset folded in). Reporting latency without the throughput that produced
it is misleading, so `KpiReport` always carries both; when a point has no
successes the latency summary is empty rather than an error.

Confidence intervals use batch means: the pooled series is cut into at
least 20 consecutive batches and the spread of the batch averages gives
the half-width, so widths shrink roughly with the square root of the
sample count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

MIN_BATCHES = 20

# Column order is the on-disk contract; downstream tooling keys on it.
CSV_COLUMNS = [
    "scheme", "lambda", "seed_count",
    "throughput_mean", "throughput_ci",
    "latency_mean_ms", "latency_p50_ms", "latency_p95_ms", "latency_ci",
    "drop_rate", "pending",
]


def compute_throughput(trace) -> float:
    """Served devices per TTI over the whole run."""
    if trace.n_ttis <= 0:
        raise ValueError("cannot compute throughput of an empty trace")
    return trace.n_successes / trace.n_ttis


@dataclass
class LatencySummary:
    """Distribution summary of per-success access latency.

    `count == 0` marks the empty summary (all statistics NaN); dropped and
    still-pending devices contribute nothing.
    """

    count: int
    mean_ttis: float
    p50_ttis: float
    p95_ttis: float
    mean_ms: float
    p50_ms: float
    p95_ms: float


def compute_latency(trace) -> LatencySummary:
    ttis = np.asarray(trace.latency_samples_ttis, dtype=float)
    if ttis.size == 0:
        nan = float("nan")
        return LatencySummary(0, nan, nan, nan, nan, nan, nan)
    ms = trace.latencies_ms()
    return LatencySummary(
        count=int(ttis.size),
        mean_ttis=float(ttis.mean()),
        p50_ttis=float(np.percentile(ttis, 50)),
        p95_ttis=float(np.percentile(ttis, 95)),
        mean_ms=float(ms.mean()),
        p50_ms=float(np.percentile(ms, 50)),
        p95_ms=float(np.percentile(ms, 95)),
    )


def batch_means_half_width(samples, min_batches: int = MIN_BATCHES) -> float:
    """95% CI half-width of the mean via consecutive batch means.

    Fewer samples than batches degrades to one sample per batch; under two
    samples there is no spread to estimate and the width is 0.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        return 0.0
    n_batches = min(min_batches, x.size)
    means = [chunk.mean() for chunk in np.array_split(x, n_batches)]
    spread = float(np.std(means, ddof=1))
    return 1.96 * spread / math.sqrt(n_batches)


@dataclass
class KpiReport:
    """One sweep point: both KPIs with CIs, ready for CSV serialization."""

    scheme: str
    lam: float
    seed_count: int
    throughput_mean: float
    throughput_ci: float
    latency_mean_ms: float
    latency_p50_ms: float
    latency_p95_ms: float
    latency_ci: float
    drop_rate: float
    pending: int

    @classmethod
    def from_traces(cls, scheme: str, lam: float, traces) -> "KpiReport":
        """Reduce one or more same-parameter runs (one per seed)."""
        traces = list(traces)
        if not traces:
            raise ValueError("need at least one trace per sweep point")
        per_tti = np.concatenate([np.asarray(t.successes, dtype=float)
                                  for t in traces])
        latencies = np.concatenate([t.latencies_ms() for t in traces])
        n_arrivals = sum(t.n_arrivals for t in traces)
        n_drops = sum(t.n_drops for t in traces)
        nan = float("nan")
        if latencies.size:
            lat_mean = float(latencies.mean())
            lat_p50 = float(np.percentile(latencies, 50))
            lat_p95 = float(np.percentile(latencies, 95))
        else:
            lat_mean = lat_p50 = lat_p95 = nan
        return cls(
            scheme=scheme,
            lam=float(lam),
            seed_count=len(traces),
            throughput_mean=float(per_tti.mean()),
            throughput_ci=batch_means_half_width(per_tti),
            latency_mean_ms=lat_mean,
            latency_p50_ms=lat_p50,
            latency_p95_ms=lat_p95,
            latency_ci=batch_means_half_width(latencies),
            drop_rate=(n_drops / n_arrivals) if n_arrivals else 0.0,
            pending=sum(t.n_pending for t in traces),
        )

    def csv_row(self) -> list:
        def fmt(v: float) -> str:
            return "nan" if math.isnan(v) else f"{v:.6g}"
        return [
            self.scheme, f"{self.lam:g}", str(self.seed_count),
            fmt(self.throughput_mean), fmt(self.throughput_ci),
            fmt(self.latency_mean_ms), fmt(self.latency_p50_ms),
            fmt(self.latency_p95_ms), fmt(self.latency_ci),
            fmt(self.drop_rate), str(self.pending),
        ]


def write_reports_csv(path, reports) -> None:
    """Serialize sweep points; rows keep the caller's order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())
