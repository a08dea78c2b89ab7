"""Sparse multi-user activity detection kernels.

Two solver families live here:

* Greedy group orthogonal pursuit (``gomp_solve``) for CDMA-style activity
  detection: pick the group whose columns correlate best with the residual,
  re-fit by least squares over everything selected, stop on a residual
  threshold or a selection budget. When the budget is the sole driver the
  solver keeps selecting past the point where the restricted fit turns
  exact, falling back to matched-filter ranking; detection errors then peak
  when about half the users are active, where the greedy choice has the
  most ways to go wrong, and fall off toward either extreme.
* Hierarchical hard thresholding pursuit (``hihtp_solve``) for block-column
  sparse channel vectors: gradient step, (k_blocks, k_per_block) structured
  thresholding, restricted least squares, stop when the support reaches a
  fixpoint. ``htp_solve`` is the unstructured baseline at equal total
  sparsity, kept separate so the two routes can be compared.

Floating-point linear algebra is numpy's; the pursuit logic, the structured
thresholding operator, and the problem generators are local.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


# ---------------------------------------------------------------------------
# Problem generation: spread-spectrum activity detection


@dataclass(frozen=True)
class SpreadingConfig:
    """Dimensions of the spread random access uplink."""

    n_chips: int = 32      # spreading sequence length (observations)
    n_users: int = 64      # potentially active users (groups)
    channel_taps: int = 1  # channel impulse response length per user

    def __post_init__(self):
        if min(self.n_chips, self.n_users, self.channel_taps) < 1:
            raise ValueError("spreading dimensions must be positive")

    @property
    def n_cols(self) -> int:
        return self.n_users * self.channel_taps


def pn_spreading_matrix(cfg: SpreadingConfig, rng: np.random.Generator) -> np.ndarray:
    """Complex Bernoulli PN spreading matrix with unit-norm columns.

    Chips are (+-1 +-j) / sqrt(2 * n_chips). For multi-tap channels each
    user's group holds cyclic shifts of its sequence, one column per tap.
    """
    chips = (rng.integers(0, 2, size=(cfg.n_chips, cfg.n_users)) * 2 - 1
             + 1j * (rng.integers(0, 2, size=(cfg.n_chips, cfg.n_users)) * 2 - 1))
    chips = chips / math.sqrt(2 * cfg.n_chips)
    if cfg.channel_taps == 1:
        return chips
    cols = []
    for u in range(cfg.n_users):
        for tap in range(cfg.channel_taps):
            cols.append(np.roll(chips[:, u], tap))
    return np.stack(cols, axis=1)


@dataclass
class SparseProblem:
    """One activity-detection instance y = S h + n."""

    s: np.ndarray
    y: np.ndarray
    h_true: np.ndarray
    active_groups: np.ndarray
    sigma: float
    cfg: SpreadingConfig


def sigma_for_snr(snr_db: float, n_chips: int) -> float:
    """Noise std giving a single active unit-power user the requested SNR."""
    return math.sqrt(10.0 ** (-snr_db / 10.0) / n_chips)


def generate_problem(cfg: SpreadingConfig, n_active: int,
                     rng: np.random.Generator,
                     sigma: float = 0.0,
                     snr_db: Optional[float] = None) -> SparseProblem:
    """Draw spreading matrix, Rayleigh taps for a random active set, and noise."""
    if not 0 <= n_active <= cfg.n_users:
        raise ValueError(f"n_active {n_active} outside 0..{cfg.n_users}")
    if snr_db is not None:
        sigma = sigma_for_snr(snr_db, cfg.n_chips)
    s = pn_spreading_matrix(cfg, rng)
    active = np.sort(rng.choice(cfg.n_users, size=n_active, replace=False))
    h = np.zeros(cfg.n_cols, dtype=complex)
    for u in active:
        taps = (rng.standard_normal(cfg.channel_taps)
                + 1j * rng.standard_normal(cfg.channel_taps)) / math.sqrt(2)
        h[u * cfg.channel_taps:(u + 1) * cfg.channel_taps] = taps
    y = s @ h
    if sigma > 0:
        y = y + sigma * (rng.standard_normal(cfg.n_chips)
                         + 1j * rng.standard_normal(cfg.n_chips)) / math.sqrt(2)
    return SparseProblem(s, y, h, active, sigma, cfg)


def default_epsilon(sigma: float, m: int, y_norm: float) -> float:
    """Residual stopping threshold sigma*sqrt(m + 2 sqrt(m)), floored for
    noiseless data so exact fits still terminate."""
    eps = sigma * math.sqrt(m + 2.0 * math.sqrt(m))
    return max(eps, 1e-9 * y_norm)


# ---------------------------------------------------------------------------
# Greedy group pursuit


@dataclass
class GompResult:
    h: np.ndarray
    active_groups: list
    selection_order: list
    n_iterations: int
    converged: bool
    residual_norm: float
    rank_deficient: bool = False


def gomp_solve(s: np.ndarray, y: np.ndarray, group_size: int = 1,
               sigma: float = 0.0, epsilon: Optional[float] = None,
               max_groups: Optional[int] = None) -> GompResult:
    """Group orthogonal matching pursuit.

    Termination is residual-driven by default: stop once the residual 2-norm
    drops below ``epsilon`` (noise-scaled default) or the selection budget is
    exhausted, whichever comes first. Passing ``epsilon=0.0`` switches to
    sparsity-driven mode: exactly ``max_groups`` groups are selected, ranked
    by residual correlation while the restricted fit is inexact and by plain
    matched-filter correlation with the observation once it is exact (past
    that point the residual carries no information). Selections beyond
    m // group_size make the re-fit minimum-norm; the result is then flagged
    rank deficient.

    Parameters
    ----------
    s : (m, n_groups * group_size) sensing matrix.
    y : (m,) observation.
    group_size : columns per group (channel taps per user).
    sigma : noise std used for the default threshold when epsilon is None.
    epsilon : explicit residual 2-norm stopping threshold; 0.0 disables the
        residual rule and makes max_groups the sole driver.
    max_groups : selection budget; defaults to min(n_groups, m // group_size),
        where the restricted least squares turns square and fits exactly.

    Returns the estimated coefficient vector, the selected groups (sorted and
    in selection order), and whether the stopping rule was met.
    """
    s = np.asarray(s)
    y = np.asarray(y, dtype=complex)
    m, n_cols = s.shape
    if n_cols % group_size != 0:
        raise ValueError("column count is not a multiple of the group size")
    n_groups = n_cols // group_size
    if max_groups is None:
        max_groups = min(n_groups, m // group_size)
    max_groups = min(max_groups, n_groups)
    y_norm = float(np.linalg.norm(y))
    sparsity_driven = epsilon is not None and epsilon <= 0.0
    if epsilon is None:
        epsilon = default_epsilon(sigma, m, y_norm)
    exhausted = 1e-9 * y_norm  # below this the residual is numerical noise

    mf_scores = np.linalg.norm((s.conj().T @ y).reshape(n_groups, group_size),
                               axis=1)
    residual = y.copy()
    selected: list = []
    selected_mask = np.zeros(n_groups, dtype=bool)
    cols = np.array([], dtype=int)
    coef = np.zeros(0, dtype=complex)
    rank_deficient = False
    it = 0
    res_norm = y_norm
    while len(selected) < max_groups and (sparsity_driven or res_norm > epsilon):
        if res_norm <= exhausted:
            scores = mf_scores.copy()
        else:
            corr = s.conj().T @ residual
            scores = np.linalg.norm(corr.reshape(n_groups, group_size), axis=1)
        scores[selected_mask] = -1.0
        g = int(np.argmax(scores))
        selected.append(g)
        selected_mask[g] = True
        cols = np.concatenate([np.arange(gg * group_size, (gg + 1) * group_size)
                               for gg in selected])
        coef, _, rank, _ = np.linalg.lstsq(s[:, cols], y, rcond=None)
        rank_deficient = rank_deficient or rank < cols.size
        residual = y - s[:, cols] @ coef
        res_norm = float(np.linalg.norm(residual))
        it += 1
    h = np.zeros(n_cols, dtype=complex)
    if selected:
        h[cols] = coef
    converged = (res_norm <= epsilon
                 or (sparsity_driven and len(selected) >= max_groups))
    return GompResult(h, sorted(selected), list(selected), it,
                      converged, res_norm, rank_deficient)


def detection_errors(estimated_groups, true_groups, n_users: int) -> float:
    """Per-user activity error rate: misses plus false alarms over the pool."""
    est = set(int(g) for g in estimated_groups)
    true = set(int(g) for g in true_groups)
    return len(est.symmetric_difference(true)) / n_users


# ---------------------------------------------------------------------------
# Hierarchical thresholding


@dataclass(frozen=True)
class BlockSparsityPattern:
    """(k_blocks, k_per_block) sparsity over n_blocks blocks of block_len."""

    n_blocks: int
    block_len: int
    k_blocks: int
    k_per_block: int

    def __post_init__(self):
        if min(self.n_blocks, self.block_len) < 1:
            raise ValueError("pattern dimensions must be positive")
        if not 1 <= self.k_blocks <= self.n_blocks:
            raise ValueError("k_blocks outside 1..n_blocks")
        if not 1 <= self.k_per_block <= self.block_len:
            raise ValueError("k_per_block outside 1..block_len")

    @property
    def n_total(self) -> int:
        return self.n_blocks * self.block_len

    @property
    def total_sparsity(self) -> int:
        return self.k_blocks * self.k_per_block


def block_column_threshold(v: np.ndarray, pattern: BlockSparsityPattern) -> np.ndarray:
    """Boolean support mask of the structured thresholding operator.

    Within each block keep the k_per_block largest-magnitude entries, then
    keep the k_blocks blocks with the largest norm over those survivors.
    Ties resolve to the lowest index (stable), so an all-zero input selects
    the first entries of the first blocks.
    """
    v = np.asarray(v).reshape(pattern.n_blocks, pattern.block_len)
    mags = np.abs(v)
    order = np.argsort(-mags, axis=1, kind="stable")[:, :pattern.k_per_block]
    kept = np.zeros_like(mags, dtype=bool)
    np.put_along_axis(kept, order, True, axis=1)
    block_norms = np.sqrt(np.sum(np.where(kept, mags, 0.0) ** 2, axis=1))
    top_blocks = np.argsort(-block_norms, kind="stable")[:pattern.k_blocks]
    mask = np.zeros_like(mags, dtype=bool)
    mask[top_blocks] = kept[top_blocks]
    return mask.reshape(-1)


@dataclass
class HihtpResult:
    x: np.ndarray
    support: np.ndarray
    n_iterations: int
    converged: bool
    rank_deficient: bool


def _restricted_lstsq(a, y, support):
    cols = np.nonzero(support)[0]
    coef, _, rank, _ = np.linalg.lstsq(a[:, cols], y, rcond=None)
    x = np.zeros(a.shape[1], dtype=complex)
    x[cols] = coef
    return x, rank < cols.size


def hihtp_solve(a: np.ndarray, y: np.ndarray, pattern: BlockSparsityPattern,
                max_iters: int = 50, step: float = 1.0,
                backtrack: bool = True) -> HihtpResult:
    """Hard thresholding pursuit with block-column structured support.

    Unit gradient step by default; when backtracking is on, the step halves
    (up to three times per iteration) if the refit residual grows. Stops at a
    support fixpoint, flagging rank-deficient restricted systems.
    """
    a = np.asarray(a)
    y = np.asarray(y, dtype=complex)
    if a.shape[1] != pattern.n_total:
        raise ValueError("matrix width does not match the sparsity pattern")
    x = np.zeros(a.shape[1], dtype=complex)
    support = np.zeros(a.shape[1], dtype=bool)
    rank_deficient = False
    res_norm = float(np.linalg.norm(y))
    for it in range(1, max_iters + 1):
        residual = y - a @ x
        cur_step = step
        for _ in range(4):
            g = x + cur_step * (a.conj().T @ residual)
            new_support = block_column_threshold(g, pattern)
            x_new, deficient = _restricted_lstsq(a, y, new_support)
            new_res = float(np.linalg.norm(y - a @ x_new))
            if not backtrack or new_res <= res_norm + 1e-12:
                break
            cur_step /= 2.0
        if np.array_equal(new_support, support):
            return HihtpResult(x, support, it, True, rank_deficient)
        x, support, res_norm = x_new, new_support, new_res
        rank_deficient = rank_deficient or deficient
    return HihtpResult(x, support, max_iters, False, rank_deficient)


def htp_solve(a: np.ndarray, y: np.ndarray, sparsity: int,
              max_iters: int = 50, step: float = 1.0,
              backtrack: bool = True) -> HihtpResult:
    """Unstructured hard thresholding pursuit at the given total sparsity."""
    a = np.asarray(a)
    y = np.asarray(y, dtype=complex)
    n = a.shape[1]
    x = np.zeros(n, dtype=complex)
    support = np.zeros(n, dtype=bool)
    rank_deficient = False
    res_norm = float(np.linalg.norm(y))
    for it in range(1, max_iters + 1):
        residual = y - a @ x
        cur_step = step
        for _ in range(4):
            g = x + cur_step * (a.conj().T @ residual)
            keep = np.argsort(-np.abs(g), kind="stable")[:sparsity]
            new_support = np.zeros(n, dtype=bool)
            new_support[keep] = True
            x_new, deficient = _restricted_lstsq(a, y, new_support)
            new_res = float(np.linalg.norm(y - a @ x_new))
            if not backtrack or new_res <= res_norm + 1e-12:
                break
            cur_step /= 2.0
        if np.array_equal(new_support, support):
            return HihtpResult(x, support, it, True, rank_deficient)
        x, support, res_norm = x_new, new_support, new_res
        rank_deficient = rank_deficient or deficient
    return HihtpResult(x, support, max_iters, False, rank_deficient)


# ---------------------------------------------------------------------------
# Control channel for the coded random access detector


@dataclass(frozen=True)
class CcraControlConfig:
    """Control-channel geometry: u user blocks of CIR length s, m rows."""

    n_blocks: int = 32
    block_len: int = 4
    n_rows: int = 48
    k_blocks: int = 8
    k_per_block: int = 1

    def __post_init__(self):
        if self.n_rows > self.n_blocks * self.block_len:
            raise ValueError("cannot subsample more rows than the FFT has")
        BlockSparsityPattern(self.n_blocks, self.block_len,
                             self.k_blocks, self.k_per_block)

    @property
    def pattern(self) -> BlockSparsityPattern:
        return BlockSparsityPattern(self.n_blocks, self.block_len,
                                    self.k_blocks, self.k_per_block)


def subsampled_fft_matrix(n_rows: int, n_cols: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Random rows of the n_cols-point DFT matrix, scaled by sqrt(1/m)."""
    rows = np.sort(rng.choice(n_cols, size=n_rows, replace=False))
    k = np.arange(n_cols)
    a = np.exp(-2j * np.pi * np.outer(rows, k) / n_cols)
    return a / math.sqrt(n_rows)


def generate_control_problem(cfg: CcraControlConfig, rng: np.random.Generator,
                             sigma: float = 0.0,
                             active_blocks: Optional[np.ndarray] = None):
    """One control-channel instance y = A h + z.

    Noise is CN(0, sigma^2 / n) per sample with n the full FFT length.
    Returns (a, y, h_true, active_blocks).
    """
    n = cfg.n_blocks * cfg.block_len
    a = subsampled_fft_matrix(cfg.n_rows, n, rng)
    if active_blocks is None:
        active_blocks = np.sort(rng.choice(cfg.n_blocks, size=cfg.k_blocks,
                                           replace=False))
    h = np.zeros(n, dtype=complex)
    for b in active_blocks:
        taps = np.sort(rng.choice(cfg.block_len, size=cfg.k_per_block,
                                  replace=False))
        vals = (rng.standard_normal(cfg.k_per_block)
                + 1j * rng.standard_normal(cfg.k_per_block)) / math.sqrt(2)
        h[b * cfg.block_len + taps] = vals
    y = a @ h
    if sigma > 0:
        y = y + (sigma / math.sqrt(n)) * (
            rng.standard_normal(cfg.n_rows)
            + 1j * rng.standard_normal(cfg.n_rows)) / math.sqrt(2)
    return a, y, h, np.asarray(active_blocks)


def detected_blocks(support: np.ndarray, cfg: CcraControlConfig) -> np.ndarray:
    """Block indices containing at least one supported entry."""
    mask = np.asarray(support).reshape(cfg.n_blocks, cfg.block_len)
    return np.nonzero(mask.any(axis=1))[0]


# ---------------------------------------------------------------------------
# Text serialization (binary-free, versioned JSON)


def _complex_to_pairs(arr: np.ndarray):
    a = np.asarray(arr, dtype=complex)
    return [[float(v.real), float(v.imag)] for v in a.reshape(-1)]


def _pairs_to_complex(pairs, shape):
    flat = np.array([complex(re, im) for re, im in pairs])
    return flat.reshape(shape)


def save_problem(path, problem: SparseProblem) -> None:
    """Serialize an instance to JSON text (complex values as [re, im] pairs)."""
    doc = {
        "format": "sparse-problem/1",
        "cfg": {"n_chips": problem.cfg.n_chips, "n_users": problem.cfg.n_users,
                "channel_taps": problem.cfg.channel_taps},
        "sigma": problem.sigma,
        "active_groups": [int(g) for g in problem.active_groups],
        "s_shape": list(problem.s.shape),
        "s": _complex_to_pairs(problem.s),
        "y": _complex_to_pairs(problem.y),
        "h_true": _complex_to_pairs(problem.h_true),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_problem(path) -> SparseProblem:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "sparse-problem/1":
        raise ValueError(f"unrecognized problem format in {path}")
    cfg = SpreadingConfig(**doc["cfg"])
    s = _pairs_to_complex(doc["s"], tuple(doc["s_shape"]))
    y = _pairs_to_complex(doc["y"], (cfg.n_chips,))
    h = _pairs_to_complex(doc["h_true"], (cfg.n_cols,))
    return SparseProblem(s, y, h, np.asarray(doc["active_groups"]),
                         float(doc["sigma"]), cfg)
