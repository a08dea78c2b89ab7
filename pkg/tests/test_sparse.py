"""Kernel checks for the sparse activity-detection solvers."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmtcsim.sparse import (
    BlockSparsityPattern,
    CcraControlConfig,
    SpreadingConfig,
    block_column_threshold,
    default_epsilon,
    detected_blocks,
    detection_errors,
    generate_control_problem,
    generate_problem,
    gomp_solve,
    hihtp_solve,
    htp_solve,
    load_problem,
    pn_spreading_matrix,
    save_problem,
    sigma_for_snr,
    subsampled_fft_matrix,
)


def brute_force_threshold(v, pattern):
    """Independent reference for the structured thresholding operator."""
    v = np.asarray(v).reshape(pattern.n_blocks, pattern.block_len)
    mask = np.zeros_like(v, dtype=bool)
    kept = {}
    norms = []
    for b in range(pattern.n_blocks):
        idx = sorted(range(pattern.block_len),
                     key=lambda i: (-abs(v[b, i]), i))[:pattern.k_per_block]
        kept[b] = idx
        norms.append(math.sqrt(sum(abs(v[b, i]) ** 2 for i in idx)))
    blocks = sorted(range(pattern.n_blocks),
                    key=lambda b: (-norms[b], b))[:pattern.k_blocks]
    for b in blocks:
        for i in kept[b]:
            mask[b, i] = True
    return mask.reshape(-1)


def exhaustive_l0_support(s, y, max_active, group_size=1, tol=1e-8):
    """Smallest support (by cardinality, then lexicographic) fitting y exactly."""
    n_groups = s.shape[1] // group_size
    for size in range(0, max_active + 1):
        for combo in itertools.combinations(range(n_groups), size):
            if size == 0:
                if np.linalg.norm(y) <= tol:
                    return []
                continue
            cols = np.concatenate([np.arange(g * group_size, (g + 1) * group_size)
                                   for g in combo])
            coef, *_ = np.linalg.lstsq(s[:, cols], y, rcond=None)
            if np.linalg.norm(y - s[:, cols] @ coef) <= tol * max(1, np.linalg.norm(y)):
                return list(combo)
    return None


def test_pn_matrix_unit_norm_columns():
    cfg = SpreadingConfig(32, 64, 1)
    s = pn_spreading_matrix(cfg, np.random.default_rng(1))
    assert s.shape == (32, 64)
    np.testing.assert_allclose(np.linalg.norm(s, axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.abs(s), 1 / math.sqrt(32), atol=1e-12)


def test_gomp_matches_exhaustive_l0_small():
    cfg = SpreadingConfig(12, 16, 1)
    rng = np.random.default_rng(7)
    for trial in range(40):
        n_active = int(rng.integers(1, 3))
        prob = generate_problem(cfg, n_active, rng)
        res = gomp_solve(prob.s, prob.y)
        oracle = exhaustive_l0_support(prob.s, prob.y, 2)
        assert res.active_groups == oracle
        assert res.active_groups == list(prob.active_groups)
        assert res.converged


def test_gomp_zero_observation_empty_support():
    cfg = SpreadingConfig(8, 8, 1)
    s = pn_spreading_matrix(cfg, np.random.default_rng(2))
    res = gomp_solve(s, np.zeros(8, dtype=complex))
    assert res.active_groups == []
    assert res.converged
    assert res.n_iterations == 0


def test_gomp_noiseless_recovery_rate_smoke():
    cfg = SpreadingConfig(32, 64, 1)
    rng = np.random.default_rng(11)
    hits = 0
    for _ in range(100):
        prob = generate_problem(cfg, 4, rng)
        res = gomp_solve(prob.s, prob.y)
        hits += res.active_groups == list(prob.active_groups)
    assert hits >= 97


def test_gomp_selection_saturates_at_observation_budget():
    cfg = SpreadingConfig(32, 64, 1)
    rng = np.random.default_rng(3)
    prob = generate_problem(cfg, 40, rng, snr_db=10.0)
    res = gomp_solve(prob.s, prob.y, sigma=prob.sigma)
    assert len(res.active_groups) <= 32
    assert res.converged  # square restricted fit drives the residual to zero


def test_gomp_sparsity_driven_selects_exact_count():
    # epsilon=0 disables the residual rule: max_groups becomes the sole driver
    cfg = SpreadingConfig(32, 64, 1)
    rng = np.random.default_rng(7)
    prob = generate_problem(cfg, 48, rng, snr_db=10.0)
    res = gomp_solve(prob.s, prob.y, sigma=prob.sigma, epsilon=0.0,
                     max_groups=48)
    assert len(res.active_groups) == 48
    assert res.converged
    assert res.rank_deficient  # 48 columns fitted from 32 observations


def test_gomp_sparsity_driven_full_load_selects_everyone():
    cfg = SpreadingConfig(32, 64, 1)
    rng = np.random.default_rng(8)
    prob = generate_problem(cfg, 64, rng, snr_db=10.0)
    res = gomp_solve(prob.s, prob.y, epsilon=0.0, max_groups=64)
    assert res.active_groups == list(range(64))
    assert detection_errors(res.active_groups, prob.active_groups, 64) == 0.0


def test_gomp_residual_mode_not_rank_deficient():
    cfg = SpreadingConfig(32, 64, 1)
    rng = np.random.default_rng(9)
    prob = generate_problem(cfg, 4, rng)
    res = gomp_solve(prob.s, prob.y)
    assert not res.rank_deficient


def test_gomp_group_least_squares_multi_tap():
    cfg = SpreadingConfig(32, 16, 2)
    rng = np.random.default_rng(13)
    prob = generate_problem(cfg, 2, rng)
    res = gomp_solve(prob.s, prob.y, group_size=2)
    assert res.active_groups == list(prob.active_groups)
    np.testing.assert_allclose(res.h, prob.h_true, atol=1e-8)


def test_default_epsilon_formula():
    assert default_epsilon(0.1, 25, 1.0) == pytest.approx(0.1 * math.sqrt(35))
    assert default_epsilon(0.0, 25, 2.0) == pytest.approx(2e-9)


def test_detection_errors_counts_both_directions():
    assert detection_errors([1, 2], [2, 3], 10) == pytest.approx(0.2)
    assert detection_errors([], [], 10) == 0.0


def test_block_threshold_hand_example():
    pattern = BlockSparsityPattern(2, 3, 1, 2)
    v = np.array([1.0, 0.0, 2.0, 0.0, 5.0, 4.0])
    mask = block_column_threshold(v, pattern)
    assert list(np.nonzero(mask)[0]) == [4, 5]


def test_block_threshold_all_zero_degenerate():
    pattern = BlockSparsityPattern(3, 4, 2, 2)
    mask = block_column_threshold(np.zeros(12), pattern)
    assert list(np.nonzero(mask)[0]) == [0, 1, 4, 5]


def test_block_threshold_matches_brute_force():
    rng = np.random.default_rng(23)
    for _ in range(400):
        u = int(rng.integers(1, 5))
        s = int(rng.integers(1, 5))
        pattern = BlockSparsityPattern(u, s, int(rng.integers(1, u + 1)),
                                       int(rng.integers(1, s + 1)))
        v = rng.integers(-3, 4, size=u * s).astype(float)  # many ties
        got = block_column_threshold(v, pattern)
        want = brute_force_threshold(v, pattern)
        assert np.array_equal(got, want)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10 ** 6))
@settings(max_examples=60, deadline=None)
def test_block_threshold_idempotent_property(ku, ks, seed):
    pattern = BlockSparsityPattern(4, 4, ku, ks)
    v = np.random.default_rng(seed).standard_normal(16)
    mask = block_column_threshold(v, pattern)
    again = block_column_threshold(np.where(mask, v, 0.0), pattern)
    assert np.array_equal(np.where(again, v != 0, False),
                          np.where(mask, v != 0, False))
    assert mask.sum() <= pattern.total_sparsity


def test_hihtp_exact_recovery_singleton():
    cfg = CcraControlConfig(n_blocks=8, block_len=4, n_rows=8,
                            k_blocks=1, k_per_block=1)
    rng = np.random.default_rng(5)
    for _ in range(30):
        a, y, h, _ = generate_control_problem(cfg, rng)
        res = hihtp_solve(a, y, cfg.pattern)
        assert res.converged
        assert np.array_equal(res.support, h != 0)
        np.testing.assert_allclose(res.x, h, atol=1e-8)


def test_hihtp_structured_beats_unstructured_paired():
    cfg = CcraControlConfig(n_blocks=8, block_len=4, n_rows=14,
                            k_blocks=2, k_per_block=2)
    rng = np.random.default_rng(31)
    sigma = math.sqrt(32 * 4 * 10 ** (-1.5) / 14)
    wins_structured = 0
    wins_unstructured = 0
    for _ in range(80):
        a, y, h, _ = generate_control_problem(cfg, rng, sigma=sigma)
        true_support = h != 0
        s_hit = np.array_equal(hihtp_solve(a, y, cfg.pattern).support, true_support)
        u_hit = np.array_equal(
            htp_solve(a, y, cfg.pattern.total_sparsity).support, true_support)
        wins_structured += s_hit
        wins_unstructured += u_hit
    assert wins_structured >= wins_unstructured


def test_hihtp_flags_rank_deficiency():
    cfg = CcraControlConfig(n_blocks=8, block_len=4, n_rows=4,
                            k_blocks=4, k_per_block=2)
    rng = np.random.default_rng(2)
    a, y, _, _ = generate_control_problem(cfg, rng)
    res = hihtp_solve(a, y, cfg.pattern, max_iters=10)
    assert res.rank_deficient  # 8 requested columns against 4 rows


def test_subsampled_fft_unit_columns():
    a = subsampled_fft_matrix(16, 64, np.random.default_rng(4))
    np.testing.assert_allclose(np.linalg.norm(a, axis=0), 1.0, atol=1e-12)


def test_detected_blocks_roundup():
    cfg = CcraControlConfig(n_blocks=4, block_len=2, n_rows=6,
                            k_blocks=2, k_per_block=1)
    support = np.array([False, True, False, False, False, False, True, True])
    assert list(detected_blocks(support, cfg)) == [0, 3]


def test_problem_serialization_round_trip(tmp_path):
    cfg = SpreadingConfig(8, 6, 1)
    prob = generate_problem(cfg, 2, np.random.default_rng(9), snr_db=10.0)
    path = tmp_path / "prob.json"
    save_problem(path, prob)
    back = load_problem(path)
    assert back.cfg == cfg
    np.testing.assert_allclose(back.s, prob.s)
    np.testing.assert_allclose(back.y, prob.y)
    np.testing.assert_allclose(back.h_true, prob.h_true)
    assert list(back.active_groups) == list(prob.active_groups)
    assert back.sigma == pytest.approx(prob.sigma)


def test_sigma_for_snr_monotone():
    assert sigma_for_snr(20, 32) < sigma_for_snr(10, 32) < sigma_for_snr(0, 32)
