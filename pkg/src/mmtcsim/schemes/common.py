"""Helpers shared by the scheme implementations."""

from __future__ import annotations

import numpy as np


def take_params(params: dict, defaults: dict, scheme: str) -> dict:
    """Overlay params on defaults, rejecting unknown keys loudly."""
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(
            f"unknown parameter(s) for scheme {scheme!r}: "
            f"{', '.join(sorted(unknown))}; "
            f"valid: {', '.join(sorted(defaults))}")
    merged = dict(defaults)
    merged.update(params)
    return merged


def uniform_contention(n_attempters: int, n_opportunities: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Winner mask when each attempter picks one opportunity uniformly.

    A pick wins if and only if nobody else chose the same opportunity.
    """
    if n_attempters == 0:
        return np.zeros(0, dtype=bool)
    choices = rng.integers(0, n_opportunities, size=n_attempters)
    counts = np.bincount(choices, minlength=n_opportunities)
    return counts[choices] == 1


def expected_fresh_successes(n: int, opportunities: int) -> float:
    """Closed-form mean winner count: n * (1 - 1/R)^(n-1)."""
    if n == 0:
        return 0.0
    return n * (1.0 - 1.0 / opportunities) ** (n - 1)
