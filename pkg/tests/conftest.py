from __future__ import annotations

from math import comb, factorial

import numpy as np
import pytest


def bspline_truncated_power(x, order: int) -> np.ndarray:
    """Cardinal B-spline from the truncated-power formula (independent of scipy's BSpline)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(order + 1):
        out += (-1) ** i * comb(order, i) * np.clip(x - i, 0.0, None) ** (order - 1)
    out /= factorial(order - 1)
    return np.where((x >= 0) & (x <= order), out, 0.0)


def psi_unnormalized(t, order: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return sum((-1) ** k * comb(order, k) * bspline_truncated_power(t - k, order) for k in range(order + 1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def fbm_fstar_series(lam: float, hurst: float, terms: int = 20000) -> float:
    """FBM short-memory factor by direct summation with a midpoint-integral remainder."""
    p = 2 * hurst + 1
    k = np.arange(1, terms + 1)
    tail = np.sum(np.abs(lam + 2 * np.pi * k) ** -p) + np.sum(np.abs(lam - 2 * np.pi * k) ** -p)
    edge = 2 * np.pi * (terms + 0.5)
    rest = ((edge + lam) ** (1 - p) + (edge - lam) ** (1 - p)) / (2 * np.pi * (p - 1))
    head = abs(2 * np.sin(lam / 2) / lam) ** p if lam != 0 else 1.0
    return head + abs(2 * np.sin(lam / 2)) ** p * (tail + rest)
