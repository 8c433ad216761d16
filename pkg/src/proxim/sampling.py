"""Seeded low-discrepancy and uniform samples of the unit cube."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc

SAMPLERS = ("halton", "uniform")


def unit_samples(n: int, d: int, seed: int, method: str = "halton") -> np.ndarray:
    """``n`` points of ``[0, 1]^d``; identical output for identical arguments."""
    if n <= 0:
        return np.zeros((0, d))
    if d == 0:
        return np.zeros((n, 0))
    if method == "halton":
        return qmc.Halton(d, scramble=True, seed=np.random.default_rng(seed)).random(n)
    if method == "uniform":
        return np.random.default_rng(seed).random((n, d))
    raise ValueError(f"unknown sampler {method!r}; expected one of {SAMPLERS}")


def vertex_pairs(va: np.ndarray, vb: np.ndarray, limit: int):
    """Cartesian product of two vertex tables, truncated to ``limit`` rows."""
    ia, ib = np.meshgrid(np.arange(len(va)), np.arange(len(vb)), indexing="ij")
    ia, ib = ia.ravel()[:limit], ib.ravel()[:limit]
    return va[ia], vb[ib]
