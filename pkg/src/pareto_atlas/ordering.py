"""Pareto dominance on objective vectors (componentwise, with tolerance)."""
from __future__ import annotations

import numpy as np

__all__ = ["dominates", "dominating_pairs", "mutually_nondominated"]

DOMINANCE_TOL = 1e-9


def dominates(a, b, tol: float = DOMINANCE_TOL) -> bool:
    """True when ``a`` is <= ``b`` everywhere and strictly better somewhere.

    With a positive ``tol``, "<=" is relaxed to ``a_i <= b_i + tol`` and
    "strictly better" tightened to ``a_i < b_i - tol``, so vectors within
    ``tol`` of each other never dominate one another.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return bool(np.all(a <= b + tol) and np.any(a < b - tol))


def dominating_pairs(values, tol: float = DOMINANCE_TOL) -> list[tuple[int, int]]:
    """All ordered index pairs (i, j) where row i dominates row j."""
    f = np.asarray(values, dtype=float)
    if f.ndim != 2:
        raise ValueError("values must be an (N, m) array")
    le = np.all(f[:, None, :] <= f[None, :, :] + tol, axis=2)
    lt = np.any(f[:, None, :] < f[None, :, :] - tol, axis=2)
    dom = le & lt
    np.fill_diagonal(dom, False)
    rows, cols = np.nonzero(dom)
    return list(zip(rows.tolist(), cols.tolist()))


def mutually_nondominated(values, tol: float = DOMINANCE_TOL) -> bool:
    """True when no row of ``values`` dominates another."""
    return not dominating_pairs(values, tol)
