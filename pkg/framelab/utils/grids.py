"""
Grid and interval helpers shared by the measure, transform and frame modules.

Every interval is half-open ``[lo, hi)``; interval lists are ``(k, 2)`` float
arrays sorted by left endpoint.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)


def midpoint_grid(a: float, b: float, n: int):
    """
    Midpoint nodes of the uniform partition of ``[a, b)`` into ``n`` cells.

    Returns:
        tuple[np.ndarray, float]: nodes ``a + (p + 1/2) h`` and the step ``h``.

    Example:
        >>> midpoint_grid(0.0, 1.0, 4)[0]
        array([0.125, 0.375, 0.625, 0.875])
    """
    h = (b - a) / n
    return a + (np.arange(n) + 0.5) * h, h


def cell_edges(a: float, b: float, n: int) -> np.ndarray:
    return np.linspace(a, b, n + 1)


def merge_intervals(intervals, tol: float = 0.0) -> np.ndarray:
    """
    Merge overlapping or touching intervals.

    Args:
        intervals: ``(k, 2)`` array-like of ``[lo, hi)`` pairs, any order.
        tol (float): gaps up to ``tol`` are closed.

    Returns:
        np.ndarray: disjoint sorted intervals.
    """
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if len(iv) == 0:
        return np.empty((0, 2))
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    # a new block starts wherever the left end clears every right end before it
    running_hi = np.maximum.accumulate(iv[:, 1])
    new_block = np.empty(len(iv), dtype=bool)
    new_block[0] = True
    new_block[1:] = iv[1:, 0] > running_hi[:-1] + tol
    block_ids = np.cumsum(new_block) - 1
    lo = iv[new_block, 0]
    hi = np.full(len(lo), -np.inf)
    np.maximum.at(hi, block_ids, iv[:, 1])
    return np.column_stack((lo, hi))


def total_length(intervals) -> float:
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    return float(np.sum(iv[:, 1] - iv[:, 0]))


def clip_intervals(intervals, lo: float, hi: float) -> np.ndarray:
    """Intersect a disjoint interval list with ``[lo, hi)``, dropping empty pieces."""
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    left = np.maximum(iv[:, 0], lo)
    right = np.minimum(iv[:, 1], hi)
    keep = right > left
    return np.column_stack((left[keep], right[keep]))


def overlap_fractions(edges: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fraction of every grid cell ``[edges[p], edges[p+1])`` covered by ``[lo, hi)``."""
    left = np.maximum(edges[:-1], lo)
    right = np.minimum(edges[1:], hi)
    width = edges[1:] - edges[:-1]
    return np.clip(right - left, 0.0, None) / width


def exp_sums(nodes, weights, freqs, chunk_elements: int = 1 << 22) -> np.ndarray:
    """
    Weighted exponential sums ``sum_p w_p exp(-2 pi i f x_p)`` for every ``f`` in ``freqs``.

    The ``len(freqs) x len(nodes)`` phase matrix is built in chunks of at
    most ``chunk_elements`` entries.
    """
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    out = np.empty(len(freqs), dtype=complex)
    step = max(1, chunk_elements // max(1, len(nodes)))
    for start in range(0, len(freqs), step):
        block = freqs[start:start + step]
        phase = np.exp(-2j * np.pi * np.outer(block, nodes))
        out[start:start + step] = phase @ weights
    return out


def doubling_grids(grid_n: int, levels: int) -> list:
    """``[grid_n, 2 grid_n, 4 grid_n, ...]`` with ``levels`` entries."""
    return [int(grid_n) * 2**k for k in range(max(1, levels))]
