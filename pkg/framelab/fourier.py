"""
Fourier transforms of measures and the periodized power sums built from them.

Convention: ``mu^(xi) = int exp(-2 pi i xi x) dmu(x)`` while frame elements are
``e_lambda(x) = exp(2 pi i lambda x)``, so ``<e_xi, e_lambda>_mu = mu^(lambda - xi)``.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from framelab.errors import TolTooTight
from framelab.measures import Measure1D
from framelab.self_similar import IFSSystem
from framelab.settings import config
from framelab.utils.grids import exp_sums

logger = logging.getLogger(__name__)

ANALYTIC = "analytic"
QUADRATURE = "quadrature"
PRODUCT = "product"

# rounding allowance for closed-form transforms
ANALYTIC_ERROR = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class FTEvaluation:
    """
    One transform value with its error bound.

    Attributes:
        xi (float): frequency.
        value (complex): ``mu^(xi)``.
        abs_error_bound (float): bound on ``|value - mu^(xi)|``.
        method (str): ``analytic``, ``quadrature`` or ``product``.
        truncation_depth (int): last product index ``J`` (product method only).
        grid_n (int): quadrature grid (quadrature method only).
    """

    xi: float
    value: complex
    abs_error_bound: float
    method: str
    truncation_depth: int = 0
    grid_n: int = 0


# ---------- Self-similar product ----------
def mask_polynomial(ifs: IFSSystem, xi) -> np.ndarray:
    """``M(xi) = (1/ell) sum_k exp(-2 pi i d_k xi)``."""
    xi = np.asarray(xi, dtype=float)
    digits = np.asarray(ifs.digits)
    return np.exp(-2j * np.pi * np.multiply.outer(xi, digits)).mean(axis=-1)


def product_tail_bound(ifs: IFSSystem, xi, depth: int) -> np.ndarray:
    """
    Bound on ``|mu^(xi) - prod_{j<=depth} M(lambda^j xi)|``.

    Uses ``|1 - M(eta)| <= 2 pi d_max |eta|`` and ``prod (1 + a_j) <= exp(sum a_j)``.
    """
    s = 2 * np.pi * ifs.d_max * np.abs(np.asarray(xi, dtype=float)) * ifs.lam ** (depth + 1) / (1 - ifs.lam)
    return np.expm1(s)


def product_depth(ifs: IFSSystem, xi_max: float, tol: float, max_depth: int | None = None) -> int:
    """
    Smallest ``J >= 0`` whose product tail bound at ``|xi| <= xi_max`` is at most ``tol``.

    Raises:
        TolTooTight: if ``J`` exceeds ``FOURIER.max_depth``.
    """
    max_depth = config.get("FOURIER", "max_depth", max_depth)
    xi_max = abs(float(xi_max))
    if xi_max == 0.0:
        return 0
    scale = 2 * np.pi * ifs.d_max * xi_max / (1 - ifs.lam)
    # first guess from lambda^(J+1) * scale <= log1p(tol), then correct for rounding
    guess = math.ceil(math.log(math.log1p(tol) / scale) / math.log(ifs.lam)) - 1
    depth = max(0, guess)
    while product_tail_bound(ifs, xi_max, depth) > tol:
        depth += 1
    while depth > 0 and product_tail_bound(ifs, xi_max, depth - 1) <= tol:
        depth -= 1
    if depth > max_depth:
        raise TolTooTight(f"Product depth {depth} for |xi|={xi_max} exceeds the cap {max_depth}")
    return depth


def ifs_transform(ifs: IFSSystem, xi, tol: float, max_depth: int | None = None):
    """
    Truncated product ``prod_{j=0}^{J} M(lambda^j xi)`` for an array of frequencies.

    Returns:
        tuple[np.ndarray, np.ndarray, int]: values, per-frequency error bounds and ``J``.
    """
    xi = np.asarray(xi, dtype=float)
    depth = product_depth(ifs, np.max(np.abs(xi)) if xi.size else 0.0, tol, max_depth)
    values = np.ones(xi.shape, dtype=complex)
    for j in range(depth + 1):
        values *= mask_polynomial(ifs, ifs.lam**j * xi)
    values = np.where(xi == 0, 1.0 + 0j, values)
    return values, product_tail_bound(ifs, xi, depth), depth


# ---------- Density quadrature ----------
def quadrature_grid(m: Measure1D, tol: float, max_grid: int | None = None,
                    strict: bool = True) -> int:
    """
    Grid size at which the quadrature error bound of ``m`` meets ``tol``.

    Starts at ``max(FOURIER.base_grid, m.grid_n)`` and doubles.

    Args:
        strict (bool): raise at the cap; otherwise stop at the largest grid
            within the cap and leave the achieved bound to the caller.

    Raises:
        TolTooTight: if the grid would exceed ``max_grid`` and ``strict`` is set.
    """
    max_grid = config.get("FOURIER", "max_grid", max_grid)
    grid_n = max(config.get("FOURIER", "base_grid"), m.grid_n)
    while m.density.quadrature_error(m.length / grid_n) * m.normalization > tol:
        if grid_n * 2 > max_grid:
            if strict:
                raise TolTooTight(f"Quadrature of {m.describe()} to tol={tol} needs a grid above {max_grid}")
            logger.warning(f"Quadrature of {m.describe()} stops at grid {grid_n}, short of tol={tol}")
            break
        grid_n *= 2
    return grid_n


def quadrature_transform(m: Measure1D, xi, tol: float, max_grid: int | None = None,
                         strict: bool = True):
    """
    Transform of the piecewise-constant midpoint density, exact on every cell.

    Returns:
        tuple[np.ndarray, float, int]: values, error bound and grid size.
    """
    xi = np.asarray(xi, dtype=float)
    grid_n = quadrature_grid(m, tol, max_grid, strict)
    fine = m.regrid(grid_n)
    bound = fine.density.quadrature_error(fine.step) * fine.normalization
    flat = xi.ravel()
    values = exp_sums(fine.nodes, fine.weights, flat, config.get("FOURIER", "chunk_elements"))
    values = (values * np.sinc(flat * fine.step)).reshape(xi.shape)
    values = np.where(xi == 0, 1.0 + 0j, values)
    return values, bound, grid_n


# ---------- Public transform API ----------
def _keeps_whole_density(m: Measure1D) -> bool:
    (a, b), (lo, hi) = m.support_hull, m.density.hull
    return a <= lo and hi <= b


def _has_closed_form(m: Measure1D) -> bool:
    """True when the density has an exact transform and the hull keeps all of it."""
    return _keeps_whole_density(m) and m.density.transform(np.zeros(1)) is not None


def _resolve_method(m: Measure1D, method: str) -> str:
    if method == "auto":
        if not m.is_density:
            return PRODUCT
        return ANALYTIC if _has_closed_form(m) else QUADRATURE
    if method == PRODUCT and m.is_density:
        raise ValueError("The product method needs a SelfSimilar measure")
    if method in (ANALYTIC, QUADRATURE) and not m.is_density:
        raise ValueError(f"The {method} method needs a Density measure")
    if method == ANALYTIC and not _has_closed_form(m):
        raise ValueError(f"{m.describe()} on {m.support_hull} has no closed-form transform")
    if method not in (ANALYTIC, QUADRATURE, PRODUCT):
        raise ValueError(f"Unknown transform method: {method}")
    return method


def transform(m: Measure1D, xi, tol: float = 1e-10, method: str = "auto",
              max_grid: int | None = None, strict: bool = True):
    """
    Vectorized ``mu^(xi)``.

    Args:
        m (Measure1D): measure.
        xi (array-like): frequencies.
        tol (float): requested absolute accuracy.
        method (str): ``auto``, ``analytic``, ``quadrature`` or ``product``.
        max_grid (int | None): quadrature grid cap, ``FOURIER.max_grid`` by default.
        strict (bool): raise TolTooTight at the quadrature cap; with False the
            returned bounds are the ones actually achieved.

    Returns:
        tuple[np.ndarray, np.ndarray, dict]: values, per-frequency error bounds and
        method details (``method``, ``truncation_depth``, ``grid_n``).

    Raises:
        ValueError: if ``tol <= 0`` or the method does not fit the measure.
        TolTooTight: if the grid or product depth cap is exceeded.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    xi = np.asarray(xi, dtype=float)
    method = _resolve_method(m, method)
    if method == ANALYTIC:
        values = np.where(xi == 0, 1.0 + 0j, m.density.transform(xi))
        return values, np.full(xi.shape, ANALYTIC_ERROR), {"method": ANALYTIC}
    if method == QUADRATURE:
        values, bound, grid_n = quadrature_transform(m, xi, tol, max_grid, strict)
        return values, np.full(xi.shape, bound), {"method": QUADRATURE, "grid_n": grid_n}
    values, bounds, depth = ifs_transform(m.ifs, xi, tol)
    return values, bounds, {"method": PRODUCT, "truncation_depth": depth}


def ft(m: Measure1D, xi: float, tol: float = 1e-10, method: str = "auto") -> FTEvaluation:
    """
    ``mu^(xi)`` at one frequency.

    Example:
        >>> ft(make_density_measure("triangle"), 1.0).value
        0j
    """
    values, bounds, info = transform(m, np.array([xi]), tol, method)
    return FTEvaluation(xi=float(xi), value=complex(values[0]), abs_error_bound=float(bounds[0]),
                        method=info["method"], truncation_depth=info.get("truncation_depth", 0),
                        grid_n=info.get("grid_n", 0))


def refinement_identity_residual(ifs: IFSSystem, xi: float, tol: float = 1e-10) -> float:
    """
    ``|mu^(xi) - M(xi) mu^(lambda xi)|`` with separately truncated products; at most ``3 tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if xi == 0:
        return 0.0
    left, _, _ = ifs_transform(ifs, np.array([xi]), tol)
    right, _, _ = ifs_transform(ifs, np.array([ifs.lam * xi]), tol)
    return float(abs(left[0] - mask_polynomial(ifs, xi) * right[0]))


# ---------- Periodization ----------
class PowerSum(NamedTuple):
    partial_sum: float
    tail_bound: float


def power_tail_bound(m: Measure1D, x: float, p: int, n_window: int) -> float:
    """
    Bound on ``sum_{|n| > N} |mu^(x + n)|^p`` from the decay certificate ``C |xi|^-r``.

    ``inf`` when there is no certificate (none survives a hull that cuts the density),
    ``p r <= 1`` or ``N <= |x| + 1``.
    """
    decay = m.density.decay if m.is_density and _keeps_whole_density(m) else None
    if decay is None:
        logger.warning(f"No decay certificate for {m.describe()}; tail bound is infinite")
        return math.inf
    C, r = decay
    exponent = p * r
    gap = n_window - abs(x)
    if exponent <= 1 or gap <= 1:
        return math.inf
    return 2 * C**p * gap ** (1 - exponent) / (exponent - 1)


def _scan_transform(m: Measure1D, xi, tol: float):
    """Transform for scans: the quadrature grid stops at ``FOURIER.scan_max_grid`` instead of failing."""
    values, bounds, _ = transform(m, xi, tol, max_grid=config.get("FOURIER", "scan_max_grid"),
                                  strict=False)
    return values, float(np.max(bounds)) if np.size(bounds) else 0.0


def _sum_error(bound: float, count: int, p: int, tol: float) -> float:
    """Error of ``count`` terms ``|v|^p`` whose values miss by ``bound``; zero while ``bound`` meets ``tol``."""
    if bound <= tol:
        return 0.0
    return count * p * bound * (1.0 + bound) ** (p - 1)


def _check_power(p: int, n_window: int):
    if p not in (2, 4):
        raise ValueError(f"p must be 2 or 4, got {p}")
    if n_window < 1:
        raise ValueError(f"n_window must be at least 1, got {n_window}")


def periodization_power_sum(m: Measure1D, x: float, p: int = 2, n_window: int = 200,
                            tol: float = 1e-12) -> PowerSum:
    """
    ``sum_{|n| <= N} |mu^(x + n)|^p`` and a bound on the omitted terms.

    Example:
        periodization_power_sum(make_density_measure("triangle"), 0.5)  # about 1/3
    """
    _check_power(p, n_window)
    n = np.arange(-n_window, n_window + 1)
    values, bound = _scan_transform(m, x + n, tol)
    partial = float(np.sum(np.abs(values) ** p))
    slack = _sum_error(bound, len(n), p, tol)
    return PowerSum(partial, power_tail_bound(m, x, p, n_window) + slack)


def periodization_scan(m: Measure1D, x_grid, p: int = 2, n_window: int = 200,
                       tol: float = 1e-12) -> pd.DataFrame:
    """
    Power sums over a grid of offsets, as rows ``(xi, sum, tail_bound)``.
    """
    _check_power(p, n_window)
    x = np.asarray(x_grid, dtype=float)
    n = np.arange(-n_window, n_window + 1)
    values, bound = _scan_transform(m, x[:, None] + n[None, :], tol)
    sums = np.sum(np.abs(values) ** p, axis=1)
    slack = _sum_error(bound, len(n), p, tol)
    tails = [power_tail_bound(m, xv, p, n_window) + slack for xv in x]
    return pd.DataFrame({"xi": x, "sum": sums, "tail_bound": tails})


@dataclass(frozen=True)
class FrameConditionScan:
    table: pd.DataFrame
    min: float
    max: float
    argmin: float
    argmax: float
    error_bound: float = 0.0


def frame_condition_scan(m: Measure1D, s, xi_grid, tol: float = 1e-10) -> FrameConditionScan:
    """
    ``sum_{lambda in s} |mu^(xi + lambda)|^2`` over a frequency grid.

    The minimum witnesses a lower frame bound only up to the truncation of ``s``.

    Args:
        m (Measure1D): measure.
        s (Spectrum): finite spectrum.
        xi_grid (array-like): frequencies.
    """
    xi = np.atleast_1d(np.asarray(xi_grid, dtype=float))
    points = np.asarray(s.points, dtype=float)
    sums = np.empty(len(xi))
    bound = 0.0
    step = max(1, config.get("FOURIER", "chunk_elements") // max(1, len(points)))
    for start in range(0, len(xi), step):
        block = xi[start:start + step]
        values, block_bound = _scan_transform(m, block[:, None] + points[None, :], tol)
        bound = max(bound, block_bound)
        sums[start:start + step] = np.sum(np.abs(values) ** 2, axis=1)
    table = pd.DataFrame({"xi": xi, "sum": sums})
    i_min, i_max = int(np.argmin(sums)), int(np.argmax(sums))
    logger.info(f"Frame condition scan of {m.describe()} over {len(xi)} points: "
                f"min={sums[i_min]:.6g} max={sums[i_max]:.6g}")
    return FrameConditionScan(table, float(sums[i_min]), float(sums[i_max]),
                              float(xi[i_min]), float(xi[i_max]),
                              _sum_error(bound, len(points), 2, tol))
