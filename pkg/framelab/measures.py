"""
Compactly supported probability measures on the line.

A :class:`Measure1D` is either an explicit density ``phi`` sampled on a
midpoint grid over its support hull, or the equal-weight self-similar measure
of an :class:`~framelab.self_similar.IFSSystem`. All intervals are half-open.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import special

from framelab.errors import (
    DescriptorError,
    NegativeDensity,
    NonPositiveMass,
    NotDensityVariant,
)
from framelab.self_similar import (
    IFSSystem,
    bernoulli_ifs,
    empirical_mass,
    make_ifs,
    sorted_sample,
)
from framelab.settings import config
from framelab.utils.descriptors import Descriptor, as_float, parse_descriptor
from framelab.utils.grids import cell_edges, midpoint_grid, overlap_fractions
from framelab.utils.reporting import read_numeric_csv

logger = logging.getLogger(__name__)

DENSITY = "Density"
SELF_SIMILAR = "SelfSimilar"


# ---------- Density descriptors ----------
@dataclass(frozen=True)
class DensityForm:
    """
    Closed-form or sampled density ``phi`` with its known analytic facts.

    Subclasses implement :meth:`evaluate` and may provide an exact Fourier
    transform, a decay certificate ``|mu^(xi)| <= C |xi|^-r`` and analytic
    essential bounds.
    """

    hull: tuple

    name = "density"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transform(self, xi: np.ndarray):
        """Exact Fourier transform ``int phi(x) exp(-2 pi i xi x) dx``, or None."""
        return None

    @property
    def decay(self):
        """``(C, r)`` with ``|mu^(xi)| <= C |xi|^-r``, or None."""
        return None

    @property
    def analytic_bounds(self):
        """``(ess inf, ess sup)`` of ``phi`` over ``{phi > 0}``, or None."""
        return None

    @property
    def total_variation(self) -> float:
        return np.inf

    def quadrature_error(self, h: float) -> float:
        """Bound on the sinc-corrected midpoint error of the normalized transform at step ``h``."""
        return h * self.total_variation

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class UniformDensity(DensityForm):
    a: float = 0.0
    b: float = 1.0

    name = "uniform"

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x < self.b), 1.0 / (self.b - self.a), 0.0)

    def transform(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-1j * np.pi * xi * (self.a + self.b)) * np.sinc(xi * (self.b - self.a))

    @property
    def decay(self):
        return 1.0 / (np.pi * (self.b - self.a)), 1.0

    @property
    def analytic_bounds(self):
        return 1.0 / (self.b - self.a), 1.0 / (self.b - self.a)

    @property
    def total_variation(self):
        return 2.0 / (self.b - self.a)

    def describe(self):
        return f"uniform({self.a!r},{self.b!r})"


@dataclass(frozen=True)
class TriangleDensity(DensityForm):
    """``1 - |x|`` on ``[-1, 1]``, the convolution square of uniform on ``[-1/2, 1/2]``."""

    name = "triangle"

    def evaluate(self, x):
        return np.clip(1.0 - np.abs(np.asarray(x, dtype=float)), 0.0, None)

    def transform(self, xi):
        return np.sinc(np.asarray(xi, dtype=float)) ** 2 + 0j

    @property
    def decay(self):
        return 1.0 / np.pi**2, 2.0

    @property
    def analytic_bounds(self):
        return 0.0, 1.0

    @property
    def total_variation(self):
        return 2.0


@dataclass(frozen=True)
class InvSqrtDensity(DensityForm):
    """``1 / (2 sqrt(x))`` on ``(0, 1]``."""

    name = "invsqrt"

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= 1)
        return np.where(inside, 0.5 / np.sqrt(np.where(inside, x, 1.0)), 0.0)

    def transform(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = 2.0 * np.sqrt(np.abs(xi))
        safe_z = np.where(z > 0, z, 1.0)
        s, c = special.fresnel(safe_z)
        value = (c - 1j * np.sign(xi) * s) / safe_z
        return np.where(z > 0, value, 1.0 + 0j)

    @property
    def decay(self):
        # the Cornu spiral stays inside the unit disc
        return 0.5, 0.5

    @property
    def analytic_bounds(self):
        return 0.5, np.inf

    def quadrature_error(self, h):
        # the first cell carries sqrt(h) of mass, the rest has variation 1/(2 sqrt(h))
        return 3.0 * np.sqrt(h)


@dataclass(frozen=True)
class GridDensity(DensityForm):
    """Density given by samples ``(x, phi(x))``, linearly interpolated, zero outside."""

    xs: tuple = ()
    ys: tuple = ()
    path: str = ""

    name = "grid"

    def evaluate(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys, left=0.0, right=0.0)

    @property
    def integral(self) -> float:
        """Exact integral of the interpolant (trapezoid rule on the samples)."""
        return float(np.sum(0.5 * (np.asarray(self.ys[1:]) + self.ys[:-1]) * np.diff(self.xs)))

    def transform(self, xi):
        """
        Exact transform of the interpolant divided by its integral.

        Each segment ``[c - h/2, c + h/2]`` with mean ``m`` and slope ``s`` contributes
        ``exp(-2 pi i xi c) (m h sinc(xi h) - i s h^2 q(pi xi h) / 2)`` where
        ``q(z) = (sin z - z cos z) / z^2``.
        """
        xi = np.asarray(xi, dtype=float)
        xs, ys = np.asarray(self.xs), np.asarray(self.ys)
        total = np.zeros(xi.shape, dtype=complex)
        for x0, x1, y0, y1 in zip(xs[:-1], xs[1:], ys[:-1], ys[1:]):
            h = x1 - x0
            if h <= 0:
                continue
            c, mean, slope = 0.5 * (x0 + x1), 0.5 * (y0 + y1), (y1 - y0) / h
            z = np.pi * xi * h
            small = np.abs(z) < 1e-3
            safe_z = np.where(small, 1.0, z)
            q = np.where(small, z / 3.0 - z**3 / 30.0,
                         (np.sin(safe_z) - safe_z * np.cos(safe_z)) / safe_z**2)
            total += np.exp(-2j * np.pi * xi * c) * (mean * h * np.sinc(xi * h)
                                                     - 0.5j * slope * h * h * q)
        return total / self.integral

    @property
    def total_variation(self):
        return float(np.sum(np.abs(np.diff(self.ys))))

    def describe(self):
        return f"grid({self.path})"


def read_density_csv(path) -> GridDensity:
    """
    Read a density from a CSV of ``(x, phi(x))`` rows; a header row is skipped.

    Raises:
        DescriptorError: if the file has fewer than two numeric rows.
    """
    path = Path(path)
    try:
        df = read_numeric_csv(path, 2)
    except Exception as e:
        logger.error(f"Cannot read density grid {path}: {e}")
        raise DescriptorError(f"Cannot read density grid {path}: {e}") from e
    if df.shape[1] < 2 or len(df) < 2:
        raise DescriptorError(f"Density grid {path} needs at least two numeric rows")
    df = df.sort_values(df.columns[0])
    xs = tuple(float(v) for v in df.iloc[:, 0])
    ys = tuple(float(v) for v in df.iloc[:, 1])
    return GridDensity(hull=(xs[0], xs[-1]), xs=xs, ys=ys, path=str(path))


def density_from_descriptor(descriptor) -> DensityForm:
    """
    Build a :class:`DensityForm` from ``uniform(a,b)``, ``triangle``, ``invsqrt`` or ``grid(path)``.
    """
    d = parse_descriptor(descriptor) if isinstance(descriptor, str) else descriptor
    if d.name == "uniform":
        a = as_float(d.arg(0, "a", 0.0), "uniform a")
        b = as_float(d.arg(1, "b", 1.0), "uniform b")
        if not b > a:
            raise DescriptorError(f"uniform needs a < b, got ({a}, {b})")
        return UniformDensity(hull=(a, b), a=a, b=b)
    if d.name == "triangle":
        return TriangleDensity(hull=(-1.0, 1.0))
    if d.name == "invsqrt":
        return InvSqrtDensity(hull=(0.0, 1.0))
    if d.name == "grid":
        return read_density_csv(d.arg(0, "path"))
    raise DescriptorError(f"Unknown density descriptor '{d}'")


# ---------- Measure1D ----------
@dataclass(frozen=True, eq=False)
class Measure1D:
    """
    Compactly supported probability measure on the line.

    Attributes:
        variant (str): ``"Density"`` or ``"SelfSimilar"``.
        support_hull (tuple): closed interval ``[a, b]`` containing the support.
        grid_n (int): number of midpoint cells over the hull.
        density (DensityForm | None): ``phi`` for the Density variant.
        normalization (float): factor ``1 / mass`` applied to ``phi``.
        raw_mass (float): midpoint mass of ``phi`` before normalization.
        ifs (IFSSystem | None): system of the SelfSimilar variant.
        mc_samples, mc_depth, mc_seed: Monte-Carlo parameters of the SelfSimilar variant.
    """

    variant: str
    support_hull: tuple
    grid_n: int
    density: DensityForm | None = None
    normalization: float = 1.0
    raw_mass: float = 1.0
    ifs: IFSSystem | None = None
    mc_samples: int = 0
    mc_depth: int = 0
    mc_seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_density(self) -> bool:
        return self.variant == DENSITY

    @property
    def length(self) -> float:
        return self.support_hull[1] - self.support_hull[0]

    @property
    def step(self) -> float:
        return self.length / self.grid_n

    @property
    def nodes(self) -> np.ndarray:
        return midpoint_grid(*self.support_hull, self.grid_n)[0]

    @property
    def edges(self) -> np.ndarray:
        return cell_edges(*self.support_hull, self.grid_n)

    def phi(self, x) -> np.ndarray:
        """Normalized density at ``x``."""
        self._require_density("phi")
        return self.density.evaluate(x) * self.normalization

    @property
    def samples(self) -> np.ndarray:
        """Normalized density at the grid nodes."""
        if "samples" not in self._cache:
            self._cache["samples"] = self.phi(self.nodes)
        return self._cache["samples"]

    @property
    def weights(self) -> np.ndarray:
        """Cell masses ``phi(x_p) h``; they sum to 1."""
        return self.samples * self.step

    def regrid(self, grid_n: int) -> "Measure1D":
        """Same measure on another grid (renormalized there for the Density variant)."""
        if self.is_density:
            return make_density_measure(self.density, self.support_hull, grid_n)
        return replace(self, grid_n=int(grid_n), _cache={})

    def describe(self) -> str:
        if self.is_density:
            return self.density.describe()
        return self.ifs.describe()

    def _require_density(self, what: str):
        if not self.is_density:
            raise NotDensityVariant(f"{what} needs a Density measure, got {self.describe()}")

    def __repr__(self):
        return (f"Measure1D(variant='{self.variant}', measure='{self.describe()}', "
                f"hull={self.support_hull}, grid_n={self.grid_n})")


def make_density_measure(density_fn, support_hull=None, grid_n: int | None = None) -> Measure1D:
    """
    Density measure renormalized to total mass 1 by the midpoint rule.

    Args:
        density_fn (str | Descriptor | DensityForm): density descriptor.
        support_hull (tuple | None): interval ``[a, b]``; defaults to the descriptor's hull.
        grid_n (int | None): number of midpoint cells, at least ``MEASURES.min_grid``.

    Returns:
        Measure1D

    Raises:
        ValueError: if ``grid_n`` is below the minimum or the hull is empty.
        NegativeDensity: if a sample is negative.
        NonPositiveMass: if the midpoint mass is not positive.

    Example:
        m = make_density_measure("triangle", grid_n=256)
    """
    grid_n = int(config.get("MEASURES", "default_grid", grid_n))
    min_grid = config.get("MEASURES", "min_grid")
    if grid_n < min_grid:
        raise ValueError(f"grid_n must be at least {min_grid}, got {grid_n}")

    form = density_fn if isinstance(density_fn, DensityForm) else density_from_descriptor(density_fn)
    a, b = (float(v) for v in (support_hull or form.hull))
    if not (np.isfinite(a) and np.isfinite(b) and b > a):
        raise ValueError(f"support hull must be a bounded nonempty interval, got {(a, b)}")

    nodes, h = midpoint_grid(a, b, grid_n)
    values = form.evaluate(nodes)
    if np.any(values < 0):
        first = nodes[np.argmax(values < 0)]
        raise NegativeDensity(f"{form.describe()} is negative at x={first}")
    mass = float(np.sum(values) * h)
    if not mass > 0:
        raise NonPositiveMass(f"{form.describe()} has midpoint mass {mass} on {(a, b)}")

    logger.debug(f"{form.describe()} on {(a, b)} at grid {grid_n}: raw mass {mass:.12g}")
    return Measure1D(variant=DENSITY, support_hull=(a, b), grid_n=grid_n, density=form,
                     normalization=1.0 / mass, raw_mass=mass)


def make_self_similar_measure(ifs: IFSSystem, grid_n: int | None = None,
                              mc_samples: int | None = None, mc_depth: int | None = None,
                              mc_seed: int | None = None) -> Measure1D:
    """Equal-weight self-similar measure of ``ifs`` with its Monte-Carlo parameters."""
    return Measure1D(
        variant=SELF_SIMILAR,
        support_hull=ifs.attractor_hull,
        grid_n=int(config.get("MEASURES", "default_grid", grid_n)),
        ifs=ifs,
        mc_samples=int(config.get("MEASURES", "mc_samples", mc_samples)),
        mc_depth=int(config.get("MEASURES", "mc_depth", mc_depth)),
        mc_seed=int(config.get("MEASURES", "mc_seed", mc_seed)),
    )


def ifs_from_descriptor(d: Descriptor) -> IFSSystem:
    """``ifs(lambda=..., digits=[...])``, ``bernoulli(lambda)`` or ``cantor``."""
    if d.name == "ifs":
        lam = as_float(d.arg(0, "lam"), "ifs lambda")
        digits = d.arg(1, "digits")
        if not isinstance(digits, list) or not digits:
            raise DescriptorError(f"ifs needs a digit list, got {digits!r}")
        return make_ifs(lam, [as_float(v, "ifs digit") for v in digits])
    if d.name == "bernoulli":
        return bernoulli_ifs(as_float(d.arg(0, "lam"), "bernoulli lambda"))
    if d.name == "cantor":
        return make_ifs(1 / 3, [0.0, 2 / 3])
    raise DescriptorError(f"Unknown IFS descriptor '{d}'")


def parse_measure(text: str, grid_n: int | None = None, mc_samples: int | None = None,
                  mc_seed: int | None = None) -> Measure1D:
    """
    Measure from a config descriptor.

    Density descriptors: ``uniform(a,b)``, ``triangle``, ``invsqrt``, ``grid(path)``.
    Self-similar descriptors: ``ifs(lambda=0.5, digits=[0,0.5])``, ``bernoulli(0.7)``, ``cantor``.
    """
    d = parse_descriptor(text)
    if d.name in ("ifs", "bernoulli", "cantor"):
        return make_self_similar_measure(ifs_from_descriptor(d), grid_n=grid_n,
                                         mc_samples=mc_samples, mc_seed=mc_seed)
    return make_density_measure(d, grid_n=grid_n)


# ---------- Operations ----------
def sample_cloud(m: Measure1D) -> np.ndarray:
    """The deterministic sorted Monte-Carlo sample of a SelfSimilar measure."""
    return sorted_sample(m.ifs, m.mc_samples, m.mc_depth, m.mc_seed)


def interval_mass(m: Measure1D, iv) -> float:
    """
    Mass ``mu([lo, hi))``.

    Density measures integrate the piecewise-constant midpoint density, so
    masses of a partition add up to 1 to rounding. SelfSimilar measures count
    points of one cached Monte-Carlo sample.

    Args:
        m (Measure1D): measure.
        iv (tuple): half-open interval ``(lo, hi)``.

    Returns:
        float: mass in ``[0, 1]``; 0 for empty intersections.
    """
    lo, hi = float(iv[0]), float(iv[1])
    if not hi > lo:
        return 0.0
    if m.is_density:
        return float(np.dot(m.weights, overlap_fractions(m.edges, lo, hi)))
    return empirical_mass(sample_cloud(m), lo, hi)


def support_cells(m: Measure1D) -> np.ndarray:
    """Grid cells ``[lo, hi)`` where ``phi`` exceeds the density floor, as a ``(k, 2)`` array."""
    m._require_density("support_cells")
    floor = config.get("MEASURES", "density_floor")
    edges = m.edges
    mask = m.samples > floor
    return np.column_stack((edges[:-1][mask], edges[1:][mask]))


class EssentialBounds(NamedTuple):
    m_est: float
    M_est: float
    bounded_below: bool
    bounded_above: bool
    trace: pd.DataFrame


def essential_bounds(m: Measure1D, refinement_levels: int | None = None,
                     growth_factor: float | None = None, use_analytic: bool = True) -> EssentialBounds:
    """
    Estimate ess inf and ess sup of ``phi`` over its support on refined grids.

    The grid is doubled ``refinement_levels - 1`` times. A bound is flagged
    unbounded when the finest estimate moved by more than ``growth_factor``
    compared with the estimate two refinements earlier. Descriptors with
    analytic bounds decide the flags when ``use_analytic`` is set.

    Returns:
        EssentialBounds: estimates at the finest grid, flags and a per-grid trace.

    Raises:
        NotDensityVariant: for SelfSimilar measures.
    """
    m._require_density("essential_bounds")
    levels = int(config.get("MEASURES", "refinement_levels", refinement_levels))
    growth = float(config.get("MEASURES", "growth_factor", growth_factor))
    floor = config.get("MEASURES", "density_floor")
    if levels < 3:
        raise ValueError(f"essential_bounds needs at least 3 refinement levels, got {levels}")

    rows = []
    for k in range(levels):
        level = m.regrid(m.grid_n * 2**k)
        positive = level.samples[level.samples > floor]
        rows.append({"grid_n": level.grid_n, "m_est": float(positive.min()),
                     "M_est": float(positive.max())})
    trace = pd.DataFrame(rows)

    m_fine, M_fine = rows[-1]["m_est"], rows[-1]["M_est"]
    m_prev, M_prev = rows[-3]["m_est"], rows[-3]["M_est"]
    bounded_below = not (m_fine * growth < m_prev)
    bounded_above = not (M_fine > growth * M_prev)

    analytic = m.density.analytic_bounds if use_analytic else None
    if analytic is not None:
        lo, hi = analytic
        if (lo > 0) != bounded_below or np.isfinite(hi) != bounded_above:
            logger.info(f"Analytic bounds of {m.describe()} override the refinement heuristic")
        bounded_below, bounded_above = bool(lo > 0), bool(np.isfinite(hi))

    logger.info(f"Essential bounds of {m.describe()}: m={m_fine:.6g} M={M_fine:.6g} "
                f"below={bounded_below} above={bounded_above}")
    return EssentialBounds(m_fine, M_fine, bounded_below, bounded_above, trace)


@dataclass(frozen=True)
class LevelSet:
    """
    Grid cells where ``lo < phi(sample) <= hi`` on the support.

    Attributes:
        cells (np.ndarray): ``(k, 2)`` array of half-open grid cells.
        indices (np.ndarray): grid indices of the cells.
        lo, hi (float): band limits.
        lebesgue_measure (float): number of cells times the grid step.
        mu_mass (float): sum of the cell masses.
    """

    cells: np.ndarray
    indices: np.ndarray
    lo: float
    hi: float
    lebesgue_measure: float
    mu_mass: float

    @property
    def empty(self) -> bool:
        return len(self.indices) == 0


def level_set(m: Measure1D, lo: float, hi: float) -> LevelSet:
    """
    Level set ``{lo < phi <= hi}`` on the grid of ``m``.

    An empty band is returned with zero measures and logged, never raised.

    Example:
        E_k = level_set(m, 1 / (k + 1), 1 / k)
    """
    m._require_density("level_set")
    if not lo < hi:
        raise ValueError(f"level_set needs lo < hi, got ({lo}, {hi})")
    floor = config.get("MEASURES", "density_floor")
    samples = m.samples
    mask = (samples > lo) & (samples <= hi) & (samples > floor)
    indices = np.flatnonzero(mask)
    edges = m.edges
    cells = np.column_stack((edges[indices], edges[indices + 1]))
    result = LevelSet(cells=cells, indices=indices, lo=float(lo), hi=float(hi),
                      lebesgue_measure=float(len(indices) * m.step),
                      mu_mass=float(np.sum(m.weights[indices])))
    if result.empty:
        logger.warning(f"Empty level set ({lo}, {hi}] for {m.describe()} at grid {m.grid_n}")
    return result
