"""
Frame and Bessel bounds of truncated exponential systems in a discretized
``L^2(K, dmu)``, plus the level-set diagnostics that witness missing bounds.

For a discretization with nodes ``x_p`` and cell masses ``m_p`` the frame
matrix is ``S_pq = sqrt(m_p m_q) sum_{lambda} exp(-2 pi i lambda (x_p - x_q))``;
its Rayleigh quotients are the frame sums of discretized functions divided by
their norms, so its extreme eigenvalues estimate ``A`` and ``B``.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from framelab.errors import NotUnbounded, SizeCap
from framelab.measures import Measure1D, essential_bounds, level_set, make_density_measure
from framelab.self_similar import (
    NOT_TILE_CONTRACTION,
    TILE,
    cell_masses,
    mass_decay_table,
    recursion_threshold,
    tile_verdict,
)
from framelab.settings import config
from framelab.spectra import Spectrum, lattice, restrict
from framelab.utils.eigen import extreme_eigenvalues
from framelab.utils.grids import doubling_grids, midpoint_grid

logger = logging.getLogger(__name__)

ADMITS_FRAME = "AdmitsFrame"
NO_FRAME_LOWER = "NoFrame_LowerUnbounded"
NO_FRAME_UPPER = "NoFrame_UpperUnbounded"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True, eq=False)
class DiscretizedL2:
    """
    Midpoint nodes with positive cell masses summing to 1.

    Attributes:
        nodes (np.ndarray): strictly increasing nodes of cells with positive mass.
        weights (np.ndarray): the cell masses.
        source (Measure1D): measure that was discretized.
        grid_n (int): number of cells before zero-mass cells were dropped.
    """

    nodes: np.ndarray
    weights: np.ndarray
    source: Measure1D
    grid_n: int

    @property
    def step(self) -> float:
        return self.source.length / self.grid_n

    def __len__(self):
        return len(self.nodes)


def discretize(m: Measure1D, grid_n: int | None = None) -> DiscretizedL2:
    """
    Discretize ``L^2(mu)`` on ``grid_n`` midpoint cells of the support hull.

    Density measures get ``m_p = phi(x_p) dx`` renormalized to sum 1.
    SelfSimilar measures get exact cell masses of depth-``d`` digit words,
    with ``d`` the smallest depth whose word intervals fit in a cell.

    Example:
        >>> discretize(make_density_measure("uniform(0,1)"), 4).nodes
        array([0.125, 0.375, 0.625, 0.875])
    """
    grid_n = int(grid_n or m.grid_n)
    if grid_n < 1:
        raise ValueError(f"grid_n must be positive, got {grid_n}")
    nodes, h = midpoint_grid(*m.support_hull, grid_n)
    if m.is_density:
        values = m.density.evaluate(nodes) * h
    else:
        ifs = m.ifs
        depth = max(0, math.ceil(math.log(h / ifs.hull_length) / math.log(ifs.lam) - 1e-12))
        edges = np.linspace(*m.support_hull, grid_n + 1)
        values = cell_masses(ifs, edges, depth)
    keep = values > 0
    weights = values[keep] / np.sum(values[keep])
    return DiscretizedL2(nodes=nodes[keep], weights=weights, source=m, grid_n=grid_n)


def frame_matrix(d: DiscretizedL2, s: Spectrum, size_cap: int | None = None) -> np.ndarray:
    """
    Hermitian PSD frame matrix of ``s`` on the discretization ``d``.

    Built as ``V V*`` with ``V_{p lambda} = sqrt(m_p) exp(-2 pi i lambda x_p)``,
    accumulated over blocks of frequencies.

    Raises:
        SizeCap: if the matrix would exceed ``FRAMES.size_cap``.
    """
    size_cap = config.get("FRAMES", "size_cap", size_cap)
    n = len(d)
    if n > size_cap:
        raise SizeCap(f"Frame matrix of size {n} exceeds the cap {size_cap}")
    root = np.sqrt(d.weights)
    freqs = np.asarray(s.points, dtype=float)
    S = np.zeros((n, n), dtype=complex)
    step = max(1, config.get("FOURIER", "chunk_elements") // max(1, n))
    for start in range(0, len(freqs), step):
        V = root[:, None] * np.exp(-2j * np.pi * np.outer(d.nodes, freqs[start:start + step]))
        S += V @ V.conj().T
    return (S + S.conj().T) / 2


def band_limited(s: Spectrum, hull_length: float, grid_n: int) -> Spectrum:
    """
    Frequencies of ``s`` in one alias band ``[c - n/(2L), c + n/(2L))`` of the grid, ``c`` the window centre.

    Jittered points are chosen by lattice anchor, so the band wraps around to
    a spectrum of the same kind without a gap at its seam.
    """
    centre = (s.window[0] + s.window[1]) / 2
    half = grid_n / (2 * hull_length)
    return restrict(s, centre - half, centre + half, half_open=True, whole_cells=True)


@dataclass(frozen=True)
class FrameBoundsReport:
    """
    Estimated frame bounds at the finest grid with the full refinement trace.

    Attributes:
        A_est, B_est (float): extreme eigenvalues of the frame matrix (A clipped at 0).
        grid_n (int): finest grid.
        spectrum_size (int): number of frequencies used at the finest grid.
        eigen_iters (int): iterations or sweeps spent in the eigen solver.
        residuals (list): solver residuals at the finest grid.
        convergence_trace (pd.DataFrame): one row per grid level.
    """

    A_est: float
    B_est: float
    grid_n: int
    spectrum_size: int
    eigen_iters: int
    residuals: list
    convergence_trace: pd.DataFrame = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "A_est": self.A_est,
            "B_est": self.B_est,
            "grid_n": self.grid_n,
            "spectrum_size": self.spectrum_size,
            "eigen_iters": self.eigen_iters,
            "residuals": list(self.residuals),
            "convergence_trace": self.convergence_trace,
        }


def frame_bounds(m: Measure1D, s: Spectrum, grid_n: int | None = None, refine: int = 1,
                 band_limit: bool = False, method: str = "auto") -> FrameBoundsReport:
    """
    Frame bound estimates over ``refine`` grid levels ``grid_n, 2 grid_n, ...``.

    Args:
        m (Measure1D): measure.
        s (Spectrum): truncated spectrum.
        grid_n (int): coarsest grid; defaults to the measure's grid.
        refine (int): number of grid levels in the trace.
        band_limit (bool): restrict ``s`` at every level to one alias band of that grid.
        method (str): eigen solver, see :func:`framelab.utils.eigen.extreme_eigenvalues`.

    Returns:
        FrameBoundsReport
    """
    grid_n = int(grid_n or m.grid_n)
    rows = []
    result = None
    for g in doubling_grids(grid_n, refine):
        d = discretize(m, g)
        spectrum = band_limited(s, m.length, g) if band_limit else s
        try:
            S = frame_matrix(d, spectrum)
            result = extreme_eigenvalues(S, method=method)
        except Exception as e:
            logger.error(f"Frame bounds of {m.describe()} at grid {g} failed: {e}")
            raise
        A = max(0.0, result.lowest)
        rows.append({"grid_n": g, "spectrum_size": len(spectrum), "A_est": A,
                     "B_est": result.highest, "method": result.method,
                     "iterations": result.iterations})
        logger.info(f"Frame bounds of {m.describe()} with {len(spectrum)} frequencies at grid {g}: "
                    f"A={A:.6g} B={result.highest:.6g}")
    trace = pd.DataFrame(rows)
    last = rows[-1]
    return FrameBoundsReport(A_est=last["A_est"], B_est=last["B_est"], grid_n=last["grid_n"],
                             spectrum_size=last["spectrum_size"],
                             eigen_iters=int(trace["iterations"].sum()),
                             residuals=list(result.residuals), convergence_trace=trace)


# ---------- Level-set diagnostics ----------
def _diagnostic_measure(m: Measure1D, grid_n: int | None) -> Measure1D:
    m._require_density("diagnostics")
    return m.regrid(int(config.get("FRAMES", "diagnostic_grid", grid_n)))


def _frame_sum(fine: Measure1D, indices: np.ndarray, s: Spectrum, weights: np.ndarray) -> float:
    """``sum_lambda |sum_p w_p exp(-2 pi i lambda x_p) sinc(lambda h)|^2`` over the given cells."""
    nodes = fine.nodes[indices]
    freqs = np.asarray(s.points, dtype=float)
    total = 0.0
    step = max(1, config.get("FOURIER", "chunk_elements") // max(1, len(nodes)))
    for start in range(0, len(freqs), step):
        block = freqs[start:start + step]
        coeff = np.exp(-2j * np.pi * np.outer(block, nodes)) @ weights
        coeff *= np.sinc(block * fine.step)
        total += float(np.sum(np.abs(coeff) ** 2))
    return total


def _default_ks(k_max: int | None, k_values):
    if k_values is not None:
        return [int(k) for k in k_values]
    return list(range(1, int(k_max or 32) + 1))


def lower_bound_diagnostic(m: Measure1D, s: Spectrum, k_max: int | None = None, k_values=None,
                           grid_n: int | None = None) -> pd.DataFrame:
    """
    Ratios ``R_k = sum_lambda |<chi_E, e_lambda>_mu|^2 / mu(E)`` on bands ``E_k = {1/(k+1) < phi <= 1/k}``.

    Empty bands are kept as rows with ``empty=True`` and ``ratio=NaN``.

    Args:
        m (Measure1D): Density measure.
        s (Spectrum): spectrum.
        k_max (int): use ``k = 1..k_max`` unless ``k_values`` is given.
        k_values (list): explicit band indices.
        grid_n (int): diagnostic grid, ``FRAMES.diagnostic_grid`` by default.

    Returns:
        pd.DataFrame: columns ``k, lo, hi, lebesgue, mu_mass, ratio, empty``.
    """
    fine = _diagnostic_measure(m, grid_n)
    rows = []
    for k in _default_ks(k_max, k_values):
        band = level_set(fine, 1.0 / (k + 1), 1.0 / k)
        ratio = np.nan
        if not band.empty:
            ratio = _frame_sum(fine, band.indices, s, fine.weights[band.indices]) / band.mu_mass
        rows.append({"k": k, "lo": band.lo, "hi": band.hi, "lebesgue": band.lebesgue_measure,
                     "mu_mass": band.mu_mass, "ratio": ratio, "empty": band.empty})
    return pd.DataFrame(rows)


def upper_bound_diagnostic(m: Measure1D, s: Spectrum, k_max: int | None = None, k_values=None,
                           grid_n: int | None = None) -> pd.DataFrame:
    """
    Ratios ``U_k = sum_lambda |<chi_D, e_lambda>_mu|^2 / int_D phi^2 dx`` on bands ``D_k = {k < phi <= k+1}``.

    Raises:
        NotUnbounded: if ``phi`` is flagged bounded above.
    """
    if essential_bounds(m).bounded_above:
        raise NotUnbounded(f"{m.describe()} is bounded above; the upper-bound diagnostic is vacuous")
    fine = _diagnostic_measure(m, grid_n)
    rows = []
    for k in _default_ks(k_max, k_values):
        band = level_set(fine, float(k), float(k + 1))
        ratio = np.nan
        if not band.empty:
            phi = fine.samples[band.indices]
            lebesgue_norm = float(np.sum(phi**2) * fine.step)
            ratio = _frame_sum(fine, band.indices, s, fine.weights[band.indices]) / lebesgue_norm
        rows.append({"k": k, "lo": band.lo, "hi": band.hi, "lebesgue": band.lebesgue_measure,
                     "mu_mass": band.mu_mass, "ratio": ratio, "empty": band.empty})
    return pd.DataFrame(rows)


# ---------- Translation and verdicts ----------
def translate_invariance_check(region, s: Spectrum, t: float, grid_n: int,
                               method: str = "dense") -> tuple:
    """
    ``(|A(R) - A(R + t)|, |B(R) - B(R + t)|)`` for the uniform measure on ``R``.

    Translation multiplies the frame matrix by unimodular phases, so both
    differences vanish up to rounding.
    """
    a, b = float(region[0]), float(region[1])
    base = frame_bounds(make_density_measure(f"uniform({a!r},{b!r})", grid_n=grid_n), s, grid_n,
                        method=method)
    if t == 0:
        return 0.0, 0.0
    moved = frame_bounds(make_density_measure(f"uniform({a + t!r},{b + t!r})", grid_n=grid_n), s,
                         grid_n, method=method)
    return abs(base.A_est - moved.A_est), abs(base.B_est - moved.B_est)


@dataclass(frozen=True)
class FrameVerdict:
    verdict: str
    evidence: dict


def _conclusive(fine: float, coarse: float, growth: float) -> bool:
    """Clearly stable (within sqrt(growth)) or clearly diverging (beyond growth)."""
    if coarse <= 0 or fine <= 0:
        return True
    change = max(fine / coarse, coarse / fine)
    return change <= math.sqrt(growth) or change > growth


def theorem1_verdict(m: Measure1D, evidence_spectrum: Spectrum | None = None,
                     with_diagnostics: bool = True,
                     absolutely_continuous: bool | None = None) -> FrameVerdict:
    """
    Whether ``mu`` admits a Fourier frame, from bounds ``m <= phi <= M`` on its support.

    Density measures are decided by :func:`essential_bounds`; the evidence
    carries the diagnostic ratio sequences. SelfSimilar measures go through
    :func:`tile_verdict`: a tile admits a frame, a contraction mismatch has no
    positive lower density near 0, anything else is inconclusive.
    ``absolutely_continuous`` is handed to :func:`tile_verdict` as the regime.
    """
    if not m.is_density:
        return _self_similar_verdict(m, absolutely_continuous)

    bounds = essential_bounds(m)
    evidence = {"measure": m.describe(), "m_est": bounds.m_est, "M_est": bounds.M_est,
                "bounded_below": bounds.bounded_below, "bounded_above": bounds.bounded_above,
                "refinement_trace": bounds.trace}

    if m.density.analytic_bounds is None:
        growth = config.get("MEASURES", "growth_factor")
        trace = bounds.trace
        stable = (_conclusive(trace["m_est"].iloc[-1], trace["m_est"].iloc[-3], growth)
                  and _conclusive(trace["M_est"].iloc[-1], trace["M_est"].iloc[-3], growth))
        if not stable:
            logger.warning(f"Refinement trend of {m.describe()} is ambiguous")
            return FrameVerdict(INCONCLUSIVE, evidence)

    if bounds.bounded_below and bounds.bounded_above:
        verdict = ADMITS_FRAME
    elif not bounds.bounded_below:
        verdict = NO_FRAME_LOWER
    else:
        verdict = NO_FRAME_UPPER

    if with_diagnostics:
        spectrum = evidence_spectrum or lattice(1.0 / m.length, 0.0, (-200.0 / m.length, 200.0 / m.length))
        if verdict == NO_FRAME_LOWER:
            evidence["lower_diagnostic"] = lower_bound_diagnostic(m, spectrum, k_values=[2, 4, 8, 16, 32])
        elif verdict == NO_FRAME_UPPER:
            evidence["upper_diagnostic"] = upper_bound_diagnostic(m, spectrum, k_values=[2, 4, 8, 16])

    logger.info(f"Frame verdict for {m.describe()}: {verdict}")
    return FrameVerdict(verdict, evidence)


def _self_similar_verdict(m: Measure1D, absolutely_continuous: bool | None = None) -> FrameVerdict:
    tile = tile_verdict(m.ifs, absolutely_continuous=absolutely_continuous)
    evidence = {"measure": m.describe(), "tile_verdict": tile.verdict, "tile_evidence": tile.evidence}
    if tile.verdict == TILE:
        verdict = ADMITS_FRAME
    elif tile.verdict == NOT_TILE_CONTRACTION:
        verdict = NO_FRAME_LOWER
        start = recursion_threshold(m.ifs)
        evidence["mass_decay"] = mass_decay_table(m.ifs, range(start, start + 6), m.mc_samples,
                                                  m.mc_depth, m.mc_seed)
    else:
        verdict = INCONCLUSIVE
    logger.info(f"Frame verdict for {m.describe()}: {verdict}")
    return FrameVerdict(verdict, evidence)
