"""
Equal-weight self-similar measures ``mu = (1/ell) sum_j mu o f_j^-1`` of
iterated function systems ``f_j(x) = lambda x + d_j``.

Attractor geometry is handled with covers ``f_w(hull)`` over digit words
``w``; measures are sampled by random digit expansions.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd

from framelab.errors import BadContraction, DepthCap, DuplicateDigits, UnsupportedLambda
from framelab.settings import config
from framelab.utils.grids import clip_intervals, merge_intervals, total_length

logger = logging.getLogger(__name__)

TILE = "Tile"
NOT_TILE_CONTRACTION = "NotTile_ContractionMismatch"
NOT_TILE_OVERLAP = "NotTile_Overlap"
SINGULAR = "Singular"


@dataclass(frozen=True)
class IFSSystem:
    """
    Contraction ratio and normalized digits ``0 = d_1 < ... < d_ell``.

    Hashable, so derived samples can be cached per system.
    """

    lam: float
    digits: tuple

    @property
    def ell(self) -> int:
        return len(self.digits)

    @property
    def d_max(self) -> float:
        return self.digits[-1]

    @property
    def attractor_hull(self) -> tuple:
        return 0.0, self.d_max / (1.0 - self.lam)

    @property
    def hull_length(self) -> float:
        return self.attractor_hull[1]

    @property
    def is_equal_contraction(self) -> bool:
        """True when ``lambda * ell == 1``."""
        return math.isclose(self.lam * self.ell, 1.0, rel_tol=1e-12)

    def preimages(self, lo: float, hi: float):
        """Ends of ``f_j^-1 [lo, hi)`` for every map, as two arrays."""
        digits = np.asarray(self.digits)
        return (lo - digits) / self.lam, (hi - digits) / self.lam

    def describe(self) -> str:
        digits = ",".join(f"{d:.12g}" for d in self.digits)
        return f"ifs(lambda={self.lam:.12g}, digits=[{digits}])"


def make_ifs(lam: float, digits) -> IFSSystem:
    """
    Build an IFS with digits translated so the smallest is 0, then sorted.

    Raises:
        BadContraction: unless ``0 < lam < 1``.
        DuplicateDigits: if two digits coincide.
        ValueError: with fewer than two digits.

    Example:
        >>> make_ifs(0.7, [0.3, 0.0]).digits
        (0.0, 0.3)
    """
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise BadContraction(f"Contraction ratio must lie in (0, 1), got {lam}")
    values = np.sort(np.asarray(digits, dtype=float))
    if len(values) < 2:
        raise ValueError(f"An IFS needs at least two digits, got {list(digits)}")
    if np.any(np.diff(values) == 0):
        raise DuplicateDigits(f"Digits must be distinct, got {list(digits)}")
    values = values - values[0]
    return IFSSystem(lam=lam, digits=tuple(float(v) for v in values))


def bernoulli_ifs(lam: float) -> IFSSystem:
    """Bernoulli convolution system ``lambda x`` and ``lambda x + 1 - lambda`` (hull ``[0, 1]``)."""
    return make_ifs(lam, [0.0, 1.0 - float(lam)])


# ---------- Digit words and covers ----------
def word_points(ifs: IFSSystem, depth: int, word_cap: int | None = None) -> np.ndarray:
    """
    Left ends ``f_w(0) = sum_{j<depth} lambda^j d_{w_j}`` of all digit words of length ``depth``.

    Words are enumerated level by level with outer sums, no recursion.

    Raises:
        DepthCap: if ``ell ** depth`` exceeds the word cap.
    """
    word_cap = config.get("SELF_SIMILAR", "word_cap", word_cap)
    if ifs.ell ** depth > word_cap:
        raise DepthCap(f"{ifs.ell}^{depth} words exceed the cap of {word_cap}")
    digits = np.asarray(ifs.digits)
    points = np.zeros(1)
    for j in range(depth):
        points = (points[:, None] + ifs.lam**j * digits[None, :]).ravel()
    return points


@dataclass(frozen=True)
class AttractorCover:
    intervals: np.ndarray
    lebesgue_est: float
    depth: int

    def to_frame(self) -> pd.DataFrame:
        """Cover as a ``(left, right)`` table for CSV export."""
        return pd.DataFrame({"left": self.intervals[:, 0], "right": self.intervals[:, 1]})


def attractor_cover(ifs: IFSSystem, depth: int, word_cap: int | None = None) -> AttractorCover:
    """
    Union of ``f_w(hull)`` over words of length ``depth``, merged into disjoint intervals.

    The total length over-estimates ``L(K)`` and does not increase with ``depth``.

    Raises:
        DepthCap: if ``ell ** depth`` exceeds the word cap.
    """
    points = word_points(ifs, depth, word_cap)
    width = ifs.lam**depth * ifs.hull_length
    intervals = merge_intervals(np.column_stack((points, points + width)),
                                tol=1e-12 * ifs.hull_length)
    estimate = total_length(intervals)
    logger.debug(f"Cover of {ifs.describe()} at depth {depth}: "
                 f"{len(intervals)} intervals, length {estimate:.6g}")
    return AttractorCover(intervals=intervals, lebesgue_est=estimate, depth=depth)


def image_cover(ifs: IFSSystem, j: int, cover: AttractorCover) -> np.ndarray:
    """``f_j`` applied to every interval of a cover."""
    return ifs.lam * cover.intervals + ifs.digits[j]


def overlap_length(a: np.ndarray, b: np.ndarray) -> float:
    """``L(A cap B)`` of two disjoint interval lists, as ``L(A) + L(B) - L(A cup B)``."""
    union = merge_intervals(np.vstack((a, b)))
    return max(0.0, total_length(a) + total_length(b) - total_length(union))


def cell_masses(ifs: IFSSystem, edges: np.ndarray, depth: int) -> np.ndarray:
    """
    Masses of the grid cells ``[edges[p], edges[p+1])`` from words of length ``depth``.

    Each word carries mass ``ell^-depth`` spread uniformly over ``f_w(hull)``;
    ``lambda^depth * hull`` must not exceed the cell width.
    """
    points = word_points(ifs, depth)
    width = ifs.lam**depth * ifs.hull_length
    step = edges[1] - edges[0]
    n_cells = len(edges) - 1
    index = np.clip(np.floor((points - edges[0]) / step).astype(int), 0, n_cells - 1)
    right_edge = edges[index + 1]
    inside = np.clip((right_edge - points) / width, 0.0, 1.0)
    weight = 1.0 / len(points)
    masses = np.bincount(index, weights=inside * weight, minlength=n_cells)
    spill = np.minimum(index + 1, n_cells - 1)
    masses += np.bincount(spill, weights=(1.0 - inside) * weight, minlength=n_cells)
    return masses


# ---------- Monte-Carlo sampling ----------
def sample_measure(ifs: IFSSystem, n_samples: int, depth: int, seed: int,
                   batch: int | None = None) -> np.ndarray:
    """
    Random points ``sum_{j<depth} lambda^j d_{w_j}`` with i.i.d. uniform digits.

    Batches draw from independent streams spawned from ``seed``, so the
    result depends only on ``(n_samples, depth, seed, batch)``.

    Returns:
        np.ndarray: ``n_samples`` points in ``[0, hull)``.
    """
    batch = int(config.get("SELF_SIMILAR", "mc_batch", batch))
    powers = ifs.lam ** np.arange(depth)
    digits = np.asarray(ifs.digits)
    n_batches = max(1, -(-n_samples // batch))
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    out = np.empty(n_samples)
    for k, stream in enumerate(streams):
        start = k * batch
        size = min(batch, n_samples - start)
        if size <= 0:
            break
        rng = np.random.default_rng(stream)
        words = rng.integers(0, ifs.ell, size=(size, depth))
        out[start:start + size] = digits[words] @ powers
    return out


@lru_cache(maxsize=32)
def sorted_sample(ifs: IFSSystem, n_samples: int, depth: int, seed: int) -> np.ndarray:
    """Cached sorted Monte-Carlo sample; read-only."""
    points = np.sort(sample_measure(ifs, n_samples, depth, seed))
    points.setflags(write=False)
    return points


def empirical_mass(points: np.ndarray, lo: float, hi: float) -> float:
    """Fraction of a sorted sample inside ``[lo, hi)``."""
    count = np.searchsorted(points, hi, side="left") - np.searchsorted(points, lo, side="left")
    return float(count / len(points))


def _mc_params(n_samples, depth, seed):
    return (int(config.get("MEASURES", "mc_samples", n_samples)),
            int(config.get("MEASURES", "mc_depth", depth)),
            int(config.get("MEASURES", "mc_seed", seed)))


# ---------- Mass near zero ----------
def recursion_threshold(ifs: IFSSystem) -> int:
    """
    Smallest ``N >= 1`` with ``lambda^(N-1) < d_2 / lambda``.

    From that level on every shifted preimage ``f_j^-1 [0, lambda^n)``, ``j >= 2``,
    lies left of 0, so ``mu[0, lambda^n) = mu[0, lambda^(n-1)) / ell``.
    """
    target = ifs.digits[1] / ifs.lam
    n = 1
    while ifs.lam ** (n - 1) >= target:
        n += 1
    return n


def mass_near_zero(ifs: IFSSystem, n: int, n_samples: int | None = None,
                   depth: int | None = None, seed: int | None = None) -> float:
    """
    ``mu[0, lambda^n)``.

    For ``n > N`` (see :func:`recursion_threshold`) the value is
    ``ell^-(n-N) mu[0, lambda^N)`` with the last factor from Monte-Carlo;
    otherwise it is a direct Monte-Carlo estimate.
    """
    n_samples, depth, seed = _mc_params(n_samples, depth, seed)
    points = sorted_sample(ifs, n_samples, depth, seed)
    threshold = recursion_threshold(ifs)
    if n > threshold:
        base = empirical_mass(points, 0.0, ifs.lam**threshold)
        return float(ifs.ell) ** -(n - threshold) * base
    return empirical_mass(points, 0.0, ifs.lam**n)


def mass_decay_table(ifs: IFSSystem, n_values, n_samples: int | None = None,
                     depth: int | None = None, seed: int | None = None) -> pd.DataFrame:
    """
    Ratios ``mu[0, lambda^(n+1)) / mu[0, lambda^n)`` by recursion and by Monte-Carlo.

    The Monte-Carlo ratio is a binomial proportion of nested counts, so its
    standard error is ``sqrt(r (1 - r) / count_n)`` with ``r = 1/ell``.

    Returns:
        pd.DataFrame: columns ``n, lambda_n, mass, ratio, count_mc, ratio_mc, sigma_mc``.
    """
    n_samples, depth, seed = _mc_params(n_samples, depth, seed)
    points = sorted_sample(ifs, n_samples, depth, seed)
    threshold = recursion_threshold(ifs)
    r = 1.0 / ifs.ell
    rows = []
    for n in n_values:
        mass = mass_near_zero(ifs, n, n_samples, depth, seed)
        mass_next = mass_near_zero(ifs, n + 1, n_samples, depth, seed)
        count = int(np.searchsorted(points, ifs.lam**n, side="left"))
        count_next = int(np.searchsorted(points, ifs.lam ** (n + 1), side="left"))
        rows.append({
            "n": n,
            "lambda_n": ifs.lam**n,
            "mass": mass,
            "ratio": mass_next / mass if mass > 0 else np.nan,
            "by_recursion": n >= threshold,
            "count_mc": count,
            "ratio_mc": count_next / count if count > 0 else np.nan,
            "sigma_mc": math.sqrt(r * (1 - r) / count) if count > 0 else np.nan,
        })
    return pd.DataFrame(rows)


# ---------- Lower density at 0 and tile verdict ----------
def _decays(ifs: IFSSystem, depth: int, word_cap=None):
    """Cover lengths at ``depth // 2`` and ``depth`` and whether they shrink below the singular ratio."""
    ratio = config.get("SELF_SIMILAR", "singular_ratio")
    coarse = attractor_cover(ifs, max(1, depth // 2), word_cap).lebesgue_est
    fine = attractor_cover(ifs, depth, word_cap).lebesgue_est
    return coarse, fine, fine <= ratio * coarse


@dataclass(frozen=True)
class LowerDensityCheck:
    table: pd.DataFrame
    c_est: float
    vacuous: bool


def lemma41_check(ifs: IFSSystem, n_max: int, depth: int | None = None) -> LowerDensityCheck:
    """
    Sequence ``L(K cap [0, lambda^n)) / lambda^n`` for ``n = 0..n_max`` from the depth cover.

    The check is vacuous (flagged and logged, not raised) when the cover
    length collapses between ``depth // 2`` and ``depth``, i.e. ``L(K) = 0``.

    Returns:
        LowerDensityCheck: table ``n, lebesgue, ratio, running_min``, ``c_est`` and the flag.
    """
    depth = int(config.get("SELF_SIMILAR", "default_depth", depth))
    if n_max > depth:
        logger.warning(f"n_max={n_max} exceeds the cover depth {depth}; late terms are resolution-limited")
    coarse, fine, vacuous = _decays(ifs, depth)
    cover = attractor_cover(ifs, depth)
    rows = []
    for n in range(n_max + 1):
        scale = ifs.lam**n
        length = total_length(clip_intervals(cover.intervals, 0.0, scale))
        rows.append({"n": n, "lebesgue": length, "ratio": length / scale})
    table = pd.DataFrame(rows)
    table["running_min"] = table["ratio"].cummin()
    c_est = float(table["ratio"].min())
    if vacuous:
        logger.warning(f"Cover of {ifs.describe()} shrinks from {coarse:.3g} to {fine:.3g}; "
                       f"the lower density check is vacuous")
    return LowerDensityCheck(table=table, c_est=c_est, vacuous=bool(vacuous))


@dataclass(frozen=True)
class TileVerdict:
    verdict: str
    evidence: dict


def tile_verdict(ifs: IFSSystem, depth: int | None = None,
                 absolutely_continuous: bool | None = None) -> TileVerdict:
    """
    Classify an IFS as ``Tile``, ``NotTile_ContractionMismatch``, ``NotTile_Overlap`` or ``Singular``.

    Rules, in order:
        - ``lambda < 1/ell``: ``Singular``.
        - the regime: ``absolutely_continuous`` when given, otherwise a cover
          length that does not collapse; a singular regime gives ``Singular``.
        - ``lambda != 1/ell``: ``NotTile_ContractionMismatch``.
        - pairwise overlaps of ``f_i(cover)`` above ``overlap_threshold * L(cover)``:
          ``NotTile_Overlap``; otherwise ``Tile``.

    ``evidence["regime_source"]`` is ``"flag"`` or ``"cover"``.
    """
    depth = int(config.get("SELF_SIMILAR", "default_depth", depth))
    threshold = config.get("SELF_SIMILAR", "overlap_threshold")
    evidence = {"ifs": ifs.describe(), "depth": depth, "lambda_ell": ifs.lam * ifs.ell}

    if ifs.lam * ifs.ell < 1 and not ifs.is_equal_contraction:
        evidence["reason"] = "lambda < 1/ell"
        return _verdict(SINGULAR, evidence)

    coarse, fine, collapses = _decays(ifs, depth)
    evidence.update({"lebesgue_coarse": coarse, "lebesgue_fine": fine, "cover_collapses": collapses})
    if absolutely_continuous is None:
        evidence["regime_source"] = "cover"
        absolutely_continuous = not collapses
    else:
        evidence["regime_source"] = "flag"
    if not absolutely_continuous:
        evidence["reason"] = ("cover length collapses" if evidence["regime_source"] == "cover"
                              else "singular regime given")
        return _verdict(SINGULAR, evidence)

    if not ifs.is_equal_contraction:
        evidence["reason"] = "lambda != 1/ell"
        return _verdict(NOT_TILE_CONTRACTION, evidence)

    overlaps = {}
    for d in (max(1, depth // 2), depth):
        cover = attractor_cover(ifs, d)
        images = [image_cover(ifs, j, cover) for j in range(ifs.ell)]
        overlaps[d] = sum(overlap_length(images[i], images[j])
                          for i in range(ifs.ell) for j in range(i + 1, ifs.ell))
    evidence["overlap"] = {str(d): v for d, v in overlaps.items()}
    if overlaps[depth] <= threshold * fine:
        return _verdict(TILE, evidence)
    evidence["reason"] = "pieces overlap in positive measure"
    return _verdict(NOT_TILE_OVERLAP, evidence)


def _verdict(verdict: str, evidence: dict) -> TileVerdict:
    logger.info(f"Tile verdict for {evidence['ifs']}: {verdict}")
    return TileVerdict(verdict, evidence)


# ---------- Density estimates ----------
def ifs_density_estimate(ifs: IFSSystem, x_grid, n_terms: int, tol: float = 1e-10) -> pd.DataFrame:
    """
    Density of ``mu`` from its Fourier coefficients on the hull.

    The hull ``[0, H]`` is rescaled to ``[0, 1]``; the periodization
    ``sum_{|n|<=n_terms} mu^(n/H) exp(2 pi i n x / H) / H`` equals the density
    almost everywhere inside the hull.

    Returns:
        pd.DataFrame: columns ``x, density, imag``; ``imag`` is a sanity residual.
    """
    from framelab.fourier import ifs_transform

    if n_terms < 8:
        raise ValueError(f"n_terms must be at least 8, got {n_terms}")
    x = np.asarray(x_grid, dtype=float)
    H = ifs.hull_length
    n = np.arange(-n_terms, n_terms + 1)
    coefficients, _, _ = ifs_transform(ifs, n / H, tol)
    series = np.exp(2j * np.pi * np.outer(x / H, n)) @ coefficients / H
    return pd.DataFrame({"x": x, "density": series.real, "imag": series.imag})


def bernoulli_density_estimate(lam: float, x_grid, n_terms: int, tol: float = 1e-10) -> pd.DataFrame:
    """
    Density estimate of the Bernoulli convolution ``nu_lambda`` on ``(0, 1)``.

    Raises:
        UnsupportedLambda: unless ``1/2 <= lam < 1``.
    """
    if not 0.5 <= lam < 1.0:
        raise UnsupportedLambda(f"Bernoulli density estimate needs lambda in [1/2, 1), got {lam}")
    return ifs_density_estimate(bernoulli_ifs(lam), x_grid, n_terms, tol)


def self_similarity_residuals(ifs: IFSSystem, intervals, n_samples: int | None = None,
                              depth: int | None = None, seed: int | None = None) -> pd.DataFrame:
    """
    Monte-Carlo check of ``mu(E) = (1/ell) sum_j mu(f_j^-1 E)`` on two independent samples.

    ``mu(E)`` is counted on a sample drawn with ``seed + 1``; the right side
    counts the preimages ``f_j^-1 E = [(lo - d_j) / lambda, (hi - d_j) / lambda)``
    on a sample drawn with ``seed``. A sampler that is not ``mu``-distributed
    breaks the identity instead of cancelling out of it.

    Returns:
        pd.DataFrame: columns ``lo, hi, mu_E, rhs, residual, sigma``; ``sigma``
        combines the standard errors of both estimates.
    """
    n_samples, depth, seed = _mc_params(n_samples, depth, seed)
    y = sample_measure(ifs, n_samples, depth, seed)
    z = np.sort(sample_measure(ifs, n_samples, depth, seed + 1))
    rows = []
    for lo, hi in intervals:
        mu_e = empirical_mass(z, lo, hi)
        pre_lo, pre_hi = ifs.preimages(lo, hi)
        hits = ((y[:, None] >= pre_lo) & (y[:, None] < pre_hi)).mean(axis=1)
        rhs = float(hits.mean())
        sigma = math.sqrt((mu_e * (1 - mu_e) + hits.var(ddof=1)) / n_samples)
        rows.append({"lo": lo, "hi": hi, "mu_E": mu_e, "rhs": rhs,
                     "residual": mu_e - rhs, "sigma": sigma})
    return pd.DataFrame(rows)
