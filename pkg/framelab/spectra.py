"""
Finite frequency sets: generators, Beurling densities, separation and cell selection.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import optimize

from framelab.errors import (
    DescriptorError,
    EmptyCell,
    JitterTooLarge,
    NoPositiveEpsilon,
    WindowTooSmall,
)
from framelab.settings import config
from framelab.utils.descriptors import Descriptor, as_float, as_int, parse_descriptor
from framelab.utils.reporting import read_numeric_csv, write_csv

logger = logging.getLogger(__name__)

# relative slack when deciding whether a lattice point sits on a window end
_EDGE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Sorted distinct frequencies truncated to a window.

    Attributes:
        points (np.ndarray): strictly increasing, read-only.
        window (tuple): ``(lo, hi)`` the set was generated or truncated to.
        provenance (str): generator descriptor, including its seed.
        anchors (np.ndarray | None): lattice position each jittered point was moved from.
    """

    points: np.ndarray
    window: tuple
    provenance: str = "points"
    half_open: bool = field(default=False)
    anchors: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def width(self) -> float:
        return self.window[1] - self.window[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"frequency": self.points})

    def __repr__(self):
        return f"Spectrum({self.provenance}, n={len(self)}, window={self.window})"


def from_points(points, window=None, provenance: str = "points", half_open: bool = False) -> Spectrum:
    """Spectrum from arbitrary points: sorted and deduplicated; the window defaults to the point range."""
    values = np.unique(np.asarray(points, dtype=float))
    if window is None:
        window = (float(values[0]), float(values[-1])) if len(values) else (0.0, 0.0)
    lo, hi = float(window[0]), float(window[1])
    if len(values) and (values[0] < lo or values[-1] > hi):
        raise ValueError(f"Points exceed the window {(lo, hi)}")
    values.setflags(write=False)
    return Spectrum(points=values, window=(lo, hi), provenance=provenance, half_open=half_open)


def _index_range(alpha: float, offset: float, window, half_open: bool):
    lo, hi = window
    k_lo = math.ceil((lo - offset) / alpha - _EDGE_SLACK)
    if half_open:
        k_hi = math.ceil((hi - offset) / alpha - _EDGE_SLACK) - 1
    else:
        k_hi = math.floor((hi - offset) / alpha + _EDGE_SLACK)
    return np.arange(k_lo, k_hi + 1)


def _check_window(window):
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"Window must satisfy lo < hi, got {window}")
    return lo, hi


def lattice(alpha: float, offset: float = 0.0, window=(-100.0, 100.0), half_open: bool = False) -> Spectrum:
    """
    ``{alpha k + offset : k in Z}`` inside the window.

    Args:
        alpha (float): spacing, positive.
        offset (float): shift.
        window (tuple): ``[lo, hi]``; ``[lo, hi)`` when ``half_open``.

    Example:
        >>> lattice(2, 0.3, (0, 6)).points
        array([0.3, 2.3, 4.3])
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    window = _check_window(window)
    k = _index_range(alpha, offset, window, half_open)
    points = np.clip(alpha * k + offset, *window)
    return from_points(points, window, f"lattice({alpha!r},{offset!r})", half_open)


def _zigzag(k: np.ndarray) -> np.ndarray:
    """Map integers to nonnegative integers: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    return np.where(k >= 0, 2 * k, -2 * k - 1)


def jittered_lattice(alpha: float, max_jitter: float, seed: int, window=(-100.0, 100.0),
                     half_open: bool = False) -> Spectrum:
    """
    Lattice with every point moved by a pseudo-random amount in ``[-max_jitter, max_jitter]``.

    The shift of the point with index ``k`` comes from its own stream
    ``default_rng([seed, zigzag(k)])``, so it does not depend on the window.
    The recorded window is padded by ``max_jitter``.

    Raises:
        JitterTooLarge: unless ``0 <= max_jitter < alpha / 2``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if not 0 <= max_jitter < alpha / 2:
        raise JitterTooLarge(f"max_jitter must lie in [0, {alpha / 2}), got {max_jitter}")
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    lo, hi = _check_window(window)
    k = _index_range(alpha, 0.0, (lo, hi), half_open)
    shifts = np.array([np.random.default_rng([int(seed), int(z)]).uniform(-max_jitter, max_jitter)
                       for z in _zigzag(k)]) if max_jitter > 0 else np.zeros(len(k))
    points = alpha * k + shifts
    padded = (lo - max_jitter, hi + max_jitter)
    s = from_points(points, padded, f"jitter({alpha!r},{max_jitter!r},seed={seed})", half_open)
    # shifts below alpha/2 keep the lattice order
    anchors = alpha * k.astype(float)
    anchors.setflags(write=False)
    return replace(s, anchors=anchors)


def union(*spectra: Spectrum) -> Spectrum:
    """Union of spectra; the window is the hull of their windows."""
    if not spectra:
        raise ValueError("union needs at least one spectrum")
    lo = min(s.window[0] for s in spectra)
    hi = max(s.window[1] for s in spectra)
    points = np.concatenate([s.points for s in spectra])
    provenance = "union(" + ",".join(s.provenance for s in spectra) + ")"
    return from_points(points, (lo, hi), provenance, all(s.half_open for s in spectra))


def scaled(s: Spectrum, alpha: float) -> Spectrum:
    """``alpha * s`` for ``alpha > 0``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return from_points(s.points * alpha, (s.window[0] * alpha, s.window[1] * alpha),
                       f"scaled({s.provenance},{alpha!r})", s.half_open)


def restrict(s: Spectrum, lo: float, hi: float, half_open: bool = False,
             whole_cells: bool = False) -> Spectrum:
    """
    Points of ``s`` inside ``[lo, hi]`` (``[lo, hi)`` when ``half_open``).

    With ``whole_cells`` a jittered point is kept when its lattice anchor is
    inside, so no jitter cell is split at the ends; the window is padded by
    the largest shift.
    """
    anchored = whole_cells and s.anchors is not None
    if anchored:
        key = s.anchors
        slack = _EDGE_SLACK * max(1.0, abs(lo), abs(hi))
        keep = (key >= lo - slack) & ((key < hi - slack) if half_open else (key <= hi + slack))
        pad = float(np.max(np.abs(s.points - s.anchors))) if len(s) else 0.0
        window = (lo - pad, hi + pad)
    else:
        upper = s.points < hi if half_open else s.points <= hi
        keep = (s.points >= lo) & upper
        window = (lo, hi)
    out = from_points(s.points[keep], window, s.provenance, half_open)
    if s.anchors is None:
        return out
    anchors = s.anchors[keep]
    anchors.setflags(write=False)
    return replace(out, anchors=anchors)


def dyadic(n: int) -> Spectrum:
    """``{0} u {2^-j : j = 1..n}``, a set with no positive separation in the limit."""
    points = np.concatenate(([0.0], 2.0 ** -np.arange(1, n + 1)))
    return from_points(points, (0.0, 0.5), f"dyadic({n})")


def write_spectrum_csv(s: Spectrum, path) -> Path:
    return write_csv(s.to_frame(), path)


def read_spectrum_csv(path, window=None) -> Spectrum:
    """Spectrum from a CSV with one frequency per row (header optional)."""
    try:
        values = read_numeric_csv(path, 1).iloc[:, 0].to_numpy()
    except Exception as e:
        logger.error(f"Cannot read spectrum {path}: {e}")
        raise DescriptorError(f"Cannot read spectrum {path}: {e}") from e
    if len(values) == 0:
        raise DescriptorError(f"No frequencies in {path}")
    return from_points(values, window, f"csv({path})")


def parse_spectrum(text, window=(-100.0, 100.0), half_open: bool = False,
                   seed: int | None = None) -> Spectrum:
    """
    Spectrum from a config descriptor.

    Supported: ``lattice(alpha, offset)``, ``jitter(alpha, max_jitter, seed=s)``,
    ``union(...)``, ``points(x1, x2, ...)``, ``dyadic(n)``, ``csv(path)``.
    Generators accept ``window=[lo, hi]`` and ``half_open=True`` keywords that
    override the defaults passed in; ``seed`` is the jitter seed when the
    descriptor names none.

    Raises:
        DescriptorError: for unknown names or malformed arguments.
    """
    seed = config.SEED if seed is None else seed
    d = parse_descriptor(text) if isinstance(text, str) else text
    if not isinstance(d, Descriptor):
        raise DescriptorError(f"Expected a spectrum descriptor, got {d!r}")
    if "window" in d.kwargs:
        w = d.kwargs["window"]
        if not isinstance(w, list) or len(w) != 2:
            raise DescriptorError(f"window must be [lo, hi], got {w!r}")
        window = (as_float(w[0], "window lo"), as_float(w[1], "window hi"))
    half_open = bool(d.kwargs.get("half_open", half_open))

    if d.name == "lattice":
        return lattice(as_float(d.arg(0, "alpha", 1.0), "lattice alpha"),
                       as_float(d.arg(1, "offset", 0.0), "lattice offset"), window, half_open)
    if d.name == "jitter":
        return jittered_lattice(as_float(d.arg(0, "alpha", 1.0), "jitter alpha"),
                                as_float(d.arg(1, "max_jitter", 0.0), "jitter amplitude"),
                                as_int(d.arg(2, "seed", seed), "jitter seed"),
                                window, half_open)
    if d.name == "union":
        if not d.args:
            raise DescriptorError("union needs at least one member")
        return union(*(parse_spectrum(member, window, half_open, seed) for member in d.args))
    if d.name == "points":
        values = d.args[0] if len(d.args) == 1 and isinstance(d.args[0], list) else list(d.args)
        return from_points([as_float(v, "point") for v in values], provenance=str(d))
    if d.name == "dyadic":
        return dyadic(as_int(d.arg(0, "n", 20), "dyadic n"))
    if d.name == "csv":
        return read_spectrum_csv(d.arg(0, "path"))
    raise DescriptorError(f"Unknown spectrum descriptor '{d}'")


# ---------- Beurling density ----------
@dataclass(frozen=True)
class DensityReport:
    """
    Sliding-window counts and the resulting density estimates.

    ``sup_counts[i]`` and ``inf_counts[i]`` are the extreme values of
    ``#(s cap [x, x + h)) / h`` for ``h = h_values[i]``.
    """

    h_values: list
    sup_counts: list
    inf_counts: list
    d_plus_est: float
    d_minus_est: float
    separation_delta: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"h": self.h_values, "sup": self.sup_counts, "inf": self.inf_counts})


def window_counts(s: Spectrum, h: float, x_step_factor: float) -> np.ndarray:
    """Counts of ``s`` in ``[x, x + h)`` for ``x`` sliding over the window in steps ``h * x_step_factor``."""
    lo, hi = s.window
    starts = np.arange(lo, hi - h, h * x_step_factor)
    starts = np.append(starts, hi - h)
    return (np.searchsorted(s.points, starts + h, side="left")
            - np.searchsorted(s.points, starts, side="left"))


def beurling_density(s: Spectrum, h_list, x_step_factor: float | None = None) -> DensityReport:
    """
    Upper and lower Beurling density estimates from sliding half-open windows.

    Args:
        s (Spectrum): spectrum.
        h_list (list): window sizes, each at most half the spectrum window width.
        x_step_factor (float): slide step as a fraction of ``h``, at most 1/4.

    Returns:
        DensityReport: per-``h`` extremes; ``D+`` and ``D-`` are read at the largest ``h``.

    Raises:
        WindowTooSmall: if some ``h`` exceeds half the window width.
    """
    x_step_factor = config.get("SPECTRA", "x_step_factor", x_step_factor)
    if not 0 < x_step_factor <= 0.25:
        raise ValueError(f"x_step_factor must lie in (0, 1/4], got {x_step_factor}")
    h_values = sorted(float(h) for h in h_list)
    if not h_values or h_values[0] <= 0:
        raise ValueError(f"h_list must hold positive sizes, got {list(h_list)}")
    if h_values[-1] > s.width / 2:
        raise WindowTooSmall(f"h={h_values[-1]} exceeds half the window width {s.width}")

    sups, infs = [], []
    for h in h_values:
        counts = window_counts(s, h, x_step_factor)
        sups.append(float(counts.max() / h))
        infs.append(float(counts.min() / h))
    delta = separation(s).delta if len(s) >= 2 else math.inf
    report = DensityReport(h_values, sups, infs, sups[-1], infs[-1], delta)
    logger.info(f"Beurling density of {s.provenance}: D+={report.d_plus_est:.6g} "
                f"D-={report.d_minus_est:.6g} at h={h_values[-1]}")
    return report


# ---------- Separation ----------
@dataclass(frozen=True)
class SeparationReport:
    delta: float
    is_union_of_k_separated: dict
    pieces: int
    gap: float


def separation(s: Spectrum, gap: float | None = None, max_pieces: int | None = None) -> SeparationReport:
    """
    Minimal gap and a greedy split into subsets with gaps at least ``gap``.

    Points are placed, left to right, into the first subset whose last point
    is at least ``gap`` behind. ``is_union_of_k_separated[k]`` is True when the
    split needs at most ``k`` subsets.
    """
    gap = float(config.get("SPECTRA", "separation_gap", gap))
    max_pieces = int(config.get("SPECTRA", "max_pieces", max_pieces))
    if len(s) < 2:
        raise ValueError("separation needs at least two points")
    delta = float(np.min(np.diff(s.points)))
    slack = 1e-12 * max(1.0, gap)
    last = []
    for p in s.points:
        for i, q in enumerate(last):
            if p - q >= gap - slack:
                last[i] = p
                break
        else:
            last.append(p)
            if len(last) > max_pieces:
                break
    pieces = len(last)
    flags = {k: pieces <= k for k in range(1, max_pieces + 1)}
    logger.debug(f"Separation of {s.provenance}: delta={delta:.3g}, greedy pieces={pieces} at gap {gap}")
    return SeparationReport(delta, flags, pieces, gap)


# ---------- Cell selection ----------
def cube_selector(s: Spectrum, L: float) -> Spectrum:
    """
    Leftmost point of ``s`` in every cell ``gamma + [-L/2, L/2)``, ``gamma in L Z``, meeting the window.

    Raises:
        EmptyCell: naming the first cell without a point.
    """
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    lo, hi = s.window
    k_min = math.floor((lo - L / 2) / L) + 1
    k_max = math.ceil((hi + L / 2) / L) - 1
    gammas = L * np.arange(k_min, k_max + 1)
    idx = np.searchsorted(s.points, gammas - L / 2, side="left")
    found = idx < len(s.points)
    found[found] = s.points[idx[found]] < gammas[found] + L / 2
    if not found.all():
        raise EmptyCell(float(gammas[np.argmin(found)]), L)
    return from_points(s.points[idx], s.window, f"cube_selector({s.provenance},L={L!r})", s.half_open)


# ---------- Perturbation radius ----------
E_QUARTER = math.expm1(0.25)


def perturbation_constant(epsilon: float) -> float:
    """``(e^(1/4) - 1)(e^(4 pi^2 eps^2) - 1)``."""
    return E_QUARTER * math.expm1(4 * math.pi**2 * epsilon**2)


@dataclass(frozen=True)
class EpsilonResult:
    epsilon: float
    constants_trace: dict


def epsilon_for_frame(bessel_B: float, margin: float | None = None, xtol: float | None = None) -> EpsilonResult:
    """
    Largest ``eps`` with ``c(eps) <= 1/2 - margin`` and ``sqrt(B) c(eps) <= 1/2 - margin``.

    ``c(eps) = (e^(1/4) - 1)(e^(4 pi^2 eps^2) - 1)`` in both inequalities. The
    root is bracketed and bisected to ``xtol``; the returned value satisfies
    both inequalities when substituted back.

    Raises:
        ValueError: if ``bessel_B < 1``.
        NoPositiveEpsilon: if no positive radius works (``margin >= 1/2``).
    """
    margin = float(config.get("SPECTRA", "epsilon_margin", margin))
    xtol = float(config.get("SPECTRA", "epsilon_xtol", xtol))
    if not bessel_B >= 1:
        raise ValueError(f"bessel_B must be at least 1, got {bessel_B}")
    target = 0.5 - margin
    if target <= 0:
        raise NoPositiveEpsilon(f"margin {margin} leaves no room below 1/2")

    scale = max(1.0, math.sqrt(bessel_B))

    def excess(eps):
        return scale * perturbation_constant(eps) - target

    upper = 0.1
    while excess(upper) <= 0:
        upper *= 2
    root = optimize.bisect(excess, 0.0, upper, xtol=xtol)
    while excess(root) > 0 and root > 0:
        root -= xtol
    if not root > 0:
        raise NoPositiveEpsilon(f"No positive epsilon for B={bessel_B}")

    c = perturbation_constant(root)
    trace = {
        "bessel_B": bessel_B,
        "margin": margin,
        "xtol": xtol,
        "c_eps": c,
        "lhs_first": c,
        "lhs_second": math.sqrt(bessel_B) * c,
        "rhs": target,
        "bessel_intermediate": (1 + math.sqrt(c)) ** 2,
        "lower_bound_guaranteed": (0.5 - math.sqrt(bessel_B) * c) ** 2,
    }
    logger.info(f"epsilon_for_frame(B={bessel_B}) = {root:.9f}")
    return EpsilonResult(root, trace)
