"""
Extreme eigenvalues of Hermitian positive semidefinite matrices.

Three solvers are available:
    - ``dense``: LAPACK through ``numpy.linalg.eigvalsh``.
    - ``jacobi``: cyclic Jacobi rotations on the real symmetric embedding.
    - ``power``: power iteration for the top eigenvalue, then on ``B I - S``
      for the bottom one.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from framelab.errors import EigenNoConvergence
from framelab.settings import config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EigenResult:
    lowest: float
    highest: float
    method: str
    iterations: int = 0
    residuals: tuple = field(default_factory=tuple)


def real_embedding(S: np.ndarray) -> np.ndarray:
    """
    Real symmetric matrix ``[[Re S, -Im S], [Im S, Re S]]`` of a Hermitian ``S``.

    Every eigenvalue of ``S`` appears twice in the embedding.
    """
    re, im = np.real(S), np.imag(S)
    return np.block([[re, -im], [im, re]])


def jacobi_eigenvalues(A: np.ndarray, tol: float | None = None, max_sweeps: int | None = None):
    """
    All eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Args:
        A (np.ndarray): real symmetric matrix (copied, never modified).
        tol (float): stop once the off-diagonal Frobenius norm is below
            ``tol * max(1, ||A||_F)``.
        max_sweeps (int): number of full sweeps over all ``(p, q)`` pairs.

    Returns:
        tuple[np.ndarray, int, float]: sorted eigenvalues, sweeps used, final off-diagonal norm.

    Raises:
        EigenNoConvergence: if the off-diagonal norm is still above tolerance.
    """
    tol = config.get("FRAMES", "jacobi_tol", tol)
    max_sweeps = config.get("FRAMES", "jacobi_max_sweeps", max_sweeps)

    A = np.array(A, dtype=float, copy=True)
    n = A.shape[0]
    scale = max(1.0, float(np.linalg.norm(A)))

    def off_norm():
        return float(np.sqrt(max(0.0, np.sum(A * A) - np.sum(np.diag(A) ** 2))))

    off = off_norm()
    sweeps = 0
    while off > tol * scale:
        if sweeps >= max_sweeps:
            raise EigenNoConvergence(
                f"Jacobi stopped after {sweeps} sweeps with off-diagonal norm {off:.3e}")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
        sweeps += 1
        off = off_norm()
        logger.debug(f"Jacobi sweep {sweeps}: off-diagonal norm {off:.3e}")

    return np.sort(np.diag(A)), sweeps, off


def hermitian_jacobi_eigenvalues(S: np.ndarray, tol=None, max_sweeps=None):
    """Eigenvalues of a Hermitian matrix via its real embedding, one copy of each."""
    if np.iscomplexobj(S) and np.any(np.imag(S) != 0):
        values, sweeps, off = jacobi_eigenvalues(real_embedding(S), tol, max_sweeps)
        # each eigenvalue is doubled in the embedding
        return values[::2], sweeps, off
    return jacobi_eigenvalues(np.real(S), tol, max_sweeps)


def power_iteration(S: np.ndarray, tol: float | None = None, max_iter: int | None = None,
                    seed: int = 0):
    """
    Largest eigenvalue of a Hermitian positive semidefinite matrix.

    Iterates until the relative residual ``||S v - theta v|| / |theta|`` is at most ``tol``.

    Returns:
        tuple[float, int, float]: eigenvalue estimate, iterations, relative residual.

    Raises:
        EigenNoConvergence: after ``max_iter`` iterations.
    """
    tol = config.get("FRAMES", "power_tol", tol)
    max_iter = config.get("FRAMES", "power_max_iter", max_iter)

    n = S.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    theta, residual = 0.0, np.inf
    for it in range(1, max_iter + 1):
        w = S @ v
        theta = float(np.real(np.vdot(v, w)))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0, it, 0.0
        residual = float(np.linalg.norm(w - theta * v)) / max(abs(theta), np.finfo(float).tiny)
        if residual <= tol:
            return theta, it, residual
        v = w / norm_w
    raise EigenNoConvergence(
        f"Power iteration stopped after {max_iter} iterations with residual {residual:.3e}")


def extreme_eigenvalues(S: np.ndarray, method: str = "auto", dense_cap: int | None = None,
                        seed: int = 0) -> EigenResult:
    """
    Smallest and largest eigenvalue of a Hermitian PSD matrix.

    Args:
        S (np.ndarray): Hermitian matrix.
        method (str): ``auto`` (dense up to ``dense_cap``, power above), ``dense``,
            ``jacobi`` or ``power``.
        dense_cap (int): largest size handled by the full solvers under ``auto``.
        seed (int): start vector seed of the power iteration.

    Returns:
        EigenResult
    """
    dense_cap = config.get("FRAMES", "dense_cap", dense_cap)
    n = S.shape[0]
    if method == "auto":
        method = "dense" if n <= dense_cap else "power"

    if method == "dense":
        values = np.linalg.eigvalsh(S)
        return EigenResult(float(values[0]), float(values[-1]), "dense")

    if method == "jacobi":
        values, sweeps, off = hermitian_jacobi_eigenvalues(S)
        return EigenResult(float(values[0]), float(values[-1]), "jacobi", sweeps, (off,))

    if method == "power":
        top, it_top, res_top = power_iteration(S, seed=seed)
        shifted = top * np.eye(n) - S
        gap, it_low, res_low = power_iteration(shifted, seed=seed + 1)
        return EigenResult(top - gap, top, "power", it_top + it_low, (res_top, res_low))

    raise ValueError(f"Unknown eigen method: {method}")


def rayleigh_quotient(S: np.ndarray, v: np.ndarray) -> float:
    """``Re(v* S v) / (v* v)``; for Hermitian ``S`` the value lies between its extreme eigenvalues."""
    v = np.asarray(v)
    return float(np.real(np.vdot(v, S @ v)) / np.real(np.vdot(v, v)))
