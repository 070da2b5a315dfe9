"""Pure-numpy kernel implementations for the solver hot path.

The signal amplitudes are modeled as real in-phase values, so every
least-squares problem is solved on the real-stacked system (real and
imaginary rows of the steering matrix against the stacked observation).
This doubles the residual degrees of freedom relative to a complex
solve and is what gives single-snapshot support decisions their
discrimination margin.

The compiled extension in ``_core`` implements the same contracts; the
two are interchangeable and cross-checked by the test suite.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

DEG = np.pi / 180.0


def build_ab(num_elements: int, spacing: float, thetas: np.ndarray):
    """Steering matrix and its per-degree derivative for a list of angles.

    Returns
    -------
    (A, B) : complex ndarrays of shape (M, K)
    """
    thetas = np.asarray(thetas, dtype=float)
    m = np.arange(num_elements)[:, None]
    phase = -2.0 * np.pi * spacing * m * np.sin(thetas[None, :] * DEG)
    a = np.exp(1j * phase)
    rate = -2j * np.pi * spacing * m * np.cos(thetas[None, :] * DEG) * DEG
    return a, rate * a


def ls_solve(a: np.ndarray, y: np.ndarray):
    """Real-amplitude least squares on the stacked system.

    Returns
    -------
    x : real amplitudes, shape (K,)
    res : l2 norm of the stacked residual
    rank : numerical rank of the stacked matrix
    """
    ar = np.vstack([a.real, a.imag])
    yr = np.concatenate([y.real, y.imag])
    x, _, rank, _ = np.linalg.lstsq(ar, yr, rcond=None)
    return x, float(np.linalg.norm(yr - ar @ x)), int(rank)


def residual(a: np.ndarray, y: np.ndarray) -> float:
    """Residual norm of the real-amplitude LS fit."""
    return ls_solve(a, y)[1]


def eval_support(a: np.ndarray, b: np.ndarray, y: np.ndarray):
    """Fused LS fit plus pseudo-derivative for one support.

    The pseudo-derivative solves the scaled-derivative system
    ``B*diag(x)`` against the fit residual in the real-stacked sense,
    which reproduces the closed form Re(Bh'Bh)^-1 Re(Bh'r).

    Returns
    -------
    x : real amplitudes (K,)
    res : residual norm
    beta : per-element angular bias estimate, degrees (K,)
    rank : min of the two system ranks
    """
    ar = np.vstack([a.real, a.imag])
    yr = np.concatenate([y.real, y.imag])
    x, _, rank_a, _ = np.linalg.lstsq(ar, yr, rcond=None)
    rvec = yr - ar @ x
    res = float(np.linalg.norm(rvec))
    bh = b * x[None, :]
    br = np.vstack([bh.real, bh.imag])
    beta, _, rank_b, _ = np.linalg.lstsq(br, rvec, rcond=None)
    return x, res, beta, int(min(rank_a, rank_b))


def beta_proj(a: np.ndarray, b: np.ndarray, y: np.ndarray, lam: float):
    """Projected ridge pseudo-derivative for off-grid refinement.

    The scaled derivative columns are first orthogonalized against the
    steering columns so the bias update cannot be absorbed by an
    amplitude change; ``lam`` is a ridge weight damping the update
    where the geometry is ill-posed.

    Returns
    -------
    beta : (K,) degrees
    x : real amplitudes (K,)
    res : residual norm of the LS fit
    rank : numerical rank of the steering system
    """
    ar = np.vstack([a.real, a.imag])
    yr = np.concatenate([y.real, y.imag])
    k = a.shape[1]
    bh = b  # scaled below once x is known
    x, _, rank_a, _ = np.linalg.lstsq(ar, yr, rcond=None)
    rvec = yr - ar @ x
    res = float(np.linalg.norm(rvec))
    bh = b * x[None, :]
    br = np.vstack([bh.real, bh.imag])
    coef, _, _, _ = np.linalg.lstsq(ar, br, rcond=None)
    bp = br - ar @ coef
    gram = bp.T @ bp + lam * np.eye(k)
    rhs = bp.T @ rvec
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        beta, _, _, _ = np.linalg.lstsq(gram, rhs, rcond=None)
    return beta, x, res, int(rank_a)


def bartlett(a_grid: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Single-snapshot spatial spectrum |a(theta)^H y|^2 over the grid."""
    return np.abs(a_grid.conj().T @ y) ** 2
