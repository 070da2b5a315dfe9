"""Reference estimators and bounds: OMP, exhaustive DML, and the CRLB.

These serve as comparison curves in the benchmarks and as independent
oracles in the tests. They deliberately share no solver code with the
SAPD estimator.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .array_model import ArrayConfig, Scene, manifold, steering_derivative

BASELINE_GRID_STEP = 0.5


@dataclass(frozen=True)
class BaselineResult:
    """Estimate from a reference method."""

    method: str
    angles: tuple
    residual: float
    elapsed: float

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "angles_deg": list(self.angles),
            "residual": self.residual,
            "elapsed_us": self.elapsed * 1e6,
        }


def _fine_grid(cfg: ArrayConfig, step: float) -> np.ndarray:
    n = int(np.floor((cfg.grid_max - cfg.grid_min) / step)) + 1
    return cfg.grid_min + step * np.arange(n)


@lru_cache(maxsize=8)
def _dictionary(cfg: ArrayConfig, step: float):
    grid = _fine_grid(cfg, step)
    a = manifold(cfg, grid)
    return grid, a


def omp(cfg: ArrayConfig, y: np.ndarray, k_max: int, residual_stop: float = 0.0,
        grid_step: float = BASELINE_GRID_STEP) -> BaselineResult:
    """Orthogonal matching pursuit over the on-grid steering dictionary.

    Atoms share the norm sqrt(M), so the correlation ranking needs no
    per-atom normalization. Stops at ``k_max`` atoms or when the
    residual drops below ``residual_stop``.
    """
    if k_max >= cfg.num_elements:
        raise ValueError("k_max must stay below the element count")
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=complex)
    grid, a = _dictionary(cfg, grid_step)
    r = y.copy()
    active: list = []
    x = np.zeros(0, dtype=complex)
    while len(active) < k_max and np.linalg.norm(r) > residual_stop:
        scores = np.abs(a.conj().T @ r)
        scores[active] = -1.0
        active.append(int(np.argmax(scores)))
        asub = a[:, active]
        x, _, _, _ = np.linalg.lstsq(asub, y, rcond=None)
        r = y - asub @ x
    angles = tuple(sorted(float(grid[i]) for i in active))
    return BaselineResult(
        method="omp",
        angles=angles,
        residual=float(np.linalg.norm(r)),
        elapsed=time.perf_counter() - t0,
    )


def dml_exhaustive(cfg: ArrayConfig, y: np.ndarray, k: int,
                   grid_step: float = BASELINE_GRID_STEP) -> BaselineResult:
    """Deterministic-ML estimate by exhaustive on-grid support search.

    Maximizes the projected energy ||P_A y||^2 over all k-subsets of
    the grid; ties break to the lexicographically first support.
    Restricted to k <= 2, where the pair objective has a closed form.
    """
    if k > 2:
        raise ValueError("exhaustive DML supports k <= 2 only")
    t0 = time.perf_counter()
    y = np.asarray(y, dtype=complex)
    grid, a = _dictionary(cfg, grid_step)
    m = cfg.num_elements
    c = a.conj().T @ y
    if k == 1:
        best = int(np.argmax(np.abs(c) ** 2))
        angles = (float(grid[best]),)
    else:
        gram = a.conj().T @ a
        c2 = np.abs(c) ** 2
        # ||P y||^2 for the pair (i, j) via the 2x2 Gram inverse
        cross = np.real(np.conj(c)[:, None] * gram * c[None, :])
        num = m * (c2[:, None] + c2[None, :]) - 2.0 * cross
        den = m * m - np.abs(gram) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            obj = num / den
        iu = np.triu_indices(len(grid), k=1)
        vals = obj[iu]
        best = int(np.argmax(vals))
        i, j = int(iu[0][best]), int(iu[1][best])
        angles = (float(grid[i]), float(grid[j]))
    asub = manifold(cfg, angles)
    x, _, _, _ = np.linalg.lstsq(asub, y, rcond=None)
    res = float(np.linalg.norm(y - asub @ x))
    return BaselineResult(method="dml", angles=angles, residual=res,
                          elapsed=time.perf_counter() - t0)


def crlb(cfg: ArrayConfig, scene: Scene, sigma2: float | None = None) -> np.ndarray:
    """Deterministic single-snapshot CRLB on each DOA, degrees (std).

    Standard concentrated bound: the angle information matrix is
    (2/sigma^2) Re((D^H P_A_perp D) o (x x^H)^T) with D the per-degree
    steering derivatives and P_A_perp the projector onto the steering
    complement. Near-coincident angles yield an infinite bound.
    """
    angles = np.asarray(scene.angles, dtype=float)
    x = np.asarray(scene.amplitudes, dtype=complex)
    if len(angles) >= cfg.num_elements:
        raise ValueError("need fewer sources than array elements")
    if sigma2 is None:
        sigma2 = scene.noise_variance(cfg)
    a = manifold(cfg, angles)
    d = np.column_stack([steering_derivative(cfg, t) for t in angles])
    pa = a @ np.linalg.pinv(a)
    dperp = d - pa @ d
    h = np.real((dperp.conj().T @ dperp) * np.outer(x, x.conj()).T)
    try:
        if np.linalg.cond(h) > 1e12:
            return np.full(len(angles), np.inf)
        fim_inv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        return np.full(len(angles), np.inf)
    var = (sigma2 / 2.0) * np.diag(fim_inv)
    if np.any(var <= 0):
        return np.full(len(angles), np.inf)
    std = np.sqrt(var)
    # a bound wider than the whole angular domain carries no
    # information; report the infinity sentinel instead
    if np.any(std > cfg.grid_max - cfg.grid_min):
        return np.full(len(angles), np.inf)
    return std
