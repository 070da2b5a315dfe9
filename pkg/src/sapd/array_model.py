"""ULA geometry, steering vectors, and synthetic single-snapshot scenes.

All public angles are in degrees; trigonometry converts internally, so
the angular bias estimates produced downstream are directly comparable
to the grid step.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEG = np.pi / 180.0


class SceneError(ValueError):
    """Raised for scenes that violate the identifiability preconditions."""


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array geometry plus the angular search grid.

    Parameters
    ----------
    num_elements : int
        Number of receive elements M.
    element_spacing : float
        Inter-element spacing as a fraction of the carrier wavelength.
    grid_min, grid_max : float
        Inclusive angular span of the search grid, degrees.
    grid_step : float
        Grid resolution in degrees.
    """

    num_elements: int = 8
    element_spacing: float = 0.5
    grid_min: float = -60.0
    grid_max: float = 60.0
    grid_step: float = 1.0

    def __post_init__(self):
        if self.num_elements < 2:
            raise ValueError("need at least two array elements")
        if not self.grid_min < self.grid_max:
            raise ValueError("grid_min must be below grid_max")
        if self.grid_step <= 0:
            raise ValueError("grid_step must be positive")

    @property
    def grid_size(self) -> int:
        return int(np.floor((self.grid_max - self.grid_min) / self.grid_step)) + 1

    @cached_property
    def grid(self) -> np.ndarray:
        """Angular grid, degrees, shape (G,). Read-only."""
        g = self.grid_min + self.grid_step * np.arange(self.grid_size)
        g.flags.writeable = False
        return g

    @cached_property
    def grid_manifold(self) -> np.ndarray:
        """Steering matrix over the full grid, shape (M, G). Read-only."""
        a = manifold(self, self.grid)
        a.flags.writeable = False
        return a

    @cached_property
    def grid_manifold_derivative(self) -> np.ndarray:
        """Per-degree steering derivatives over the grid, shape (M, G)."""
        b = np.column_stack([steering_derivative(self, t) for t in self.grid])
        b.flags.writeable = False
        return b

    def angle_to_index(self, theta: float) -> int:
        """Nearest grid index for an angle, clamped to the grid."""
        g = int(round((theta - self.grid_min) / self.grid_step))
        return min(max(g, 0), self.grid_size - 1)

    def to_json(self) -> str:
        return json.dumps(
            {
                "num_elements": self.num_elements,
                "element_spacing": self.element_spacing,
                "grid_min": self.grid_min,
                "grid_max": self.grid_max,
                "grid_step": self.grid_step,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ArrayConfig":
        d = json.loads(text)
        return cls(
            num_elements=int(d["num_elements"]),
            element_spacing=float(d.get("element_spacing", 0.5)),
            grid_min=float(d["grid_min"]),
            grid_max=float(d["grid_max"]),
            grid_step=float(d["grid_step"]),
        )


@dataclass(frozen=True)
class Scene:
    """Ground-truth source configuration for synthetic snapshots.

    ``snr_db`` is a per-element SNR referenced to the mean squared
    source amplitude; with ``snr_reference='array'`` the per-element
    noise variance is divided by M so that the stated SNR is reached
    after coherent array combination.
    """

    angles: tuple
    amplitudes: tuple
    snr_db: float
    snr_reference: str = "array"

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        object.__setattr__(self, "amplitudes", tuple(complex(a) for a in self.amplitudes))
        if len(self.angles) != len(self.amplitudes):
            raise SceneError("angles and amplitudes must have equal length")
        if len(set(self.angles)) != len(self.angles):
            raise SceneError("source angles must be pairwise distinct")
        if self.snr_reference not in ("array", "element"):
            raise SceneError("snr_reference must be 'array' or 'element'")

    def validate(self, cfg: ArrayConfig) -> None:
        if len(self.angles) >= cfg.num_elements:
            raise SceneError("need fewer sources than array elements")
        for a in self.angles:
            if not cfg.grid_min < a < cfg.grid_max:
                raise SceneError(f"source angle {a} outside the open grid span")

    def noise_variance(self, cfg: ArrayConfig) -> float:
        """Per-element complex noise variance implied by the SNR convention."""
        p = float(np.mean(np.abs(np.asarray(self.amplitudes)) ** 2))
        sig2 = p / 10.0 ** (self.snr_db / 10.0)
        if self.snr_reference == "array":
            sig2 /= cfg.num_elements
        return sig2

    def to_json(self) -> str:
        return json.dumps(
            {
                "angles": list(self.angles),
                "amplitudes": [{"re": a.real, "im": a.imag} for a in self.amplitudes],
                "snr_db": self.snr_db,
                "snr_reference": self.snr_reference,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        d = json.loads(text)
        return cls(
            angles=tuple(d["angles"]),
            amplitudes=tuple(complex(a["re"], a["im"]) for a in d["amplitudes"]),
            snr_db=float(d["snr_db"]),
            snr_reference=d.get("snr_reference", "array"),
        )


@dataclass(frozen=True)
class Snapshot:
    """One complex observation vector for a single detection cell.

    ``noise_variance`` is carried for benchmark bookkeeping (bounds,
    oracle checks); the estimator itself never reads it.
    """

    data: np.ndarray
    noise_variance: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=complex))

    def to_json(self) -> str:
        return json.dumps(
            {
                "data": [{"re": v.real, "im": v.imag} for v in self.data],
                "noise_variance": self.noise_variance,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Snapshot":
        d = json.loads(text)
        data = np.array([complex(v["re"], v["im"]) for v in d["data"]])
        return cls(data=data, noise_variance=float(d.get("noise_variance", float("nan"))))


def steering_vector(cfg: ArrayConfig, theta: float) -> np.ndarray:
    """Array response a(theta) for a far-field source, shape (M,).

    Element m carries the phase ``-2*pi*spacing*m*sin(theta)``; the
    first element is the phase reference.
    """
    m = np.arange(cfg.num_elements)
    return np.exp(-2j * np.pi * cfg.element_spacing * m * np.sin(theta * DEG))


def steering_derivative(cfg: ArrayConfig, theta: float) -> np.ndarray:
    """Per-degree derivative of the steering vector at ``theta``."""
    m = np.arange(cfg.num_elements)
    phase_rate = -2j * np.pi * cfg.element_spacing * m * np.cos(theta * DEG) * DEG
    return phase_rate * steering_vector(cfg, theta)


def manifold(cfg: ArrayConfig, thetas) -> np.ndarray:
    """Steering matrix with one column per angle, shape (M, K)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    m = np.arange(cfg.num_elements)[:, None]
    return np.exp(-2j * np.pi * cfg.element_spacing * m * np.sin(thetas[None, :] * DEG))


def synthesize_snapshot(cfg: ArrayConfig, scene: Scene, rng_seed) -> Snapshot:
    """Simulate one noisy snapshot of the scene.

    Noise is circularly-symmetric complex Gaussian with per-element
    variance fixed by the scene's SNR convention; a given seed always
    reproduces the identical snapshot.

    Parameters
    ----------
    rng_seed : int or numpy.random.Generator
        Seed (or generator) for the noise draw.
    """
    scene.validate(cfg)
    rng = np.random.default_rng(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed
    s = np.asarray(scene.amplitudes, dtype=complex)
    sig2 = scene.noise_variance(cfg)
    m = cfg.num_elements
    noise = np.sqrt(sig2 / 2.0) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    data = manifold(cfg, scene.angles) @ s + noise
    return Snapshot(data=data, noise_variance=sig2)


def draw_scene(angles, snr_db: float, rng, amp_mean: float = 30.0, amp_std: float = 1.0) -> Scene:
    """Scene with random real in-phase amplitudes around ``amp_mean``.

    This is the amplitude model used throughout the benchmark harness.
    """
    s = rng.normal(amp_mean, amp_std, len(angles))
    return Scene(angles=tuple(angles), amplitudes=tuple(s.astype(complex)), snr_db=snr_db)
