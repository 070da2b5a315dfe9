"""Single-snapshot spatial spectrum analysis and search initialization.

Implements the front half of the estimator: Bartlett spectrum, noise
floor, peak detection, beam-region features, and the rule-based
initial support set that seeds the grid search.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .array_model import ArrayConfig, Snapshot
from .backend import impl


@dataclass(frozen=True)
class SpatialSpectrum:
    """Linear power per grid point plus the owning grid definition."""

    power: np.ndarray
    config: ArrayConfig

    def __post_init__(self):
        p = np.asarray(self.power, dtype=float)
        if len(p) != self.config.grid_size:
            raise ValueError("power vector length must match the grid")
        object.__setattr__(self, "power", p)

    def to_csv(self) -> str:
        """Angle/power table (linear and dB) for plotting."""
        lines = ["angle_deg,power_linear,power_db"]
        ref = max(self.power.max(), np.finfo(float).tiny)
        for ang, p in zip(self.config.grid, self.power):
            db = 10.0 * np.log10(max(p, np.finfo(float).tiny) / ref)
            lines.append(f"{ang:.6g},{p:.10g},{db:.4f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class BeamFeature:
    """Half-power geometry of one spectral beam.

    Widths are in degrees; the ``*_index`` fields are grid indices of
    the peak and its effective half-power points. When no half-power
    crossing exists before the inter-beam local minimum, that minimum
    substitutes and the corresponding flag is set.
    """

    peak_index: int
    peak_angle: float
    peak_power: float
    left_index: int
    right_index: int
    left_half_angle: float
    right_half_angle: float
    left_width: float
    right_width: float
    total_width: float
    half_points_are_minima: tuple


@dataclass(frozen=True)
class Initialization:
    """Initial on-grid support produced from the spectrum."""

    indices: tuple
    per_beam: tuple
    noise_floor: float
    beams: tuple
    degenerate_floor: bool = False


class NoiseFloor(NamedTuple):
    value: float
    degenerate: bool


def bartlett_spectrum(cfg: ArrayConfig, snapshot: Snapshot) -> SpatialSpectrum:
    """Matched-filter spatial spectrum |a(theta)^H y|^2 over the grid."""
    y = np.asarray(snapshot.data, dtype=complex)
    if len(y) != cfg.num_elements:
        raise ValueError("snapshot length must equal the element count")
    p = impl.bartlett(np.ascontiguousarray(cfg.grid_manifold), y)
    return SpatialSpectrum(power=p, config=cfg)


def estimate_noise_floor(spectrum: SpatialSpectrum, eta_db: float = 20.0) -> NoiseFloor:
    """Mean power of grid points far below the spectrum maximum.

    Points more than ``eta_db`` below the peak are averaged. If no
    point qualifies (flat spectrum), the minimum power is returned
    with the degenerate flag set.
    """
    p = spectrum.power
    mask = p < p.max() * 10.0 ** (-eta_db / 10.0)
    if not mask.any():
        return NoiseFloor(float(p.min()), True)
    return NoiseFloor(float(p[mask].mean()), False)


def detect_peaks(spectrum: SpatialSpectrum, n_f: float, threshold_offset_db: float = 10.0,
                 floor_power: float = 0.0) -> list:
    """Strict local maxima above the detection threshold.

    Returns ``(grid_index, power)`` pairs sorted by angle. The
    threshold is ``n_f`` raised by ``threshold_offset_db`` (or
    ``floor_power`` if that is higher, letting callers add a sidelobe
    guard). Plateau ties resolve to the leftmost index; a later peak
    with power exactly equal to the previous one is treated as the
    same plateau and skipped.
    """
    p = spectrum.power
    g_count = len(p)
    pt = max(n_f * 10.0 ** (threshold_offset_db / 10.0), floor_power)
    out = []
    for g in range(g_count):
        left = p[g - 1] if g > 0 else -np.inf
        right = p[g + 1] if g < g_count - 1 else -np.inf
        if p[g] > pt and p[g] > left and p[g] >= right:
            if out and p[g] == out[-1][1]:
                continue
            out.append((g, float(p[g])))
    return out


def extract_beam_features(spectrum: SpatialSpectrum, peaks: list, n_f: float) -> list:
    """Half-power beam geometry around each detected peak.

    Each scan is bounded by the neighboring peak (or the grid edge);
    if the power never drops to half the peak before the inter-beam
    local minimum, that minimum stands in for the half-power point.
    """
    p = spectrum.power
    grid = spectrum.config.grid
    g_count = len(p)
    feats = []
    idxs = [g for g, _ in peaks]
    for i, g in enumerate(idxs):
        half = p[g] / 2.0
        lo = idxs[i - 1] if i > 0 else 0
        hi = idxs[i + 1] if i < len(idxs) - 1 else g_count - 1
        gl, found, minj = g, False, g
        while gl > lo:
            gl -= 1
            if p[gl] < p[minj]:
                minj = gl
            if p[gl] <= half:
                found = True
                break
        left = gl if found else minj
        left_is_min = not found
        gr, found, minj = g, False, g
        while gr < hi:
            gr += 1
            if p[gr] < p[minj]:
                minj = gr
            if p[gr] <= half:
                found = True
                break
        right = gr if found else minj
        right_is_min = not found
        feats.append(
            BeamFeature(
                peak_index=g,
                peak_angle=float(grid[g]),
                peak_power=float(p[g]),
                left_index=left,
                right_index=right,
                left_half_angle=float(grid[left]),
                right_half_angle=float(grid[right]),
                left_width=float(grid[g] - grid[left]),
                right_width=float(grid[right] - grid[g]),
                total_width=float(grid[right] - grid[left]),
                half_points_are_minima=(left_is_min, right_is_min),
            )
        )
    return feats


@lru_cache(maxsize=8)
def theta_3db(cfg: ArrayConfig) -> float:
    """Half-power beamwidth of a broadside beam, measured on the grid.

    Uses the same grid-resolution half-power scan as the beam-feature
    extraction, so width classifications compare like with like.
    """
    from .array_model import steering_vector

    p = impl.bartlett(np.ascontiguousarray(cfg.grid_manifold), steering_vector(cfg, 0.0))
    pk = int(np.argmax(p))
    half = p[pk] / 2.0
    left = pk
    while left > 0 and p[left] > half:
        left -= 1
    right = pk
    while right < cfg.grid_size - 1 and p[right] > half:
        right += 1
    return float(cfg.grid[right] - cfg.grid[left])


def classify_power(peak_power: float, ps1: float) -> int:
    """Source-count class of a beam peak against the power benchmarks.

    Benchmarks are ``k^2 * ps1`` for k coherent in-phase sources; the
    class is the nearest benchmark in dB (1, 2, or 3).
    """
    d = [abs(10.0 * np.log10(peak_power / (k * k * ps1))) for k in (1, 2, 3)]
    return int(np.argmin(d)) + 1


def two_point_indices(cfg: ArrayConfig, feat: BeamFeature) -> list:
    """Two starting cells straddling a broad (multi-source) beam.

    Symmetric about the peak at the mean half half-width, which keeps
    the subsequent joint walk centred on the beam.
    """
    o = max(1, int(round((feat.left_width + feat.right_width) / 4.0 / cfg.grid_step)))
    lo = max(0, feat.peak_index - o)
    hi = min(cfg.grid_size - 1, feat.peak_index + o)
    return sorted({lo, hi})


def initialize(spectrum: SpatialSpectrum, eta_db: float = 20.0,
               threshold_offset_db: float = 10.0, sidelobe_guard_db: float = 11.5,
               amp_prior: float = 30.0) -> Initialization:
    """Initial support set from the spectrum (width and power rules).

    A beam contributes one cell (its peak) unless either its width
    exceeds the broadened single-source beamwidth or its peak power
    matches a multi-source benchmark, in which case it contributes two
    straddling cells. The width threshold scales with 1/cos(theta)
    because the physical beam broadens away from broadside.
    """
    cfg = spectrum.config
    nf, degenerate = estimate_noise_floor(spectrum, eta_db)
    ps1 = cfg.num_elements ** 2 * amp_prior ** 2
    # relative sidelobe guard plus an absolute detection floor well
    # below the nominal single-source peak: snapshots carrying nothing
    # but weak noise produce no peaks at all
    guard = max(spectrum.power.max() * 10.0 ** (-sidelobe_guard_db / 10.0),
                ps1 * 1e-3)
    # dense scenes can leave no quiet grid points; the degenerate floor
    # (minimum power) would then gate out every peak, so detection falls
    # back to the guard level alone
    nf_det = nf if not degenerate else guard * 10.0 ** (-threshold_offset_db / 10.0)
    pks = detect_peaks(spectrum, nf_det, threshold_offset_db, floor_power=guard)
    feats = extract_beam_features(spectrum, pks, nf)
    th3 = theta_3db(cfg)
    per_beam = []
    for f in feats:
        broaden = max(np.cos(np.deg2rad(f.peak_angle)), 0.3)
        thr = th3 / broaden + 2.0 * cfg.grid_step
        if f.total_width >= thr or classify_power(f.peak_power, ps1) >= 2:
            contrib = two_point_indices(cfg, f)
        else:
            contrib = [f.peak_index]
        per_beam.append(tuple(contrib))
    indices = tuple(sorted({g for c in per_beam for g in c}))
    return Initialization(
        indices=indices,
        per_beam=tuple(per_beam),
        noise_floor=nf,
        beams=tuple(feats),
        degenerate_floor=degenerate,
    )
