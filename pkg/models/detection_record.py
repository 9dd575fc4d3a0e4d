import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.errors import PreconditionError
from models.spacetime_event import DetectionEvent, DetectionKind


class DetectorMode(Enum):
    IDEAL = "ideal"
    GRID = "grid"


@dataclass(frozen=True)
class DetectorPlane:
    """The fictitious late-time detector occupying the hyperplane t = T."""
    T: float
    mode: DetectorMode = DetectorMode.IDEAL
    cell_size: Optional[float] = None   # L, metres
    cutoff_freq: float = 0.0            # ν_min, Hz

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise PreconditionError(f"plane time T must be positive, got {self.T}")
        if isinstance(self.mode, str):
            object.__setattr__(self, 'mode', DetectorMode(self.mode))
        if self.mode == DetectorMode.GRID:
            if self.cell_size is None or not self.cell_size > 0:
                raise PreconditionError("grid mode requires a positive cell_size")
            if not self.cutoff_freq >= 0:
                raise PreconditionError("grid mode requires cutoff_freq >= 0")

    @property
    def is_grid(self) -> bool:
        return self.mode == DetectorMode.GRID

    def with_time(self, T: float) -> 'DetectorPlane':
        return DetectorPlane(T, self.mode, self.cell_size, self.cutoff_freq)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'T': self.T,
            'mode': self.mode.value,
            'cell_size': self.cell_size,
            'cutoff_freq': self.cutoff_freq,
        }


@dataclass(frozen=True)
class DetectionRecord:
    """All clicks of one late-time measurement, plus the branch that produced them."""
    plane_time: float
    detections: Tuple[DetectionEvent, ...] = ()
    no_detection_branches: Tuple[str, ...] = ()
    branch: Optional[str] = None
    # sampled latent delays, kept for diagnostics only; the beable engines never read them
    latent_truth: Dict[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'detections', tuple(self.detections))
        object.__setattr__(self, 'no_detection_branches', tuple(self.no_detection_branches))
        for det in self.detections:
            if abs(det.plane_time - self.plane_time) > 1e-12 * abs(self.plane_time):
                raise PreconditionError(
                    f"detection on plane {det.plane_time} does not match record plane {self.plane_time}")

    @property
    def is_empty(self) -> bool:
        return not self.detections

    @property
    def has_momentum(self) -> bool:
        return any(d.kind == DetectionKind.MOMENTUM for d in self.detections)

    def by_photon(self) -> Dict[str, DetectionEvent]:
        return {d.photon_id: d for d in self.detections}

    def without(self, indices: List[int]) -> 'DetectionRecord':
        keep = tuple(d for i, d in enumerate(self.detections) if i not in set(indices))
        return DetectionRecord(self.plane_time, keep, self.no_detection_branches, self.branch,
                               dict(self.latent_truth))

    def with_detections(self, detections: List[DetectionEvent]) -> 'DetectionRecord':
        return DetectionRecord(self.plane_time, tuple(detections), self.no_detection_branches,
                               self.branch, dict(self.latent_truth))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'plane_time': self.plane_time,
            'branch': self.branch,
            'detections': [d.to_dict() for d in self.detections],
            'no_detection_branches': list(self.no_detection_branches),
        }

    def __str__(self) -> str:
        return f"DetectionRecord(T={self.plane_time:.6g}, branch={self.branch}, clicks={len(self.detections)})"


class RngStream:
    """Reproducible per-trial random stream keyed by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise PreconditionError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.generator = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))
        self.resamples = 0

    def uniforms(self, n: int) -> np.ndarray:
        """n draws from [0, 1)."""
        return self.generator.random(n)

    def to_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'stream_id': self.stream_id, 'resamples': self.resamples}

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
