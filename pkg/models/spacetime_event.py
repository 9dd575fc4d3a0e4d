import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from models.errors import PreconditionError

Vector3 = Tuple[float, float, float]


def as_vector3(value: Any, name: str = 'vector') -> Vector3:
    """Coerce a length-3 sequence to a tuple of finite floats."""
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise PreconditionError(f"{name} must have exactly 3 components, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} components must be finite: {arr.tolist()}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


class CausalClass(Enum):
    TIMELIKE_FUTURE = "timelike-future"
    TIMELIKE_PAST = "timelike-past"
    LIGHTLIKE_FUTURE = "lightlike-future"
    LIGHTLIKE_PAST = "lightlike-past"
    SPACELIKE = "spacelike"


class DetectionKind(Enum):
    POSITION = "position-detection"
    MOMENTUM = "momentum-detection"


@dataclass(frozen=True)
class Frame:
    """The single preferred (centre-of-mass) frame."""
    c: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise PreconditionError(f"speed of light must be positive and finite, got {self.c}")
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise PreconditionError(f"hbar must be positive and finite, got {self.hbar}")

    def eps_cone(self, plane_time: float, factor: float = 1e-9) -> float:
        """Lightlike / boundary tolerance for a detection plane at time T."""
        return factor * self.c * abs(plane_time)


NATURAL_UNITS = Frame()


@dataclass(frozen=True)
class Event:
    """A spacetime point (t; x, y, z) in the preferred frame."""
    t: float
    r: Vector3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise PreconditionError(f"event time must be finite, got {self.t}")
        object.__setattr__(self, 'r', as_vector3(self.r, 'event position'))

    @property
    def position(self) -> np.ndarray:
        return np.asarray(self.r, dtype=float)

    def at_time(self, t: float) -> 'Event':
        return Event(t, self.r)

    def to_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'x': self.r[0], 'y': self.r[1], 'z': self.r[2]}


@dataclass(frozen=True)
class DetectionEvent:
    """One click of the fictitious late-time detector on the plane t = T."""
    plane_time: float
    position: Optional[Vector3] = None
    kind: DetectionKind = DetectionKind.POSITION
    momentum: Optional[Vector3] = None
    photon_id: str = "1"
    # grid mode: integer cell of the coarse detector, position is then the cell centre
    cell: Optional[Tuple[int, int, int]] = field(default=None)

    def __post_init__(self):
        if not (self.plane_time > 0 and math.isfinite(self.plane_time)):
            raise PreconditionError(f"plane_time must be positive, got {self.plane_time}")
        if self.kind == DetectionKind.POSITION:
            if self.position is None or self.momentum is not None:
                raise PreconditionError("position detections carry a position and no momentum")
            object.__setattr__(self, 'position', as_vector3(self.position, 'detection position'))
        else:
            if self.momentum is None or self.position is not None:
                raise PreconditionError("momentum detections carry a momentum and no position")
            object.__setattr__(self, 'momentum', as_vector3(self.momentum, 'detection momentum'))

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    def radius_from(self, origin: Any) -> float:
        return float(np.linalg.norm(self.point - np.asarray(origin, dtype=float)))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            'photon_id': self.photon_id,
            'kind': self.kind.value,
            'T_s': self.plane_time,
        }
        if self.position is not None:
            data.update({'x_m': self.position[0], 'y_m': self.position[1], 'z_m': self.position[2]})
        if self.momentum is not None:
            data.update({'px': self.momentum[0], 'py': self.momentum[1], 'pz': self.momentum[2]})
        if self.cell is not None:
            data.update({'cell_i': self.cell[0], 'cell_j': self.cell[1], 'cell_k': self.cell[2]})
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DetectionEvent':
        """Inverse of to_dict; missing or NaN optional columns read as absent."""
        def present(*keys: str) -> bool:
            return all(data.get(k) is not None and not (isinstance(data[k], float) and math.isnan(data[k]))
                       for k in keys)

        kind = DetectionKind(data.get('kind', DetectionKind.POSITION.value))
        position = (data['x_m'], data['y_m'], data['z_m']) if present('x_m', 'y_m', 'z_m') else None
        momentum = (data['px'], data['py'], data['pz']) if present('px', 'py', 'pz') else None
        cell = (tuple(int(data[k]) for k in ('cell_i', 'cell_j', 'cell_k'))
                if present('cell_i', 'cell_j', 'cell_k') else None)
        return cls(float(data['T_s']), position, kind, momentum, str(data.get('photon_id', '1')), cell)
