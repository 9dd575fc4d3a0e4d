import math
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from config.config import Config
from models.errors import PreconditionError
from models.spacetime_event import Event, Vector3, as_vector3


def _unit_axis(axis: Any) -> Vector3:
    vec = np.asarray(as_vector3(axis, 'dipole axis'))
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise PreconditionError("dipole axis must be non-zero")
    return as_vector3(vec / norm, 'dipole axis')


@dataclass(frozen=True)
class EmitterParams:
    """A two-level emitter: decay rate, line frequency, emission site and dipole axis."""
    gamma: float
    omega: float
    source: Event = field(default_factory=lambda: Event(0.0))
    dipole_axis: Vector3 = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise PreconditionError(f"gamma must be positive, got {self.gamma}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise PreconditionError(f"omega must be positive, got {self.omega}")
        object.__setattr__(self, 'dipole_axis', _unit_axis(self.dipole_axis))

    @property
    def lifetime(self) -> float:
        return 1.0 / self.gamma

    @property
    def narrow_line(self) -> bool:
        """Regime flag: Γ ≪ ω."""
        return self.gamma / self.omega < Config.NARROW_LINE_RATIO

    @property
    def line_frequency_hz(self) -> float:
        return self.omega / (2.0 * math.pi)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma': self.gamma,
            'omega': self.omega,
            'source': self.source.to_dict(),
            'dipole_axis': list(self.dipole_axis),
            'narrow_line': self.narrow_line,
        }

    def __str__(self) -> str:
        return f"Emitter(Γ={self.gamma:.6g}, ω={self.omega:.6g}, at {self.source.r})"


@dataclass(frozen=True)
class CascadeParams:
    """Two-step cascade e2 -> e1 -> g; photon 1 is emitted first."""
    gamma1: float
    gamma2: float
    omega1: float
    omega2: float
    source: Event = field(default_factory=lambda: Event(0.0))
    dipole_axis: Vector3 = (0.0, 0.0, 1.0)

    def __post_init__(self):
        for name in ('gamma1', 'gamma2', 'omega1', 'omega2'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise PreconditionError(f"{name} must be positive, got {value}")
        object.__setattr__(self, 'dipole_axis', _unit_axis(self.dipole_axis))

    def first(self) -> EmitterParams:
        return EmitterParams(self.gamma1, self.omega1, self.source, self.dipole_axis)

    def second(self) -> EmitterParams:
        return EmitterParams(self.gamma2, self.omega2, self.source, self.dipole_axis)

    @property
    def total_lifetime(self) -> float:
        return 1.0 / self.gamma1 + 1.0 / self.gamma2

    def to_dict(self) -> Dict[str, Any]:
        return {
            'gamma1': self.gamma1,
            'gamma2': self.gamma2,
            'omega1': self.omega1,
            'omega2': self.omega2,
            'source': self.source.to_dict(),
            'dipole_axis': list(self.dipole_axis),
        }


@dataclass(frozen=True)
class WaveAmplitude:
    value: complex

    def __post_init__(self):
        value = complex(self.value)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise PreconditionError(f"wave amplitude must be finite, got {value}")
        object.__setattr__(self, 'value', value)

    @property
    def density(self) -> float:
        """|γ|², the detection probability density."""
        return abs(self.value) ** 2

    def __abs__(self) -> float:
        return abs(self.value)

    def to_dict(self) -> Dict[str, Any]:
        return {'re': self.value.real, 'im': self.value.imag}
