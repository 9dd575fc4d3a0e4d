"""
Branch-family data model.

A scenario is a set of Born-weighted branch families. Each family owns a chain
of sequential latent delays (tau_1, then tau_2 after it, ...). Transitions and
photon emissions fire at the end of a chain step plus a fixed offset, measured
from the family's start time.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.detection_record import DetectorPlane
from models.emitter import CascadeParams, EmitterParams
from models.errors import ConfigError, PreconditionError
from models.spacetime_event import DetectionKind, Frame, Vector3, as_vector3


class ScenarioKind(Enum):
    EX1 = "ex1"  # single decaying atom
    EX2 = "ex2"  # atom in a superposition of two locations
    EX3 = "ex3"  # two-photon cascade
    EX4 = "ex4"  # absorber shell in a superposition of two locations
    EX5 = "ex5"  # as EX4 with a late-time momentum measurement


class PosteriorMode(Enum):
    ATTRIBUTED = "attributed"   # clicks are attributed to the branch that produced them
    EXACT = "exact"   # clicks are weighed by every family's own density


class LatentKind(Enum):
    EXPONENTIAL = "exponential"
    POINT_MASS = "point-mass"


@dataclass(frozen=True)
class LatentVar:
    """One latent delay. Exponential (optionally truncated to [0, upper]) or a point mass."""
    name: str
    kind: LatentKind = LatentKind.EXPONENTIAL
    rate: float = 0.0
    upper: Optional[float] = None
    value: float = 0.0

    def __post_init__(self):
        if self.kind == LatentKind.EXPONENTIAL:
            if not (self.rate > 0 and math.isfinite(self.rate)):
                raise PreconditionError(f"latent {self.name}: rate must be positive, got {self.rate}")
            if self.upper is not None and not self.upper > 0:
                raise PreconditionError(f"latent {self.name}: truncation must be positive")
        elif not (self.value >= 0 and math.isfinite(self.value)):
            raise PreconditionError(f"latent {self.name}: point mass must sit at a finite delay >= 0")

    @classmethod
    def exponential(cls, name: str, rate: float, upper: Optional[float] = None) -> 'LatentVar':
        return cls(name, LatentKind.EXPONENTIAL, rate=rate, upper=upper)

    @classmethod
    def point_mass(cls, name: str, value: float) -> 'LatentVar':
        return cls(name, LatentKind.POINT_MASS, value=value)

    @property
    def is_truncated(self) -> bool:
        return self.kind == LatentKind.EXPONENTIAL and self.upper is not None

    def untruncated(self) -> 'LatentVar':
        if not self.is_truncated:
            return self
        return LatentVar.exponential(self.name, self.rate)

    def _mass(self) -> float:
        if self.upper is None:
            return 1.0
        return -math.expm1(-self.rate * self.upper)

    def pdf(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == LatentKind.POINT_MASS:
            tol = 1e-9 * (1.0 + self.value)
            return np.where(np.abs(tau - self.value) <= tol, 1.0, 0.0)
        upper = np.inf if self.upper is None else self.upper
        inside = (tau >= 0.0) & (tau <= upper)
        return np.where(inside, self.rate * np.exp(-self.rate * np.where(inside, tau, 0.0)) / self._mass(), 0.0)

    def cdf(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == LatentKind.POINT_MASS:
            return np.where(v >= self.value, 1.0, 0.0)
        upper = np.inf if self.upper is None else self.upper
        clipped = np.clip(v, 0.0, upper)
        return -np.expm1(-self.rate * clipped) / self._mass()

    def sf(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == LatentKind.POINT_MASS:
            return np.where(s < self.value, 1.0, 0.0)
        if self.upper is None:
            return np.exp(-self.rate * np.maximum(s, 0.0))
        clipped = np.clip(s, 0.0, self.upper)
        tail = math.exp(-self.rate * self.upper)
        return np.maximum(np.exp(-self.rate * clipped) - tail, 0.0) / self._mass()

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == LatentKind.POINT_MASS:
            return {'name': self.name, 'kind': self.kind.value, 'value': self.value}
        return {'name': self.name, 'kind': self.kind.value, 'rate': self.rate, 'upper': self.upper}


@dataclass(frozen=True)
class SiteSpec:
    """A localized massive system with a small internal basis."""
    name: str
    basis: Tuple[str, ...]
    position: Vector3 = (0.0, 0.0, 0.0)
    ground_state: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, 'basis', tuple(self.basis))
        object.__setattr__(self, 'position', as_vector3(self.position, f'site {self.name} position'))
        if len(set(self.basis)) != len(self.basis) or not self.basis:
            raise ConfigError(f"site {self.name}: basis labels must be distinct and non-empty")
        if self.ground_state is not None and self.ground_state not in self.basis:
            raise ConfigError(f"site {self.name}: ground state {self.ground_state} not in basis")

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def index(self, state: str) -> int:
        try:
            return self.basis.index(state)
        except ValueError:
            raise ConfigError(f"site {self.name}: unknown state {state!r}; basis is {self.basis}")

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'basis': list(self.basis), 'position': list(self.position),
                'ground_state': self.ground_state}


@dataclass(frozen=True)
class InternalState:
    site: SiteSpec
    state: str

    def __post_init__(self):
        self.site.index(self.state)

    def __str__(self) -> str:
        return f"|{self.state}⟩_{self.site.name}"


@dataclass(frozen=True)
class Transition:
    """site: from_state -> to_state at (end of chain step `step`) + offset."""
    site: str
    from_state: str
    to_state: str
    step: int = 1
    offset: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {'site': self.site, 'from': self.from_state, 'to': self.to_state,
                'step': self.step, 'offset': self.offset}


@dataclass(frozen=True)
class PhotonChannel:
    """A photon emitted at the end of chain step `step` from emitter.source."""
    photon_id: str
    emitter: EmitterParams
    step: int = 1
    detectable: bool = True
    kind: DetectionKind = DetectionKind.POSITION

    @property
    def source(self) -> np.ndarray:
        return self.emitter.source.position

    def to_dict(self) -> Dict[str, Any]:
        return {'photon_id': self.photon_id, 'step': self.step, 'detectable': self.detectable,
                'kind': self.kind.value, 'emitter': self.emitter.to_dict()}


@dataclass(frozen=True)
class BranchFamily:
    label: str
    born_weight: float
    latent_vars: Tuple[LatentVar, ...]
    transitions: Tuple[Transition, ...] = ()
    emissions: Tuple[PhotonChannel, ...] = ()
    initial_states: Dict[str, str] = field(default_factory=dict)
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'latent_vars', tuple(self.latent_vars))
        object.__setattr__(self, 'transitions', tuple(self.transitions))
        object.__setattr__(self, 'emissions', tuple(self.emissions))
        if not (0.0 <= self.born_weight <= 1.0 + 1e-12):
            raise ConfigError(f"family {self.label}: born weight {self.born_weight} outside [0, 1]")
        steps = len(self.latent_vars)
        if steps not in (1, 2):
            raise ConfigError(f"family {self.label}: latent chains of length {steps} are not supported")
        if steps == 2 and any(v.kind != LatentKind.EXPONENTIAL or v.is_truncated for v in self.latent_vars):
            raise ConfigError(f"family {self.label}: two-step chains must be untruncated exponentials")
        for item in self.transitions + self.emissions:
            if not 1 <= item.step <= steps:
                raise ConfigError(f"family {self.label}: step {item.step} outside the latent chain")
        if len({e.step for e in self.emissions}) != len(self.emissions):
            raise ConfigError(f"family {self.label}: at most one photon per chain step")
        for site in {t.site for t in self.transitions}:
            seq = self.site_transitions(site)
            state = self.initial_states.get(site)
            keys = [(t.step, t.offset) for t in seq]
            if keys != sorted(keys):
                raise ConfigError(f"family {self.label}: transitions of {site} are not time ordered")
            for t in seq:
                if t.from_state != state:
                    raise ConfigError(f"family {self.label}: {site} transition from {t.from_state} "
                                      f"but the site is in {state}")
                state = t.to_state

    def site_transitions(self, site: str) -> List[Transition]:
        return [t for t in self.transitions if t.site == site]

    def photon(self, photon_id: str) -> Optional[PhotonChannel]:
        for channel in self.emissions:
            if channel.photon_id == photon_id:
                return channel
        return None

    @property
    def detectable_photons(self) -> List[PhotonChannel]:
        return [e for e in self.emissions if e.detectable]

    def state_sequence(self, site: str) -> List[str]:
        states = [self.initial_states[site]]
        states.extend(t.to_state for t in self.site_transitions(site))
        return states

    def to_dict(self) -> Dict[str, Any]:
        return {
            'label': self.label,
            'born_weight': self.born_weight,
            'latent_vars': [v.to_dict() for v in self.latent_vars],
            'transitions': [t.to_dict() for t in self.transitions],
            'emissions': [e.to_dict() for e in self.emissions],
            'initial_states': dict(self.initial_states),
            'start_time': self.start_time,
        }


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    families: Tuple[BranchFamily, ...]
    sites: Dict[str, SiteSpec]
    frame: Frame
    plane: DetectorPlane
    mode: PosteriorMode = PosteriorMode.ATTRIBUTED
    emitter: Optional[EmitterParams] = None
    cascade: Optional[CascadeParams] = None
    alpha: complex = 1.0
    beta: complex = 0.0
    detection_kind: DetectionKind = DetectionKind.POSITION
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'families', tuple(self.families))
        total = sum(f.born_weight for f in self.families)
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"born weights sum to {total!r}, expected 1")
        for family in self.families:
            for site in family.initial_states:
                if site not in self.sites:
                    raise ConfigError(f"family {family.label} references unknown site {site}")

    def family(self, label: str) -> BranchFamily:
        for family in self.families:
            if family.label == label:
                return family
        raise PreconditionError(f"scenario {self.kind.value} has no branch family {label!r}")

    @property
    def labels(self) -> List[str]:
        return [f.label for f in self.families]

    def born_weights(self) -> Dict[str, float]:
        return {f.label: f.born_weight for f in self.families}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'mode': self.mode.value,
            'families': [f.to_dict() for f in self.families],
            'sites': {name: s.to_dict() for name, s in self.sites.items()},
            'plane': self.plane.to_dict(),
            'parameters': dict(self.parameters),
        }

    def __str__(self) -> str:
        weights = ', '.join(f"{f.label}={f.born_weight:.4g}" for f in self.families)
        return f"Scenario({self.kind.value}, {self.mode.value}-mode, {weights})"


@dataclass(frozen=True)
class PinnedTransition:
    from_state: str
    to_state: str
    time: Optional[float]  # None: completed before the plane at an unobserved time


@dataclass(frozen=True)
class SiteTrajectory:
    """Piecewise-constant internal-state history of one site in a pinned branch."""
    site: str
    initial_state: str
    transitions: Tuple[PinnedTransition, ...] = ()

    def state_at(self, t: float) -> str:
        state = self.initial_state
        for tr in self.transitions:
            if tr.time is None or tr.time > t:
                break
            state = tr.to_state
        return state

    @property
    def final_state(self) -> str:
        return self.transitions[-1].to_state if self.transitions else self.initial_state

    @property
    def transition_times(self) -> List[Optional[float]]:
        return [tr.time for tr in self.transitions]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'site': self.site,
            'initial_state': self.initial_state,
            'transitions': [{'from': t.from_state, 'to': t.to_state, 'time': t.time}
                            for t in self.transitions],
        }


@dataclass(frozen=True)
class PinnedHistory:
    branch: str
    latent_times: Dict[str, Optional[float]]
    trajectories: Dict[str, SiteTrajectory]

    def final_states(self, sites: Dict[str, SiteSpec]) -> List[InternalState]:
        return [InternalState(sites[name], traj.final_state) for name, traj in self.trajectories.items()]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'branch': self.branch,
            'latent_times': dict(self.latent_times),
            'trajectories': {k: v.to_dict() for k, v in self.trajectories.items()},
        }

    def __str__(self) -> str:
        latents = ', '.join(f"{k}={'?' if v is None else f'{v:.6g}'}" for k, v in self.latent_times.items())
        return f"PinnedHistory({self.branch}: {latents})"
