"""
Scenario and run configuration: per-kind defaults and INI file parsing.

Every physical key carries its unit in the key name. Example file:

    [scenario]
    kind = ex2
    mode = attributed

    [emitter]
    gamma_per_s = 1.0
    omega_rad_per_s = 1000.0

    [amplitudes]
    alpha_re = 0.5477225575051661
    beta_re = 0.8366600265340756

    [geometry]
    separation_m = 0.1

    [detector]
    plane_time_s = 30.0
    mode = ideal

    [run]
    trials = 1000
    seed = 7
    grid = 0:10:512
"""

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from config.config import Config
from models.detection_record import DetectorMode, DetectorPlane
from models.emitter import CascadeParams, EmitterParams
from models.errors import ConfigError, PreconditionError
from models.branch import PosteriorMode, ScenarioKind
from models.spacetime_event import DetectionKind, Frame
from utils.logger import setup_logger

logger = setup_logger('ScenarioConfig')

# Defaults per scenario kind, in natural units (c = hbar = 1)
SCENARIO_DEFAULTS = {
    'ex1': {
        'name': 'Single decaying atom',
        'gamma': 1.0,
        'omega': 1000.0,
        'plane_time': 30.0,
        'pairs': [('atom', 'excited')],
        'required': ['gamma', 'omega'],
    },
    'ex2': {
        'name': 'Atom in a superposition of two locations',
        'gamma': 1.0,
        'omega': 1000.0,
        'alpha': math.sqrt(0.3),
        'beta': math.sqrt(0.7),
        'separation': 0.1,  # ~16 wavelengths at omega = 1000
        'plane_time': 30.0,
        'pairs': [('atom_minus', 'excited'), ('atom_plus', 'excited')],
        'required': ['gamma', 'omega', 'separation'],
    },
    'ex3': {
        'name': 'Two-photon cascade',
        'gamma1': 1.0,
        'gamma2': 2.0,
        'omega1': 1000.0,
        'omega2': 800.0,
        'plane_time': 30.0,
        'pairs': [('atom', 'state:e2'), ('atom', 'excited')],
        'required': ['gamma1', 'gamma2', 'omega1', 'omega2'],
    },
    'ex4': {
        'name': 'Absorber shell in a superposition of two locations',
        'gamma': 1.0,
        'omega': 1000.0,
        'alpha': math.sqrt(0.6),
        'beta': math.sqrt(0.4),
        'shell_outer_radius': 20.0,
        'shell_inner_radius': 19.0,
        'plane_time': 60.0,
        'pairs': [('atom', 'excited'), ('object', 'state:obj0')],
        'required': ['gamma', 'omega', 'shell_outer_radius', 'shell_inner_radius'],
    },
    'ex5': {
        'name': 'Absorber superposition with late-time momentum measurement',
        'gamma': 1.0,
        'omega': 1000.0,
        'alpha': math.sqrt(0.6),
        'beta': math.sqrt(0.4),
        'shell_outer_radius': 20.0,
        'shell_inner_radius': 19.0,
        'plane_time': 60.0,
        'detection_kind': 'momentum',
        'pairs': [('atom', 'excited'), ('object', 'position:origin')],
        'required': ['gamma', 'omega', 'shell_outer_radius', 'shell_inner_radius'],
    },
}

# (section, key) -> ScenarioConfig field
_SCENARIO_KEYS = {
    ('scenario', 'kind'): 'kind',
    ('scenario', 'mode'): 'mode',
    ('scenario', 'detection'): 'detection_kind',
    ('emitter', 'gamma_per_s'): 'gamma',
    ('emitter', 'omega_rad_per_s'): 'omega',
    ('emitter', 'gamma1_per_s'): 'gamma1',
    ('emitter', 'gamma2_per_s'): 'gamma2',
    ('emitter', 'omega1_rad_per_s'): 'omega1',
    ('emitter', 'omega2_rad_per_s'): 'omega2',
    ('amplitudes', 'alpha_re'): 'alpha_re',
    ('amplitudes', 'alpha_im'): 'alpha_im',
    ('amplitudes', 'beta_re'): 'beta_re',
    ('amplitudes', 'beta_im'): 'beta_im',
    ('geometry', 'separation_m'): 'separation',
    ('geometry', 'shell_outer_radius_m'): 'shell_outer_radius',
    ('geometry', 'shell_inner_radius_m'): 'shell_inner_radius',
    ('geometry', 'object_offset_m'): 'object_offset',
    ('detector', 'plane_time_s'): 'plane_time',
    ('detector', 'mode'): 'detector_mode',
    ('detector', 'cell_size_m'): 'cell_size',
    ('detector', 'cutoff_hz'): 'cutoff_freq',
    ('frame', 'c_m_per_s'): 'c',
    ('frame', 'hbar_js'): 'hbar',
}

_RUN_KEYS = {'trials', 'seed', 'grid', 'outputs', 'emit', 'workers', 'pairs'}

EMIT_FLAGS = ('detections', 'trajectories', 'transitions', 'histograms', 'summary')
DEFAULT_EMIT = ('detections', 'transitions', 'histograms', 'summary')


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one of the five toy models."""
    kind: ScenarioKind
    mode: PosteriorMode = PosteriorMode.ATTRIBUTED
    gamma: Optional[float] = None
    omega: Optional[float] = None
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    alpha: complex = 1.0
    beta: complex = 0.0
    separation: Optional[float] = None
    shell_outer_radius: Optional[float] = None
    shell_inner_radius: Optional[float] = None
    object_offset: Optional[float] = None
    plane_time: float = 30.0
    detector_mode: DetectorMode = DetectorMode.IDEAL
    cell_size: Optional[float] = None
    cutoff_freq: float = 0.0
    detection_kind: DetectionKind = DetectionKind.POSITION
    c: float = 1.0
    hbar: float = 1.0

    @classmethod
    def defaults(cls, kind: str) -> 'ScenarioConfig':
        """Scenario with every parameter taken from SCENARIO_DEFAULTS."""
        key = str(kind).lower()
        if key not in SCENARIO_DEFAULTS:
            raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {sorted(SCENARIO_DEFAULTS)}")
        return cls.from_values({'kind': key})

    @classmethod
    def from_values(cls, values: Dict[str, Any]) -> 'ScenarioConfig':
        """Build from flat field values, filling gaps from the kind's defaults."""
        if 'kind' not in values:
            raise ConfigError("scenario kind is required")
        key = str(values['kind']).lower()
        if key not in SCENARIO_DEFAULTS:
            raise ConfigError(f"unknown scenario kind {values['kind']!r}")
        merged = {k: v for k, v in SCENARIO_DEFAULTS[key].items()
                  if k not in ('name', 'pairs', 'required')}
        merged.update({k: v for k, v in values.items() if v is not None})

        try:
            alpha = merged.pop('alpha', 1.0)
            beta = merged.pop('beta', 0.0)
            if any(k in merged for k in ('alpha_re', 'alpha_im', 'beta_re', 'beta_im')):
                alpha = complex(float(merged.pop('alpha_re', 0.0)), float(merged.pop('alpha_im', 0.0)))
                beta = complex(float(merged.pop('beta_re', 0.0)), float(merged.pop('beta_im', 0.0)))
            kwargs: Dict[str, Any] = {
                'kind': ScenarioKind(key),
                'mode': PosteriorMode(str(merged.pop('mode', 'attributed')).lower()),
                'detector_mode': DetectorMode(str(merged.pop('detector_mode', 'ideal')).lower()),
                'detection_kind': _detection_kind(merged.pop('detection_kind', 'position')),
                'alpha': complex(alpha),
                'beta': complex(beta),
            }
            merged.pop('kind')
            for name, value in merged.items():
                kwargs[name] = float(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid scenario value: {e}") from e

        try:
            cfg = cls(**kwargs)
        except TypeError as e:
            raise ConfigError(f"unknown scenario parameter: {e}") from e
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str) -> 'ScenarioConfig':
        values, _ = _read_ini(path)
        return cls.from_values(values)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ScenarioConfig':
        """Inverse of to_dict (the config echo in summary.json)."""
        keys = {unit_key: name for (section, unit_key), name in _SCENARIO_KEYS.items()
                if section != 'scenario' and unit_key != 'mode'}
        keys.update({'detection': 'detection_kind', 'detector_mode': 'detector_mode'})
        values: Dict[str, Any] = {'kind': data['kind'], 'mode': data.get('mode', 'attributed')}
        for key, value in data.items():
            if key in keys and value is not None:
                values[keys[key]] = value
        for name in ('alpha', 'beta'):
            if data.get(name) is not None:
                values[f'{name}_re'], values[f'{name}_im'] = data[name]
        return cls.from_values(values)

    def with_overrides(self, **overrides: Any) -> 'ScenarioConfig':
        values = {k: v for k, v in overrides.items() if v is not None}
        if not values:
            return self
        try:
            if 'mode' in values:
                values['mode'] = PosteriorMode(str(values['mode']).lower())
            if 'detector_mode' in values:
                values['detector_mode'] = DetectorMode(str(values['detector_mode']).lower())
            cfg = replace(self, **values)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid override: {e}") from e
        cfg.validate()
        return cfg

    @property
    def name(self) -> str:
        return SCENARIO_DEFAULTS[self.kind.value]['name']

    @property
    def default_pairs(self) -> List[Tuple[str, str]]:
        return list(SCENARIO_DEFAULTS[self.kind.value]['pairs'])

    @property
    def slowest_rate(self) -> float:
        if self.kind == ScenarioKind.EX3:
            return min(self.gamma1, self.gamma2)
        return self.gamma

    @property
    def reference_rate(self) -> float:
        """Rate of the first transition law (Γ, or Γ₁ for the cascade)."""
        return self.gamma1 if self.kind == ScenarioKind.EX3 else self.gamma

    def validate(self) -> None:
        """Raise ConfigError on incomplete or inconsistent parameters; log regime warnings."""
        for name in SCENARIO_DEFAULTS[self.kind.value]['required']:
            value = getattr(self, name)
            if value is None or not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{self.kind.value}: {name} must be a positive number, got {value}")
        if not (self.plane_time > 0 and math.isfinite(self.plane_time)):
            raise ConfigError(f"plane_time must be positive, got {self.plane_time}")
        if not (self.c > 0 and self.hbar > 0):
            raise ConfigError("c and hbar must be positive")

        if self.kind in (ScenarioKind.EX2, ScenarioKind.EX4, ScenarioKind.EX5):
            norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
            if abs(norm - 1.0) > 1e-12:
                raise ConfigError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")

        if self.kind in (ScenarioKind.EX4, ScenarioKind.EX5):
            if self.shell_inner_radius >= self.shell_outer_radius:
                raise ConfigError("shell inner radius must be smaller than the outer radius")
            if self.shell_outer_radius < Config.SHELL_LIFETIME_FACTOR * self.c / self.gamma:
                logger.warning(f"⚠️ shell radius R={self.shell_outer_radius:.4g} is not ≫ 10c/Γ")

        if self.detection_kind == DetectionKind.MOMENTUM and self.kind not in (ScenarioKind.EX4, ScenarioKind.EX5):
            raise ConfigError("momentum detection is only defined for the absorber scenarios")
        if self.kind == ScenarioKind.EX5 and self.detection_kind != DetectionKind.MOMENTUM:
            raise ConfigError("ex5 requires momentum detection")

        if self.detector_mode == DetectorMode.GRID:
            if self.cell_size is None or not self.cell_size > 0:
                raise ConfigError("grid detector requires cell_size_m > 0")
            if not self.cutoff_freq >= 0:
                raise ConfigError("grid detector requires cutoff_hz >= 0")

        try:
            for params in self.emitters():
                if not params.narrow_line:
                    logger.warning(f"⚠️ Γ/ω = {params.gamma / params.omega:.3g} is outside the narrow-line regime")
        except PreconditionError as e:
            raise ConfigError(str(e)) from e

        if self.kind == ScenarioKind.EX2:
            wavelength = 2.0 * math.pi * self.c / self.omega
            if self.separation < Config.WELL_SEPARATED_WAVELENGTHS * wavelength:
                logger.warning(f"⚠️ separation d={self.separation:.4g} is not ≫ λ={wavelength:.4g}")

    def frame(self) -> Frame:
        return Frame(self.c, self.hbar)

    def detector_plane(self, plane_time: Optional[float] = None) -> DetectorPlane:
        try:
            return DetectorPlane(plane_time if plane_time is not None else self.plane_time,
                                 self.detector_mode, self.cell_size, self.cutoff_freq)
        except PreconditionError as e:
            raise ConfigError(str(e)) from e

    def emitter(self) -> EmitterParams:
        if self.kind == ScenarioKind.EX3:
            return self.cascade_params().first()
        return EmitterParams(self.gamma, self.omega)

    def cascade_params(self) -> CascadeParams:
        if self.kind != ScenarioKind.EX3:
            raise ConfigError("cascade parameters are only defined for ex3")
        return CascadeParams(self.gamma1, self.gamma2, self.omega1, self.omega2)

    def emitters(self) -> List[EmitterParams]:
        if self.kind == ScenarioKind.EX3:
            cascade = self.cascade_params()
            return [cascade.first(), cascade.second()]
        return [EmitterParams(self.gamma, self.omega)]

    def resolved_object_offset(self) -> float:
        if self.object_offset is not None:
            return self.object_offset
        return 100.0 * self.shell_outer_radius

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind.value,
            'mode': self.mode.value,
            'gamma_per_s': self.gamma,
            'omega_rad_per_s': self.omega,
            'gamma1_per_s': self.gamma1,
            'gamma2_per_s': self.gamma2,
            'omega1_rad_per_s': self.omega1,
            'omega2_rad_per_s': self.omega2,
            'alpha': [self.alpha.real, self.alpha.imag],
            'beta': [self.beta.real, self.beta.imag],
            'separation_m': self.separation,
            'shell_outer_radius_m': self.shell_outer_radius,
            'shell_inner_radius_m': self.shell_inner_radius,
            'object_offset_m': self.object_offset,
            'plane_time_s': self.plane_time,
            'detector_mode': self.detector_mode.value,
            'cell_size_m': self.cell_size,
            'cutoff_hz': self.cutoff_freq,
            'detection': self.detection_kind.value,
            'c_m_per_s': self.c,
            'hbar_js': self.hbar,
        }


@dataclass(frozen=True)
class RunSettings:
    """The [run] section of a scenario file, every entry optional."""
    trials: Optional[int] = None
    seed: Optional[int] = None
    grid: Optional[str] = None
    outputs: Optional[str] = None
    emit: Optional[Tuple[str, ...]] = None
    workers: Optional[int] = None
    pairs: Optional[Tuple[Tuple[str, str], ...]] = None
    extra: Dict[str, str] = field(default_factory=dict)


def _detection_kind(value: Any) -> DetectionKind:
    if isinstance(value, DetectionKind):
        return value
    text = str(value).lower()
    if text in ('position', DetectionKind.POSITION.value):
        return DetectionKind.POSITION
    if text in ('momentum', DetectionKind.MOMENTUM.value):
        return DetectionKind.MOMENTUM
    raise ConfigError(f"unknown detection kind {value!r}")


def parse_pairs(text: str) -> Tuple[Tuple[str, str], ...]:
    """'atom:excited, object:state:obj0' -> (('atom', 'excited'), ('object', 'state:obj0'))"""
    pairs = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        site, sep, operator = item.partition(':')
        if not sep or not operator:
            raise ConfigError(f"beable pair {item!r} must look like site:operator")
        pairs.append((site.strip(), operator.strip()))
    return tuple(pairs)


def parse_emit(text: str) -> Tuple[str, ...]:
    flags = tuple(f.strip() for f in text.split(',') if f.strip())
    unknown = [f for f in flags if f not in EMIT_FLAGS]
    if unknown:
        raise ConfigError(f"unknown emit flags {unknown}; expected a subset of {list(EMIT_FLAGS)}")
    return flags


def _read_ini(path: str) -> Tuple[Dict[str, Any], RunSettings]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            parser.read_file(handle)
    except FileNotFoundError as e:
        raise ConfigError(f"scenario file not found: {path}") from e
    except configparser.Error as e:
        raise ConfigError(f"cannot parse scenario file {path}: {e}") from e

    values: Dict[str, Any] = {}
    run: Dict[str, Any] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if section == 'run':
                if key not in _RUN_KEYS:
                    raise ConfigError(f"{path}: unknown key [run] {key}")
                run[key] = raw.strip()
                continue
            target = _SCENARIO_KEYS.get((section, key))
            if target is None:
                raise ConfigError(f"{path}: unknown key [{section}] {key}")
            values[target] = raw.strip()

    try:
        settings = RunSettings(
            trials=int(run['trials']) if 'trials' in run else None,
            seed=int(run['seed']) if 'seed' in run else None,
            grid=run.get('grid'),
            outputs=run.get('outputs'),
            emit=parse_emit(run['emit']) if 'emit' in run else None,
            workers=int(run['workers']) if 'workers' in run else None,
            pairs=parse_pairs(run['pairs']) if 'pairs' in run else None,
        )
    except ValueError as e:
        raise ConfigError(f"{path}: invalid [run] value: {e}") from e
    return values, settings


def load_scenario_file(path: str) -> Tuple[ScenarioConfig, RunSettings]:
    """Parse a scenario file into the scenario and its [run] settings."""
    values, settings = _read_ini(path)
    scenario = ScenarioConfig.from_values(values)
    logger.info(f"📋 Loaded scenario {scenario.kind.value} ({scenario.name}) from {path}")
    return scenario, settings
