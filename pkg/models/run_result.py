from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.config import Config
from config.scenario_config import DEFAULT_EMIT, ScenarioConfig, parse_pairs
from models.detection_record import DetectorPlane
from models.errors import ConfigError


@dataclass(frozen=True)
class TimeGrid:
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ConfigError(f"time grid needs at least 2 steps, got {self.steps}")
        if not self.stop > self.start:
            raise ConfigError(f"time grid stop {self.stop} must exceed start {self.start}")

    @classmethod
    def parse(cls, text: str) -> 'TimeGrid':
        """'start:stop:steps'"""
        parts = text.split(':')
        if len(parts) != 3:
            raise ConfigError(f"grid must look like start:stop:steps, got {text!r}")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as e:
            raise ConfigError(f"invalid grid {text!r}: {e}") from e

    @classmethod
    def default_for(cls, scenario: ScenarioConfig) -> 'TimeGrid':
        stop = min(scenario.plane_time, Config.GRID_SPAN_LIFETIMES / scenario.slowest_rate)
        if stop >= scenario.plane_time:
            # queries must stay strictly before the plane
            stop = scenario.plane_time * (1.0 - 1e-6)
        return cls(0.0, stop, Config.GRID_POINTS)

    def points(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)

    def to_dict(self) -> Dict[str, Any]:
        return {'start': self.start, 'stop': self.stop, 'steps': self.steps}


@dataclass(frozen=True)
class RunConfig:
    """Reproducible description of one Monte Carlo experiment."""
    scenario: ScenarioConfig
    trials: int = Config.DEFAULT_TRIALS
    seed: int = Config.DEFAULT_SEED
    time_grid: Optional[TimeGrid] = None
    outputs: Optional[str] = None
    emit: Tuple[str, ...] = DEFAULT_EMIT
    workers: int = 1
    pairs: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.time_grid is None:
            object.__setattr__(self, 'time_grid', TimeGrid.default_for(self.scenario))
        if self.time_grid.stop >= self.scenario.plane_time:
            raise ConfigError("time grid must end before the detection plane")
        if not self.pairs:
            object.__setattr__(self, 'pairs', tuple(self.scenario.default_pairs))
        object.__setattr__(self, 'emit', tuple(self.emit))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """Rebuild from the config echo written to summary.json."""
        return cls(
            scenario=ScenarioConfig.from_dict(data['scenario']),
            trials=int(data['trials']),
            seed=int(data['seed']),
            time_grid=TimeGrid(**data['time_grid']),
            emit=tuple(data.get('emit', DEFAULT_EMIT)),
            pairs=parse_pairs(','.join(data.get('pairs', []))),
        )

    @property
    def detector(self) -> DetectorPlane:
        return self.scenario.detector_plane()

    def emits(self, flag: str) -> bool:
        return flag in self.emit

    def to_dict(self) -> Dict[str, Any]:
        return {
            'scenario': self.scenario.to_dict(),
            'trials': self.trials,
            'seed': self.seed,
            'time_grid': self.time_grid.to_dict(),
            'detector': self.detector.to_dict(),
            'emit': list(self.emit),
            'pairs': [f"{site}:{op}" for site, op in self.pairs],
        }


@dataclass
class Statistics:
    """Aggregated Monte Carlo results of one run."""
    trials: int
    branch_frequencies: Dict[str, float] = field(default_factory=dict)
    branch_counts: Dict[str, int] = field(default_factory=dict)
    branch_checks: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    detection_frequency: float = 0.0
    transition_histogram: List[int] = field(default_factory=list)
    histogram_edges: List[float] = field(default_factory=list)
    transition_counts: Dict[str, int] = field(default_factory=dict)
    ks_statistic: Optional[float] = None
    ks_critical: Optional[float] = None
    ks_pass: Optional[bool] = None
    delay_ks: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    correlation: Optional[float] = None
    azimuth_chi2: Optional[float] = None
    azimuth_pvalue: Optional[float] = None
    azimuth_pass: Optional[bool] = None
    outcome_frequencies: Dict[str, float] = field(default_factory=dict)
    inconsistent_records: int = 0
    failed_trials: int = 0
    resamples: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        """Summary fields; wall time is left out so repeated runs serialize identically."""
        return {
            'trials': self.trials,
            'branch_frequencies': dict(self.branch_frequencies),
            'branch_counts': dict(self.branch_counts),
            'branch_checks': {k: dict(v) for k, v in self.branch_checks.items()},
            'detection_frequency': self.detection_frequency,
            'transition_histogram': {'counts': list(self.transition_histogram),
                                     'edges': list(self.histogram_edges)},
            'transition_counts': dict(self.transition_counts),
            'ks_statistic': self.ks_statistic,
            'ks_critical': self.ks_critical,
            'ks_pass': self.ks_pass,
            'delay_ks': {k: dict(v) for k, v in self.delay_ks.items()},
            'correlation': self.correlation,
            'azimuth_chi2': self.azimuth_chi2,
            'azimuth_pvalue': self.azimuth_pvalue,
            'azimuth_pass': self.azimuth_pass,
            'outcome_frequencies': dict(self.outcome_frequencies),
            'inconsistent_records': self.inconsistent_records,
            'failed_trials': self.failed_trials,
            'resamples': self.resamples,
        }

    def __str__(self) -> str:
        branches = ', '.join(f"{k}={v:.4f}" for k, v in sorted(self.branch_frequencies.items()))
        ks = 'n/a' if self.ks_statistic is None else f"D={self.ks_statistic:.5f} ({'pass' if self.ks_pass else 'FAIL'})"
        return f"Statistics(trials={self.trials}, branches[{branches}], KS {ks})"
