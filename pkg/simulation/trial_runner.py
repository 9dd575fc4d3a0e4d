"""
Monte Carlo runner: sample a late-time record per trial, pin its branch, compute
beable trajectories for the configured (site, operator) pairs and extract their
transition times.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from models.beable import BeableTrajectory, LocalOperator
from models.branch import PinnedHistory
from models.detection_record import DetectionRecord, RngStream
from models.errors import BeableSimulationError, InconsistentRecordError
from models.run_result import RunConfig, Statistics
from models.spacetime_event import DetectionKind
from physics.abl import ABLEngine, outcome_label
from physics.beables import BeableEngine, first_crossing
from physics.latent_posterior import LatentPosterior
from physics.scenarios import build_scenario, pin_branch, sample_record
from simulation.result_writer import ResultWriter
from simulation.statistics import StatisticsBuilder
from utils.logger import setup_logger


@dataclass(frozen=True)
class TransitionRecord:
    site: str
    operator: str
    time: Optional[float]


@dataclass
class TrialOutcome:
    trial: int
    record: Optional[DetectionRecord] = None
    pinned: Optional[PinnedHistory] = None
    transitions: List[TransitionRecord] = field(default_factory=list)
    trajectories: List[BeableTrajectory] = field(default_factory=list)
    object_label: Optional[str] = None
    resamples: int = 0
    error: Optional[str] = None
    inconsistent: bool = False


class TrialRunner:
    """Runs trials of one RunConfig; trial i always uses RNG stream i."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.logger = setup_logger('TrialRunner')
        self.scenario = build_scenario(cfg.scenario)
        self.posterior = LatentPosterior(self.scenario)
        self.engine = BeableEngine(self.scenario, self.posterior)
        self.grid = cfg.time_grid.points()
        self.operators: List[LocalOperator] = [self.engine.operator(site, name) for site, name in cfg.pairs]
        self.positions = [self.engine.site_position(op.site) for op in self.operators]
        self.use_abl = self.scenario.detection_kind == DetectionKind.MOMENTUM
        self.abl = ABLEngine(self.scenario) if self.use_abl else None
        self._abl_cache: Dict[str, List[np.ndarray]] = {}
        self.keep_trajectories = cfg.emits('trajectories')

    def _conditional(self, outcome: TrialOutcome, rec: DetectionRecord) -> None:
        outcome.pinned = pin_branch(self.scenario, rec, self.posterior)
        for op, position in zip(self.operators, self.positions):
            arrays, t0 = self.engine.grid_transition(op, position, self.grid, rec)
            outcome.transitions.append(TransitionRecord(op.site, op.name, t0))
            if self.keep_trajectories:
                outcome.trajectories.append(arrays.trajectory(op.site, op, self.engine.excited_index(op.site)))

    def _abl_paths(self, label: str) -> List[np.ndarray]:
        # ABL beables depend on the record only through the photon / no-photon outcome
        if label not in self._abl_cache:
            paths = []
            for op in self.operators:
                diag = np.real(np.diag(op.matrix))
                paths.append(np.array([self.abl.evaluate(op.site, t, label).populations @ diag for t in self.grid]))
            self._abl_cache[label] = paths
        return self._abl_cache[label]

    def _post_selected(self, outcome: TrialOutcome, rec: DetectionRecord) -> None:
        label = outcome_label(rec)
        for op, values in zip(self.operators, self._abl_paths(label)):
            k = first_crossing(self.grid, values)
            outcome.transitions.append(TransitionRecord(op.site, op.name, None if k is None else float(self.grid[k])))
            if self.keep_trajectories:
                outcome.trajectories.append(BeableTrajectory.from_expectations(op.site, op.name, self.grid, values))
        if 'object' in self.scenario.sites:
            origin = self.abl.state_distribution('object', 0.0, label)
            at_origin = origin['obj0'] + origin['obj0star']
            outcome.object_label = 'object:origin' if at_origin > 0.5 else 'object:displaced'

    def run_trial(self, trial: int) -> TrialOutcome:
        outcome = TrialOutcome(trial)
        rng = RngStream(self.cfg.seed, trial)
        try:
            rec = sample_record(self.scenario, rng)
            outcome.record = rec
            if self.use_abl:
                self._post_selected(outcome, rec)
            else:
                self._conditional(outcome, rec)
        except InconsistentRecordError as e:
            outcome.inconsistent = True
            outcome.error = str(e)
            self.logger.warning(f"⚠️ trial {trial}: {e}")
        except BeableSimulationError as e:
            outcome.error = str(e)
            self.logger.error(f"❌ trial {trial} failed: {e}")
        outcome.resamples = rng.resamples
        return outcome

    def run_range(self, start: int, stop: int) -> List[TrialOutcome]:
        outcomes = []
        step = max(1, (stop - start) // 10)
        for trial in range(start, stop):
            outcomes.append(self.run_trial(trial))
            if (trial - start + 1) % step == 0:
                self.logger.debug(f"📈 trials {start}..{trial} done")
        return outcomes

    def run(self) -> List[TrialOutcome]:
        workers = min(self.cfg.workers, self.cfg.trials)
        if workers <= 1:
            return self.run_range(0, self.cfg.trials)
        chunk = math.ceil(self.cfg.trials / (4 * workers))
        bounds = [(s, min(s + chunk, self.cfg.trials)) for s in range(0, self.cfg.trials, chunk)]
        outcomes: List[TrialOutcome] = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so the reduction is in trial order
            for part in pool.map(_run_chunk, [self.cfg] * len(bounds), *zip(*bounds)):
                outcomes.extend(part)
        return outcomes


def _run_chunk(cfg: RunConfig, start: int, stop: int) -> List[TrialOutcome]:
    return TrialRunner(cfg).run_range(start, stop)


def run_trials(cfg: RunConfig) -> Statistics:
    """Run every trial, aggregate, and write the requested files when cfg.outputs is set."""
    runner = TrialRunner(cfg)
    runner.logger.info(f"🚀 {cfg.trials} trials of {runner.scenario} (seed {cfg.seed}, {cfg.workers} worker(s))")
    started = time.perf_counter()
    outcomes = runner.run()
    result = StatisticsBuilder(cfg, runner.scenario).build(outcomes)
    result.wall_time = time.perf_counter() - started
    runner.logger.info(f"📊 {result} in {result.wall_time:.2f}s")
    if result.inconsistent_records:
        runner.logger.warning(f"⚠️ {result.inconsistent_records} inconsistent record(s) skipped")
    if cfg.outputs:
        ResultWriter(cfg.outputs).write_run(cfg, runner.scenario, outcomes, result)
    return result
