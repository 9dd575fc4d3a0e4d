"""
Convergence studies over the plane time T and the coarse-detector cell size L.

T axis: the exact correlated transition time at the distant superposition site
against its large-T form, for the same sampled emissions re-detected at larger T.
L axis: coarse-grid transition times against the ideal-detector ones.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from models.branch import PinnedHistory, Scenario, ScenarioKind
from models.detection_record import RngStream
from models.errors import ConfigError, InconsistentRecordError
from models.run_result import RunConfig
from models.spacetime_event import DetectionKind
from physics.detection import superposition_sites
from physics.latent_posterior import LatentPosterior
from physics.scenarios import build_scenario, pin_branch, sample_record
from physics.spacetime import correlated_transition_time
from simulation.statistics import ks_two_sample
from utils.logger import setup_logger

logger = setup_logger('Convergence')

TABLE_COLUMNS = ['axis', 'value', 'samples', 'mean_error', 'max_error', 'bound', 'ratio',
                 'ks_statistic', 'ks_pvalue', 'ks_pass']


@dataclass
class ConvergenceResult:
    table: pd.DataFrame
    exponents: Dict[str, Optional[float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        rows = self.table.astype(object).where(self.table.notna(), None).to_dict(orient='records')
        return {'table': rows, 'exponents': dict(self.exponents)}


def fitted_exponent(values: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Slope of log(error) against log(value); None when fewer than two positive errors."""
    x, y = np.asarray(values, dtype=float), np.asarray(errors, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def _row(axis: str, value: float, **fields) -> Dict[str, object]:
    row = {c: None for c in TABLE_COLUMNS}
    row.update({'axis': axis, 'value': value}, **fields)
    return row


class ConvergenceStudy:
    """Sweeps one RunConfig over plane times and cell sizes, cfg.trials samples per point."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.logger = logger

    def _scenario(self, **overrides) -> Scenario:
        return build_scenario(self.cfg.scenario.with_overrides(**overrides))

    def _pinned(self, scn: Scenario, seed: int) -> Dict[int, tuple]:
        """trial -> (record, pinned history) for every trial whose record clicked."""
        posterior = LatentPosterior(scn)
        pinned = {}
        for trial in range(self.cfg.trials):
            rec = sample_record(scn, RngStream(seed, trial))
            if rec.is_empty:
                continue
            try:
                pinned[trial] = (rec, pin_branch(scn, rec, posterior))
            except InconsistentRecordError as e:
                self.logger.warning(f"⚠️ trial {trial} skipped: {e}")
        return pinned

    @staticmethod
    def _emission_time(history: PinnedHistory) -> Optional[float]:
        return next(iter(history.latent_times.values()))

    def _asymptotic_errors(self, scn: Scenario, pinned: Dict[int, tuple]) -> Dict[int, float]:
        r_minus, r_plus = superposition_sites(scn.parameters['separation'])
        errors = {}
        for trial, (rec, history) in pinned.items():
            click = rec.detections[0]
            emitted_from, distant = (r_plus, r_minus) if history.branch == 'plus' else (r_minus, r_plus)
            t = self._emission_time(history)
            t_exact, t_asymptotic = correlated_transition_time(t, click, emitted_from, distant, scn.frame)
            errors[trial] = abs(t_exact - t_asymptotic)
        return errors

    def sweep_plane_time(self, T_values: Sequence[float]) -> List[Dict[str, object]]:
        cfg = self.cfg
        if cfg.scenario.detection_kind == DetectionKind.MOMENTUM:
            raise ConfigError("plane-time sweeps need position detections")
        scenarios = {T: self._scenario(plane_time=T) for T in T_values}
        runs = {T: self._pinned(scenarios[T], cfg.seed) for T in T_values}
        # only emissions that reached the plane at every T are compared
        common = sorted(set.intersection(*(set(p) for p in runs.values())))
        rows, previous = [], None
        for T in T_values:
            scn = scenarios[T]
            fields: Dict[str, object] = {'samples': len(common)}
            if scn.kind == ScenarioKind.EX2 and common:
                errors = self._asymptotic_errors(scn, {k: runs[T][k] for k in common})
                err = np.array([errors[k] for k in common])
                fields.update(mean_error=float(err.mean()), max_error=float(err.max()))
                if previous:
                    fields['ratio'] = previous / fields['mean_error'] if fields['mean_error'] > 0 else None
                previous = fields['mean_error']

            # delay law at T against 2T, restricted to delays both planes can register
            doubled = self._pinned(self._scenario(plane_time=2.0 * T), cfg.seed + 1)
            here = [self._emission_time(h) for _, h in runs[T].values()]
            there = [d for d in (self._emission_time(h) for _, h in doubled.values()) if d is not None and d <= T]
            here = [d for d in here if d is not None]
            if here and there:
                ks = ks_two_sample(here, there)
                fields.update(ks_statistic=ks.statistic, ks_pvalue=ks.pvalue, ks_pass=ks.passed)
            rows.append(_row('T', float(T), **fields))
            self.logger.info(f"📐 T={T:.6g}: {fields}")
        return rows

    def sweep_cell_size(self, L_values: Sequence[float]) -> List[Dict[str, object]]:
        cfg = self.cfg
        if cfg.scenario.detection_kind == DetectionKind.MOMENTUM:
            raise ConfigError("cell-size sweeps need position detections")
        ideal = self._pinned(self._scenario(detector_mode='ideal'), cfg.seed)
        rows, previous = [], None
        for L in L_values:
            coarse = self._pinned(self._scenario(detector_mode='grid', cell_size=L, cutoff_freq=0.0), cfg.seed)
            common = sorted(set(ideal) & set(coarse))
            errors = [abs(self._emission_time(coarse[k][1]) - self._emission_time(ideal[k][1])) for k in common
                      if self._emission_time(coarse[k][1]) is not None]
            bound = math.sqrt(3.0) / 2.0 * L / cfg.scenario.c
            fields: Dict[str, object] = {'samples': len(errors), 'bound': bound}
            if errors:
                err = np.asarray(errors)
                fields.update(mean_error=float(err.mean()), max_error=float(err.max()))
                if err.max() > bound * (1.0 + 1e-9):
                    self.logger.warning(f"⚠️ L={L:.6g}: coarse error {err.max():.3e} exceeds the half-diagonal bound")
                if previous:
                    fields['ratio'] = previous / fields['mean_error'] if fields['mean_error'] > 0 else None
                previous = fields['mean_error']
            rows.append(_row('L', float(L), **fields))
            self.logger.info(f"📐 L={L:.6g}: {fields}")
        return rows

    def run(self, T_values: Sequence[float] = (), L_values: Sequence[float] = ()) -> ConvergenceResult:
        for name, values in (('T', T_values), ('L', L_values)):
            if values and len(values) < 2:
                raise ConfigError(f"a {name} sweep needs at least two values")
            if any(not v > 0 for v in values):
                raise ConfigError(f"{name} values must be positive")
        if not T_values and not L_values:
            raise ConfigError("nothing to sweep: give T values, L values or both")

        rows = []
        if T_values:
            rows.extend(self.sweep_plane_time(sorted(T_values)))
        if L_values:
            rows.extend(self.sweep_cell_size(sorted(L_values)))
        table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
        exponents = {}
        for axis in ('T', 'L'):
            part = table[(table['axis'] == axis) & table['mean_error'].notna()]
            exponents[axis] = fitted_exponent(part['value'], part['mean_error']) if len(part) else None
        self.logger.info(f"📊 fitted exponents: {exponents}")
        return ConvergenceResult(table, exponents)


def convergence_study(cfg: RunConfig, T_values: Sequence[float] = (),
                      L_values: Sequence[float] = ()) -> ConvergenceResult:
    """Per T: mean |t′_exact − t′_asymptotic|; per L: mean |t₀_coarse − t₀_ideal|; with fitted exponents."""
    return ConvergenceStudy(cfg).run(T_values, L_values)
