"""
Flat-file outputs of a run: CSV tables through pandas and a sorted-key summary.json.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from config.config import Config
from models.branch import Scenario
from models.run_result import RunConfig, Statistics
from physics.photon_wave import normalization_discrepancy
from utils.logger import setup_logger

DETECTION_COLUMNS = ['trial', 'branch', 'photon_id', 'kind', 'x_m', 'y_m', 'z_m', 'T_s',
                     'px', 'py', 'pz', 'cell_i', 'cell_j', 'cell_k']
BEABLE_COLUMNS = ['trial', 'site', 'operator', 't_s', 'expectation']
OPTIONAL_BEABLE_COLUMNS = ['trace_distance_to_excited']
TRANSITION_COLUMNS = ['trial', 'site', 'operator', 't0_s']
TRIAL_COLUMNS = ['trial', 'branch', 'detections', 'status', 'resamples']
CORE_DETECTION_COLUMNS = ('trial', 'branch', 'photon_id', 'kind', 'T_s')

CSV_OPTIONS = {'index': False, 'float_format': '%.17g', 'lineterminator': '\n'}


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dump_json(data: Dict[str, Any], path: Path) -> None:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write('\n')


class ResultWriter:
    """Writes the files selected by RunConfig.emit into one output directory."""

    def __init__(self, out_dir: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.logger = setup_logger('ResultWriter')

    def write_table(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, **CSV_OPTIONS)
        self.logger.info(f"💾 {name}: {len(frame)} rows")
        return path

    def detections_frame(self, outcomes: Sequence) -> pd.DataFrame:
        rows = []
        for o in outcomes:
            if o.record is None:
                continue
            for det in o.record.detections:
                rows.append({'trial': o.trial, 'branch': o.record.branch, **det.to_dict()})
        frame = pd.DataFrame(rows, columns=DETECTION_COLUMNS)
        # optional columns only when some click carries them
        return frame[[c for c in DETECTION_COLUMNS if c in CORE_DETECTION_COLUMNS or frame[c].notna().any()]]

    def beables_frame(self, outcomes: Sequence) -> pd.DataFrame:
        parts = [traj.to_frame().assign(trial=o.trial) for o in outcomes for traj in o.trajectories]
        if not parts:
            return pd.DataFrame(columns=BEABLE_COLUMNS)
        frame = pd.concat(parts, ignore_index=True)
        # trace distance only when every trajectory kept its states
        extra = [c for c in OPTIONAL_BEABLE_COLUMNS if c in frame.columns and frame[c].notna().all()]
        return frame[BEABLE_COLUMNS + extra]

    def transitions_frame(self, outcomes: Sequence) -> pd.DataFrame:
        rows = [{'trial': o.trial, 'site': tr.site, 'operator': tr.operator, 't0_s': tr.time}
                for o in outcomes for tr in o.transitions]
        return pd.DataFrame(rows, columns=TRANSITION_COLUMNS)

    def trials_frame(self, outcomes: Sequence) -> pd.DataFrame:
        rows = []
        for o in outcomes:
            status = 'ok' if o.error is None else ('inconsistent' if o.inconsistent else 'failed')
            rows.append({'trial': o.trial,
                         'branch': o.record.branch if o.record is not None else None,
                         'detections': len(o.record.detections) if o.record is not None else 0,
                         'status': status, 'resamples': o.resamples})
        return pd.DataFrame(rows, columns=TRIAL_COLUMNS)

    def write_histogram(self, stats: Statistics) -> Path:
        edges = np.asarray(stats.histogram_edges, dtype=float)
        frame = pd.DataFrame({'bin_lo_s': edges[:-1], 'bin_hi_s': edges[1:],
                              'count': np.asarray(stats.transition_histogram, dtype=int)})
        return self.write_table(frame, 'histogram.csv')

    def summary(self, cfg: RunConfig, scenario: Scenario, stats: Statistics,
                convergence: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        return {
            'version': Config.VERSION,
            'seed': cfg.seed,
            'config': cfg.to_dict(),
            'branch_weights': scenario.born_weights(),
            'normalization_ratio': (normalization_discrepancy(scenario.emitter, scenario.frame)
                                    if scenario.emitter is not None else None),
            'statistics': stats.to_dict(),
            'convergence': convergence,
        }

    def write_summary(self, cfg: RunConfig, scenario: Scenario, stats: Statistics,
                      convergence: Optional[Dict[str, Any]] = None) -> Path:
        path = self.out_dir / 'summary.json'
        dump_json(self.summary(cfg, scenario, stats, convergence), path)
        self.logger.info(f"💾 summary.json written to {self.out_dir}")
        return path

    def write_run(self, cfg: RunConfig, scenario: Scenario, outcomes: Sequence, stats: Statistics) -> List[Path]:
        written = []
        try:
            if cfg.emits('detections'):
                written.append(self.write_table(self.detections_frame(outcomes), 'detections.csv'))
            if cfg.emits('trajectories'):
                written.append(self.write_table(self.beables_frame(outcomes), 'beables.csv'))
            if cfg.emits('transitions'):
                written.append(self.write_table(self.transitions_frame(outcomes), 'transitions.csv'))
            if cfg.emits('histograms'):
                written.append(self.write_histogram(stats))
            if cfg.emits('summary'):
                written.append(self.write_table(self.trials_frame(outcomes), 'trials.csv'))
                written.append(self.write_summary(cfg, scenario, stats))
        except OSError as e:
            self.logger.error(f"❌ Error writing results to {self.out_dir}: {e}")
            raise
        return written


def load_run(out_dir: str) -> Dict[str, Any]:
    """Read back summary.json and whichever CSV tables a run left in out_dir."""
    root = Path(out_dir)
    summary_path = root / 'summary.json'
    if not summary_path.exists():
        raise FileNotFoundError(f"no summary.json in {out_dir}")
    with open(summary_path, 'r', encoding='utf-8') as f:
        data: Dict[str, Any] = {'summary': json.load(f)}
    for name in ('detections', 'transitions', 'trials', 'beables'):
        path = root / f'{name}.csv'
        data[name] = pd.read_csv(path) if path.exists() else None
    return data
