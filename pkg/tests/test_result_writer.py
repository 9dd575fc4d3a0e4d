import json

import pandas as pd
import pytest

from config.scenario_config import ScenarioConfig
from models.run_result import RunConfig, TimeGrid
from physics.scenarios import build_scenario
from simulation.result_writer import (BEABLE_COLUMNS, TRANSITION_COLUMNS, TRIAL_COLUMNS, ResultWriter, dump_json,
                                      load_run)
from simulation.statistics import recompute_statistics
from simulation.trial_runner import run_trials


@pytest.fixture
def ex1_run(tmp_path):
    out = tmp_path / 'ex1'
    cfg = RunConfig(ScenarioConfig.defaults('ex1'), trials=50, seed=11, time_grid=TimeGrid(0.0, 10.0, 64),
                    outputs=str(out), emit=('detections', 'trajectories', 'transitions', 'histograms', 'summary'))
    return cfg, run_trials(cfg), out


class TestResultWriter:
    def test_files_and_columns(self, ex1_run):
        cfg, stats, out = ex1_run
        for name in ('detections.csv', 'beables.csv', 'transitions.csv', 'histogram.csv', 'trials.csv',
                     'summary.json'):
            assert (out / name).exists()
        assert list(pd.read_csv(out / 'beables.csv').columns) == BEABLE_COLUMNS + ['trace_distance_to_excited']
        assert list(pd.read_csv(out / 'transitions.csv').columns) == TRANSITION_COLUMNS
        assert list(pd.read_csv(out / 'trials.csv').columns) == TRIAL_COLUMNS
        detections = pd.read_csv(out / 'detections.csv')
        assert {'trial', 'branch', 'x_m', 'y_m', 'z_m', 'T_s'} <= set(detections.columns)
        assert 'px' not in detections.columns
        histogram = pd.read_csv(out / 'histogram.csv')
        assert histogram['count'].sum() == stats.transition_counts['atom:excited']

    def test_beables_cover_the_grid(self, ex1_run):
        cfg, _, out = ex1_run
        beables = pd.read_csv(out / 'beables.csv')
        assert len(beables) == cfg.trials * cfg.time_grid.steps
        assert beables['expectation'].between(0.0, 1.0).all()
        # two levels, always occupied: the distance to |e⟩ is the ground population
        expected = 1.0 - beables['expectation'].to_numpy()
        assert beables['trace_distance_to_excited'].to_numpy() == pytest.approx(expected, abs=1e-12)

    def test_abl_trajectories_have_no_trace_column(self, tmp_path):
        cfg = RunConfig(ScenarioConfig.defaults('ex5'), trials=3, time_grid=TimeGrid(0.0, 10.0, 16),
                        outputs=str(tmp_path), emit=('trajectories',))
        run_trials(cfg)
        assert list(pd.read_csv(tmp_path / 'beables.csv').columns) == BEABLE_COLUMNS

    def test_emit_selects_files(self, tmp_path):
        cfg = RunConfig(ScenarioConfig.defaults('ex1'), trials=5, outputs=str(tmp_path), emit=('summary',))
        run_trials(cfg)
        assert sorted(p.name for p in tmp_path.iterdir()) == ['summary.json', 'trials.csv']

    def test_summary_contents(self, ex1_run):
        cfg, stats, out = ex1_run
        summary = json.loads((out / 'summary.json').read_text())
        assert summary['seed'] == 11
        assert summary['config']['trials'] == 50
        assert summary['config']['pairs'] == ['atom:excited']
        assert summary['branch_weights'] == {'decay': 1.0}
        assert summary['statistics']['branch_counts'] == {'decay': 50}
        assert summary['convergence'] is None
        assert summary['normalization_ratio'] == pytest.approx(0.75, abs=1e-6)


class TestLoadRun:
    def test_round_trip(self, ex1_run):
        cfg, stats, out = ex1_run
        run = load_run(str(out))
        assert run['summary']['statistics']['trials'] == 50
        assert len(run['trials']) == 50
        rebuilt = RunConfig.from_dict(run['summary']['config'])
        assert rebuilt.to_dict() == cfg.to_dict()

    def test_recomputed_statistics_match(self, ex1_run):
        _, stats, out = ex1_run
        again = recompute_statistics(load_run(str(out)))
        assert again.branch_counts == stats.branch_counts
        assert again.transition_histogram == stats.transition_histogram
        assert again.ks_statistic == pytest.approx(stats.ks_statistic, rel=1e-12)
        assert again.detection_frequency == stats.detection_frequency
        assert again.branch_checks == stats.branch_checks
        assert again.delay_ks == stats.delay_ks
        assert again.delay_ks

    def test_recomputed_cascade_statistics_match(self, tmp_path):
        cfg = RunConfig(ScenarioConfig.defaults('ex3'), trials=200, seed=5, time_grid=TimeGrid(0.0, 8.0, 32),
                        outputs=str(tmp_path), emit=('detections', 'transitions', 'summary'))
        stats = run_trials(cfg)
        again = recompute_statistics(load_run(str(tmp_path)))
        assert stats.correlation is not None and stats.azimuth_chi2 is not None
        assert again.correlation == pytest.approx(stats.correlation, rel=1e-12)
        assert again.azimuth_chi2 == pytest.approx(stats.azimuth_chi2, rel=1e-12)
        assert again.azimuth_pass == stats.azimuth_pass
        assert again.delay_ks.keys() == stats.delay_ks.keys()
        for key, ks in stats.delay_ks.items():
            assert again.delay_ks[key]['statistic'] == pytest.approx(ks['statistic'], rel=1e-12)

    def test_missing_summary(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_run(str(tmp_path))

    def test_recompute_needs_the_tables(self, tmp_path):
        cfg = RunConfig(ScenarioConfig.defaults('ex1'), trials=3, outputs=str(tmp_path), emit=('histograms',))
        stats = run_trials(cfg)
        ResultWriter(str(tmp_path)).write_summary(cfg, build_scenario(cfg.scenario), stats)
        with pytest.raises(FileNotFoundError):
            recompute_statistics(load_run(str(tmp_path)))


def test_dump_json_is_sorted_with_trailing_newline(tmp_path):
    path = tmp_path / 'x.json'
    dump_json({'b': 1, 'a': complex(1.0, 2.0)}, path)
    text = path.read_text()
    assert text.endswith('}\n')
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text)['a'] == [1.0, 2.0]
