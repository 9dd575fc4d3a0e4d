import filecmp
import time

import pytest

from conftest import sigma
from config.scenario_config import ScenarioConfig
from models.detection_record import DetectionRecord
from models.run_result import RunConfig, TimeGrid
from models.spacetime_event import DetectionEvent
from simulation.statistics import ks_exponential
from simulation.trial_runner import TrialRunner, run_trials


def run_config(kind, trials=100, seed=7, **kwargs):
    return RunConfig(ScenarioConfig.defaults(kind), trials=trials, seed=seed, **kwargs)


class TestTrialRunner:
    def test_trials_are_deterministic(self):
        cfg = run_config('ex1', trials=5)
        a = TrialRunner(cfg).run_trial(3)
        b = TrialRunner(cfg).run_trial(3)
        assert a.record == b.record
        assert a.transitions == b.transitions

    def test_transition_sits_at_the_emission_delay(self):
        cfg = run_config('ex1', trials=40)
        runner = TrialRunner(cfg)
        checked = 0
        for i in range(cfg.trials):
            outcome = runner.run_trial(i)
            tau = outcome.pinned.latent_times['tau']
            t0 = outcome.transitions[0].time
            if tau < cfg.time_grid.stop:
                assert t0 == pytest.approx(tau, abs=1e-6)
                checked += 1
            else:
                assert t0 is None
        assert checked > 30

    def test_cascade_records_both_pairs(self):
        outcome = TrialRunner(run_config('ex3', trials=1)).run_trial(0)
        assert [(t.site, t.operator) for t in outcome.transitions] == [('atom', 'state:e2'), ('atom', 'excited')]

    def test_momentum_scenario_uses_post_selection(self):
        runner = TrialRunner(run_config('ex5', trials=1))
        assert runner.use_abl
        outcome = runner.run_trial(0)
        expected = 'object:displaced' if outcome.record.detections else 'object:origin'
        assert outcome.object_label == expected
        assert outcome.pinned is None

    def test_trajectories_kept_on_request(self):
        cfg = run_config('ex1', trials=1, emit=('trajectories', 'summary'))
        outcome = TrialRunner(cfg).run_trial(0)
        traj = outcome.trajectories[0]
        assert (traj.site, traj.operator) == ('atom', 'excited')
        assert len(traj.values) == cfg.time_grid.steps
        assert traj.excited_index == 0


class TestRunTrials:
    def test_serial_and_parallel_agree(self):
        serial = run_trials(run_config('ex2', trials=40))
        parallel = run_trials(run_config('ex2', trials=40, workers=2))
        assert serial.to_dict() == parallel.to_dict()

    def test_inconsistent_records_are_counted(self, monkeypatch):
        bad = DetectionRecord(30.0, (DetectionEvent(30.0, (31.0, 0.0, 0.0)),), branch='decay')
        monkeypatch.setattr('simulation.trial_runner.sample_record', lambda scn, rng: bad)
        result = run_trials(run_config('ex1', trials=3))
        assert result.inconsistent_records == 3
        assert result.failed_trials == 0
        assert result.branch_counts['decay'] == 3

    def test_slow_decay_queries_near_the_plane(self):
        # Γ = 0.1 leaves ~5% of records without a click, queried up to T
        cfg = RunConfig(ScenarioConfig.defaults('ex2').with_overrides(gamma=0.1), trials=20, seed=3)
        result = run_trials(cfg)
        assert result.failed_trials == 0
        assert sum(result.branch_counts.values()) == 20

    def test_branch_frequency_of_the_superposition(self):
        n = 2000
        result = run_trials(run_config('ex2', trials=n, time_grid=TimeGrid(0.0, 5.0, 32)))
        assert abs(result.branch_frequencies['minus'] - 0.3) <= 4 * sigma(0.3, n)
        assert sum(result.branch_counts.values()) == n

    def test_object_frequency_under_post_selection(self):
        n = 1000
        result = run_trials(run_config('ex5', trials=n))
        assert abs(result.outcome_frequencies['object:origin'] - 0.6) <= 3 * sigma(0.6, n)
        assert result.outcome_frequencies['object:origin'] + result.outcome_frequencies['object:displaced'] \
            == pytest.approx(1.0)

    def test_outputs_are_reproducible(self, tmp_path):
        for name in ('a', 'b'):
            run_trials(run_config('ex1', trials=30, outputs=str(tmp_path / name)))
        names = ['detections.csv', 'transitions.csv', 'histogram.csv', 'trials.csv', 'summary.json']
        match, mismatch, errors = filecmp.cmpfiles(tmp_path / 'a', tmp_path / 'b', names, shallow=False)
        assert sorted(match) == sorted(names)
        assert not mismatch and not errors


@pytest.mark.slow
def test_transition_times_follow_the_decay_law():
    n = 100000
    runner = TrialRunner(run_config('ex1', trials=n, time_grid=TimeGrid(0.0, 29.0, 64)))
    times = [o.transitions[0].time for o in runner.run_range(0, n)]
    result = ks_exponential([t for t in times if t is not None], 1.0)
    assert result.passed


@pytest.mark.slow
def test_single_atom_trials_run_within_budget():
    n = 100000
    cfg = run_config('ex1', trials=n, seed=11)
    start = time.perf_counter()
    result = run_trials(cfg)
    elapsed = time.perf_counter() - start
    assert result.failed_trials == 0
    assert elapsed < 30.0, f"{n} trials took {elapsed:.1f} s"
