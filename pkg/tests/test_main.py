import json

import pytest

from main import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


class TestOverlap:
    def test_zero_separation_is_full_overlap(self, capsys):
        code, out = run_cli(capsys, 'overlap', '--d-over-lambda', '0', '--format', 'json')
        assert code == EXIT_OK
        (row,) = json.loads(out)
        assert (row['d_over_lambda'], row['closed_form']) == (0.0, 1.0)
        assert row['normalization_ratio'] == pytest.approx(0.75, abs=1e-6)

    def test_csv_columns(self, capsys):
        code, out = run_cli(capsys, 'overlap', '--d-over-lambda', '0.25', '1')
        assert code == EXIT_OK
        lines = out.strip().split('\n')
        assert lines[0] == 'd_over_lambda,closed_form,normalization_ratio'
        assert len(lines) == 3

    def test_negative_ratio(self, capsys):
        code, _ = run_cli(capsys, 'overlap', '--d-over-lambda', '-1')
        assert code == EXIT_CONFIG


class TestSimulate:
    def test_reruns_write_identical_files(self, capsys, tmp_path, scenario_file):
        outputs = []
        for name in ('a', 'b'):
            out = tmp_path / name
            code, text = run_cli(capsys, 'simulate', '--scenario', scenario_file('ex1'), '--trials', '25',
                                 '--out', str(out))
            assert code == EXIT_OK
            assert json.loads(text)['branch_counts'] == {'decay': 25}
            outputs.append({p.name: p.read_bytes() for p in out.iterdir()})
        assert outputs[0] == outputs[1]
        assert 'summary.json' in outputs[0]

    def test_beables_adds_trajectories(self, capsys, tmp_path):
        code, _ = run_cli(capsys, 'beables', '--kind', 'ex1', '--trials', '3', '--grid', '0:5:16',
                          '--out', str(tmp_path))
        assert code == EXIT_OK
        assert (tmp_path / 'beables.csv').exists()

    def test_bad_scenario_file(self, capsys, tmp_path):
        path = tmp_path / 'bad.cfg'
        path.write_text('[scenario]\nkind = ex1\n\n[emitter]\nspin = 2\n')
        code, _ = run_cli(capsys, 'simulate', '--scenario', str(path), '--out', str(tmp_path / 'out'))
        assert code == EXIT_CONFIG

    def test_missing_scenario_file(self, capsys, tmp_path):
        code, _ = run_cli(capsys, 'simulate', '--scenario', str(tmp_path / 'nope.cfg'))
        assert code == EXIT_CONFIG


class TestAbl:
    def test_needs_momentum_detection(self, capsys, tmp_path):
        code, _ = run_cli(capsys, 'abl', '--kind', 'ex1', '--trials', '5', '--out', str(tmp_path))
        assert code == EXIT_CONFIG

    def test_outcome_frequencies(self, capsys, tmp_path, scenario_file):
        code, out = run_cli(capsys, 'abl', '--scenario', scenario_file('ex5'), '--trials', '200',
                            '--out', str(tmp_path))
        assert code == EXIT_OK
        report = json.loads(out)
        frequencies = report['outcome_frequencies']
        assert frequencies['photon'] == pytest.approx(frequencies['object:displaced'])
        assert report['branch_weights']['absorbed'] == pytest.approx(0.6)
        assert report['object_distribution']['no-photon']['obj100'] == 0.0


class TestStatsAndConvergence:
    def test_stats_on_a_missing_directory(self, capsys, tmp_path):
        code, _ = run_cli(capsys, 'stats', '--out', str(tmp_path / 'missing'))
        assert code == EXIT_RUNTIME

    def test_stats_recomputes_a_run(self, capsys, tmp_path):
        code, first = run_cli(capsys, 'simulate', '--kind', 'ex1', '--trials', '20', '--out', str(tmp_path))
        assert code == EXIT_OK
        code, second = run_cli(capsys, 'stats', '--out', str(tmp_path))
        assert code == EXIT_OK
        assert json.loads(second)['branch_counts'] == json.loads(first)['branch_counts']

    def test_convergence_needs_two_values(self, capsys, tmp_path):
        code, _ = run_cli(capsys, 'convergence', '--kind', 'ex2', '--T-values', '30', '--out', str(tmp_path))
        assert code == EXIT_CONFIG
