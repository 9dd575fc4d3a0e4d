import math

import numpy as np
import pytest

from conftest import sigma
from models.branch import PosteriorMode, ScenarioKind
from models.detection_record import DetectionRecord, RngStream
from models.errors import InconsistentRecordError
from models.spacetime_event import DetectionEvent, DetectionKind, Event
from physics.scenarios import branch_likelihood, emission_probability, pin_branch, sample_record, select_branch
from simulation.statistics import ks_exponential


class TestBuild:
    def test_ex1_single_family(self, ex1):
        assert ex1.labels == ['decay']
        assert ex1.parameters['emission_probability'] == pytest.approx(-math.expm1(-30.0))

    def test_ex2_born_weights(self, ex2):
        weights = ex2.born_weights()
        assert weights['minus'] == pytest.approx(0.3)
        assert weights['plus'] == pytest.approx(0.7)
        assert set(ex2.sites) == {'atom_minus', 'atom_plus'}

    def test_ex3_two_step_chain(self, ex3):
        family = ex3.family('cascade')
        assert [v.name for v in family.latent_vars] == ['tau1', 'tau2']
        assert family.state_sequence('atom') == ['e2', 'e1', 'g']

    def test_ex4_absorbed_photon_is_undetectable(self, ex4):
        absorbed, escape = ex4.family('absorbed'), ex4.family('escape')
        assert absorbed.detectable_photons == []
        assert escape.latent_vars[0].upper == pytest.approx(60.0)
        assert absorbed.site_transitions('object')[0].offset == pytest.approx(19.0)
        assert escape.initial_states['object'] == 'obj100'

    def test_ex5_uses_momentum_detection(self, ex5):
        assert ex5.detection_kind == DetectionKind.MOMENTUM
        assert ex5.kind == ScenarioKind.EX5

    def test_cutoff_above_the_line_hides_the_photon(self, make_scenario):
        scn = make_scenario('ex1', detector_mode='grid', cell_size=1.0, cutoff_freq=1e6)
        assert scn.family('decay').detectable_photons == []
        assert all(sample_record(scn, RngStream(1, i)).is_empty for i in range(50))

    def test_emission_probability(self, ex1):
        assert emission_probability(ex1.emitter, 2.0) == pytest.approx(1.0 - math.exp(-2.0))


class TestSampling:
    def test_same_stream_same_record(self, ex3):
        assert sample_record(ex3, RngStream(7, 12)) == sample_record(ex3, RngStream(7, 12))

    def test_ex2_branch_frequency(self, ex2):
        n = 10000
        minus = sum(sample_record(ex2, RngStream(7, i)).branch == 'minus' for i in range(n))
        assert abs(minus / n - 0.3) <= 3 * sigma(0.3, n)

    def test_ex4_detection_frequency(self, ex4):
        n = 10000
        clicks = sum(not sample_record(ex4, RngStream(7, i)).is_empty for i in range(n))
        assert abs(clicks / n - 0.4) <= 3 * sigma(0.4, n)

    def test_momentum_records(self, ex5):
        for i in range(100):
            rec = sample_record(ex5, RngStream(3, i))
            if rec.branch == 'escape':
                assert rec.has_momentum
            else:
                assert rec.is_empty and rec.no_detection_branches == ('absorbed',)


class TestPinning:
    def test_ex1_recovers_the_emission_delay(self, ex1):
        for i in range(100):
            rec = sample_record(ex1, RngStream(7, i))
            history = pin_branch(ex1, rec)
            assert history.latent_times['tau'] == pytest.approx(rec.latent_truth['tau'], abs=1e-9)
            assert history.trajectories['atom'].transition_times[0] == pytest.approx(rec.latent_truth['tau'],
                                                                                     abs=1e-9)

    def test_ex1_without_a_click_stays_excited(self, make_scenario):
        scn = make_scenario('ex1', plane_time=0.5)
        empty = next(r for r in (sample_record(scn, RngStream(1, i)) for i in range(200)) if r.is_empty)
        history = pin_branch(scn, empty)
        assert history.latent_times['tau'] is None
        assert history.trajectories['atom'].transitions == ()
        assert history.trajectories['atom'].state_at(0.49) == 'e'

    def test_ex3_orders_the_cascade(self, ex3):
        for i in range(100):
            rec = sample_record(ex3, RngStream(7, i))
            history = pin_branch(ex3, rec)
            t1, t2 = history.trajectories['atom'].transition_times
            assert t1 < t2
            assert history.latent_times['tau1'] == pytest.approx(rec.latent_truth['tau1'], abs=1e-9)
            assert history.latent_times['tau2'] == pytest.approx(rec.latent_truth['tau2'], abs=1e-9)
            assert history.trajectories['atom'].final_state == 'g'

    def test_ex3_recovered_delays_follow_their_rates(self, ex3):
        n = 4000
        histories = [pin_branch(ex3, sample_record(ex3, RngStream(13, i))) for i in range(n)]
        tau1 = [h.latent_times['tau1'] for h in histories if h.latent_times['tau1'] is not None]
        tau2 = [h.latent_times['tau2'] for h in histories if h.latent_times['tau2'] is not None]
        assert len(tau1) > 0.99 * n and len(tau2) > 0.99 * n
        assert ks_exponential(tau1, ex3.cascade.gamma1).passed
        assert ks_exponential(tau2, ex3.cascade.gamma2).passed

    def test_ex4_absorbed_object_absorbs_at_an_unobserved_time(self, ex4):
        rec = next(r for r in (sample_record(ex4, RngStream(7, i)) for i in range(50)) if r.branch == 'absorbed')
        history = pin_branch(ex4, rec)
        assert history.latent_times['tau'] is None
        assert history.trajectories['object'].transition_times == [None]
        assert history.trajectories['object'].final_state == 'obj0star'
        assert sorted(str(s) for s in history.final_states(ex4.sites)) == ['|g⟩_atom', '|obj0star⟩_object']

    def test_click_beyond_the_light_front_is_inconsistent(self, ex1):
        rec = DetectionRecord(30.0, (DetectionEvent(30.0, (31.0, 0.0, 0.0)),), branch='decay')
        with pytest.raises(InconsistentRecordError):
            pin_branch(ex1, rec)

    def test_exact_mode_weighs_both_sources(self, make_scenario, ex2_minus_click):
        scn = make_scenario('ex2', mode='exact')
        assert scn.mode == PosteriorMode.EXACT
        # both sources explain the click almost equally, so the larger Born weight wins
        assert select_branch(scn, ex2_minus_click).label == 'plus'
        assert pin_branch(scn, ex2_minus_click).branch == 'plus'

    def test_exact_mode_rejects_impossible_clicks(self, make_scenario):
        scn = make_scenario('ex2', mode='exact')
        rec = DetectionRecord(30.0, (DetectionEvent(30.0, (31.0, 0.0, 0.0)),))
        with pytest.raises(InconsistentRecordError):
            select_branch(scn, rec)


def test_branch_likelihood_without_outside_clicks(ex1):
    empty = DetectionRecord(30.0)
    value = branch_likelihood(ex1.family('decay'), empty, Event(1.0), ex1)
    assert value == pytest.approx(math.exp(-1.0), rel=1e-6)


@pytest.mark.slow
def test_ex3_delays_are_uncorrelated(ex3):
    n = 100000
    pairs = np.array([[rec.latent_truth['tau1'], rec.latent_truth['tau2']]
                      for rec in (sample_record(ex3, RngStream(7, i)) for i in range(n))])
    assert abs(np.corrcoef(pairs.T)[0, 1]) < 0.01
