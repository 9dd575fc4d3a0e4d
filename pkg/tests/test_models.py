import math

import numpy as np
import pytest

from models.beable import BeableTrajectory, BeableValue, LocalOperator
from models.branch import BranchFamily, LatentVar, SiteSpec, SiteTrajectory, PinnedTransition, Transition
from models.detection_record import DetectionRecord, DetectorPlane, RngStream
from models.emitter import EmitterParams
from models.errors import ConfigError, PreconditionError
from models.spacetime_event import DetectionEvent, DetectionKind, Event, Frame


class TestLatentVar:
    def test_exponential(self):
        tau = LatentVar.exponential('tau', 2.0)
        assert float(tau.cdf(1.0)) == pytest.approx(1.0 - math.exp(-2.0))
        assert float(tau.sf(1.0)) == pytest.approx(math.exp(-2.0))
        assert float(tau.pdf(-0.5)) == 0.0

    def test_truncated_mass_is_one(self):
        tau = LatentVar.exponential('tau', 1.0, upper=2.0)
        assert float(tau.cdf(2.0)) == pytest.approx(1.0)
        assert float(tau.sf(2.0)) == pytest.approx(0.0)
        assert float(tau.cdf(1.0) + tau.sf(1.0)) == pytest.approx(1.0)
        assert tau.untruncated().upper is None

    def test_point_mass(self):
        v = LatentVar.point_mass('flight', 3.0)
        assert float(v.cdf(2.9)) == 0.0 and float(v.cdf(3.0)) == 1.0

    def test_rate_must_be_positive(self):
        with pytest.raises(PreconditionError):
            LatentVar.exponential('tau', 0.0)


class TestFamilies:
    atom = SiteSpec('atom', ('e', 'g'), ground_state='g')

    def test_transitions_must_follow_the_state(self):
        with pytest.raises(ConfigError):
            BranchFamily('bad', 1.0, (LatentVar.exponential('tau', 1.0),),
                         (Transition('atom', 'g', 'e'),), (), {'atom': 'e'})

    def test_two_step_chains_cannot_be_truncated(self):
        with pytest.raises(ConfigError):
            BranchFamily('bad', 1.0, (LatentVar.exponential('a', 1.0, upper=2.0), LatentVar.exponential('b', 1.0)))

    def test_site_basis_labels_distinct(self):
        with pytest.raises(ConfigError):
            SiteSpec('atom', ('e', 'e'))

    def test_trajectory_state_lookup(self):
        traj = SiteTrajectory('atom', 'e', (PinnedTransition('e', 'g', 2.0),))
        assert traj.state_at(1.9) == 'e'
        assert traj.state_at(2.0) == 'g'
        assert traj.final_state == 'g'


class TestOperators:
    def test_hermiticity_enforced(self):
        with pytest.raises(PreconditionError):
            LocalOperator('atom', ('e', 'g'), np.array([[0, 1], [0, 0]]))

    def test_projector_and_spectrum(self):
        op = LocalOperator('object', ('a', 'b', 'c'), np.diag([1.0, 1.0, 0.0]), 'origin')
        assert op.is_projector and op.is_diagonal
        spectrum = op.eigenprojectors()
        assert [v for v, _ in spectrum] == pytest.approx([0.0, 1.0])
        assert sum(np.trace(p).real for _, p in spectrum) == pytest.approx(3.0)

    def test_sigma_x_is_not_a_projector(self):
        op = LocalOperator('atom', ('e', 'g'), np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert not op.is_projector and not op.is_diagonal

    def test_beable_value(self):
        value = BeableValue(0.25, np.diag([0.25, 0.75]))
        assert value.trace == pytest.approx(1.0)
        assert value.is_positive_semidefinite()
        assert value.trace_distance_to(0) == pytest.approx(0.75)

    def test_trajectory_frame(self):
        grid = np.array([0.0, 1.0])
        plain = BeableTrajectory.from_expectations('atom', 'excited', grid, [1.0, 0.0])
        assert list(plain.to_frame().columns) == ['site', 'operator', 't_s', 'expectation']
        states = (BeableValue(1.0, np.diag([1.0, 0.0])), BeableValue(0.25, np.diag([0.25, 0.75])))
        frame = BeableTrajectory('atom', 'excited', grid, states, excited_index=0).to_frame()
        assert frame['trace_distance_to_excited'].tolist() == pytest.approx([0.0, 0.75])

    def test_trajectory_grid_must_increase(self):
        values = (BeableValue(1.0), BeableValue(0.0))
        with pytest.raises(PreconditionError):
            BeableTrajectory('atom', 'excited', np.array([1.0, 0.5]), values)


class TestEvents:
    def test_event_needs_three_components(self):
        with pytest.raises(PreconditionError):
            Event(0.0, (1.0, 2.0))

    def test_frame_constants_positive(self):
        with pytest.raises(PreconditionError):
            Frame(c=0.0)

    def test_detection_kinds_are_exclusive(self):
        with pytest.raises(PreconditionError):
            DetectionEvent(10.0, (1.0, 0.0, 0.0), DetectionKind.MOMENTUM)
        with pytest.raises(PreconditionError):
            DetectionEvent(10.0, None, DetectionKind.POSITION)
        click = DetectionEvent(10.0, None, DetectionKind.MOMENTUM, momentum=(0.0, 1.0, 0.0))
        assert click.to_dict()['py'] == 1.0

    def test_record_plane_must_match(self):
        with pytest.raises(PreconditionError):
            DetectionRecord(10.0, (DetectionEvent(11.0, (1.0, 0.0, 0.0)),))

    def test_emitter_axis_normalized(self):
        assert EmitterParams(1.0, 100.0, dipole_axis=(0.0, 0.0, 5.0)).dipole_axis == (0.0, 0.0, 1.0)

    def test_grid_plane_needs_cell_size(self):
        with pytest.raises(PreconditionError):
            DetectorPlane(10.0, 'grid')

    def test_rng_streams(self):
        a = RngStream(1, 0).uniforms(4)
        assert np.array_equal(a, RngStream(1, 0).uniforms(4))
        assert not np.array_equal(a, RngStream(1, 1).uniforms(4))
        with pytest.raises(PreconditionError):
            RngStream(-1)
