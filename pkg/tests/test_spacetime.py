import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from models.errors import CausalOrderError, PreconditionError
from models.spacetime_event import CausalClass, DetectionEvent, Event, Frame
from physics.spacetime import (asymptotic_direction, causal_class, cone_crossing_time,
                               correlated_transition_time, eps_cone, is_outside_future_lightcone)

coord = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False)

MIRROR = {
    CausalClass.TIMELIKE_FUTURE: CausalClass.TIMELIKE_PAST,
    CausalClass.TIMELIKE_PAST: CausalClass.TIMELIKE_FUTURE,
    CausalClass.LIGHTLIKE_FUTURE: CausalClass.LIGHTLIKE_PAST,
    CausalClass.LIGHTLIKE_PAST: CausalClass.LIGHTLIKE_FUTURE,
    CausalClass.SPACELIKE: CausalClass.SPACELIKE,
}


class TestCausalClass:
    @pytest.mark.parametrize('b, expected', [
        (Event(2.0, (1.0, 0.0, 0.0)), CausalClass.TIMELIKE_FUTURE),
        (Event(-2.0, (1.0, 0.0, 0.0)), CausalClass.TIMELIKE_PAST),
        (Event(1.0, (1.0, 0.0, 0.0)), CausalClass.LIGHTLIKE_FUTURE),
        (Event(-1.0, (0.0, 1.0, 0.0)), CausalClass.LIGHTLIKE_PAST),
        (Event(1.0, (2.0, 0.0, 0.0)), CausalClass.SPACELIKE),
        (Event(0.0, (0.0, 0.0, 3.0)), CausalClass.SPACELIKE),
    ])
    def test_unit_cases(self, b, expected):
        assert causal_class(Event(0.0), b) == expected

    def test_speed_of_light_scales_the_cone(self):
        slow = Frame(c=0.5)
        assert causal_class(Event(0.0), Event(1.0, (0.8, 0.0, 0.0)), slow) == CausalClass.SPACELIKE
        assert causal_class(Event(0.0), Event(1.0, (0.8, 0.0, 0.0))) == CausalClass.TIMELIKE_FUTURE

    @given(coord, coord, coord, coord, coord, coord, coord, coord)
    def test_swapping_events_mirrors_the_class(self, t1, x1, y1, z1, t2, x2, y2, z2):
        a, b = Event(t1, (x1, y1, z1)), Event(t2, (x2, y2, z2))
        assert causal_class(b, a) == MIRROR[causal_class(a, b)]


class TestLightCone:
    def test_inside_and_outside(self):
        x = Event(0.0)
        assert not is_outside_future_lightcone(x, DetectionEvent(10.0, (5.0, 0.0, 0.0)))
        assert is_outside_future_lightcone(x, DetectionEvent(10.0, (11.0, 0.0, 0.0)))

    def test_boundary_counts_as_outside(self):
        assert is_outside_future_lightcone(Event(0.0), DetectionEvent(10.0, (10.0, 0.0, 0.0)))

    def test_plane_in_the_past_is_rejected(self):
        with pytest.raises(CausalOrderError):
            is_outside_future_lightcone(Event(20.0), DetectionEvent(10.0, (1.0, 0.0, 0.0)))

    def test_eps_cone_scales_with_plane_time(self):
        assert eps_cone(30.0) == pytest.approx(3e-8)
        assert eps_cone(30.0, Frame(c=2.0)) == pytest.approx(6e-8)

    def test_crossing_time_of_a_click(self):
        d = DetectionEvent(10.0, (4.0, 0.0, 0.0))
        t_c = cone_crossing_time((0.0, 0.0, 0.0), d)
        assert t_c == pytest.approx(6.0, abs=1e-7)
        assert not is_outside_future_lightcone(Event(t_c - 1e-6), d)
        assert is_outside_future_lightcone(Event(t_c + 1e-6), d)

    @settings(max_examples=200)
    @given(st.floats(min_value=1.0, max_value=29.0), coord, coord, coord,
           st.floats(min_value=0.0, max_value=25.0))
    def test_predicate_switches_once_at_the_crossing_time(self, t, x, y, z, radius):
        point = np.array([x, y, z]) / 10.0
        d = DetectionEvent(30.0, tuple(point + np.array([0.0, radius, 0.0])))
        t_c = cone_crossing_time(point, d)
        if abs(t - t_c) < 1e-6:
            return
        assert is_outside_future_lightcone(Event(t, tuple(point)), d) == (t > t_c)


class TestCorrelatedTransition:
    r_plus = np.array([0.0, 0.0, 0.05])
    r_minus = np.array([0.0, 0.0, -0.05])

    def click(self, t, direction, T=30.0):
        n = np.asarray(direction, dtype=float)
        n /= np.linalg.norm(n)
        return DetectionEvent(T, tuple(self.r_plus + (T - t) * n))

    def test_along_the_separation_the_forms_agree(self):
        t_exact, t_asym = correlated_transition_time(2.0, self.click(2.0, (0, 0, 1)), self.r_plus, self.r_minus)
        assert t_exact == pytest.approx(1.9, abs=1e-12)
        assert t_asym == pytest.approx(1.9, abs=1e-12)

    def test_oblique_correction_is_of_order_d_squared_over_distance(self):
        t_exact, t_asym = correlated_transition_time(2.0, self.click(2.0, (0.6, 0, 0.8)), self.r_plus, self.r_minus)
        assert t_asym == pytest.approx(1.92, abs=1e-12)
        error = abs(t_exact - t_asym)
        assert 0.0 < error < 0.1 ** 2 / 28.0

    def test_correction_halves_when_the_plane_recedes(self):
        direction = (0.6, 0.0, 0.8)
        errors = []
        for T in (1000.0, 2000.0):
            t_exact, t_asym = correlated_transition_time(2.0, self.click(2.0, direction, T), self.r_plus,
                                                         self.r_minus)
            errors.append(abs(t_exact - t_asym))
        assert errors[0] / errors[1] == pytest.approx(2.0, rel=0.01)

    def test_click_must_be_lightlike_to_the_emission(self):
        with pytest.raises(PreconditionError):
            correlated_transition_time(5.0, self.click(2.0, (1, 0, 0)), self.r_plus, self.r_minus)

    def test_asymptotic_direction_is_a_unit_vector(self):
        n = asymptotic_direction(Event(0.0), DetectionEvent(10.0, (3.0, 4.0, 0.0)))
        assert n == pytest.approx([0.6, 0.8, 0.0])
        assert math.isclose(np.linalg.norm(n), 1.0)
