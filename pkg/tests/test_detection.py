import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import sigma
from models.detection_record import DetectorMode, DetectorPlane, RngStream
from models.emitter import CascadeParams, EmitterParams
from models.errors import PreconditionError
from models.spacetime_event import NATURAL_UNITS, DetectionEvent
from physics.detection import (cell_center, check_amplitudes, coarse_detection, coarsen, direction_from_uniforms,
                               orthonormal_frame, polar_cosine_from_uniform, sample_absorber, sample_cascade,
                               sample_ideal_single, sample_momentum, sample_superposed, superposition_sites)

ATOM = EmitterParams(1.0, 1000.0)
PLANE = DetectorPlane(30.0)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_polar_inverse_cdf(q):
    u = polar_cosine_from_uniform(q)
    assert -1.0 <= u <= 1.0
    assert (2.0 + 3.0 * u - u ** 3) / 4.0 == pytest.approx(q, abs=1e-9)


@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True),
       st.floats(min_value=0.0, max_value=1.0, exclude_max=True))
def test_directions_are_unit_vectors(q_u, q_phi):
    n = direction_from_uniforms((0.0, 1.0, 1.0), q_u, q_phi)
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)


def test_orthonormal_frame_is_right_handed():
    e1, e2, a = orthonormal_frame((0.0, 0.0, 2.0))
    assert np.dot(e1, e2) == pytest.approx(0.0, abs=1e-15)
    assert np.dot(e1, a) == pytest.approx(0.0, abs=1e-15)
    assert np.cross(e1, e2) == pytest.approx(a)


def test_orthonormal_frame_is_cached_read_only():
    first = orthonormal_frame([0.0, 1.0, 1.0])
    again = orthonormal_frame(np.array([0.0, 1.0, 1.0]))
    assert all(x is y for x, y in zip(first, again))
    with pytest.raises(ValueError):
        first[0][0] = 1.0


def test_polar_law_matches_the_dipole_pattern():
    rng = np.random.default_rng(3)
    u = np.array([polar_cosine_from_uniform(q) for q in rng.random(20000)])
    # E[u^2] under (3/4)(1 - u^2) on [-1, 1] is 1/5
    assert np.mean(u ** 2) == pytest.approx(0.2, abs=4 * math.sqrt(0.05 / 20000))


class TestIdealSingle:
    def test_same_stream_same_click(self):
        a = sample_ideal_single(ATOM, PLANE, RngStream(7, 3))
        b = sample_ideal_single(ATOM, PLANE, RngStream(7, 3))
        assert a == b

    def test_streams_differ(self):
        clicks = [sample_ideal_single(ATOM, PLANE, RngStream(7, i)) for i in range(5)]
        assert len({c.position for c in clicks if c is not None}) == len([c for c in clicks if c is not None])

    def test_click_lies_inside_the_light_front(self):
        for i in range(200):
            click = sample_ideal_single(ATOM, PLANE, RngStream(11, i))
            if click is not None:
                assert click.radius_from((0.0, 0.0, 0.0)) <= 30.0 + 1e-9
                assert click.plane_time == 30.0

    def test_delays_are_exponential(self):
        n = 4000
        delays = []
        for i in range(n):
            click = sample_ideal_single(ATOM, PLANE, RngStream(5, i))
            delays.append(30.0 - click.radius_from((0.0, 0.0, 0.0)))
        assert np.mean(delays) == pytest.approx(1.0, abs=4.0 / math.sqrt(n))

    def test_short_plane_leaves_some_photons_unemitted(self):
        plane = DetectorPlane(0.5)
        missing = sum(sample_ideal_single(ATOM, plane, RngStream(1, i)) is None for i in range(4000))
        p = math.exp(-0.5)
        assert missing / 4000 == pytest.approx(p, abs=4 * sigma(p, 4000))


class TestSuperposed:
    def test_sites(self):
        r_minus, r_plus = superposition_sites(0.2)
        assert r_minus.tolist() == [0.0, 0.0, -0.1]
        assert r_plus.tolist() == [0.0, 0.0, 0.1]

    def test_branch_frequency_follows_alpha(self):
        n = 10000
        alpha, beta = math.sqrt(0.3), math.sqrt(0.7)
        minus = sum(sample_superposed(ATOM, alpha, beta, 0.1, PLANE, RngStream(2, i))[0] == 'minus'
                    for i in range(n))
        assert abs(minus / n - 0.3) <= 3 * sigma(0.3, n)

    def test_click_comes_from_the_branch_site(self):
        r_minus, r_plus = superposition_sites(0.1)
        for i in range(100):
            branch, click = sample_superposed(ATOM, math.sqrt(0.3), math.sqrt(0.7), 0.1, PLANE, RngStream(4, i))
            if click is None:
                continue
            source = r_minus if branch == 'minus' else r_plus
            assert click.radius_from(source) <= 30.0 + 1e-9

    def test_amplitudes_must_be_normalized(self):
        with pytest.raises(PreconditionError):
            check_amplitudes(0.5, 0.5)
        assert check_amplitudes(0.6, 0.8j) == pytest.approx(0.36)


class TestCascade:
    cascade = CascadeParams(1.0, 2.0, 1000.0, 800.0)

    def test_second_photon_is_inside_the_first(self):
        for i in range(300):
            d1, d2 = sample_cascade(self.cascade, PLANE, RngStream(8, i))
            assert d2.radius_from((0, 0, 0)) < d1.radius_from((0, 0, 0))
            assert (d1.photon_id, d2.photon_id) == ('1', '2')

    def test_short_plane_counts_resamples(self):
        rng = RngStream(8, 0)
        for _ in range(50):
            sample_cascade(self.cascade, DetectorPlane(1.0), rng)
        assert rng.resamples > 0


class TestAbsorber:
    def test_no_click_with_probability_alpha_squared(self):
        n = 10000
        alpha, beta = math.sqrt(0.6), math.sqrt(0.4)
        plane = DetectorPlane(60.0)
        clicks = sum(sample_absorber(ATOM, alpha, beta, plane, RngStream(9, i)) is not None for i in range(n))
        assert abs(clicks / n - 0.4) <= 3 * sigma(0.4, n)

    def test_momentum_magnitude_near_the_line(self):
        n, hits = 8000, []
        for i in range(n):
            p = sample_momentum(ATOM, 0.0, 1.0, RngStream(10, i))
            hits.append(np.linalg.norm(p))
        assert np.median(hits) == pytest.approx(1000.0, abs=0.05)

    def test_momentum_line_full_width_is_gamma(self):
        n = 20000
        hits = np.array([np.linalg.norm(sample_momentum(ATOM, 0.0, 1.0, RngStream(12, i))) for i in range(n)])
        # the quartiles of a Lorentzian sit at ω ± Γ/2
        q1, q3 = np.quantile(hits, [0.25, 0.75])
        assert q3 - q1 == pytest.approx(ATOM.gamma, rel=0.06)
        assert 0.5 * (q1 + q3) == pytest.approx(ATOM.omega, abs=0.05)

    def test_momentum_absent_when_absorbed(self):
        assert sample_momentum(ATOM, 1.0, 0.0, RngStream(10, 0)) is None


class TestGrid:
    plane = DetectorPlane(30.0, DetectorMode.GRID, cell_size=0.5, cutoff_freq=10.0)

    def test_cell_index(self):
        d = DetectionEvent(30.0, (1.2, -0.1, 3.0))
        assert coarsen(d, self.plane, 100.0) == (2, -1, 6)
        assert cell_center((2, -1, 6), self.plane).tolist() == [1.25, -0.25, 3.25]

    def test_cutoff_hides_low_frequencies(self):
        d = DetectionEvent(30.0, (1.2, -0.1, 3.0))
        assert coarsen(d, self.plane, 5.0) is None
        assert coarse_detection(d, self.plane, 5.0) is None

    def test_ideal_plane_cannot_coarsen(self):
        with pytest.raises(PreconditionError):
            coarsen(DetectionEvent(30.0, (1.0, 0.0, 0.0)), PLANE, 100.0)

    @given(st.floats(-25, 25), st.floats(-25, 25), st.floats(-25, 25))
    def test_cell_centre_within_half_diagonal(self, x, y, z):
        assume(x * x + y * y + z * z <= 30.0 ** 2)
        d = DetectionEvent(30.0, (x, y, z))
        coarse = coarse_detection(d, self.plane, 100.0)
        assert np.linalg.norm(coarse.point - d.point) <= math.sqrt(3.0) / 2.0 * 0.5 + 1e-12
        assert coarse.cell is not None

    @given(st.floats(0.0, math.pi), st.floats(0.0, 2.0 * math.pi), st.floats(29.0, 30.0))
    def test_cell_centre_stays_inside_the_cone_ball(self, theta, phi, r):
        point = r * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        coarse = coarse_detection(DetectionEvent(30.0, tuple(point)), self.plane, 100.0)
        assert np.linalg.norm(coarse.point) <= 30.0 + NATURAL_UNITS.eps_cone(30.0)
        assert coarse.cell == coarsen(DetectionEvent(30.0, tuple(point)), self.plane, 100.0)
