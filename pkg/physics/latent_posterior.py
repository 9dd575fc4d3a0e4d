"""
Closed-form branch likelihoods under light-cone conditioning.

For one branch family and one query point, every photon channel is either
pinned (an outside click is attributed to it), hidden (it must not have clicked
outside the future light cone of the query) or free (undetectable, so it says
nothing). A hidden photon emitted at delay e is inside the cone iff e exceeds a
direction-dependent threshold; the thresholds are kept as a weighted set
{(s_i, a_i)} over emission directions, a single point when the query sits on
the source. Likelihoods and the joint probabilities
P(transition time <= t, data) are then linear in those sets and have closed
forms for one-step latent chains and two-step exponential chains.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from config.config import Config
from models.branch import BranchFamily, LatentVar, PhotonChannel, PosteriorMode, Scenario
from models.detection_record import DetectionRecord
from models.errors import DegenerateGeometryError, UnsupportedQueryError
from models.spacetime_event import DetectionEvent, DetectionKind
from physics.detection import orthonormal_frame
from physics.photon_wave import ANGULAR_DENSITY_PEAK
from physics.spacetime import eps_cone
from utils.logger import setup_logger


@dataclass(frozen=True)
class Hidden:
    """No click outside the cone: emission delay must exceed thresholds (Nt, M) w.p. weights (M,).

    When the source lies outside the cone ball the photon front only crosses the
    ball for a band of radii, so delays in [gap_lo, gap_hi) put the click outside
    again. Both gap arrays are None when no direction has such a band.
    """
    thresholds: np.ndarray
    weights: np.ndarray
    gap_lo: Optional[np.ndarray] = None
    gap_hi: Optional[np.ndarray] = None

    @property
    def is_point(self) -> bool:
        return self.thresholds.shape[1] == 1

    @property
    def has_gap(self) -> bool:
        return self.gap_lo is not None


@dataclass(frozen=True)
class Pinned:
    """An outside click attributed to the channel: emission delay and geometric density factor."""
    delay: float
    geometry: float


Constraint = Union[None, Hidden, Pinned]


@dataclass
class FamilyEvidence:
    """Likelihood of the conditioning data and joint transition probabilities, per query time."""
    likelihood: np.ndarray
    transition_joint: List[np.ndarray]


@lru_cache(maxsize=32)
def _direction_nodes(axis: Tuple[float, float, float], n_polar: int, n_azimuth: int):
    """Unit directions and weights of the (3/8π) sin²θ emission law."""
    u, w = leggauss(n_polar)
    phi = 2.0 * math.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    e1, e2, a = orthonormal_frame(axis)
    s = np.sqrt(1.0 - u * u)
    dirs = (s[:, None, None] * np.cos(phi)[None, :, None] * e1
            + s[:, None, None] * np.sin(phi)[None, :, None] * e2
            + u[:, None, None] * a)
    weights = np.repeat(w * 0.75 * (1.0 - u * u), n_azimuth) / n_azimuth
    return dirs.reshape(-1, 3), weights


def _expm1_ratio(k: float, width: np.ndarray) -> np.ndarray:
    if k == 0.0:
        return width
    return np.expm1(k * width) / k


def _chain_below(lo, hi, b, g1: float, g2: float) -> np.ndarray:
    """∫_lo^hi g1 e^{−g1τ} e^{−g2(b−τ)} dτ for lo <= hi <= b; zero where hi <= lo."""
    width = np.maximum(hi - lo, 0.0)
    k = g2 - g1
    if k > 0.0:
        anchor = np.where(width > 0.0, hi, lo)
        factor = -np.expm1(-k * width) / k
    else:
        anchor = lo
        factor = _expm1_ratio(k, width)
    return g1 * np.exp(-g1 * anchor - g2 * (b - anchor)) * factor


def _segment(a, c, b, g1: float, g2: float) -> np.ndarray:
    """∫_a^c g1 e^{−g1τ} e^{−g2(b−τ)⁺} dτ, a finite, c possibly infinite, b possibly −∞."""
    b_eff = np.maximum(b, a)
    below_hi = np.minimum(c, b_eff)
    below = _chain_below(a, np.maximum(below_hi, a), b_eff, g1, g2)
    above_lo = np.maximum(a, b_eff)
    above_hi = np.maximum(c, above_lo)
    above = np.exp(-g1 * above_lo) - np.exp(-g1 * above_hi)
    return below + above


class LatentPosterior:
    """Evaluates FamilyEvidence for the families of one scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.frame = scenario.frame
        self.plane = scenario.plane
        self.T = scenario.plane.T
        self.eps = eps_cone(self.T, self.frame)
        self.tol = self.eps / self.frame.c
        self.logger = setup_logger('LatentPosterior')

    # --- constraints -----------------------------------------------------------------------------

    def hidden_thresholds(self, family: BranchFamily, channel: PhotonChannel,
                          position: np.ndarray, times: np.ndarray) -> Hidden:
        c = self.frame.c
        limit = self.T - family.start_time
        offset = channel.source - position
        distance = float(np.linalg.norm(offset))
        scale = max(1.0, float(np.linalg.norm(position)), float(np.linalg.norm(channel.source)))

        if distance <= 1e-12 * scale:
            s = times + self.tol - family.start_time
            return Hidden(np.minimum(s, limit)[:, None], np.ones(1))

        reach = c * (self.T - times) - self.eps
        dirs, weights = _direction_nodes(tuple(channel.emitter.dipole_axis),
                                         Config.ANGULAR_NODES, Config.AZIMUTH_NODES)
        along = dirs @ offset
        radicand = along[None, :] ** 2 - distance ** 2 + reach[:, None] ** 2
        root = np.sqrt(np.maximum(radicand, 0.0))
        far = -along[None, :] + root
        s_far = self.T - far / c - family.start_time
        enclosed = (distance < reach)[:, None]
        if np.all(enclosed):
            return Hidden(np.minimum(s_far, limit), weights)

        # source outside the ball: the front is inside only for near < radius < far
        near = -along[None, :] - root
        crosses = (reach[:, None] > 0.0) & (radicand > 0.0) & (far > 0.0)
        banded = ~enclosed & crosses
        s_near = self.T - near / c - family.start_time
        thresholds = np.where(enclosed | crosses, s_far, limit)
        gap_lo = np.where(banded, s_near, limit)
        self.logger.debug(f"source {distance:.4g} from query: {int(banded.sum())} banded direction(s)")
        return Hidden(np.minimum(thresholds, limit), weights,
                      np.minimum(gap_lo, limit), np.full_like(gap_lo, limit))

    def pinned(self, family: BranchFamily, channel: PhotonChannel, click: DetectionEvent) -> Pinned:
        if click.kind != DetectionKind.POSITION:
            raise UnsupportedQueryError("momentum outcomes carry no position for light-cone conditioning")
        ray = click.point - channel.source
        rho = float(np.linalg.norm(ray))
        if rho == 0.0:
            raise DegenerateGeometryError("click coincides with the emission site")
        delay = self.T - rho / self.frame.c - family.start_time
        limit = self.T - family.start_time
        if self.plane.is_grid:
            delay = min(max(delay, 0.0), limit)
        elif -self.tol <= delay < 0.0:
            delay = 0.0
        elif delay < 0.0:
            return Pinned(delay, 0.0)
        cos_theta = float(np.dot(ray, channel.emitter.dipole_axis)) / rho
        geometry = ANGULAR_DENSITY_PEAK * (1.0 - cos_theta ** 2) / (self.frame.c * rho * rho)
        return Pinned(delay, geometry)

    def _assignments(self, family: BranchFamily, clicks: Sequence[DetectionEvent],
                     record_branch: Optional[str]) -> List[Dict[str, DetectionEvent]]:
        """Ways to attribute the clicks to the family's detectable photons."""
        if not clicks:
            return [{}]
        channels = family.detectable_photons
        if len(clicks) > len(channels):
            return []
        if self.scenario.mode == PosteriorMode.ATTRIBUTED and record_branch is not None:
            if record_branch != family.label:
                return []
            by_id = {ch.photon_id for ch in channels}
            if any(click.photon_id not in by_id for click in clicks):
                return []
            if len({click.photon_id for click in clicks}) != len(clicks):
                return []
            return [{click.photon_id: click for click in clicks}]
        return [{ch.photon_id: click for ch, click in zip(perm, clicks)}
                for perm in itertools.permutations(channels, len(clicks))]

    # --- evaluation ------------------------------------------------------------------------------

    def evaluate(self, family: BranchFamily, position, times, clicks: Sequence[DetectionEvent] = (),
                 record_branch: Optional[str] = None, conditioned: bool = True) -> FamilyEvidence:
        """
        Evidence of `clicks` (all outside the cone of every query time) plus "no other
        outside click", for queries at `position` and each of `times`.
        """
        position = np.asarray(position, dtype=float)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        nt = len(times)
        u_values = [times - family.start_time - tr.offset for tr in family.transitions]

        if not conditioned:
            constraints = {ch.photon_id: None for ch in family.emissions}
            return self._closed_form(family, constraints, u_values, nt)

        total: Optional[FamilyEvidence] = None
        for assignment in self._assignments(family, clicks, record_branch):
            constraints: Dict[str, Constraint] = {}
            for ch in family.emissions:
                if ch.photon_id in assignment:
                    constraints[ch.photon_id] = self.pinned(family, ch, assignment[ch.photon_id])
                elif ch.detectable:
                    constraints[ch.photon_id] = self.hidden_thresholds(family, ch, position, times)
                else:
                    constraints[ch.photon_id] = None
            part = self._closed_form(family, constraints, u_values, nt)
            if total is None:
                total = part
            else:
                total.likelihood = total.likelihood + part.likelihood
                total.transition_joint = [a + b for a, b in zip(total.transition_joint, part.transition_joint)]
        if total is None:
            return FamilyEvidence(np.zeros(nt), [np.zeros(nt) for _ in family.transitions])
        return total

    def record_likelihood(self, family: BranchFamily, record: DetectionRecord) -> float:
        """Density of the full record: every click pinned, every other detectable photon emitted after T."""
        best = 0.0
        limit = np.array([[self.T - family.start_time]])
        for assignment in self._assignments(family, record.detections, record.branch):
            constraints: Dict[str, Constraint] = {}
            for ch in family.emissions:
                if ch.photon_id in assignment:
                    constraints[ch.photon_id] = self.pinned(family, ch, assignment[ch.photon_id])
                elif ch.detectable:
                    constraints[ch.photon_id] = Hidden(limit, np.ones(1))
                else:
                    constraints[ch.photon_id] = None
            best += float(self._closed_form(family, constraints, [], 1).likelihood[0])
        return best

    def _closed_form(self, family: BranchFamily, constraints: Dict[str, Constraint],
                     u_values: List[np.ndarray], nt: int) -> FamilyEvidence:
        by_step: Dict[int, Constraint] = {ch.step: constraints[ch.photon_id] for ch in family.emissions}
        if len(family.latent_vars) == 1:
            likelihood, step_cdf = self._one_step(family.latent_vars[0], by_step.get(1), nt)
        else:
            likelihood, step_cdf = self._two_step(family.latent_vars, by_step.get(1), by_step.get(2), nt)
        joint = [step_cdf[tr.step - 1](u) for tr, u in zip(family.transitions, u_values)]
        return FamilyEvidence(likelihood, joint)

    def _one_step(self, latent: LatentVar, constraint: Constraint, nt: int):
        tol = self.tol
        if constraint is None:
            return np.ones(nt), [lambda u: latent.cdf(u)]
        if isinstance(constraint, Hidden):
            s, a = constraint.thresholds, constraint.weights
            cdf_s = latent.cdf(s)
            if not constraint.has_gap:
                return latent.sf(s) @ a, [lambda u: np.maximum(latent.cdf(u)[:, None] - cdf_s, 0.0) @ a]
            gap_lo, gap_hi = np.maximum(constraint.gap_lo, s), constraint.gap_hi
            cdf_lo = latent.cdf(gap_lo)
            likelihood = (latent.sf(s) - np.maximum(latent.cdf(gap_hi) - cdf_lo, 0.0)) @ a

            def joint(u):
                below = np.maximum(latent.cdf(u)[:, None] - cdf_s, 0.0)
                outside = np.maximum(latent.cdf(np.minimum(u[:, None], gap_hi)) - cdf_lo, 0.0)
                return (below - outside) @ a
            return likelihood, [joint]
        base = float(latent.pdf(constraint.delay)) * constraint.geometry
        e1 = constraint.delay
        return np.full(nt, base), [lambda u: np.where(e1 <= u + tol, base, 0.0)]

    def _two_step(self, latents: Tuple[LatentVar, ...], first: Constraint, second: Constraint, nt: int):
        g1, g2 = latents[0].rate, latents[1].rate
        tol = self.tol

        def point(constraint: Constraint) -> np.ndarray:
            if constraint is None:
                return np.full(nt, -np.inf)
            if not constraint.is_point or constraint.has_gap:
                raise UnsupportedQueryError("cascade posteriors support queries at the emitter only")
            return constraint.thresholds[:, 0]

        if not isinstance(first, Pinned) and not isinstance(second, Pinned):
            s1, s2 = point(first), point(second)
            a = np.maximum(s1, 0.0)
            likelihood = _segment(a, np.inf, s2, g1, g2)

            def p1(u):
                return _segment(a, np.maximum(a, u), s2, g1, g2)

            def p2(u):
                c = np.maximum(a, u)
                return np.maximum(_segment(a, c, s2, g1, g2) - _segment(a, c, u, g1, g2), 0.0)
            return likelihood, [p1, p2]

        if isinstance(first, Pinned) and not isinstance(second, Pinned):
            e1, s2 = first.delay, point(second)
            head = g1 * math.exp(-g1 * e1) * first.geometry if e1 >= 0.0 else 0.0
            hidden_tail = np.exp(-g2 * np.maximum(s2 - e1, 0.0))
            likelihood = head * hidden_tail
            return likelihood, [
                lambda u: np.where(e1 <= u + tol, likelihood, 0.0),
                lambda u: head * np.maximum(hidden_tail - np.exp(-g2 * np.maximum(u - e1, 0.0)), 0.0),
            ]

        if isinstance(second, Pinned) and not isinstance(first, Pinned):
            e2, s1 = second.delay, point(first)
            a = np.maximum(s1, 0.0)
            scale = g2 * second.geometry
            upper = np.full(nt, e2)
            likelihood = scale * _chain_below(a, np.maximum(upper, a), e2, g1, g2)

            def p1(u):
                hi = np.minimum(upper, np.maximum(u, a))
                return scale * _chain_below(a, np.maximum(hi, a), e2, g1, g2)
            return likelihood, [p1, lambda u: np.where(e2 <= u + tol, likelihood, 0.0)]

        e1, e2 = first.delay, second.delay
        if e1 < 0.0 or e2 < e1 - tol:
            value = 0.0
        else:
            value = (g1 * math.exp(-g1 * e1) * g2 * math.exp(-g2 * max(e2 - e1, 0.0))
                     * first.geometry * second.geometry)
        likelihood = np.full(nt, value)
        return likelihood, [lambda u: np.where(e1 <= u + tol, value, 0.0),
                            lambda u: np.where(e2 <= u + tol, value, 0.0)]
