"""
Beable engines.

Light-cone conditioning: the beable of a local operator at x is its expectation
in the posterior over branch families given only the clicks outside the future
light cone of x. ABL pre/post-selection lives in physics.abl and is re-exported
here as abl_beable.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from models.beable import BeableTrajectory, BeableValue, LocalOperator
from models.branch import BranchFamily, Scenario, SiteSpec
from models.detection_record import DetectionRecord
from models.errors import (CausalOrderError, ConfigError, InconsistentRecordError, PreconditionError,
                           UnsupportedQueryError)
from models.spacetime_event import DetectionEvent, DetectionKind, Event
from physics.latent_posterior import FamilyEvidence, LatentPosterior
from physics.spacetime import cone_crossing_time
from utils.logger import setup_logger


def named_operator(site: SiteSpec, name: str) -> LocalOperator:
    """excited, ground, occupied, state:<label>, position:origin, position:displaced."""
    dim = site.dimension
    diag = np.zeros(dim)
    if name == 'occupied':
        diag[:] = 1.0
    elif name in ('excited', 'ground'):
        if site.ground_state is None:
            raise ConfigError(f"site {site.name} has no energy levels; '{name}' is undefined")
        ground = site.index(site.ground_state)
        diag[:] = 1.0 if name == 'excited' else 0.0
        diag[ground] = 0.0 if name == 'excited' else 1.0
    elif name.startswith('state:'):
        diag[site.index(name.split(':', 1)[1])] = 1.0
    elif name in ('position:origin', 'position:displaced'):
        if 'obj100' not in site.basis:
            raise ConfigError(f"site {site.name} has no position components")
        displaced = site.index('obj100')
        diag[:] = 1.0 if name == 'position:origin' else 0.0
        diag[displaced] = 0.0 if name == 'position:origin' else 1.0
    else:
        raise ConfigError(f"unknown operator {name!r} for site {site.name}")
    return LocalOperator(site.name, site.basis, np.diag(diag), name)


def first_crossing(grid: np.ndarray, values: np.ndarray, threshold: float = 0.5) -> Optional[int]:
    """Index of the first grid point where values drop below threshold from at or above it."""
    below = values < threshold
    drops = np.nonzero(below[1:] & ~below[:-1])[0]
    return int(drops[0]) + 1 if len(drops) else None


@dataclass
class BeableArrays:
    """Vectorized beables over a set of query times."""
    times: np.ndarray
    populations: np.ndarray          # (Nt, dim), trace = site occupancy
    expectations: np.ndarray         # (Nt,)
    posterior_weights: Dict[str, np.ndarray]

    def value(self, k: int) -> BeableValue:
        return BeableValue(float(self.expectations[k]), np.diag(self.populations[k]),
                           {label: float(w[k]) for label, w in self.posterior_weights.items()})

    def head(self, n: int) -> 'BeableArrays':
        return BeableArrays(self.times[:n], self.populations[:n], self.expectations[:n],
                            {label: w[:n] for label, w in self.posterior_weights.items()})

    def trajectory(self, site: str, op: LocalOperator, excited_index: Optional[int] = None) -> BeableTrajectory:
        values = tuple(self.value(k) for k in range(len(self.times)))
        return BeableTrajectory(site, op.name, self.times, values, op.is_projector, excited_index)


class BeableEngine:
    """Light-cone conditional and marginal beables for one scenario."""

    def __init__(self, scenario: Scenario, posterior: Optional[LatentPosterior] = None):
        self.scenario = scenario
        self.posterior = posterior or LatentPosterior(scenario)
        self.logger = setup_logger('BeableEngine')

    def operator(self, site: str, name: str) -> LocalOperator:
        if site not in self.scenario.sites:
            raise ConfigError(f"scenario {self.scenario.kind.value} has no site {site!r}")
        return named_operator(self.scenario.sites[site], name)

    def site_position(self, site: str) -> np.ndarray:
        return np.asarray(self.scenario.sites[site].position, dtype=float)

    def _site_populations(self, family: BranchFamily, site: SiteSpec, evidence: FamilyEvidence) -> np.ndarray:
        nt = len(evidence.likelihood)
        pops = np.zeros((nt, site.dimension))
        if site.name not in family.initial_states:
            return pops
        joints = [evidence.transition_joint[i] for i, tr in enumerate(family.transitions) if tr.site == site.name]
        cumulative = [evidence.likelihood] + joints + [np.zeros(nt)]
        for j, state in enumerate(family.state_sequence(site.name)):
            pops[:, site.index(state)] += np.maximum(cumulative[j] - cumulative[j + 1], 0.0)
        return pops

    def evaluate(self, op: LocalOperator, position, times, rec: Optional[DetectionRecord] = None,
                 conditioned: bool = True) -> BeableArrays:
        scn = self.scenario
        site = scn.sites.get(op.site)
        if site is None:
            raise ConfigError(f"scenario {scn.kind.value} has no site {op.site!r}")
        position = np.asarray(position, dtype=float)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        nt = len(times)

        clicks: Sequence[DetectionEvent] = ()
        if conditioned:
            if rec is None:
                raise PreconditionError("conditional beables need a detection record")
            if np.any(times >= rec.plane_time):
                raise CausalOrderError(f"query times must precede the plane T={rec.plane_time}")
            if rec.has_momentum:
                raise UnsupportedQueryError("momentum outcomes are not localized; use abl_beable")
            clicks = rec.detections

        # which clicks are outside the cone, per query time
        if len(clicks) == 1:
            patterns = np.array([[False], [True]])
            inverse = (times >= cone_crossing_time(position, clicks[0], scn.frame)).astype(int)
        elif clicks:
            crossings = np.array([cone_crossing_time(position, d, scn.frame) for d in clicks])
            patterns, inverse = np.unique(times[:, None] >= crossings[None, :], axis=0, return_inverse=True)
            inverse = np.asarray(inverse).reshape(-1)
        else:
            patterns, inverse = np.zeros((1, 0), dtype=bool), np.zeros(nt, dtype=int)

        numerators = np.zeros((nt, site.dimension))
        evidence_by_family = {f.label: np.zeros(nt) for f in scn.families}
        for row, pattern in enumerate(patterns):
            idx = np.nonzero(inverse == row)[0]
            if not len(idx):
                continue
            seen = [clicks[i] for i in np.nonzero(pattern)[0]]
            for family in scn.families:
                if family.born_weight == 0.0:
                    continue
                ev = self.posterior.evaluate(family, position, times[idx], seen,
                                             rec.branch if rec is not None else None, conditioned)
                evidence_by_family[family.label][idx] = family.born_weight * ev.likelihood
                numerators[idx] += family.born_weight * self._site_populations(family, site, ev)

        normalizer = sum(evidence_by_family.values())
        if np.any(normalizer <= 0.0):
            raise InconsistentRecordError(
                f"no branch family is consistent with {rec} for a query at {position.tolist()}")
        populations = numerators / normalizer[:, None]
        expectations = populations @ np.real(np.diag(op.matrix))
        weights = {label: value / normalizer for label, value in evidence_by_family.items()}
        return BeableArrays(times, populations, expectations, weights)

    def conditional(self, x: Event, op: LocalOperator, rec: DetectionRecord) -> BeableValue:
        if rec.plane_time <= x.t:
            raise CausalOrderError(f"query at t={x.t} does not precede the plane T={rec.plane_time}")
        return self.evaluate(op, x.position, [x.t], rec).value(0)

    def marginal(self, x: Event, op: LocalOperator) -> BeableValue:
        return self.evaluate(op, x.position, [x.t], conditioned=False).value(0)

    def excited_index(self, site: str) -> Optional[int]:
        # levels are listed top first
        return 0 if self.scenario.sites[site].ground_state is not None else None

    def trajectory(self, site: str, op: LocalOperator, rec: DetectionRecord, grid) -> BeableTrajectory:
        grid = np.asarray(grid, dtype=float)
        arrays = self.evaluate(op, self.site_position(site), grid, rec)
        return arrays.trajectory(site, op, self.excited_index(site))

    def expectation_at(self, op: LocalOperator, position, t: float, rec: DetectionRecord) -> float:
        return float(self.evaluate(op, position, [t], rec).expectations[0])

    def refine_transition_time(self, op: LocalOperator, position, rec: DetectionRecord,
                               lo: float, hi: float, threshold: float = 0.5, max_iter: int = 200) -> float:
        """
        Exact crossing inside (lo, hi] where the expectation is >= threshold at lo and < threshold at hi.

        Jumps sit at cone-crossing times of the clicks; between them the beable is
        continuous and the crossing is found by bisection.
        """
        frame = self.scenario.frame
        candidates = sorted(t for t in (cone_crossing_time(position, d, frame) for d in rec.detections)
                            if lo < t <= hi)
        left, right, jump = lo, hi, False
        for t_c in candidates:
            if self.expectation_at(op, position, t_c, rec) < threshold:
                right, jump = t_c, True
                break
            left = t_c
        if jump:
            before = right - 1e-12 * max(1.0, abs(right))
            if before <= left or self.expectation_at(op, position, before, rec) >= threshold:
                return right
            right = before
        for _ in range(max_iter):
            if right - left <= 1e-13 * max(1.0, abs(right)):
                break
            mid = 0.5 * (left + right)
            if self.expectation_at(op, position, mid, rec) < threshold:
                right = mid
            else:
                left = mid
        return right

    def grid_transition(self, op: LocalOperator, position, grid: np.ndarray, rec: DetectionRecord,
                        threshold: float = 0.5):
        """
        Beables on grid and the exact first crossing below threshold (None if none).

        Both sides of every click's cone crossing ride along in the grid evaluation,
        so a crossing that is a jump at a click needs no further evaluations.
        """
        frame = self.scenario.frame
        crossings = sorted(t for t in (cone_crossing_time(position, d, frame) for d in rec.detections)
                           if grid[0] < t < rec.plane_time)
        sides = [t - 1e-12 * max(1.0, abs(t)) for t in crossings]
        n = len(grid)
        arrays = self.evaluate(op, position, np.concatenate([grid, sides, crossings]), rec)
        on_grid = arrays.head(n)
        k = first_crossing(grid, on_grid.expectations, threshold)
        if k is None:
            return on_grid, None
        lo, hi = float(grid[k - 1]), float(grid[k])
        before, at = arrays.expectations[n:n + len(sides)], arrays.expectations[n + len(sides):]
        for t_c, b, a in zip(crossings, before, at):
            if not lo < t_c <= hi:
                continue
            if a < threshold and b >= threshold:
                return on_grid, t_c
            break
        return on_grid, self.refine_transition_time(op, position, rec, lo, hi, threshold)


def conditional_beable(x: Event, op: LocalOperator, rec: DetectionRecord, scn: Scenario) -> BeableValue:
    """Posterior-weighted expectation given the clicks outside the future light cone of x."""
    return BeableEngine(scn).conditional(x, op, rec)


def beable_trajectory(site: str, op: LocalOperator, rec: DetectionRecord, scn: Scenario, grid) -> BeableTrajectory:
    return BeableEngine(scn).trajectory(site, op, rec, grid)


def marginal_beable(x: Event, op: LocalOperator, scn: Scenario) -> BeableValue:
    """Unconditioned reduced state at x, from the branch densities."""
    return BeableEngine(scn).marginal(x, op)


def transition_time(traj: BeableTrajectory, threshold: float = 0.5) -> Optional[float]:
    """First grid time where the projector expectation drops below threshold; None without a drop."""
    if not traj.is_projector:
        raise PreconditionError(f"transition_time needs a projector, got {traj.operator}")
    k = first_crossing(traj.time_grid, traj.expectations, threshold)
    return None if k is None else float(traj.time_grid[k])


def refine_transition_time(traj: BeableTrajectory, rec: DetectionRecord, scn: Scenario,
                           threshold: float = 0.5) -> Optional[float]:
    """transition_time without grid quantisation."""
    k = first_crossing(traj.time_grid, traj.expectations, threshold)
    if k is None:
        return None
    engine = BeableEngine(scn)
    op = engine.operator(traj.site, traj.operator)
    return engine.refine_transition_time(op, engine.site_position(traj.site), rec,
                                         float(traj.time_grid[k - 1]), float(traj.time_grid[k]), threshold)


def abl_beable(x: Event, op: LocalOperator, final_outcome, scn: Scenario) -> BeableValue:
    """Pre/post-selected beable; see physics.abl."""
    from physics.abl import ABLEngine
    return ABLEngine(scn).beable(x, op, final_outcome)
