"""
Pre/post-selected (ABL) beables.

The beable at time t is conditioned on the initial state and on the final
late-time outcome, which is treated as a projector on the photon field: either
"a photon was registered" or "no photon". Each family's latent delay fixes both
the site's internal state at t and whether the photon reaches the plane, so the
ABL weights reduce to a flow of squared norms over the families' state labels.
The momentum line shape factors out of the ratio.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.beable import BeableValue, LocalOperator
from models.branch import BranchFamily, LatentVar, Scenario
from models.detection_record import DetectionRecord
from models.errors import CausalOrderError, ConfigError, ImpossibleOutcomeError, UnsupportedQueryError
from models.spacetime_event import DetectionEvent, Event
from utils.logger import setup_logger

PHOTON = 'photon'
NO_PHOTON = 'no-photon'


def outcome_label(final_outcome) -> str:
    """Reduce a final outcome (record, click, momentum vector or None) to photon / no-photon."""
    if final_outcome is None:
        return NO_PHOTON
    if isinstance(final_outcome, str):
        if final_outcome not in (PHOTON, NO_PHOTON):
            raise ConfigError(f"unknown final outcome {final_outcome!r}")
        return final_outcome
    if isinstance(final_outcome, DetectionRecord):
        return NO_PHOTON if final_outcome.is_empty else PHOTON
    if isinstance(final_outcome, DetectionEvent):
        return PHOTON
    momentum = np.asarray(final_outcome, dtype=float)
    if momentum.shape != (3,) or not np.all(np.isfinite(momentum)):
        raise ConfigError(f"final momentum must be a finite 3-vector, got {final_outcome!r}")
    return PHOTON


@dataclass(frozen=True)
class ABLResult:
    populations: np.ndarray
    posterior_weights: Dict[str, float]
    outcome: str


class ABLEngine:
    """ABL beables for single-step families (the absorber-shell scenarios)."""

    def __init__(self, scenario: Scenario, late_time_limit: bool = True):
        self.scenario = scenario
        self.late_time_limit = late_time_limit
        self.logger = setup_logger('ABLEngine')
        for family in scenario.families:
            if len(family.latent_vars) != 1:
                raise UnsupportedQueryError(
                    f"ABL beables need single-delay families; {family.label} has {len(family.latent_vars)}")

    def _latent(self, family: BranchFamily) -> Tuple[LatentVar, float]:
        latent = family.latent_vars[0]
        if self.late_time_limit:
            return latent.untruncated(), np.inf
        return latent, self.scenario.plane.T - family.start_time

    @staticmethod
    def _mass(latent: LatentVar, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        return float(latent.cdf(hi) - latent.cdf(lo))

    def _family_joint(self, family: BranchFamily, site: str, t: float, outcome: str) -> Dict[str, float]:
        """P(site state at t, outcome) under one family, keyed by state label."""
        latent, horizon = self._latent(family)
        t_rel = t - family.start_time
        photon = any(ch.detectable for ch in family.emissions)
        states = family.state_sequence(site)
        offsets = [tr.offset for tr in family.site_transitions(site)]
        # state j holds while t - offset_{j+1} < tau <= t - offset_j
        uppers = [np.inf] + [t_rel - off for off in offsets]
        lowers = [t_rel - off for off in offsets] + [-np.inf]
        joint: Dict[str, float] = {}
        for state, lo, hi in zip(states, lowers, uppers):
            total = self._mass(latent, lo, hi)
            emitted = self._mass(latent, lo, min(hi, horizon)) if photon else 0.0
            joint[state] = joint.get(state, 0.0) + (emitted if outcome == PHOTON else total - emitted)
        return joint

    def evaluate(self, site: str, t: float, final_outcome) -> ABLResult:
        scn = self.scenario
        if site not in scn.sites:
            raise ConfigError(f"scenario {scn.kind.value} has no site {site!r}")
        if not self.late_time_limit and t >= scn.plane.T:
            raise CausalOrderError(f"query at t={t} does not precede the plane T={scn.plane.T}")
        spec = scn.sites[site]
        outcome = outcome_label(final_outcome)

        populations = np.zeros(spec.dimension)
        evidence: Dict[str, float] = {}
        for family in scn.families:
            if site not in family.initial_states:
                evidence[family.label] = 0.0
                continue
            joint = self._family_joint(family, site, t, outcome)
            evidence[family.label] = family.born_weight * sum(joint.values())
            for state, weight in joint.items():
                populations[spec.index(state)] += family.born_weight * weight

        denominator = sum(evidence.values())
        if denominator <= 0.0:
            raise ImpossibleOutcomeError(f"final outcome '{outcome}' has zero probability in {scn}")
        weights = {label: value / denominator for label, value in evidence.items()}
        return ABLResult(populations / denominator, weights, outcome)

    @staticmethod
    def _project(op: LocalOperator, result: ABLResult) -> List[Tuple[float, float]]:
        if not op.is_diagonal:
            raise UnsupportedQueryError(f"operator {op.name} is not diagonal in the {op.site} basis")
        return [(value, float(np.real(np.diag(proj)) @ result.populations))
                for value, proj in op.eigenprojectors()]

    def projector_probabilities(self, x: Event, op: LocalOperator, final_outcome) -> List[Tuple[float, float]]:
        """(eigenvalue, ABL probability) per eigenspace of op."""
        return self._project(op, self.evaluate(op.site, x.t, final_outcome))

    def beable(self, x: Event, op: LocalOperator, final_outcome) -> BeableValue:
        result = self.evaluate(op.site, x.t, final_outcome)
        probabilities = self._project(op, result)
        expectation = sum(value * p for value, p in probabilities)
        self.logger.debug(f"🔮 ABL {op} at t={x.t:.6g} given {result.outcome}: {expectation:.6g}")
        return BeableValue(float(expectation), np.diag(result.populations), result.posterior_weights)

    def state_distribution(self, site: str, t: float, final_outcome) -> Dict[str, float]:
        result = self.evaluate(site, t, final_outcome)
        return dict(zip(self.scenario.sites[site].basis, result.populations.tolist()))
