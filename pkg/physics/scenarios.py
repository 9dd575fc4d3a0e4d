"""
Branch decompositions of the five toy models, record sampling and branch pinning.
"""

import logging
import math
from typing import Dict, List, Optional

import numpy as np

from config.scenario_config import ScenarioConfig
from models.branch import (BranchFamily, LatentVar, PhotonChannel, PinnedHistory, PinnedTransition,
                           PosteriorMode, Scenario, ScenarioKind, SiteSpec, SiteTrajectory, Transition)
from models.detection_record import DetectionRecord, DetectorMode, RngStream
from models.emitter import EmitterParams
from models.errors import InconsistentRecordError
from models.spacetime_event import DetectionEvent, DetectionKind, Event
from physics.detection import (coarse_detection, displaced, draw_absorber, draw_cascade, draw_emission,
                               draw_superposed, sample_momentum, superposition_sites)
from physics.latent_posterior import LatentPosterior
from physics.spacetime import eps_cone
from utils.logger import setup_logger

logger = setup_logger('Scenarios')

ATOM_BASIS = ('e', 'g')
CASCADE_BASIS = ('e2', 'e1', 'g')
OBJECT_BASIS = ('obj0', 'obj0star', 'obj100')


def emission_probability(p: EmitterParams, T: float) -> float:
    """Probability that the photon was emitted before the plane: 1 − e^{−Γ(T − t_source)}."""
    return -math.expm1(-p.gamma * max(T - p.source.t, 0.0))


def _visible(cfg: ScenarioConfig, p: EmitterParams) -> bool:
    """A photon below the grid's cutoff frequency never clicks."""
    return not (cfg.detector_mode == DetectorMode.GRID and p.line_frequency_hz < cfg.cutoff_freq)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    """Born-weighted branch families for the configured toy model."""
    cfg.validate()
    frame = cfg.frame()
    plane = cfg.detector_plane()
    origin = (0.0, 0.0, 0.0)
    parameters: Dict[str, object] = {'name': cfg.name}

    if cfg.kind == ScenarioKind.EX1:
        emitter = cfg.emitter()
        sites = {'atom': SiteSpec('atom', ATOM_BASIS, origin, 'g')}
        families = [BranchFamily(
            'decay', 1.0,
            (LatentVar.exponential('tau', emitter.gamma),),
            (Transition('atom', 'e', 'g'),),
            (PhotonChannel('1', emitter, detectable=_visible(cfg, emitter)),),
            {'atom': 'e'},
        )]
        parameters['emission_probability'] = emission_probability(emitter, plane.T)
        return Scenario(cfg.kind, tuple(families), sites, frame, plane, cfg.mode,
                        emitter=emitter, parameters=parameters)

    if cfg.kind == ScenarioKind.EX2:
        emitter = cfg.emitter()
        r_minus, r_plus = superposition_sites(cfg.separation)
        sites = {
            'atom_minus': SiteSpec('atom_minus', ATOM_BASIS, tuple(r_minus), 'g'),
            'atom_plus': SiteSpec('atom_plus', ATOM_BASIS, tuple(r_plus), 'g'),
        }
        families = []
        for label, weight, offset in (('minus', abs(cfg.alpha) ** 2, r_minus),
                                      ('plus', abs(cfg.beta) ** 2, r_plus)):
            site = f'atom_{label}'
            source = displaced(emitter, offset)
            families.append(BranchFamily(
                label, weight,
                (LatentVar.exponential('tau', emitter.gamma),),
                (Transition(site, 'e', 'g'),),
                (PhotonChannel('1', source, detectable=_visible(cfg, source)),),
                {site: 'e'},
            ))
        parameters.update({'separation': cfg.separation, 'r_minus': r_minus.tolist(), 'r_plus': r_plus.tolist()})
        return Scenario(cfg.kind, tuple(families), sites, frame, plane, cfg.mode, emitter=emitter,
                        alpha=cfg.alpha, beta=cfg.beta, parameters=parameters)

    if cfg.kind == ScenarioKind.EX3:
        cascade = cfg.cascade_params()
        first, second = cascade.first(), cascade.second()
        sites = {'atom': SiteSpec('atom', CASCADE_BASIS, origin, 'g')}
        families = [BranchFamily(
            'cascade', 1.0,
            (LatentVar.exponential('tau1', cascade.gamma1), LatentVar.exponential('tau2', cascade.gamma2)),
            (Transition('atom', 'e2', 'e1', step=1), Transition('atom', 'e1', 'g', step=2)),
            (PhotonChannel('1', first, step=1, detectable=_visible(cfg, first)),
             PhotonChannel('2', second, step=2, detectable=_visible(cfg, second))),
            {'atom': 'e2'},
        )]
        return Scenario(cfg.kind, tuple(families), sites, frame, plane, cfg.mode,
                        emitter=first, cascade=cascade, parameters=parameters)

    # Ex4 / Ex5: shell at the origin or displaced by the object offset
    emitter = cfg.emitter()
    flight = cfg.shell_inner_radius / cfg.c
    sites = {
        'atom': SiteSpec('atom', ATOM_BASIS, origin, 'g'),
        'object': SiteSpec('object', OBJECT_BASIS, origin),
    }
    families = [
        BranchFamily(
            'absorbed', abs(cfg.alpha) ** 2,
            (LatentVar.exponential('tau', emitter.gamma),),
            (Transition('atom', 'e', 'g'), Transition('object', 'obj0', 'obj0star', offset=flight)),
            (PhotonChannel('1', emitter, detectable=False, kind=cfg.detection_kind),),
            {'atom': 'e', 'object': 'obj0'},
        ),
        BranchFamily(
            'escape', abs(cfg.beta) ** 2,
            (LatentVar.exponential('tau', emitter.gamma, upper=plane.T - emitter.source.t),),
            (Transition('atom', 'e', 'g'),),
            (PhotonChannel('1', emitter, detectable=_visible(cfg, emitter), kind=cfg.detection_kind),),
            {'atom': 'e', 'object': 'obj100'},
        ),
    ]
    parameters.update({
        'shell_outer_radius': cfg.shell_outer_radius,
        'shell_inner_radius': cfg.shell_inner_radius,
        'object_offset': cfg.resolved_object_offset(),
        'absorption_delay': flight,
    })
    return Scenario(cfg.kind, tuple(families), sites, frame, plane, cfg.mode, emitter=emitter,
                    alpha=cfg.alpha, beta=cfg.beta, detection_kind=cfg.detection_kind,
                    parameters=parameters)


def _report(scn: Scenario, clicks: List[Optional[DetectionEvent]], emitters: List[EmitterParams]) -> List[DetectionEvent]:
    """What the detector reports: ideal clicks as they are, grid clicks at their cell centres."""
    reported = []
    for click, emitter in zip(clicks, emitters):
        if click is None:
            continue
        if scn.plane.is_grid and click.kind == DetectionKind.POSITION:
            click = coarse_detection(click, scn.plane, emitter.line_frequency_hz, scn.frame)
            if click is None:
                continue
        reported.append(click)
    return reported


def sample_record(scn: Scenario, rng: RngStream) -> DetectionRecord:
    """One late-time measurement outcome of the scenario."""
    plane, frame = scn.plane, scn.frame

    if scn.kind == ScenarioKind.EX1:
        draw = draw_emission(scn.emitter, plane, rng, frame)
        clicks, emitters, branch = [draw.event], [scn.emitter], 'decay'
        truth = {'tau': draw.delay}
    elif scn.kind == ScenarioKind.EX2:
        branch, draw = draw_superposed(scn.emitter, scn.alpha, scn.beta, scn.parameters['separation'],
                                       plane, rng, frame)
        clicks, emitters = [draw.event], [scn.emitter]
        truth = {'tau': draw.delay}
    elif scn.kind == ScenarioKind.EX3:
        d1, d2, tau1, tau2 = draw_cascade(scn.cascade, plane, rng, frame)
        clicks, emitters, branch = [d1, d2], [scn.cascade.first(), scn.cascade.second()], 'cascade'
        truth = {'tau1': tau1, 'tau2': tau2}
    elif scn.detection_kind == DetectionKind.MOMENTUM:
        momentum = sample_momentum(scn.emitter, scn.alpha, scn.beta, rng, frame)
        branch = 'absorbed' if momentum is None else 'escape'
        clicks = [None if momentum is None else
                  DetectionEvent(plane.T, None, DetectionKind.MOMENTUM, momentum=tuple(momentum))]
        emitters, truth = [scn.emitter], {}
    else:
        branch, draw = draw_absorber(scn.emitter, scn.alpha, scn.beta, plane, rng, frame)
        clicks, emitters = [draw.event], [scn.emitter]
        truth = {'tau': draw.delay}

    detections = _report(scn, clicks, emitters)
    return DetectionRecord(plane.T, tuple(detections), () if detections else (branch,), branch, truth)


def _attribution(scn: Scenario, family: BranchFamily, rec: DetectionRecord) -> Dict[str, DetectionEvent]:
    channels = {ch.photon_id for ch in family.detectable_photons}
    if all(d.photon_id in channels for d in rec.detections):
        return rec.by_photon()
    # unlabelled clicks: the outer photon left first
    ordered = sorted(rec.detections, key=lambda d: -d.radius_from(family.emissions[0].source))
    by_step = sorted(family.detectable_photons, key=lambda ch: ch.step)
    return {ch.photon_id: d for ch, d in zip(by_step, ordered)}


def select_branch(scn: Scenario, rec: DetectionRecord, posterior: Optional[LatentPosterior] = None) -> BranchFamily:
    """The family that produced the record: its label in attributed mode, else the most likely family."""
    if rec.branch is not None and (scn.mode == PosteriorMode.ATTRIBUTED or rec.has_momentum):
        return scn.family(rec.branch)
    posterior = posterior or LatentPosterior(scn)
    scores = [(f.born_weight * posterior.record_likelihood(f, rec), f) for f in scn.families]
    best_score, best = max(scores, key=lambda item: item[0])
    if best_score <= 0.0:
        raise InconsistentRecordError(f"record {rec} is inconsistent with every branch family")
    return best


def pin_branch(scn: Scenario, rec: DetectionRecord, posterior: Optional[LatentPosterior] = None) -> PinnedHistory:
    """Recover latent delays from the clicks and evaluate the family's state program."""
    family = select_branch(scn, rec, posterior)
    T, c = scn.plane.T, scn.frame.c
    tol = eps_cone(T, scn.frame) / c
    limit = T - family.start_time

    emission_delay: Dict[int, Optional[float]] = {}
    after_plane = set()
    positional = [d for d in rec.detections if d.kind == DetectionKind.POSITION]
    attributed = _attribution(scn, family, rec.with_detections(positional)) if positional else {}
    momentum_seen = rec.has_momentum

    for ch in family.emissions:
        click = attributed.get(ch.photon_id)
        if click is not None:
            delay = T - click.radius_from(ch.source) / c - family.start_time
            if delay < -tol and not scn.plane.is_grid:
                raise InconsistentRecordError(
                    f"click at radius {click.radius_from(ch.source):.6g} lies beyond c(T − t_source)")
            emission_delay[ch.step] = min(max(delay, 0.0), limit)
        elif ch.detectable and not (momentum_seen and ch.kind == DetectionKind.MOMENTUM):
            # a detectable photon that did not click was not yet emitted
            after_plane.add(ch.step)

    latent_times: Dict[str, Optional[float]] = {}
    previous = 0.0
    for step, latent in enumerate(family.latent_vars, start=1):
        if step in emission_delay and previous is not None:
            value = emission_delay[step] - previous
            if value < -tol:
                raise InconsistentRecordError(f"latent {latent.name} would be negative ({value:.3e})")
            latent_times[latent.name] = max(value, 0.0)
            previous = emission_delay[step]
        else:
            latent_times[latent.name] = None
            previous = None

    first_missing = min(after_plane) if after_plane else None
    trajectories = {}
    for site, initial in family.initial_states.items():
        pinned = []
        for tr in family.site_transitions(site):
            if first_missing is not None and tr.step >= first_missing:
                break
            fired = emission_delay.get(tr.step)
            time = None if fired is None else family.start_time + fired + tr.offset
            pinned.append(PinnedTransition(tr.from_state, tr.to_state, time))
        trajectories[site] = SiteTrajectory(site, initial, tuple(pinned))

    history = PinnedHistory(family.label, latent_times, trajectories)
    if logger.isEnabledFor(logging.DEBUG):
        finals = ', '.join(str(s) for s in history.final_states(scn.sites))
        logger.debug(f"🎯 pinned {history} -> {finals}")
    return history


def branch_likelihood(family: BranchFamily, outside_data: DetectionRecord, x: Event,
                      scn: Scenario, posterior: Optional[LatentPosterior] = None) -> float:
    """Density of the outside-cone click pattern of x (absences included) under the family."""
    posterior = posterior or LatentPosterior(scn)
    evidence = posterior.evaluate(family, x.position, np.array([x.t]), outside_data.detections,
                                  outside_data.branch)
    return float(evidence.likelihood[0])
