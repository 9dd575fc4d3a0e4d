"""
Goodness-of-fit checks and aggregation of trial outcomes into Statistics.
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config.config import Config
from models.branch import LatentKind, LatentVar, PinnedHistory, Scenario, ScenarioKind
from models.detection_record import DetectionRecord
from models.errors import BeableSimulationError
from models.run_result import RunConfig, Statistics
from models.spacetime_event import DetectionEvent, DetectionKind
from physics.detection import orthonormal_frame
from physics.latent_posterior import LatentPosterior
from physics.scenarios import build_scenario, pin_branch
from utils.logger import setup_logger

logger = setup_logger('Statistics')

AZIMUTH_BINS = 36


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float
    passed: bool
    samples: int
    pvalue: Optional[float] = None

    def to_dict(self) -> Dict[str, object]:
        return {'statistic': self.statistic, 'critical': self.critical, 'pass': self.passed,
                'samples': self.samples, 'pvalue': self.pvalue}


def ks_critical(n: int) -> float:
    """Asymptotic critical value at alpha = 0.01; approximate below ~100 samples."""
    return Config.KS_CRITICAL_COEFFICIENT / math.sqrt(n)


def ks_statistic(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample D = sup |F_n − F| evaluated on both sides of every jump."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_one_sample(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
    x = np.asarray(samples, dtype=float)
    if len(x) == 0:
        raise ValueError("KS test needs at least one sample")
    d = ks_statistic(x, cdf)
    critical = ks_critical(len(x))
    return KSResult(d, critical, bool(d < critical), len(x), float(stats.kstwo.sf(d, len(x))))


def ks_exponential(samples: Sequence[float], rate: float) -> KSResult:
    return ks_one_sample(samples, lambda t: -np.expm1(-rate * np.maximum(t, 0.0)))


def ks_latent(samples: Sequence[float], latent: LatentVar) -> Optional[KSResult]:
    if latent.kind == LatentKind.POINT_MASS or len(samples) == 0:
        return None
    return ks_one_sample(samples, latent.cdf)


def ks_two_sample(a: Sequence[float], b: Sequence[float], alpha: float = Config.KS_ALPHA) -> KSResult:
    result = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    n, m = len(a), len(b)
    critical = Config.KS_CRITICAL_COEFFICIENT * math.sqrt((n + m) / (n * m))
    return KSResult(float(result.statistic), critical, bool(result.pvalue > alpha), n + m, float(result.pvalue))


def binomial_interval(p: float, n: int, sigmas: float = Config.CI_SIGMAS) -> float:
    """Half-width of the sigmas-σ normal interval for a frequency out of n trials."""
    return sigmas * math.sqrt(p * (1.0 - p) / n)


def within_binomial(observed: float, expected: float, n: int, sigmas: float = Config.CI_SIGMAS) -> bool:
    return abs(observed - expected) <= binomial_interval(expected, n, sigmas)


def azimuth_uniformity(directions: np.ndarray, axis, bins: int = AZIMUTH_BINS) -> Tuple[float, float]:
    """χ² statistic and p-value of the azimuths about axis against a uniform law."""
    e1, e2, _ = orthonormal_frame(axis)
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    phi = np.mod(np.arctan2(d @ e2, d @ e1), 2.0 * math.pi)
    counts, _ = np.histogram(phi, bins=bins, range=(0.0, 2.0 * math.pi))
    result = stats.chisquare(counts)
    return float(result.statistic), float(result.pvalue)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    return float(stats.pearsonr(np.asarray(x, dtype=float), np.asarray(y, dtype=float))[0])


def transition_histogram(times: Iterable[float], rate: float, bins: int = Config.HISTOGRAM_BINS,
                         span_lifetimes: float = Config.HISTOGRAM_SPAN_LIFETIMES) -> Tuple[np.ndarray, np.ndarray]:
    """Counts over [0, span/rate]; times beyond the span land in the last bin."""
    upper = span_lifetimes / rate
    t = np.clip(np.asarray(list(times), dtype=float), 0.0, upper)
    return np.histogram(t, bins=bins, range=(0.0, upper))


def reference_pair(scenario: Scenario) -> Optional[Tuple[str, str, float]]:
    """(site, operator, rate) whose transition law is a plain exponential, if any."""
    if scenario.kind == ScenarioKind.EX1:
        return 'atom', 'excited', scenario.emitter.gamma
    if scenario.kind == ScenarioKind.EX3:
        return 'atom', 'state:e2', scenario.cascade.gamma1
    return None


def summarize_transitions(result: Statistics, cfg: RunConfig, scenario: Scenario,
                          times: Dict[Tuple[str, str], List[float]]) -> None:
    """Per-pair counts, the primary pair's histogram and its KS test against Exp(rate)."""
    for (site, operator), values in times.items():
        result.transition_counts[f"{site}:{operator}"] = len(values)
    reference = reference_pair(scenario)
    site, operator = cfg.pairs[0]
    rate = cfg.scenario.reference_rate
    if reference is not None:
        site, operator, rate = reference
    primary = times.get((site, operator), [])
    counts, edges = transition_histogram(primary, rate)
    result.transition_histogram = counts.astype(int).tolist()
    result.histogram_edges = edges.tolist()
    if reference is not None and primary:
        ks = ks_exponential(primary, rate)
        result.ks_statistic, result.ks_critical, result.ks_pass = ks.statistic, ks.critical, ks.passed


def check_branch_frequencies(result: Statistics, scenario: Scenario) -> None:
    """Branch frequencies against the Born weights, within CI_SIGMAS binomial intervals."""
    realized = sum(result.branch_counts.values())
    if not realized:
        return
    for label, weight in scenario.born_weights().items():
        observed = result.branch_frequencies.get(label, 0.0)
        result.branch_checks[label] = {'expected': weight, 'observed': observed,
                                       'half_width': binomial_interval(weight, realized),
                                       'pass': within_binomial(observed, weight, realized)}


def detection_directions(scenario: Scenario, records: Iterable[DetectionRecord]) -> List[np.ndarray]:
    """Emission directions of every click: momenta as is, positions relative to their source."""
    directions = []
    for rec in records:
        if rec.branch is None:
            continue
        family = scenario.family(rec.branch)
        for det in rec.detections:
            if det.kind == DetectionKind.MOMENTUM:
                directions.append(np.asarray(det.momentum, dtype=float))
                continue
            channel = family.photon(det.photon_id)
            if channel is not None:
                directions.append(det.point - channel.source)
    return directions


def summarize_latents(result: Statistics, scenario: Scenario, pinned: Sequence[PinnedHistory]) -> None:
    """KS of every recovered latent delay, and the τ₁/τ₂ correlation of the cascade."""
    for family in scenario.families:
        for latent in family.latent_vars:
            samples = [p.latent_times[latent.name] for p in pinned
                       if p.branch == family.label and p.latent_times.get(latent.name) is not None]
            ks = ks_latent(samples, latent)
            if ks is not None:
                result.delay_ks[f"{family.label}:{latent.name}"] = ks.to_dict()

    if scenario.kind == ScenarioKind.EX3:
        pairs = [(p.latent_times['tau1'], p.latent_times['tau2']) for p in pinned
                 if p.latent_times.get('tau1') is not None and p.latent_times.get('tau2') is not None]
        if len(pairs) > 2:
            tau1, tau2 = zip(*pairs)
            result.correlation = pearson(tau1, tau2)


def summarize_directions(result: Statistics, scenario: Scenario, directions: List[np.ndarray]) -> None:
    if len(directions) >= 5 * AZIMUTH_BINS and scenario.emitter is not None:
        chi2, pvalue = azimuth_uniformity(np.array(directions), scenario.emitter.dipole_axis)
        result.azimuth_chi2, result.azimuth_pvalue = chi2, pvalue
        result.azimuth_pass = bool(pvalue > Config.KS_ALPHA)


class StatisticsBuilder:
    """Reduce trial outcomes, in trial order, into a Statistics record."""

    def __init__(self, cfg: RunConfig, scenario: Scenario):
        self.cfg = cfg
        self.scenario = scenario
        self.logger = logger

    def _transition_times(self, outcomes, site: str, operator: str) -> List[float]:
        times = []
        for outcome in outcomes:
            for tr in outcome.transitions:
                if tr.site == site and tr.operator == operator and tr.time is not None:
                    times.append(tr.time)
        return times

    def build(self, outcomes: Sequence) -> Statistics:
        cfg, scn = self.cfg, self.scenario
        completed = [o for o in outcomes if o.record is not None]
        result = Statistics(trials=cfg.trials)
        result.inconsistent_records = sum(1 for o in outcomes if o.inconsistent)
        result.failed_trials = sum(1 for o in outcomes if o.error is not None and not o.inconsistent)
        result.resamples = int(sum(o.resamples for o in outcomes))

        counts: Dict[str, int] = {label: 0 for label in scn.labels}
        for o in completed:
            counts[o.record.branch] = counts.get(o.record.branch, 0) + 1
        realized = sum(counts.values())
        result.branch_counts = counts
        result.branch_frequencies = {k: (v / realized if realized else 0.0) for k, v in counts.items()}
        check_branch_frequencies(result, scn)
        if completed:
            detected = sum(1 for o in completed if not o.record.is_empty)
            result.detection_frequency = detected / len(completed)
            result.outcome_frequencies = {'photon': result.detection_frequency,
                                          'no-photon': 1.0 - result.detection_frequency}
            labels = [o.object_label for o in completed if o.object_label is not None]
            for label in sorted(set(labels)):
                result.outcome_frequencies[label] = labels.count(label) / len(completed)

        summarize_transitions(result, cfg, scn,
                              {pair: self._transition_times(outcomes, *pair) for pair in cfg.pairs})
        summarize_latents(result, scn, [o.pinned for o in completed if o.pinned is not None])
        summarize_directions(result, scn, detection_directions(scn, [o.record for o in completed]))
        return result


def _records_from_tables(cfg: RunConfig, trials, detections) -> List[Tuple[str, DetectionRecord]]:
    """(status, record) for every trial that sampled a record, rebuilt from trials.csv and detections.csv."""
    by_trial: Dict[int, List[DetectionEvent]] = {}
    if detections is not None:
        for row in detections.to_dict('records'):
            by_trial.setdefault(int(row['trial']), []).append(DetectionEvent.from_dict(row))
    records = []
    for row in trials[trials['branch'].notna()].to_dict('records'):
        rec = DetectionRecord(cfg.scenario.plane_time, tuple(by_trial.get(int(row['trial']), ())),
                              branch=str(row['branch']))
        records.append((row['status'], rec))
    return records


def _repin(scenario: Scenario, records: Sequence[Tuple[str, DetectionRecord]]) -> List[PinnedHistory]:
    posterior = LatentPosterior(scenario)
    pinned = []
    for status, rec in records:
        if status == 'inconsistent':
            continue
        try:
            pinned.append(pin_branch(scenario, rec, posterior))
        except BeableSimulationError as e:
            logger.warning(f"⚠️ could not re-pin {rec}: {e}")
    return pinned


def recompute_statistics(run: Dict[str, object]) -> Statistics:
    """Statistics from the files of a finished run (see result_writer.load_run)."""
    cfg = RunConfig.from_dict(run['summary']['config'])
    scenario = build_scenario(cfg.scenario)
    trials, transitions = run.get('trials'), run.get('transitions')
    if trials is None or transitions is None:
        raise FileNotFoundError("recomputing statistics needs trials.csv and transitions.csv")

    result = Statistics(trials=cfg.trials)
    result.inconsistent_records = int((trials['status'] == 'inconsistent').sum())
    result.failed_trials = int((trials['status'] == 'failed').sum())
    result.resamples = int(trials['resamples'].sum())
    realized = trials[trials['branch'].notna()]
    counts = {label: int((realized['branch'] == label).sum()) for label in scenario.labels}
    result.branch_counts = counts
    result.branch_frequencies = {k: (v / len(realized) if len(realized) else 0.0) for k, v in counts.items()}
    check_branch_frequencies(result, scenario)
    if len(realized):
        result.detection_frequency = float((realized['detections'] > 0).mean())
        result.outcome_frequencies = {'photon': result.detection_frequency,
                                      'no-photon': 1.0 - result.detection_frequency}

    times = {}
    for site, operator in cfg.pairs:
        rows = transitions[(transitions['site'] == site) & (transitions['operator'] == operator)]
        times[(site, operator)] = rows['t0_s'].dropna().astype(float).tolist()
    summarize_transitions(result, cfg, scenario, times)

    # delays, correlation and azimuths need the clicks themselves
    detections = run.get('detections')
    if detections is not None or not (trials['detections'] > 0).any():
        records = _records_from_tables(cfg, trials, detections)
        if scenario.detection_kind == DetectionKind.POSITION:
            summarize_latents(result, scenario, _repin(scenario, records))
        summarize_directions(result, scenario, detection_directions(scenario, [rec for _, rec in records]))
    else:
        logger.warning("⚠️ detections.csv missing; delay KS, correlation and azimuth not recomputed")
    logger.info(f"📊 recomputed {result}")
    return result
