"""
Samplers for the fictitious late-time measurement on the plane t = T.

Every sampler consumes a fixed number of uniforms per attempt so that a given
(seed, stream_id) reproduces the same record bit for bit.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Optional, Set, Tuple

import numpy as np

from config.config import Config
from models.detection_record import DetectorPlane, RngStream
from models.emitter import CascadeParams, EmitterParams
from models.errors import PreconditionError
from models.spacetime_event import DetectionEvent, DetectionKind, Event, Frame, NATURAL_UNITS
from physics.photon_wave import momentum_line_cdf_inverse, wavelength
from utils.logger import setup_logger

logger = setup_logger('Detection')

MAX_CASCADE_ATTEMPTS = 10_000
_warned: Set[str] = set()


def _warn_once(key: str, message: str) -> None:
    if key not in _warned:
        _warned.add(key)
        logger.warning(message)


@dataclass(frozen=True)
class EmissionDraw:
    """A sampled click (or None) together with the emission delay that produced it."""
    event: Optional[DetectionEvent]
    delay: float


def check_amplitudes(alpha: complex, beta: complex) -> float:
    """Return |α|², rejecting non-normalized pairs."""
    weight = abs(alpha) ** 2
    total = weight + abs(beta) ** 2
    if abs(total - 1.0) > 1e-12:
        raise PreconditionError(f"|alpha|^2 + |beta|^2 = {total!r}, expected 1")
    return weight


def polar_cosine_from_uniform(q: float) -> float:
    """Inverse CDF of u = cosθ under the sin³θ polar law: (2 + 3u − u³)/4 = q."""
    u = 2.0 * math.cos((math.acos(1.0 - 2.0 * q) - 2.0 * math.pi) / 3.0)
    for _ in range(8):
        slope = 0.75 * (1.0 - u * u)
        if slope < 1e-14:
            break
        step = ((2.0 + 3.0 * u - u ** 3) / 4.0 - q) / slope
        u = min(1.0, max(-1.0, u - step))
        if abs(step) < Config.NEWTON_TOLERANCE:
            break
    return u


def orthonormal_frame(axis: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Two unit vectors perpendicular to axis, plus the axis, right-handed."""
    return _frame(tuple(float(v) for v in np.asarray(axis, dtype=float).reshape(3)))


@lru_cache(maxsize=64)
def _frame(axis: Tuple[float, float, float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray(axis)
    a = a / np.linalg.norm(a)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    for v in (e1, e2, a):
        v.flags.writeable = False
    return e1, e2, a


def direction_from_uniforms(axis: Any, q_u: float, q_phi: float) -> np.ndarray:
    """Unit vector with polar density ∝ sin³θ about axis and uniform azimuth."""
    u = polar_cosine_from_uniform(q_u)
    phi = 2.0 * math.pi * q_phi
    s = math.sqrt(max(0.0, 1.0 - u * u))
    e1, e2, a = orthonormal_frame(axis)
    return s * math.cos(phi) * e1 + s * math.sin(phi) * e2 + u * a


def place_click(p: EmitterParams, plane: DetectorPlane, delay: float, q_u: float, q_phi: float,
                frame: Frame = NATURAL_UNITS, photon_id: str = "1") -> DetectionEvent:
    """Click of a photon emitted `delay` after p.source.t, on the plane t = T."""
    radius = frame.c * (plane.T - p.source.t - delay)
    direction = direction_from_uniforms(p.dipole_axis, q_u, q_phi)
    position = p.source.position + radius * direction
    return DetectionEvent(plane.T, tuple(position), DetectionKind.POSITION, photon_id=photon_id)


def draw_emission(p: EmitterParams, plane: DetectorPlane, rng: RngStream,
                  frame: Frame = NATURAL_UNITS, truncate: bool = False,
                  photon_id: str = "1") -> EmissionDraw:
    """
    Three uniforms: delay, polar angle, azimuth.

    Untruncated delays beyond the plane mean the photon is not yet emitted (no click);
    with truncate=True the delay is conditioned on emission before the plane.
    """
    if plane.T <= p.source.t:
        raise PreconditionError(f"plane T={plane.T} must follow the source time {p.source.t}")
    q_tau, q_u, q_phi = rng.uniforms(3)
    available = plane.T - p.source.t
    if truncate:
        delay = -math.log1p(-q_tau * -math.expm1(-p.gamma * available)) / p.gamma
    else:
        delay = -math.log1p(-q_tau) / p.gamma
        if delay > available:
            return EmissionDraw(None, delay)
    return EmissionDraw(place_click(p, plane, delay, q_u, q_phi, frame, photon_id), delay)


def sample_ideal_single(p: EmitterParams, plane: DetectorPlane, rng: RngStream,
                        frame: Frame = NATURAL_UNITS) -> Optional[DetectionEvent]:
    """One ideal-photodetector outcome; None with probability e^{−ΓT} (not yet emitted)."""
    return draw_emission(p, plane, rng, frame).event


def displaced(p: EmitterParams, offset: Any) -> EmitterParams:
    position = p.source.position + np.asarray(offset, dtype=float)
    return EmitterParams(p.gamma, p.omega, Event(p.source.t, tuple(position)), p.dipole_axis)


def superposition_sites(d: float) -> Tuple[np.ndarray, np.ndarray]:
    """(r_minus, r_plus) = (0, 0, ∓d/2)."""
    return np.array([0.0, 0.0, -0.5 * d]), np.array([0.0, 0.0, 0.5 * d])


def draw_superposed(p: EmitterParams, alpha: complex, beta: complex, d: float, plane: DetectorPlane,
                    rng: RngStream, frame: Frame = NATURAL_UNITS) -> Tuple[str, EmissionDraw]:
    weight_minus = check_amplitudes(alpha, beta)
    if d < Config.WELL_SEPARATED_WAVELENGTHS * wavelength(p, frame):
        _warn_once(f"separation:{d}", f"⚠️ separation d={d:.4g} is not ≫ λ; overlap contributions are neglected")
    q_branch = rng.uniforms(1)[0]
    branch = 'minus' if q_branch < weight_minus else 'plus'
    r_minus, r_plus = superposition_sites(d)
    emitter = displaced(p, r_minus if branch == 'minus' else r_plus)
    return branch, draw_emission(emitter, plane, rng, frame)


def sample_superposed(p: EmitterParams, alpha: complex, beta: complex, d: float, plane: DetectorPlane,
                      rng: RngStream, frame: Frame = NATURAL_UNITS) -> Tuple[str, Optional[DetectionEvent]]:
    """Branch-first sampling: minus with probability |α|², then an ideal click from r∓."""
    branch, draw = draw_superposed(p, alpha, beta, d, plane, rng, frame)
    return branch, draw.event


def draw_cascade(p: CascadeParams, plane: DetectorPlane, rng: RngStream,
                 frame: Frame = NATURAL_UNITS) -> Tuple[DetectionEvent, DetectionEvent, float, float]:
    """Six uniforms per attempt; pairs with the second photon not yet on the plane are redrawn."""
    available = plane.T - p.source.t
    if available < Config.SHELL_LIFETIME_FACTOR * p.total_lifetime:
        _warn_once(f"cascade:{plane.T}:{p.total_lifetime}",
                   f"⚠️ plane T={plane.T:.4g} is not ≫ 1/Γ₁ + 1/Γ₂; pair resampling will bias the delays")
    first, second = p.first(), p.second()
    for _ in range(MAX_CASCADE_ATTEMPTS):
        q = rng.uniforms(6)
        tau1 = -math.log1p(-q[0]) / p.gamma1
        tau2 = -math.log1p(-q[1]) / p.gamma2
        if tau1 + tau2 >= available:
            rng.resamples += 1
            continue
        d1 = place_click(first, plane, tau1, q[2], q[3], frame, photon_id="1")
        d2 = place_click(second, plane, tau1 + tau2, q[4], q[5], frame, photon_id="2")
        return d1, d2, tau1, tau2
    raise PreconditionError(f"no cascade pair reached the plane in {MAX_CASCADE_ATTEMPTS} attempts")


def sample_cascade(p: CascadeParams, plane: DetectorPlane, rng: RngStream,
                   frame: Frame = NATURAL_UNITS) -> Tuple[DetectionEvent, DetectionEvent]:
    """Both cascade photons; r₂ = r₁ − cτ₂ < r₁. Redraws are counted on rng.resamples."""
    d1, d2, _, _ = draw_cascade(p, plane, rng, frame)
    return d1, d2


def draw_absorber(p: EmitterParams, alpha: complex, beta: complex, plane: DetectorPlane,
                  rng: RngStream, frame: Frame = NATURAL_UNITS) -> Tuple[str, EmissionDraw]:
    weight_absorbed = check_amplitudes(alpha, beta)
    q_branch = rng.uniforms(1)[0]
    draw = draw_emission(p, plane, rng, frame, truncate=True)
    if q_branch < weight_absorbed:
        return 'absorbed', EmissionDraw(None, draw.delay)
    return 'escape', draw


def sample_absorber(p: EmitterParams, alpha: complex, beta: complex, plane: DetectorPlane,
                    rng: RngStream, frame: Frame = NATURAL_UNITS) -> Optional[DetectionEvent]:
    """No click with probability |α|² (photon absorbed by the shell), else an emitted-photon click."""
    _, draw = draw_absorber(p, alpha, beta, plane, rng, frame)
    return draw.event


def sample_momentum(p: EmitterParams, alpha: complex, beta: complex, rng: RngStream,
                    frame: Frame = NATURAL_UNITS) -> Optional[np.ndarray]:
    """No photon with probability |α|², else a momentum drawn from momentum_density."""
    weight_absorbed = check_amplitudes(alpha, beta)
    q_branch, q_w, q_u, q_phi = rng.uniforms(4)
    if q_branch < weight_absorbed:
        return None
    magnitude = frame.hbar * momentum_line_cdf_inverse(p, q_w) / frame.c
    return magnitude * direction_from_uniforms(p.dipole_axis, q_u, q_phi)


def coarsen(d: DetectionEvent, plane: DetectorPlane, photon_freq: float) -> Optional[Tuple[int, int, int]]:
    """Cell index floor(position / L), or None below the cutoff frequency."""
    if not plane.is_grid:
        raise PreconditionError("coarsen requires a grid-mode detector plane")
    if photon_freq < plane.cutoff_freq:
        return None
    cell = np.floor(d.point / plane.cell_size).astype(np.int64)
    return int(cell[0]), int(cell[1]), int(cell[2])


def cell_center(cell: Tuple[int, int, int], plane: DetectorPlane) -> np.ndarray:
    return (np.asarray(cell, dtype=float) + 0.5) * plane.cell_size


def coarse_detection(d: DetectionEvent, plane: DetectorPlane, photon_freq: float,
                     frame: Frame = NATURAL_UNITS) -> Optional[DetectionEvent]:
    """The click as the grid reports it: at its cell centre, pulled onto |x| <= cT, or None when undetected."""
    cell = coarsen(d, plane, photon_freq)
    if cell is None:
        return None
    centre = cell_center(cell, plane)
    reach = frame.c * plane.T
    radius = float(np.linalg.norm(centre))
    if radius > reach:
        centre = centre * (reach / radius)
    return DetectionEvent(d.plane_time, tuple(centre), d.kind, photon_id=d.photon_id, cell=cell)
