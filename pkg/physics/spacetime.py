"""
Minkowski-geometry primitives in the single preferred frame.
"""

from typing import Any, Optional, Tuple

import numpy as np

from config.config import Config
from models.errors import CausalOrderError, DegenerateGeometryError, PreconditionError
from models.spacetime_event import CausalClass, DetectionEvent, Event, Frame, NATURAL_UNITS


def eps_cone(plane_time: float, frame: Frame = NATURAL_UNITS) -> float:
    return frame.eps_cone(plane_time, Config.EPS_CONE_FACTOR)


def causal_class(a: Event, b: Event, frame: Frame = NATURAL_UNITS,
                 tolerance: Optional[float] = None) -> CausalClass:
    """Classify b relative to a."""
    dt = b.t - a.t
    cdt = frame.c * abs(dt)
    dist = float(np.linalg.norm(b.position - a.position))
    if tolerance is None:
        tolerance = Config.EPS_CONE_FACTOR * max(cdt, dist)

    if abs(cdt - dist) <= tolerance and dt != 0.0:
        return CausalClass.LIGHTLIKE_FUTURE if dt > 0 else CausalClass.LIGHTLIKE_PAST
    if cdt > dist:
        return CausalClass.TIMELIKE_FUTURE if dt > 0 else CausalClass.TIMELIKE_PAST
    return CausalClass.SPACELIKE


def _check_plane_order(x: Event, d: DetectionEvent) -> None:
    if d.plane_time < x.t:
        raise CausalOrderError(
            f"detection plane T={d.plane_time:.6g} lies in the causal past of the query at t={x.t:.6g}")


def is_outside_future_lightcone(x: Event, d: DetectionEvent, frame: Frame = NATURAL_UNITS) -> bool:
    """True iff the click is not in the future light cone of x. The cone boundary counts as outside."""
    _check_plane_order(x, d)
    dist = d.radius_from(x.position)
    return dist >= frame.c * (d.plane_time - x.t) - eps_cone(d.plane_time, frame)


def cone_crossing_time(point: Any, d: DetectionEvent, frame: Frame = NATURAL_UNITS) -> float:
    """
    Earliest query time at `point` from which d is outside the future light cone.

    The predicate is monotone in the query time: false below this value, true at and above it.
    """
    dist = d.radius_from(point)
    return d.plane_time - (dist + eps_cone(d.plane_time, frame)) / frame.c


def asymptotic_direction(x: Event, d: DetectionEvent) -> np.ndarray:
    offset = d.point - x.position
    dist = float(np.linalg.norm(offset))
    if dist == 0.0:
        raise DegenerateGeometryError("query point coincides with the detection position")
    return offset / dist


def correlated_transition_time(t: float, detection: DetectionEvent, r_plus: Any, r_minus: Any,
                               frame: Frame = NATURAL_UNITS) -> Tuple[float, float]:
    """
    Transition time at the distant site r_minus correlated with a click emitted from r_plus at t.

    Returns (t_exact, t_asymptotic): the exact lightlike condition from (t', r_minus) to the
    click, and its large-T form t - n·(r_plus - r_minus)/c.
    """
    r_plus = np.asarray(r_plus, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    T = detection.plane_time
    emitted = detection.radius_from(r_plus)
    mismatch = abs(emitted - frame.c * (T - t))
    if mismatch > eps_cone(T, frame):
        raise PreconditionError(
            f"detection is not lightlike to an emission at t={t:.9g} from r_plus (mismatch {mismatch:.3e})")

    t_exact = T - detection.radius_from(r_minus) / frame.c
    n_hat = asymptotic_direction(Event(t, r_plus), detection)
    t_asymptotic = t - float(np.dot(n_hat, r_plus - r_minus)) / frame.c
    return t_exact, t_asymptotic
