"""Position estimators: distance-weighted centroid and range least squares.

The weighted centroid places a sensor at
    sum_j w_j * V_j / sum_j w_j,   w_j = 1 / d_j ** g,
over its beacon fixes (V_j, d_j). Trilateration linearizes the range
circles against the first fix, solves the resulting system in least
squares and polishes with damped Gauss-Newton on the nonlinear range
residuals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import EstimatorParams, Point, METHOD_TRILATERATE, METHOD_WEIGHTED_CENTROID

METHOD_NONE = "none"

_MAX_HALVINGS = 10
_STEP_TOL = 1e-14


class LocalizationError(Exception):
    pass


class NoFixesError(LocalizationError):
    pass


class InsufficientFixesError(LocalizationError):
    pass


class DegenerateGeometryError(LocalizationError):
    pass


@dataclass(frozen=True, slots=True)
class BeaconFix:
    """One localization input: a reference position plus a measured distance.

    source_uncertainty carries the provider's reported uncertainty so the
    trust filter can drop shaky tag-provided fixes; it is 0 for anchors.
    """

    beacon_position: Point
    estimated_distance: float
    source_id: str = ""
    source_kind: str = "anchor"
    source_uncertainty: float = 0.0


@dataclass(frozen=True, slots=True)
class PositionEstimate:
    position: Point
    fix_count: int
    method_used: str
    residual: float


def weighted_centroid(fixes: list[BeaconFix], g: float) -> PositionEstimate:
    """Weight-normalized sum of fix positions with weights 1/d**g."""
    if not fixes:
        raise NoFixesError("weighted centroid needs at least one fix")
    sw = swx = swy = 0.0
    for f in fixes:
        w = 1.0 / f.estimated_distance ** g
        x, y = f.beacon_position
        sw += w
        swx += w * x
        swy += w * y
    return PositionEstimate((swx / sw, swy / sw), len(fixes), METHOD_WEIGHTED_CENTROID, 0.0)


def _has_spanning_triangle(points: list[Point], epsilon: float) -> bool:
    # degenerate iff every triple of fix positions spans area < epsilon;
    # in the common well-posed case the very first triple already passes
    n = len(points)
    for i in range(n - 2):
        xi, yi = points[i]
        for j in range(i + 1, n - 1):
            xj, yj = points[j]
            ex, ey = xj - xi, yj - yi
            for k in range(j + 1, n):
                xk, yk = points[k]
                area = 0.5 * abs(ex * (yk - yi) - ey * (xk - xi))
                if area >= epsilon:
                    return True
    return False


def _rms_residual(x: float, y: float, beacons: list[tuple[float, float, float]]) -> float:
    acc = 0.0
    for bx, by, d in beacons:
        r = math.hypot(x - bx, y - by) - d
        acc += r * r
    return math.sqrt(acc / len(beacons))


def trilaterate(fixes: list[BeaconFix], refine_iterations: int = 5,
                collinearity_epsilon: float = 1e-6) -> PositionEstimate:
    """Recover a position from >= 3 range fixes.

    Subtracting the first fix's circle equation from the others yields a
    linear system in (x, y), solved via its 2x2 normal equations. Each
    Gauss-Newton refinement step is accepted only if it lowers the RMS
    range residual; a rejected step is halved up to 10 times before
    refinement stops, so the reported residual never exceeds the
    linearized solution's.
    """
    if len(fixes) < 3:
        raise InsufficientFixesError(f"trilateration needs >= 3 fixes, got {len(fixes)}")
    beacons = [(f.beacon_position[0], f.beacon_position[1], f.estimated_distance) for f in fixes]
    if not _has_spanning_triangle([f.beacon_position for f in fixes], collinearity_epsilon):
        raise DegenerateGeometryError("fix positions are collinear")

    x0, y0, d0 = beacons[0]
    c0 = d0 * d0 - x0 * x0 - y0 * y0
    a11 = a12 = a22 = b1 = b2 = 0.0
    for bx, by, d in beacons[1:]:
        ax = 2.0 * (bx - x0)
        ay = 2.0 * (by - y0)
        rhs = c0 - d * d + bx * bx + by * by
        a11 += ax * ax
        a12 += ax * ay
        a22 += ay * ay
        b1 += ax * rhs
        b2 += ay * rhs
    det = a11 * a22 - a12 * a12
    if det == 0.0:
        raise DegenerateGeometryError("linearized system is singular")
    x = (a22 * b1 - a12 * b2) / det
    y = (a11 * b2 - a12 * b1) / det

    best = _rms_residual(x, y, beacons)
    for _ in range(refine_iterations):
        h11 = h12 = h22 = g1 = g2 = 0.0
        for bx, by, d in beacons:
            dx = x - bx
            dy = y - by
            dist = math.hypot(dx, dy)
            if dist < 1e-12:
                continue
            r = dist - d
            ux = dx / dist
            uy = dy / dist
            h11 += ux * ux
            h12 += ux * uy
            h22 += uy * uy
            g1 += ux * r
            g2 += uy * r
        det = h11 * h22 - h12 * h12
        if det == 0.0:
            break
        step_x = -(h22 * g1 - h12 * g2) / det
        step_y = -(h11 * g2 - h12 * g1) / det
        if math.hypot(step_x, step_y) < _STEP_TOL:
            break
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            cand = _rms_residual(x + step_x, y + step_y, beacons)
            if cand < best:
                x += step_x
                y += step_y
                best = cand
                accepted = True
                break
            step_x *= 0.5
            step_y *= 0.5
        if not accepted:
            break

    return PositionEstimate((x, y), len(fixes), METHOD_TRILATERATE, best)


def localize(prior: PositionEstimate, fixes: list[BeaconFix],
             params: EstimatorParams) -> PositionEstimate:
    """Dispatch to the configured estimator with graceful fallbacks.

    Tag-provided fixes whose reported uncertainty exceeds
    tag_trust_max_uncertainty are dropped first. With >= 3 surviving
    fixes the configured method runs (trilateration falls back to the
    centroid on degenerate geometry); with 1-2 fixes the centroid runs;
    with none the prior position is carried over.
    """
    eligible = [f for f in fixes
                if f.source_kind != "tag" or f.source_uncertainty <= params.tag_trust_max_uncertainty]
    if not eligible:
        return PositionEstimate(prior.position, 0, METHOD_NONE, 0.0)
    if len(eligible) >= 3 and params.method == METHOD_TRILATERATE:
        try:
            return trilaterate(eligible, params.refine_iterations, params.collinearity_epsilon)
        except DegenerateGeometryError:
            pass
    return weighted_centroid(eligible, params.centroid_degree_g)
