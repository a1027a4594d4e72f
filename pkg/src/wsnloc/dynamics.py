"""Uncertainty recurrence and territory-constrained tag mobility.

A tag's scalar uncertainty is driven purely by how many neighbors it has:
it grows whenever fewer than 4 are in range (more slowly at exactly 3)
and decays exponentially with the neighbor surplus otherwise. Motion is a
heading-persistent random walk reflected at the territory boundary.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .scenario import DynamicsParams, Point, Rect

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class TagMotionState:
    position: Point
    heading: float  # radians in [-pi, pi)
    territory: Rect


def neighbor_factor(neighbor_count: int, params: DynamicsParams) -> float:
    """Per-step multiplier applied to uncertainty for a given neighbor count."""
    if neighbor_count <= 2:
        return params.growth_factor_low
    if neighbor_count == 3:
        return params.growth_factor_three
    return math.exp(-params.decay_alpha * (neighbor_count - 3))


def update_uncertainty(u: float, neighbor_count: int, params: DynamicsParams) -> float:
    v = u * neighbor_factor(neighbor_count, params)
    if v < params.u_min:
        return params.u_min
    if v > params.u_max:
        return params.u_max
    return v


def _standard_gauss(rng: random.Random) -> float:
    # Box-Muller from exactly two uniforms; 1 - u keeps the log argument in (0, 1]
    u1 = rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(_TWO_PI * u2)


def _fold(v: float, lo: float, hi: float) -> tuple[float, bool]:
    """Reflect v into [lo, hi]; the flag reports a net mirror (odd reflections)."""
    span = hi - lo
    if span <= 0.0:
        return lo, False
    t = (v - lo) % (2.0 * span)
    if t <= span:
        return lo + t, False
    return hi - (t - span), True


def _normalize_angle(a: float) -> float:
    a = (a + math.pi) % _TWO_PI
    return a - math.pi


def step_mobility(state: TagMotionState, params: DynamicsParams,
                  rng: random.Random) -> TagMotionState:
    """Advance one step: perturb heading, move, reflect off territory walls.

    Consumes exactly two uniform draws from rng per call regardless of
    the outcome, keeping per-tag motion streams aligned across runs.
    """
    heading = state.heading + params.heading_sigma * _standard_gauss(rng)
    terr = state.territory
    x = state.position[0] + params.speed * math.cos(heading)
    y = state.position[1] + params.speed * math.sin(heading)
    x, flip_x = _fold(x, terr.xmin, terr.xmax)
    y, flip_y = _fold(y, terr.ymin, terr.ymax)
    if flip_x:
        heading = math.pi - heading
    if flip_y:
        heading = -heading
    return TagMotionState((x, y), _normalize_angle(heading), terr)
