"""Physical connectivity and RSSI-based distance estimation.

Connectivity always comes from TRUE positions: radio propagation does not
care what a sensor believes its position is. Ranging uses a log-distance
path-loss model with optional Gaussian shadowing; the noiseless default
makes estimated distances exact.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Mapping

from .scenario import Point, RadioParams

ROLE_ANCHOR = "anchor"
ROLE_TAG = "tag"

_STD_NORMAL = NormalDist()
_MIN_UNIFORM = 5e-324  # inv_cdf rejects 0.0; random() can return it


@dataclass(frozen=True, slots=True)
class DistanceMeasurement:
    from_id: str
    to_id: str
    true_distance: float
    estimated_distance: float


@dataclass(frozen=True)
class LinkSet:
    """Symmetric, irreflexive adjacency over sensor ids.

    Anchor-anchor pairs are kept for completeness but nothing downstream
    consumes them. Neighbor lists are sorted so iteration order is stable.
    """

    adjacency: Mapping[str, tuple[str, ...]]

    def neighbors(self, sensor_id: str) -> tuple[str, ...]:
        return self.adjacency.get(sensor_id, ())

    def degree(self, sensor_id: str) -> int:
        return len(self.adjacency.get(sensor_id, ()))

    def linked(self, a: str, b: str) -> bool:
        return b in self.adjacency.get(a, ())

    def pairs(self) -> list[tuple[str, str]]:
        out = []
        for a, nbrs in self.adjacency.items():
            for b in nbrs:
                if a < b:
                    out.append((a, b))
        out.sort()
        return out


def neighbor_graph(true_positions: Mapping[str, Point], radio: RadioParams,
                   roles: Mapping[str, str], tag_links_enabled: bool) -> LinkSet:
    """Link every pair within radio.range (boundary inclusive).

    Tag-tag pairs exist only when tag_links_enabled; the pair (a, b) is
    always mirrored as (b, a).
    """
    ids = list(true_positions)
    rng_limit = radio.range
    adjacency: dict[str, list[str]] = {i: [] for i in ids}
    for i, a in enumerate(ids):
        ax, ay = true_positions[a]
        a_tag = roles[a] == ROLE_TAG
        for b in ids[i + 1:]:
            if a_tag and roles[b] == ROLE_TAG and not tag_links_enabled:
                continue
            bx, by = true_positions[b]
            if math.hypot(ax - bx, ay - by) <= rng_limit:
                adjacency[a].append(b)
                adjacency[b].append(a)
    return LinkSet({i: tuple(sorted(nbrs)) for i, nbrs in adjacency.items()})


def rssi_from_distance(d: float, radio: RadioParams, noise_draw: float = 0.0) -> float:
    """Received power (dB) at distance d under log-distance path loss.

    d is clamped below at reference_distance / 100 to keep the log finite.
    """
    d = max(d, radio.reference_distance / 100.0)
    return (radio.reference_power
            - 10.0 * radio.path_loss_exponent * math.log10(d / radio.reference_distance)
            + noise_draw)


def distance_from_rssi(p: float, radio: RadioParams) -> float:
    """Invert the path-loss model; result clamped to [0.01, 2 * range]."""
    d = radio.reference_distance * 10.0 ** (
        (radio.reference_power - p) / (10.0 * radio.path_loss_exponent))
    return min(max(d, 0.01), 2.0 * radio.range)


def measure_distance(a_pos: Point, b_pos: Point, radio: RadioParams,
                     rng: random.Random, from_id: str = "", to_id: str = "") -> DistanceMeasurement:
    """One ranging measurement between two true positions.

    Consumes exactly one uniform draw from rng whether or not shadowing
    is enabled, so measurement streams advance identically across
    configurations that differ only in noise level.
    """
    ax, ay = a_pos
    bx, by = b_pos
    true_d = math.hypot(ax - bx, ay - by)
    u = rng.random()
    if radio.shadowing_sigma > 0.0:
        noise = radio.shadowing_sigma * _STD_NORMAL.inv_cdf(u or _MIN_UNIFORM)
    else:
        noise = 0.0
    estimated = distance_from_rssi(rssi_from_distance(true_d, radio, noise), radio)
    return DistanceMeasurement(from_id, to_id, true_d, estimated)


def fix_eligible_degree(links: LinkSet, sensor_id: str, roles: Mapping[str, str]) -> int:
    """Neighbors that may contribute localization fixes (anchor-anchor pairs never do)."""
    if roles[sensor_id] == ROLE_TAG:
        return links.degree(sensor_id)
    return sum(1 for n in links.neighbors(sensor_id) if roles[n] == ROLE_TAG)


def eligible_pairs(links: LinkSet, roles: Mapping[str, str]) -> Iterable[tuple[str, str]]:
    for a, b in links.pairs():
        if roles[a] == ROLE_TAG or roles[b] == ROLE_TAG:
            yield (a, b)
