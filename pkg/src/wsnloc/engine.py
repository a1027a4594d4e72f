"""Deterministic simulation loop, traces and the links-on/off comparison.

Each step runs a fixed phase order: move tags, rebuild the link graph
from true positions, measure distances, localize every tag synchronously
against step-begin estimates, then update uncertainties from neighbor
counts. Per-tag random streams are derived from (seed, tag id, purpose),
so two runs of the same scenario share tag trajectories even when
tag-link settings differ and adding a tag never disturbs the others.
"""
from __future__ import annotations

import hashlib
import math
import random
import statistics
from collections import Counter
from dataclasses import dataclass, field, replace

from .dynamics import TagMotionState, step_mobility, update_uncertainty
from .localization import BeaconFix, PositionEstimate, METHOD_NONE, localize
from .radio import (
    ROLE_ANCHOR,
    ROLE_TAG,
    LinkSet,
    fix_eligible_degree,
    measure_distance,
    neighbor_graph,
)
from .scenario import Point, Scenario, Violation, validate_scenario

_TWO_PI = 2.0 * math.pi


class ScenarioValidationError(Exception):
    """Raised when a simulation is started from an invalid scenario."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass
class SensorState:
    id: str
    role: str
    true_position: Point
    estimated_position: Point
    uncertainty: float
    motion: TagMotionState | None = None


@dataclass(frozen=True, slots=True)
class SensorRecord:
    true_position: Point
    estimated_position: Point
    uncertainty: float
    neighbor_count: int
    fix_count: int
    method: str


@dataclass(frozen=True, slots=True)
class StepRecord:
    step_index: int
    sensors: dict[str, SensorRecord]
    links: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Trace:
    scenario: Scenario
    seed: int
    records: list[StepRecord]


@dataclass
class SimState:
    scenario: Scenario
    seed: int
    step_index: int
    sensors: dict[str, SensorState]
    motion_rng: dict[str, random.Random] = field(compare=False, repr=False, default_factory=dict)
    measure_rng: dict[str, random.Random] = field(compare=False, repr=False, default_factory=dict)


def derive_stream(seed: int, *labels: str) -> random.Random:
    """Independent, splittable stream keyed by (seed, labels) via SHA-256."""
    material = str(seed) + "".join("|" + label for label in labels)
    digest = hashlib.sha256(material.encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


def init_sim(s: Scenario, seed: int) -> SimState:
    """Build the step-0 state; tag estimates start perturbed inside a disc
    of radius initial_uncertainty around the true position."""
    violations = validate_scenario(s)
    if violations:
        raise ScenarioValidationError(violations)
    sensors: dict[str, SensorState] = {}
    for a in s.anchors:
        sensors[a.id] = SensorState(a.id, ROLE_ANCHOR, a.position, a.position, 0.0)
    motion_rng: dict[str, random.Random] = {}
    measure_rng: dict[str, random.Random] = {}
    for t in s.tags:
        init_rng = derive_stream(seed, t.id, "init")
        heading = -math.pi + _TWO_PI * init_rng.random()
        angle = _TWO_PI * init_rng.random()
        radius = t.initial_uncertainty * math.sqrt(init_rng.random())
        x, y = t.initial_position
        estimate = (x + radius * math.cos(angle), y + radius * math.sin(angle))
        sensors[t.id] = SensorState(
            t.id, ROLE_TAG, t.initial_position, estimate, t.initial_uncertainty,
            TagMotionState(t.initial_position, heading, t.territory))
        motion_rng[t.id] = derive_stream(seed, t.id, "motion")
        measure_rng[t.id] = derive_stream(seed, t.id, "measure")
    return SimState(s, seed, 0, sensors, motion_rng, measure_rng)


def step(state: SimState) -> tuple[SimState, StepRecord]:
    """Advance the state by one step in place and emit its record."""
    s = state.scenario
    sensors = state.sensors
    tag_ids = [t.id for t in s.tags]

    for tid in tag_ids:
        st = sensors[tid]
        st.motion = step_mobility(st.motion, s.dynamics, state.motion_rng[tid])
        st.true_position = st.motion.position

    positions = {sid: st.true_position for sid, st in sensors.items()}
    roles = {sid: st.role for sid, st in sensors.items()}
    links = neighbor_graph(positions, s.radio, roles, s.tag_links_enabled)

    # snapshot step-begin beliefs so tag-provided fixes are order-independent
    begin_estimate = {tid: sensors[tid].estimated_position for tid in tag_ids}
    begin_uncertainty = {tid: sensors[tid].uncertainty for tid in tag_ids}

    estimates: dict[str, PositionEstimate] = {}
    for tid in tag_ids:
        st = sensors[tid]
        rng = state.measure_rng[tid]
        fixes = []
        for nid in links.neighbors(tid):
            nst = sensors[nid]
            m = measure_distance(st.true_position, nst.true_position, s.radio, rng,
                                 from_id=tid, to_id=nid)
            if nst.role == ROLE_ANCHOR:
                fixes.append(BeaconFix(nst.true_position, m.estimated_distance, nid,
                                       ROLE_ANCHOR, 0.0))
            else:
                fixes.append(BeaconFix(begin_estimate[nid], m.estimated_distance, nid,
                                       ROLE_TAG, begin_uncertainty[nid]))
        prior = PositionEstimate(begin_estimate[tid], 0, METHOD_NONE, 0.0)
        estimates[tid] = localize(prior, fixes, s.estimator)

    records: dict[str, SensorRecord] = {}
    for sid, st in sensors.items():
        if st.role == ROLE_TAG:
            est = estimates[sid]
            st.estimated_position = est.position
            k = links.degree(sid)
            st.uncertainty = update_uncertainty(st.uncertainty, k, s.dynamics)
            records[sid] = SensorRecord(st.true_position, est.position, st.uncertainty,
                                        k, est.fix_count, est.method_used)
        else:
            records[sid] = SensorRecord(st.true_position, st.estimated_position, 0.0,
                                        fix_eligible_degree(links, sid, roles), 0, METHOD_NONE)

    state.step_index += 1
    return state, StepRecord(state.step_index - 1, records, tuple(links.pairs()))


def run(s: Scenario, steps: int, seed: int) -> Trace:
    """Run the scenario for the given number of steps from a fresh state."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    state = init_sim(s, seed)
    records = []
    append = records.append
    for _ in range(steps):
        state, record = step(state)
        append(record)
    return Trace(s, seed, records)


def detect_divergence(trace: Trace) -> dict[str, bool]:
    """Per-tag verdict: uncertainty pinned at u_max at the end of the run.

    A tag has diverged iff its final uncertainty equals u_max and its
    median uncertainty over the last 10% of steps is >= 0.9 * u_max.
    """
    if not trace.records:
        raise ValueError("trace has no records")
    u_max = trace.scenario.dynamics.u_max
    n = len(trace.records)
    tail = trace.records[n - max(1, n // 10):]
    verdicts = {}
    for t in trace.scenario.tags:
        final = trace.records[-1].sensors[t.id].uncertainty
        med = statistics.median(r.sensors[t.id].uncertainty for r in tail)
        verdicts[t.id] = final >= u_max and med >= 0.9 * u_max
    return verdicts


@dataclass(frozen=True)
class TagRunStats:
    diverged: bool
    final_uncertainty: float
    peak_uncertainty: float
    neighbor_histogram: dict[int, int]


@dataclass(frozen=True)
class TagComparison:
    links_off: TagRunStats
    links_on: TagRunStats


@dataclass(frozen=True)
class ComparisonReport:
    scenario: Scenario
    seed: int
    steps: int
    tags: dict[str, TagComparison]


def _run_stats(trace: Trace) -> dict[str, TagRunStats]:
    verdicts = detect_divergence(trace)
    stats = {}
    for t in trace.scenario.tags:
        series = [r.sensors[t.id].uncertainty for r in trace.records]
        counts = Counter(r.sensors[t.id].neighbor_count for r in trace.records)
        stats[t.id] = TagRunStats(verdicts[t.id], series[-1], max(series),
                                  dict(sorted(counts.items())))
    return stats


def report_from_traces(links_off: Trace, links_on: Trace) -> ComparisonReport:
    off_stats = _run_stats(links_off)
    on_stats = _run_stats(links_on)
    tags = {tid: TagComparison(off_stats[tid], on_stats[tid]) for tid in off_stats}
    return ComparisonReport(links_off.scenario, links_off.seed, len(links_off.records), tags)


def compare_runs(s: Scenario, steps: int, seed: int) -> ComparisonReport:
    """Run the scenario twice with tag links forced off then on, same seed.

    Per-tag motion streams make the true trajectories identical between
    the two runs, isolating the effect of tag links on uncertainty.
    """
    off_trace = run(replace(s, tag_links_enabled=False), steps, seed)
    on_trace = run(replace(s, tag_links_enabled=True), steps, seed)
    return report_from_traces(off_trace, on_trace)
