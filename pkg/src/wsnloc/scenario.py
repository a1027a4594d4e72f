"""Experiment configuration: domain types, defaults, config parsing, validation.

All lengths are meters, angles radians, time in unitless steps.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

Point = tuple[float, float]

METHOD_TRILATERATE = "trilaterate"
METHOD_WEIGHTED_CENTROID = "weighted_centroid"
METHODS = (METHOD_TRILATERATE, METHOD_WEIGHTED_CENTROID)

_ID_RE = re.compile(r"[A-Za-z0-9_.\-]+\Z")


class ScenarioError(Exception):
    """Raised on malformed scenario config text. Carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, inclusive boundaries."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, point: Point) -> bool:
        x, y = point
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def inside(self, other: "Rect") -> bool:
        return (other.xmin <= self.xmin and self.xmax <= other.xmax
                and other.ymin <= self.ymin and self.ymax <= other.ymax)

    @property
    def center(self) -> Point:
        return ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)


@dataclass(frozen=True)
class Arena:
    width: float = 10.0
    height: float = 10.0

    def bounds(self) -> Rect:
        return Rect(0.0, 0.0, self.width, self.height)

    def contains(self, point: Point) -> bool:
        return self.bounds().contains(point)


@dataclass(frozen=True)
class AnchorSpec:
    """A fixed sensor at a known position; serves as a localization reference."""

    id: str
    position: Point


@dataclass(frozen=True)
class TagSpec:
    """A mobile sensor confined to a territory, localizing itself from neighbors."""

    id: str
    initial_position: Point
    territory: Rect
    initial_uncertainty: float = 1.0


@dataclass(frozen=True)
class RadioParams:
    """Sensing range plus the log-distance path-loss model used for ranging."""

    range: float = 7.0
    path_loss_exponent: float = 2.0
    reference_distance: float = 1.0
    reference_power: float = -40.0
    shadowing_sigma: float = 0.0


@dataclass(frozen=True)
class DynamicsParams:
    """Uncertainty recurrence rates and the tag mobility parameters.

    Uncertainty is multiplied by growth_factor_low when a tag has <= 2
    neighbors, by growth_factor_three at exactly 3, and decays as
    exp(-decay_alpha * (k - 3)) for k >= 4 neighbors, clamped to
    [u_min, u_max].
    """

    growth_factor_low: float = 1.15
    growth_factor_three: float = 1.05
    decay_alpha: float = 0.1
    u_min: float = 0.05
    u_max: float = 5.0
    speed: float = 0.25
    heading_sigma: float = 0.3


@dataclass(frozen=True)
class EstimatorParams:
    method: str = METHOD_TRILATERATE
    centroid_degree_g: float = 1.0
    refine_iterations: int = 5
    collinearity_epsilon: float = 1e-6
    tag_trust_max_uncertainty: float = 5.0


@dataclass(frozen=True)
class Scenario:
    arena: Arena
    anchors: tuple[AnchorSpec, ...]
    tags: tuple[TagSpec, ...]
    radio: RadioParams
    dynamics: DynamicsParams
    estimator: EstimatorParams
    tag_links_enabled: bool = True


@dataclass(frozen=True)
class Violation:
    """One invariant violation: where it is and why it is wrong."""

    path: str
    reason: str

    def __str__(self) -> str:
        return f"{self.path}: {self.reason}"


def default_scenario() -> Scenario:
    """Reference scenario: 10 x 10 m arena, 6 anchors, 7 m range, 3 tags.

    Anchor placement leaves the arena's far corner uncovered (no more
    than 3 anchors are ever in range inside tag C's territory), which is
    what lets C's uncertainty run away when tag links are disabled.
    Tag A roams dense coverage; tag B bridges A and C.
    """
    arena = Arena(10.0, 10.0)
    anchors = (
        AnchorSpec("a1", (1.0, 1.0)),
        AnchorSpec("a2", (4.0, 1.0)),
        AnchorSpec("a3", (1.0, 4.0)),
        AnchorSpec("a4", (4.0, 4.0)),
        AnchorSpec("a5", (2.0, 7.0)),
        AnchorSpec("a6", (7.0, 2.0)),
    )
    terr_a = Rect(0.5, 0.5, 4.5, 4.5)
    terr_b = Rect(4.0, 0.5, 9.5, 5.0)
    terr_c = Rect(7.5, 7.5, 9.5, 9.5)
    tags = (
        TagSpec("A", terr_a.center, terr_a, 1.0),
        TagSpec("B", terr_b.center, terr_b, 1.0),
        TagSpec("C", terr_c.center, terr_c, 1.0),
    )
    return Scenario(
        arena=arena,
        anchors=anchors,
        tags=tags,
        radio=RadioParams(),
        dynamics=DynamicsParams(),
        estimator=EstimatorParams(),
        tag_links_enabled=True,
    )


def validate_scenario(s: Scenario) -> list[Violation]:
    """Check every domain invariant; returns [] when the scenario is valid."""
    out: list[Violation] = []
    bad = out.append

    if not s.arena.width > 0:
        bad(Violation("arena.width", "must be > 0"))
    if not s.arena.height > 0:
        bad(Violation("arena.height", "must be > 0"))

    r = s.radio
    if not r.range > 0:
        bad(Violation("radio.range", "must be > 0"))
    if not r.path_loss_exponent > 0:
        bad(Violation("radio.path_loss_exponent", "must be > 0"))
    if not r.reference_distance > 0:
        bad(Violation("radio.reference_distance", "must be > 0"))
    if r.shadowing_sigma < 0:
        bad(Violation("radio.shadowing_sigma", "must be >= 0"))

    d = s.dynamics
    if not (1.0 < d.growth_factor_three < d.growth_factor_low):
        bad(Violation("dynamics.growth_factor_three",
                      "1 < growth_factor_three < growth_factor_low required"))
    if not d.decay_alpha > 0:
        bad(Violation("dynamics.decay_alpha", "must be > 0"))
    if not (0.0 < d.u_min < d.u_max):
        bad(Violation("dynamics.u_min", "0 < u_min < u_max required"))
    if d.speed < 0:
        bad(Violation("dynamics.speed", "must be >= 0"))
    if d.heading_sigma < 0:
        bad(Violation("dynamics.heading_sigma", "must be >= 0"))

    e = s.estimator
    if e.method not in METHODS:
        bad(Violation("estimator.method", f"must be one of {'/'.join(METHODS)}"))
    if not e.centroid_degree_g > 0:
        bad(Violation("estimator.centroid_degree_g", "must be > 0"))
    if e.refine_iterations < 0:
        bad(Violation("estimator.refine_iterations", "must be >= 0"))
    if not e.collinearity_epsilon > 0:
        bad(Violation("estimator.collinearity_epsilon", "must be > 0"))
    if not (0.0 < e.tag_trust_max_uncertainty <= d.u_max):
        bad(Violation("estimator.tag_trust_max_uncertainty",
                      "must lie in (0, u_max]"))

    if not s.anchors:
        bad(Violation("anchors", "at least one anchor required"))
    if not s.tags:
        bad(Violation("tags", "at least one tag required"))

    seen: set[str] = set()
    for kind, spec in [("anchors", a) for a in s.anchors] + [("tags", t) for t in s.tags]:
        path = f"{kind}.{spec.id}"
        if not _ID_RE.match(spec.id or ""):
            bad(Violation(path + ".id", "id must be a token of [A-Za-z0-9_.-]"))
        if spec.id in seen:
            bad(Violation(path + ".id", f"duplicate id '{spec.id}'"))
        seen.add(spec.id)

    for a in s.anchors:
        if not s.arena.contains(a.position):
            bad(Violation(f"anchors.{a.id}.position", "must lie inside the arena"))

    for t in s.tags:
        path = f"tags.{t.id}"
        terr = t.territory
        if not (terr.xmin < terr.xmax and terr.ymin < terr.ymax):
            bad(Violation(path + ".territory", "must have positive width and height"))
        elif not terr.inside(s.arena.bounds()):
            bad(Violation(path + ".territory", "must lie inside the arena"))
        if not terr.contains(t.initial_position):
            bad(Violation(path + ".initial_position", "must lie inside the territory"))
        if not (d.u_min <= t.initial_uncertainty <= d.u_max):
            bad(Violation(path + ".initial_uncertainty", "must lie in [u_min, u_max]"))

    return out


# --- config text parsing ----------------------------------------------------

_SECTIONS = ("arena", "radio", "dynamics", "estimator")

# full dotted key -> value kind
_SCALAR_KEYS = {
    "arena.width": "float",
    "arena.height": "float",
    "radio.range": "float",
    "radio.path_loss_exponent": "float",
    "radio.reference_distance": "float",
    "radio.reference_power": "float",
    "radio.shadowing_sigma": "float",
    "dynamics.growth_factor_low": "float",
    "dynamics.growth_factor_three": "float",
    "dynamics.decay_alpha": "float",
    "dynamics.u_min": "float",
    "dynamics.u_max": "float",
    "dynamics.speed": "float",
    "dynamics.heading_sigma": "float",
    "estimator.method": "method",
    "estimator.centroid_degree_g": "float",
    "estimator.refine_iterations": "int",
    "estimator.collinearity_epsilon": "float",
    "estimator.tag_trust_max_uncertainty": "float",
    "tag_links_enabled": "bool",
}

_ANCHOR_KEYS = {"id": "token", "position": "point"}
_TAG_KEYS = {
    "id": "token",
    "initial_position": "point",
    "territory": "rect",
    "initial_uncertainty": "float",
}


def _parse_value(kind: str, text: str, key: str, line: int):
    if kind == "float":
        try:
            return float(text)
        except ValueError:
            raise ScenarioError(f"type mismatch for '{key}': expected a number, got '{text}'", line)
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ScenarioError(f"type mismatch for '{key}': expected an integer, got '{text}'", line)
    if kind == "bool":
        if text == "true":
            return True
        if text == "false":
            return False
        raise ScenarioError(f"type mismatch for '{key}': expected true/false, got '{text}'", line)
    if kind == "method":
        if text in METHODS:
            return text
        raise ScenarioError(
            f"type mismatch for '{key}': expected one of {'/'.join(METHODS)}, got '{text}'", line)
    if kind == "token":
        if text and not text.isspace():
            return text
        raise ScenarioError(f"type mismatch for '{key}': expected a token", line)
    parts = [p.strip() for p in text.split(",")]
    want = 2 if kind == "point" else 4
    if len(parts) != want or not all(parts):
        raise ScenarioError(
            f"type mismatch for '{key}': expected {want} comma-separated numbers, got '{text}'", line)
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ScenarioError(
            f"type mismatch for '{key}': expected {want} comma-separated numbers, got '{text}'", line)
    if kind == "point":
        return (nums[0], nums[1])
    return Rect(nums[0], nums[1], nums[2], nums[3])


def parse_scenario(text: str) -> Scenario:
    """Parse a UTF-8 config document into a Scenario.

    Grammar: '#' comments, '[section]' headers, 'key = value' lines and
    repeated '[[anchor]]' / '[[tag]]' blocks. Dotted keys such as
    'arena.width' also work at top level. Any key left unset falls back
    to default_scenario(); a document that defines anchor or tag blocks
    replaces the default anchors/tags wholesale.
    """
    values: dict[str, object] = {}
    anchor_blocks: list[tuple[dict, int]] = []
    tag_blocks: list[tuple[dict, int]] = []
    section = ""
    block: dict | None = None
    block_keys: dict[str, str] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[["):
            if not line.endswith("]]"):
                raise ScenarioError("syntax error: unterminated block header", line_no)
            name = line[2:-2].strip()
            block = {}
            if name == "anchor":
                block_keys = _ANCHOR_KEYS
                anchor_blocks.append((block, line_no))
            elif name == "tag":
                block_keys = _TAG_KEYS
                tag_blocks.append((block, line_no))
            else:
                raise ScenarioError(f"unknown block '[[{name}]]'", line_no)
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError("syntax error: unterminated section header", line_no)
            section = line[1:-1].strip()
            block = None
            if section not in _SECTIONS:
                raise ScenarioError(f"unknown section '[{section}]'", line_no)
            continue
        if "=" not in line:
            raise ScenarioError("syntax error: expected 'key = value'", line_no)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ScenarioError("syntax error: empty key", line_no)
        if block is not None:
            if key not in block_keys:
                raise ScenarioError(f"unknown key '{key}' in block", line_no)
            block[key] = _parse_value(block_keys[key], value, key, line_no)
        else:
            full = f"{section}.{key}" if section else key
            if full not in _SCALAR_KEYS:
                raise ScenarioError(f"unknown key '{full}'", line_no)
            values[full] = _parse_value(_SCALAR_KEYS[full], value, full, line_no)

    base = default_scenario()
    get = values.get
    arena = Arena(
        width=get("arena.width", base.arena.width),
        height=get("arena.height", base.arena.height),
    )
    radio = RadioParams(
        range=get("radio.range", base.radio.range),
        path_loss_exponent=get("radio.path_loss_exponent", base.radio.path_loss_exponent),
        reference_distance=get("radio.reference_distance", base.radio.reference_distance),
        reference_power=get("radio.reference_power", base.radio.reference_power),
        shadowing_sigma=get("radio.shadowing_sigma", base.radio.shadowing_sigma),
    )
    dynamics = DynamicsParams(
        growth_factor_low=get("dynamics.growth_factor_low", base.dynamics.growth_factor_low),
        growth_factor_three=get("dynamics.growth_factor_three", base.dynamics.growth_factor_three),
        decay_alpha=get("dynamics.decay_alpha", base.dynamics.decay_alpha),
        u_min=get("dynamics.u_min", base.dynamics.u_min),
        u_max=get("dynamics.u_max", base.dynamics.u_max),
        speed=get("dynamics.speed", base.dynamics.speed),
        heading_sigma=get("dynamics.heading_sigma", base.dynamics.heading_sigma),
    )
    estimator = EstimatorParams(
        method=get("estimator.method", base.estimator.method),
        centroid_degree_g=get("estimator.centroid_degree_g", base.estimator.centroid_degree_g),
        refine_iterations=get("estimator.refine_iterations", base.estimator.refine_iterations),
        collinearity_epsilon=get("estimator.collinearity_epsilon", base.estimator.collinearity_epsilon),
        tag_trust_max_uncertainty=get("estimator.tag_trust_max_uncertainty",
                                      base.estimator.tag_trust_max_uncertainty),
    )

    if anchor_blocks:
        anchors = []
        for fields, line_no in anchor_blocks:
            for req in ("id", "position"):
                if req not in fields:
                    raise ScenarioError(f"[[anchor]] block is missing key '{req}'", line_no)
            anchors.append(AnchorSpec(fields["id"], fields["position"]))
        anchors = tuple(anchors)
    else:
        anchors = base.anchors

    if tag_blocks:
        tags = []
        for fields, line_no in tag_blocks:
            for req in ("id", "initial_position"):
                if req not in fields:
                    raise ScenarioError(f"[[tag]] block is missing key '{req}'", line_no)
            tags.append(TagSpec(
                id=fields["id"],
                initial_position=fields["initial_position"],
                territory=fields.get("territory", arena.bounds()),
                initial_uncertainty=fields.get("initial_uncertainty", 1.0),
            ))
        tags = tuple(tags)
    else:
        tags = base.tags

    seen: set[str] = set()
    for fields, line_no in anchor_blocks + tag_blocks:
        sensor_id = fields["id"]
        if sensor_id in seen:
            raise ScenarioError(f"duplicate id '{sensor_id}'", line_no)
        seen.add(sensor_id)

    return Scenario(
        arena=arena,
        anchors=anchors,
        tags=tags,
        radio=radio,
        dynamics=dynamics,
        estimator=estimator,
        tag_links_enabled=get("tag_links_enabled", base.tag_links_enabled),
    )
