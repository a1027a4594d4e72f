"""Command-line front end: simulate, compare and render.

Traces are written as CSV with a small block of '#' metadata comments
(arena size, radio range, territories) above the header so that
rendering needs nothing but the trace file itself. SVG is the render
target: textual, diffable and testable by counting elements.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

from .engine import ScenarioValidationError, Trace, detect_divergence, run
from .radio import eligible_pairs, neighbor_graph
from .scenario import (
    RadioParams,
    Rect,
    Scenario,
    ScenarioError,
    default_scenario,
    parse_scenario,
    validate_scenario,
)

TRACE_HEADER = "step,sensor_id,role,true_x,true_y,est_x,est_y,uncertainty,neighbor_count,fix_count,method"

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_IO_ERROR = 2


class CliError(Exception):
    """User/config error; maps to exit code 1."""


class TraceFormatError(CliError):
    """Malformed trace file."""


def _fmt(v: float) -> str:
    return format(v, ".9g")


def _color_enabled() -> bool:
    return "WSNLOC_NO_COLOR" not in os.environ and sys.stdout.isatty()


def _verdict_word(diverged: bool) -> str:
    word = "diverged" if diverged else "bounded"
    if _color_enabled():
        code = "31" if diverged else "32"
        return f"\x1b[{code}m{word}\x1b[0m"
    return word


# --- scenario serialization ---------------------------------------------------


def render_scenario(s: Scenario) -> str:
    """Serialize a Scenario to config text; parse_scenario round-trips it."""
    lines = [
        f"tag_links_enabled = {'true' if s.tag_links_enabled else 'false'}",
        "",
        "[arena]",
        f"width = {s.arena.width!r}",
        f"height = {s.arena.height!r}",
        "",
        "[radio]",
        f"range = {s.radio.range!r}",
        f"path_loss_exponent = {s.radio.path_loss_exponent!r}",
        f"reference_distance = {s.radio.reference_distance!r}",
        f"reference_power = {s.radio.reference_power!r}",
        f"shadowing_sigma = {s.radio.shadowing_sigma!r}",
        "",
        "[dynamics]",
        f"growth_factor_low = {s.dynamics.growth_factor_low!r}",
        f"growth_factor_three = {s.dynamics.growth_factor_three!r}",
        f"decay_alpha = {s.dynamics.decay_alpha!r}",
        f"u_min = {s.dynamics.u_min!r}",
        f"u_max = {s.dynamics.u_max!r}",
        f"speed = {s.dynamics.speed!r}",
        f"heading_sigma = {s.dynamics.heading_sigma!r}",
        "",
        "[estimator]",
        f"method = {s.estimator.method}",
        f"centroid_degree_g = {s.estimator.centroid_degree_g!r}",
        f"refine_iterations = {s.estimator.refine_iterations}",
        f"collinearity_epsilon = {s.estimator.collinearity_epsilon!r}",
        f"tag_trust_max_uncertainty = {s.estimator.tag_trust_max_uncertainty!r}",
    ]
    for a in s.anchors:
        lines += ["", "[[anchor]]", f"id = {a.id}",
                  f"position = {a.position[0]!r}, {a.position[1]!r}"]
    for t in s.tags:
        terr = t.territory
        lines += [
            "", "[[tag]]", f"id = {t.id}",
            f"initial_position = {t.initial_position[0]!r}, {t.initial_position[1]!r}",
            f"territory = {terr.xmin!r}, {terr.ymin!r}, {terr.xmax!r}, {terr.ymax!r}",
            f"initial_uncertainty = {t.initial_uncertainty!r}",
        ]
    return "\n".join(lines) + "\n"


# --- trace CSV ------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TraceRow:
    step: int
    sensor_id: str
    role: str
    true_x: float
    true_y: float
    est_x: float
    est_y: float
    uncertainty: float
    neighbor_count: int
    fix_count: int
    method: str


@dataclass(frozen=True)
class TraceFile:
    """A trace as read back from disk: metadata plus rows grouped by step."""

    arena_width: float
    arena_height: float
    radio_range: float
    tag_links_enabled: bool
    territories: dict[str, Rect]
    steps: list[list[TraceRow]]


def write_trace_csv(trace: Trace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace_csv_text(trace))


def trace_csv_text(trace: Trace) -> str:
    s = trace.scenario
    roles = {a.id: "anchor" for a in s.anchors}
    roles.update({t.id: "tag" for t in s.tags})
    lines = [
        "# wsnloc trace",
        f"# seed: {trace.seed}",
        f"# arena: {_fmt(s.arena.width)} {_fmt(s.arena.height)}",
        f"# radio_range: {_fmt(s.radio.range)}",
        f"# tag_links_enabled: {'true' if s.tag_links_enabled else 'false'}",
    ]
    for t in s.tags:
        terr = t.territory
        lines.append(f"# territory: {t.id} {_fmt(terr.xmin)} {_fmt(terr.ymin)}"
                     f" {_fmt(terr.xmax)} {_fmt(terr.ymax)}")
    lines.append(TRACE_HEADER)
    for record in trace.records:
        prefix = str(record.step_index)
        for sid in sorted(record.sensors):
            r = record.sensors[sid]
            lines.append(",".join((
                prefix, sid, roles[sid],
                _fmt(r.true_position[0]), _fmt(r.true_position[1]),
                _fmt(r.estimated_position[0]), _fmt(r.estimated_position[1]),
                _fmt(r.uncertainty), str(r.neighbor_count), str(r.fix_count), r.method,
            )))
    return "\n".join(lines) + "\n"


def read_trace_csv(path: str) -> TraceFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.read().splitlines()
    except FileNotFoundError:
        raise TraceFormatError(f"trace file not found: {path}")

    meta: dict[str, str] = {}
    territories: dict[str, Rect] = {}
    body: list[str] = []
    for line in raw_lines:
        if line.startswith("#"):
            content = line[1:].strip()
            if ":" in content:
                key, _, value = content.partition(":")
                key = key.strip()
                value = value.strip()
                if key == "territory":
                    parts = value.split()
                    if len(parts) != 5:
                        raise TraceFormatError(f"malformed territory metadata in {path}")
                    territories[parts[0]] = Rect(*(float(p) for p in parts[1:]))
                else:
                    meta[key] = value
        elif line.strip():
            body.append(line)

    if not body or body[0] != TRACE_HEADER:
        raise TraceFormatError(f"{path} is not a wsnloc trace (bad or missing header)")
    try:
        arena_w, arena_h = (float(p) for p in meta["arena"].split())
        radio_range = float(meta["radio_range"])
        tag_links = meta.get("tag_links_enabled", "true") == "true"
    except (KeyError, ValueError):
        raise TraceFormatError(f"{path} is missing required trace metadata")

    steps: list[list[TraceRow]] = []
    try:
        for line in body[1:]:
            f = line.split(",")
            if len(f) != 11:
                raise ValueError(line)
            row = TraceRow(int(f[0]), f[1], f[2], float(f[3]), float(f[4]), float(f[5]),
                           float(f[6]), float(f[7]), int(f[8]), int(f[9]), f[10])
            if row.step == len(steps):
                steps.append([])
            elif row.step != len(steps) - 1:
                raise ValueError(line)
            steps[-1].append(row)
    except ValueError:
        raise TraceFormatError(f"malformed trace row in {path}")
    if not steps:
        raise TraceFormatError(f"{path} contains no data rows")
    return TraceFile(arena_w, arena_h, radio_range, tag_links, territories, steps)


# --- SVG rendering ----------------------------------------------------------


@dataclass(frozen=True)
class RenderStyle:
    anchor_glyph_radius: float = 5.0   # px
    tag_glyph_scale: float = 12.0      # px per meter of uncertainty
    show_links: bool = True
    show_territories: bool = True
    canvas_scale: float = 48.0         # px per meter
    margin: float = 24.0               # px


def render_svg(tf: TraceFile, step_index: int, style: RenderStyle = RenderStyle()) -> str:
    """One SVG snapshot of a recorded step.

    Anchors draw as fixed-radius filled circles; tags as circles whose
    radius is tag_glyph_scale times the recorded uncertainty; territories
    as dashed rectangles; links between fix-eligible pairs (recomputed
    from the recorded true positions) as line segments.
    """
    if not 0 <= step_index < len(tf.steps):
        raise CliError(f"step {step_index} out of range (trace has {len(tf.steps)} steps)")
    rows = tf.steps[step_index]
    scale = style.canvas_scale
    margin = style.margin

    def px(x: float) -> str:
        return _fmt(margin + x * scale)

    def py(y: float) -> str:
        return _fmt(margin + (tf.arena_height - y) * scale)

    width = _fmt(tf.arena_width * scale + 2 * margin)
    height = _fmt(tf.arena_height * scale + 2 * margin)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        f' viewBox="0 0 {width} {height}">',
        f'  <rect class="arena" x="{_fmt(margin)}" y="{_fmt(margin)}"'
        f' width="{_fmt(tf.arena_width * scale)}" height="{_fmt(tf.arena_height * scale)}"'
        f' fill="white" stroke="black" stroke-width="1.5"/>',
    ]
    if style.show_territories:
        for tid in sorted(tf.territories):
            terr = tf.territories[tid]
            out.append(
                f'  <rect class="territory" x="{px(terr.xmin)}" y="{py(terr.ymax)}"'
                f' width="{_fmt((terr.xmax - terr.xmin) * scale)}"'
                f' height="{_fmt((terr.ymax - terr.ymin) * scale)}"'
                f' fill="none" stroke="#888888" stroke-width="1" stroke-dasharray="6 4"/>')
    if style.show_links:
        positions = {r.sensor_id: (r.true_x, r.true_y) for r in rows}
        roles = {r.sensor_id: r.role for r in rows}
        links = neighbor_graph(positions, _range_only(tf.radio_range), roles,
                               tf.tag_links_enabled)
        for a, b in eligible_pairs(links, roles):
            ax, ay = positions[a]
            bx, by = positions[b]
            out.append(f'  <line class="link" x1="{px(ax)}" y1="{py(ay)}"'
                       f' x2="{px(bx)}" y2="{py(by)}" stroke="#6baed6" stroke-width="1"/>')
    for r in rows:
        if r.role == "tag":
            continue
        out.append(f'  <circle class="anchor" cx="{px(r.true_x)}" cy="{py(r.true_y)}"'
                   f' r="{_fmt(style.anchor_glyph_radius)}" fill="#1a355e"/>')
    for r in rows:
        if r.role != "tag":
            continue
        radius = style.tag_glyph_scale * r.uncertainty
        out.append(f'  <circle class="tag" cx="{px(r.true_x)}" cy="{py(r.true_y)}"'
                   f' r="{_fmt(radius)}" fill="#d95f0e" fill-opacity="0.45"'
                   f' stroke="#d95f0e"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _range_only(radio_range: float) -> RadioParams:
    return RadioParams(range=radio_range)


# --- commands ---------------------------------------------------------------


def _load_scenario(spec: str) -> Scenario:
    if spec == "default":
        return default_scenario()
    if not os.path.exists(spec):
        raise CliError(f"scenario file not found: {spec}")
    with open(spec, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text)


def _check_valid(s: Scenario) -> None:
    violations = validate_scenario(s)
    if violations:
        raise CliError("invalid scenario:\n" + "\n".join(f"  {v}" for v in violations))


def _summary_text(trace: Trace, color: bool) -> str:
    verdicts = detect_divergence(trace)
    s = trace.scenario
    lines = [
        f"seed: {trace.seed}  steps: {len(trace.records)}"
        f"  tag_links: {'on' if s.tag_links_enabled else 'off'}",
    ]
    for t in s.tags:
        series = [r.sensors[t.id].uncertainty for r in trace.records]
        word = _verdict_word(verdicts[t.id]) if color else ("diverged" if verdicts[t.id] else "bounded")
        lines.append(f"tag {t.id}: final={_fmt(series[-1])} peak={_fmt(max(series))}"
                     f" verdict={word}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario)
    if args.tag_links is not None:
        scenario = replace(scenario, tag_links_enabled=args.tag_links == "on")
    _check_valid(scenario)
    trace = run(scenario, args.steps, args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_trace_csv(trace, os.path.join(args.out, "trace.csv"))
    summary = _summary_text(trace, color=False)
    with open(os.path.join(args.out, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary)
    sys.stdout.write(_summary_text(trace, color=True))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args.scenario)
    _check_valid(scenario)
    off_trace = run(replace(scenario, tag_links_enabled=False), args.steps, args.seed)
    on_trace = run(replace(scenario, tag_links_enabled=True), args.steps, args.seed)
    off_verdicts = detect_divergence(off_trace)
    on_verdicts = detect_divergence(on_trace)
    tag_ids = [t.id for t in scenario.tags]

    os.makedirs(args.out, exist_ok=True)
    header = "step," + ",".join(f"{tid}_off,{tid}_on" for tid in tag_ids)
    lines = [header]
    for i, (off_rec, on_rec) in enumerate(zip(off_trace.records, on_trace.records)):
        cells = [str(i)]
        for tid in tag_ids:
            cells.append(_fmt(off_rec.sensors[tid].uncertainty))
            cells.append(_fmt(on_rec.sensors[tid].uncertainty))
        lines.append(",".join(cells))
    with open(os.path.join(args.out, "compare.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    report_lines = []
    for tid in tag_ids:
        off_word = "diverged" if off_verdicts[tid] else "bounded"
        on_word = "diverged" if on_verdicts[tid] else "bounded"
        report_lines.append(f"tag {tid}: links_off={off_word} links_on={on_word}")
    report = "\n".join(report_lines) + "\n"
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report)
    if _color_enabled():
        for tid in tag_ids:
            sys.stdout.write(f"tag {tid}: links_off={_verdict_word(off_verdicts[tid])}"
                             f" links_on={_verdict_word(on_verdicts[tid])}\n")
    else:
        sys.stdout.write(report)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    tf = read_trace_csv(args.trace)
    if args.step is None and args.steps_every is None:
        raise CliError("render needs --step or --steps-every")
    if args.step is not None:
        indices = [args.step]
    else:
        if args.steps_every < 1:
            raise CliError("--steps-every must be >= 1")
        indices = list(range(0, len(tf.steps), args.steps_every))
    style = RenderStyle()
    os.makedirs(args.out, exist_ok=True)
    for index in indices:
        svg = render_svg(tf, index, style)
        with open(os.path.join(args.out, f"step_{index}.svg"), "w", encoding="utf-8") as fh:
            fh.write(svg)
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # map argparse's default exit(2) onto exit 1
        raise CliError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="wsnloc",
                             description="Mobile WSN localization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation, write trace.csv + summary.txt")
    sim.add_argument("--scenario", default="default", help="config file path, or 'default'")
    sim.add_argument("--steps", type=int, default=2000)
    sim.add_argument("--seed", type=int, default=42)
    sim.add_argument("--tag-links", choices=("on", "off"), dest="tag_links", default=None)
    sim.add_argument("--out", default="out")
    sim.set_defaults(func=cmd_simulate)

    cmp_ = sub.add_parser("compare", help="paired links-off/links-on runs, write compare.csv + report.txt")
    cmp_.add_argument("--scenario", default="default")
    cmp_.add_argument("--steps", type=int, default=2000)
    cmp_.add_argument("--seed", type=int, default=42)
    cmp_.add_argument("--out", default="out")
    cmp_.set_defaults(func=cmd_compare)

    ren = sub.add_parser("render", help="emit SVG snapshots from a trace.csv")
    ren.add_argument("--trace", required=True)
    ren.add_argument("--step", type=int, default=None)
    ren.add_argument("--steps-every", type=int, dest="steps_every", default=None)
    ren.add_argument("--out", default="out")
    ren.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    try:
        if getattr(args, "steps", 1) < 1:
            raise CliError("--steps must be >= 1")
        return args.func(args)
    except (CliError, ScenarioError, ScenarioValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
