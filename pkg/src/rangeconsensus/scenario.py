"""Scenario files and built-in presets.

A scenario file is line oriented::

    # comment
    [scenario]
    T = 2*pi
    windows = 400
    mode = consensus_and_shape
    alpha = 0.35
    eps1 = 0.05
    eps2 = 7e-7

    [agent 1]
    px = 100
    py = 50
    vx = -4
    vy = 1.5
    omega = 5

    [edge]
    1 2 20

    [event]
    20 2 4 3

Agents are numbered from 1 in files. ``[edge]`` lines are ``i j [dstar]`` and
``[event]`` lines are ``round agent dvx dvy``; either section may appear more
than once. Numbers accept a trailing ``pi`` factor (``2*pi``, ``0.5pi``).
"""

from __future__ import annotations

import math
import re

from .control import ControllerGains, FormationGraph
from .errors import ParseError, ValidationError
from .kinematics import DEFAULT_SAMPLES, AgentState, Vec2
from .simulator import MODES, PerturbationEvent, Scenario

SCENARIO_KEYS = {
    # key: default (None = required)
    "T": None, "windows": None, "mode": None, "alpha": None, "eps1": None,
    "eps2": 0.0, "seed": 0, "noise_std": 0.0, "omega_sign_known": False,
    "samples": DEFAULT_SAMPLES,
}
AGENT_KEYS = {"px": None, "py": None, "vx": None, "vy": None, "omega": None,
              "radius0": 0.0, "phase0": 0.0}
INT_KEYS = {"windows", "seed", "samples"}

_SECTION = re.compile(r"^\[\s*([a-z]+)(?:\s+(\S+))?\s*\]$")
_PI = re.compile(r"^(.*?)\s*\*?\s*pi$")


def _number(text: str, line: int, integer: bool = False):
    t = text.strip()
    try:
        if integer:
            return int(t)
        m = _PI.match(t)
        if m:
            head = m.group(1).strip()
            x = (float(head) if head not in ("", "+", "-") else float(head + "1")) * math.pi
        else:
            x = float(t)
    except ValueError:
        kind = "integer" if integer else "number"
        raise ParseError(f"expected a {kind}, got {text.strip()!r}", line) from None
    if not math.isfinite(x):
        raise ParseError(f"non-finite value {text.strip()!r}", line)
    return x


def _bool(text: str, line: int) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ParseError(f"expected true/false, got {text.strip()!r}", line)


def _key_value(raw: str, lineno: int, allowed: dict, where: str, into: dict):
    if "=" not in raw:
        raise ParseError(f"expected key = value in {where}", lineno)
    key, value = (p.strip() for p in raw.split("=", 1))
    if key not in allowed:
        raise ParseError(f"unknown key {key!r} in {where}", lineno)
    if key in into:
        raise ParseError(f"duplicate key {key!r} in {where}", lineno)
    if key == "mode":
        if value not in MODES:
            raise ParseError(f"mode must be one of {', '.join(MODES)}", lineno)
        into[key] = value
    elif key == "omega_sign_known":
        into[key] = _bool(value, lineno)
    else:
        into[key] = _number(value, lineno, key in INT_KEYS)


def _fill(values: dict, spec: dict, where: str, line: int):
    for key, default in spec.items():
        if key not in values:
            if default is None:
                raise ParseError(f"missing required key {key!r} in {where}", line)
            values[key] = default
    return values


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario file (or ``preset:NAME``) into a validated Scenario."""
    stripped = text.strip()
    if stripped.startswith("preset:") and "\n" not in stripped:
        return preset(stripped)
    head, head_line = None, None
    agents = {}  # number -> (values, line)
    edges, events = [], []
    section, sect_line, current = None, 0, None
    for lineno, line in enumerate(text.splitlines(), 1):
        raw = line.split("#", 1)[0].strip()
        if not raw:
            continue
        m = _SECTION.match(raw)
        if m:
            name, arg = m.groups()
            sect_line = lineno
            if name == "scenario" and arg is None:
                if head is not None:
                    raise ParseError("duplicate [scenario] section", lineno)
                head, head_line, section, current = {}, lineno, "scenario", None
            elif name == "agent" and arg is not None:
                try:
                    num = int(arg)
                except ValueError:
                    msg = f"agent number must be an integer, got {arg!r}"
                    raise ParseError(msg, lineno) from None
                if num in agents:
                    raise ParseError(f"duplicate [agent {num}] section", lineno)
                current = {}
                agents[num] = (current, lineno)
                section = "agent"
            elif name in ("edge", "event") and arg is None:
                section, current = name, None
            else:
                raise ParseError(f"unknown section {raw}", lineno)
            continue
        if section is None:
            raise ParseError("content before the first section", lineno)
        if section == "scenario":
            _key_value(raw, lineno, SCENARIO_KEYS, "[scenario]", head)
        elif section == "agent":
            _key_value(raw, lineno, AGENT_KEYS, f"[agent] at line {sect_line}", current)
        elif section == "edge":
            parts = raw.replace(",", " ").split()
            if len(parts) not in (2, 3):
                raise ParseError("edge line needs 'i j [dstar]'", lineno)
            i, j = (_number(p, lineno, True) for p in parts[:2])
            dstar = _number(parts[2], lineno) if len(parts) == 3 else None
            edges.append((i, j, dstar, lineno))
        else:
            parts = raw.replace(",", " ").split()
            if len(parts) != 4:
                raise ParseError("event line needs 'round agent dvx dvy'", lineno)
            rnd, ag = (_number(p, lineno, True) for p in parts[:2])
            events.append((rnd, ag, _number(parts[2], lineno), _number(parts[3], lineno), lineno))

    if head is None:
        raise ParseError("missing [scenario] section")
    _fill(head, SCENARIO_KEYS, "[scenario]", head_line)
    nums = sorted(agents)
    if nums != list(range(1, len(nums) + 1)):
        raise ParseError(f"agents must be numbered 1..n without gaps, got {nums}")
    states = []
    for num in nums:
        vals, line = agents[num]
        _fill(vals, AGENT_KEYS, f"[agent {num}]", line)
        try:
            states.append(AgentState(Vec2(vals["px"], vals["py"]), Vec2(vals["vx"], vals["vy"]),
                                     vals["radius0"], vals["omega"], vals["phase0"]))
        except ValidationError as exc:
            raise ParseError(f"[agent {num}]: {exc}", line) from None
    for i, j, _, line in edges:
        for a in (i, j):
            if not 1 <= a <= len(states):
                raise ParseError(f"edge references unknown agent {a}", line)
    for _, ag, _, _, line in events:
        if not 1 <= ag <= len(states):
            raise ParseError(f"event references unknown agent {ag}", line)
    graph = FormationGraph(
        len(states),
        tuple((i - 1, j - 1) for i, j, _, _ in edges),
        {(i - 1, j - 1): d for i, j, d, _ in edges if d is not None},
    )
    gains = ControllerGains(head["eps1"], head["eps2"], head["alpha"], head["T"])
    return Scenario(
        agents=tuple(states), graph=graph, gains=gains, windows=head["windows"],
        events=tuple(PerturbationEvent(r, a - 1, Vec2(dx, dy)) for r, a, dx, dy, _ in events),
        noise_std=head["noise_std"], mode=head["mode"],
        omega_sign_known=head["omega_sign_known"], seed=head["seed"], samples=head["samples"],
    )


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario`; floats are written with repr."""
    g = sc.gains
    out = [
        "[scenario]",
        f"T = {g.T!r}",
        f"windows = {sc.windows}",
        f"mode = {sc.mode}",
        f"seed = {sc.seed}",
        f"noise_std = {sc.noise_std!r}",
        f"alpha = {g.alpha!r}",
        f"eps1 = {g.eps1!r}",
        f"eps2 = {g.eps2!r}",
        f"omega_sign_known = {'true' if sc.omega_sign_known else 'false'}",
        f"samples = {sc.samples}",
    ]
    for n, a in enumerate(sc.agents, 1):
        out += ["", f"[agent {n}]",
                f"px = {a.center.x!r}", f"py = {a.center.y!r}",
                f"vx = {a.center_velocity.x!r}", f"vy = {a.center_velocity.y!r}",
                f"omega = {a.omega!r}", f"radius0 = {a.radius!r}", f"phase0 = {a.phase!r}"]
    out += ["", "[edge]"]
    for i, j in sc.graph.edges:
        d = sc.graph.dstar(i, j)
        out.append(f"{i + 1} {j + 1}" + (f" {d!r}" if d is not None else ""))
    if sc.events:
        out += ["", "[event]"]
        for ev in sc.events:
            out.append(f"{ev.round} {ev.agent + 1} {ev.delta_v.x!r} {ev.delta_v.y!r}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- presets

def _initial_radii(centers_v, edges, alpha):
    r = [0.0] * len(centers_v)
    for i, j in edges:
        s = math.dist(centers_v[i], centers_v[j])
        r[i] = max(r[i], alpha * s)
        r[j] = max(r[j], alpha * s)
    return r


def _build(p, v, omega, edges, dstar, windows, mode, eps1, eps2, alpha, events=()):
    T = 2 * math.pi
    radii = _initial_radii(v, edges, alpha)
    agents = tuple(AgentState(Vec2(*pi), Vec2(*vi), r, w)
                   for pi, vi, r, w in zip(p, v, radii, omega))
    graph = FormationGraph(len(p), tuple(edges),
                           {e: dstar for e in edges} if dstar is not None else {})
    return Scenario(agents=agents, graph=graph, gains=ControllerGains(eps1, eps2, alpha, T),
                    windows=windows, events=tuple(events), mode=mode)


def reconsensus() -> Scenario:
    """Three agents on a path graph regain velocity consensus after agent 2
    is kicked at round 20."""
    return _build(
        p=((70, 30), (0, 50), (0, 0)),
        v=((-4, 2), (3, -2), (2, 4)),
        omega=(5, -3, 5),
        edges=((0, 1), (1, 2)),
        dstar=None, windows=60, mode="consensus_only",
        eps1=5e-2, eps2=0.0, alpha=0.35,
        events=(PerturbationEvent(20, 1, Vec2(4.0, 3.0)),),
    )


def formation() -> Scenario:
    """Three agents on a complete graph converge to an equilateral triangle of
    side 20 while agreeing on velocity."""
    return _build(
        p=((100, 50), (0, 80), (0, 0)),
        v=((-4, 1.5), (3, -3.5), (2, 3.5)),
        omega=(5, -3, 7),
        edges=((0, 1), (0, 2), (1, 2)),
        dstar=20.0, windows=400, mode="consensus_and_shape",
        eps1=5e-2, eps2=7e-7, alpha=0.35,
    )


PRESETS = {
    "reconsensus": reconsensus,
    "formation": formation,
}


def preset(name: str) -> Scenario:
    """Look up ``preset:NAME``. A trailing ``_tag`` on an unknown name is
    ignored, so ``formation_v1`` resolves to ``formation``."""
    key = name.split(":", 1)[1] if name.startswith("preset:") else name
    if key not in PRESETS:
        key = key.split("_", 1)[0]
    if key not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESETS[key]()


def load_scenario(source: str) -> Scenario:
    """``preset:NAME`` or a path to a scenario file."""
    if source.startswith("preset:"):
        return preset(source)
    with open(source, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
