"""Problem instances: the scenario document format and the built-in examples.

A scenario is a YAML document::

    schema_version: 1
    name: demo
    horizon: 4.0
    weights: {w1: 1.0, w2: 0.0}
    agents:
      - {model: isotropic, start: [0, -1], goal: [0, 1], label: a}
      - {model: reeds_shepp, start: [1, -1, 1.57], goal: [1, 1, 1.57],
         V: 1.0, W: 2.0, heading_free: true, label: car}
    environment:
      speed: {type: constant, value: 1.0}     # or {type: sinusoidal, base, amplitude}
      obstacles:
        - {radius: 0.5, center: [0, 0]}
        - {radius: 0.3, orbit: {center: [0, 0], radius: 0.8, angular_rate: 0.5, phase: 0}}
      mask_sharpness: 100
    formation: {type: pairwise, pairs: [[0, 1, 0.5]]}   # none | pairwise | square
    solver: {sigma: 1, tau: 0.25, J: 100, seed: 0}

Only ``schema_version``, ``agents`` and ``horizon`` are required. Unknown
keys are rejected.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import yaml

from hopflax.dynamics import AgentSpec, Isotropic, ReedsShepp
from hopflax.environment import CircleObstacle, ConstantSpeed, Environment, Orbit, SinusoidalSpeed
from hopflax.penalties import FormationSpec, NoFormation, PairwiseDistance, SquareFormation, Weights
from hopflax.solver import SolverParams

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Invalid scenario; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ScenarioParseError(ScenarioError):
    pass


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentSpec, ...]
    env: Environment
    formation: FormationSpec
    weights: Weights
    horizon: float
    solver: SolverParams
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.agents:
            raise ScenarioError("agents", "at least one agent is required")
        if not self.horizon > 0:
            raise ScenarioError("horizon", "must be positive")
        participants = getattr(self.formation, "agents", lambda: set())()
        bad = [k for k in participants if k >= len(self.agents)]
        if bad:
            raise ScenarioError("formation", f"agent index {bad[0]} out of range")


# ---------------------------------------------------------------- parsing


def _take(mapping, path, allowed, required=()):
    if not isinstance(mapping, dict):
        raise ScenarioError(path, "expected a mapping")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ScenarioError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown key")
    for key in required:
        if key not in mapping:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required key")
    return mapping


def _number(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        hint = ""
        if isinstance(value, str):
            try:
                float(value)
                hint = " (YAML reads exponents without a decimal point as text: write 5.0e-4, not 5e-4)"
            except ValueError:
                pass
        raise ScenarioError(path, "expected a number" + hint)
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(path, "must be finite")
    if positive and not value > 0:
        raise ScenarioError(path, "must be positive")
    if nonneg and value < 0:
        raise ScenarioError(path, "must be non-negative")
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(path, "expected an integer")
    if minimum is not None and value < minimum:
        raise ScenarioError(path, f"must be at least {minimum}")
    return value


def _vector(value, path, length=None):
    if not isinstance(value, (list, tuple)):
        raise ScenarioError(path, "expected a list of numbers")
    out = tuple(_number(v, f"{path}[{k}]") for k, v in enumerate(value))
    if length is not None and len(out) != length:
        raise ScenarioError(path, f"expected {length} components, got {len(out)}")
    return out


def _parse_agent(doc, path):
    _take(doc, path, {"model", "start", "goal", "heading_free", "V", "W", "label"}, ("model", "start", "goal"))
    kind = doc["model"]
    if kind == "isotropic":
        for key in ("V", "W"):
            if key in doc:
                raise ScenarioError(f"{path}.{key}", "only valid for reeds_shepp agents")
        model = Isotropic()
    elif kind == "reeds_shepp":
        model = ReedsShepp(
            V=_number(doc.get("V", 1.0), f"{path}.V", positive=True),
            W=_number(doc.get("W", 1.0), f"{path}.W", positive=True),
        )
    else:
        raise ScenarioError(f"{path}.model", f"unknown model {kind!r}")
    n = model.state_dim
    heading_free = doc.get("heading_free", False)
    if not isinstance(heading_free, bool):
        raise ScenarioError(f"{path}.heading_free", "expected true or false")
    label = doc.get("label", path)
    if not isinstance(label, str):
        raise ScenarioError(f"{path}.label", "expected a string")
    return AgentSpec(
        model=model,
        start=_vector(doc["start"], f"{path}.start", n),
        goal=_vector(doc["goal"], f"{path}.goal", n),
        label=label,
        heading_free=heading_free,
    )


def _parse_speed(doc, path):
    _take(doc, path, {"type", "base", "amplitude", "value"}, ("type",))
    kind = doc["type"]
    if kind == "constant":
        _take(doc, path, {"type", "value"})
        return ConstantSpeed(_number(doc.get("value", 1.0), f"{path}.value", positive=True))
    if kind == "sinusoidal":
        _take(doc, path, {"type", "base", "amplitude"})
        base = _number(doc.get("base", 1.0), f"{path}.base")
        amplitude = _number(doc.get("amplitude", 0.25), f"{path}.amplitude", nonneg=True)
        if not base > amplitude:
            raise ScenarioError(f"{path}.base", "must exceed amplitude so the speed stays positive")
        return SinusoidalSpeed(base, amplitude)
    raise ScenarioError(f"{path}.type", f"unknown speed field {kind!r}")


def _parse_obstacle(doc, path):
    _take(doc, path, {"radius", "center", "orbit"}, ("radius",))
    radius = _number(doc["radius"], f"{path}.radius", positive=True)
    if ("center" in doc) == ("orbit" in doc):
        raise ScenarioError(path, "give exactly one of center or orbit")
    if "center" in doc:
        return CircleObstacle(radius, _vector(doc["center"], f"{path}.center", 2))
    o = _take(doc["orbit"], f"{path}.orbit", {"center", "radius", "angular_rate", "phase"},
              ("center", "radius", "angular_rate"))
    orbit = Orbit(
        center=_vector(o["center"], f"{path}.orbit.center", 2),
        radius=_number(o["radius"], f"{path}.orbit.radius", nonneg=True),
        angular_rate=_number(o["angular_rate"], f"{path}.orbit.angular_rate"),
        phase=_number(o.get("phase", 0.0), f"{path}.orbit.phase"),
    )
    return CircleObstacle(radius, orbit.center, orbit)


def _parse_environment(doc, path="environment"):
    _take(doc, path, {"speed", "obstacles", "mask_sharpness"})
    speed = _parse_speed(doc["speed"], f"{path}.speed") if "speed" in doc else ConstantSpeed()
    obstacles = doc.get("obstacles", [])
    if not isinstance(obstacles, list):
        raise ScenarioError(f"{path}.obstacles", "expected a list")
    return Environment(
        speed=speed,
        obstacles=tuple(_parse_obstacle(o, f"{path}.obstacles[{k}]") for k, o in enumerate(obstacles)),
        mask_sharpness=_number(doc.get("mask_sharpness", 100.0), f"{path}.mask_sharpness", positive=True),
    )


def _parse_formation(doc, n_agents, path="formation"):
    _take(doc, path, {"type", "pairs", "side", "diagonals"}, ("type",))
    kind = doc["type"]

    def index(v, p):
        i = _integer(v, p, minimum=0)
        if i >= n_agents:
            raise ScenarioError(p, f"agent index {i} out of range")
        return i

    if kind == "none":
        _take(doc, path, {"type"})
        return NoFormation()
    if kind == "pairwise":
        _take(doc, path, {"type", "pairs"}, ("pairs",))
        pairs = []
        for k, entry in enumerate(doc["pairs"]):
            p = f"{path}.pairs[{k}]"
            if not isinstance(entry, (list, tuple)) or len(entry) != 3:
                raise ScenarioError(p, "expected [agent, agent, distance]")
            a, b = index(entry[0], p + "[0]"), index(entry[1], p + "[1]")
            if a == b:
                raise ScenarioError(p, "a pair needs two distinct agents")
            pairs.append((a, b, _number(entry[2], p + "[2]", positive=True)))
        return PairwiseDistance(tuple(pairs))
    if kind == "square":
        _take(doc, path, {"type", "side", "diagonals"}, ("side", "diagonals"))
        diag = doc["diagonals"]
        if not isinstance(diag, list) or len(diag) != 2 or any(not isinstance(d, list) or len(d) != 2 for d in diag):
            raise ScenarioError(f"{path}.diagonals", "expected [[A, C], [B, D]]")
        diagonals = tuple(tuple(index(v, f"{path}.diagonals[{a}][{b}]") for b, v in enumerate(d))
                          for a, d in enumerate(diag))
        if len({*diagonals[0], *diagonals[1]}) != 4:
            raise ScenarioError(f"{path}.diagonals", "need four distinct agents")
        return SquareFormation(_number(doc["side"], f"{path}.side", positive=True), diagonals)
    raise ScenarioError(f"{path}.type", f"unknown formation {kind!r}")


_SOLVER_INTS = {"J", "decay_start", "decay_every", "max_iter", "seed"}


def _parse_solver(doc, path="solver"):
    names = {f.name for f in fields(SolverParams)}
    _take(doc, path, names)
    kwargs = {}
    for key, value in doc.items():
        p = f"{path}.{key}"
        if key == "converge_on_costates":
            if not isinstance(value, bool):
                raise ScenarioError(p, "expected true or false")
            kwargs[key] = value
        elif key in _SOLVER_INTS:
            kwargs[key] = _integer(value, p)
        else:
            kwargs[key] = _number(value, p)
    try:
        return SolverParams(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        field = next((f"{path}.{n}" for n in ("sigma", "tau", "J", "tol", "eta_decay", "seed", "max_iter")
                      if msg.startswith(n)), path)
        raise ScenarioError(field, msg) from None


def scenario_from_dict(doc) -> Scenario:
    _take(doc, "", {"schema_version", "name", "horizon", "weights", "agents", "environment", "formation", "solver"},
          ("schema_version", "horizon", "agents"))
    version = doc["schema_version"]
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    agents_doc = doc["agents"]
    if not isinstance(agents_doc, list) or not agents_doc:
        raise ScenarioError("agents", "at least one agent is required")
    agents = tuple(_parse_agent(a, f"agents[{k}]") for k, a in enumerate(agents_doc))
    weights_doc = _take(doc.get("weights", {"w1": 1.0, "w2": 0.0}), "weights", {"w1", "w2"})
    w1 = _number(weights_doc.get("w1", 1.0), "weights.w1", nonneg=True)
    w2 = _number(weights_doc.get("w2", 0.0), "weights.w2", nonneg=True)
    if not w1 + w2 > 0:
        raise ScenarioError("weights", "w1 + w2 must be positive")
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("name", "expected a string")
    return Scenario(
        agents=agents,
        env=_parse_environment(doc.get("environment", {})),
        formation=_parse_formation(doc.get("formation", {"type": "none"}), len(agents)),
        weights=Weights(w1, w2),
        horizon=_number(doc["horizon"], "horizon", positive=True),
        solver=_parse_solver(doc.get("solver", {})),
        name=name,
    )


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError("document", f"malformed document: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioParseError("document", "top level must be a mapping")
    return scenario_from_dict(doc)


# ---------------------------------------------------------------- writing


def scenario_to_dict(scenario: Scenario) -> dict:
    agents = []
    for a in scenario.agents:
        entry = {"model": a.model.name, "start": list(a.start), "goal": list(a.goal), "label": a.label}
        if isinstance(a.model, ReedsShepp):
            entry.update(V=a.model.V, W=a.model.W, heading_free=a.heading_free)
        agents.append(entry)
    env = scenario.env
    if isinstance(env.speed, SinusoidalSpeed):
        speed = {"type": "sinusoidal", "base": env.speed.base, "amplitude": env.speed.amplitude}
    else:
        speed = {"type": "constant", "value": env.speed.value}
    obstacles = []
    for o in env.obstacles:
        if o.orbit is None:
            obstacles.append({"radius": o.radius, "center": list(o.center)})
        else:
            orbit = {"center": list(o.orbit.center), "radius": o.orbit.radius,
                     "angular_rate": o.orbit.angular_rate, "phase": o.orbit.phase}
            obstacles.append({"radius": o.radius, "orbit": orbit})
    f = scenario.formation
    if isinstance(f, PairwiseDistance):
        formation = {"type": "pairwise", "pairs": [list(p) for p in f.pairs]}
    elif isinstance(f, SquareFormation):
        formation = {"type": "square", "side": f.side, "diagonals": [list(d) for d in f.diagonals]}
    else:
        formation = {"type": "none"}
    return {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "horizon": scenario.horizon,
        "weights": {"w1": scenario.weights.w1, "w2": scenario.weights.w2},
        "agents": agents,
        "environment": {"speed": speed, "obstacles": obstacles, "mask_sharpness": env.mask_sharpness},
        "formation": formation,
        "solver": asdict(scenario.solver),
    }


def serialize(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)


# ---------------------------------------------------------------- built-ins
#
# All coordinates fit inside [-2, 2]^2 and every horizon leaves slack after arrival.

TRIANGLE_SIDE = 0.5


def _triangle_goals(cx, cy, side=TRIANGLE_SIDE):
    h = side * math.sqrt(3.0) / 2.0
    return [(cx - side / 2, cy - h / 3), (cx, cy + 2 * h / 3), (cx + side / 2, cy - h / 3)]


def _triangle(name, w1, w2, goal_center, env, horizon):
    starts = [(-1.0, -2.0), (0.0, -2.0), (1.0, -2.0)]
    goals = _triangle_goals(*goal_center)
    agents = tuple(
        AgentSpec(Isotropic(), s, g, label=label)
        for s, g, label in zip(starts, goals, ("left", "middle", "right"))
    )
    return Scenario(
        agents=agents,
        env=env,
        formation=PairwiseDistance.complete(3, TRIANGLE_SIDE),
        weights=Weights(w1, w2),
        horizon=horizon,
        solver=SolverParams(),
        name=name,
    )


def _static_triangle_env():
    return Environment(ConstantSpeed(1.0), (CircleObstacle(0.7, (0.0, 0.0)),))


def triangle_time() -> Scenario:
    return _triangle("triangle_time", 1.0, 0.5, (0.0, 1.7), _static_triangle_env(), 8.0)


def triangle_formation() -> Scenario:
    return _triangle("triangle_formation", 0.5, 4.0, (0.0, 1.7), _static_triangle_env(), 8.0)


def square_hetero() -> Scenario:
    side = 0.5
    half = side / 2
    up = math.pi / 2
    agents = (
        AgentSpec(Isotropic(), (-half, -1.5 - half), (-half, 1.5 - half), label="dot-A"),
        AgentSpec(ReedsShepp(1.0, 2.0), (half, -1.5 - half, up), (half, 1.5 - half, up), label="car-B"),
        AgentSpec(Isotropic(), (half, -1.5 + half), (half, 1.5 + half), label="dot-C"),
        AgentSpec(ReedsShepp(1.0, 2.0), (-half, -1.5 + half, up), (-half, 1.5 + half, up), label="car-D"),
    )
    env = Environment(
        ConstantSpeed(1.0),
        (CircleObstacle(0.35, (-1.0, 0.0)), CircleObstacle(0.35, (1.0, 0.0)), CircleObstacle(0.25, (0.0, 0.9))),
    )
    return Scenario(
        agents=agents,
        env=env,
        formation=SquareFormation(side, ((0, 2), (1, 3))),
        weights=Weights(1.0, 1.0),
        horizon=8.0,
        solver=SolverParams(),
        name="square_hetero",
    )


def moving_obstacles() -> Scenario:
    env = Environment(
        SinusoidalSpeed(1.0, 0.25),
        (
            CircleObstacle(0.3, (0.0, 0.0), Orbit((0.0, 0.0), 0.7, 1.0, 0.0)),
            CircleObstacle(0.3, (0.0, 0.0), Orbit((0.0, 0.0), 0.7, 1.0, math.pi)),
        ),
    )
    return _triangle("moving_obstacles", 0.5, 3.0, (0.0, 1.4), env, 8.0)


BUILTINS = {
    "triangle_time": triangle_time,
    "triangle_formation": triangle_formation,
    "square_hetero": square_hetero,
    "moving_obstacles": moving_obstacles,
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None
