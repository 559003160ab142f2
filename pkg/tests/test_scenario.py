import math
import textwrap

import pytest

from hopflax.dynamics import Isotropic, ReedsShepp
from hopflax.environment import SinusoidalSpeed, masked_speed
from hopflax.penalties import PairwiseDistance, SquareFormation
from hopflax.scenario import (
    BUILTINS,
    ScenarioError,
    ScenarioParseError,
    builtin,
    load_scenario,
    scenario_to_dict,
    serialize,
)

MINIMAL = """
schema_version: 1
horizon: 2.0
agents:
  - {model: isotropic, start: [0, 0], goal: [1, 0], label: solo}
"""


def doc(extra: str) -> str:
    return MINIMAL + textwrap.dedent(extra)


def test_minimal_document_gets_defaults():
    sc = load_scenario(MINIMAL)
    assert sc.solver.sigma == 1.0 and sc.solver.tau == 0.25 and sc.solver.tol == 5e-4
    assert sc.agents[0].label == "solo"
    assert sc.weights.w1 == 1.0 and sc.weights.w2 == 0.0
    assert sc.env.obstacles == ()


def test_full_document():
    text = """
    schema_version: 1
    name: demo
    horizon: 4.0
    weights: {w1: 0.5, w2: 2}
    agents:
      - {model: isotropic, start: [0, -1], goal: [0, 1], label: a}
      - {model: reeds_shepp, start: [1, -1, 1.57], goal: [1, 1, 1.57], V: 1.0, W: 2.0, heading_free: true, label: car}
    environment:
      speed: {type: sinusoidal, base: 1.0, amplitude: 0.25}
      obstacles:
        - {radius: 0.5, center: [0, 0]}
        - {radius: 0.3, orbit: {center: [0, 0], radius: 0.8, angular_rate: 0.5, phase: 0}}
      mask_sharpness: 50
    formation: {type: pairwise, pairs: [[0, 1, 0.5]]}
    solver: {sigma: 1, tau: 0.25, J: 40, seed: 7}
    """
    sc = load_scenario(textwrap.dedent(text))
    assert isinstance(sc.agents[1].model, ReedsShepp) and sc.agents[1].heading_free
    assert sc.env.mask_sharpness == 50.0
    assert sc.env.obstacles[1].orbit.angular_rate == 0.5
    assert sc.formation == PairwiseDistance(((0, 1, 0.5),))
    assert sc.solver.J == 40 and sc.solver.seed == 7


@pytest.mark.parametrize(
    "extra,field",
    [
        ("solver: {sigma: 2, tau: 0.25}\n", "solver"),
        ("environment: {obstacles: [{radius: 0, center: [0, 0]}]}\n", "environment.obstacles[0].radius"),
        ("colour: blue\n", "colour"),
        ("formation: {type: pairwise, pairs: [[0, 3, 0.5]]}\n", "formation.pairs[0][1]"),
        ("environment: {speed: {type: sinusoidal, base: 0.2, amplitude: 0.25}}\n", "environment.speed.base"),
        ("weights: {w1: 0, w2: 0}\n", "weights"),
        ("solver: {J: 1.5}\n", "solver.J"),
    ],
)
def test_validation_errors_name_the_field(extra, field):
    with pytest.raises(ScenarioError) as info:
        load_scenario(doc(extra))
    assert info.value.field.startswith(field)


def test_sigma_tau_message():
    with pytest.raises(ScenarioError, match=r"sigma\*tau exceeds 0.25"):
        load_scenario(doc("solver: {sigma: 2, tau: 0.25}\n"))


def test_zero_agents_rejected():
    with pytest.raises(ScenarioError) as info:
        load_scenario("schema_version: 1\nhorizon: 1\nagents: []\n")
    assert info.value.field == "agents"


def test_dimension_mismatch_rejected():
    text = "schema_version: 1\nhorizon: 1\nagents:\n  - {model: reeds_shepp, start: [0, 0], goal: [1, 0, 0]}\n"
    with pytest.raises(ScenarioError) as info:
        load_scenario(text)
    assert info.value.field == "agents[0].start"


def test_malformed_document():
    with pytest.raises(ScenarioParseError):
        load_scenario("agents: [unclosed")
    with pytest.raises(ScenarioParseError):
        load_scenario("- just\n- a list\n")


def test_wrong_schema_version():
    with pytest.raises(ScenarioError) as info:
        load_scenario(MINIMAL.replace("schema_version: 1", "schema_version: 2"))
    assert info.value.field == "schema_version"


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_round_trip(name):
    sc = builtin(name)
    again = load_scenario(serialize(sc))
    assert again == sc
    assert scenario_to_dict(again) == scenario_to_dict(sc)


def test_unknown_builtin():
    with pytest.raises(ValueError):
        builtin("hexagon")


def test_triangle_builtins():
    t, f = builtin("triangle_time"), builtin("triangle_formation")
    assert (t.weights.w1, t.weights.w2) == (1.0, 0.5)
    assert (f.weights.w1, f.weights.w2) == (0.5, 4.0)
    assert t.agents == f.agents and t.env == f.env
    goals = [a.goal for a in t.agents]
    for i in range(3):
        for j in range(i + 1, 3):
            assert math.dist(goals[i], goals[j]) == pytest.approx(0.5)


def test_square_builtin():
    sc = builtin("square_hetero")
    kinds = [type(a.model) for a in sc.agents]
    assert kinds.count(Isotropic) == 2 and kinds.count(ReedsShepp) == 2
    assert all(a.model.V == 1.0 and a.model.W == 2.0 for a in sc.agents if isinstance(a.model, ReedsShepp))
    assert sum(a.model.state_dim for a in sc.agents) == 10
    assert isinstance(sc.formation, SquareFormation) and sc.formation.side == 0.5
    assert (sc.weights.w1, sc.weights.w2) == (1.0, 1.0)


def test_moving_builtin():
    sc = builtin("moving_obstacles")
    assert isinstance(sc.env.speed, SinusoidalSpeed)
    assert float(sc.env.speed([math.pi / 2, math.pi / 2])) == pytest.approx(1.25)
    assert len(sc.env.obstacles) == 2 and all(o.orbit is not None for o in sc.env.obstacles)
    assert (sc.weights.w1, sc.weights.w2) == (0.5, 3.0)


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_builtins_inside_domain_and_start_clear(name):
    sc = builtin(name)
    for a in sc.agents:
        for point in (a.start, a.goal):
            assert all(-2.0 <= c <= 2.0 for c in point[:2])
        assert masked_speed(sc.env, a.start[:2], 0.0) > 0.9 * float(sc.env.speed(a.start[:2]))


def test_exponent_without_decimal_point_gets_a_hint():
    with pytest.raises(ScenarioError, match="5.0e-4") as info:
        load_scenario(doc("solver: {tol: 5e-4}\n"))
    assert info.value.field == "solver.tol"
    assert load_scenario(doc("solver: {tol: 5.0e-4}\n")).solver.tol == 5e-4
