import dataclasses
import math

import numpy as np
import pytest

from hopflax.dynamics import AgentSpec, Isotropic, ReedsShepp
from hopflax.environment import Environment
from hopflax.oracle import saddle_objective_reference
from hopflax.penalties import NoFormation, PairwiseDistance, Weights
from hopflax.scenario import Scenario
from hopflax.solver import (
    SolveResult,
    SolverParams,
    arrival_time,
    holistic_hamiltonian,
    penalty_integrals,
    rollout_consistency,
    rollout_residuals,
    saddle_objective,
    solve,
    step_size,
    trajectory_cost,
)

ISO = Isotropic()
FREE = Environment()


def single(start=(0.0, 0.0), goal=(1.0, 0.0), weights=(1.0, 0.0), horizon=1.0, **solver):
    return Scenario(
        agents=(AgentSpec(ISO, start, goal, label="a"),),
        env=FREE,
        formation=NoFormation(),
        weights=Weights(*weights),
        horizon=horizon,
        solver=SolverParams(**solver),
        name="single",
    )


def frozen_result(states, costates, t, horizon=None):
    return SolveResult(
        value=0.0,
        states=tuple(np.asarray(x, dtype=float) for x in states),
        costates=tuple(np.asarray(p, dtype=float) for p in costates),
        iterations=0,
        converged=True,
        residual_history=np.zeros(1),
        t=t,
        horizon=t if horizon is None else horizon,
    )


class TestParams:
    def test_defaults(self):
        p = SolverParams()
        assert (p.sigma, p.tau, p.J, p.tol, p.max_iter) == (1.0, 0.25, 100, 5e-4, 100_000)

    def test_step_product_bound(self):
        with pytest.raises(ValueError, match="sigma\\*tau exceeds 0.25"):
            SolverParams(sigma=2.0, tau=0.25)
        SolverParams(sigma=0.5, tau=0.5)

    @pytest.mark.parametrize("field,value", [("J", 1), ("tol", 0.0), ("eta_decay", 1.0), ("eta0", 0.0), ("max_iter", 0)])
    def test_rejects_invalid(self, field, value):
        with pytest.raises(ValueError):
            SolverParams(**{field: value})

    def test_step_size_schedule(self):
        p = SolverParams()
        assert step_size(p, 1) == 0.25
        assert step_size(p, 5000) == 0.25
        assert step_size(p, 5001) == 0.125
        assert step_size(p, 6000) == 0.125
        assert step_size(p, 6001) == 0.0625
        assert step_size(p, 10**6) == 1e-4


class TestHolisticHamiltonian:
    def test_zero_at_rest(self):
        goals = [np.array([0.0, 0.0]), np.array([0.5, 0.0])]
        h = holistic_hamiltonian(goals, [np.zeros(2)] * 2, 0.0, Weights(1, 1), PairwiseDistance(((0, 1, 0.5),)),
                                 goals, FREE, [ISO, ISO])
        assert h == pytest.approx(0.0, abs=1e-15)

    def test_reduces_to_sum_of_hamiltonians(self):
        car = ReedsShepp(1.0, 2.0)
        states = [np.array([0.3, 0.1]), np.array([0.0, 0.0, 0.0])]
        costates = [np.array([3.0, 4.0]), np.array([1.0, 0.0, 0.5])]
        h = holistic_hamiltonian(states, costates, 0.0, Weights(0, 0), NoFormation(), states, FREE, [ISO, car])
        assert h == pytest.approx(7.0)

    def test_composed_example(self):
        goal = np.array([0.0, 0.0])
        x = np.array([math.sqrt(math.log(2.0)), 0.0])
        h = holistic_hamiltonian([x], [np.array([3.0, 4.0])], 0.0, Weights(1, 0), NoFormation(), [goal], FREE, [ISO])
        assert h == pytest.approx(4.5)


class TestCostsAndDiagnostics:
    def test_stationary_goal_cost(self):
        J = 100
        x = np.tile([math.sqrt(math.log(2.0)), 0.0], (J + 1, 1))
        sc = single(start=tuple(x[0]), goal=(0.0, 0.0))
        res = frozen_result([x], [np.zeros_like(x)], 1.0)
        goal_cost, formation_cost = trajectory_cost(sc, res)
        assert goal_cost == pytest.approx(0.5)
        assert formation_cost == 0.0

    def test_parked_agents_cost_nothing(self):
        goals = [(0.0, 0.0), (0.5, 0.0)]
        sc = Scenario(
            agents=tuple(AgentSpec(ISO, g, g) for g in goals), env=FREE,
            formation=PairwiseDistance(((0, 1, 0.5),)), weights=Weights(1, 1), horizon=1.0, solver=SolverParams(),
        )
        xs = [np.tile(g, (11, 1)) for g in goals]
        res = frozen_result(xs, [np.zeros((11, 2))] * 2, 1.0)
        assert trajectory_cost(sc, res) == (0.0, 0.0)
        assert rollout_consistency(sc, res) == 0.0
        assert arrival_time(sc, res) == 0.0

    def test_rollout_of_exact_straight_line(self):
        J, t = 20, 1.0
        delta = t / J
        # reversed time: x_J is the start, each earlier index half a step closer to the goal
        x = np.array([[1.0 - delta * (J - j) * 0.5, 0.0] for j in range(J + 1)])
        p = np.zeros_like(x)
        p[1:, 0] = 1.0  # feedback control -p/|p| moves toward -x in reversed time
        sc = single()
        res = frozen_result([x], [p], t)
        r = rollout_residuals(sc, res)[0]
        assert r.shape == (J,)
        assert np.all(np.isfinite(r))
        np.testing.assert_allclose(r, 0.5 * delta, atol=1e-12)  # moving at half speed

    def test_penalty_integrals_use_left_endpoints(self):
        J = 4
        xs = np.zeros((J + 1, 2))
        xs[0] = [10.0, 0.0]  # free endpoint, excluded from the quadrature
        sc = single(goal=(0.0, 0.0))
        res = frozen_result([xs], [np.zeros_like(xs)], 1.0)
        assert penalty_integrals(sc, res) == (0.0, 0.0)


class TestSolve:
    def test_free_space_zero_data_value(self):
        sc = single(weights=(0.0, 0.0))
        res = solve(sc, [np.array([0.4, -1.3])], 1.0)
        assert res.converged
        assert abs(res.value) <= 1e-2

    def test_agent_at_goal_stays(self):
        # per-iteration state changes near the goal are O(eta delta |x - goal|),
        # so the default tolerance would stop before the random start has decayed
        sc = single(start=(0.5, 0.5), goal=(0.5, 0.5), horizon=0.5, J=20, tol=1e-5)
        res = solve(sc)
        assert res.converged
        d = np.linalg.norm(res.physical_trajectories[0][:-1] - [0.5, 0.5], axis=1)
        assert np.max(d) <= 1e-2

    def test_pinning_and_zero_initial_costate(self):
        sc = single(max_iter=50)
        q = np.array([0.25, -0.75])
        res = solve(sc, [q.copy()])
        assert res.iterations == 50
        assert not res.converged
        assert np.array_equal(res.states[0][-1], q)
        assert np.array_equal(res.costates[0][0], np.zeros(2))
        np.testing.assert_array_equal(res.physical_trajectories[0][0], q)

    def test_deterministic_and_seed_sensitive(self):
        sc = single(max_iter=30)
        a, b = solve(sc), solve(sc)
        assert a.value == b.value
        assert all(np.array_equal(x, y) for x, y in zip(a.states + a.costates, b.states + b.costates))
        c = solve(dataclasses.replace(sc, solver=dataclasses.replace(sc.solver, seed=1)))
        assert not np.array_equal(a.states[0], c.states[0])

    def test_value_matches_objective(self):
        sc = single(max_iter=200)
        res = solve(sc)
        assert res.value == saddle_objective(sc, res.states, res.costates, res.t)
        ref = saddle_objective_reference(sc, res.states, res.costates, res.t)
        assert res.value == pytest.approx(ref, abs=1e-10)

    def test_callback_sees_every_iteration(self):
        seen = []
        res = solve(single(max_iter=7), callback=lambda k, change: seen.append((k, change)))
        assert [k for k, _ in seen] == list(range(1, 8))
        np.testing.assert_array_equal([c for _, c in seen], res.residual_history)

    def test_converged_implies_small_final_change(self):
        sc = single(start=(0.0, 0.0), goal=(0.5, 0.0))
        res = solve(sc)
        assert res.converged and res.residual_history[-1] <= sc.solver.tol

    def test_query_validation(self):
        sc = single()
        with pytest.raises(ValueError):
            solve(sc, [np.zeros(3)])
        with pytest.raises(ValueError):
            solve(sc, t=0.0)
        with pytest.raises(ValueError):
            solve(sc, [np.zeros(2), np.zeros(2)])

    def test_time_grid(self):
        res = solve(single(horizon=2.0, J=10, max_iter=1))
        assert res.delta == pytest.approx(0.2)
        np.testing.assert_allclose(res.physical_times, np.linspace(0, 2, 11))
