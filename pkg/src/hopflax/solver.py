"""Primal-dual solver for the discrete Hopf-Lax saddle point.

For a query ``({x_i}, t)`` the value of the (time-reversed) HJB equation is
approximated by

    u = inf_x sup_p  sum_{j,i} <p_ij, x_ij - x_i,j-1>  -  delta sum_j Hhat(x_j, p_j, t_j)

with ``Hhat = sum_i H_i - w1 chi - w2 rho`` over a uniform grid of ``J``
sub-intervals of ``[0, t]``. Trajectories are stored in reversed time: index
``J`` is the query point (pinned) and index ``0`` is where the agents end up.
The environment at reversed-time index ``j`` is evaluated at physical time
``horizon - j * delta``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from hopflax.dynamics import AgentModel
from hopflax.environment import Environment
from hopflax.penalties import (
    FormationSpec,
    Weights,
    chi,
    chi_gradient_single,
    rho,
    rho_gradient_single,
)

if TYPE_CHECKING:
    from hopflax.scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverParams:
    sigma: float = 1.0
    tau: float = 0.25
    J: int = 100
    eta0: float = 0.25
    eta_decay: float = 0.5
    decay_start: int = 5000
    decay_every: int = 1000
    eta_min: float = 1e-4
    tol: float = 5e-4
    max_iter: int = 100_000
    seed: int = 0
    max_step: float = 0.1
    converge_on_costates: bool = False

    def __post_init__(self):
        if not (self.sigma > 0 and self.tau > 0):
            raise ValueError("sigma and tau must be positive")
        if self.sigma * self.tau > 0.25 + 1e-12:
            raise ValueError("sigma*tau exceeds 0.25")
        if not self.J >= 2:
            raise ValueError("J must be at least 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (self.eta0 > 0 and self.eta_min > 0):
            raise ValueError("eta0 and eta_min must be positive")
        if not 0 < self.eta_decay < 1:
            raise ValueError("eta_decay must lie in (0, 1)")
        if self.decay_start < 0 or self.decay_every < 1:
            raise ValueError("decay_start must be >= 0 and decay_every >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SolveResult:
    value: float
    states: tuple[np.ndarray, ...]
    costates: tuple[np.ndarray, ...]
    iterations: int
    converged: bool
    residual_history: np.ndarray
    t: float
    horizon: float
    delta: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", self.t / (self.states[0].shape[0] - 1))

    @property
    def J(self) -> int:
        return self.states[0].shape[0] - 1

    @property
    def env_times(self) -> np.ndarray:
        """Physical time of every reversed-time index ``j``."""
        return self.horizon - self.delta * np.arange(self.J + 1)

    @property
    def physical_times(self) -> np.ndarray:
        return self.env_times[::-1]

    @property
    def physical_trajectories(self) -> tuple[np.ndarray, ...]:
        return tuple(x[::-1] for x in self.states)

    @property
    def physical_costates(self) -> tuple[np.ndarray, ...]:
        return tuple(p[::-1] for p in self.costates)


def step_size(params: SolverParams, k: int) -> float:
    """Gradient-descent rate used in iteration ``k`` (counting from 1).

    ``eta0`` until ``decay_start`` iterations have completed, then multiplied
    by ``eta_decay`` once per ``decay_every`` iterations, floored at ``eta_min``.
    """
    if k <= params.decay_start:
        return params.eta0
    n = (k - 1 - params.decay_start) // params.decay_every + 1
    return max(params.eta0 * params.eta_decay**n, params.eta_min)


def holistic_hamiltonian(states, costates, t, weights: Weights, spec: FormationSpec, goals,
                         env: Environment, models: Sequence[AgentModel], heading_free=None):
    """``sum_i H_i(x_i, p_i, t) - w1 chi - w2 rho``; broadcasts over leading axes."""
    total = sum(m.hamiltonian(env, x, p, t) for m, x, p in zip(models, states, costates))
    return total - weights.w1 * chi(states, goals, heading_free) - weights.w2 * rho(spec, states)


def _problem(scenario: "Scenario"):
    models = [a.model for a in scenario.agents]
    goals = [np.asarray(a.goal) for a in scenario.agents]
    free = [a.heading_free for a in scenario.agents]
    return models, goals, free


def saddle_objective(scenario: "Scenario", states, costates, t: float) -> float:
    """The bracketed objective of the discrete Hopf-Lax formula at ``(x, p)``."""
    models, goals, free = _problem(scenario)
    J = states[0].shape[0] - 1
    delta = t / J
    env_times = scenario.horizon - delta * np.arange(J + 1)
    pairing = sum(float(np.sum(p[1:] * (x[1:] - x[:-1]))) for x, p in zip(states, costates))
    ham = holistic_hamiltonian(
        [x[1:] for x in states], [p[1:] for p in costates], env_times[1:],
        scenario.weights, scenario.formation, goals, scenario.env, models, free,
    )
    return pairing - delta * float(np.sum(ham))


def _initial_guess(scenario: "Scenario", query, J: int, rng: np.random.Generator):
    points = np.array([q[:2] for q in query] + [a.goal[:2] for a in scenario.agents], dtype=float)
    lo = points.min(axis=0) - 1.0
    hi = points.max(axis=0) + 1.0
    states, costates = [], []
    for agent, q in zip(scenario.agents, query):
        n = agent.model.state_dim
        x = np.empty((J + 1, n))
        x[:J, :2] = rng.uniform(lo, hi, size=(J, 2))
        if n > 2:
            x[:J, 2:] = rng.uniform(-np.pi, np.pi, size=(J, n - 2))
        x[J] = q
        p = np.empty((J + 1, n))
        p[0] = 0.0
        p[1:] = rng.uniform(-0.1, 0.1, size=(J, n))
        states.append(x)
        costates.append(p)
    return states, costates


def solve(scenario: "Scenario", query=None, t: float | None = None, *,
          params: SolverParams | None = None,
          callback: Callable[[int, float], None] | None = None) -> SolveResult:
    """Resolve the value at ``(query, t)`` and the optimal trajectories.

    ``query`` defaults to the agents' start states and ``t`` to the scenario
    horizon. Each iteration performs

    1. a proximal ascent step on every costate ``p_ij`` (``j >= 1``) using the
       extrapolated states ``z``;
    2. one descent step on every free state: the endpoint ``x_i0`` moves by
       ``tau p_i1``, interior points take a step of size ``eta`` on the full
       objective evaluated at the previous iterate, with the running-cost part
       clipped to length ``params.max_step``;
    3. over-relaxation ``z = 2x - x_old``.

    Stops once the sup-norm change of all states (and costates, with
    ``converge_on_costates``) is at most ``params.tol`` or after
    ``params.max_iter`` iterations; a non-converged result is returned with
    ``converged=False``.

    The rate ``eta`` follows :func:`step_size`.
    """
    params = params or scenario.solver
    t = scenario.horizon if t is None else float(t)
    if not t > 0:
        raise ValueError("query time must be positive")
    if query is None:
        query = [a.start for a in scenario.agents]
    query = [np.asarray(q, dtype=float) for q in query]
    if len(query) != len(scenario.agents):
        raise ValueError("query must give one state per agent")
    for agent, q in zip(scenario.agents, query):
        if q.shape != (agent.model.state_dim,):
            raise ValueError(f"query for agent {agent.label!r} must have {agent.model.state_dim} components")

    models, goals, free = _problem(scenario)
    env = scenario.env
    w1, w2 = scenario.weights.w1, scenario.weights.w2
    spec = scenario.formation
    sigma, tau, J = params.sigma, params.tau, params.J
    delta = t / J
    env_times = scenario.horizon - delta * np.arange(J + 1)
    t_cost, t_state = env_times[1:], env_times[1:J]

    rng = np.random.default_rng(params.seed)
    X, P = _initial_guess(scenario, query, J, rng)
    Z = [x.copy() for x in X]
    n_agents = len(X)

    history = []
    converged = False
    k = 0
    for k in range(1, params.max_iter + 1):
        eta = step_size(params, k)
        # costate ascent, all (i, j >= 1) independently
        P_prev = [p.copy() for p in P] if params.converge_on_costates else None
        for i in range(n_agents):
            beta = P[i][1:] + sigma * (Z[i][1:] - Z[i][:-1])
            P[i][1:] = models[i].costate_prox(env, X[i][1:], beta, t_cost, sigma, delta)

        # state descent, reading only the new costates and the previous states
        X_old = [x.copy() for x in X]
        inner_old = [x[1:J] for x in X_old]
        for i in range(n_agents):
            p = P[i]
            X[i][0] = X_old[i][0] + tau * p[1]
            x = inner_old[i]
            grad = models[i].state_gradient(env, x, p[1:J], t_state)
            if w1:
                grad -= w1 * chi_gradient_single(x, goals[i], free[i])
            if w2:
                grad -= w2 * rho_gradient_single(spec, inner_old, i)
            step = eta * delta * grad
            length = np.sqrt(np.sum(step * step, axis=-1, keepdims=True))
            step *= np.minimum(1.0, params.max_step / np.maximum(length, 1e-300))
            X[i][1:J] = x - eta * (p[1:J] - p[2:]) + step

        for i in range(n_agents):
            np.subtract(2.0 * X[i], X_old[i], out=Z[i])

        change = max(float(np.max(np.abs(x - xo))) for x, xo in zip(X, X_old))
        if P_prev is not None:
            change = max(change, max(float(np.max(np.abs(p - pp))) for p, pp in zip(P, P_prev)))
        history.append(change)
        if callback is not None:
            callback(k, change)
        if change <= params.tol:
            converged = True
            break

    if not converged:
        log.warning("no convergence after %d iterations (last change %.3g)", k, history[-1])
    value = saddle_objective(scenario, X, P, t)
    return SolveResult(
        value=value,
        states=tuple(X),
        costates=tuple(P),
        iterations=k,
        converged=converged,
        residual_history=np.asarray(history),
        t=t,
        horizon=scenario.horizon,
    )


def penalty_integrals(scenario: "Scenario", result: SolveResult) -> tuple[float, float]:
    """Unweighted left-endpoint integrals of ``chi`` and ``rho`` along the
    physical trajectories, recomputed from the states alone."""
    _, goals, free = _problem(scenario)
    traj = [x[:-1] for x in result.physical_trajectories]
    chi_int = result.delta * float(np.sum(chi(traj, goals, free)))
    rho_int = result.delta * float(np.sum(rho(scenario.formation, traj)))
    return chi_int, rho_int


def trajectory_cost(scenario: "Scenario", result: SolveResult) -> tuple[float, float]:
    """``(integral of w1 chi, integral of w2 rho)`` over the physical trajectories."""
    chi_int, rho_int = penalty_integrals(scenario, result)
    return scenario.weights.w1 * chi_int, scenario.weights.w2 * rho_int


def rollout_residuals(scenario: "Scenario", result: SolveResult, *,
                      kink_tol: float | None = None) -> list[np.ndarray]:
    """Per agent, ``|(x_j-1 - x_j) - delta f(x_j, a_j, t_j)|`` for ``j = 1..J``
    with ``a_j`` the feedback control of ``(x_j, p_j)``.

    With ``kink_tol`` set, any control component whose switching function is
    within ``kink_tol`` of zero is replaced by the maximizing value closest to
    the observed step, since at a kink of ``H`` every such value is optimal.
    """
    env = scenario.env
    times = result.env_times[1:]
    out = []
    for agent, x, p in zip(scenario.agents, result.states, result.costates):
        m = agent.model
        disp = x[:-1] - x[1:]
        if kink_tol is None:
            a = m.feedback_control(env, x[1:], p[1:], times)
            step = result.delta * m.velocity(env, x[1:], a, times)
        else:
            step = m.closest_step(env, x[1:], p[1:], disp, times, result.delta, kink_tol)
        r = disp - step
        out.append(np.sqrt(np.sum(r * r, axis=-1)))
    return out


def rollout_consistency(scenario: "Scenario", result: SolveResult, *,
                        kink_tol: float | None = None) -> float:
    """Largest entry of :func:`rollout_residuals`."""
    return max(float(np.max(r)) for r in rollout_residuals(scenario, result, kink_tol=kink_tol))


def goal_distances(scenario: "Scenario", result: SolveResult) -> np.ndarray:
    """Planar distance to goal, shape ``(agents, J + 1)``, in physical time order."""
    return np.array([
        np.linalg.norm(x[:, :2] - np.asarray(a.goal[:2]), axis=-1)
        for a, x in zip(scenario.agents, result.physical_trajectories)
    ])


def arrival_time(scenario: "Scenario", result: SolveResult, radius: float = 0.05) -> float | None:
    """First physical time from which every agent stays within ``radius`` of its goal.

    The last physical sample (reversed index 0) is excluded: no running cost
    is charged there, so it is only determined to within one step of its
    neighbour.
    """
    inside = np.all(goal_distances(scenario, result)[:, :-1] <= radius, axis=0)
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    k = 0 if outside.size == 0 else outside[-1] + 1
    return float(result.physical_times[k])


def min_obstacle_clearance(scenario: "Scenario", result: SolveResult) -> float:
    """Smallest signed distance of any agent to the obstacles at matching physical times."""
    from hopflax.environment import signed_distance

    times = result.physical_times
    return min(
        float(np.min(signed_distance(scenario.env, x[:, :2], times)))
        for x in result.physical_trajectories
    )
