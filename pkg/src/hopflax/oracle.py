"""Brute-force reference computations used to check the fast code paths.

Nothing here imports the solver or the closed-form proximal maps: the grid
searches only ever evaluate objective functions handed to them, so they stay
independent of what they are used to verify. Everything is slow on purpose
and meant for dimensions <= 3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSearchSpec:
    """Grid ``center + spacing * k @ axes`` with ``|spacing * k| <= radius``.

    ``axes`` holds orthonormal rows and defaults to the coordinate axes.
    """

    center: tuple[float, ...]
    radius: float
    spacing: float
    axes: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.axes is not None:
            axes = np.asarray(self.axes, dtype=float)
            if axes.shape != (len(self.center),) * 2 or not np.allclose(axes @ axes.T, np.eye(len(axes)), atol=1e-12):
                raise ValueError("axes must be an orthonormal basis matching center")
            object.__setattr__(self, "axes", tuple(tuple(float(v) for v in row) for row in axes))
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.radius >= self.spacing:
            raise ValueError("radius must be at least one spacing")

    @property
    def steps(self) -> int:
        return int(np.floor(self.radius / self.spacing + 1e-9))

    def offsets(self) -> np.ndarray:
        k = self.steps
        return self.spacing * np.arange(-k, k + 1)

    def points(self) -> np.ndarray:
        """All grid points, shape ``(N, d)``."""
        axis = self.offsets()
        mesh = np.meshgrid(*([axis] * len(self.center)), indexing="ij")
        local = np.stack([m.ravel() for m in mesh], axis=-1)
        if self.axes is not None:
            local = local @ np.asarray(self.axes)
        return local + np.asarray(self.center)

    def local(self, pts) -> np.ndarray:
        """Coordinates of ``pts`` relative to ``center`` in the grid frame."""
        rel = np.asarray(pts, dtype=float) - np.asarray(self.center)
        return rel if self.axes is None else rel @ np.asarray(self.axes).T

    def on_boundary(self) -> np.ndarray:
        k = self.steps
        idx = np.meshgrid(*([np.arange(-k, k + 1)] * len(self.center)), indexing="ij")
        return np.any(np.stack([np.abs(i.ravel()) == k for i in idx], axis=-1), axis=-1)


@dataclass(frozen=True)
class HopfLaxEstimate:
    value: float
    error_bound: float
    minimizer: np.ndarray
    excluded: int


def classical_hopf_lax(H, g, x, t, outer: GridSearchSpec, inner: GridSearchSpec,
                       *, unbounded_margin: float = 1e-9) -> HopfLaxEstimate:
    """``inf_{y} sup_{q} g(y) + <x - y, q> - t H(q)`` over two grids.

    ``H`` and ``g`` take arrays of shape ``(N, d)`` and return ``(N,)``. For a
    candidate ``y`` whose inner maximum sits on the boundary of the ``q`` grid
    the supremum is treated as unbounded and ``y`` is dropped. The reported
    error bound is the first-order grid estimate
    ``sqrt(d) * (L_g * h_outer + radius_outer * h_inner)`` with ``L_g`` the
    largest finite-difference slope of ``g`` seen on the outer grid.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ys = outer.points()
    qs = inner.points()
    boundary = inner.on_boundary()
    tH = t * np.asarray(H(qs), dtype=float)
    gy = np.asarray(g(ys), dtype=float)

    inner_vals = (x - ys) @ qs.T - tH  # (Ny, Nq)
    interior_max = np.max(inner_vals[:, ~boundary], axis=1)
    boundary_max = np.max(inner_vals[:, boundary], axis=1)
    bounded = boundary_max <= interior_max + unbounded_margin
    if not np.any(bounded):
        raise ValueError("inner supremum unbounded for every outer grid point; enlarge the outer grid")
    totals = np.where(bounded, gy + interior_max, np.inf)
    best = int(np.argmin(totals))

    d = x.size
    k = outer.steps
    g_grid = gy.reshape((2 * k + 1,) * d)
    slopes = [np.max(np.abs(np.diff(g_grid, axis=a))) for a in range(d)]
    lip = max(slopes) / outer.spacing
    bound = np.sqrt(d) * (lip * outer.spacing + outer.radius * inner.spacing)
    return HopfLaxEstimate(float(totals[best]), float(bound), ys[best], int(np.sum(~bounded)))


def grid_minimize(objective, spec: GridSearchSpec):
    """Exhaustive minimizer of ``objective`` over the grid; returns ``(point, value)``."""
    pts = spec.points()
    vals = np.asarray(objective(pts), dtype=float)
    k = int(np.argmin(vals))
    return pts[k], float(vals[k])


def prox_grid_oracle(objective, spec: GridSearchSpec, *, points_per_axis: int = 41,
                     strong_convexity: float = 1.0):
    """Minimize a ``strong_convexity``-strongly convex ``objective`` to grid
    resolution ``spec.spacing``.

    Searches coarse-to-fine: each level is an exhaustive grid over a window
    around the previous level's best point, shrinking until the spacing
    reaches ``spec.spacing``. The next window keeps two cells plus
    ``sqrt(2 e / m)``, where ``e`` is how far the objective rises within one
    cell of the best point and ``m`` is ``strong_convexity``. That margin is
    safe when the objective separates along the grid axes. A kink plane
    oblique to the axes can put the grid minimizer several cells from the
    true one, so pass ``spec.axes`` aligned with such kinks. Returns
    ``(point, value)``.
    """
    if not strong_convexity > 0:
        raise ValueError("strong_convexity must be positive")
    center = np.asarray(spec.center, dtype=float)
    radius = spec.radius
    half = (points_per_axis - 1) // 2
    h = max(radius / half, spec.spacing)
    while True:
        level = GridSearchSpec(tuple(center), max(radius, h), h, spec.axes)
        pts = level.points()
        vals = np.asarray(objective(pts), dtype=float)
        k = int(np.argmin(vals))
        center, best = pts[k], float(vals[k])
        if h <= spec.spacing:
            return center, best
        near = np.max(np.abs(level.local(pts) - level.local(center)), axis=-1) <= h * (1 + 1e-9)
        excess = float(np.max(vals[near]) - best)
        radius = min(radius, max(3.0 * h, 2.0 * h + np.sqrt(2.0 * max(excess, 0.0) / strong_convexity)))
        # kinks keep the margin near sqrt(h); then the window holds and the grid densifies
        h = max(min(radius / half, h / 2), spec.spacing)


def finite_difference_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(f(x + h e_k) - f(x - h e_k)) / 2h`` per component."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for k in itertools.product(*(range(n) for n in x.shape)):
        step = np.zeros_like(x)
        step[k] = h
        grad[k] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad


def saddle_objective_reference(scenario, states, costates, t: float) -> float:
    """Term-by-term evaluation of the discrete saddle objective with plain loops.

    Written independently of the vectorized solver code: it walks every
    agent, time index and formation pair explicitly and calls only the
    per-point model Hamiltonians and penalty formulas.
    """
    agents = scenario.agents
    J = len(states[0]) - 1
    delta = t / J
    w1, w2 = scenario.weights.w1, scenario.weights.w2
    total = 0.0
    for j in range(1, J + 1):
        tj = scenario.horizon - j * delta
        xs = [np.asarray(states[i][j], dtype=float) for i in range(len(agents))]
        h = 0.0
        for i, agent in enumerate(agents):
            step = xs[i] - np.asarray(states[i][j - 1], dtype=float)
            p = np.asarray(costates[i][j], dtype=float)
            total += float(sum(p[k] * step[k] for k in range(len(p))))
            h += float(agent.model.hamiltonian(scenario.env, xs[i], p, tj))
            diff = [xs[i][k] - agent.goal[k] for k in range(2)]
            if len(xs[i]) > 2 and not agent.heading_free:
                diff.append(xs[i][2] - agent.goal[2])
            h -= w1 * (1.0 - float(np.exp(-sum(d * d for d in diff))))
        h -= w2 * _formation_penalty(scenario.formation, xs)
        total -= delta * h
    return total


def _formation_penalty(formation, xs) -> float:
    kind = type(formation).__name__
    if kind == "NoFormation":
        return 0.0
    if kind == "PairwiseDistance":
        out = 0.0
        for a, b, d in formation.pairs:
            gap = float(np.sum((xs[a][:2] - xs[b][:2]) ** 2))
            # penalty is summed over ordered pairs
            out += 2.0 * (gap - d * d) ** 2
        return out
    if kind == "SquareFormation":
        (A, C), (B, D) = formation.diagonals
        a, b, c, d = (xs[k][:2] for k in (A, B, C, D))
        s2 = 2.0 * formation.side ** 2
        mid = (a + c) - (b + d)
        u, w = c - a, d - b
        return float((np.dot(c - a, c - a) - s2) ** 2 + (np.dot(d - b, d - b) - s2) ** 2
                     + np.dot(mid, mid) ** 2 + np.dot(u, w) ** 2)
    raise TypeError(f"unsupported formation {kind}")
