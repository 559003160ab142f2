"""Running costs: the goal penalty ``chi`` and the formation penalty ``rho``.

``states`` is always a list with one array per agent, each of shape
``(..., n_i)``; results broadcast over the leading axes. Formation penalties
only look at planar positions (the first two state components).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class NoFormation:
    pass


@dataclass(frozen=True)
class PairwiseDistance:
    """Penalize ``(|x_k - x_l|^2 - d^2)^2`` over *ordered* pairs.

    Each listed unordered pair ``(k, l, d)`` therefore contributes twice;
    halve ``w2`` to recover unordered-pair semantics.
    """

    pairs: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        pairs = tuple((int(k), int(l), float(d)) for k, l, d in self.pairs)
        for k, l, d in pairs:
            if k == l or k < 0 or l < 0:
                raise ValueError(f"invalid formation pair ({k}, {l})")
            if not d > 0:
                raise ValueError("formation distances must be positive")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def complete(cls, n_agents: int, distance: float) -> "PairwiseDistance":
        return cls(tuple((k, l, distance) for k in range(n_agents) for l in range(k + 1, n_agents)))

    def agents(self) -> set[int]:
        return {k for k, _, _ in self.pairs} | {l for _, l, _ in self.pairs}


@dataclass(frozen=True)
class SquareFormation:
    """Square of side ``side`` with corners A, C on one diagonal and B, D on
    the other: ``diagonals = ((A, C), (B, D))`` as agent indices."""

    side: float
    diagonals: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        diag = tuple(tuple(int(i) for i in pair) for pair in self.diagonals)
        if len(diag) != 2 or any(len(pair) != 2 for pair in diag):
            raise ValueError("square formation needs two diagonals of two agents each")
        if len({*diag[0], *diag[1]}) != 4:
            raise ValueError("square formation needs four distinct agents")
        if not self.side > 0:
            raise ValueError("square side must be positive")
        object.__setattr__(self, "diagonals", diag)

    def agents(self) -> set[int]:
        return {*self.diagonals[0], *self.diagonals[1]}


FormationSpec = Union[NoFormation, PairwiseDistance, SquareFormation]


@dataclass(frozen=True)
class Weights:
    w1: float
    w2: float

    def __post_init__(self):
        if not (self.w1 >= 0 and self.w2 >= 0):
            raise ValueError("weights must be non-negative")


def _goal_offset(x, goal, heading_free=False):
    offset = np.asarray(x, dtype=float) - np.asarray(goal, dtype=float)
    if heading_free and offset.shape[-1] > 2:
        offset = offset.copy()
        offset[..., 2:] = 0.0
    return offset


def chi_single(x, goal, heading_free=False):
    offset = _goal_offset(x, goal, heading_free)
    return 1.0 - np.exp(-np.sum(offset * offset, axis=-1))


def chi(states: Sequence, goals: Sequence, heading_free: Sequence[bool] | None = None):
    """``sum_i 1 - exp(-|x_i - goal_i|^2)``."""
    if len(states) != len(goals):
        raise ValueError("states and goals must list the same agents")
    free = heading_free or [False] * len(states)
    return sum(chi_single(x, g, f) for x, g, f in zip(states, goals, free))


def chi_gradient_single(x, goal, heading_free=False):
    offset = _goal_offset(x, goal, heading_free)
    return 2.0 * offset * np.exp(-np.sum(offset * offset, axis=-1))[..., None]


def _planar(states):
    return [np.asarray(s, dtype=float)[..., :2] for s in states]


def _square_terms(spec: SquareFormation, pos):
    (a, c), (b, d) = spec.diagonals
    u = pos[a] - pos[c]
    w = pos[b] - pos[d]
    m = (pos[a] + pos[c]) - (pos[b] + pos[d])
    target = 2.0 * spec.side**2
    uu = np.sum(u * u, axis=-1) - target
    ww = np.sum(w * w, axis=-1) - target
    mm = np.sum(m * m, axis=-1)
    uw = np.sum(u * w, axis=-1)
    return u, w, m, uu, ww, mm, uw


def rho(spec: FormationSpec, states: Sequence):
    if isinstance(spec, NoFormation):
        return np.zeros(np.shape(states[0])[:-1])
    pos = _planar(states)
    if isinstance(spec, PairwiseDistance):
        total = 0.0
        for k, l, dist in spec.pairs:
            diff = pos[k] - pos[l]
            total = total + 2.0 * (np.sum(diff * diff, axis=-1) - dist**2) ** 2
        return total
    if isinstance(spec, SquareFormation):
        _, _, _, uu, ww, mm, uw = _square_terms(spec, pos)
        return uu**2 + ww**2 + mm**2 + uw**2
    raise TypeError(f"unknown formation spec {spec!r}")


def rho_gradient_single(spec: FormationSpec, states: Sequence, agent_index: int):
    """Gradient of ``rho`` with respect to one agent's state, others frozen."""
    own = np.asarray(states[agent_index], dtype=float)
    grad = np.zeros(np.broadcast_shapes(*(np.shape(s)[:-1] for s in states)) + own.shape[-1:])
    if isinstance(spec, NoFormation):
        return grad
    pos = _planar(states)
    planar = grad[..., :2]
    if isinstance(spec, PairwiseDistance):
        for k, l, dist in spec.pairs:
            if agent_index not in (k, l):
                continue
            other = l if agent_index == k else k
            diff = pos[agent_index] - pos[other]
            planar += 8.0 * (np.sum(diff * diff, axis=-1) - dist**2)[..., None] * diff
        return grad
    if isinstance(spec, SquareFormation):
        (a, c), (b, d) = spec.diagonals
        if agent_index not in (a, b, c, d):
            return grad
        u, w, m, uu, ww, mm, uw = _square_terms(spec, pos)
        shared = 4.0 * mm[..., None] * m
        if agent_index == a:
            planar += 4.0 * uu[..., None] * u + shared + 2.0 * uw[..., None] * w
        elif agent_index == c:
            planar += -4.0 * uu[..., None] * u + shared - 2.0 * uw[..., None] * w
        elif agent_index == b:
            planar += 4.0 * ww[..., None] * w - shared + 2.0 * uw[..., None] * u
        else:
            planar += -4.0 * ww[..., None] * w - shared - 2.0 * uw[..., None] * u
        return grad
    raise TypeError(f"unknown formation spec {spec!r}")
