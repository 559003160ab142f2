"""Agent motion models and their Hamiltonians.

Two models are supported:

* :class:`Isotropic` -- ``x' = v(x, t) a`` with ``|a| <= 1``, so
  ``H(x, p, t) = v(x, t) |p|``.
* :class:`ReedsShepp` -- a planar car ``(x, y, heading)`` with tangential
  speed ``v V`` and turning rate ``w W`` for controls ``v, w`` in ``[-1, 1]``,
  so ``H = V |p1 cos h + p2 sin h| + W |p3|``.

The obstacle mask multiplies every velocity term. States and costates are
arrays of shape ``(..., n)`` and every method broadcasts over the leading axes.
Where an absolute value is not differentiable, ``sign(0) = 0`` is used;
arguments within ``KINK_TOL`` of zero count as zero so that roundoff left by
the proximal map does not flip controls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Union

import numpy as np

from hopflax.environment import Environment, mask_and_gradient, masked_speed_and_gradient


KINK_TOL = 1e-12


def _sign(v):
    return np.where(np.abs(v) <= KINK_TOL, 0.0, np.sign(v))


def _norm(v):
    return np.sqrt(np.sum(v * v, axis=-1))


def _safe_ratio(num, den):
    """num / den, with 0 where den == 0."""
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast_shapes(np.shape(num), den.shape))
    with np.errstate(over="ignore"):  # subnormal den; every caller clips the ratio
        np.divide(num, den, out=out, where=den != 0)
    return out


@dataclass(frozen=True)
class Isotropic:
    state_dim: ClassVar[int] = 2
    control_dim: ClassVar[int] = 2
    name: ClassVar[str] = "isotropic"

    def hamiltonian(self, env: Environment, x, p, t=0.0):
        v, _ = masked_speed_and_gradient(env, x, t)
        return v * _norm(np.asarray(p, dtype=float))

    def costate_prox(self, env: Environment, x, beta, t, sigma, delta):
        """Shrinkage ``max(0, 1 - sigma delta v / |beta|) beta``."""
        beta = np.asarray(beta, dtype=float)
        v, _ = masked_speed_and_gradient(env, x, t)
        r = _norm(beta)
        scale = np.maximum(0.0, 1.0 - _safe_ratio(sigma * delta * v, r))
        scale = np.where(r > 0, scale, 0.0)
        return scale[..., None] * beta

    def state_gradient(self, env: Environment, x, p, t=0.0):
        _, grad_v = masked_speed_and_gradient(env, x, t)
        return _norm(np.asarray(p, dtype=float))[..., None] * grad_v

    def feedback_control(self, env: Environment, x, p, t=0.0):
        p = np.asarray(p, dtype=float)
        r = _norm(p)
        return -_safe_ratio(p, r[..., None])

    def velocity(self, env: Environment, x, a, t=0.0):
        v, _ = masked_speed_and_gradient(env, x, t)
        return v[..., None] * np.asarray(a, dtype=float)

    def closest_step(self, env: Environment, x, p, target, t, delta, kink_tol):
        """Step ``delta f(x, a, t)`` nearest ``target`` over the maximizing controls.

        Where ``|p| <= kink_tol`` every control in the unit ball maximizes.
        """
        p = np.asarray(p, dtype=float)
        target = np.asarray(target, dtype=float)
        v, _ = masked_speed_and_gradient(env, x, t)
        reach = delta * v
        fixed = reach[..., None] * self.feedback_control(env, x, p, t)
        length = _norm(target)
        free = target * np.minimum(1.0, _safe_ratio(reach, length))[..., None]
        return np.where((_norm(p) <= kink_tol)[..., None], free, fixed)


@dataclass(frozen=True)
class ReedsShepp:
    V: float = 1.0
    W: float = 1.0

    state_dim: ClassVar[int] = 3
    control_dim: ClassVar[int] = 2
    name: ClassVar[str] = "reeds_shepp"

    def __post_init__(self):
        if not (self.V > 0 and self.W > 0):
            raise ValueError("Reeds-Shepp V and W must be positive")

    @staticmethod
    def _tangential(x, p):
        heading = x[..., 2]
        c, s = np.cos(heading), np.sin(heading)
        return c, s, p[..., 0] * c + p[..., 1] * s

    def hamiltonian(self, env: Environment, x, p, t=0.0):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        mask, _ = mask_and_gradient(env, x[..., :2], t)
        _, _, along = self._tangential(x, p)
        return mask * (self.V * np.abs(along) + self.W * np.abs(p[..., 2]))

    def costate_prox(self, env: Environment, x, beta, t, sigma, delta):
        """Soft-threshold the component of the planar costate along the heading
        direction by ``sigma delta V`` and the angular costate by ``sigma delta W``
        (both speeds obstacle-masked)."""
        x = np.asarray(x, dtype=float)
        beta = np.asarray(beta, dtype=float)
        mask, _ = mask_and_gradient(env, x[..., :2], t)
        c, s, along = self._tangential(x, beta)
        cut = np.minimum(1.0, _safe_ratio(sigma * delta * self.V * mask, np.abs(along)))
        shrink = cut * along
        b3 = beta[..., 2]
        scale3 = np.maximum(0.0, 1.0 - _safe_ratio(sigma * delta * self.W * mask, np.abs(b3)))
        return np.stack(
            [beta[..., 0] - shrink * c, beta[..., 1] - shrink * s, np.where(b3 != 0, scale3 * b3, 0.0)],
            axis=-1,
        )

    def state_gradient(self, env: Environment, x, p, t=0.0):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        mask, grad_mask = mask_and_gradient(env, x[..., :2], t)
        c, s, along = self._tangential(x, p)
        speed_terms = self.V * np.abs(along) + self.W * np.abs(p[..., 2])
        planar = grad_mask * speed_terms[..., None]
        heading = mask * self.V * _sign(along) * (-p[..., 0] * s + p[..., 1] * c)
        return np.concatenate([planar, heading[..., None]], axis=-1)

    def feedback_control(self, env: Environment, x, p, t=0.0):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        _, _, along = self._tangential(x, p)
        return np.stack([-_sign(along), -_sign(p[..., 2])], axis=-1)

    def velocity(self, env: Environment, x, a, t=0.0):
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        mask, _ = mask_and_gradient(env, x[..., :2], t)
        heading = x[..., 2]
        speed = mask * self.V * a[..., 0]
        return np.stack([speed * np.cos(heading), speed * np.sin(heading), mask * self.W * a[..., 1]], axis=-1)

    def closest_step(self, env: Environment, x, p, target, t, delta, kink_tol):
        """Step ``delta f(x, a, t)`` nearest ``target`` over the maximizing controls.

        A control component whose switching function is within ``kink_tol``
        of zero may take any value in ``[-1, 1]``.
        """
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        target = np.asarray(target, dtype=float)
        mask, _ = mask_and_gradient(env, x[..., :2], t)
        c, s, along = self._tangential(x, p)
        a = self.feedback_control(env, x, p, t)
        lin = delta * mask * self.V
        ang = delta * mask * self.W
        v_best = np.clip(_safe_ratio(target[..., 0] * c + target[..., 1] * s, lin), -1.0, 1.0)
        w_best = np.clip(_safe_ratio(target[..., 2], ang), -1.0, 1.0)
        v = np.where(np.abs(along) <= kink_tol, v_best, a[..., 0])
        w = np.where(np.abs(p[..., 2]) <= kink_tol, w_best, a[..., 1])
        return delta * self.velocity(env, x, np.stack([v, w], axis=-1), t)


AgentModel = Union[Isotropic, ReedsShepp]


@dataclass(frozen=True)
class AgentSpec:
    model: AgentModel
    start: tuple[float, ...]
    goal: tuple[float, ...]
    label: str = ""
    heading_free: bool = False

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))
        n = self.model.state_dim
        if len(self.start) != n or len(self.goal) != n:
            raise ValueError(f"agent {self.label!r}: start/goal must have {n} components for {self.model.name}")


def _check_dims(model, x, p):
    n = model.state_dim
    if np.shape(x)[-1] != n or np.shape(p)[-1] != n:
        raise ValueError(f"{model.name} expects state and costate of dimension {n}")


def hamiltonian(model: AgentModel, env: Environment, x, p, t=0.0):
    _check_dims(model, x, p)
    return model.hamiltonian(env, x, p, t)


def costate_prox(model: AgentModel, env: Environment, x, beta, t, sigma, delta):
    """argmin over p of ``delta H(x, p, t) + |p - beta|^2 / (2 sigma)``."""
    _check_dims(model, x, beta)
    return model.costate_prox(env, x, beta, t, sigma, delta)


def hamiltonian_state_gradient(model: AgentModel, env: Environment, x, p, t=0.0):
    _check_dims(model, x, p)
    return model.state_gradient(env, x, p, t)


def feedback_control(model: AgentModel, env: Environment, x, p, t=0.0):
    """Control attaining the sup in the Hamiltonian."""
    _check_dims(model, x, p)
    return model.feedback_control(env, x, p, t)


def velocity(model: AgentModel, env: Environment, x, a, t=0.0):
    """Dynamics right-hand side ``f(x, a, t)``."""
    return model.velocity(env, x, a, t)
