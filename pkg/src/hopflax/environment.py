"""Speed fields, circular obstacles and the smooth obstacle mask.

All evaluators broadcast: planar points are arrays of shape ``(..., 2)`` and
times are scalars or arrays broadcastable against the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit

# Signed distance reported when there are no obstacles; saturates the mask to 1.
FREE_SPACE_DISTANCE = 1.0e6


@dataclass(frozen=True)
class ConstantSpeed:
    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("constant speed must be positive")

    def __call__(self, xy):
        xy = np.asarray(xy, dtype=float)
        return np.full(xy.shape[:-1], self.value)

    def gradient(self, xy):
        return np.zeros_like(np.asarray(xy, dtype=float))


@dataclass(frozen=True)
class SinusoidalSpeed:
    """Speed ``base + amplitude * sin(x) * sin(y)``."""

    base: float = 1.0
    amplitude: float = 0.25

    def __post_init__(self):
        if not (self.amplitude >= 0 and self.base > self.amplitude):
            raise ValueError("sinusoidal speed needs base > amplitude >= 0")

    def __call__(self, xy):
        xy = np.asarray(xy, dtype=float)
        return self.base + self.amplitude * np.sin(xy[..., 0]) * np.sin(xy[..., 1])

    def gradient(self, xy):
        xy = np.asarray(xy, dtype=float)
        sx, sy = np.sin(xy[..., 0]), np.sin(xy[..., 1])
        cx, cy = np.cos(xy[..., 0]), np.cos(xy[..., 1])
        return self.amplitude * np.stack([cx * sy, sx * cy], axis=-1)


SpeedField = Union[ConstantSpeed, SinusoidalSpeed]


@dataclass(frozen=True)
class Orbit:
    """Circular motion of an obstacle center around ``center``."""

    center: tuple[float, float]
    radius: float
    angular_rate: float
    phase: float = 0.0


@dataclass(frozen=True)
class CircleObstacle:
    radius: float
    center: tuple[float, float] = (0.0, 0.0)
    orbit: Orbit | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")

    def center_at(self, t):
        """Center position(s) at time(s) ``t``, shape ``shape(t) + (2,)``."""
        t = np.asarray(t, dtype=float)
        if self.orbit is None:
            return np.broadcast_to(np.asarray(self.center, dtype=float), t.shape + (2,))
        o = self.orbit
        angle = o.angular_rate * t + o.phase
        return np.stack(
            [o.center[0] + o.radius * np.cos(angle), o.center[1] + o.radius * np.sin(angle)],
            axis=-1,
        )


@dataclass(frozen=True)
class Environment:
    speed: SpeedField = ConstantSpeed()
    obstacles: tuple[CircleObstacle, ...] = ()
    mask_sharpness: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not self.mask_sharpness > 0:
            raise ValueError("mask_sharpness must be positive")


def _distance_and_direction(env: Environment, x, t):
    """Signed distance and its spatial gradient (unit vector from the active center).

    Ties between obstacles go to the first one in list order; at an obstacle
    center the direction is taken as zero.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], t.shape)
    x = np.broadcast_to(x, shape + (2,))
    if not env.obstacles:
        return np.full(shape, FREE_SPACE_DISTANCE), np.zeros(shape + (2,))
    best_d = None
    best_dir = None
    for obs in env.obstacles:
        offset = x - obs.center_at(t)
        norm = np.sqrt(np.sum(offset * offset, axis=-1))
        d = norm - obs.radius
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = np.where(norm[..., None] > 0, offset / norm[..., None], 0.0)
        if best_d is None:
            best_d, best_dir = d, direction
        else:
            closer = d < best_d
            best_d = np.where(closer, d, best_d)
            best_dir = np.where(closer[..., None], direction, best_dir)
    return best_d, best_dir


def signed_distance(env: Environment, x, t=0.0):
    """Minimum over obstacles of ``|x - center(t)| - radius``."""
    return _distance_and_direction(env, x, t)[0]


def obstacle_mask(env: Environment, x, t=0.0):
    """Smooth indicator of free space: ``(1 + tanh(k d |d|)) / 2``.

    Roughly 0 inside obstacles, 1 outside, exactly 1/2 on the boundary; the
    transition band has width about ``1 / sqrt(k)``.
    """
    return mask_and_gradient(env, x, t)[0]


def mask_and_gradient(env: Environment, x, t=0.0):
    """Return the obstacle mask and its spatial gradient together."""
    d, direction = _distance_and_direction(env, x, t)
    k = env.mask_sharpness
    # (1 + tanh(s))/2 == expit(2s); expit stays positive far longer inside obstacles
    mask = expit(2.0 * k * d * np.abs(d))
    dmask = 4.0 * k * np.abs(d) * mask * (1.0 - mask)
    return mask, dmask[..., None] * direction


def masked_speed(env: Environment, x, t=0.0):
    x = np.asarray(x, dtype=float)
    return env.speed(x) * obstacle_mask(env, x, t)


def masked_speed_gradient(env: Environment, x, t=0.0):
    x = np.asarray(x, dtype=float)
    mask, dmask = mask_and_gradient(env, x, t)
    speed = env.speed(x)
    return env.speed.gradient(x) * mask[..., None] + speed[..., None] * dmask


def masked_speed_and_gradient(env: Environment, x, t=0.0):
    x = np.asarray(x, dtype=float)
    mask, dmask = mask_and_gradient(env, x, t)
    speed = env.speed(x)
    value = speed * mask
    grad = env.speed.gradient(x) * mask[..., None] + speed[..., None] * dmask
    return value, grad
