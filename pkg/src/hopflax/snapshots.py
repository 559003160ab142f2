"""Static SVG frames of a solved scenario.

Each frame shows the speed field as a grey-scale background (darker is
slower), obstacles at their positions for the frame time, goals as hollow
markers, the path travelled so far and the current agent positions. Cars are
drawn as arrows along their heading. All frames of one run share a view box.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from hopflax.environment import Environment

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
PIXELS = 480
SHADING_CELLS = 48


def state_at(times: np.ndarray, trajectory: np.ndarray, s: float) -> np.ndarray:
    """Linear interpolation of a physical-order trajectory at time ``s`` (clamped)."""
    s = float(np.clip(s, times[0], times[-1]))
    return np.array([np.interp(s, times, trajectory[:, k]) for k in range(trajectory.shape[1])])


def view_box(env: Environment, trajectories, goals, times, margin: float = 0.3):
    """``(xmin, ymin, xmax, ymax)`` covering paths, goals and obstacle sweeps."""
    pts = [np.asarray(x)[:, :2] for x in trajectories] + [np.asarray(goals)[:, :2]]
    for obs in env.obstacles:
        centers = obs.center_at(np.asarray(times))
        pts.append(centers + obs.radius)
        pts.append(centers - obs.radius)
    allpts = np.concatenate(pts)
    lo = allpts.min(axis=0) - margin
    hi = allpts.max(axis=0) + margin
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


def render(env: Environment, labels, goals, times, trajectories, s: float, box) -> str:
    """One SVG frame at physical time ``s``.

    ``trajectories`` are physical-order state arrays sampled at ``times``.
    World coordinates are used directly with the y axis flipped.
    """
    xmin, ymin, xmax, ymax = box
    width, height = xmax - xmin, ymax - ymin
    scale = PIXELS / max(width, height)
    stroke = 1.5 / scale

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width * scale)}" '
        f'height="{_fmt(height * scale)}" viewBox="{_fmt(xmin)} {_fmt(-ymax)} {_fmt(width)} {_fmt(height)}">',
        f"<title>t = {s:.3f}</title>",
        '<g transform="scale(1,-1)">',
    ]

    # speed field, normalised over the visible window
    n = SHADING_CELLS
    xs = xmin + (np.arange(n) + 0.5) * width / n
    ys = ymin + (np.arange(n) + 0.5) * height / n
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)
    speed = env.speed(grid)
    lo, hi = float(speed.min()), float(speed.max())
    level = np.full(speed.shape, 1.0) if hi - lo < 1e-12 else (speed - lo) / (hi - lo)
    cw, ch = width / n, height / n
    out.append("<g stroke=\"none\">")
    for a in range(n):
        for b in range(n):
            grey = int(round(200 + 55 * level[a, b]))
            out.append(
                f'<rect x="{_fmt(xmin + a * cw)}" y="{_fmt(ymin + b * ch)}" width="{_fmt(cw * 1.01)}" '
                f'height="{_fmt(ch * 1.01)}" fill="rgb({grey},{grey},{grey})"/>'
            )
    out.append("</g>")

    for obs in env.obstacles:
        c = obs.center_at(s)
        out.append(
            f'<circle cx="{_fmt(c[0])}" cy="{_fmt(c[1])}" r="{_fmt(obs.radius)}" '
            f'fill="#444" fill-opacity="0.85" stroke="#000" stroke-width="{_fmt(stroke)}"/>'
        )

    for k, (label, goal, x) in enumerate(zip(labels, goals, trajectories)):
        color = PALETTE[k % len(PALETTE)]
        out.append(
            f'<circle cx="{_fmt(goal[0])}" cy="{_fmt(goal[1])}" r="{_fmt(6 / scale)}" fill="none" '
            f'stroke="{color}" stroke-width="{_fmt(stroke)}" stroke-dasharray="{_fmt(3 / scale)}"/>'
        )
        upto = times <= s
        here = state_at(times, x, s)
        path = np.vstack([x[upto, :2], here[None, :2]])
        d = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in path)
        out.append(
            f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="{_fmt(stroke)}" '
            f'stroke-opacity="0.8"/>'
        )
        if x.shape[1] > 2:
            h = here[2]
            size = 10 / scale
            tip = here[:2] + size * np.array([np.cos(h), np.sin(h)])
            left = here[:2] + 0.5 * size * np.array([np.cos(h + 2.4), np.sin(h + 2.4)])
            right = here[:2] + 0.5 * size * np.array([np.cos(h - 2.4), np.sin(h - 2.4)])
            poly = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in (tip, left, right))
            out.append(f'<polygon points="{poly}" fill="{color}"><title>{escape(label)}</title></polygon>')
        else:
            out.append(
                f'<circle cx="{_fmt(here[0])}" cy="{_fmt(here[1])}" r="{_fmt(5 / scale)}" '
                f'fill="{color}"><title>{escape(label)}</title></circle>'
            )

    out.append("</g>")
    # caption drawn unflipped
    out.append(
        f'<text x="{_fmt(xmin + 8 / scale)}" y="{_fmt(-ymax + 18 / scale)}" font-family="sans-serif" '
        f'font-size="{_fmt(14 / scale)}">t = {s:.2f}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
