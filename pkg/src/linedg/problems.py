"""Built-in problem ingredients: the log-potential reference solution and
curve generators used by the command-line studies."""

import numpy as np

from .curve import Curve


class LogLineSolution:
    """Reference solution of the unit line load on a vertical line.

    u(x, y, z) = -log(r) / (2 pi) with r the horizontal distance to the
    axis (x0, y0); the corresponding line density is f = 1 and u is
    z-independent.  Singular on the axis itself.
    """

    def __init__(self, x0, y0):
        self.x0 = float(x0)
        self.y0 = float(y0)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(p[:, 0] - self.x0, p[:, 1] - self.y0)
        return -np.log(r) / (2.0 * np.pi)

    def gradient(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        dx = p[:, 0] - self.x0
        dy = p[:, 1] - self.y0
        r2 = dx ** 2 + dy ** 2
        g = np.zeros_like(p)
        g[:, 0] = -dx / (2.0 * np.pi * r2)
        g[:, 1] = -dy / (2.0 * np.pi * r2)
        return g

    @classmethod
    def from_curve(cls, curve, tol=1e-9):
        """Build from a vertical straight curve; rejects anything else."""
        p = curve.points
        if not (
            np.allclose(p[:, 0], p[0, 0], atol=tol)
            and np.allclose(p[:, 1], p[0, 1], atol=tol)
        ):
            raise ValueError(
                "the built-in reference solution needs a vertical straight line"
            )
        return cls(p[0, 0], p[0, 1])


def line_curve(start, end):
    """Straight segment between two points."""
    return Curve([start, end])


def sine_curve(start, end, amplitude, periods, axis, samples=48):
    """Sinusoidal polyline: a straight run plus a sine displacement.

    ``axis`` is the displacement direction (0/1/2 or 'x'/'y'/'z');
    ``samples`` is the number of polyline points.
    """
    if isinstance(axis, str):
        axis = {"x": 0, "y": 1, "z": 2}[axis.lower()]
    if samples < 2:
        raise ValueError("need at least 2 samples")
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    t = np.linspace(0.0, 1.0, int(samples))
    pts = start[None, :] + t[:, None] * (end - start)[None, :]
    pts[:, axis] += amplitude * np.sin(2.0 * np.pi * periods * t)
    return Curve(pts)
