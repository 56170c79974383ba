"""Deterministic limit flows of the individual-based process.

Large-population limits with mutation switched off: the one-trait logistic
equation

    dn/dt = (b - d - a n) n

and the two-trait competitive system

    dn_x/dt = (b_x - d_x - a_xx n_x - a_xy n_y) n_x
    dn_y/dt = (b_y - d_y - a_yx n_x - a_yy n_y) n_y

integrated with fixed-step classical RK4 so that comparison grids against
stochastic runs are reproducible. `classify_equilibrium_flow` resolves a
resident/mutant pair by integrating from (n_bar_x, epsilon) until the path
settles near one of the single-trait equilibria.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import EcologyParams, InvasionOutcome, classify_pair, equilibrium_density


class OdeBlowupError(RuntimeError):
    """The integrated state left the finite range (defensive; should not occur)."""


@dataclass
class OdePath:
    """Densities on a uniform grid covering [0, t_end] exactly."""

    times: np.ndarray
    values: np.ndarray  # shape (n,) for logistic, (n, 2) for dimorphic
    clip_count: int
    equilibrium_entry_time: float | None = None

    @property
    def terminal(self):
        return self.values[-1]

    def to_csv(self, path) -> None:
        two = self.values.ndim == 2
        header = "time,n_x,n_y" if two else "time,n_x"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i, t in enumerate(self.times):
                if two:
                    fh.write("%.17g,%.17g,%.17g\n" % (t, self.values[i, 0], self.values[i, 1]))
                else:
                    fh.write("%.17g,%.17g\n" % (t, self.values[i]))


def _grid(t_end: float, dt: float) -> tuple[int, float]:
    """Number of steps and the effective step making the grid land on t_end."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < dt:
        raise ValueError("t_end must be at least dt")
    n = max(1, round(t_end / dt))
    return n, t_end / n


def integrate_logistic(b: float, d: float, alpha_xx: float, n0: float,
                       t_end: float, dt: float = 1e-3) -> OdePath:
    """RK4 path of the logistic flow; negative overshoot is clipped to 0."""
    if n0 < 0:
        raise ValueError("n0 must be nonnegative")
    n_steps, h = _grid(t_end, dt)
    r = b - d
    a = alpha_xx
    out = np.empty(n_steps + 1)
    out[0] = n = float(n0)
    clip = 0
    entry = None
    eq = r / a if a > 0 and r > 0 else None
    half = h / 2.0
    sixth = h / 6.0
    for i in range(1, n_steps + 1):
        k1 = (r - a * n) * n
        v = n + half * k1
        k2 = (r - a * v) * v
        v = n + half * k2
        k3 = (r - a * v) * v
        v = n + h * k3
        k4 = (r - a * v) * v
        n = n + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if n < 0.0:
            n = 0.0
            clip += 1
        if not math.isfinite(n):
            raise OdeBlowupError(f"logistic state nonfinite at step {i}")
        out[i] = n
        if entry is None and eq is not None and abs(n - eq) < 1e-6:
            entry = i * h
    return OdePath(times=np.arange(n_steps + 1) * h, values=out,
                   clip_count=clip, equilibrium_entry_time=entry)


def _dimorphic_coeffs(params: EcologyParams, x, y):
    x = params.space.require(x)
    y = params.space.require(y)
    return (
        params.birth(x) - params.death(x),
        params.birth(y) - params.death(y),
        params.competition(x, x),
        params.competition(x, y),
        params.competition(y, x),
        params.competition(y, y),
    )


def integrate_dimorphic(params: EcologyParams, x, y, n0, t_end: float,
                        dt: float = 1e-3) -> OdePath:
    """RK4 path of the two-trait competitive flow from componentwise n0 >= 0."""
    nx, ny = float(n0[0]), float(n0[1])
    if nx < 0 or ny < 0:
        raise ValueError("n0 must be componentwise nonnegative")
    rx, ry, axx, axy, ayx, ayy = _dimorphic_coeffs(params, x, y)
    n_steps, h = _grid(t_end, dt)
    out = np.empty((n_steps + 1, 2))
    out[0] = (nx, ny)
    clip = 0
    half = h / 2.0
    sixth = h / 6.0
    for i in range(1, n_steps + 1):
        k1x = (rx - axx * nx - axy * ny) * nx
        k1y = (ry - ayx * nx - ayy * ny) * ny
        vx = nx + half * k1x
        vy = ny + half * k1y
        k2x = (rx - axx * vx - axy * vy) * vx
        k2y = (ry - ayx * vx - ayy * vy) * vy
        vx = nx + half * k2x
        vy = ny + half * k2y
        k3x = (rx - axx * vx - axy * vy) * vx
        k3y = (ry - ayx * vx - ayy * vy) * vy
        vx = nx + h * k3x
        vy = ny + h * k3y
        k4x = (rx - axx * vx - axy * vy) * vx
        k4y = (ry - ayx * vx - ayy * vy) * vy
        nx = nx + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        ny = ny + sixth * (k1y + 2.0 * (k2y + k3y) + k4y)
        if nx < 0.0:
            nx = 0.0
            clip += 1
        if ny < 0.0:
            ny = 0.0
            clip += 1
        if not (math.isfinite(nx) and math.isfinite(ny)):
            raise OdeBlowupError(f"dimorphic state nonfinite at step {i}")
        out[i, 0] = nx
        out[i, 1] = ny
    return OdePath(times=np.arange(n_steps + 1) * h, values=out, clip_count=clip)


class FlowOutcome(Enum):
    CONVERGES_TO_RESIDENT = "resident"
    CONVERGES_TO_MUTANT = "mutant"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class FlowClassification:
    outcome: FlowOutcome
    entry_time: float | None  # first entry into the ball of the winning dwell


def classify_equilibrium_flow(params: EcologyParams, x, y, epsilon: float,
                              dt: float = 1e-3, dwell: float = 10.0,
                              t_max: float = 1e4) -> FlowClassification:
    """Resolve the pair by the flow started just after a mutant reaches epsilon.

    Integrates from (n_bar_x, epsilon) until the path spends `dwell` time
    units inside the epsilon-ball of (n_bar_x, 0) or (0, n_bar_y); the entry
    time of the successful dwell window is reported. Unresolved after t_max
    signals a near-degenerate pair.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cls = classify_pair(params, x, y)
    if cls.outcome is InvasionOutcome.DEGENERATE:
        raise ValueError("degenerate pair: the flow needs a sign-definite pair")
    x = params.space.require(x)
    y = params.space.require(y)
    nbar_x = equilibrium_density(params, x)
    nbar_y = equilibrium_density(params, y)
    rx, ry, axx, axy, ayx, ayy = _dimorphic_coeffs(params, x, y)

    nx, ny = nbar_x, float(epsilon)
    eps2 = epsilon * epsilon
    half = dt / 2.0
    sixth = dt / 6.0
    n_steps = int(math.ceil(t_max / dt))
    dwell_steps = int(round(dwell / dt))
    in_res = in_mut = 0  # consecutive steps spent inside each ball
    entry_res = entry_mut = 0.0
    for i in range(1, n_steps + 1):
        k1x = (rx - axx * nx - axy * ny) * nx
        k1y = (ry - ayx * nx - ayy * ny) * ny
        vx = nx + half * k1x
        vy = ny + half * k1y
        k2x = (rx - axx * vx - axy * vy) * vx
        k2y = (ry - ayx * vx - ayy * vy) * vy
        vx = nx + half * k2x
        vy = ny + half * k2y
        k3x = (rx - axx * vx - axy * vy) * vx
        k3y = (ry - ayx * vx - ayy * vy) * vy
        vx = nx + dt * k3x
        vy = ny + dt * k3y
        k4x = (rx - axx * vx - axy * vy) * vx
        k4y = (ry - ayx * vx - ayy * vy) * vy
        nx = nx + sixth * (k1x + 2.0 * (k2x + k3x) + k4x)
        ny = ny + sixth * (k1y + 2.0 * (k2y + k3y) + k4y)
        if nx < 0.0:
            nx = 0.0
        if ny < 0.0:
            ny = 0.0
        dx = nx - nbar_x
        if dx * dx + ny * ny < eps2:
            if in_res == 0:
                entry_res = i * dt
            in_res += 1
            if in_res >= dwell_steps:
                return FlowClassification(FlowOutcome.CONVERGES_TO_RESIDENT, entry_res)
        else:
            in_res = 0
        dy = ny - nbar_y
        if nx * nx + dy * dy < eps2:
            if in_mut == 0:
                entry_mut = i * dt
            in_mut += 1
            if in_mut >= dwell_steps:
                return FlowClassification(FlowOutcome.CONVERGES_TO_MUTANT, entry_mut)
        else:
            in_mut = 0
    return FlowClassification(FlowOutcome.UNRESOLVED, None)
