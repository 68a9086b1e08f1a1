"""Random-waypoint mobility in a 3D box.

Nodes fly straight legs between uniformly drawn waypoints with a speed
drawn per leg and zero pause time.  Two consumers exist: the tick-driven
stepper used by the packet simulator, and a leg generator used by the
mobility-only validation harness (which needs exact piecewise-linear
trajectories to solve sphere crossings analytically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vec3

#: Distance (m) below which a waypoint counts as reached.
_WAYPOINT_EPS = 1e-9


@dataclass
class MobilityState:
    position: Vec3
    velocity: Vec3
    waypoint: Vec3
    speed: float


def draw_speed(rng: np.random.Generator, v_min: float, v_max: float,
               speed_law: str = "uniform") -> float:
    """Draw a per-leg speed.

    ``uniform`` is the classic model.  ``stationary-uniform`` draws with
    density proportional to v, which makes the time-stationary speed
    distribution uniform on [v_min, v_max] (legs at speed v last 1/v times
    as long, so the length bias exactly cancels).
    """
    if speed_law == "uniform":
        return float(rng.uniform(v_min, v_max))
    if speed_law == "stationary-uniform":
        u = rng.random()
        return float(math.sqrt(v_min * v_min + u * (v_max * v_max - v_min * v_min)))
    raise ValueError(f"unknown speed law {speed_law!r}")


def new_leg(state: MobilityState, box: Vec3, rng: np.random.Generator,
            v_min: float, v_max: float, speed_law: str = "uniform") -> None:
    """Redraw waypoint and speed in place; velocity points at the new waypoint."""
    while True:
        wp = rng.uniform(0.0, 1.0, size=3) * box
        d = wp - state.position
        dist = float(np.linalg.norm(d))
        if dist > _WAYPOINT_EPS:
            break
    speed = draw_speed(rng, v_min, v_max, speed_law)
    state.waypoint = wp
    state.speed = speed
    state.velocity = d * (speed / dist)


def initial_state(box: Vec3, rng: np.random.Generator, v_min: float, v_max: float,
                  speed_law: str = "uniform") -> MobilityState:
    pos = rng.uniform(0.0, 1.0, size=3) * box
    st = MobilityState(position=pos, velocity=np.zeros(3), waypoint=pos, speed=0.0)
    new_leg(st, box, rng, v_min, v_max, speed_law)
    return st


def rwp_step(state: MobilityState, box: Vec3, dt: float, rng: np.random.Generator,
             v_min: float, v_max: float, speed_law: str = "uniform") -> MobilityState:
    """Advance one tick, splitting the step at waypoint turnovers.

    The state is mutated and returned.  Turnover lands exactly on the
    waypoint and spends the remaining time on the fresh leg, so positions
    never leave the box.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    remaining = dt
    while remaining > 0.0:
        to_wp = state.waypoint - state.position
        dist = float(np.linalg.norm(to_wp))
        travel = state.speed * remaining
        if travel < dist - _WAYPOINT_EPS:
            state.position = state.position + state.velocity * remaining
            break
        # reach the waypoint, then keep flying on a new leg
        remaining -= dist / state.speed if state.speed > 0 else remaining
        state.position = state.waypoint.copy()
        new_leg(state, box, rng, v_min, v_max, speed_law)
    return state


@dataclass
class Leg:
    t0: float
    p0: Vec3
    v: Vec3
    t1: float


def waypoint_legs(rng: np.random.Generator, box: Vec3, v_min: float, v_max: float,
                  horizon: float, speed_law: str = "uniform") -> list[Leg]:
    """Generate a trajectory as straight legs covering [0, horizon]."""
    st = initial_state(box, rng, v_min, v_max, speed_law)
    legs: list[Leg] = []
    t = 0.0
    while t < horizon:
        dist = float(np.linalg.norm(st.waypoint - st.position))
        dur = dist / st.speed
        legs.append(Leg(t0=t, p0=st.position.copy(), v=st.velocity.copy(),
                        t1=min(t + dur, horizon)))
        t += dur
        st.position = st.waypoint.copy()
        new_leg(st, box, rng, v_min, v_max, speed_law)
    return legs


class Trajectory:
    """Piecewise-linear trajectory with vectorised position lookup."""

    def __init__(self, legs: list[Leg]):
        self.legs = legs
        self.t0 = np.array([leg.t0 for leg in legs])
        self.p0 = np.array([leg.p0 for leg in legs])
        self.v = np.array([leg.v for leg in legs])

    def segment_index(self, times: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.t0, times, side="right") - 1, 0, len(self.legs) - 1)

    def positions(self, times: np.ndarray) -> np.ndarray:
        idx = self.segment_index(times)
        return self.p0[idx] + self.v[idx] * (times - self.t0[idx])[:, None]

    def velocities(self, times: np.ndarray) -> np.ndarray:
        return self.v[self.segment_index(times)]

    @property
    def boundaries(self) -> np.ndarray:
        return self.t0
