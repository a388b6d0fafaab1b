"""
Vehicle mobility on a Manhattan grid and on a straight freeway.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.channels.models import Heading, VehicleState
from app.numerics import RandomStream

_EPS = 1e-9


@dataclass(frozen=True)
class ManhattanGrid:
    """Three by three blocks of 250 m x 433 m; roads run along every block edge."""
    block_width_m: float = 250.0
    block_height_m: float = 433.0
    blocks_x: int = 3
    blocks_y: int = 3
    lane_width_m: float = 3.5

    @property
    def width(self) -> float:
        return self.block_width_m * self.blocks_x

    @property
    def height(self) -> float:
        return self.block_height_m * self.blocks_y

    @property
    def road_xs(self) -> np.ndarray:
        return np.arange(self.blocks_x + 1) * self.block_width_m

    @property
    def road_ys(self) -> np.ndarray:
        return np.arange(self.blocks_y + 1) * self.block_height_m

    @property
    def centre(self) -> Tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    def _on(self, value: float, lines: np.ndarray) -> bool:
        return bool(np.any(np.abs(lines - value) < 1e-6))

    def is_node(self, pos: Tuple[float, float]) -> bool:
        return self._on(pos[0], self.road_xs) and self._on(pos[1], self.road_ys)

    def can_continue(self, pos: Tuple[float, float], heading: Heading) -> bool:
        x, y = pos
        if heading == Heading.N:
            return y < self.height - _EPS and self._on(x, self.road_xs)
        if heading == Heading.S:
            return y > _EPS and self._on(x, self.road_xs)
        if heading == Heading.E:
            return x < self.width - _EPS and self._on(y, self.road_ys)
        return x > _EPS and self._on(y, self.road_ys)

    def distance_to_next_node(self, pos: Tuple[float, float], heading: Heading) -> float:
        x, y = pos
        if heading == Heading.N:
            ahead = self.road_ys[self.road_ys > y + _EPS]
            return float(ahead[0] - y)
        if heading == Heading.S:
            ahead = self.road_ys[self.road_ys < y - _EPS]
            return float(y - ahead[-1])
        if heading == Heading.E:
            ahead = self.road_xs[self.road_xs > x + _EPS]
            return float(ahead[0] - x)
        ahead = self.road_xs[self.road_xs < x - _EPS]
        return float(x - ahead[-1])


MANHATTAN = ManhattanGrid()


def lane_offset(heading: Heading, lane: int, lane_width: float) -> Tuple[float, float]:
    """Right-hand traffic: lanes sit to the right of the centre line."""
    d = (lane + 0.5) * lane_width
    dx, dy = heading.vector
    return dy * d, -dx * d


def physical_position(state: VehicleState, lane_width: float = MANHATTAN.lane_width_m) -> Tuple[float, float]:
    ox, oy = lane_offset(state.heading, state.lane, lane_width)
    return state.position[0] + ox, state.position[1] + oy


def _pick_turn(grid: ManhattanGrid, pos, heading: Heading, rng: np.random.Generator, forced: bool) -> Heading:
    options = [h for h in heading.turns if grid.can_continue(pos, h)]
    if not options:
        return heading.reverse if forced else heading
    return options[int(rng.integers(len(options)))]


def mobility_step(state: VehicleState, dt: float, turn_probability: float, stream: RandomStream,
                  grid: ManhattanGrid = MANHATTAN) -> VehicleState:
    """
    Advance a vehicle by velocity*dt along the grid.
    At every intersection it turns left or right with `turn_probability`; at the layout edge
    the turn is forced, so the centre-line position never leaves the grid.
    """
    rng = stream.generator()
    pos = (float(state.position[0]), float(state.position[1]))
    heading = state.heading
    remaining = state.velocity * dt

    if grid.is_node(pos) and not grid.can_continue(pos, heading):
        heading = _pick_turn(grid, pos, heading, rng, forced=True)

    while remaining > _EPS:
        dist = grid.distance_to_next_node(pos, heading)
        dx, dy = heading.vector
        if remaining < dist:
            pos = (pos[0] + dx * remaining, pos[1] + dy * remaining)
            break
        # snap onto the intersection
        pos = (pos[0] + dx * dist, pos[1] + dy * dist)
        pos = (_snap(pos[0], grid.road_xs), _snap(pos[1], grid.road_ys))
        remaining -= dist
        if not grid.can_continue(pos, heading):
            heading = _pick_turn(grid, pos, heading, rng, forced=True)
        elif rng.random() < turn_probability:
            heading = _pick_turn(grid, pos, heading, rng, forced=False)

    return VehicleState(position=pos, heading=heading, lane=state.lane, velocity=state.velocity)


def _snap(value: float, lines: np.ndarray) -> float:
    idx = int(np.argmin(np.abs(lines - value)))
    return float(lines[idx]) if abs(lines[idx] - value) < 1e-6 else value


def random_vehicle(rng: np.random.Generator, velocity: float, lanes: int,
                   grid: ManhattanGrid = MANHATTAN) -> VehicleState:
    """Uniform over total road length, random direction and lane."""
    vertical_len = len(grid.road_xs) * grid.height
    horizontal_len = len(grid.road_ys) * grid.width
    lane = int(rng.integers(lanes))
    if rng.random() < vertical_len / (vertical_len + horizontal_len):
        x = float(grid.road_xs[int(rng.integers(len(grid.road_xs)))])
        y = float(rng.uniform(0.0, grid.height))
        heading = Heading.N if rng.random() < 0.5 else Heading.S
    else:
        y = float(grid.road_ys[int(rng.integers(len(grid.road_ys)))])
        x = float(rng.uniform(0.0, grid.width))
        heading = Heading.E if rng.random() < 0.5 else Heading.W
    return VehicleState(position=(x, y), heading=heading, lane=lane, velocity=velocity)


def freeway_step(state: VehicleState, dt: float, length_m: float) -> VehicleState:
    """Straight road along x; vehicles wrap around at the ends."""
    dx, _ = state.heading.vector
    x = math.fmod(state.position[0] + dx * state.velocity * dt, length_m)
    if x < 0:
        x += length_m
    return VehicleState(position=(x, 0.0), heading=state.heading, lane=state.lane, velocity=state.velocity)


def random_freeway_vehicle(rng: np.random.Generator, velocity: float, lanes: int, length_m: float) -> VehicleState:
    heading = Heading.E if rng.random() < 0.5 else Heading.W
    return VehicleState(
        position=(float(rng.uniform(0.0, length_m)), 0.0),
        heading=heading,
        lane=int(rng.integers(lanes)),
        velocity=velocity,
    )
