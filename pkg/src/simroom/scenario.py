"""
Room, table and transducer placement sampling
"""
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from config.settings import NUM_CANDIDATE_POINTS, SIMULATION_RANGES, WALL_MARGIN

Range = Tuple[float, float]


class SimulationRanges(BaseModel):
    """Uniform sampling ranges of the scenario generator (meters unless noted)"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    room_x: Range = SIMULATION_RANGES['room_x']
    room_y: Range = SIMULATION_RANGES['room_y']
    room_z: Range = SIMULATION_RANGES['room_z']
    table_x: Range = SIMULATION_RANGES['table_x']
    table_y: Range = SIMULATION_RANGES['table_y']
    table_height: float = Field(SIMULATION_RANGES['table_height'], gt=0)
    mic_height: Range = SIMULATION_RANGES['mic_height']
    source_ring: Range = SIMULATION_RANGES['source_ring']
    source_height: Range = SIMULATION_RANGES['source_height']
    beta: Range = SIMULATION_RANGES['beta']
    snr_db: Range = SIMULATION_RANGES['snr_db']
    overlap_ratio: Range = SIMULATION_RANGES['overlap_ratio']
    wall_margin: float = Field(WALL_MARGIN, ge=0)

    @model_validator(mode='after')
    def _check_ranges(self) -> 'SimulationRanges':
        for name, value in self:
            if isinstance(value, tuple) and value[0] > value[1]:
                raise ValueError(f"{name}: lower bound {value[0]} exceeds upper bound {value[1]}")
        for name in ('room_x', 'room_y', 'room_z', 'table_x', 'table_y'):
            if getattr(self, name)[0] <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.beta[0] and self.beta[1] < 1):
            raise ValueError(f"beta range must lie inside (0, 1), got {self.beta}")
        if not (0 <= self.overlap_ratio[0] and self.overlap_ratio[1] <= 1):
            raise ValueError(f"overlap_ratio range must lie inside [0, 1], got {self.overlap_ratio}")
        if self.mic_height[0] < self.table_height:
            raise ValueError("mic heights must not lie below the table top")
        if self.source_ring[0] <= 0:
            raise ValueError("sources must keep a positive distance from the table")
        return self

    @property
    def clearance(self) -> float:
        """Space kept between the table footprint and every wall"""
        return self.source_ring[0] + self.wall_margin


@dataclass
class RoomScenario:
    """Sampled geometry: room, reflection coefficient, table box, candidate points"""
    room: np.ndarray  # (3,) Lx, Ly, Lz
    beta: float
    table_origin: np.ndarray  # (3,) lower corner of the table box
    table_size: np.ndarray  # (3,) box extent
    mics: np.ndarray  # (M, 3) candidate microphone points in the box
    sources: np.ndarray  # (K, 3) candidate source points around the box

    def contains(self, point: np.ndarray) -> bool:
        return bool(np.all(point > 0) and np.all(point < self.room))

    def in_box(self, point: np.ndarray) -> bool:
        lower, upper = self.table_origin, self.table_origin + self.table_size
        return bool(np.all(point >= lower) and np.all(point <= upper))

    def in_footprint(self, point: np.ndarray) -> bool:
        lower, upper = self.table_origin[:2], (self.table_origin + self.table_size)[:2]
        return bool(np.all(point[:2] >= lower) and np.all(point[:2] <= upper))

    def summary(self) -> Dict[str, Any]:
        return {
            'room': self.room.tolist(),
            'beta': self.beta,
            'table_origin': self.table_origin.tolist(),
            'table_size': self.table_size.tolist(),
        }


def _uniform(rng: np.random.Generator, bounds: Range) -> float:
    return float(rng.uniform(bounds[0], bounds[1])) if bounds[1] > bounds[0] else float(bounds[0])


def _ring_point(rng: np.random.Generator, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Uniform point on the perimeter of the axis-aligned rectangle [lower, upper]"""
    width, depth = upper - lower
    s = rng.uniform(0, 2 * (width + depth))
    if s < width:
        return np.array([lower[0] + s, lower[1]])
    s -= width
    if s < depth:
        return np.array([upper[0], lower[1] + s])
    s -= depth
    if s < width:
        return np.array([upper[0] - s, upper[1]])
    s -= width
    return np.array([lower[0], upper[1] - s])


def sample_scenario(
    rng: np.random.Generator,
    ranges: SimulationRanges = SimulationRanges(),
    num_points: int = NUM_CANDIDATE_POINTS,
) -> RoomScenario:
    """
    Draw one scenario

    The room is drawn first, then a table footprint small enough to keep
    `clearance` to every wall, then microphones inside the table box and
    sources on rectangles expanded from the footprint by the ring distance.

    Args:
        rng: Seeded generator
        ranges: Sampling ranges
        num_points: Candidate microphones and candidate sources to draw

    Returns:
        RoomScenario satisfying every placement invariant
    """
    clearance = ranges.clearance
    for axis in ('x', 'y'):
        table_min = getattr(ranges, f"table_{axis}")[0]
        room_max = getattr(ranges, f"room_{axis}")[1]
        if table_min + 2 * clearance > room_max:
            raise ValueError(
                f"Infeasible ranges: table_{axis} >= {table_min} m plus {clearance:.2f} m clearance "
                f"on both sides does not fit in room_{axis} <= {room_max} m"
            )
    if ranges.source_height[1] + ranges.wall_margin >= ranges.room_z[0] \
            or ranges.mic_height[1] + ranges.wall_margin >= ranges.room_z[0]:
        raise ValueError(f"Infeasible ranges: room_z >= {ranges.room_z[0]} m is too low for the heights")

    room = np.empty(3)
    table_size = np.empty(3)
    for i, axis in enumerate(('x', 'y')):
        room_bounds = getattr(ranges, f"room_{axis}")
        table_bounds = getattr(ranges, f"table_{axis}")
        low = max(room_bounds[0], table_bounds[0] + 2 * clearance)
        room[i] = _uniform(rng, (low, room_bounds[1]))
        table_size[i] = _uniform(rng, (table_bounds[0], min(table_bounds[1], room[i] - 2 * clearance)))
    room[2] = _uniform(rng, ranges.room_z)
    beta = _uniform(rng, ranges.beta)

    origin = np.empty(3)
    for i in range(2):
        origin[i] = _uniform(rng, (clearance, room[i] - clearance - table_size[i]))
    origin[2] = ranges.table_height
    table_size[2] = ranges.mic_height[1] - ranges.table_height

    mics = np.column_stack([
        rng.uniform(origin[0], origin[0] + table_size[0], num_points),
        rng.uniform(origin[1], origin[1] + table_size[1], num_points),
        rng.uniform(ranges.mic_height[0], ranges.mic_height[1], num_points),
    ])

    # Largest ring distance that keeps the wall margin on every side
    lower, upper = origin[:2], origin[:2] + table_size[:2]
    available = min(np.min(lower), np.min(room[:2] - upper)) - ranges.wall_margin
    ring_max = min(ranges.source_ring[1], available)
    sources = np.empty((num_points, 3))
    for k in range(num_points):
        distance = _uniform(rng, (ranges.source_ring[0], ring_max))
        sources[k, :2] = _ring_point(rng, lower - distance, upper + distance)
        sources[k, 2] = _uniform(rng, ranges.source_height)

    return RoomScenario(room, beta, origin, table_size, mics, sources)


def check_scenario(scenario: RoomScenario, margin: float = 0.0) -> None:
    """
    Assert the placement invariants of a scenario

    Raises:
        ValueError naming the first violated invariant
    """
    if not 0 < scenario.beta < 1:
        raise ValueError(f"beta {scenario.beta} outside (0, 1)")
    lower, upper = scenario.table_origin, scenario.table_origin + scenario.table_size
    if np.any(lower[:2] < 0) or np.any(upper > scenario.room):
        raise ValueError("table box leaves the room")
    for i, mic in enumerate(scenario.mics):
        if not scenario.in_box(mic):
            raise ValueError(f"mic {i} at {mic} outside the table box")
    for k, src in enumerate(scenario.sources):
        if scenario.in_footprint(src):
            raise ValueError(f"source {k} at {src} inside the table footprint")
        if np.any(src < margin) or np.any(src > scenario.room - margin):
            raise ValueError(f"source {k} at {src} outside the room")
