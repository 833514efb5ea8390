"""Planar geometry: node positions, distances, times of flight, tag motion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .clocks import ClockModel

SPEED_OF_LIGHT = 299_792_458.0


def _point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"expected a 2-D point, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def distance(p, q) -> float:
    return math.hypot(p[0] - q[0], p[1] - q[1])


def tof(p, q, c: float = SPEED_OF_LIGHT) -> float:
    if c <= 0.0:
        raise ValueError("propagation speed must be positive")
    return distance(p, q) / c


@dataclass(frozen=True, eq=False)
class NetworkGeometry:
    """Master and anchor positions in the horizontal plane.

    Anchors are addressed 1..n; node 0 is the master.
    """

    master: np.ndarray
    anchors: np.ndarray
    c: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        master = _point(self.master)
        anchors = np.asarray(self.anchors, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(anchors)):
            raise ValueError("anchor coordinates must be finite")
        if self.c <= 0.0:
            raise ValueError("propagation speed must be positive")
        nodes = np.vstack([master, anchors])
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if distance(nodes[i], nodes[j]) == 0.0:
                    raise ValueError(f"nodes {i} and {j} coincide")
        master.flags.writeable = False
        anchors.flags.writeable = False
        object.__setattr__(self, "master", master)
        object.__setattr__(self, "anchors", anchors)

    @property
    def n_anchors(self) -> int:
        return len(self.anchors)

    def node(self, node_id: int) -> np.ndarray:
        """Position of node ``node_id`` (0 = master, i = anchor i)."""
        if node_id == 0:
            return self.master
        if not 1 <= node_id <= self.n_anchors:
            raise IndexError(f"no node {node_id}")
        return self.anchors[node_id - 1]

    def baseline(self, anchor_id: int) -> float:
        """Master-to-anchor distance."""
        return distance(self.master, self.node(anchor_id))

    def baseline_tof(self, anchor_id: int) -> float:
        return self.baseline(anchor_id) / self.c

    def check_solvable(self) -> None:
        if self.n_anchors < 3:
            raise ValueError(f"2-D solving needs at least 3 anchors, got {self.n_anchors}")

    def transformed(self, rotation: float, shift) -> NetworkGeometry:
        """Copy rotated by ``rotation`` radians about the origin, then shifted."""
        rot = rotation_matrix(rotation)
        shift = np.asarray(shift, dtype=float)
        return NetworkGeometry(rot @ self.master + shift, self.anchors @ rot.T + shift, self.c)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class TagState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    clock: ClockModel = field(default_factory=ClockModel)

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _point(self.position))
        object.__setattr__(self, "velocity", _point(self.velocity))


def propagate(tag: TagState, dt: float) -> TagState:
    """Constant-velocity step of ``dt`` seconds."""
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    if dt == 0.0:
        return tag
    return replace(tag, position=tag.position + dt * tag.velocity)


def tof_motion_bound(tag: TagState, anchor, dt: float, c: float = SPEED_OF_LIGHT) -> tuple[float, float]:
    """Interval holding the tag-anchor time of flight after ``dt`` seconds of motion.

    The distance can change by at most the displacement ``|dt * v|``, so
    the flight time moves by at most that amount over ``c``.
    """
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    now = tof(tag.position, anchor, c)
    spread = math.hypot(*(dt * tag.velocity)) / c
    return now - spread, now + spread
