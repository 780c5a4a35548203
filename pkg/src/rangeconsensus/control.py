"""Adaptive excitation radius and the discrete consensus + shape update."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyNeighborhood, ValidationError
from .kinematics import Vec2


def _edge(i: int, j: int):
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class FormationGraph:
    """Undirected interaction graph over agents 0..n_agents-1.

    ``desired_distance`` may be empty when only velocity consensus is run.
    """

    n_agents: int
    edges: tuple
    desired_distance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValidationError("need at least two agents")
        norm = []
        for i, j in self.edges:
            if i == j:
                raise ValidationError(f"self-loop at agent {i + 1}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise ValidationError(f"edge ({i + 1}, {j + 1}) references an unknown agent")
            e = _edge(i, j)
            if e in norm:
                raise ValidationError(f"duplicate edge ({i + 1}, {j + 1})")
            norm.append(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        dd = {_edge(*e): float(d) for e, d in self.desired_distance.items()}
        for e, d in dd.items():
            if e not in norm:
                raise ValidationError(f"desired distance given for non-edge {e}")
            if not d > 0:
                raise ValidationError(f"desired distance on {e} must be positive")
        object.__setattr__(self, "desired_distance", dd)
        if not self.is_connected():
            raise ValidationError("interaction graph is not connected")

    def neighbors(self, i: int) -> list:
        return sorted(b if a == i else a for a, b in self.edges if i in (a, b))

    @property
    def max_degree(self) -> int:
        return max(len(self.neighbors(i)) for i in range(self.n_agents))

    def is_connected(self) -> bool:
        seen, todo = {0}, deque([0])
        while todo:
            i = todo.popleft()
            for j in self.neighbors(i):
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return len(seen) == self.n_agents

    def dstar(self, i: int, j: int):
        return self.desired_distance.get(_edge(i, j))


@dataclass(frozen=True)
class ControllerGains:
    eps1: float
    eps2: float
    alpha: float
    T: float

    def __post_init__(self):
        if not self.eps1 > 0:
            raise ValidationError("eps1 must be positive")
        if self.eps2 < 0:
            raise ValidationError("eps2 must be non-negative")
        if not self.alpha > 0:
            raise ValidationError("alpha must be positive")
        if not self.T > 0:
            raise ValidationError("T must be positive")

    def check_against(self, graph: FormationGraph):
        """Warn when eps1·T·max_degree >= 1 (consensus step may overshoot)."""
        load = self.eps1 * self.T * graph.max_degree
        if load >= 1:
            warnings.warn(f"eps1*T*max_degree = {load:.3g} >= 1; consensus step may overshoot",
                          stacklevel=2)
        return load


class NeighborTerm(NamedTuple):
    """One neighbor's contribution, all in the updating agent's working frame.

    ``v_rel`` = v_j - v_i, ``p_rel`` = p_j - p_i. ``d_star=None`` drops the
    shape term for this neighbor.
    """

    v_rel: Vec2
    p_rel: Vec2
    d: float
    d_star: float | None


def adaptive_radius(neighbor_speed_norms, alpha: float) -> float:
    norms = list(neighbor_speed_norms)
    if not norms:
        raise EmptyNeighborhood("adaptive radius needs at least one neighbor")
    return alpha * max(norms)


def consensus_shape_update(i: int, v_i, neighbor_data, gains: ControllerGains) -> Vec2:
    """New center velocity of agent ``i`` after one window.

    v_i + eps1·T·Σ v_rel + 2·eps2·T·Σ (d*² - d²)·(-p_rel)
    """
    T = gains.T
    vx, vy = v_i
    cx = cy = sx = sy = 0.0
    for term in neighbor_data:
        cx += term.v_rel[0]
        cy += term.v_rel[1]
        if term.d_star is not None:
            k = term.d_star**2 - term.d**2
            sx -= k * term.p_rel[0]
            sy -= k * term.p_rel[1]
    a = gains.eps1 * T
    b = 2 * gains.eps2 * T
    return Vec2(vx + a * cx + b * sx, vy + a * cy + b * sy)


def position_advance(p_i, v_i, T: float) -> Vec2:
    return Vec2(p_i[0] + T * v_i[0], p_i[1] + T * v_i[1])


def laplacian(g: FormationGraph) -> np.ndarray:
    L = np.zeros((g.n_agents, g.n_agents))
    for i, j in g.edges:
        L[i, j] = L[j, i] = -1.0
        L[i, i] += 1.0
        L[j, j] += 1.0
    return L
