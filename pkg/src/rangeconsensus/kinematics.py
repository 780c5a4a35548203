"""Agent motion model and distance synthesis.

Each agent moves on a circle whose center translates with constant velocity
over a window. Positions are expressed in the agent's working frame, which in
this package is a fixed inertial frame shared by the simulator; the
pair-specific analysis frame is produced by :func:`analysis_frame`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import CoincidentCenters, ValidationError

DEFAULT_SAMPLES = 4096


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, s):
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self):
        return Vec2(-self.x, -self.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def rotated(self, angle: float) -> "Vec2":
        c, s = math.cos(angle), math.sin(angle)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)


@dataclass(frozen=True)
class AgentState:
    """Circle center, its velocity, and the agent's place on the circle.

    ``phase`` is the agent's angular position at the start of the current
    window; ``omega`` is counter-clockwise positive.
    """

    center: Vec2
    center_velocity: Vec2 = Vec2(0.0, 0.0)
    radius: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", Vec2(*map(float, self.center)))
        object.__setattr__(self, "center_velocity", Vec2(*map(float, self.center_velocity)))
        values = (*self.center, *self.center_velocity, self.radius, self.omega, self.phase)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("agent state has non-finite fields")
        if self.radius < 0:
            raise ValidationError(f"radius must be >= 0, got {self.radius}")

    def with_(self, **changes) -> "AgentState":
        return replace(self, **changes)


@dataclass(frozen=True)
class Window:
    """Measurement window of length ``T`` sampled at ``M`` points.

    ``k`` holds the harmonic index ω·T/2π of every participating agent
    (rounded; see :meth:`harmonic`).
    """

    T: float
    M: int = DEFAULT_SAMPLES
    k: tuple = field(default=())

    def __post_init__(self):
        if not self.T > 0:
            raise ValidationError(f"window length must be positive, got {self.T}")
        if self.M < 2:
            raise ValidationError(f"need at least 2 samples, got {self.M}")
        if self.k and self.M < 4 * max(abs(k) for k in self.k):
            raise ValidationError(
                f"M={self.M} violates the Nyquist margin for harmonics {self.k}"
            )

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.M) * (self.T / self.M)

    def harmonic(self, omega: float, tol: float | None = 1e-6) -> int:
        """Integer harmonic index of ``omega`` in this window.

        Raises ValidationError if ``tol`` is given and ω·T/2π is further than
        ``tol`` from an integer.
        """
        k = omega * self.T / (2 * math.pi)
        kr = round(k)
        if tol is not None and abs(k - kr) > tol:
            raise ValidationError(
                f"omega={omega} is not commensurate with T={self.T} (k={k:.6g})"
            )
        return int(kr)


def agent_position(a: AgentState, t):
    """Position of agent ``a`` at time ``t`` after window start.

    ``t`` may be a scalar (returns a Vec2) or an array (returns an (n, 2)
    array).
    """
    if np.ndim(t) == 0:
        ang = a.omega * t + a.phase
        return Vec2(
            a.center.x + a.center_velocity.x * t + a.radius * math.cos(ang),
            a.center.y + a.center_velocity.y * t + a.radius * math.sin(ang),
        )
    t = np.asarray(t, dtype=float)
    ang = a.omega * t + a.phase
    x = a.center.x + a.center_velocity.x * t + a.radius * np.cos(ang)
    y = a.center.y + a.center_velocity.y * t + a.radius * np.sin(ang)
    return np.column_stack((x, y))


@dataclass(frozen=True)
class DistanceTrace:
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or len(s) < 2:
            raise ValidationError("trace must be a 1-D array of at least 2 samples")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValidationError("distance samples must be finite and non-negative")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return len(self.samples)


def distance_trace(a: AgentState, b: AgentState, w: Window, noise_std: float = 0.0,
                   rng: np.random.Generator | None = None) -> DistanceTrace:
    """Sampled distance between ``a`` and ``b`` at t_m = m·T/M, m = 0..M-1.

    With ``noise_std > 0`` zero-mean Gaussian noise is added to each sample
    (clipped at zero); ``rng`` must then be provided.
    """
    t = w.times
    diff = agent_position(b, t) - agent_position(a, t)
    z = np.hypot(diff[:, 0], diff[:, 1])
    if noise_std > 0:
        if rng is None:
            raise ValueError("noise_std > 0 requires an rng")
        z = np.maximum(z + rng.normal(0.0, noise_std, size=z.shape), 0.0)
    return DistanceTrace(z)


class AnalysisFrame(NamedTuple):
    origin: Vec2
    rotation: float  # world -> frame
    phase_a: float  # a's phase measured in this frame, wrapped to (-pi, pi]
    distance: float

    def to_frame(self, p) -> Vec2:
        return (Vec2(*p) - self.origin).rotated(self.rotation)

    def to_world(self, p) -> Vec2:
        return Vec2(*p).rotated(-self.rotation) + self.origin


def wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    if y <= -math.pi:
        y += 2 * math.pi
    return y


def analysis_frame(a: AgentState, b: AgentState) -> AnalysisFrame:
    """Pair frame with origin at a's center and x-axis toward b's center."""
    dx = b.center.x - a.center.x
    dy = b.center.y - a.center.y
    dist = math.hypot(dx, dy)
    if dist == 0:
        raise CoincidentCenters("circle centers coincide; analysis frame undefined")
    bearing = math.atan2(dy, dx)
    return AnalysisFrame(a.center, -bearing, wrap_angle(a.phase - bearing), dist)
