"""Closed-loop episodes: synthesize, estimate, update, record.

Rounds are synchronous. In round k every edge gets one distance trace over
[kT, (k+1)T), both endpoints estimate each other from it, and all agents
commit their new radius and center velocity together at (k+1)T.

The shape term of the velocity update is evaluated with the relative
position expected at the update instant, p̂_ij + T·v̂_ij, rather than at
the window start. Both are available from the same estimate; the window-start
variant is an explicit Euler step of the underlying second-order dynamics and
loses stability for stiff shape gains. ``shape_positions="window_start"``
restores it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import (
    ControllerGains,
    FormationGraph,
    NeighborTerm,
    adaptive_radius,
    consensus_shape_update,
    position_advance,
)
from .errors import Diverged, EstimationError, IndexClash, ValidationError
from .estimator import estimate_neighbor, frame_link, speed_norm_fallback
from .kinematics import DEFAULT_SAMPLES, AgentState, Vec2, Window, distance_trace, wrap_angle

MODES = ("consensus_only", "consensus_and_shape")
CONTINUOUS_STEPS = 256


@dataclass(frozen=True)
class PerturbationEvent:
    round: int
    agent: int
    delta_v: Vec2

    def __post_init__(self):
        object.__setattr__(self, "delta_v", Vec2(*map(float, self.delta_v)))


@dataclass(frozen=True)
class Scenario:
    """A full episode description; agents are indexed from 0."""

    agents: tuple
    graph: FormationGraph
    gains: ControllerGains
    windows: int
    events: tuple = ()
    noise_std: float = 0.0
    mode: str = "consensus_and_shape"
    omega_sign_known: bool = False
    seed: int = 0
    samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "events", tuple(self.events))
        validate_scenario(self)

    @property
    def harmonics(self) -> tuple:
        w = Window(self.gains.T, self.samples)
        return tuple(w.harmonic(a.omega) for a in self.agents)

    @property
    def eps2_effective(self) -> float:
        return self.gains.eps2 if self.mode == "consensus_and_shape" else 0.0


def validate_scenario(sc: Scenario):
    if sc.windows < 1:
        raise ValidationError("windows must be >= 1")
    if len(sc.agents) != sc.graph.n_agents:
        raise ValidationError(
            f"{len(sc.agents)} agents given but the graph has {sc.graph.n_agents}")
    if sc.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {sc.mode!r}")
    if not (sc.noise_std >= 0 and math.isfinite(sc.noise_std)):
        raise ValidationError("noise_std must be finite and >= 0")
    for ev in sc.events:
        if not 0 <= ev.round < sc.windows:
            raise ValidationError(f"event round {ev.round} outside episode of {sc.windows} rounds")
        if not 0 <= ev.agent < len(sc.agents):
            raise ValidationError(f"event references unknown agent {ev.agent + 1}")
    if sc.mode == "consensus_and_shape":
        missing = [e for e in sc.graph.edges if sc.graph.dstar(*e) is None]
        if missing:
            i, j = missing[0]
            raise ValidationError(f"edge ({i + 1}, {j + 1}) needs a desired distance in shape mode")
    ks = sc.harmonics  # raises on incommensurate omega
    for i, j in sc.graph.edges:
        trio = (abs(ks[i]), abs(ks[j]), abs(ks[i] - ks[j]))
        if 0 in trio or len(set(trio)) < 3:
            raise ValidationError(
                f"edge ({i + 1}, {j + 1}) violates frequency admissibility: harmonics "
                f"{ks[i]}, {ks[j]} give |k_i|, |k_j|, |k_i-k_j| = {trio}")
    kmax = max(abs(k) for k in ks)
    if sc.samples // 2 - 1 < 2 * kmax + 8:
        raise ValidationError(f"samples={sc.samples} too few for harmonics up to {kmax}")
    Window(sc.gains.T, sc.samples, ks)
    sc.gains.check_against(sc.graph)


@dataclass
class TimeSeries:
    """Per-round records; agent arrays are (rounds, agents, ...), edge arrays
    (rounds, edges, ...). Estimated edge quantities come from the endpoint
    with the lower index and are NaN when its estimate failed."""

    edges: tuple
    desired: dict
    center: np.ndarray
    velocity: np.ndarray
    radius: np.ndarray
    jump: np.ndarray
    d_true: np.ndarray
    d_hat: np.ndarray
    vij_true: np.ndarray
    vij_hat: np.ndarray
    residual: np.ndarray
    failed: np.ndarray  # (rounds, edges, 2): estimate failed at (low, high) endpoint
    disagreement: np.ndarray
    shape_error: np.ndarray
    final_center: np.ndarray = field(default=None)

    @property
    def rounds(self) -> int:
        return len(self.disagreement)

    @property
    def n_agents(self) -> int:
        return self.center.shape[1]


def _empty_series(sc: Scenario) -> TimeSeries:
    W, N, E = sc.windows, len(sc.agents), len(sc.graph.edges)
    full = np.full
    return TimeSeries(
        edges=sc.graph.edges, desired=dict(sc.graph.desired_distance),
        center=np.zeros((W, N, 2)), velocity=np.zeros((W, N, 2)),
        radius=np.zeros((W, N)), jump=np.zeros((W, N)),
        d_true=np.zeros((W, E)), d_hat=full((W, E), np.nan),
        vij_true=np.zeros((W, E, 2)), vij_hat=full((W, E, 2), np.nan),
        residual=full((W, E), np.nan), failed=np.zeros((W, E, 2), bool),
        disagreement=np.zeros(W), shape_error=np.zeros(W),
    )


def _disagreement(vel) -> float:
    diff = vel[:, None, :] - vel[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


def _shape_error(graph: FormationGraph, centers) -> float:
    errs = [abs(math.dist(centers[i], centers[j]) - graph.dstar(i, j))
            for i, j in graph.edges if graph.dstar(i, j) is not None]
    return max(errs, default=0.0)


class _Measurement:
    __slots__ = ("v_rel", "p_rel", "d", "speed", "residual", "ok")

    def __init__(self, v_rel, p_rel, d, speed, residual, ok):
        self.v_rel, self.p_rel, self.d = v_rel, p_rel, d
        self.speed, self.residual, self.ok = speed, residual, ok


def _n_max(ks, M) -> int:
    kmax = max(abs(k) for k in ks)
    return min(max(64, 4 * kmax + 16), M // 2 - 1)


def run(scenario: Scenario, seed: int | None = None, exact_measurements: bool = False,
        shape_positions: str = "window_end", residual_gate: float | None = None) -> TimeSeries:
    """Execute the episode and return its time series.

    ``exact_measurements`` bypasses trace synthesis and estimation and feeds
    ground-truth relative states to the controller. ``residual_gate`` treats
    estimates whose relative model residual exceeds it as failed.
    """
    if shape_positions not in ("window_end", "window_start"):
        raise ValueError(f"unknown shape_positions {shape_positions!r}")
    sc = scenario
    rng = np.random.default_rng(sc.seed if seed is None else seed)
    g, gains = sc.graph, sc.gains
    gains_eff = ControllerGains(gains.eps1, sc.eps2_effective, gains.alpha, gains.T)
    T = gains.T
    ks = sc.harmonics
    w = Window(T, sc.samples, ks)
    n_max = _n_max(ks, sc.samples)
    nbrs = [g.neighbors(i) for i in range(g.n_agents)]
    agents = list(sc.agents)
    # agent i's last good absolute velocity estimate of neighbor j, and j's
    # rotation sign once resolved
    memory = [dict() for _ in agents]
    ts = _empty_series(sc)
    events = {}
    for ev in sc.events:
        events.setdefault(ev.round, []).append(ev)

    for k in range(sc.windows):
        for ev in events.get(k, ()):
            a = agents[ev.agent]
            agents[ev.agent] = a.with_(center_velocity=a.center_velocity + ev.delta_v)

        meas = {}
        for e, (i, j) in enumerate(g.edges):
            if exact_measurements:
                for a, b in ((i, j), (j, i)):
                    meas[a, b] = _truth(agents[a], agents[b])
                continue
            trace = distance_trace(agents[i], agents[j], w, sc.noise_std, rng)
            for a, b in ((i, j), (j, i)):
                meas[a, b] = _estimate(sc, trace, w, ks, n_max, agents, memory, a, b,
                                       residual_gate)

        new_v, new_r = [], []
        for i, a in enumerate(agents):
            terms = []
            for j in nbrs[i]:
                m = meas[i, j]
                p_rel = m.p_rel
                d = m.d
                if m.ok and shape_positions == "window_end":
                    p_rel = p_rel + T * m.v_rel
                    d = p_rel.norm()
                dstar = g.dstar(i, j) if m.ok else None
                terms.append(NeighborTerm(m.v_rel, p_rel, d, dstar))
            new_v.append(consensus_shape_update(i, a.center_velocity, terms, gains_eff))
            new_r.append(adaptive_radius([meas[i, j].speed for j in nbrs[i]], gains.alpha))

        if not np.all(np.isfinite(np.array(new_v + [(r, 0.0) for r in new_r]))):
            raise Diverged(f"closed loop diverged in round {k}")
        _record(ts, k, g, agents, meas, new_r)
        agents = [
            a.with_(center=position_advance(a.center, a.center_velocity, T),
                    center_velocity=v, radius=r,
                    phase=wrap_angle(a.phase + a.omega * T))
            for a, v, r in zip(agents, new_v, new_r)
        ]
    ts.final_center = np.array([a.center for a in agents])
    return ts


def _truth(a: AgentState, b: AgentState) -> _Measurement:
    v_rel = b.center_velocity - a.center_velocity
    p_rel = b.center - a.center
    return _Measurement(v_rel, p_rel, p_rel.norm(), v_rel.norm(), 0.0, True)


def _estimate(sc, trace, w, ks, n_max, agents, memory, i, j, gate) -> _Measurement:
    me = agents[i]
    if sc.omega_sign_known:
        sign = int(math.copysign(1, agents[j].omega))
    else:
        # a neighbor's rotation sense is fixed, so the first resolved sign is kept
        sign = memory[i].get(("sign", j))
    try:
        est = estimate_neighbor(trace, w, ks[i], me.radius, omega2_sign=sign,
                                n_max=n_max, residual_gate=gate)
    except (EstimationError, IndexClash):
        try:
            speed = speed_norm_fallback(trace, w, ks[i], n_max)
        except (EstimationError, IndexClash):
            speed = 0.0
        prev = memory[i].get(j)
        v_rel = prev - me.center_velocity if prev is not None else Vec2(0.0, 0.0)
        return _Measurement(v_rel, Vec2(math.nan, math.nan), math.nan, speed, math.nan, False)
    link = frame_link(me.phase, est.phi1_hat)
    v_rel = link.vector(est.v_hat)
    memory[i][j] = me.center_velocity + v_rel
    memory[i][("sign", j)] = int(math.copysign(1, est.k2))
    return _Measurement(v_rel, link.offset(est.d_hat), est.d_hat, est.speed_norm,
                        est.residual, True)


def _record(ts: TimeSeries, k, g, agents, meas, new_r):
    ts.center[k] = [a.center for a in agents]
    ts.velocity[k] = [a.center_velocity for a in agents]
    ts.radius[k] = [a.radius for a in agents]
    ts.jump[k] = np.abs(np.array(new_r) - ts.radius[k])
    for e, (i, j) in enumerate(g.edges):
        truth = _truth(agents[i], agents[j])
        ts.d_true[k, e] = truth.d
        ts.vij_true[k, e] = truth.v_rel
        m = meas[i, j]
        ts.failed[k, e] = (not m.ok, not meas[j, i].ok)
        if m.ok:
            ts.d_hat[k, e] = m.d
            ts.vij_hat[k, e] = m.v_rel
            ts.residual[k, e] = m.residual
    ts.disagreement[k] = _disagreement(ts.velocity[k])
    ts.shape_error[k] = _shape_error(g, ts.center[k])


def reference_continuous_run(scenario: Scenario, steps_per_window: int = CONTINUOUS_STEPS
                             ) -> TimeSeries:
    """Integrate the continuous consensus + shape law with ground-truth states.

    v̇_i = eps1·Σ_j (v_j - v_i) + 2·eps2·Σ_j (d*² - d_ij²)(p_i - p_j), ṗ_i = v_i,
    by classical RK4 at step T/steps_per_window. Events add to the velocity
    at t = round·T. Radii are zero and estimates equal the truth.
    """
    sc = scenario
    g = sc.graph
    T = sc.gains.T
    eps1, eps2 = sc.gains.eps1, sc.eps2_effective
    E = np.array(g.edges, dtype=int).reshape(-1, 2)
    ii, jj = E[:, 0], E[:, 1]
    dstar2 = np.array([(g.dstar(i, j) or 0.0) ** 2 for i, j in g.edges])
    # incidence: edge force f_e acts +f on i and -f on j
    B = np.zeros((len(E), g.n_agents))
    B[np.arange(len(E)), ii] = 1.0
    B[np.arange(len(E)), jj] = -1.0
    Bt = B.T.copy()

    def accel(p, v):
        dv = v[jj] - v[ii]
        dp = p[ii] - p[jj]
        d2 = dp[:, 0] ** 2 + dp[:, 1] ** 2
        return Bt @ (eps1 * dv + (2 * eps2) * (dstar2 - d2)[:, None] * dp)

    p = np.array([a.center for a in sc.agents], dtype=float)
    v = np.array([a.center_velocity for a in sc.agents], dtype=float)
    h = T / steps_per_window
    ts = _empty_series(sc)
    events = {}
    for ev in sc.events:
        events.setdefault(ev.round, []).append(ev)
    for k in range(sc.windows):
        for ev in events.get(k, ()):
            v[ev.agent] += ev.delta_v
        ts.center[k] = p
        ts.velocity[k] = v
        for e, (i, j) in enumerate(g.edges):
            ts.d_true[k, e] = ts.d_hat[k, e] = math.dist(p[i], p[j])
            ts.vij_true[k, e] = ts.vij_hat[k, e] = v[j] - v[i]
            ts.residual[k, e] = 0.0
        ts.disagreement[k] = _disagreement(v)
        ts.shape_error[k] = _shape_error(g, p)
        for _ in range(steps_per_window):
            a1 = accel(p, v)
            p2, v2 = p + 0.5 * h * v, v + 0.5 * h * a1
            a2 = accel(p2, v2)
            p3, v3 = p + 0.5 * h * v2, v + 0.5 * h * a2
            a3 = accel(p3, v3)
            p4, v4 = p + h * v3, v + h * a3
            a4 = accel(p4, v4)
            p = p + h / 6 * (v + 2 * v2 + 2 * v3 + v4)
            v = v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
    ts.final_center = p
    return ts


def pairwise_distances(centers) -> np.ndarray:
    c = np.asarray(centers, dtype=float)
    diff = c[:, None, :] - c[None, :, :]
    n = len(c)
    iu = np.triu_indices(n, 1)
    return np.hypot(diff[..., 0], diff[..., 1])[iu]
