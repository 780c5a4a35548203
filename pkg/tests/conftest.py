import math

import numpy as np
import pytest

from rangeconsensus.kinematics import AgentState, Vec2


def pair(d, v=(0.0, 0.0), r1=2.0, r2=3.0, w1=5.0, w2=-3.0, phi1=0.0, phi2=0.0):
    """Agent 1 at the origin, agent 2 at (d, 0) moving with ``v`` relative to 1."""
    a = AgentState(Vec2(0.0, 0.0), Vec2(0.0, 0.0), r1, w1, phi1)
    b = AgentState(Vec2(d, 0.0), Vec2(*v), r2, w2, phi2)
    return a, b


def trapezoid_coefficient(f, T, n, M=2**16):
    """(1/T)∫₀ᵀ f(t) e^{-j2πnt/T} dt by the trapezoid rule on M intervals."""
    t = np.linspace(0.0, T, M + 1)
    g = f(t) * np.exp(-2j * np.pi * n * t / T)
    trap = getattr(np, "trapezoid", None) or np.trapz
    return complex(trap(g, t) / T)


def random_valid_instance(rng, alpha=0.35):
    """Two-agent instance inside the validity region: d ∈ [20, 100],
    radii ∈ [1, 5], ‖v‖ ≤ min(r)/α, distinct harmonics in [2, 9]."""
    while True:
        k1, k2 = rng.integers(2, 10, size=2)
        k1 = int(k1) * int(rng.choice([-1, 1]))
        k2 = int(k2) * int(rng.choice([-1, 1]))
        if len({abs(k1), abs(k2), abs(k1 - k2)}) == 3 and 0 not in (k1, k2):
            break
    d = rng.uniform(20, 100)
    r1, r2 = rng.uniform(1, 5, size=2)
    speed = rng.uniform(0, min(r1, r2) / alpha)
    ang = rng.uniform(-math.pi, math.pi)
    v = (speed * math.cos(ang), speed * math.sin(ang))
    phi1, phi2 = rng.uniform(-math.pi, math.pi, size=2)
    return dict(d=d, v=v, r1=r1, r2=r2, k1=k1, k2=k2, phi1=phi1, phi2=phi2)


def instance_states(inst, T=2 * math.pi):
    w = 2 * math.pi / T
    return pair(inst["d"], inst["v"], inst["r1"], inst["r2"], inst["k1"] * w, inst["k2"] * w,
                inst["phi1"], inst["phi2"])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
