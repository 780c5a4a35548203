"""Neighbor localization from one window of distance samples.

The estimating agent (index 1 below) knows its own radius r1 and signed
harmonic k1 = ω1·T/2π. From the spectrum of z² it identifies the neighbor's
harmonic k2, fits the off-peak coefficients with the four constants
(R, I, U, W), and then reads distance, phase and relative velocity off U and
the own-rotation peak c_{|k1|}.

All recovered quantities live in the pair analysis frame: origin at the
estimator's circle center, x-axis through the neighbor's center at window
start. :func:`frame_link` maps them back to the working frame.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousSign,
    AmbiguousSpectrum,
    DegenerateRadius,
    EstimationError,
    IndexClash,
    NoPeak,
    NoWindow,
    RejectedEstimate,
    SingularSystem,
)
from .kinematics import DistanceTrace, Vec2, Window, wrap_angle
from .spectral import (
    Spectrum,
    design_blocks,
    excluded_indices,
    lemma2_coefficient,
    pair_model,
    spectrum_of_squared_trace,
)

PEAK_FACTOR = 5.0
# peaks must also clear this fraction of c_0, which keeps round-off in a
# constant trace from passing the median test
PEAK_FLOOR = 1e-11
SOLVE_COUNT = 8
SIGN_TIE = 1e-9
# double-precision floor of model_residual for an exact fit
RESIDUAL_FLOOR = 1e-14
MAX_CANDIDATES = 12


@dataclass(frozen=True)
class SolveBlock:
    R: complex
    I: complex
    U: complex
    W: complex


@dataclass(frozen=True)
class NeighborEstimate:
    d_hat: float
    phi1_hat: float
    v_hat: Vec2
    omega2_hat: float
    speed_norm: float
    residual: float
    k2: int = 0
    block: SolveBlock | None = None


@dataclass(frozen=True)
class FrameLink:
    """Rotation taking analysis-frame vectors into the working frame.

    The analysis x-axis points from the own center to the neighbor's
    center, so ``rotation`` is also the neighbor's bearing.
    """

    rotation: float

    def vector(self, v) -> Vec2:
        return Vec2(*v).rotated(self.rotation)

    def offset(self, d_hat: float) -> Vec2:
        return Vec2(d_hat * math.cos(self.rotation), d_hat * math.sin(self.rotation))


def forward_riuw(d, vx, vy, r1, r2, phi1, phi2, T) -> SolveBlock:
    """The four constants from ground-truth pair geometry."""
    s = vx * vx + vy * vy
    rot = (1j * vx + vy) * T / (4 * math.pi)
    return SolveBlock(
        R=complex(s * T**2 / (2 * math.pi**2)),
        I=complex((s * T**2 + 2 * vx * d * T) / (2 * math.pi)),
        U=r1 * rot * cmath.exp(1j * (phi1 + math.pi)),
        W=r2 * rot * cmath.exp(1j * phi2),
    )


def admissible_indices(n_max: int, k1: int, k2: int | None) -> list:
    excl = excluded_indices(k1, k2) if k2 is not None else {0, abs(k1)}
    return [n for n in range(1, n_max + 1) if n not in excl]


def default_solve_indices(k1: int, k2: int | None, count: int = SOLVE_COUNT) -> list:
    excl = excluded_indices(k1, k2) if k2 is not None else {0, abs(k1)}
    out, n = [], 1
    while len(out) < count:
        if n not in excl:
            out.append(n)
        n += 1
    return out


def own_motion_excess(s: Spectrum, k1: int, passes: int = 3) -> dict:
    """|c_n - own-motion fit| for every n in 1..n_max except |k1|.

    The fit (R, I, U with no neighbor columns) removes the drift background
    and the own-rotation side lobes, which otherwise outrank the neighbor
    peak whenever ‖v‖T is comparable to the radii. Indices that stand out
    are dropped from the fit and it is repeated, so a strong neighbor peak
    does not drag the background estimate.
    """
    idx = admissible_indices(s.n_max, k1, None)
    if len(idx) < 2:
        raise NoPeak("spectrum has too few admissible indices")
    fit_idx = idx
    for _ in range(passes):
        blk = solve_riuw(s, k1, None, fit_idx)
        model = pair_model(idx, blk.R, blk.I, blk.U, 0j, k1, 0)
        excess = np.abs(s.coefficients[idx] - model)
        thresh = _peak_threshold(s, excess)
        keep = [n for n, e in zip(idx, excess) if e <= thresh]
        if keep == fit_idx or len(keep) < 4:
            break
        fit_idx = keep
    return dict(zip(idx, excess))


def _peak_threshold(s: Spectrum, excess) -> float:
    return max(PEAK_FACTOR * float(np.median(excess)), PEAK_FLOOR * abs(s.coefficients[0]))


def peak_candidates(s: Spectrum, k1: int) -> list:
    """Indices whose excess over the own-motion fit is a peak, strongest first.

    A peak clears ``PEAK_FACTOR`` times the median excess and a floor of
    ``PEAK_FLOOR``·|c_0|.
    """
    excess = own_motion_excess(s, k1)
    thresh = _peak_threshold(s, np.fromiter(excess.values(), float))
    return sorted((n for n, e in excess.items() if e > thresh), key=lambda n: -excess[n])


def rank_hypotheses(s: Spectrum, k1: int, candidates, signs=(1, -1)) -> list:
    """(residual, signed k2, block) for each admissible candidate and sign,
    best fit first."""
    scored = []
    for k2_abs in candidates:
        for sign in signs:
            k2 = sign * k2_abs
            idx = admissible_indices(s.n_max, k1, k2)
            try:
                blk = solve_riuw(s, k1, k2, idx)
            except (IndexClash, SingularSystem):
                continue
            scored.append((model_residual(s, blk, k1, k2, idx), k2, blk))
    scored.sort(key=lambda x: x[0])
    return scored


def _check_co_rotating(s: Spectrum, k1: int, r1: float):
    # Own-only recovery predicts c_0 exactly for a non-rotating neighbor; a
    # neighbor sharing ω1 folds into the own peak with a different radius.
    blk = solve_riuw(s, k1, None, admissible_indices(s.n_max, k1, None))
    est = recover_state(s, blk, k1, None, r1, s.window.T)
    T = s.window.T
    v = est.v_hat
    c0 = est.d_hat**2 + est.d_hat * v.x * T + v.norm() ** 2 * T**2 / 3 + r1 * r1
    actual = s.coefficients[0].real
    if abs(c0 - actual) > 1e-3 * abs(actual):
        raise AmbiguousSpectrum(
            "own-rotation peak is inconsistent with own radius alone; "
            "neighbor likely shares |omega|")


def identify_k2(s: Spectrum, k1: int, r1: float | None = None):
    """Neighbor harmonic magnitude and sign candidates, best first.

    Peak candidates are verified against the pair model for both ω2 signs,
    which also checks that the cross term sits at |k1-k2| or k1+k2. The sign
    order is only a preference; see :func:`resolve_omega_sign`. With ``r1``
    given, a spectrum without neighbor peaks is tested for a co-rotating
    neighbor before NoPeak is raised.
    """
    cands = peak_candidates(s, k1)
    k1a = abs(k1)
    if not cands:
        if r1 is not None and r1 > 0:
            _check_co_rotating(s, k1, r1)
        raise NoPeak("no neighbor rotation peak above threshold")
    if cands == [2 * k1a]:
        # only the cross term of a counter-rotating twin shows up
        raise AmbiguousSpectrum(f"lone peak at 2|k1|={2 * k1a}: neighbor shares |omega|")
    ranked = rank_hypotheses(s, k1, cands[:MAX_CANDIDATES])
    if not ranked:
        raise AmbiguousSpectrum(f"no admissible neighbor harmonic among peaks {cands}")
    best = ranked[0][1]
    return abs(best), (int(math.copysign(1, best)), -int(math.copysign(1, best)))


def solve_riuw(s: Spectrum, k1: int, k2: int | None, n_indices=None) -> SolveBlock:
    """Least-squares fit of (R, I, U, W) to the off-peak coefficients.

    ``k2=None`` drops the neighbor columns (neighbor not rotating); W is
    then reported as 0.
    """
    if n_indices is None:
        n_indices = default_solve_indices(k1, k2)
    if k2 is None:
        n = np.array(n_indices, dtype=float)
        if len(set(n_indices)) != len(n_indices) or any(
                m <= 0 or m == abs(k1) for m in n_indices) or len(n) < 2:
            raise IndexClash(f"bad solve indices {n_indices} for k1={k1}")
        a_re = np.column_stack((1 / n**2, 1 / (n - k1) - 1 / (n + k1)))
        a_im = np.column_stack((1 / n, 1 / (n - k1) + 1 / (n + k1)))
    else:
        a_re, a_im = design_blocks(n_indices, k1, k2)
    c = np.asarray([s.coefficients[int(n)] for n in n_indices])
    sols = []
    for a, rhs in ((a_re, c.real), (a_im, c.imag)):
        if np.linalg.cond(a) > 1e12:
            raise SingularSystem(f"design matrix ill-conditioned for indices {n_indices}")
        sols.append(np.linalg.lstsq(a, rhs, rcond=None)[0])
    x_re, x_im = sols
    W = complex(x_re[2], x_im[2]) / 2 if k2 is not None else 0j
    return SolveBlock(R=complex(x_re[0]), I=complex(x_im[0]),
                      U=complex(x_re[1], x_im[1]) / 2, W=W)


def model_residual(s: Spectrum, blk: SolveBlock, k1: int, k2: int | None,
                   indices=None) -> float:
    """Mismatch ‖c - model‖ over ``indices`` (default: every admissible index
    up to n_max), relative to the norm of the whole spectrum.

    The scale does not depend on the hypothesis, so residuals of different
    (k2, sign) hypotheses compare as absolute misfits.
    """
    if indices is None:
        indices = admissible_indices(s.n_max, k1, k2)
    if not indices:
        return 0.0
    c = s.coefficients[indices]
    model = pair_model(indices, blk.R, blk.I, blk.U, blk.W, k1, k2 or 0)
    scale = np.linalg.norm(s.coefficients)
    return float(np.linalg.norm(c - model) / scale) if scale > 0 else 0.0


def recover_state(s: Spectrum, blk: SolveBlock, k1: int, k2: int, r1: float, T: float,
                  n_indices=None) -> NeighborEstimate:
    """Distance, phase and relative velocity from the fitted constants.

    Removing the quadratic and neighbor contributions from the own peak
    leaves u = c_{|k1|} - s_{|k1|} - w_{|k1|}, and

        -r1·d·e^{jφ1} = P + 2πjU,   P = u + Ū/k1 (k1 > 0) or ū + Ū/k1 (k1 < 0)
        v_x - j v_y  = 4πjU / (T r1 e^{jφ1})
    """
    if r1 <= 0:
        raise DegenerateRadius("own radius is zero; position cannot be recovered")
    n = abs(k1)
    c_k1 = s.coefficients[n]
    quad = blk.R / n**2 + 1j * blk.I / n
    neigh = 0j
    if k2 is not None:
        neigh = 2 * blk.W / (n - k2) - 2 * np.conj(blk.W) / (n + k2)
    u = c_k1 - quad - neigh
    if k1 < 0:
        u = np.conj(u)
    lead = complex(u + np.conj(blk.U) / k1 + 2j * math.pi * blk.U)
    d_hat = abs(lead) / r1
    phi1 = wrap_angle(cmath.phase(lead) + math.pi) if lead != 0 else 0.0
    vc = 4j * math.pi * blk.U / (T * r1 * cmath.exp(1j * phi1))
    v_hat = Vec2(vc.real, -vc.imag)
    used = set(n_indices) if n_indices is not None else set(default_solve_indices(k1, k2))
    # with every admissible index in the fit, report the fit residual itself
    rest = [m for m in admissible_indices(s.n_max, k1, k2) if m not in used] or sorted(used)
    return NeighborEstimate(
        d_hat=d_hat,
        phi1_hat=phi1,
        v_hat=v_hat,
        omega2_hat=2 * math.pi * k2 / T if k2 is not None else 0.0,
        speed_norm=v_hat.norm(),
        residual=model_residual(s, blk, k1, k2, rest),
        k2=k2 if k2 is not None else 0,
        block=blk,
    )


def resolve_omega_sign(s: Spectrum, k1: int, k2_abs: int) -> float:
    """Signed ω2 chosen by the smaller model residual of the two hypotheses.

    The hypotheses differ in where the cross term sits (|k1-k2| vs k1+k2)
    and so in which index is excluded from the fit. Residuals closer than
    ``SIGN_TIE`` times the off-peak content (plus a round-off floor) are a
    tie.
    """
    ranked = rank_hypotheses(s, k1, [k2_abs])
    if not ranked:
        raise IndexClash(f"k2={k2_abs} is inadmissible with k1={k1} for either sign")
    if len(ranked) == 2:
        c = s.coefficients
        off = np.linalg.norm(np.delete(c, [0, abs(k1)]))
        tie = SIGN_TIE * off / np.linalg.norm(c) + RESIDUAL_FLOOR
        if ranked[1][0] - ranked[0][0] <= tie:
            raise AmbiguousSign("both omega2 signs explain the spectrum equally well")
    return 2 * math.pi * ranked[0][1] / s.window.T


def speed_norm_from_R(R: complex, T: float) -> float:
    return math.pi * math.sqrt(2 * max(complex(R).real, 0.0)) / T


def _default_n_max(w: Window, k1: int) -> int:
    return min(max(64, 4 * abs(k1) + 16), w.M // 2 - 1)


def estimate_neighbor(trace: DistanceTrace, w: Window, k1: int, r1: float,
                      omega2_sign: int | None = None, k2_abs: int | None = None,
                      n_max: int | None = None,
                      residual_gate: float | None = None) -> NeighborEstimate:
    """Full per-window pipeline: spectrum, k2 identification, fit, recovery.

    The fit uses every admissible index up to ``n_max``: for large harmonics
    the low-index columns of U and W are nearly collinear. ``omega2_sign``
    fixes the sign hypothesis when the agents share a convention, and
    ``k2_abs`` skips identification when |k2| is already known (e.g. from
    :func:`choose_window`). With ``residual_gate`` set, estimates whose
    relative residual exceeds it raise :class:`RejectedEstimate`.
    """
    if r1 <= 0:
        raise DegenerateRadius("own radius is zero; position cannot be recovered")
    if n_max is None:
        n_max = _default_n_max(w, k1)
        if k2_abs is not None:
            n_max = min(max(n_max, abs(k1) + k2_abs + 16), w.M // 2 - 1)
    s = spectrum_of_squared_trace(trace, w, n_max)
    if k2_abs is None:
        k2_abs, _ = identify_k2(s, k1, r1)
    if omega2_sign is not None:
        k2 = int(math.copysign(k2_abs, omega2_sign))
    else:
        k2 = round(resolve_omega_sign(s, k1, k2_abs) * w.T / (2 * math.pi))
    idx = admissible_indices(s.n_max, k1, k2)
    blk = solve_riuw(s, k1, k2, idx)
    est = recover_state(s, blk, k1, k2, r1, w.T, idx)
    if residual_gate is not None and est.residual > residual_gate:
        raise RejectedEstimate(f"residual {est.residual:.3g} exceeds gate {residual_gate:.3g}")
    return est


def speed_norm_fallback(trace: DistanceTrace, w: Window, k1: int,
                        n_max: int | None = None) -> float:
    """Relative speed from R alone, for windows where recovery failed.

    R does not depend on the radii, so this works with r1 = 0. The best
    neighbor hypothesis is used when a peak can be found, otherwise only the
    own rotation is fitted.
    """
    s = spectrum_of_squared_trace(trace, w, n_max or _default_n_max(w, k1))
    if k1 == 0:
        return norm_only_estimate(s)[1]
    try:
        ranked = rank_hypotheses(s, k1, peak_candidates(s, k1)[:MAX_CANDIDATES])
    except (EstimationError, IndexClash):
        ranked = []
    if ranked:
        blk = ranked[0][2]
    else:
        blk = solve_riuw(s, k1, None, admissible_indices(s.n_max, k1, None))
    if abs(blk.R) <= RESIDUAL_FLOOR * abs(s.coefficients[0]):
        return 0.0  # round-off; the square root would inflate it
    return speed_norm_from_R(blk.R, w.T)


def norm_only_estimate(s: Spectrum, n_indices=None):
    """Distance, speed and |v_x| for two agents without rotation.

    Fits a·t² + b·t to the n ≥ 1 coefficients (a = ‖v‖², b = 2·d·v_x) and
    takes d from c_0 = d² + bT/2 + aT²/3. The sign of v_y is unobservable.
    Returns ``(d, speed, v_x, |v_y|)``.
    """
    T = s.window.T
    if n_indices is None:
        n_indices = list(range(1, s.n_max + 1))
    basis = np.array([[lemma2_coefficient(1, 0, T, n), lemma2_coefficient(0, 1, T, n)]
                      for n in n_indices])
    c = s.coefficients[n_indices]
    a_mat = np.vstack((basis.real, basis.imag))
    rhs = np.concatenate((c.real, c.imag))
    a, b = np.linalg.lstsq(a_mat, rhs, rcond=None)[0]
    a = max(a, 0.0)
    d = math.sqrt(max(s.coefficients[0].real - b * T / 2 - a * T**2 / 3, 0.0))
    vx = b / (2 * d) if d > 0 else 0.0
    vy = math.sqrt(max(a - vx * vx, 0.0))
    return d, math.sqrt(a), vx, vy


def choose_window(omega1: float, omega2_abs: float, tol: float, T_max: float,
                  M: int = 8192) -> Window:
    """Shortest T = m·2π/|ω1| whose |ω2|·T/2π lies within ``tol`` of an integer."""
    if omega1 == 0:
        raise ValueError("omega1 must be nonzero")
    if not 0 < tol < 0.5:
        raise ValueError("tol must lie in (0, 0.5)")
    base = 2 * math.pi / abs(omega1)
    m = 1
    while m * base <= T_max * (1 + 1e-12):
        T = m * base
        k2 = abs(omega2_abs) * T / (2 * math.pi)
        if abs(k2 - round(k2)) <= tol:
            k1 = int(math.copysign(m, omega1))
            ks = (k1, int(round(k2)))
            M_eff = max(M, 4 * max(abs(k) for k in ks))
            return Window(T, M_eff, ks)
        m += 1
    raise NoWindow(f"no window up to T_max={T_max} within tolerance {tol}")


def frame_link(own_phase_at_window_start: float, phi1_hat: float) -> FrameLink:
    return FrameLink(wrap_angle(own_phase_at_window_start - phi1_hat))


__all__ = [
    "EstimationError", "FrameLink", "NeighborEstimate", "SolveBlock", "choose_window",
    "estimate_neighbor", "forward_riuw", "frame_link", "identify_k2", "norm_only_estimate",
    "peak_candidates", "recover_state", "resolve_omega_sign", "solve_riuw",
    "speed_norm_fallback", "speed_norm_from_R",
]
