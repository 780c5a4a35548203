"""Fourier coefficients of the periodically extended squared distance.

The squared distance over a window is not periodic: its linear and quadratic
drift terms make the periodic extension jump at the window edge. A plain DFT
of the samples is the rectangle rule for the coefficient integral and carries
an O(jump/M) bias at every index. :func:`fourier_coefficients` therefore adds
Euler-Maclaurin endpoint corrections, with the edge values and derivatives
estimated from one-sided polynomial fits of the first and last few samples.
With ``endpoint_correction=False`` the raw DFT is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import IndexClash, IndexOverflow, ValidationError, ZeroIndex
from .kinematics import DistanceTrace, Window

EDGE_FIT_DEGREE = 8
SPARE_INDICES = 12


@dataclass(frozen=True)
class Spectrum:
    coefficients: np.ndarray  # complex, index n = 0..n_max
    window: Window

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1

    def __getitem__(self, n):
        return self.coefficients[n]


def _edge_jets(f, h, degree=EDGE_FIT_DEGREE):
    """Value and first three derivatives of ``f`` at both window edges.

    The value at t=T is extrapolated from the last samples, i.e. it is the
    left limit of the in-window function, not f[0] of the next period.
    """
    q = min(degree, len(f) - 1)
    s = np.arange(q + 1, dtype=float)
    head = Polynomial.fit(s, f[: q + 1], q)
    tail = Polynomial.fit(-(s[::-1] + 1), f[-(q + 1):], q)
    start = [head.deriv(m)(0.0) / h**m if m else f[0] for m in range(4)]
    end = [tail.deriv(m)(0.0) / h**m for m in range(4)]
    return np.array(start), np.array(end)


def fourier_coefficients(values, T: float, n_max: int, endpoint_correction: bool = True):
    """Coefficients c_n = (1/T)∫₀ᵀ f(t) e^{-j2πnt/T} dt for n = 0..n_max.

    ``values`` are samples of f at t_m = m·T/M, m = 0..M-1.
    """
    f = np.asarray(values, dtype=float)
    M = len(f)
    if n_max >= M / 2:
        raise IndexOverflow(f"n_max={n_max} must be below M/2={M / 2}")
    c = np.fft.fft(f)[: n_max + 1] / M
    if not endpoint_correction:
        return c
    h = T / M
    start, end = _edge_jets(f, h)
    jump = end - start  # jumps of f, f', f'', f''' across the window edge
    w = 2 * np.pi * np.arange(n_max + 1) / T
    dg1 = jump[1] - 1j * w * jump[0]
    dg3 = jump[3] - 3j * w * jump[2] - 3 * w**2 * jump[1] + 1j * w**3 * jump[0]
    c = c + jump[0] / (2 * M) - h**2 / (12 * T) * dg1 + h**4 / (720 * T) * dg3
    return c


def full_dft(trace: DistanceTrace) -> np.ndarray:
    """Unnormalized DFT of the squared samples over all M bins."""
    return np.fft.fft(trace.samples**2)


def default_n_max(k1: int, k2: int = 0) -> int:
    return max(abs(k1), abs(k2), abs(k1 - k2)) + SPARE_INDICES


def spectrum_of_squared_trace(trace: DistanceTrace, w: Window, n_max: int | None = None,
                              endpoint_correction: bool = True) -> Spectrum:
    if len(trace) != w.M:
        raise ValidationError(f"trace has {len(trace)} samples, window expects {w.M}")
    if n_max is None:
        if not w.k:
            raise ValidationError("n_max not given and window carries no harmonic indices")
        ks = list(w.k) + [0]
        n_max = default_n_max(ks[0], ks[1])
    if n_max >= w.M / 2:
        raise IndexOverflow(f"n_max={n_max} must be below M/2={w.M / 2}")
    c = fourier_coefficients(trace.samples**2, w.T, n_max, endpoint_correction)
    return Spectrum(c, w)


def lemma1_coefficient(d: float, v: float, T: float, k1: int, n: int) -> complex:
    """Fourier coefficient at index ``n`` of (d + v t)·cos(2π k1 t / T) on [0, T)."""
    if n == k1:
        return complex(0.5 * (d + 0.5 * v * T), v * T / (8 * math.pi * k1))
    return 1j * v * T / (4 * math.pi) * (1.0 / (n - k1) + 1.0 / (n + k1))


def lemma2_coefficient(a: float, b: float, T: float, n: int) -> complex:
    """Fourier coefficient at index ``n`` of a t² + b t on [0, T)."""
    if n == 0:
        raise ZeroIndex("the quadratic closed form is undefined at n = 0")
    return complex(a * T**2 / (2 * math.pi**2 * n**2), (a * T**2 + T * b) / (2 * math.pi * n))


def excluded_indices(k1: int, k2: int) -> set:
    """Indices carrying a rotation peak or the cross term for a pair."""
    return {0, abs(k1), abs(k2), abs(k1 - k2)}


def check_indices(n_indices, k1: int, k2: int, min_count: int = 4):
    n_indices = [int(n) for n in n_indices]
    if len(n_indices) < min_count:
        raise IndexClash(f"need at least {min_count} indices, got {len(n_indices)}")
    if len(set(n_indices)) != len(n_indices):
        raise IndexClash(f"indices are not distinct: {n_indices}")
    if k1 == 0 or k2 == 0 or abs(k1) == abs(k2):
        raise IndexClash(f"harmonics must be nonzero with distinct magnitudes (k1={k1}, k2={k2})")
    bad = [n for n in n_indices if n <= 0 or n in excluded_indices(k1, k2)]
    if bad:
        raise IndexClash(f"indices {bad} are non-positive or collide with {{k1, k2, |k1-k2|}}")
    return np.array(n_indices, dtype=float)


def coefficient_matrix(n_indices, k1: int, k2: int) -> np.ndarray:
    """Rows [1/n², 1/n, 1/(n-k1)+1/(n+k1), 1/(n-k2)+1/(n+k2)]."""
    if k1 <= 0 or k2 <= 0:
        raise IndexClash("k1 and k2 must be positive")
    n = check_indices(n_indices, k1, k2)
    return np.column_stack((
        1 / n**2,
        1 / n,
        1 / (n - k1) + 1 / (n + k1),
        1 / (n - k2) + 1 / (n + k2),
    ))


def design_blocks(n_indices, k1: int, k2: int, min_count: int = 3):
    """Real and imaginary design matrices of the pair model.

    For n outside the excluded set,

        c_n = R/n² + jI/n + 2U/(n-k1) - 2Ū/(n+k1) + 2W/(n-k2) - 2W̄/(n+k2)

    which splits into two real systems:
    Re c_n = [1/n², 1/(n-k1)-1/(n+k1), 1/(n-k2)-1/(n+k2)] · (R, 2Re U, 2Re W)
    Im c_n = [1/n,  1/(n-k1)+1/(n+k1), 1/(n-k2)+1/(n+k2)] · (I, 2Im U, 2Im W)
    k1 and k2 are signed harmonics.
    """
    n = check_indices(n_indices, k1, k2, min_count)
    a_re = np.column_stack((1 / n**2, 1 / (n - k1) - 1 / (n + k1), 1 / (n - k2) - 1 / (n + k2)))
    a_im = np.column_stack((1 / n, 1 / (n - k1) + 1 / (n + k1), 1 / (n - k2) + 1 / (n + k2)))
    return a_re, a_im


def pair_model(n, R, I, U, W, k1: int, k2: int):
    """Model coefficient(s) at off-peak index(es) ``n``; see :func:`design_blocks`."""
    n = np.asarray(n, dtype=float)
    return (R / n**2 + 1j * I / n
            + 2 * U / (n - k1) - 2 * np.conj(U) / (n + k1)
            + 2 * W / (n - k2) - 2 * np.conj(W) / (n + k2))
