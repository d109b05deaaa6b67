"""Fourier collocation utilities on uniform periodic grids.

All grids are uniform over [0, X) with no endpoint duplication; node counts
are powers of two so transforms never need padding logic.
"""

from __future__ import annotations

import numpy as np


def grid(n: int, period: float) -> np.ndarray:
    """Uniform nodes x_j = j*X/n, j = 0..n-1."""
    return np.arange(n) * (period / n)


def wavenumbers(n: int, period: float) -> np.ndarray:
    """Signed wavenumbers 2*pi*j/X in FFT ordering."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / period


def deriv(values: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    """Spectral derivative of periodic samples."""
    n = len(values)
    k = wavenumbers(n, period)
    mult = (1j * k) ** order
    if order % 2 == 1 and n % 2 == 0:
        # Nyquist mode has no well-defined odd derivative; drop it.
        mult[n // 2] = 0.0
    out = np.fft.ifft(mult * np.fft.fft(values))
    return out.real if np.isrealobj(values) else out


def diff_matrix(n: int, period: float, order: int = 1) -> np.ndarray:
    """Dense trigonometric differentiation matrix."""
    eye = np.eye(n)
    cols = [deriv(eye[:, j], period, order) for j in range(n)]
    return np.column_stack(cols)


def quad(values: np.ndarray, period: float) -> float:
    """Trapezoid rule on a periodic grid (spectrally accurate)."""
    return float(np.mean(values)) * period


def interp(values: np.ndarray, period: float, x: np.ndarray | float) -> np.ndarray | float:
    """Evaluate the trigonometric interpolant at arbitrary points."""
    n = len(values)
    coeffs = np.fft.fft(values) / n
    k = wavenumbers(n, period)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    phases = np.exp(1j * np.outer(x_arr, k))
    out = phases @ coeffs
    if np.isrealobj(values):
        out = out.real
    return out if np.ndim(x) else out[0]


def fourier_coeffs(values: np.ndarray) -> np.ndarray:
    """Normalized FFT coefficients c_k with f(x) = sum c_k e^{i k 2pi x / X}."""
    return np.fft.fft(values) / len(values)


def resample(values: np.ndarray, n_new: int) -> np.ndarray:
    """Trigonometric resampling to a different node count."""
    n = len(values)
    c = np.fft.fft(values) / n
    k_old = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
    k_new = np.rint(np.fft.fftfreq(n_new, d=1.0 / n_new)).astype(int)
    pos = {k: i for i, k in enumerate(k_new)}
    out = np.zeros(n_new, dtype=complex)
    limit = min(n, n_new) // 2
    for i, k in enumerate(k_old):
        if abs(k) <= limit and k in pos:
            out[pos[k]] += c[i]
    res = np.fft.ifft(out * n_new)
    return res.real if np.isrealobj(values) else res
