"""Hill's method: Fourier truncation of Bloch spectral problems.

Coefficients are expanded in Fourier series on at least 4N + 2 samples so
products with the 2N + 1 retained modes are alias-free; each block becomes a
Toeplitz-like convolution matrix weighted by the Bloch symbol
(i (xi + 2 pi l / X))^order of its derivative factor.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import fourier
from .linearize import OperatorForm, SpectralProblem
from .model import DomainError


def thread_count() -> int:
    """Worker count for per-xi eigensolves, from ROLLWAVE_THREADS."""
    try:
        return max(1, int(os.environ.get("ROLLWAVE_THREADS", "1")))
    except ValueError:
        return 1


def _coefficient_spectrum(coeff: np.ndarray | float, n_min: int,
                          n_native: int) -> np.ndarray | None:
    """FFT coefficients of a sampled coefficient, resampled to >= n_min nodes."""
    if np.isscalar(coeff):
        return None
    arr = np.asarray(coeff)
    if len(arr) < n_min:
        arr = fourier.resample(arr, int(2 ** np.ceil(np.log2(n_min))))
    return np.fft.fft(arr) / len(arr)


def _assemble_terms(terms, m: int, N: int, xi: float, period: float,
                    n_native: int) -> np.ndarray:
    size = 2 * N + 1
    js = np.arange(-N, N + 1)
    kl = xi + 2.0 * np.pi * js / period
    M = np.zeros((m * size, m * size), dtype=complex)
    n_min = 4 * N + 2
    for (i, j), termlist in terms.items():
        block = np.zeros((size, size), dtype=complex)
        for order, coeff in termlist:
            sym = (1j * kl) ** order
            chat = _coefficient_spectrum(coeff, n_min, n_native)
            if chat is None:
                block += np.diag(coeff * sym)
            else:
                nc = len(chat)
                conv = chat[(js[:, None] - js[None, :]) % nc]
                block += conv * sym[None, :]
        M[i * size:(i + 1) * size, j * size:(j + 1) * size] += block
    return M


def assemble(problem: SpectralProblem, N: int,
             xi: float) -> tuple[np.ndarray, np.ndarray | None]:
    """Truncated matrices (M1, M2) at Floquet parameter xi; M2 None = identity."""
    op = problem.operator
    if op is None:
        raise DomainError(f"problem kind {problem.kind!r} has no operator form")
    M1 = _assemble_terms(op.M1, op.m, N, xi, op.period, op.n)
    M2 = None
    if op.M2 is not None:
        M2 = _assemble_terms(op.M2, op.m, N, xi, op.period, op.n)
    return M1, M2


def eigenvalues(problem: SpectralProblem, N: int, xi: float) -> np.ndarray:
    """Bloch eigenvalues at one xi, sorted by descending real part.

    Generalized pencils may be singular (the ham-limit right side is a bare
    derivative, singular in the mean mode at xi = 0); non-finite eigenvalues
    are dropped.
    """
    if problem.kind == "ham_limit" and xi == 0.0:
        raise DomainError("the ham-limit pencil is singular at xi = 0; "
                          "use a nonzero Floquet parameter")
    M1, M2 = assemble(problem, N, xi)
    if M2 is None:
        ev = np.linalg.eigvals(M1)
    else:
        ev = scipy.linalg.eigvals(M1, M2)
        ev = ev[np.isfinite(ev)]
    return ev[np.lexsort((ev.imag, -ev.real))]


@dataclass(frozen=True)
class SpectralCloud:
    """Bloch eigenvalues over a grid of Floquet parameters."""

    kind: str
    N: int
    xi: np.ndarray
    eigs: list[np.ndarray] = field(repr=False)

    def flat(self) -> np.ndarray:
        """(xi, lambda) pairs as a structured (M, 2) complex-ish array."""
        rows = [(x, ev) for x, evs in zip(self.xi, self.eigs) for ev in evs]
        out = np.empty((len(rows), 2), dtype=complex)
        for i, (x, ev) in enumerate(rows):
            out[i] = (x, ev)
        return out

    def to_csv(self) -> str:
        lines = ["xi,re,im"]
        for x, evs in zip(self.xi, self.eigs):
            for ev in evs:
                lines.append(f"{x:.17g},{ev.real:.17g},{ev.imag:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, kind: str = "file", N: int = 0) -> "SpectralCloud":
        xis: list[float] = []
        groups: dict[float, list[complex]] = {}
        for line in text.strip().splitlines()[1:]:
            xs, rs, ims = line.split(",")
            x = float(xs)
            if x not in groups:
                groups[x] = []
                xis.append(x)
            groups[x].append(complex(float(rs), float(ims)))
        return cls(kind=kind, N=N, xi=np.asarray(xis),
                   eigs=[np.asarray(groups[x]) for x in xis])


def default_xi_grid(period: float, n_xi: int = 64,
                    include_zero: bool = False) -> np.ndarray:
    """Floquet parameters in the fundamental interval [-pi/X, pi/X)."""
    xi = -np.pi / period + 2.0 * np.pi / period * np.arange(n_xi) / n_xi
    if not include_zero:
        xi = xi[np.abs(xi) > 1e-14]
    return xi


def spectrum(problem: SpectralProblem, N: int,
             xi_grid: np.ndarray | None = None, n_xi: int = 64) -> SpectralCloud:
    """Bloch spectrum over a Floquet grid, one dense eigensolve per xi.

    Deterministic: eigenvalues per xi are sorted, xi order preserved.
    Parallel over xi with ROLLWAVE_THREADS workers.
    """
    if xi_grid is None:
        xi_grid = default_xi_grid(problem.period, n_xi)
    xi_grid = np.asarray(xi_grid, dtype=float)
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            eigs = list(pool.map(lambda x: eigenvalues(problem, N, x), xi_grid))
    else:
        eigs = [eigenvalues(problem, N, x) for x in xi_grid]
    return SpectralCloud(kind=problem.kind, N=N, xi=xi_grid, eigs=eigs)


def double_period(problem: SpectralProblem) -> SpectralProblem:
    """The same operator on the doubled period (subharmonic perturbations).

    Tiles every sampled coefficient twice; xi then ranges over half the
    fundamental interval of the original wave.
    """
    op = problem.operator
    if op is None:
        raise DomainError("doubling requires an operator form")

    def tile(terms):
        if terms is None:
            return None
        return {key: [(order, coeff if np.isscalar(coeff)
                       else np.concatenate([coeff, coeff]))
                      for order, coeff in termlist]
                for key, termlist in terms.items()}

    op2 = OperatorForm(m=op.m, n=2 * op.n, period=2.0 * op.period,
                       M1=tile(op.M1), M2=tile(op.M2))
    return SpectralProblem(kind=problem.kind, period=2.0 * problem.period,
                           operator=op2, first_order=problem.first_order,
                           meta=dict(problem.meta))


def max_unstable(cloud: SpectralCloud, r0: float = 0.0) -> float:
    """Largest real part over the cloud, excluding |lambda| <= r0.

    With r0 > 0 this implements the away-from-origin part of condition (D1);
    the origin neighborhood is the business of the Evans Taylor expansion.
    """
    best = -np.inf
    for evs in cloud.eigs:
        keep = evs[np.abs(evs) > r0]
        if len(keep):
            best = max(best, float(np.max(keep.real)))
    return best
