"""Complete elliptic integrals and the Jacobi elliptic cosine.

K and E use the arithmetic-geometric mean iteration; cn uses the descending
Landen (Gauss) transformation of the amplitude (DLMF 22.20(ii)).  The modulus
convention is k (not the parameter m = k^2).  Internal helpers accept the
complementary parameter mc = 1 - k^2 separately so callers working with k
extremely close to 1 do not lose digits forming 1 - k^2.
"""

from __future__ import annotations

import numpy as np

from .model import DomainError

_AGM_TOL = 1e-16
_MAX_ITERS = 64


def _agm_sequences(k: float, mc: float | None = None):
    """AGM iterates (a_n, b_n, c_n) starting from (1, k', k)."""
    if mc is None:
        mc = (1.0 - k) * (1.0 + k)
    if mc <= 0.0:
        raise DomainError(f"elliptic modulus must satisfy k < 1, got k={k}")
    a, b, c = 1.0, np.sqrt(mc), k
    seq = [(a, b, c)]
    for _ in range(_MAX_ITERS):
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        seq.append((a, b, c))
        if abs(c) <= _AGM_TOL * a:
            break
    return seq


def elliptic_K(k: float, mc: float | None = None) -> float:
    """Complete elliptic integral of the first kind, modulus k in [0, 1)."""
    if k < 0.0:
        raise DomainError(f"modulus must be nonnegative, got {k}")
    seq = _agm_sequences(k, mc)
    return float(np.pi / (2.0 * seq[-1][0]))


def elliptic_E(k: float, mc: float | None = None) -> float:
    """Complete elliptic integral of the second kind, modulus k in [0, 1)."""
    if k < 0.0:
        raise DomainError(f"modulus must be nonnegative, got {k}")
    seq = _agm_sequences(k, mc)
    csum = sum(2.0 ** (n - 1) * c * c for n, (_, _, c) in enumerate(seq))
    K = np.pi / (2.0 * seq[-1][0])
    return float(K * (1.0 - csum))


def jacobi_cn(x, k: float):
    """Jacobi elliptic cosine cn(x, k), vectorized in x."""
    if not 0.0 <= k < 1.0:
        raise DomainError(f"modulus must lie in [0, 1), got {k}")
    x = np.asarray(x, dtype=float)
    if k < 1e-10:
        out = np.cos(x)
        return out if out.ndim else float(out)
    seq = _agm_sequences(k)
    N = len(seq) - 1
    phi = (2.0 ** N) * seq[N][0] * x
    for n in range(N, 0, -1):
        a_n, _, c_n = seq[n]
        ratio = np.clip(c_n / a_n * np.sin(phi), -1.0, 1.0)
        phi = 0.5 * (phi + np.arcsin(ratio))
    out = np.cos(phi)
    return out if out.ndim else float(out)


def _sn_moments(m: float, K: float, E: float) -> tuple[float, ...]:
    """Integrals of sn^{2n} over a full period [0, 2K], n = 0..4."""
    S0 = 2.0 * K
    S1 = 2.0 * (K - E) / m
    S2 = (2.0 * (1.0 + m) * S1 - S0) / (3.0 * m)
    S3 = (4.0 * (1.0 + m) * S2 - 3.0 * S1) / (5.0 * m)
    S4 = (6.0 * (1.0 + m) * S3 - 5.0 * S2) / (7.0 * m)
    return S0, S1, S2, S3, S4


def selection_kappa(k: float, mc: float | None = None) -> float:
    """Scale kappa = G(k) at which cnoidal orbits persist under the
    singular fourth-order perturbation.

    Derived in closed form from the persistence condition
    integral of T0 (T0'' + T0'''') = 0, which with C = cn^2 reduces to
    kappa^2 = int (C')^2 / int (C'')^2 over one period; both integrals are
    polynomial in the sn moments.
    """
    if mc is None:
        if not 0.0 < k < 1.0:
            raise DomainError(f"modulus must lie in (0, 1), got {k}")
    elif mc <= 0.0 or k <= 0.0:
        raise DomainError(f"modulus must lie in (0, 1), got k={k}, 1-k^2={mc}")
    m = k * k
    K = elliptic_K(k, mc)
    E = elliptic_E(k, mc)
    S0, S1, S2, S3, S4 = _sn_moments(m, K, E)
    num = S1 - (1.0 + m) * S2 + m * S3
    den = (S0 - 4.0 * (1.0 + m) * S1 + (4.0 * (1.0 + m) ** 2 + 6.0 * m) * S2
           - 12.0 * m * (1.0 + m) * S3 + 9.0 * m * m * S4)
    if num <= 0.0 or den <= 0.0:
        raise DomainError(f"selection radicand non-positive at k={k}: {num}/{den}")
    return float(np.sqrt(num / den))
