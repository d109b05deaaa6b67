"""In-package elliptic integrals/functions against scipy and frozen oracles.

The package implements K, E, and cn itself (AGM and descending Landen);
scipy.special provides the independent oracle route.
"""

import numpy as np
import pytest
import scipy.special

from rollwave import elliptic

# mpmath.ellipk(0.5**2), mpmath.ellipe(0.5**2) to 17 digits (modulus k = 0.5)
K_HALF = 1.6857503548125961
E_HALF = 1.4674622093394272


def test_complete_integrals_frozen_values():
    assert elliptic.elliptic_K(0.5) == pytest.approx(K_HALF, abs=1e-14)
    assert elliptic.elliptic_E(0.5) == pytest.approx(E_HALF, abs=1e-14)


def test_complete_integrals_degenerate_endpoints():
    assert elliptic.elliptic_K(0.0) == pytest.approx(np.pi / 2.0, abs=1e-15)
    assert elliptic.elliptic_E(0.0) == pytest.approx(np.pi / 2.0, abs=1e-15)
    # k = 1 is excluded (K diverges); E limits to 1 from below
    from rollwave.model import DomainError
    with pytest.raises(DomainError):
        elliptic.elliptic_K(1.0)
    assert elliptic.elliptic_E(1.0 - 1e-15, mc=2e-15) == pytest.approx(
        1.0, abs=1e-12)


@pytest.mark.parametrize("k", [0.1, 0.3, 0.7, 0.9, 0.99, 0.9999])
def test_complete_integrals_vs_scipy(k):
    m = k * k
    assert elliptic.elliptic_K(k) == pytest.approx(
        float(scipy.special.ellipk(m)), rel=1e-13)
    assert elliptic.elliptic_E(k) == pytest.approx(
        float(scipy.special.ellipe(m)), rel=1e-13)


def test_near_unity_modulus_uses_complement():
    # mc = 1 - k^2 given exactly keeps full precision in the log-singular
    # regime where scipy (taking the rounded m) is only good to ~1e-6.
    # mpmath.ellipk(1 - mpf(10)**-12) at 40 digits:
    ref = 15.201804919087715
    ours = elliptic.elliptic_K(np.sqrt(1.0 - 1e-12), mc=1e-12)
    assert ours == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("k", [0.2, 0.6, 0.95])
def test_jacobi_cn_vs_scipy(k):
    K = elliptic.elliptic_K(k)
    u = np.linspace(-2.0 * K, 2.0 * K, 41)
    ours = elliptic.jacobi_cn(u, k)
    _, cn_ref, _, _ = scipy.special.ellipj(u, k * k)
    assert np.max(np.abs(ours - cn_ref)) < 1e-12


def test_jacobi_cn_period_and_parity():
    k = 0.8
    K = elliptic.elliptic_K(k)
    u = np.linspace(0.0, K, 17)
    assert np.max(np.abs(elliptic.jacobi_cn(u + 4.0 * K, k)
                         - elliptic.jacobi_cn(u, k))) < 1e-11
    assert np.max(np.abs(elliptic.jacobi_cn(-u, k)
                         - elliptic.jacobi_cn(u, k))) < 1e-13
    assert elliptic.jacobi_cn(0.0, k) == pytest.approx(1.0, abs=1e-15)


def test_selection_kappa_positive_and_smooth():
    ks = np.array([0.2, 0.5, 0.8, 0.95])
    vals = np.array([elliptic.selection_kappa(k) for k in ks])
    assert np.all(vals > 0.0)
    assert np.all(np.isfinite(vals))
