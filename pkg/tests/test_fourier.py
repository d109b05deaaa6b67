"""Fourier collocation utilities against closed-form trigonometric oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rollwave import fourier


def _trig(x, X):
    w = 2.0 * np.pi / X
    return 1.3 + np.sin(w * x) - 0.4 * np.cos(3.0 * w * x)


def _trig_d1(x, X):
    w = 2.0 * np.pi / X
    return w * np.cos(w * x) + 1.2 * w * np.sin(3.0 * w * x)


def test_grid_and_wavenumbers():
    g = fourier.grid(8, 4.0)
    assert np.allclose(g, 0.5 * np.arange(8))
    k = fourier.wavenumbers(8, 2.0 * np.pi)
    assert sorted(np.rint(k).astype(int)) == [-4, -3, -2, -1, 0, 1, 2, 3]


def test_deriv_matches_closed_form():
    X = 5.0
    x = fourier.grid(64, X)
    d = fourier.deriv(_trig(x, X), X)
    assert np.max(np.abs(d - _trig_d1(x, X))) < 1e-12


def test_second_deriv_is_iterated_first():
    X = 3.0
    x = fourier.grid(64, X)
    f = np.exp(np.sin(2.0 * np.pi * x / X))
    d2 = fourier.deriv(f, X, 2)
    dd = fourier.deriv(fourier.deriv(f, X), X)
    assert np.max(np.abs(d2 - dd)) < 1e-9


def test_diff_matrix_agrees_with_deriv():
    X = 2.0 * np.pi
    x = fourier.grid(32, X)
    f = np.cos(x) + 0.3 * np.sin(4.0 * x)
    D = fourier.diff_matrix(32, X)
    assert np.max(np.abs(D @ f - fourier.deriv(f, X))) < 1e-12


def test_quad_exact_on_trig():
    X = 7.0
    x = fourier.grid(32, X)
    assert fourier.quad(_trig(x, X), X) == pytest.approx(1.3 * X, abs=1e-12)


def test_interp_reproduces_nodes_and_offsets():
    X = 4.0
    x = fourier.grid(32, X)
    f = _trig(x, X)
    assert np.max(np.abs(fourier.interp(f, X, x) - f)) < 1e-12
    xq = np.array([0.123, 1.77, 3.9])
    assert np.max(np.abs(fourier.interp(f, X, xq) - _trig(xq, X))) < 1e-12
    assert fourier.interp(f, X, 0.123) == pytest.approx(_trig(0.123, X))


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=3, max_value=6), st.integers(min_value=3, max_value=6),
       st.floats(min_value=0.5, max_value=20.0))
def test_resample_roundtrip_property(p, p2, X):
    n, m = 2 ** p, 2 ** p2
    x = fourier.grid(n, X)
    f = _trig(x, X)
    up = fourier.resample(f, m)
    if m >= n:
        back = fourier.resample(up, n)
        assert np.max(np.abs(back - f)) < 1e-10
    assert up.shape == (m,)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.5, max_value=20.0))
def test_deriv_of_constant_is_zero(X):
    f = np.full(16, 2.5)
    assert np.max(np.abs(fourier.deriv(f, X))) < 1e-13


def test_fourier_coeffs_normalization():
    X = 2.0 * np.pi
    x = fourier.grid(16, X)
    c = fourier.fourier_coeffs(np.cos(x))
    assert c[1] == pytest.approx(0.5, abs=1e-14)
    assert c[-1] == pytest.approx(0.5, abs=1e-14)
