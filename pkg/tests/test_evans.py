"""Periodic Evans function: monodromy, winding numbers, origin expansion."""

import numpy as np
import pytest
import scipy.linalg

from rollwave import evans, linearize
from rollwave.model import DomainError


@pytest.fixture(scope="module")
def const_problem(constant_state):
    return linearize.bloch_coeffs(constant_state)


@pytest.fixture(scope="module")
def fig1c_problem(fig1c_wave):
    return linearize.bloch_coeffs(fig1c_wave)


def test_constant_monodromy_matches_expm(const_problem):
    # constant coefficients: Psi(X) = expm((A0 + lam A1) X) exactly
    fo = const_problem.first_order
    lam = 0.21 - 0.13j
    frame = evans.monodromy(const_problem, lam)
    ref = scipy.linalg.expm((fo.A0[0] + lam * fo.A1[0]) * fo.period)
    assert np.max(np.abs(frame.matrix - ref)) < 1e-10 * np.max(np.abs(ref))


def test_constant_state_roots_match_dispersion(const_problem, constant_state):
    # polishing from a perturbed dispersion root recovers it to 1e-8
    p = constant_state.params
    X = p.X
    xi = 0.23
    ev = evans.EvansEvaluator(const_problem)
    for j in (-1, 0, 1):
        eta = xi + 2.0 * np.pi * j / X
        for lam in linearize.constant_dispersion(p, p.tau0, eta)[0]:
            seed = lam * 1.001 + 1e-4
            got = evans.polish_root(None, seed, xi, evaluator=ev)
            assert abs(got - lam) < 1e-8


def test_conjugation_symmetry(fig1c_problem):
    ev = evans.EvansEvaluator(fig1c_problem)
    lam, xi = 0.17 + 0.09j, 0.11
    a = ev.value(lam, xi)
    b = ev.value(np.conj(lam), -xi)
    conj_a = evans.EvansValue(mantissa=np.conj(a.mantissa),
                              exponent=a.exponent)
    assert b.ratio(conj_a) == pytest.approx(1.0, abs=1e-10)


def test_liouville_identity(fig1c_problem):
    frame = evans.monodromy(fig1c_problem, 0.2)
    assert frame.liouville_error < 1e-8
    assert not frame.untrusted


def test_floquet_multiplier_polish(const_problem):
    lam = 0.1 + 0.2j
    frame = evans.monodromy(const_problem, lam)
    mults = np.linalg.eigvals(frame.matrix)
    rho = min(mults, key=abs)
    polished = evans.floquet_multiplier(frame, rho * (1.0 + 1e-5))
    assert abs(polished - rho) < 1e-8 * max(1.0, abs(rho))


def test_winding_counts_roots(const_problem, constant_state):
    p = constant_state.params
    xi = 0.23
    lam0 = linearize.constant_dispersion(p, p.tau0, xi)[0]
    lam0 = max(lam0, key=lambda z: z.real)   # the unstable branch root
    ev = evans.EvansEvaluator(const_problem)
    around = evans.Contour(kind="circle", radius=1e-2, center=lam0)
    rep = evans.winding_number(None, around, xi, evaluator=ev)
    assert rep.winding == 1
    away = evans.Contour(kind="circle", radius=1e-2,
                         center=lam0 + 0.3 + 0.4j)
    rep0 = evans.winding_number(None, away, xi, evaluator=ev)
    assert rep0.winding == 0
    assert rep0.max_jump <= 0.2


def test_origin_double_root(fig1c_problem):
    exp = evans.origin_taylor(fig1c_problem)
    assert exp.double_root_ok
    assert exp.reality_error < 1e-6
    assert exp.representation_residual < 1e-4
    # curves() evaluates alpha xi + beta xi^2
    xi = 1e-3
    pred = exp.curves(xi)[0]
    assert pred[0] == pytest.approx(exp.alpha[0] * xi + exp.beta[0] * xi * xi)


def test_contour_parse_roundtrip():
    c = evans.Contour.parse("semicircle:R=0.2")
    assert c.kind == "semicircle" and c.radius == 0.2
    c2 = evans.Contour.parse("circle:c=1+2j,r=0.01")
    assert c2.center == 1 + 2j and c2.radius == 0.01
    assert evans.Contour.parse(c2.describe()).center == c2.center
    with pytest.raises(DomainError):
        evans.Contour.parse("ellipse:a=1")


def test_evans_value_scaling():
    v = evans.EvansValue(mantissa=2.0 + 0.0j, exponent=3.0)
    assert complex(v) == pytest.approx(2.0 * np.exp(3.0))
    w = evans.EvansValue(mantissa=1.0 + 0.0j, exponent=2.0)
    assert v.ratio(w) == pytest.approx(2.0 * np.e)


def test_shared_frames_across_xi(fig1c_problem):
    ev = evans.EvansEvaluator(fig1c_problem)
    lam = 0.15
    ev.value(lam, 0.1)
    n1 = ev.frames_computed
    ev.value(lam, 0.2)
    ev.value(lam, -0.1)
    assert ev.frames_computed == n1


def test_verdict_on_constant_state(const_problem):
    v = evans.verdict(const_problem)
    assert v.overall == "unstable"
    assert v.to_dict()["overall"] == "unstable"
    assert v.diagnostics["hill_max_real"] > 0.0
