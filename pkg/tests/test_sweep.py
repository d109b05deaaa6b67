"""Sweep orchestration: grids, stores, bisection, and power-law fits."""

import numpy as np
import pytest

from rollwave import sweep
from rollwave.model import DomainError


def _stub_record(point, verdict="stable"):
    return sweep.SweepRecord(alpha=point["alpha"], F=point["F"],
                             nu=point["nu"], q=point["q"], X=point["X"],
                             verdict=verdict, witness="stub",
                             conditions={}, meta={}, elapsed=0.0)


def _patch_classifier(monkeypatch, classify):
    def fake_evaluate(point, verdict_config=None, solver=None, n=512):
        return _stub_record(point, classify(point))
    monkeypatch.setattr(sweep, "evaluate_point", fake_evaluate)


def test_enumerate_grid_family_order():
    pts = sweep.enumerate_grid({"alpha": -2, "nu": 0.1, "q0": 0.4,
                                "F": [4.0, 5.0], "X": [7.0, 9.0]})
    assert [(p["F"], p["X"]) for p in pts] == [(4.0, 7.0), (4.0, 9.0),
                                              (5.0, 7.0), (5.0, 9.0)]
    assert pts[0]["q"] == pytest.approx(1.6)
    assert pts[0]["X0"] == pytest.approx(7.0 / 16.0)


def test_enumerate_grid_validation():
    with pytest.raises(DomainError):
        sweep.enumerate_grid({"F": 4.0, "X": 7.0})        # no q/q0
    with pytest.raises(DomainError):
        sweep.enumerate_grid({"F": 4.0, "X": 7.0, "q": 1.0, "q0": 0.4})
    with pytest.raises(DomainError):
        sweep.enumerate_grid({"F": 4.0, "X": 7.0, "q0": 0.4, "zeta": 1})


def test_family_point_requires_alpha_m2():
    with pytest.raises(DomainError):
        sweep.family_point(-1.0, 4.0, 0.1, 0.4, 7.0)


def test_record_json_roundtrip_excludes_timing():
    pt = sweep.family_point(-2.0, 4.0, 0.1, 0.4, 7.0)
    rec = _stub_record(pt)
    text = rec.to_json()
    assert "elapsed" not in text
    back = sweep.SweepRecord.from_json(text)
    assert back.key == rec.key
    assert back.verdict == "stable"


def test_store_resume_is_byte_identical(tmp_path, monkeypatch):
    _patch_classifier(monkeypatch,
                      lambda p: "stable" if p["X"] > 8.0 else "unstable")
    grid = {"alpha": -2, "nu": 0.1, "q0": 0.4, "F": [4.0, 5.0],
            "X": [7.0, 9.0]}
    path = tmp_path / "map.jsonl"
    recs1 = sweep.stability_map(grid, store=str(path), workers=2)
    text1 = path.read_text()
    # rerun: all keys present, no new work, file unchanged
    def explode(*a, **k):
        raise AssertionError("resume must not re-evaluate")
    monkeypatch.setattr(sweep, "evaluate_point", explode)
    recs2 = sweep.stability_map(grid, store=str(path), workers=2)
    assert path.read_text() == text1
    assert [r.key for r in recs1] == [r.key for r in recs2]
    assert [r.verdict for r in recs1] == ["unstable", "stable",
                                         "unstable", "stable"]


def test_store_rejects_duplicate_key(tmp_path):
    store = sweep.ResultStore(str(tmp_path / "s.jsonl"))
    rec = _stub_record(sweep.family_point(-2.0, 4.0, 0.1, 0.4, 7.0))
    store.append(rec)
    with pytest.raises(DomainError):
        store.append(rec)


def test_boundary_bisect_finds_threshold(monkeypatch):
    X_star = 8.3
    _patch_classifier(monkeypatch,
                      lambda p: "stable" if p["X"] > X_star else "unstable")
    got = sweep.boundary_bisect(-2.0, 4.0, 0.1, 0.4, 6.0, 12.0,
                                which="lower", rel_tol=1e-3)
    assert got == pytest.approx(X_star, rel=1e-3)


def test_boundary_bisect_not_bracketed(monkeypatch):
    _patch_classifier(monkeypatch, lambda p: "stable")
    with pytest.raises(sweep.NotBracketed):
        sweep.boundary_bisect(-2.0, 4.0, 0.1, 0.4, 6.0, 12.0)
    # inverted orientation: stable low side for a "lower" boundary
    _patch_classifier(monkeypatch,
                      lambda p: "unstable" if p["X"] > 8.0 else "stable")
    with pytest.raises(sweep.NotBracketed):
        sweep.boundary_bisect(-2.0, 4.0, 0.1, 0.4, 6.0, 12.0, which="lower")


def test_boundary_bisect_probe_failure(monkeypatch):
    _patch_classifier(monkeypatch, lambda p: "failed")
    with pytest.raises(sweep.ProbeFailed):
        sweep.boundary_bisect(-2.0, 4.0, 0.1, 0.4, 6.0, 12.0)


def test_powerlaw_fit_exact_recovery():
    rng = np.random.default_rng(7)
    b1, b2, b3 = 2.1, -0.4, 0.33
    pts = []
    for _ in range(8):
        F = float(rng.uniform(3.0, 12.0))
        q = float(rng.uniform(0.5, 4.0))
        X = float(np.exp(b1 * np.log(F) + b2 * np.log(q) + b3))
        pts.append((F, q, X))
    fit = sweep.powerlaw_fit(pts)
    assert fit.b1 == pytest.approx(b1, abs=1e-10)
    assert fit.b2 == pytest.approx(b2, abs=1e-10)
    assert fit.b3 == pytest.approx(b3, abs=1e-10)
    assert fit.max_abs_error < 1e-12
    assert not fit.restricted


def test_powerlaw_fit_rank_deficient_family():
    # q = q0 F makes log q collinear with log F: the fit must restrict
    # itself to the (log F, 1) columns and report it
    b1, b3 = 2.83, -1.0
    pts = [(F, 0.4 * F, float(np.exp(b1 * np.log(F) + b3)))
           for F in (3.0, 4.5, 6.0, 9.0)]
    fit = sweep.powerlaw_fit(pts)
    assert fit.restricted == ("log q",)
    assert fit.b2 == 0.0
    assert fit.b1 == pytest.approx(b1, abs=1e-10)


def test_powerlaw_fit_validation():
    with pytest.raises(DomainError):
        sweep.powerlaw_fit([(3.0, 1.0, 10.0), (4.0, 1.0, 12.0),
                            (5.0, 1.0, 14.0)])          # too few points
    with pytest.raises(DomainError):
        sweep.powerlaw_fit([(3.0, 1.0, 10.0), (3.3, 1.1, 12.0),
                            (3.6, 1.2, 13.0), (3.9, 1.3, 14.0)])  # F span


def test_boundary_csv_layout():
    rows = [{"alpha": -2.0, "F": 4.0, "nu": 0.1, "q": 1.6,
             "X_lower": 3.4, "X_upper": 12.0}]
    text = sweep.boundary_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "alpha,F,nu,q,X_lower,X_upper"
    assert len(lines) == 2
