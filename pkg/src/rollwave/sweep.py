"""Stability maps over (F, q, X), boundary bisection, and power-law fits.

Records are keyed by the physical parameter tuple (alpha, F, nu, q, X) and
persisted to an append-only JSON-lines store, one record per line, so an
interrupted sweep resumes by skipping keys already present.  Wall-clock
timings are carried on the in-memory records but excluded from the store so
that two runs of the same grid produce byte-identical files.

The alpha = -2 scaling family is parameterized by q0: the physical discharge
is q = q0 F and the physical period X = X0 F^2 for the rescaled period X0.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import evans, hill
from .model import DomainError
from .profile import WaveProfile, profile_from_limit


def _json_default(obj):
    """Convert numpy scalars and arrays into plain JSON values."""
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"Object of type {type(obj).__name__} "
                    f"is not JSON serializable")


class NotBracketed(Exception):
    """The two bisection endpoints carry the same verdict."""


class ProbeFailed(Exception):
    """A bisection probe failed; carries the failing period."""

    def __init__(self, X: float, cause: Exception):
        super().__init__(f"probe at X = {X:.6g} failed: {cause}")
        self.X = X
        self.cause = cause


@dataclass(frozen=True)
class SweepRecord:
    """Verdict of one wave in a stability map."""

    alpha: float
    F: float
    nu: float
    q: float
    X: float
    verdict: str                       # "stable" | "unstable" | "indeterminate" | "failed"
    witness: str | None = None
    conditions: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)   # q0, X0, solver settings, diagnostics
    elapsed: float | None = None               # not serialized

    @property
    def key(self) -> tuple:
        return (self.alpha, self.F, self.nu, self.q, self.X)

    def to_json(self) -> str:
        d = {"alpha": self.alpha, "F": self.F, "nu": self.nu, "q": self.q,
             "X": self.X, "verdict": self.verdict, "witness": self.witness,
             "conditions": dict(self.conditions), "meta": dict(self.meta)}
        return json.dumps(d, sort_keys=True, separators=(",", ":"),
                          default=_json_default)

    @classmethod
    def from_json(cls, line: str) -> "SweepRecord":
        d = json.loads(line)
        return cls(alpha=d["alpha"], F=d["F"], nu=d["nu"], q=d["q"], X=d["X"],
                   verdict=d["verdict"], witness=d.get("witness"),
                   conditions=d.get("conditions", {}), meta=d.get("meta", {}))


class ResultStore:
    """Append-only JSON-lines store of SweepRecords with key-based resume."""

    def __init__(self, path=None):
        self.path = path
        self.records: list[SweepRecord] = []
        self._keys: set[tuple] = set()
        if path is not None:
            try:
                text = open(path, "r", encoding="utf-8").read()
            except FileNotFoundError:
                text = ""
            for line in text.splitlines():
                if line.strip():
                    self._absorb(SweepRecord.from_json(line))

    def _absorb(self, rec: SweepRecord):
        if rec.key in self._keys:
            raise DomainError(f"duplicate sweep key {rec.key}")
        self.records.append(rec)
        self._keys.add(rec.key)

    def __contains__(self, key: tuple) -> bool:
        return key in self._keys

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: SweepRecord):
        self._absorb(rec)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(rec.to_json() + "\n")
                fh.flush()


def family_point(alpha: float, F: float, nu: float, q0: float,
                 X: float) -> dict:
    """Physical parameter point of the alpha = -2 family at (F, q0, X)."""
    if alpha != -2.0:
        raise DomainError(f"only the alpha = -2 family is implemented, "
                          f"got alpha = {alpha}")
    return {"alpha": alpha, "F": F, "nu": nu, "q": q0 * F, "X": X,
            "q0": q0, "X0": X / F ** 2}


def enumerate_grid(spec: dict) -> list[dict]:
    """Expand a grid spec into an ordered list of parameter points.

    Keys: alpha (scalar), nu (scalar), F (scalar or list), X (scalar or
    list), and exactly one of q0 (scaling family, scalar) or q (explicit,
    scalar or list).  Points are ordered F-major, then q, then X.
    """
    known = {"alpha", "nu", "F", "X", "q0", "q"}
    unknown = set(spec) - known
    if unknown:
        raise DomainError(f"unknown grid keys: {sorted(unknown)}")
    if ("q0" in spec) == ("q" in spec):
        raise DomainError("grid spec needs exactly one of 'q0' or 'q'")

    def listify(v):
        return [float(x) for x in (v if isinstance(v, (list, tuple)) else [v])]

    alpha = float(spec.get("alpha", -2.0))
    nu = float(spec.get("nu", 0.1))
    Fs = listify(spec["F"])
    Xs = listify(spec["X"])
    points = []
    for F in Fs:
        if "q0" in spec:
            for X in Xs:
                points.append(family_point(alpha, F, nu, float(spec["q0"]), X))
        else:
            for q in listify(spec["q"]):
                for X in Xs:
                    points.append({"alpha": alpha, "F": F, "nu": nu, "q": q,
                                   "X": X, "q0": q / F, "X0": X / F ** 2})
    return points


def default_solver(point: dict, n: int = 512, tol: float = 1e-10
                   ) -> WaveProfile:
    """Profile solve for one grid point on the alpha = -2 family."""
    if point["alpha"] != -2.0:
        raise DomainError("default solver covers only alpha = -2")
    return profile_from_limit(point["q0"], point["X0"], point["F"],
                              nu=point["nu"], n=n, tol=tol)


def evaluate_point(point: dict, verdict_config: dict | None = None,
                   solver=None, n: int = 512) -> SweepRecord:
    """Solve the wave at one grid point and classify its stability."""
    t0 = time.monotonic()
    meta = {"q0": point.get("q0"), "X0": point.get("X0"), "n": n}
    try:
        wave = (solver or default_solver)(point) if solver else \
            default_solver(point, n=n)
        v = evans.verdict(wave, config=verdict_config)
        meta["residual_norm"] = wave.residual_norm
        meta["amplitude"] = float(np.ptp(wave.tau))
        meta["hill_max_real"] = v.diagnostics.get("hill_max_real")
        if "alpha" in v.diagnostics:
            meta["origin_alpha"] = v.diagnostics["alpha"]
            meta["origin_beta"] = v.diagnostics["beta"]
        return SweepRecord(alpha=point["alpha"], F=point["F"], nu=point["nu"],
                           q=point["q"], X=point["X"], verdict=v.overall,
                           witness=v.witness or v.reason,
                           conditions=dict(v.conditions), meta=meta,
                           elapsed=time.monotonic() - t0)
    except Exception as err:  # per-record failures are recorded, not fatal
        return SweepRecord(alpha=point["alpha"], F=point["F"], nu=point["nu"],
                           q=point["q"], X=point["X"], verdict="failed",
                           witness=f"{type(err).__name__}: {err}", meta=meta,
                           elapsed=time.monotonic() - t0)


def stability_map(grid, store: ResultStore | str | None = None,
                  workers: int | None = None,
                  verdict_config: dict | None = None, solver=None,
                  n: int = 512) -> list[SweepRecord]:
    """Stability verdicts over a grid, parallel, checkpointed, resumable.

    `grid` is a spec dict (see enumerate_grid) or an iterable of points.
    Present keys are skipped; new records are appended to the store in grid
    order regardless of completion order, so reruns are byte-identical.
    Returns the records of this grid in grid order.
    """
    points = enumerate_grid(grid) if isinstance(grid, dict) else list(grid)
    if isinstance(store, (str, bytes)) or hasattr(store, "__fspath__"):
        store = ResultStore(store)
    elif store is None:
        store = ResultStore()
    by_key = {r.key: r for r in store.records}

    def key_of(p):
        return (p["alpha"], p["F"], p["nu"], p["q"], p["X"])

    todo = [p for p in points if key_of(p) not in by_key]
    workers = workers if workers is not None else hill.thread_count()
    if todo:
        work = lambda p: evaluate_point(p, verdict_config=verdict_config,
                                        solver=solver, n=n)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                fresh = list(pool.map(work, todo))
        else:
            fresh = [work(p) for p in todo]
        for rec in fresh:            # append in grid order, post-completion
            store.append(rec)
            by_key[rec.key] = rec
    return [by_key[key_of(p)] for p in points]


def _binary_class(rec: SweepRecord) -> bool:
    """True = stable side.  Indeterminate or failed probes abort bisection."""
    if rec.verdict == "stable":
        return True
    if rec.verdict == "unstable":
        return False
    raise ProbeFailed(rec.X, RuntimeError(
        f"verdict {rec.verdict!r}: {rec.witness}"))


def boundary_bisect(alpha: float, F: float, nu: float, q0: float,
                    X_lo: float, X_hi: float, which: str = "lower",
                    rel_tol: float = 1e-2,
                    verdict_config: dict | None = None, n: int = 512,
                    store: ResultStore | None = None) -> float:
    """Bisect the period X across a stability boundary at fixed (F, q0).

    `which` declares the expected orientation: "lower" wants unstable at
    X_lo and stable at X_hi (modulational boundary, detected through the
    origin expansion / small-lambda spectrum inside the full verdict);
    "upper" wants the reverse (high-frequency boundary, detected through
    the Hill scan and right-half-plane winding).  Identical classifications
    at the endpoints raise NotBracketed.  Returns the midpoint of the final
    bracket, of relative width <= rel_tol.
    """
    if which not in ("lower", "upper"):
        raise DomainError(f"which must be 'lower' or 'upper', got {which!r}")
    if not (0.0 < X_lo < X_hi):
        raise DomainError(f"need 0 < X_lo < X_hi, got ({X_lo}, {X_hi})")

    def probe(X: float) -> bool:
        point = family_point(alpha, F, nu, q0, X)
        if store is not None and tuple(
                point[k] for k in ("alpha", "F", "nu", "q", "X")
        ) in store:
            rec = next(r for r in store.records
                       if r.key == (alpha, F, nu, q0 * F, X))
        else:
            rec = evaluate_point(point, verdict_config=verdict_config, n=n)
            if store is not None:
                store.append(rec)
        if rec.verdict == "failed":
            raise ProbeFailed(X, RuntimeError(rec.witness or "solve failed"))
        return _binary_class(rec)

    want_hi_stable = (which == "lower")
    lo_stable = probe(X_lo)
    hi_stable = probe(X_hi)
    if lo_stable == hi_stable:
        raise NotBracketed(
            f"both endpoints {'stable' if lo_stable else 'unstable'} at "
            f"F = {F}, q0 = {q0}, X in ({X_lo}, {X_hi})")
    if hi_stable != want_hi_stable:
        raise NotBracketed(
            f"bracket orientation is inverted for the {which} boundary at "
            f"F = {F}: stable side is at X_{'lo' if lo_stable else 'hi'}")

    while (X_hi - X_lo) > rel_tol * 0.5 * (X_hi + X_lo):
        X_mid = math.sqrt(X_lo * X_hi)
        if probe(X_mid) == hi_stable:
            X_hi = X_mid
        else:
            X_lo = X_mid
    return math.sqrt(X_lo * X_hi)


@dataclass(frozen=True)
class BoundaryFit:
    """OLS fit log X = b1 log F + b2 log q + b3 over boundary points."""

    b1: float
    b2: float
    b3: float
    max_abs_error: float
    mean_abs_error: float
    max_rel_error: float
    mean_rel_error: float
    rank: int
    restricted: tuple[str, ...] = ()   # columns dropped as unidentifiable

    def to_dict(self) -> dict:
        return {"b1": self.b1, "b2": self.b2, "b3": self.b3,
                "max_abs_error": self.max_abs_error,
                "mean_abs_error": self.mean_abs_error,
                "max_rel_error": self.max_rel_error,
                "mean_rel_error": self.mean_rel_error,
                "rank": self.rank, "restricted": list(self.restricted)}


def powerlaw_fit(points) -> BoundaryFit:
    """Fit log X = b1 log F + b2 log q + b3 to boundary points.

    `points` is an iterable of (F, q, X) triples or of SweepRecords.
    Requires >= 4 points spanning at least a factor 2 in F.  When the
    design matrix is rank deficient (q an exact power of F, single alpha),
    the fit is restricted to the identifiable subspace by dropping the
    log q column, with the restriction reported on the result.
    """
    rows = []
    for p in points:
        if isinstance(p, SweepRecord):
            rows.append((p.F, p.q, p.X))
        else:
            rows.append(tuple(float(v) for v in p))
    if len(rows) < 4:
        raise DomainError(f"need >= 4 boundary points, got {len(rows)}")
    F = np.array([r[0] for r in rows])
    q = np.array([r[1] for r in rows])
    X = np.array([r[2] for r in rows])
    if np.max(F) < 2.0 * np.min(F):
        raise DomainError("boundary points must span a factor >= 2 in F")
    lF, lq, lX = np.log(F), np.log(q), np.log(X)

    A = np.column_stack([lF, lq, np.ones_like(lF)])
    rank = np.linalg.matrix_rank(A, tol=1e-10 * np.linalg.norm(A))
    restricted: tuple[str, ...] = ()
    if rank < 3:
        restricted = ("log q",)
        A2 = np.column_stack([lF, np.ones_like(lF)])
        coef2, *_ = np.linalg.lstsq(A2, lX, rcond=None)
        b = np.array([coef2[0], 0.0, coef2[1]])
    else:
        b, *_ = np.linalg.lstsq(A, lX, rcond=None)
    resid = lX - A @ b
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(resid) / np.maximum(np.abs(lX), 1e-300)
    return BoundaryFit(b1=float(b[0]), b2=float(b[1]), b3=float(b[2]),
                       max_abs_error=float(np.max(np.abs(resid))),
                       mean_abs_error=float(np.mean(np.abs(resid))),
                       max_rel_error=float(np.max(rel)),
                       mean_rel_error=float(np.mean(rel)),
                       rank=int(rank), restricted=restricted)


def boundary_csv(rows) -> str:
    """CSV of boundary brackets: alpha,F,nu,q,X_lower,X_upper."""
    lines = ["alpha,F,nu,q,X_lower,X_upper"]
    for r in rows:
        lines.append(",".join(f"{float(v):.17g}" for v in (
            r["alpha"], r["F"], r["nu"], r["q"],
            r["X_lower"], r["X_upper"])))
    return "\n".join(lines) + "\n"
