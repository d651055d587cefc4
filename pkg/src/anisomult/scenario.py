"""Configuration-driven pipeline: geometry, functional probe, synthesis, ratio measurement.

A scenario is a JSON document with a ``schema_version`` field. ``run_scenario``
writes per-stage CSV tables, certificates and a summary JSON whose layout is
stable across runs, so two runs with the same config can be diffed.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._numerics import fit_loglog_slope
from .bump import BumpFunction, build_bump, check_pd_properties, check_positive_definite, fourier_leakage
from .engine import ratio_lower_bound
from .errors import AnisomultError, InvalidArgumentError, ValidationError
from .functionals import (
    FUNCTIONALS,
    SCHEDULES,
    BlowupSequence,
    ExponentParameter,
    ProbeConfig,
    probe_unboundedness,
    ray_point,
)
from .geometry import certify_assumptions
from .synthesis import build_test_function, certify_symbol_estimates, synthesize_symbol
from .trig import (
    TestPolynomialPair,
    dirichlet_lp_norm,
    modulated_power_plateau,
    norm_slope,
    parseval_check,
    zm_lower_bound_check,
)
from .weights import order_from_config, profile_from_config

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_DIMENSION = 2


# ---------------------------------------------------------------- configuration


def _parse_p(value, where: str) -> Fraction:
    try:
        p = Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ValidationError(where, f"cannot parse exponent {value!r}") from None
    if p == 2:
        raise ValidationError(where, "p = 2 is excluded (every bounded symbol is an L^2 multiplier)")
    if not p > 1:
        raise ValidationError(where, f"p must exceed 1, got {value!r}")
    return p


def _section(record: dict, key: str) -> dict:
    sub = record.get(key, {})
    if not isinstance(sub, dict):
        raise ValidationError(key, "must be an object")
    return sub


def _number(sub: dict, key: str, where: str, default, *, positive: bool = False, integer: bool = False):
    v = sub.get(key, default)
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if integer:
        ok = ok and float(v).is_integer()
    if not ok or (positive and v <= 0):
        kind = "integer" if integer else "number"
        raise ValidationError(f"{where}.{key}", f"expected a {'positive ' if positive else ''}{kind}, got {v!r}")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with defaults filled in."""

    name: str
    dimension: int
    weights: dict
    order: dict
    p: tuple
    probe: dict
    geometry: dict
    synthesis: dict
    grid: dict
    tolerance: dict
    seed: int = 0
    workers: int = 1
    output: str | None = None
    plot: bool = False
    expect: str | None = None

    def profile(self):
        return profile_from_config(self.weights, self.dimension)

    def order_function(self):
        return order_from_config(self.order, self.dimension)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = [str(v) for v in self.p]
        d["schema_version"] = SCHEMA_VERSION
        return d


PROBE_DEFAULTS = {"functional": "Fp", "schedule": "radial", "t0": 16.0, "growth": 16.0, "stages": 32,
                  "threshold_factor": 1e3, "samples": 20_000, "exponents": None, "direction": None}
GEOMETRY_DEFAULTS = {"c": 0.1, "C_ratio": 10.0, "xi_threshold": 0.0}
SYNTHESIS_DEFAULTS = {"t0": 16.0, "growth": 16.0, "stages": 6, "c1": 1.0, "alpha_max": 2, "C_ratio": 10.0}
GRID_DEFAULTS = {"min_count": 1 << 14, "upsample": 4, "sampled": True}
TOLERANCE_DEFAULTS = {"slope": 0.15, "route": 0.01, "identity": 1e-10, "symbol_spread": 2.0, "min_stages": 5}


def validate_scenario(record: dict) -> Scenario:
    """Check a configuration tree and fill defaults; raises ``ValidationError`` naming the field."""
    if not isinstance(record, dict):
        raise ValidationError("<root>", "configuration must be a JSON object")
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}, got {record.get('schema_version')!r}")
    name = record.get("name")
    if not isinstance(name, str) or not name:
        raise ValidationError("name", "a non-empty string is required")
    n = record.get("dimension", 1)
    if n not in range(1, MAX_DIMENSION + 1):
        raise ValidationError("dimension", f"must be 1 or 2, got {n!r}")

    weights = _section(record, "weights")
    order = _section(record, "order") or {"family": "constant"}
    try:
        profile_from_config(weights, n)
    except (InvalidArgumentError, KeyError, TypeError) as exc:
        raise ValidationError("weights", str(exc)) from None
    try:
        order_from_config(order, n)
    except (InvalidArgumentError, KeyError, TypeError) as exc:
        raise ValidationError("order", str(exc)) from None

    ps = record.get("p")
    if not isinstance(ps, list):
        ps = [ps]
    if not ps or ps == [None]:
        raise ValidationError("p", "at least one exponent is required")
    p = tuple(_parse_p(v, f"p[{i}]") for i, v in enumerate(ps))

    probe = {**PROBE_DEFAULTS, **_section(record, "probe")}
    if probe["functional"] not in FUNCTIONALS:
        raise ValidationError("probe.functional", f"must be one of {FUNCTIONALS}")
    if probe["schedule"] not in SCHEDULES:
        raise ValidationError("probe.schedule", f"must be one of {SCHEDULES}")
    probe["t0"] = _number(probe, "t0", "probe", 16.0, positive=True)
    probe["growth"] = _number(probe, "growth", "probe", 16.0, positive=True)
    if probe["growth"] <= 1:
        raise ValidationError("probe.growth", "must exceed 1")
    probe["stages"] = _number(probe, "stages", "probe", 32, positive=True, integer=True)
    probe["samples"] = _number(probe, "samples", "probe", 20_000, positive=True, integer=True)
    probe["threshold_factor"] = _number(probe, "threshold_factor", "probe", 1e3, positive=True)
    for key in ("exponents", "direction"):
        v = probe[key]
        if v is not None and (not isinstance(v, list) or len(v) != n):
            raise ValidationError(f"probe.{key}", f"needs one entry per axis ({n})")

    geometry = {**GEOMETRY_DEFAULTS, **_section(record, "geometry")}
    for key in ("c", "C_ratio"):
        geometry[key] = _number(geometry, key, "geometry", GEOMETRY_DEFAULTS[key], positive=True)
    geometry["xi_threshold"] = _number(geometry, "xi_threshold", "geometry", 0.0)

    synthesis = {**SYNTHESIS_DEFAULTS, **_section(record, "synthesis")}
    synthesis["t0"] = _number(synthesis, "t0", "synthesis", 16.0, positive=True)
    synthesis["growth"] = _number(synthesis, "growth", "synthesis", 16.0, positive=True)
    synthesis["stages"] = _number(synthesis, "stages", "synthesis", 6, positive=True, integer=True)
    synthesis["c1"] = _number(synthesis, "c1", "synthesis", 1.0, positive=True)
    synthesis["C_ratio"] = _number(synthesis, "C_ratio", "synthesis", 10.0, positive=True)
    synthesis["alpha_max"] = _number(synthesis, "alpha_max", "synthesis", 2, integer=True)
    if synthesis["stages"] < 3:
        raise ValidationError("synthesis.stages", "slope fits need at least 3 stages")
    if synthesis["growth"] <= 1:
        raise ValidationError("synthesis.growth", "must exceed 1")
    if not 0 <= synthesis["alpha_max"] <= 2:
        raise ValidationError("synthesis.alpha_max", "must lie in {0, 1, 2}")

    grid = {**GRID_DEFAULTS, **_section(record, "grid")}
    grid["min_count"] = _number(grid, "min_count", "grid", 1 << 14, positive=True, integer=True)
    grid["upsample"] = _number(grid, "upsample", "grid", 4, positive=True, integer=True)
    if not isinstance(grid["sampled"], bool):
        raise ValidationError("grid.sampled", "must be true or false")

    tolerance = {**TOLERANCE_DEFAULTS, **_section(record, "tolerance")}
    for key in ("slope", "route", "identity", "symbol_spread"):
        tolerance[key] = _number(tolerance, key, "tolerance", TOLERANCE_DEFAULTS[key], positive=True)
    tolerance["min_stages"] = _number(tolerance, "min_stages", "tolerance", 5, positive=True, integer=True)

    expect = record.get("expect")
    if expect not in (None, "bounded", "blow-up"):
        raise ValidationError("expect", "must be 'bounded' or 'blow-up'")
    seed = _number(record, "seed", "<root>", 0, integer=True)
    workers = _number(record, "workers", "<root>", 1, positive=True, integer=True)
    output = record.get("output")
    if output is not None and not isinstance(output, str):
        raise ValidationError("output", "must be a path string")
    plot = record.get("plot", False)
    if not isinstance(plot, bool):
        raise ValidationError("plot", "must be true or false")
    return Scenario(name, n, weights, order, p, probe, geometry, synthesis, grid, tolerance, seed, workers,
                    output, plot, expect)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError("<file>", f"invalid JSON: {exc}") from None


def load_scenario(path) -> Scenario:
    return validate_scenario(load_config(path))


# ---------------------------------------------------------------- bump cache


@functools.lru_cache(maxsize=4)
def cached_bump(h: float | None = None, strict: bool = True, resolution: int = 4096) -> BumpFunction:
    return build_bump(h=h, strict=strict, resolution=resolution)


# ---------------------------------------------------------------- pipeline


class StageError(AnisomultError):
    """A pipeline stage failed; ``record`` is the machine-readable error."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage} failed: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.record = {"stage": stage, "error": type(exc).__name__, "message": str(exc)}


@dataclass
class Verdict:
    scenario: str
    p: str
    p_run: str
    conjugate: bool
    functional_verdict: str
    predicted_exponent: float | None = None
    measured_exponent: float | None = None
    exponent_stderr: float | None = None
    band: list | None = None
    slope_all_stages: float | None = None
    route_gap: float | None = None
    symbol_spread: dict | None = None
    checks: dict = field(default_factory=dict)
    passed: bool = False
    artifacts: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _frac_label(p: Fraction) -> str:
    return str(p).replace("/", "_")


def _stage_points(cfg: dict, n: int, schedule: dict) -> list[np.ndarray]:
    ts = schedule["t0"] * schedule["growth"] ** np.arange(schedule["stages"])
    return [ray_point(cfg["schedule"], float(t), n, cfg["exponents"], cfg["direction"]) for t in ts]


def _synthesize_stage(sc: Scenario, k: int, xi: np.ndarray, p_run: Fraction, bump: BumpFunction) -> dict:
    profile, order = sc.profile(), sc.order_function()
    syn, grid = sc.synthesis, sc.grid
    cert, _, I = certify_assumptions(profile, xi, syn["c1"], syn["C_ratio"], samples=sc.probe["samples"],
                                     seed=sc.seed + 7919 * k, xi_threshold=sc.geometry["xi_threshold"])
    lam = float(order(I.probes(np.linspace(-1.0, 1.0, 9))).min())
    inst = synthesize_symbol(k, xi, I, lam, profile, bump, syn["c1"])
    sym = certify_symbol_estimates(inst, profile, order, alpha_max=syn["alpha_max"])
    pair = TestPolynomialPair(inst.N, bump)
    spec = build_test_function(inst, pair)
    rep = ratio_lower_bound(inst, pair, p_run, spectrum=spec, sampled=grid["sampled"],
                            min_count=grid["min_count"], upsample=grid["upsample"])
    row = rep.row()
    row.update({"xi": xi.tolist(), "prod_N": int(np.prod(inst.N)), "identity_error": spec.identity_error,
                "geometry_passed": cert.passed, "support_checked": inst.support_checked,
                **{f"symbol_{a}": v for a, v in sym.max_ratio.items()}})
    return {"row": row, "geometry": cert.to_dict(), "symbol": sym.to_dict(), "instance": inst.to_dict()}


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([json.dumps(r[k]) if isinstance(r[k], (list, dict)) else repr(r[k])
                        if isinstance(r[k], float) else r[k] for k in keys])


def _plot(path: Path, rows: list[dict]) -> bool:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping plot")
        return False
    ks = [r["k"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(np.log(ks), np.log([r["ratio"] for r in rows]), "o-")
    ax.set_xlabel("log stage")
    ax.set_ylabel("log ratio lower bound")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return True


def _classify_stages(sc: Scenario, stages: list[dict], ep: ExponentParameter) -> tuple[dict, dict]:
    tol = sc.tolerance
    rows = [s["row"] for s in stages]
    prodN = [r["prod_N"] for r in rows]
    growth = [r["ratio"] / r["lambda_k"] for r in rows]
    pred = ep.ratio_exponent
    # top half of the schedule, as for the norm-slope fits; the all-stage slope is recorded alongside
    fit = fit_loglog_slope(prodN, growth)
    fit_all = fit_loglog_slope(prodN, growth, top_half=False)
    gaps = [r["route_gap"] for r in rows if r["route_gap"] == r["route_gap"]]
    sym_keys = [k for k in rows[0] if k.startswith("symbol_")]
    spreads = {}
    for key in sym_keys:
        vals = np.array([r[key] for r in rows])
        spreads[key] = float(vals.max() / vals.min()) if vals.min() > 0 else float("inf")
    checks = {
        "slope_within_tolerance": abs(fit.slope - pred) <= tol["slope"] * pred,
        "monotone": bool(np.all(np.diff([r["ratio"] for r in rows]) > 0)) and len(rows) >= tol["min_stages"],
        "routes_agree": (not gaps) or max(gaps) <= tol["route"],
        "identity": max(r["identity_error"] for r in rows) < tol["identity"],
        "symbol_uniform": all(v < tol["symbol_spread"] for v in spreads.values()),
        "geometry_certified": all(r["geometry_passed"] for r in rows),
    }
    fit_info = {"slope": fit.slope, "stderr": fit.stderr, "predicted": pred, "slope_all_stages": fit_all.slope,
                "band": [fit.slope - 2 * fit.stderr, fit.slope + 2 * fit.stderr],
                "symbol_spread": spreads, "max_route_gap": max(gaps) if gaps else None}
    return checks, fit_info


def _run_one(sc: Scenario, p: Fraction, out: Path) -> Verdict:
    ep = ExponentParameter.of(p)
    run = ep.below_two
    conj = run.p != ep.p
    out.mkdir(parents=True, exist_ok=True)
    verdict = Verdict(sc.name, str(ep.p), str(run.p), conj, "unknown")
    error_path = out / "error.json"
    if error_path.exists():
        error_path.unlink()

    def fail(stage, exc):
        error_path.write_text(json.dumps(StageError(stage, exc).record, indent=2))
        verdict.artifacts.append(str(error_path))
        raise StageError(stage, exc) from exc

    profile, order = sc.profile(), sc.order_function()
    pc, geo = sc.probe, sc.geometry
    try:
        cfg = ProbeConfig(pc["functional"], profile, order, run.p, pc["schedule"], pc["t0"], pc["growth"],
                          pc["stages"], pc["exponents"] and tuple(pc["exponents"]),
                          pc["direction"] and tuple(pc["direction"]), pc["threshold_factor"], pc["samples"],
                          sc.seed, geo["c"], geo["C_ratio"], geo["xi_threshold"])
        probe = probe_unboundedness(cfg)
    except AnisomultError as exc:
        fail("probe", exc)
    (out / "probe.csv").write_text(probe.to_csv())
    (out / "probe.json").write_text(probe.to_json())
    verdict.artifacts += [str(out / "probe.csv"), str(out / "probe.json")]
    verdict.functional_verdict = probe.verdict
    verdict.checks["functional_matches_expectation"] = sc.expect is None or sc.expect == probe.verdict

    if not isinstance(probe, BlowupSequence):
        verdict.passed = all(verdict.checks.values())
        return verdict

    try:
        bump = cached_bump()
    except AnisomultError as exc:
        fail("bump", exc)
    points = _stage_points(pc, sc.dimension, sc.synthesis)
    stages: list = [None] * len(points)

    def work(i):
        return _synthesize_stage(sc, i + 1, points[i], run.p, bump)

    with ThreadPoolExecutor(max_workers=sc.workers) as pool:
        futures = [pool.submit(work, i) for i in range(len(points))]
        for i, fut in enumerate(futures):
            try:
                stages[i] = fut.result()
            except AnisomultError as exc:
                done = [s for s in stages if s is not None]
                _write_csv(out / "stages.csv", [s["row"] for s in done])
                fail(f"synthesis:k={i + 1}", exc)

    rows = [s["row"] for s in stages]
    _write_csv(out / "stages.csv", rows)
    certs = [{"k": s["row"]["k"], "geometry": s["geometry"], "symbol": s["symbol"], "instance": s["instance"]}
             for s in stages]
    (out / "certificates.json").write_text(json.dumps(certs, indent=2))
    verdict.artifacts += [str(out / "stages.csv"), str(out / "certificates.json")]
    try:
        checks, info = _classify_stages(sc, stages, run)
    except AnisomultError as exc:
        fail("slope-fit", exc)
    verdict.checks.update(checks)
    verdict.predicted_exponent = info["predicted"]
    verdict.measured_exponent = info["slope"]
    verdict.exponent_stderr = info["stderr"]
    verdict.band = info["band"]
    verdict.slope_all_stages = info["slope_all_stages"]
    verdict.route_gap = info["max_route_gap"]
    verdict.symbol_spread = info["symbol_spread"]
    verdict.passed = all(verdict.checks.values())
    if sc.plot and _plot(out / "ratio.png", rows):
        verdict.artifacts.append(str(out / "ratio.png"))
    return verdict


@dataclass
class RunSummary:
    scenario: dict
    verdicts: list

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "scenario": self.scenario,
                "verdicts": [v.to_dict() for v in self.verdicts], "passed": self.passed}


def run_scenario(sc: Scenario, out_dir=None) -> RunSummary:
    """Run every exponent of the scenario; p > 2 runs at its conjugate and is labeled.

    Writes ``summary.json`` in ``out_dir`` (default: the configured output,
    else ``runs/<name>``). A stage error aborts with ``StageError``; artifacts
    written so far, including ``error.json``, are kept.
    """
    out = Path(out_dir or sc.output or os.path.join("runs", sc.name))
    out.mkdir(parents=True, exist_ok=True)
    verdicts = []
    for p in sc.p:
        sub = out if len(sc.p) == 1 else out / f"p_{_frac_label(p)}"
        verdicts.append(_run_one(sc, p, sub))
    summary = RunSummary(sc.to_dict(), verdicts)
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2))
    return summary


# ---------------------------------------------------------------- appendix checks


APPENDIX_DEFAULTS = {
    "bump": {"h": None, "strict": True, "resolution": 4096},
    "dirichlet": {"p": ["4/3", "3", "4"], "orders": [8, 16, 32, 64, 128, 256, 512], "band": 0.10},
    "lower_bound": {"orders": [8, 32]},
    "slopes": {"p": "4/3", "orders": [2, 4, 8, 16, 32, 64, 128]},
    "plateau": {"p": "3", "orders": [4, 8, 16, 32, 64, 128, 256], "band": 0.15},
    "parseval": {"orders": [4, 16]},
    "gram": {"families": 50, "size": 40, "spread": 20.0, "seed": 0},
}


def validate_appendices(record: dict) -> dict:
    if not isinstance(record, dict):
        raise ValidationError("<root>", "configuration must be a JSON object")
    if record.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}")
    merged = {"name": record.get("name", "appendices"), "output": record.get("output")}
    for key, dflt in APPENDIX_DEFAULTS.items():
        merged[key] = {**dflt, **_section(record, key)}
    for key in ("dirichlet", "slopes", "plateau"):
        orders = merged[key]["orders"]
        if not isinstance(orders, list) or not all(isinstance(v, int) and v >= 1 for v in orders):
            raise ValidationError(f"{key}.orders", "must be a list of positive integers")
        if len(orders) < 3:
            raise ValidationError(f"{key}.orders", f"slope and plateau fits need at least 3 orders, got {len(orders)}")
    for i, v in enumerate(merged["dirichlet"]["p"]):
        _parse_p(v, f"dirichlet.p[{i}]")
    _parse_p(merged["slopes"]["p"], "slopes.p")
    _parse_p(merged["plateau"]["p"], "plateau.p")
    h = merged["bump"]["h"]
    if h is not None and not (isinstance(h, (int, float)) and h > 0):
        raise ValidationError("bump.h", "must be a positive number or null")
    return merged


@dataclass
class CheckReport:
    name: str
    condition: str
    passed: bool
    data: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name: str, condition: str, fn) -> CheckReport:
    try:
        passed, data, detail = fn()
        return CheckReport(name, condition, bool(passed), data, detail)
    except AnisomultError as exc:
        return CheckReport(name, condition, False, error=f"{type(exc).__name__}: {exc}")


def _dirichlet_check(cfg: dict):
    rows, ok = [], True
    for p in cfg["p"]:
        pf = float(Fraction(str(p)))
        ratios = [dirichlet_lp_norm(M, pf) / M ** (1.0 - 1.0 / pf) for M in cfg["orders"]]
        tail = np.array(ratios[-3:])
        spread = float((tail.max() - tail.min()) / (tail.max() + tail.min()))
        ok = ok and spread < cfg["band"]
        rows += [{"p": str(p), "M": M, "ratio": r, "tail_spread": spread} for M, r in zip(cfg["orders"], ratios)]
    return ok, rows, {}


def _overlap_check(bump: BumpFunction):
    rep = bump.overlap
    return rep.bound <= 1.0 / 3.0, [], {"grid_max": rep.grid_max, "tail": rep.tail, "bound": rep.bound, "h": bump.h,
                                        "A": bump.A}


def _lower_bound_check(bump: BumpFunction, cfg: dict):
    reps = [zm_lower_bound_check(bump, M) for M in cfg["orders"]]
    rows = [asdict(r) for r in reps]
    detail = {}
    ok = all(r.passed for r in reps)
    if not ok:
        detail["cause"] = (f"lattice overlap condition violated: grid-plus-tail sum {bump.overlap.bound:.4g} "
                           f"exceeds 1/3 at scale h={bump.h:g} (certified scale {bump.A:.4g})")
    return ok, rows, detail


def _slopes_check(bump: BumpFunction, cfg: dict):
    p = float(Fraction(str(cfg["p"])))
    reps = [norm_slope(bump, cfg["orders"], p, which) for which in ("h", "g")]
    rows = reps[0].rows() + reps[1].rows()
    for r, which in zip(rows, ["h"] * len(cfg["orders"]) + ["g"] * len(cfg["orders"])):
        r["which"] = which
    return all(r.passed for r in reps), rows, {"h_slope": reps[0].slope, "g_slope": reps[1].slope}


def _plateau_check(bump: BumpFunction, cfg: dict):
    p = float(Fraction(str(cfg["p"])))
    rep = modulated_power_plateau(bump, cfg["orders"], p, cfg["band"])
    rows = [{"M": M, "ratio": r} for M, r in zip(rep.orders, rep.ratios)]
    return rep.passed, rows, {"spread": rep.spread}


def _parseval(bump: BumpFunction, cfg: dict):
    rows = []
    for M in cfg["orders"]:
        a, b = parseval_check(bump, M)
        rows.append({"M": M, "space": a, "spectral": b, "relative": abs(a - b) / b})
    return all(r["relative"] < 1e-8 for r in rows), rows, {}


def _gram_check(bump: BumpFunction, cfg: dict):
    rng = np.random.default_rng(cfg["seed"])
    rows, ok = [], True
    kernel = bump.autocorr
    for i in range(cfg["families"]):
        pts = rng.uniform(-1.0, 1.0, cfg["size"]) * kernel.support * rng.uniform(0.05, 1.0)
        g = check_positive_definite(kernel, pts)
        props = check_pd_properties(kernel, pts)
        ok = ok and g.passed and props.passed
        rows.append({"family": i, "min_eigenvalue": g.min_eigenvalue, "properties": props.passed})
    return ok, rows, {}


def _leakage_check(bump: BumpFunction):
    rep = fourier_leakage(bump)
    return rep.passed, [], {"relative": rep.relative, "samples": rep.samples}


def verify_appendices(record: dict, out_dir=None, workers: int = 1) -> list[CheckReport]:
    """Run the auxiliary bump and trigonometric-polynomial checks; one JSON report (plus CSV table) per check."""
    cfg = validate_appendices(record)
    bc = cfg["bump"]
    bump = cached_bump(None if bc["h"] is None else float(bc["h"]), bool(bc["strict"]), int(bc["resolution"]))
    jobs = [
        ("dirichlet_norm_law", "||D_M||_p / M^(1-1/p) varies by < band over the last three doublings",
         lambda: _dirichlet_check(cfg["dirichlet"])),
        ("lattice_overlap", "grid-plus-tail lattice overlap sum <= 1/3", lambda: _overlap_check(bump)),
        ("fourier_support", "relative |f_hat| < 1e-12 outside [-pi r, pi r]", lambda: _leakage_check(bump)),
        ("z_lower_bound", "|z_M| >= 1/2 within delta of every integer node",
         lambda: _lower_bound_check(bump, cfg["lower_bound"])),
        ("test_polynomial_slopes", "slope ||h_N||_p = 1/p +- 0.05; slope ||g_N||_p <= 1 - 1/p + 0.05",
         lambda: _slopes_check(bump, cfg["slopes"])),
        ("modulated_power_plateau", "int f^p |D_M(L t)|^p / M^(p-1) within band of its mean",
         lambda: _plateau_check(bump, cfg["plateau"])),
        ("parseval", "space and spectral L^2 norms of z_M agree to 1e-8", lambda: _parseval(bump, cfg["parseval"])),
        ("positive_definite", "Gram matrices of the autocorrelation have min eigenvalue >= -1e-10",
         lambda: _gram_check(bump, cfg["gram"])),
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda j: _check(*j), jobs))
    out = Path(out_dir or cfg["output"] or os.path.join("runs", cfg["name"]))
    out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        (out / f"{rep.name}.json").write_text(json.dumps(rep.to_dict(), indent=2))
        if rep.data:
            _write_csv(out / f"{rep.name}.csv", rep.data)
    index = {"schema_version": SCHEMA_VERSION, "bump": bump.summary(),
             "checks": {r.name: r.passed for r in reports}, "passed": all(r.passed for r in reports)}
    (out / "appendices.json").write_text(json.dumps(index, indent=2))
    return reports


def render_report(run_dir) -> tuple[str, bool]:
    """Text table for a run directory holding ``summary.json`` or ``appendices.json``."""
    run_dir = Path(run_dir)
    buf = io.StringIO()
    if (run_dir / "summary.json").exists():
        data = json.loads((run_dir / "summary.json").read_text())
        buf.write(f"scenario {data['scenario']['name']}\n")
        for v in data["verdicts"]:
            label = f"p={v['p']}" + (f" (run at conjugate {v['p_run']})" if v["conjugate"] else "")
            line = f"  {label}: functional {v['functional_verdict']}"
            if v["measured_exponent"] is not None:
                line += f", exponent {v['measured_exponent']:.4f} (predicted {v['predicted_exponent']:.4f})"
            buf.write(line + f" -> {'PASS' if v['passed'] else 'FAIL'}\n")
            for name, ok in v["checks"].items():
                buf.write(f"    {name}: {'ok' if ok else 'FAILED'}\n")
        return buf.getvalue(), bool(data["passed"])
    if (run_dir / "appendices.json").exists():
        data = json.loads((run_dir / "appendices.json").read_text())
        for name, ok in data["checks"].items():
            buf.write(f"{name}: {'PASS' if ok else 'FAIL'}\n")
            rep = json.loads((run_dir / f"{name}.json").read_text())
            if rep.get("error"):
                buf.write(f"  error: {rep['error']}\n")
            if "cause" in rep.get("detail", {}):
                buf.write(f"  cause: {rep['detail']['cause']}\n")
        return buf.getvalue(), bool(data["passed"])
    raise ValidationError("run-dir", f"no summary.json or appendices.json in {run_dir}")
