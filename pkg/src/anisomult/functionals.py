"""Boundedness functionals and blow-up searches along probe rays.

Every functional depends on ``p`` only through ``e = |1/p - 1/2|``, stored as
an exact fraction so that ``p`` and its conjugate give bit-identical output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import (
    AssumptionFailure,
    CertificationImpossible,
    EvaluationImpossible,
    InvalidArgumentError,
    InvalidExponentError,
    NoDataError,
    PreconditionViolation,
    ProfileViolationError,
)
from .geometry import InscribedInterval, MeasureEstimate, SublevelSet, certify_assumptions, estimate_measure
from .weights import OrderFunction, WeightProfile, as_points

log = logging.getLogger(__name__)

MAX_STAGES = 200


@dataclass(frozen=True)
class ExponentParameter:
    p: Fraction

    def __post_init__(self):
        if self.p <= 1:
            raise InvalidExponentError(f"p must exceed 1, got {self.p}")
        if self.p == 2:
            raise InvalidExponentError("p = 2 is degenerate")

    @classmethod
    def of(cls, p) -> "ExponentParameter":
        if isinstance(p, ExponentParameter):
            return p
        if isinstance(p, str):
            q = Fraction(p)
        elif isinstance(p, Fraction):
            q = p
        elif isinstance(p, (int, np.integer)):
            q = Fraction(int(p))
        else:
            if not np.isfinite(p):
                raise InvalidExponentError("p must be finite")
            q = Fraction(float(p)).limit_denominator(10 ** 6)
        return cls(q)

    @property
    def e(self) -> Fraction:
        return abs(1 / self.p - Fraction(1, 2))

    @property
    def deviation(self) -> float:
        return float(self.e)

    @property
    def value(self) -> float:
        return float(self.p)

    def conjugate(self) -> "ExponentParameter":
        return ExponentParameter(self.p / (self.p - 1))

    @property
    def below_two(self) -> "ExponentParameter":
        """The member of ``{p, p'}`` lying in ``(1, 2)``."""
        return self if self.p < 2 else self.conjugate()

    @property
    def ratio_exponent(self) -> float:
        """Predicted growth exponent ``2/p - 1`` of the counterexample ratio (for ``p < 2``)."""
        return float(2 / self.below_two.p - 1)


# ---------------------------------------------------------------- functionals


@dataclass(frozen=True)
class FpEvaluation:
    value: float
    inf_order: float
    measure: float
    psi: np.ndarray
    e: Fraction
    estimate: MeasureEstimate = field(repr=False)
    inf_points: int = 0


def _inf_over_set(order: OrderFunction, xi: np.ndarray, members: np.ndarray | None,
                  interval: InscribedInterval | None) -> tuple[float, int]:
    pts = [xi[None, :]]
    if members is not None and len(members):
        pts.append(members)
    if interval is not None:
        pts.append(interval.probes((-1.0, 0.0, 1.0)))
    allp = np.vstack(pts)
    return float(order(allp).min()), len(allp)


def evaluate_Fp_detailed(
    profile: WeightProfile,
    order: OrderFunction,
    xi,
    p,
    *,
    samples: int = 100_000,
    seed: int = 0,
    box=None,
    interval: InscribedInterval | None = None,
    xi_threshold: float = 0.0,
    measure: MeasureEstimate | None = None,
) -> FpEvaluation:
    """``inf_S lam * (mu(S) prod psi_j(xi)^-1)^e`` with ``mu(S)`` by Monte Carlo.

    The infimum is taken over the Monte Carlo members, the anchor, and the
    corner/center probes of ``interval`` when supplied.
    """
    ep = ExponentParameter.of(p)
    x = as_points(xi, profile.dimension)[0]
    if float(np.linalg.norm(x)) < xi_threshold:
        raise InvalidArgumentError(f"|xi| below threshold {xi_threshold}")
    S = SublevelSet.at(profile, x)
    est = measure or estimate_measure(S, box, samples, seed)
    if est.unbounded:
        raise EvaluationImpossible(f"S(xi) is unbounded at xi={x.tolist()}")
    inf_lam, npts = _inf_over_set(order, x, est.members, interval)
    psi = S.level
    geo = est.value / float(np.prod(psi))
    val = inf_lam * geo ** float(ep.e)
    return FpEvaluation(float(val), inf_lam, float(est.value), psi, ep.e, est, npts)


def evaluate_Fp(profile, order, xi, p, **kw) -> float:
    return evaluate_Fp_detailed(profile, order, xi, p, **kw).value


def evaluate_Gp(Psi: Callable, Lam: Callable, t: float, p, n: int) -> float:
    """``Lam(t) (t / Psi(t))^(n e)`` for radial profiles."""
    ep = ExponentParameter.of(p)
    if t <= 0:
        raise InvalidArgumentError("t must be positive")
    ps = float(np.asarray(Psi(np.asarray(t, dtype=float))))
    if not ps > 0:
        raise ProfileViolationError(f"Psi({t}) = {ps} is not positive")
    return float(np.asarray(Lam(np.asarray(t, dtype=float)))) * (t / ps) ** (n * float(ep.e))


def evaluate_Fp_star(profile: WeightProfile, order: OrderFunction, xi, p) -> float:
    """``lam(xi) (prod |xi_j| / psi_j(xi))^e``; zero when some ``xi_j = 0``."""
    ep = ExponentParameter.of(p)
    x = as_points(xi, profile.dimension)[0]
    psi = profile(x)[0]
    lam = float(order(x)[0])
    prod = float(np.prod(np.abs(x) / psi))
    return lam * prod ** float(ep.e)


def evaluate_delta_k(order: OrderFunction, interval: InscribedInterval, profile: WeightProfile, xi, p,
                     grid: int = 9) -> float:
    """``inf_I lam * (mu(I) prod psi_j(xi)^-1)^e`` with the infimum over a tensor grid
    on ``I`` that includes its corners."""
    ep = ExponentParameter.of(p)
    x = as_points(xi, profile.dimension)[0]
    levels = np.linspace(-1.0, 1.0, grid)
    inf_lam = float(order(interval.probes(levels)).min())
    psi = profile(x)[0]
    return inf_lam * (interval.measure / float(np.prod(psi))) ** float(ep.e)


# ---------------------------------------------------------------- probes


FUNCTIONALS = ("Fp", "Gp", "Fp_star", "delta_k")
SCHEDULES = ("radial", "coordinate", "user")


@dataclass
class ProbeConfig:
    functional: str
    profile: WeightProfile
    order: OrderFunction
    p: object
    schedule: str = "radial"
    t0: float = 1.0
    growth: float = 2.0
    stages: int = 20
    exponents: tuple | None = None  # coordinate ray xi_j = t^(L_j)
    direction: tuple | None = None  # user ray xi = t * direction
    threshold_factor: float = 1e3
    samples: int = 20_000
    seed: int = 0
    c: float = 0.1
    C_ratio: float = 10.0
    xi_threshold: float = 0.0

    def __post_init__(self):
        if self.functional not in FUNCTIONALS:
            raise InvalidArgumentError(f"unknown functional {self.functional!r}")
        if self.schedule not in SCHEDULES:
            raise InvalidArgumentError(f"unknown schedule {self.schedule!r}")
        if not 1 <= self.stages <= MAX_STAGES:
            raise InvalidArgumentError(f"stages must be in [1, {MAX_STAGES}]")
        if self.growth <= 1 or self.t0 <= 0:
            raise InvalidArgumentError("geometric schedule needs t0 > 0 and growth > 1")

    def ts(self) -> np.ndarray:
        return float(self.t0) * float(self.growth) ** np.arange(self.stages, dtype=float)

    def point(self, t: float) -> np.ndarray:
        return ray_point(self.schedule, t, self.profile.dimension, self.exponents, self.direction)


def ray_point(schedule: str, t: float, n: int, exponents=None, direction=None) -> np.ndarray:
    """Point at parameter ``t`` on a radial, coordinate (``xi_j = t^(L_j)``) or user ray."""
    if schedule == "coordinate":
        L = np.asarray(exponents if exponents is not None else np.ones(n), dtype=float)
        return t ** L
    d = np.asarray(direction if direction is not None else np.eye(n)[0], dtype=float)
    if schedule == "radial":
        d = d / np.linalg.norm(d)
    return t * d


@dataclass(frozen=True)
class Stage:
    k: int
    t: float
    xi: np.ndarray
    value: float
    inf_order: float | None = None
    half_lengths: np.ndarray | None = None
    certificate: dict | None = None

    def row(self) -> dict:
        return {
            "k": self.k, "t": self.t, "xi": self.xi.tolist(), "value": self.value, "lambda_k": self.inf_order,
            "l": None if self.half_lengths is None else self.half_lengths.tolist(),
            "certified": None if self.certificate is None else self.certificate.get("passed"),
        }


class _Serializable:
    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["k", "t", "xi", "value", "lambda_k", "l", "certified"])
        for s in self.stages:
            r = s.row()
            w.writerow([r["k"], repr(r["t"]), json.dumps(r["xi"]), repr(r["value"]), r["lambda_k"],
                        json.dumps(r["l"]), r["certified"]])
        return buf.getvalue()


@dataclass(frozen=True)
class BlowupSequence(_Serializable):
    functional: str
    stages: list
    threshold: float
    skipped: list = field(default_factory=list)
    probed: list = field(default_factory=list)
    verdict: str = "blow-up"

    def values(self) -> np.ndarray:
        return np.array([s.value for s in self.stages])

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "functional": self.functional, "threshold": self.threshold,
                "stages": [s.row() for s in self.stages], "skipped": self.skipped}


@dataclass(frozen=True)
class BoundedVerdict(_Serializable):
    functional: str
    sup: float
    first: float
    stages: list
    skipped: list = field(default_factory=list)
    verdict: str = "bounded"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "functional": self.functional, "sup": self.sup, "first": self.first,
                "stages": [s.row() for s in self.stages], "skipped": self.skipped}


def _evaluate_stage(cfg: ProbeConfig, k: int, t: float) -> Stage:
    xi = cfg.point(t)
    ep = ExponentParameter.of(cfg.p)
    if cfg.functional == "Gp":
        Psi, Lam = cfg.profile.radial, cfg.order.radial
        if Psi is None or Lam is None:
            raise InvalidArgumentError("Gp needs radial profile and order")
        r = float(np.linalg.norm(xi))
        return Stage(k, t, xi, evaluate_Gp(Psi, Lam, r, ep, cfg.profile.dimension))
    if cfg.functional == "Fp_star":
        return Stage(k, t, xi, evaluate_Fp_star(cfg.profile, cfg.order, xi, ep))
    seed = cfg.seed + 1000 * k
    cert, est, I = certify_assumptions(cfg.profile, xi, cfg.c, cfg.C_ratio, xi_threshold=cfg.xi_threshold,
                                       samples=cfg.samples, seed=seed)
    if cfg.functional == "delta_k":
        val = evaluate_delta_k(cfg.order, I, cfg.profile, xi, ep)
        inf_lam = float(cfg.order(I.probes(np.linspace(-1, 1, 9))).min())
    else:
        ev = evaluate_Fp_detailed(cfg.profile, cfg.order, xi, ep, measure=est, interval=I)
        val, inf_lam = ev.value, ev.inf_order
    return Stage(k, t, xi, val, inf_lam, I.half_lengths, cert.to_dict())


def probe_unboundedness(cfg: ProbeConfig) -> BlowupSequence | BoundedVerdict:
    """Evaluate the functional along a geometric schedule and classify.

    The reported sequence is the record-breaking (strictly increasing)
    subsequence; blow-up is declared when its last value exceeds
    ``threshold_factor`` times the first evaluated value.
    """
    done, skipped = [], []
    for k, t in enumerate(cfg.ts()):
        try:
            done.append(_evaluate_stage(cfg, k, float(t)))
        except (AssumptionFailure, CertificationImpossible, EvaluationImpossible, PreconditionViolation) as exc:
            log.info("stage %d skipped: %s", k, exc)
            skipped.append({"k": k, "t": float(t), "error": type(exc).__name__, "message": str(exc)})
    if not done:
        raise NoDataError("every probe failed geometry certification")
    first = done[0].value
    record, best = [], -np.inf
    for s in done:
        if s.value > best:
            record.append(s)
            best = s.value
    threshold = cfg.threshold_factor * first
    if first > 0 and record[-1].value > threshold:
        return BlowupSequence(cfg.functional, record, threshold, skipped, done)
    return BoundedVerdict(cfg.functional, float(max(s.value for s in done)), first, done, skipped)
