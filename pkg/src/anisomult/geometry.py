"""Sublevel sets ``S(xi) = {eta : psi_j(eta) <= psi_j(xi) for all j}``, their
Monte Carlo measure, and origin-symmetric boxes inscribed in them."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AssumptionFailure, CertificationImpossible, InvalidArgumentError, PreconditionViolation
from .weights import WeightProfile, as_points

SHELL_OFFSET = 2 ** 32  # stream offset for boundary-shell samples
SHELL_THRESHOLD = 1e-3
SHELL_THICKNESS = 0.01
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class SublevelSet:
    profile: WeightProfile
    anchor: np.ndarray
    level: np.ndarray  # psi(anchor)

    @classmethod
    def at(cls, profile: WeightProfile, xi) -> "SublevelSet":
        x = as_points(xi, profile.dimension)[0]
        return cls(profile, x, profile(x)[0])

    @property
    def dimension(self) -> int:
        return self.profile.dimension

    def contains(self, eta) -> np.ndarray:
        pts = as_points(eta, self.dimension)
        return np.all(self.profile(pts) <= self.level, axis=-1)


def membership(S: SublevelSet, eta) -> bool:
    return bool(S.contains(eta)[0])


@dataclass(frozen=True)
class MeasureEstimate:
    value: float | None  # None when unbounded
    unbounded: bool
    stderr: float
    samples: int
    hits: int
    box: np.ndarray
    seed: int
    shell_fraction: float
    shell_samples: int
    members: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "value": self.value, "unbounded": self.unbounded, "stderr": self.stderr, "samples": self.samples,
            "hits": self.hits, "box": self.box.tolist(), "seed": self.seed,
            "shell_fraction": self.shell_fraction, "shell_samples": self.shell_samples,
        }


def _check_box(box, xi: np.ndarray) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.ndim == 1:
        b = np.stack([-b, b], axis=-1)
    if b.shape != (xi.size, 2) or not np.all(b[:, 1] > b[:, 0]):
        raise InvalidArgumentError(f"degenerate bounding box {b.tolist()}")
    if np.any(xi < b[:, 0]) or np.any(xi > b[:, 1]):
        raise InvalidArgumentError("bounding box must contain the anchor")
    return b


def _chunk_hits(S: SublevelSet, box: np.ndarray, count: int, seed: int, keep: bool):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(box[:, 0], box[:, 1], size=(count, S.dimension))
    inside = S.contains(pts)
    return int(inside.sum()), (pts[inside] if keep else None)


def _shell_chunk(S: SublevelSet, box: np.ndarray, count: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    n = S.dimension
    pts = rng.uniform(box[:, 0], box[:, 1], size=(count, n))
    axis = rng.integers(0, n, size=count)
    side = rng.integers(0, 2, size=count)
    w = box[axis, 1] - box[axis, 0]
    depth = rng.uniform(0.0, SHELL_THICKNESS, size=count) * w
    pts[np.arange(count), axis] = np.where(side == 1, box[axis, 1] - depth, box[axis, 0] + depth)
    return int(S.contains(pts).sum())


def _axis_extent(S: SublevelSet, j: int, start: float, limit: int = 64) -> float | None:
    """First ``s = start * 2^k`` with ``s e_j`` outside ``S``; ``None`` if none is found."""
    e = np.zeros(S.dimension)
    e[j] = 1.0
    s = start
    for _ in range(limit):
        if not (S.contains(s * e)[0] or S.contains(-s * e)[0]):
            return s
        s *= 2.0
    return None


def _initial_half_widths(S: SublevelSet) -> np.ndarray:
    """Per-axis box half-widths from the axis extents of ``S``.

    For coordinate-monotone profiles ``S`` lies inside the box spanned by its
    axis extents; otherwise the boundary-shell test and the doubling loop
    enlarge the box.
    """
    xi = S.anchor
    fallback = 1.25 * (np.max(np.abs(xi)) + np.abs(xi) + S.level) + 1.0
    half = np.empty(S.dimension)
    for j in range(S.dimension):
        ext = _axis_extent(S, j, max(abs(xi[j]), 1e-3))
        half[j] = fallback[j] if ext is None else 1.25 * max(ext, abs(xi[j])) + 1e-3
    return half


def estimate_measure(
    S: SublevelSet,
    box=None,
    samples: int = 100_000,
    seed: int = 0,
    *,
    chunk: int = 1 << 16,
    keep_members: bool = True,
    workers: int = 1,
    max_doublings: int = 12,
) -> MeasureEstimate:
    """Monte Carlo estimate of ``mu(S cap box)``.

    Chunk ``i`` draws from ``default_rng(seed + i)``; the boundary shell (1% of
    each side's width) uses ``default_rng(seed + 2**32 + i)``. If at least 0.1%
    of shell samples are members the set is flagged unbounded. With ``box=None``
    a box around the anchor is doubled until the shell test clears.
    """
    if samples < MIN_SAMPLES:
        raise InvalidArgumentError(f"need at least {MIN_SAMPLES} samples")
    xi = S.anchor
    if box is None:
        half = _initial_half_widths(S)
        for _ in range(max_doublings):
            est = estimate_measure(S, half, samples, seed, chunk=chunk, keep_members=keep_members, workers=workers)
            if not est.unbounded:
                return est
            half = 2.0 * half
        return est
    b = _check_box(box, xi)
    vol = float(np.prod(b[:, 1] - b[:, 0]))
    sizes = [min(chunk, samples - i) for i in range(0, samples, chunk)]
    shell_n = max(MIN_SAMPLES, samples // 10)
    shell_sizes = [min(chunk, shell_n - i) for i in range(0, shell_n, chunk)]

    def run(i):
        return _chunk_hits(S, b, sizes[i], seed + i, keep_members)

    def run_shell(i):
        return _shell_chunk(S, b, shell_sizes[i], seed + SHELL_OFFSET + i)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(len(sizes))))
            shell = list(ex.map(run_shell, range(len(shell_sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
        shell = [run_shell(i) for i in range(len(shell_sizes))]
    hits = sum(h for h, _ in parts)
    members = np.concatenate([m for _, m in parts]) if keep_members else None
    frac = sum(shell) / shell_n
    q = hits / samples
    unbounded = frac >= SHELL_THRESHOLD
    return MeasureEstimate(
        None if unbounded else vol * q, bool(unbounded), vol * float(np.sqrt(q * (1 - q) / samples)),
        samples, hits, b, seed, float(frac), shell_n, members,
    )


@dataclass(frozen=True)
class InscribedInterval:
    half_lengths: np.ndarray
    anchor: np.ndarray
    c: float
    unbounded_direction: bool = False

    @property
    def measure(self) -> float:
        return float(np.prod(2.0 * self.half_lengths))

    def probes(self, levels=(-1.0, -0.5, 0.0, 0.5, 1.0)) -> np.ndarray:
        grid = itertools.product(levels, repeat=self.half_lengths.size)
        return np.array(list(grid)) * self.half_lengths

    def corners(self) -> np.ndarray:
        return self.probes((-1.0, 1.0))

    def sample(self, count: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(-self.half_lengths, self.half_lengths, size=(count, self.half_lengths.size))


def construct_interval(profile: WeightProfile, xi, c: float, rtol: float = 1e-6, expand_limit: int = 60) -> InscribedInterval:
    """Bisection on ``t`` for the box ``|eta_j| <= t psi_j(xi)``; probes are the
    points ``{-1, -1/2, 0, 1/2, 1}^n`` scaled by the half-lengths.

    If no failing ``t`` is found within ``2**expand_limit * c`` the set is taken
    to be unbounded along the profile direction and ``l_j = c psi_j(xi)``.
    """
    if c <= 0:
        raise InvalidArgumentError("inscription constant must be positive")
    S = SublevelSet.at(profile, xi)
    direction = S.level
    unit = np.array(list(itertools.product((-1.0, -0.5, 0.0, 0.5, 1.0), repeat=S.dimension)))

    def ok(t):
        return bool(np.all(S.contains(unit * (t * direction))))

    if not ok(c):
        raise AssumptionFailure(f"no inscribed box with l_j >= {c} psi_j(xi) at xi={S.anchor.tolist()}")
    lo, hi = c, 2.0 * c
    for _ in range(expand_limit):
        if not ok(hi):
            break
        lo, hi = hi, 2.0 * hi
    else:
        return InscribedInterval(c * direction, S.anchor, c, True)
    while (hi - lo) > rtol * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return InscribedInterval(lo * direction, S.anchor, c)


@dataclass(frozen=True)
class GeometryCertificate:
    anchor: list
    c: float
    C_ratio: float
    xi_threshold: float
    half_lengths: list
    interval_measure: float
    measure: float
    measure_stderr: float
    ratio: float
    ratio_stderr: float
    membership_pass_rate: float
    samples: int
    seed: int
    box: list
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def certify_assumptions(
    profile: WeightProfile,
    xi,
    c: float,
    C_ratio: float,
    *,
    xi_threshold: float = 0.0,
    samples: int = 100_000,
    seed: int = 0,
    box=None,
    check_samples: int = 2000,
    measure: MeasureEstimate | None = None,
    interval: InscribedInterval | None = None,
) -> tuple[GeometryCertificate, MeasureEstimate, InscribedInterval]:
    """Check that a box with ``l_j >= c psi_j(xi)`` sits inside ``S(xi)`` and that
    ``mu(S) <= C_ratio mu(I)``.

    The ratio test allows three Monte Carlo standard errors, so an exact
    ratio of 1 passes ``C_ratio = 1``.
    """
    x = as_points(xi, profile.dimension)[0]
    if float(np.linalg.norm(x)) < xi_threshold:
        raise PreconditionViolation(f"|xi| = {np.linalg.norm(x):.4g} below threshold {xi_threshold}")
    S = SublevelSet.at(profile, x)
    est = measure or estimate_measure(S, box, samples, seed)
    if est.unbounded:
        raise CertificationImpossible(f"S(xi) is unbounded at xi={x.tolist()}")
    I = interval or construct_interval(profile, x, c)
    fresh = I.sample(check_samples, seed + 1)
    rate = float(np.mean(S.contains(np.vstack([fresh, I.probes()]))))
    ratio = est.value / I.measure
    rse = est.stderr / I.measure
    ok = rate == 1.0 and ratio <= C_ratio + 3.0 * rse
    cert = GeometryCertificate(
        x.tolist(), float(c), float(C_ratio), float(xi_threshold), I.half_lengths.tolist(), I.measure,
        float(est.value), est.stderr, float(ratio), float(rse), rate, est.samples, seed, est.box.tolist(), bool(ok),
    )
    return cert, est, I
