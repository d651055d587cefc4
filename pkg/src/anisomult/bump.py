"""Band-limited bump functions built from a compactly supported seed.

The construction: take a smooth non-negative seed ``chi`` on ``[-s, s]``, form
``f_tilde = |chi_hat|^2 / chi_hat(0)^2`` (whose transform is a multiple of the
autocorrelation of ``chi``, hence compactly supported), then dilate
``f(t) = f_tilde(h t)`` with ``h`` large enough that integer translates of
``f`` barely overlap.

Fourier convention: ``u_hat(xi) = int exp(-i x xi) u(x) dx``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.optimize
from scipy.special import polygamma

from ._numerics import ChebyshevTable, next_pow2
from .errors import (
    ConstructionFailure,
    EvaluationInconsistency,
    InvalidArgumentError,
    InvariantViolation,
    ResolutionError,
)

PLATEAU_LEVEL = 8.0 / 9.0
OVERLAP_BOUND = 1.0 / 3.0
OVERLAP_SLACK = 0.05
MIN_RESOLUTION = 1024


@dataclass(frozen=True)
class SeedCutoff:
    func: Callable[[np.ndarray], np.ndarray]
    support: float
    name: str = "custom"

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        inside = np.abs(t) < self.support
        out[inside] = self.func(t[inside])
        return out


def _mollifier(t: np.ndarray) -> np.ndarray:
    return np.exp(-1.0 / (1.0 - t * t))


def standard_mollifier(support: float = 1.0) -> SeedCutoff:
    """``exp(-1 / (1 - (t/s)^2))`` on ``(-s, s)``."""
    s = float(support)
    if s <= 0:
        raise InvalidArgumentError("support radius must be positive")
    if s == 1.0:
        return SeedCutoff(_mollifier, 1.0, "standard-mollifier")
    return SeedCutoff(lambda t: _mollifier(t / s), s, f"standard-mollifier(s={s:g})")


def _midpoint_nodes(s: float, n: int) -> tuple[np.ndarray, float]:
    d = 2.0 * s / n
    return -s + (np.arange(n) + 0.5) * d, d


@dataclass(frozen=True)
class Autocorrelation:
    """``lam(eta) = int chi(x + eta/2) chi(x - eta/2) dx`` by the midpoint rule.

    The symmetric form makes evenness exact and the support ``[-2s, 2s]``
    exact whenever the seed vanishes outside ``[-s, s]``.
    """

    seed: SeedCutoff
    nodes: np.ndarray
    step: float

    @property
    def support(self) -> float:
        return 2.0 * self.seed.support

    def __call__(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        flat = eta.ravel()
        out = np.empty(flat.shape)
        x = self.nodes
        for i in range(0, flat.size, 256):
            e = 0.5 * flat[i:i + 256, None]
            out[i:i + 256] = self.step * np.sum(self.seed(x[None, :] + e) * self.seed(x[None, :] - e), axis=1)
        return out.reshape(eta.shape)


def autocorrelate(seed: SeedCutoff, resolution: int = 4096) -> Autocorrelation:
    if resolution < MIN_RESOLUTION:
        raise ResolutionError(f"autocorrelation needs >= {MIN_RESOLUTION} samples across the support, got {resolution}")
    x, d = _midpoint_nodes(seed.support, int(resolution))
    return Autocorrelation(seed, x, d)


def seed_transform_sq(seed: SeedCutoff, u, resolution: int = 4096) -> np.ndarray:
    """``|chi_hat(u)|^2`` by the midpoint rule (spectrally accurate for smooth seeds)."""
    x, d = _midpoint_nodes(seed.support, int(resolution))
    w = seed(x) * d
    u = np.asarray(u, dtype=float)
    flat = u.ravel()
    out = np.empty(flat.shape)
    for i in range(0, flat.size, 512):
        ph = np.outer(flat[i:i + 512], x)
        out[i:i + 512] = (np.cos(ph) @ w) ** 2 + (np.sin(ph) @ w) ** 2
    return out.reshape(u.shape)


def _second_derivative_l1(seed: SeedCutoff, n: int = 1 << 16) -> float:
    t = np.linspace(-seed.support, seed.support, n + 1)
    d = t[1] - t[0]
    v = seed(t)
    return float(np.sum(np.abs(np.diff(v, 2))) / d)


@dataclass(frozen=True)
class OverlapReport:
    grid_max: float
    tail: float
    bound: float
    terms: int
    grid_points: int
    passed: bool
    slack_ok: bool


@dataclass(frozen=True)
class BumpFunction:
    """``f(t) = f_tilde(h t)``, with ``f_hat`` supported in ``[-pi r, pi r]``."""

    seed: SeedCutoff
    h: float
    r: float
    L: float
    delta: float
    M: float
    A: float
    C: float
    table: ChebyshevTable = field(repr=False)
    autocorr: Autocorrelation = field(repr=False)
    resolution: int = 4096
    overlap: OverlapReport | None = None
    ac_table: ChebyshevTable | None = field(default=None, repr=False)

    def f_tilde(self, u) -> np.ndarray:
        return np.clip(self.table(u), 0.0, 1.0)

    def __call__(self, t) -> np.ndarray:
        return self.f_tilde(self.h * np.asarray(t, dtype=float))

    def f_hat(self, tau) -> np.ndarray:
        """Transform of ``f``: ``(2 pi / (h C)) lam(tau / h)``, from the tabulated autocorrelation.

        The table is exactly zero for ``|tau| >= 2 h s``."""
        tau = np.asarray(tau, dtype=float)
        lam = self.ac_table(tau / self.h) if self.ac_table is not None else self.autocorr(tau / self.h)
        return (2.0 * np.pi / (self.h * self.C)) * lam

    def f_hat_direct(self, tau) -> np.ndarray:
        """Same as ``f_hat`` but by direct quadrature of the autocorrelation (slow)."""
        tau = np.asarray(tau, dtype=float)
        return (2.0 * np.pi / (self.h * self.C)) * self.autocorr(tau / self.h)

    @property
    def band(self) -> float:
        """Support radius of ``f_hat``."""
        return self.h * self.autocorr.support

    @property
    def tail_radius(self) -> float:
        """Beyond ``|t| > tail_radius`` the evaluator returns 0; the dropped mass is below 1e-30."""
        return self.table.radius / self.h

    def decay_bound(self, t) -> np.ndarray:
        """Certified envelope ``M / (1 + (h t)^2)``."""
        return self.M / (1.0 + (self.h * np.asarray(t, dtype=float)) ** 2)

    def summary(self) -> dict:
        return {
            "seed": self.seed.name, "support": self.seed.support, "h": self.h, "r": self.r, "L": self.L,
            "delta": self.delta, "M": self.M, "A": self.A, "C": self.C, "resolution": self.resolution,
        }


def round_up_2sig(x: float) -> float:
    e = int(np.floor(np.log10(x))) - 1
    q = 10.0 ** e
    v = np.ceil(x / q - 1e-9) * q
    return float(round(v, max(0, -e)))


def decay_constant(table: ChebyshevTable, tail_coeff: float, step: float = 1e-3) -> float:
    """``sup (1 + u^2) f_tilde(u)`` over the table plus the analytic tail beyond it.

    For ``u > U`` we use ``|chi_hat(u)| <= ||chi''||_1 / u^2``, giving
    ``(1 + u^2) f_tilde(u) <= tail_coeff (1 + U^2) / U^4`` (decreasing in ``u``).
    """
    U = table.radius
    u = np.arange(0.0, U, step)
    g = (1.0 + u * u) * table(u)
    i = int(np.argmax(g))
    lo, hi = u[max(i - 1, 0)], u[min(i + 1, u.size - 1)]
    res = scipy.optimize.minimize_scalar(lambda v: -(1.0 + v * v) * float(table(v)), bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-10})
    grid_sup = max(float(g[i]), -float(res.fun))
    tail = tail_coeff * (1.0 + U * U) / U ** 4
    return max(grid_sup, tail)


def lattice_overlap(f: Callable, M: float, h: float, grid_points: int = 10_000, terms: int = 60) -> OverlapReport:
    """Grid value of ``sup_{|t| <= 1/2} sum_{k != 0} f(t - k)``, plus the analytic
    tail ``(2M/h^2) sum_{k > K} (k - 1/2)^-2`` for the dropped translates."""
    t = np.linspace(-0.5, 0.5, grid_points)
    k = np.concatenate([np.arange(-terms, 0), np.arange(1, terms + 1)])
    s = np.zeros_like(t)
    for kk in k:
        s += f(t - kk)
    grid_max = float(s.max())
    tail = float(2.0 * M / h ** 2 * polygamma(1, terms + 0.5))
    bound = grid_max + tail
    return OverlapReport(grid_max, tail, bound, terms, grid_points, bound <= OVERLAP_BOUND,
                         bound <= (1.0 - OVERLAP_SLACK) * OVERLAP_BOUND)


def plateau_width(f, step: float = 1e-5, limit: float = 0.5) -> float:
    """Largest grid point ``delta < limit`` with ``min_{|t| <= delta} f(t) >= 8/9``.

    ``f`` is assumed even. Returns ``limit - step`` when the whole grid qualifies.
    """
    n = int(round(limit / step))
    t = np.arange(n) * step
    v = np.asarray(f(t), dtype=float)
    if v[0] < PLATEAU_LEVEL:
        raise InvariantViolation(f"f(0) = {v[0]:.6g} < 8/9: not a valid bump")
    ok = np.minimum.accumulate(v) >= PLATEAU_LEVEL
    last = int(np.nonzero(ok)[0][-1])
    return float(t[last])


def build_bump(seed: SeedCutoff | None = None, h: float | None = None, *, strict: bool = True,
               resolution: int = 4096, plateau_step: float = 1e-5, max_retries: int = 4) -> BumpFunction:
    """Construct the bump from ``seed`` (default: the standard mollifier).

    With ``h=None`` the scale is ``A = sqrt(6 M (4 + pi^2/6))`` rounded up to two
    significant digits; the lattice-overlap sum is then certified at or below
    1/3 with 5% slack, enlarging ``h`` by 10% on a miss. An explicit ``h`` with
    ``strict=False`` skips certification (used to build adversarial bumps).
    """
    seed = seed or standard_mollifier()
    s = seed.support
    ac = autocorrelate(seed, resolution)
    c0 = float(seed_transform_sq(seed, 0.0, resolution))
    radius = 1024.0 / s
    table = ChebyshevTable.build(lambda u: seed_transform_sq(seed, u, resolution) / c0, radius, panel=1.0 / s)

    # C = int lam: midpoint lattice of lags 2d, matches chi_hat(0)^2 spectrally
    lags = 2.0 * ac.step * np.arange(-(resolution // 2), resolution // 2 + 1)
    C = float(2.0 * ac.step * np.sum(ac(lags)))
    if abs(C / c0 - 1.0) > 1e-12:
        raise InvariantViolation(f"int lam = {C!r} disagrees with chi_hat(0)^2 = {c0!r}")
    if abs(float(table(0.0)) - 1.0) > 1e-12:
        raise InvariantViolation("f_tilde(0) != 1")

    M = decay_constant(table, _second_derivative_l1(seed) ** 2 / c0)
    A = float(np.sqrt(6.0 * M * (4.0 + np.pi ** 2 / 6.0)))
    scale = round_up_2sig(A) if h is None else float(h)
    if scale <= 0:
        raise InvalidArgumentError("scale h must be positive")

    for attempt in range(max_retries + 1):
        ft = lambda u: np.clip(table(u), 0.0, 1.0)  # noqa: E731
        rep = lattice_overlap(lambda t, a=scale: ft(a * t), M, scale)
        if not strict or rep.slack_ok:
            break
        if attempt == max_retries:
            raise ConstructionFailure(f"overlap bound {rep.bound:.4g} exceeds target after {max_retries} enlargements")
        scale = round_up_2sig(1.1 * scale)

    # half-integer r puts L = 4 pi r in 2 pi Z, so exp(i L |gamma|^2) = 1 on the lattice
    r = float(np.ceil(2.0 * (2.0 * scale * s / np.pi) - 1e-12) / 2.0)
    L = 4.0 * np.pi * r
    delta = plateau_width(lambda t: ft(scale * t), step=plateau_step)
    ac_table = ChebyshevTable.build(ac, ac.support, panel=ac.support / 64)
    return BumpFunction(seed, scale, r, L, delta, M, A, C, table, ac, int(resolution), rep, ac_table)


# ---------------------------------------------------------------- certification


@dataclass(frozen=True)
class LeakageReport:
    max_outside: float
    peak: float
    relative: float
    samples: int
    step: float
    passed: bool
    freqs: np.ndarray = field(repr=False)
    spectrum: np.ndarray = field(repr=False)


def fourier_leakage(bump: BumpFunction, pad: int = 4, tol: float = 1e-12) -> LeakageReport:
    """Sampled transform of ``f`` with Nyquist at ``pad * pi r``; relative size outside ``[-pi r, pi r]``."""
    if pad < 4:
        raise InvalidArgumentError("zero-padding factor must be >= 4")
    band = np.pi * bump.r
    dt = np.pi / (pad * band)
    n = next_pow2(2.0 * bump.tail_radius / dt)
    t = (np.arange(n) - n // 2) * dt
    vals = bump(t)
    spec = dt * np.fft.fftshift(np.fft.fft(np.fft.ifftshift(vals)))
    freqs = np.fft.fftshift(np.fft.fftfreq(n, d=dt)) * 2.0 * np.pi
    mag = np.abs(spec)
    peak = float(mag.max())
    outside = float(mag[np.abs(freqs) > band].max())
    rel = outside / peak
    return LeakageReport(outside, peak, rel, n, dt, rel < tol, freqs, spec.real)


@dataclass(frozen=True)
class GramCertificate:
    points: np.ndarray
    min_eigenvalue: float
    tol: float
    passed: bool
    quadratic_forms: np.ndarray | None = None


def check_positive_definite(g: Callable, points, tol: float = 1e-10, coefficients=None) -> GramCertificate:
    """Minimum eigenvalue of ``(g(x_i - x_j))``; ``coefficients`` rows give extra quadratic forms."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 2:
        raise InvalidArgumentError("need at least two points")
    diff = x[:, None, :] - x[None, :, :]
    arg = diff[..., 0] if x.shape[1] == 1 else diff.reshape(-1, x.shape[1])
    G = np.asarray(g(arg)).reshape(len(x), len(x))
    scale = max(1.0, float(np.abs(G).max()))
    asym = float(np.abs(G - G.conj().T).max())
    if asym > tol * scale:
        raise EvaluationInconsistency(f"Gram matrix not Hermitian (max asymmetry {asym:.3g})")
    H = 0.5 * (G + G.conj().T)
    lam_min = float(np.linalg.eigvalsh(H).min())
    q = None
    ok = lam_min >= -tol
    if coefficients is not None:
        c = np.atleast_2d(np.asarray(coefficients))
        q = np.real(np.einsum("ki,ij,kj->k", c, H, c.conj()))
        ok = ok and bool(np.all(q >= -tol * np.sum(np.abs(c) ** 2, axis=1)))
    return GramCertificate(x.squeeze(-1) if x.shape[1] == 1 else x, lam_min, tol, bool(ok), q)


@dataclass(frozen=True)
class PDPropertyReport:
    nonneg_at_zero: bool
    hermitian: bool
    dominated: bool
    value_at_zero: complex
    worst_hermitian: float
    worst_domination: float

    @property
    def passed(self) -> bool:
        return self.nonneg_at_zero and self.hermitian and self.dominated


def check_pd_properties(f: Callable, points, tol: float = 1e-12) -> PDPropertyReport:
    """Necessary conditions for positive definiteness: ``f(0) >= 0``,
    ``f(-x) = conj f(x)``, ``|f(x)| <= f(0)``."""
    x = np.asarray(points, dtype=float)
    f0 = complex(np.asarray(f(np.zeros(1))).ravel()[0])
    fx = np.asarray(f(x), dtype=complex)
    fm = np.asarray(f(-x), dtype=complex)
    herm = float(np.abs(fm - np.conj(fx)).max()) if x.size else 0.0
    dom = float((np.abs(fx) - f0.real).max()) if x.size else -np.inf
    scale = max(1.0, abs(f0))
    a = abs(f0.imag) <= tol * scale and f0.real >= -tol * scale
    return PDPropertyReport(bool(a), herm <= tol * scale, dom <= tol * scale, f0, herm, dom)


# ---------------------------------------------------------------- serialization


@dataclass(frozen=True)
class BumpTable:
    header: dict
    t: np.ndarray
    values: np.ndarray

    def __call__(self, t) -> np.ndarray:
        return np.interp(np.abs(np.asarray(t, dtype=float)), self.t, self.values, right=0.0)


def dump_bump(bump: BumpFunction, step: float | None = None, extent: float | None = None) -> str:
    """CSV of ``t, f(t)`` for ``t >= 0`` preceded by one ``# {json}`` header line."""
    step = step or 1.0 / (16.0 * bump.r)
    extent = extent or bump.tail_radius
    t = np.arange(0.0, extent, step)
    header = {**bump.summary(), "step": step, "count": int(t.size), "columns": ["t", "f"]}
    buf = io.StringIO()
    buf.write("# " + json.dumps(header) + "\n")
    np.savetxt(buf, np.column_stack([t, bump(t)]), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def save_bump(bump: BumpFunction, path, **kw) -> None:
    with open(path, "w") as fh:
        fh.write(dump_bump(bump, **kw))


def load_bump(path) -> BumpTable:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidArgumentError("missing JSON header line")
        header = json.loads(first[2:])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return BumpTable(header, data[:, 0], data[:, 1])
