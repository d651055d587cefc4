"""Dirichlet kernels, modulated bump sums, and the test functions ``g_N``, ``h_N``.

In one variable

    g_N(x) = f(x) D_N(L x),      h_N(x) = z_N(x) = sum_{|j|<=N} exp(i L j x) f(x - j),

and in ``n`` variables both are tensor products of these factors. Norms are
computed per factor and multiplied.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ._numerics import ChebyshevTable, NormReport, fit_loglog_slope, jacobi_rule, next_pow2
from .bump import BumpFunction
from .errors import ConfigurationError, InvalidArgumentError, RefinementError

DIRICHLET_RTOL = 1e-6
NORM_RTOL = 1e-6
ENVELOPE_FLOOR = 1e-13  # translates of f below this are dropped from h_N cells


def dirichlet(M: int, t) -> np.ndarray:
    """``D_M(t) = sum_{|j|<=M} exp(i j t) = sin((M + 1/2) t) / sin(t / 2)``."""
    if M < 0:
        raise InvalidArgumentError("Dirichlet order must be non-negative")
    t = np.asarray(t, dtype=float)
    u = t - 2.0 * np.pi * np.round(t / (2.0 * np.pi))
    K = 2 * M + 1
    out = np.empty(u.shape)
    small = np.abs(u) * max(M, 1) < 1e-4
    us = u[small]
    out[small] = K - us * us * M * (M + 1) * K / 6.0
    ub = u[~small]
    out[~small] = np.sin((M + 0.5) * ub) / np.sin(0.5 * ub)
    return out


@dataclass(frozen=True)
class DirichletKernel:
    M: int

    def __call__(self, t) -> np.ndarray:
        return dirichlet(self.M, t)

    @property
    def zeros(self) -> np.ndarray:
        K = 2 * self.M + 1
        return 2.0 * np.pi * np.arange(1, K) / K


def _dirichlet_lobes(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Intervals between consecutive zeros covering one period; the main lobe straddles 0."""
    K = 2 * M + 1
    a = np.concatenate([[-2.0 * np.pi / K], 2.0 * np.pi * np.arange(1, 2 * M) / K])
    b = np.concatenate([[2.0 * np.pi / K], 2.0 * np.pi * np.arange(2, 2 * M + 1) / K])
    return a, b


def _lobe_power_integral(M: int, p: float, order: int, weight=None, phase: float = 0.0) -> float:
    """``int_period |D_M|^p w`` with Gauss-Jacobi rules absorbing the power zeros."""
    a, b = _dirichlet_lobes(M)
    mid = 0.5 * (a + b)
    shift = 2.0 * np.pi * np.floor((mid - phase) / (2.0 * np.pi))
    a, b, mid = a - shift, b - shift, mid - shift
    hw = 0.5 * (b - a)
    x, w = jacobi_rule(order, float(p))
    t = mid[:, None] + hw[:, None] * x[None, :]
    smooth = np.abs(dirichlet(M, t)) ** p / (hw[:, None] ** 2 * (1.0 - x[None, :] ** 2)) ** p
    if weight is not None:
        smooth = smooth * weight(t)
    return float(np.sum(hw[:, None] ** (1.0 + 2.0 * p) * smooth * w[None, :]))


def _trapezoid_power_integral(M: int, p: float, nodes: int, phase: float = 0.0) -> float:
    t = phase + 2.0 * np.pi * np.arange(nodes) / nodes
    return float(np.sum(np.abs(dirichlet(M, t)) ** p) * 2.0 * np.pi / nodes)


def dirichlet_lp_norm(M: int, p: float, nodes: int | None = None, *, method: str = "lobes",
                      phase: float = 0.0, rtol: float = DIRICHLET_RTOL) -> float:
    """``||D_M||_{L^p(0, 2 pi)}`` certified against a 2x node refinement.

    ``method="lobes"`` integrates lobe by lobe between the zeros of ``D_M``
    with Gauss-Jacobi weights matching the ``|t - t_k|^p`` behaviour there;
    ``method="trapezoid"`` uses the uniform rule (its accuracy is capped by
    those same kinks). ``nodes`` defaults to ``64 (M + 1)``.
    """
    if p <= 1:
        raise InvalidArgumentError("p must exceed 1")
    nodes = nodes or 64 * (M + 1)
    if nodes < 64 * (M + 1):
        raise InvalidArgumentError(f"need at least 64 (M + 1) = {64 * (M + 1)} nodes")
    if M == 0:
        return float((2.0 * np.pi) ** (1.0 / p))
    if method == "lobes":
        order = max(16, int(np.ceil(nodes / (2 * M))))
        v1 = _lobe_power_integral(M, p, order, phase=phase)
        v2 = _lobe_power_integral(M, p, 2 * order, phase=phase)
    elif method == "trapezoid":
        v1 = _trapezoid_power_integral(M, p, nodes, phase)
        v2 = _trapezoid_power_integral(M, p, 2 * nodes, phase)
    else:
        raise InvalidArgumentError(f"unknown method {method!r}")
    n1, n2 = v1 ** (1.0 / p), v2 ** (1.0 / p)
    if abs(n2 - n1) > rtol * n2:
        raise RefinementError(f"||D_{M}||_{p}: refinement moved the value by {abs(n2 - n1) / n2:.2e}")
    return float(n2)


# ---------------------------------------------------------------- bump sums


def effective_radius(bump: BumpFunction, floor: float) -> float:
    """Radius beyond which the tabulated ``f`` stays at or below ``floor``."""
    t = np.arange(0.0, bump.tail_radius + 0.5, 0.25)
    big = np.nonzero(bump(t) > floor)[0]
    return float(t[big[-1]] + 0.25) if big.size else 0.25


def _cell_window(bump: BumpFunction, floor: float = ENVELOPE_FLOOR) -> int:
    """Smallest ``W`` with ``f(t) <= floor`` for ``|t| >= W - 1/2``."""
    t = np.arange(0.5, bump.tail_radius + 1.0, 0.5)
    big = np.nonzero(bump(t) > floor)[0]
    last = t[big[-1]] if big.size else 0.0
    return int(np.ceil(last + 0.5))


def z_M(bump: BumpFunction, M: int, t, L: float | None = None) -> np.ndarray:
    """``sum_{|j|<=M} exp(i L j t) f(t - j)`` by direct summation."""
    L = bump.L if L is None else L
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for j in range(-M, M + 1):
        out += np.exp(1j * L * j * t) * bump(t - j)
    return out


def _check_lattice(L: float) -> float:
    q = L / (2.0 * np.pi)
    if abs(q - round(q)) > 1e-12 * max(1.0, q):
        raise ConfigurationError(f"lattice constant L = {L} must lie in 2 pi Z")
    return float(round(q))


@dataclass(frozen=True)
class TestPolynomialPair:
    """``g_N`` and ``h_N`` for multi-order ``N`` on the lattice ``L Z^n``."""

    N: tuple
    bump: BumpFunction = field(repr=False)
    L: float | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        N = tuple(int(v) for v in np.atleast_1d(self.N))
        if any(v < 0 for v in N):
            raise InvalidArgumentError("orders must be non-negative")
        object.__setattr__(self, "N", N)
        if self.L is None:
            object.__setattr__(self, "L", self.bump.L)
        _check_lattice(self.L)
        if self.bump.band > self.L / 4.0 + 1e-9:
            raise ConfigurationError("bump band exceeds L/4; translated spectra would overlap the cutoff")

    @property
    def dimension(self) -> int:
        return len(self.N)

    def _pts(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dimension == 1 and x.ndim <= 1:
            return x.reshape(-1, 1)
        return x.reshape(-1, self.dimension)

    def g(self, x) -> np.ndarray:
        pts = self._pts(x)
        out = np.ones(len(pts), dtype=complex)
        for j, Nj in enumerate(self.N):
            out *= self.bump(pts[:, j]) * dirichlet(Nj, self.L * pts[:, j])
        return out

    def h(self, x) -> np.ndarray:
        pts = self._pts(x)
        out = np.ones(len(pts), dtype=complex)
        for j, Nj in enumerate(self.N):
            out *= z_M(self.bump, Nj, pts[:, j], self.L)
        return out

    def _hat_factor(self, Nj: int, xi: np.ndarray, modulated: bool) -> np.ndarray:
        L = self.L
        g0 = np.round(xi / L)
        out = np.zeros(xi.shape, dtype=complex)
        for d in (-1, 0, 1):
            gam = g0 + d
            ok = np.abs(gam) <= Nj
            off = xi - L * gam
            term = self.bump.f_hat(off) * ok
            if modulated:
                term = term * np.exp(-1j * gam * off)
            out += term
        return out

    def g_hat(self, xi) -> np.ndarray:
        """``sum_gamma f0_hat(xi - L gamma)``."""
        pts = self._pts(xi)
        out = np.ones(len(pts), dtype=complex)
        for j, Nj in enumerate(self.N):
            out *= self._hat_factor(Nj, pts[:, j], False)
        return out

    def h_hat(self, xi) -> np.ndarray:
        """``sum_gamma exp(-i <gamma, xi - L gamma>) f0_hat(xi - L gamma)``."""
        pts = self._pts(xi)
        out = np.ones(len(pts), dtype=complex)
        for j, Nj in enumerate(self.N):
            out *= self._hat_factor(Nj, pts[:, j], True)
        return out


@dataclass(frozen=True)
class QuadratureConfig:
    samples_per_cell: int | None = None  # h_N: trapezoid samples per unit cell
    lobe_order: int = 24  # g_N: Gauss-Jacobi order per Dirichlet lobe
    rtol: float = NORM_RTOL


def _z_cell_integrals(bump: BumpFunction, M: int, p: float, L: float, n_s: int, W: int) -> tuple[float, float]:
    """Trapezoid value of ``int |z_M|^p`` using the cell structure.

    With ``L`` in ``2 pi Z`` one has ``|z_M(k + s)| = |sum_{m} exp(-i L m s) f(s + m)|``
    over ``m in [k - M, k + M]``; windows clipped to ``[-W, W]`` repeat, so only
    the distinct clipped windows are evaluated. Returns (value, dropped-tail bound).
    """
    s = -0.5 + np.arange(n_s) / n_s
    m = np.arange(-W, W + 1)
    F = bump(s[None, :] + m[:, None])
    E = np.exp(-1j * L * np.outer(m, s)) * F
    P = np.vstack([np.zeros((1, n_s), dtype=complex), np.cumsum(E, axis=0)])
    ks = np.arange(-M - W, M + W + 1)
    lo = np.maximum(ks - M, -W)
    hi = np.minimum(ks + M, W)
    keys = {}
    for a, b in zip(lo, hi):
        if a <= b:
            keys[(int(a), int(b))] = keys.get((int(a), int(b)), 0) + 1
    total, zmax = 0.0, 0.0
    for (a, b), mult in keys.items():
        z = np.abs(P[b + W + 1] - P[a + W])
        zmax = max(zmax, float(z.max()))
        total += mult * float(np.sum(z ** p)) / n_s
    # dropped translates move |z| by at most dz anywhere
    dz = 2.0 * float(np.sum(bump(np.arange(W, W + 200) - 0.5)))
    tail = (2 * M + 2 * W + 1) * p * zmax ** (p - 1.0) * dz + 2.0 * bump.tail_radius * dz ** p
    return total, tail


def _default_samples(L: float, W: int) -> int:
    return int(next_pow2(8.0 * 2.0 * L * W / (2.0 * np.pi)))


def z_lp_norm(bump: BumpFunction, M: int, p: float, L: float | None = None,
              config: QuadratureConfig | None = None) -> NormReport:
    L = bump.L if L is None else L
    _check_lattice(L)
    cfg = config or QuadratureConfig()
    W = _cell_window(bump)
    n_s = cfg.samples_per_cell or _default_samples(L, W)
    v1, tail = _z_cell_integrals(bump, M, p, L, n_s, W)
    v2, _ = _z_cell_integrals(bump, M, p, L, 2 * n_s, W)
    n1, n2 = v1 ** (1.0 / p), v2 ** (1.0 / p)
    delta = abs(n2 - n1)
    if delta > cfg.rtol * n2:
        raise RefinementError(f"||z_{M}||_{p}: refinement moved the value by {delta / n2:.2e}")
    return NormReport(float(p), float(n2), float(n2 * tail / (p * v2)), float(delta),
                      {"window": W, "samples_per_cell": 2 * n_s, "M": M})


def _periodized_weight(bump: BumpFunction, p: float, L: float):
    """``F(t) = sum_k f((t + 2 pi k) / L)^p``, so that ``int f^p |D(L x)|^p dx = (1/L) int_0^{2pi} |D|^p F``.

    ``F`` is even and 2 pi-periodic; it is tabulated on ``[0, pi]`` once.
    """
    K = int(np.ceil(effective_radius(bump, 1e-20 ** (1.0 / p)) * L / (2.0 * np.pi))) + 1
    ks = np.arange(-K, K + 1)

    def direct(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k in ks:
            out += bump((t + 2.0 * np.pi * k) / L) ** p
        return out

    table = ChebyshevTable.build(direct, np.pi, panel=np.pi / 16, degree=32)

    def F(t):
        t = np.asarray(t, dtype=float)
        u = np.abs(t - 2.0 * np.pi * np.round(t / (2.0 * np.pi)))
        return table(np.minimum(u, np.pi * (1 - 1e-16)))

    F.direct = direct
    return F


def bump_lp_norm(bump: BumpFunction, p: float, samples: int | None = None) -> float:
    """``||f||_p`` by the trapezoid rule over the tabulated support (spectrally accurate)."""
    R = bump.tail_radius
    n = samples or next_pow2(64 * bump.h * R)
    x = np.linspace(-R, R, n + 1)
    return float((np.sum(bump(x) ** p) * (x[1] - x[0])) ** (1.0 / p))


def modulated_power_integral(bump: BumpFunction, M: int, p: float, L: float | None = None,
                             order: int = 24) -> float:
    """``int f(t)^p |D_M(L t)|^p dt`` via periodization in ``t`` and lobe quadrature."""
    L = bump.L if L is None else L
    if M == 0:
        return bump_lp_norm(bump, p) ** p
    F = _periodized_weight(bump, p, L)
    return _lobe_power_integral(M, p, order, weight=F) / L


def g_factor_norm(bump: BumpFunction, M: int, p: float, L: float | None = None,
                  config: QuadratureConfig | None = None) -> NormReport:
    cfg = config or QuadratureConfig()
    v1 = modulated_power_integral(bump, M, p, L, cfg.lobe_order)
    v2 = modulated_power_integral(bump, M, p, L, 2 * cfg.lobe_order)
    n1, n2 = v1 ** (1.0 / p), v2 ** (1.0 / p)
    delta = abs(n2 - n1)
    if delta > cfg.rtol * n2:
        raise RefinementError(f"||g_{M}||_{p}: refinement moved the value by {delta / n2:.2e}")
    return NormReport(float(p), float(n2), 0.0, float(delta), {"M": M, "lobe_order": 2 * cfg.lobe_order})


def _combine(reports: list[NormReport], p: float, N: tuple) -> NormReport:
    val = float(np.prod([r.value for r in reports]))
    rel = sum(r.relative_delta for r in reports)
    tail = val * sum(r.tail_bound / r.value for r in reports)
    return NormReport(float(p), val, tail, val * rel, {"N": list(N), "factors": [r.value for r in reports]})


def hN_norm(pair: TestPolynomialPair, p: float, config: QuadratureConfig | None = None) -> NormReport:
    """``||h_N||_p = prod_j ||z_{N_j}||_p`` (tensor product)."""
    return _combine([z_lp_norm(pair.bump, Nj, p, pair.L, config) for Nj in pair.N], p, pair.N)


def gN_norm(pair: TestPolynomialPair, p: float, config: QuadratureConfig | None = None) -> NormReport:
    """``||g_N||_p = prod_j ||f D_{N_j}(L .)||_p`` (tensor product)."""
    return _combine([g_factor_norm(pair.bump, Nj, p, pair.L, config) for Nj in pair.N], p, pair.N)


# ---------------------------------------------------------------- checks


@dataclass(frozen=True)
class ZLowerBoundReport:
    M: int
    delta: float
    step: float
    min_modulus: float
    worst_t: float
    margin: float
    passed: bool


def zm_lower_bound_check(bump: BumpFunction, M: int, step: float | None = None) -> ZLowerBoundReport:
    """Grid check of ``|z_M(t)| >= 1/2`` on the union of ``[k - delta, k + delta]``, ``|k| <= M``."""
    d = bump.delta
    step = step or d / 64.0
    if step > d / 50.0:
        raise InvalidArgumentError("grid step must be at most delta / 50")
    s = np.arange(-d, d + 0.5 * step, step)
    worst, worst_t = np.inf, 0.0
    for k in range(-M, M + 1):
        v = np.abs(z_M(bump, M, k + s))
        i = int(np.argmin(v))
        if v[i] < worst:
            worst, worst_t = float(v[i]), float(k + s[i])
    return ZLowerBoundReport(M, d, step, worst, worst_t, worst - 0.5, worst >= 0.5)


@dataclass(frozen=True)
class SlopeReport:
    orders: list
    norms: list
    slope: float
    predicted: float
    tolerance: float
    kind: str  # "equal" or "at_most"
    passed: bool
    p: float
    n: int = 1

    def rows(self) -> list[dict]:
        return [{"n": self.n, "p": self.p, "N": N, "norm": v, "predicted_exponent": self.predicted,
                 "fitted_slope": self.slope, "pass": self.passed} for N, v in zip(self.orders, self.norms)]


def norm_slope(bump: BumpFunction, orders, p: float, which: str = "h",
               config: QuadratureConfig | None = None) -> SlopeReport:
    """Fit the log-log slope of ``||h_N||_p`` (expected ``1/p``) or ``||g_N||_p``
    (expected at most ``1 - 1/p``) over the top half of ``orders``."""
    orders = [int(v) for v in orders]
    if len(orders) < 3:
        raise InvalidArgumentError("slope fits need at least 3 orders")
    fn = z_lp_norm if which == "h" else g_factor_norm
    norms = [fn(bump, N, p, None, config).value for N in orders]
    fit = fit_loglog_slope(orders, norms)
    tol = 0.05
    if which == "h":
        pred = 1.0 / p
        ok = abs(fit.slope - pred) <= tol
        kind = "equal"
    else:
        pred = 1.0 - 1.0 / p
        ok = fit.slope <= pred + tol
        kind = "at_most"
    return SlopeReport(orders, norms, fit.slope, pred, tol, kind, bool(ok), float(p))


@dataclass(frozen=True)
class PlateauReport:
    orders: list
    ratios: list
    spread: float
    passed: bool


def modulated_power_plateau(bump: BumpFunction, orders, p: float, band: float = 0.15) -> PlateauReport:
    """Ratios ``int f^p |D_M(L t)|^p dt / M^(p-1)`` must stay within ``±band`` of one constant.

    The best constant is the midrange, so the spread is ``(max - min) / (max + min)``.
    """
    orders = [int(v) for v in orders]
    if len(orders) < 3:
        raise InvalidArgumentError("plateau check needs at least 3 orders")
    ratios = [modulated_power_integral(bump, M, p) / M ** (p - 1.0) for M in orders]
    spread = float((max(ratios) - min(ratios)) / (max(ratios) + min(ratios)))
    return PlateauReport(orders, ratios, spread, spread < band)


def parseval_check(bump: BumpFunction, M: int, samples: int | None = None) -> tuple[float, float]:
    """``int f^2 |D_M(L t)|^2`` by lobe quadrature versus ``sum_{j,k} (f^2)^(L (j - k))``
    with the transform of ``f^2`` by direct trapezoid quadrature."""
    space = modulated_power_integral(bump, M, 2.0)
    R = bump.tail_radius
    # resolve the top frequency L 2M plus the band of f^2 with 8 points per period
    n = samples or next_pow2(max(64 * bump.h * R, 8 * R * (2 * M * bump.L + 2 * bump.band) / np.pi))
    x = np.linspace(-R, R, n + 1)
    dx = x[1] - x[0]
    f2 = bump(x) ** 2
    d = np.arange(-2 * M, 2 * M + 1)
    ft = np.array([np.sum(f2 * np.cos(bump.L * dd * x)) * dx for dd in d])
    spectral = float(np.sum((2 * M + 1 - np.abs(d)) * ft))
    return space, spectral


def norm_table_csv(reports: list[SlopeReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["n", "p", "N", "norm", "predicted_exponent", "fitted_slope", "pass"])
    w.writeheader()
    for rep in reports:
        for row in rep.rows():
            w.writerow(row)
    return buf.getvalue()
