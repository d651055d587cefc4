"""Counterexample symbols ``sigma_k(xi) = lam_k Phi_k(tau_k xi)`` and their test functions.

``Phi_k(eta) = sum_{|gamma_j| <= N_j} exp(-i <gamma, eta>) phi(eta - L gamma)`` is a
modulated lattice of cutoffs. The cutoff translates have disjoint supports
(``phi`` vanishes for ``|eta_j| >= L/2``), so at any ``eta`` only the nearest
lattice point contributes; the sum factorizes over axes.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bump import BumpFunction
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    PreconditionViolation,
    ResolutionError,
    SynthesisFailure,
)
from .geometry import InscribedInterval
from .trig import TestPolynomialPair
from .weights import OrderFunction, WeightProfile, as_points

SUPPORT_RTOL = 1e-14
IDENTITY_RTOL = 1e-10
FD_STEP = 1e-3
FD_STABILITY = 0.10


def select_N(ratio: float) -> int:
    """Largest integer ``N >= 1`` with ``N (2N + 1) <= ratio``."""
    if not ratio >= 3:
        raise PreconditionViolation(f"ratio {ratio} < 3: the inscribed interval is too small for N = 1")
    N = max(1, int((math.sqrt(1.0 + 8.0 * ratio) - 1.0) / 4.0))
    while (N + 1) * (2 * N + 3) <= ratio:
        N += 1
    while N > 1 and N * (2 * N + 1) > ratio:
        N -= 1
    return N


# ---------------------------------------------------------------- cutoff


def flat_step(y, order: int | None = None) -> np.ndarray:
    """0 for ``y <= 0``, 1 for ``y >= 1``.

    ``order=None`` gives the C-infinity step ``a / (a + b)`` with
    ``a = exp(-1/y)``, ``b = exp(-1/(1-y))``; an integer gives the polynomial
    smoothstep of class ``C^order``.
    """
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 1.0, 1.0, 0.0)
    mid = (y > 0.0) & (y < 1.0)
    t = y[mid]
    if order is None:
        # 1/t overflows for subnormal t; exp(-inf) = 0 is the intended limit
        with np.errstate(over="ignore"):
            a = np.exp(-1.0 / t)
            b = np.exp(-1.0 / (1.0 - t))
        out[mid] = a / (a + b)
    else:
        k = int(order)
        # the alternating sum cancels badly near t = 1, so reflect the upper half
        r = np.minimum(t, 1.0 - t)
        s = np.zeros_like(r)
        for j in range(k + 1):
            s += math.comb(k + j, j) * math.comb(2 * k + 1, k - j) * (-r) ** j
        low = r ** (k + 1) * s
        out[mid] = np.where(t <= 0.5, low, 1.0 - low)
    return out


def flat_step_derivative(y, order: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros(y.shape)
    mid = (y > 0.0) & (y < 1.0)
    t = y[mid]
    if order is None:
        # a / t^2 written as one exponential so tiny t gives 0 rather than 0 * inf
        with np.errstate(over="ignore"):
            a = np.exp(-1.0 / t)
            b = np.exp(-1.0 / (1.0 - t))
            da = np.exp(-1.0 / t - 2.0 * np.log(t))
            db = np.exp(-1.0 / (1.0 - t) - 2.0 * np.log1p(-t))
        out[mid] = (da * b + a * db) / (a + b) ** 2
    else:
        k = int(order)
        # d/dt smoothstep_k = c t^k (1 - t)^k with c = (2k+1)!/(k!)^2
        c = math.factorial(2 * k + 1) / math.factorial(k) ** 2
        out[mid] = c * t ** k * (1.0 - t) ** k
    return out


@dataclass(frozen=True)
class SmoothCutoff:
    """``phi(eta) = prod_j S((L/2 - |eta_j|) / (L/4))``: 1 on ``|eta_j| <= L/4``, 0 once some ``|eta_j| >= L/2``."""

    L: float
    dimension: int = 1
    order: int | None = None

    def axis(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return flat_step((0.5 * self.L - np.abs(x)) / (0.25 * self.L), self.order)

    def axis_derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -np.sign(x) * flat_step_derivative((0.5 * self.L - np.abs(x)) / (0.25 * self.L), self.order) / (0.25 * self.L)

    def __call__(self, eta) -> np.ndarray:
        pts = as_points(eta, self.dimension)
        out = np.ones(len(pts))
        for j in range(self.dimension):
            out *= self.axis(pts[:, j])
        return out


def _lattice_phase(gamma: np.ndarray, offset: np.ndarray, q: float) -> np.ndarray:
    """``exp(-i gamma eta)`` written as ``exp(-i gamma (eta - L gamma)) exp(-i L gamma^2)``.

    The second factor is reduced exactly through ``L gamma^2 = 2 pi q gamma^2``
    so that large lattice indices do not lose phase accuracy.
    """
    frac = np.mod(q * gamma * gamma, 1.0)
    return np.exp(-1j * (gamma * offset + 2.0 * np.pi * frac))


@dataclass(frozen=True)
class LatticeSum:
    N: tuple
    cutoff: SmoothCutoff

    @property
    def L(self) -> float:
        return self.cutoff.L

    @property
    def dimension(self) -> int:
        return len(self.N)

    def _axis(self, j: int, x: np.ndarray, deriv: int = 0) -> np.ndarray:
        L = self.L
        g = np.round(x / L)
        off = x - L * g
        ok = np.abs(g) <= self.N[j]
        ph = _lattice_phase(g, off, L / (2.0 * np.pi)) * ok
        phi = self.cutoff.axis(off)
        if deriv == 0:
            return ph * phi
        if deriv == 1:
            return ph * (-1j * g * phi + self.cutoff.axis_derivative(off))
        raise InvalidArgumentError("analytic derivative available for order <= 1")

    def __call__(self, eta) -> np.ndarray:
        pts = as_points(eta, self.dimension)
        out = np.ones(len(pts), dtype=complex)
        for j in range(self.dimension):
            out *= self._axis(j, pts[:, j])
        return out

    def gradient(self, eta) -> np.ndarray:
        """Analytic first partials, shape ``(m, n)``."""
        pts = as_points(eta, self.dimension)
        base = [self._axis(j, pts[:, j]) for j in range(self.dimension)]
        out = np.empty((len(pts), self.dimension), dtype=complex)
        for j in range(self.dimension):
            v = self._axis(j, pts[:, j], 1)
            for i in range(self.dimension):
                if i != j:
                    v = v * base[i]
            out[:, j] = v
        return out

    def direct(self, eta) -> np.ndarray:
        """Full sum over every lattice index (reference evaluator)."""
        pts = as_points(eta, self.dimension)
        out = np.zeros(len(pts), dtype=complex)
        ranges = [range(-Nj, Nj + 1) for Nj in self.N]
        for gam in itertools.product(*ranges):
            gam = np.asarray(gam, dtype=float)
            out += np.exp(-1j * pts @ gam) * self.cutoff(pts - self.L * gam)
        return out

    @property
    def support_radius(self) -> np.ndarray:
        return self.L * (np.asarray(self.N, dtype=float) + 0.5)


def build_lattice_sum(N, cutoff: SmoothCutoff) -> LatticeSum:
    N = tuple(int(v) for v in np.atleast_1d(N))
    if len(N) != cutoff.dimension:
        raise InvalidArgumentError("order length must equal cutoff dimension")
    return LatticeSum(N, cutoff)


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class CounterexampleInstance:
    k: int
    anchor: np.ndarray
    half_lengths: np.ndarray
    lambda_k: float
    N: tuple
    c1: float
    L: float
    psi: np.ndarray
    tau: np.ndarray
    lattice: LatticeSum = field(repr=False)
    support_checked: int = 0

    @property
    def dimension(self) -> int:
        return len(self.N)

    def sigma(self, xi) -> np.ndarray:
        pts = as_points(xi, self.dimension)
        return self.lambda_k * self.lattice(pts * self.tau)

    __call__ = sigma

    def to_dict(self) -> dict:
        return {
            "k": self.k, "xi": self.anchor.tolist(), "l": self.half_lengths.tolist(), "lambda_k": self.lambda_k,
            "N": list(self.N), "c1": self.c1, "L": self.L, "psi": self.psi.tolist(), "tau": self.tau.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def scaled(self, a: float) -> "CounterexampleInstance":
        return CounterexampleInstance(self.k, self.anchor, self.half_lengths, a * self.lambda_k, self.N, self.c1, self.L,
                                      self.psi, self.tau, self.lattice, self.support_checked)


def _outside_grid(l: np.ndarray, reach: np.ndarray, count: int) -> np.ndarray:
    """Axis grids covering ``[-2R, 2R]`` with ``R = max(l, reach)``, plus points hugging ``±l``."""
    axes = []
    for lj, rj in zip(l, reach):
        R = max(lj, rj)
        g = np.linspace(-2.0 * R, 2.0 * R, count)
        edge = lj * (1.0 + np.array([1e-12, 1e-9, 1e-6, 1e-3]))
        axes.append(np.concatenate([g, edge, -edge]))
    return axes


def synthesize_symbol(k: int, xi, interval: InscribedInterval, lambda_k: float, profile: WeightProfile,
                      bump: BumpFunction | float, c1: float | None = None, *, cutoff_order: int | None = None,
                      check_points: int = 2001) -> CounterexampleInstance:
    """Build stage ``k``: ``N_j`` from the inscribed half-lengths, dilations
    ``tau_j = (3/2) L / (c1 psi_j(xi) N_j)``, and certify that ``sigma_k``
    vanishes outside the interval on a grid and its 2x refinement."""
    L = bump.L if isinstance(bump, BumpFunction) else float(bump)
    c1 = interval.c if c1 is None else float(c1)
    if lambda_k <= 0:
        raise InvalidArgumentError("lambda_k must be positive")
    x = as_points(xi, profile.dimension)[0]
    psi = profile(x)[0]
    l = np.asarray(interval.half_lengths, dtype=float)
    N = tuple(select_N(3.0 / c1 * lj / pj) for lj, pj in zip(l, psi))
    Nf = np.asarray(N, dtype=float)
    tau = 1.5 * L / (c1 * psi * Nf)
    lat = build_lattice_sum(N, SmoothCutoff(L, len(N), cutoff_order))
    inst = CounterexampleInstance(int(k), x, l, float(lambda_k), N, c1, L, psi, tau, lat)
    reach = lat.support_radius / tau
    checked = 0
    for count in (check_points, 2 * check_points - 1):
        axes = _outside_grid(l, reach, count)
        if len(axes) == 1:
            pts = axes[0][:, None]
        else:
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        outside = np.any(np.abs(pts) > l, axis=1)
        vals = np.abs(inst.sigma(pts[outside]))
        checked += int(outside.sum())
        if vals.size and vals.max() > SUPPORT_RTOL * lambda_k:
            bad = pts[outside][int(np.argmax(vals))]
            raise SynthesisFailure(f"|sigma_k| = {vals.max():.3g} outside I at {bad.tolist()}")
    return CounterexampleInstance(int(k), x, l, float(lambda_k), N, c1, L, psi, tau, lat, checked)


# ---------------------------------------------------------------- symbol estimates


def multi_indices(n: int, max_order: int) -> list[tuple]:
    return [a for a in itertools.product(range(max_order + 1), repeat=n) if sum(a) <= max_order]


def central_difference(func, pts: np.ndarray, alpha: tuple, steps: np.ndarray) -> np.ndarray:
    """Tensor product of second-order central differences, one factor per axis."""
    stencils = {0: ((0, 1.0),), 1: ((1, 0.5), (-1, -0.5)), 2: ((1, 1.0), (0, -2.0), (-1, 1.0))}
    out = np.zeros(len(pts), dtype=complex)
    for combo in itertools.product(*[stencils[a] for a in alpha]):
        shift = np.array([s for s, _ in combo], dtype=float) * steps
        coef = float(np.prod([c for _, c in combo]))
        out += coef * func(pts + shift)
    return out / float(np.prod(steps ** np.asarray(alpha, dtype=float)))


def probe_grid(instance: CounterexampleInstance, per_axis: int | None = None) -> np.ndarray:
    axes = []
    for lj, Nj in zip(instance.half_lengths, instance.N):
        m = per_axis or 64 * (2 * Nj + 1)
        axes.append(np.linspace(-lj, lj, m))
    if len(axes) == 1:
        return axes[0][:, None]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


@dataclass(frozen=True)
class SymbolCertificate:
    k: int
    max_ratio: dict  # multi-index string -> max ratio
    steps: list
    halving_change: dict
    probe_points: int

    def to_dict(self) -> dict:
        return {"k": self.k, "max_ratio": self.max_ratio, "steps": self.steps,
                "halving_change": self.halving_change, "probe_points": self.probe_points}

    @property
    def total(self) -> float:
        return float(sum(self.max_ratio.values()))


def _alpha_key(alpha: tuple) -> str:
    return ",".join(str(a) for a in alpha)


def certify_symbol_estimates(instance: CounterexampleInstance, profile: WeightProfile, order: OrderFunction,
                             alpha_max: int = 2, probe=None, step_factor: float = FD_STEP) -> SymbolCertificate:
    """Max over a probe grid in ``I`` of ``|D^alpha sigma_k(xi)| / (lam(xi) psi(xi)^-alpha)``
    for every ``|alpha| <= alpha_max``.

    Steps are ``step_factor * psi_j(xi_k) / N_j``; the maxima are recomputed at
    half the step and must agree to 10%.
    """
    if alpha_max > 2:
        raise InvalidArgumentError("finite differences are capped at |alpha| <= 2")
    pts = probe_grid(instance) if probe is None else as_points(probe, instance.dimension)
    steps = step_factor * instance.psi / np.asarray(instance.N, dtype=float)
    psi = profile(pts)
    lam = order(pts)
    ratios, change = {}, {}
    for alpha in multi_indices(instance.dimension, alpha_max):
        weight = lam * np.prod(psi ** (-np.asarray(alpha, dtype=float)), axis=1)
        r1 = float(np.max(np.abs(central_difference(instance.sigma, pts, alpha, steps)) / weight))
        if sum(alpha) == 0:
            ratios[_alpha_key(alpha)], change[_alpha_key(alpha)] = r1, 0.0
            continue
        r2 = float(np.max(np.abs(central_difference(instance.sigma, pts, alpha, 0.5 * steps)) / weight))
        rel = abs(r2 - r1) / max(r2, np.finfo(float).tiny)
        if rel > FD_STABILITY:
            raise ResolutionError(f"alpha={alpha}: max ratio moved {rel:.1%} under step halving")
        ratios[_alpha_key(alpha)], change[_alpha_key(alpha)] = r2, rel
    return SymbolCertificate(instance.k, ratios, steps.tolist(), change, len(pts))


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class TestFunctionSpectrum:
    """``u_k_hat(xi) = g_N_hat(tau xi)`` and the target ``lam_k h_N_hat(tau xi)``."""

    instance: CounterexampleInstance = field(repr=False)
    pair: TestPolynomialPair = field(repr=False)
    identity_error: float = 0.0
    grid_points: int = 0

    __test__ = False

    def u_hat(self, xi) -> np.ndarray:
        pts = as_points(xi, self.instance.dimension)
        return self.pair.g_hat(pts * self.instance.tau)

    def target(self, xi) -> np.ndarray:
        pts = as_points(xi, self.instance.dimension)
        return self.instance.lambda_k * self.pair.h_hat(pts * self.instance.tau)

    def u(self, x) -> np.ndarray:
        """``u_k(x) = g_N(x / tau) / prod tau``."""
        pts = as_points(x, self.instance.dimension)
        return self.pair.g(pts / self.instance.tau) / float(np.prod(self.instance.tau))

    def sigma_u(self, x) -> np.ndarray:
        pts = as_points(x, self.instance.dimension)
        return self.instance.lambda_k * self.pair.h(pts / self.instance.tau) / float(np.prod(self.instance.tau))


def identity_grid(instance: CounterexampleInstance, per_cell: int = 64) -> np.ndarray:
    axes = []
    for Nj, tj in zip(instance.N, instance.tau):
        R = instance.L * (Nj + 1.0)
        m = per_cell * (2 * Nj + 3)
        axes.append(np.linspace(-R, R, m) / tj)
    if len(axes) == 1:
        return axes[0][:, None]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def build_test_function(instance: CounterexampleInstance, pair: TestPolynomialPair,
                        grid: np.ndarray | None = None) -> TestFunctionSpectrum:
    """Spectral description of ``u_k``; checks ``sigma_k u_k_hat = lam_k h_N_hat(tau .)`` on a grid."""
    if tuple(pair.N) != tuple(instance.N):
        raise ConfigurationError(f"pair order {pair.N} does not match instance order {instance.N}")
    if abs(pair.L - instance.L) > 1e-12 * instance.L:
        raise ConfigurationError("pair and instance use different lattice constants")
    spec = TestFunctionSpectrum(instance, pair)
    pts = identity_grid(instance) if grid is None else as_points(grid, instance.dimension)
    lhs = instance.sigma(pts) * spec.u_hat(pts)
    rhs = spec.target(pts)
    scale = instance.lambda_k * float(np.abs(pair.h_hat(pts * instance.tau)).max())
    err = float(np.abs(lhs - rhs).max()) / scale
    return TestFunctionSpectrum(instance, pair, err, len(pts))
