"""Discrete Fourier application of multipliers and sampled ``L^p`` norms.

Convention: ``u_hat(xi) = int exp(-i x xi) u(x) dx`` (forward factor 1) and
``u(x) = (2 pi)^-n int exp(i x xi) u_hat(xi) d xi``. On a grid with spacing
``dx`` the forward transform is ``dx * FFT`` up to the phase of the grid
origin, and the inverse is its exact discrete inverse.
"""

from __future__ import annotations

import io
import itertools
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._numerics import NormReport, next_pow2
from .errors import (
    AliasingError,
    DiscretizationInconsistency,
    InvalidArgumentError,
    PreconditionViolation,
    RefinementError,
)
from .functionals import ExponentParameter
from .synthesis import CounterexampleInstance, TestFunctionSpectrum, multi_indices
from .trig import TestPolynomialPair, gN_norm, hN_norm
from .weights import OrderFunction, WeightProfile, as_points

NYQUIST_FRACTION = 0.9
ALIAS_TOL = 1e-10
LP_RTOL = 1e-4
ROUTE_RTOL = 0.01


@dataclass(frozen=True)
class SampledField:
    """Values on the tensor grid ``x_j = -X + i * (2X / count)``, ``i = 0 .. count-1``."""

    extent: tuple
    counts: tuple
    values: np.ndarray = field(repr=False)
    domain: str = "space"

    def __post_init__(self):
        if self.domain not in ("space", "frequency"):
            raise InvalidArgumentError("domain must be 'space' or 'frequency'")
        if tuple(self.values.shape) != tuple(self.counts):
            raise InvalidArgumentError("values shape must equal counts")
        for c in self.counts:
            if c & (c - 1):
                raise InvalidArgumentError("per-axis sample counts must be powers of two")

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return 2.0 * np.asarray(self.extent, dtype=float) / np.asarray(self.counts)

    @property
    def nyquist(self) -> np.ndarray:
        return np.pi / self.spacing

    def axes(self) -> list[np.ndarray]:
        return [-X + np.arange(c) * d for X, c, d in zip(self.extent, self.counts, self.spacing)]

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.dimension)

    def freq_axes(self) -> list[np.ndarray]:
        return [2.0 * np.pi * np.fft.fftfreq(c, d) for c, d in zip(self.counts, self.spacing)]

    def freq_points(self) -> np.ndarray:
        grids = np.meshgrid(*self.freq_axes(), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, self.dimension)

    @classmethod
    def sample(cls, func: Callable, extent, counts) -> "SampledField":
        extent = tuple(float(v) for v in np.atleast_1d(extent))
        counts = tuple(int(v) for v in np.atleast_1d(counts))
        proto = cls(extent, counts, np.zeros(counts, dtype=complex))
        vals = np.asarray(func(proto.points()), dtype=complex).reshape(counts)
        return cls(extent, counts, vals)

    def linear(self, a, other: "SampledField" | None = None, b=0.0) -> "SampledField":
        vals = a * self.values + (0.0 if other is None else b * other.values)
        return SampledField(self.extent, self.counts, vals, self.domain)

    def sidecar(self) -> dict:
        return {"extent": list(self.extent), "counts": list(self.counts), "domain": self.domain,
                "dtype": "complex128", "layout": "C"}

    def save(self, stem) -> None:
        """Flat binary ``<stem>.bin`` plus ``<stem>.json`` sidecar."""
        self.values.astype(np.complex128).tofile(f"{stem}.bin")
        with open(f"{stem}.json", "w") as fh:
            json.dump(self.sidecar(), fh)

    @classmethod
    def load(cls, stem) -> "SampledField":
        with open(f"{stem}.json") as fh:
            meta = json.load(fh)
        vals = np.fromfile(f"{stem}.bin", dtype=np.complex128).reshape(meta["counts"])
        return cls(tuple(meta["extent"]), tuple(meta["counts"]), vals, meta["domain"])


def _origin_phase(u: SampledField) -> np.ndarray:
    """``exp(i X xi)`` for the grid origin at ``-X`` (tensor product over axes)."""
    ph = np.ones(u.counts, dtype=complex)
    for j, (X, w) in enumerate(zip(u.extent, u.freq_axes())):
        shape = [1] * u.dimension
        shape[j] = -1
        ph = ph * np.exp(1j * X * w).reshape(shape)
    return ph


def to_frequency(u: SampledField) -> SampledField:
    if u.domain != "space":
        raise InvalidArgumentError("field is already in frequency domain")
    vals = np.fft.fftn(u.values) * float(np.prod(u.spacing)) * _origin_phase(u)
    return SampledField(u.extent, u.counts, vals, "frequency")


def to_space(U: SampledField) -> SampledField:
    if U.domain != "frequency":
        raise InvalidArgumentError("field is already in space domain")
    vals = np.fft.ifftn(U.values / _origin_phase(U)) / float(np.prod(U.spacing))
    return SampledField(U.extent, U.counts, vals, "space")


def high_frequency_fraction(U: SampledField, fraction: float = NYQUIST_FRACTION) -> float:
    energy = np.abs(U.values) ** 2
    mask = np.zeros(U.counts, dtype=bool)
    for j, (w, ny) in enumerate(zip(U.freq_axes(), U.nyquist)):
        shape = [1] * U.dimension
        shape[j] = -1
        mask = mask | (np.abs(w) > fraction * ny).reshape(shape)
    tot = float(energy.sum())
    return float(energy[mask].sum()) / tot if tot > 0 else 0.0


def apply_multiplier(sigma: Callable, u: SampledField, *, alias_tol: float = ALIAS_TOL) -> SampledField:
    """``sigma(D) u``: forward transform, multiply by ``sigma`` on the frequency grid, invert."""
    U = to_frequency(u)
    frac = high_frequency_fraction(U)
    if frac > alias_tol:
        raise AliasingError(f"spectral energy above {NYQUIST_FRACTION} x Nyquist is {frac:.2e} of the total")
    s = np.asarray(sigma(U.freq_points()), dtype=complex).reshape(U.counts)
    return to_space(SampledField(U.extent, U.counts, U.values * s, "frequency"))


def _upsampled_power_sum(u: SampledField, p: float, factor: int) -> float:
    """``int |u|^p`` by the trapezoid rule after exact band-limited (zero-padded FFT) interpolation."""
    if factor == 1:
        return float(np.sum(np.abs(u.values) ** p) * np.prod(u.spacing))
    F = np.fft.fftn(u.values)
    for ax, n in enumerate(u.counts):
        F = np.fft.fftshift(F, axes=ax)
        pad = [(0, 0)] * u.dimension
        extra = (factor - 1) * n
        pad[ax] = (extra // 2, extra - extra // 2)
        F = np.pad(F, pad)
        F = np.fft.ifftshift(F, axes=ax)
    fine = np.fft.ifftn(F) * factor ** u.dimension
    return float(np.sum(np.abs(fine) ** p) * np.prod(u.spacing) / factor ** u.dimension)


def lp_norm(u: SampledField, p: float, *, upsample: int = 4, max_upsample: int = 32,
            envelope: Callable | None = None, rtol: float = LP_RTOL) -> NormReport:
    """Trapezoid ``L^p`` norm of a band-limited sampled field, refined against 2x oversampling.

    The oversampling factor starts at ``upsample`` and doubles (up to
    ``max_upsample``) until the value moves by less than ``rtol``.
    ``envelope(r)`` (optional) bounds ``|u|`` at distance ``r`` beyond the box;
    its ``L^p`` mass over ``[X, 64 X]`` per axis is reported as the tail bound.
    """
    if not 1 < p < np.inf:
        raise InvalidArgumentError("p must lie in (1, inf)")
    factor = upsample
    v1 = _upsampled_power_sum(u, p, factor)
    while True:
        v2 = _upsampled_power_sum(u, p, 2 * factor)
        n1, n2 = v1 ** (1.0 / p), v2 ** (1.0 / p)
        delta = abs(n2 - n1)
        if n2 == 0 or delta <= rtol * n2 or 2 * factor >= max_upsample:
            break
        factor, v1 = 2 * factor, v2
    tail = 0.0
    if envelope is not None:
        X = float(max(u.extent))
        r = np.linspace(X, 64.0 * X, 4097)
        tail = float((2.0 * u.dimension * np.trapezoid(np.abs(envelope(r)) ** p, r)) ** (1.0 / p))
    if n2 > 0 and delta > rtol * n2:
        raise RefinementError(f"L^{p} norm moved by {delta / n2:.2e} under 2x oversampling")
    return NormReport(float(p), float(n2), tail, float(delta), {"upsample": 2 * factor})


# ---------------------------------------------------------------- ratio bound


@dataclass(frozen=True)
class RatioReport:
    k: int
    N: tuple
    lambda_k: float
    route_a: float
    route_b: float
    relative_gap: float
    h_norm: NormReport
    g_norm: NormReport
    grid: dict

    @property
    def value(self) -> float:
        return self.route_a

    def row(self) -> dict:
        return {"k": self.k, "N": list(self.N), "lambda_k": self.lambda_k, "ratio": self.route_a,
                "ratio_sampled": self.route_b, "route_gap": self.relative_gap, "h_norm": self.h_norm.value,
                "g_norm": self.g_norm.value, **{f"grid_{k}": v for k, v in self.grid.items()}}


def ratio_grid(instance: CounterexampleInstance, pair: TestPolynomialPair, margin: float = 1.1,
               min_count: int = 1 << 14) -> tuple[tuple, tuple]:
    """Per-axis extent and power-of-two count for sampling ``u_k`` and ``sigma_k(D) u_k``.

    The box holds the output ``h_N(x / tau)`` out to ``N + W`` cells and at least
    four times the input envelope; the spacing puts the content band below
    ``0.8 x Nyquist``.
    """
    from .trig import effective_radius

    W = effective_radius(pair.bump, 1e-13)
    ext, cnt = [], []
    for Nj, tj in zip(instance.N, instance.tau):
        X = margin * tj * max(Nj + W, 4.0 * W)
        band = (instance.L * Nj + pair.bump.band) / tj
        dx = 0.8 * np.pi / band
        n = next_pow2(max(min_count, 2.0 * X / dx))
        ext.append(X)
        cnt.append(n)
    return tuple(ext), tuple(cnt)


def ratio_lower_bound(instance: CounterexampleInstance, pair: TestPolynomialPair, p, *,
                      spectrum: TestFunctionSpectrum | None = None, sampled: bool = True,
                      min_count: int = 1 << 14, upsample: int = 4) -> RatioReport:
    """``lam_k ||h_N||_p / ||g_N||_p`` by two routes.

    (a) from the undilated norms (the dilation rescales both by the same
    Jacobian power, which cancels); (b) by sampling ``u_k``, applying
    ``sigma_k`` through the FFT, and taking sampled norms. The routes must agree to 1%.
    """
    ep = ExponentParameter.of(p)
    if not ep.p < 2:
        raise PreconditionViolation("ratio bound requires 1 < p < 2; run p > 2 at the conjugate exponent")
    pf = float(ep.p)
    if tuple(pair.N) != tuple(instance.N):
        raise InvalidArgumentError("pair and instance orders differ")
    hn = hN_norm(pair, pf)
    gn = gN_norm(pair, pf)
    a = instance.lambda_k * hn.value / gn.value
    if not sampled:
        return RatioReport(instance.k, instance.N, instance.lambda_k, a, float("nan"), float("nan"), hn, gn, {})
    spec = spectrum
    if spec is None:
        from .synthesis import build_test_function

        spec = build_test_function(instance, pair)
    extent, counts = ratio_grid(instance, pair, min_count=min_count)
    u = SampledField.sample(spec.u, extent, counts)
    out = apply_multiplier(instance.sigma, u)
    nu = lp_norm(u, pf, upsample=upsample)
    nout = lp_norm(out, pf, upsample=upsample)
    b = nout.value / nu.value
    gap = abs(b - a) / a
    grid = {"extent": list(extent), "counts": list(counts), "delta_in": nu.relative_delta,
            "delta_out": nout.relative_delta}
    rep = RatioReport(instance.k, instance.N, instance.lambda_k, a, b, gap, hn, gn, grid)
    if gap > ROUTE_RTOL:
        raise DiscretizationInconsistency(f"stage {instance.k}: routes disagree by {gap:.2%}")
    return rep


# ---------------------------------------------------------------- seminorm


def _fourth_order(func, pts: np.ndarray, alpha: tuple, steps: np.ndarray) -> np.ndarray:
    """Tensor product of fourth-order central stencils (independent of the certifier's scheme)."""
    st = {
        0: ((0, 1.0),),
        1: ((2, -1 / 12), (1, 8 / 12), (-1, -8 / 12), (-2, 1 / 12)),
        2: ((2, -1 / 12), (1, 16 / 12), (0, -30 / 12), (-1, 16 / 12), (-2, -1 / 12)),
    }
    if any(a > 2 for a in alpha):
        raise InvalidArgumentError("stencils available for per-axis order <= 2")
    out = np.zeros(len(pts), dtype=complex)
    for combo in itertools.product(*[st[a] for a in alpha]):
        shift = np.array([s for s, _ in combo], dtype=float) * steps
        out += float(np.prod([c for _, c in combo])) * np.asarray(func(pts + shift))
    return out / float(np.prod(steps ** np.asarray(alpha, dtype=float)))


def seminorm_estimate(sigma: Callable, profile: WeightProfile, order: OrderFunction, N: int, probe,
                      steps=None, per_alpha: bool = False):
    """``sum_{|alpha| <= N} max_probe lam^-1 psi^alpha |D^alpha sigma|``."""
    pts = as_points(probe, profile.dimension)
    n = profile.dimension
    if steps is None:
        steps = 1e-3 * np.ones(n)
    steps = np.asarray(steps, dtype=float)
    psi = profile(pts)
    lam = order(pts)
    terms = {}
    for alpha in multi_indices(n, N):
        d = _fourth_order(sigma, pts, alpha, steps)
        w = np.prod(psi ** np.asarray(alpha, dtype=float), axis=1) / lam
        terms[",".join(map(str, alpha))] = float(np.max(np.abs(d) * w))
    total = float(sum(terms.values()))
    return (total, terms) if per_alpha else total


def norm_report_csv(reports: list[RatioReport]) -> str:
    import csv

    buf = io.StringIO()
    rows = [r.row() for r in reports]
    if not rows:
        return ""
    w = csv.DictWriter(buf, list(rows[0].keys()))
    w.writeheader()
    for row in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in row.items()})
    return buf.getvalue()
