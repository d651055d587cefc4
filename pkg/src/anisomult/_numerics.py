"""Small numerical kernels used across modules: piecewise Chebyshev tables,
Gauss-Jacobi rules for integrands with power-law zeros, log-log slope fits."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.special import roots_jacobi

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class ChebyshevTable:
    """Piecewise Chebyshev interpolant of an even function on ``[-radius, radius]``.

    Panels of width ``panel`` tile ``[0, radius]``. Outside the table the value
    is ``outside`` (the caller documents the tail that this discards).
    """

    coeffs: np.ndarray  # (panels, degree + 1)
    panel: float
    radius: float
    outside: float = 0.0

    @classmethod
    def build(cls, func, radius: float, panel: float = 1.0, degree: int = 24) -> "ChebyshevTable":
        panels = int(np.ceil(radius / panel))
        n = degree + 1
        nodes = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        left = panel * np.arange(panels)[:, None]
        pts = left + 0.5 * panel * (nodes[None, :] + 1.0)
        vals = np.asarray(func(pts.ravel()), dtype=float).reshape(panels, n)
        # DCT-II of values at first-kind nodes gives Chebyshev coefficients
        c = scipy.fft.dct(vals, type=2, axis=1) / n
        c[:, 0] *= 0.5
        return cls(coeffs=c, panel=panel, radius=panels * panel)

    def __call__(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        shape = t.shape
        t = t.ravel()
        out = np.full(t.shape, self.outside)
        inside = t < self.radius
        ti = t[inside]
        idx = np.minimum((ti / self.panel).astype(np.int64), len(self.coeffs) - 1)
        x = 2.0 * (ti - idx * self.panel) / self.panel - 1.0
        c = self.coeffs[idx]
        # Clenshaw recurrence, one coefficient row per point
        b1 = np.zeros_like(x)
        b2 = np.zeros_like(x)
        for k in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * x * b1 - b2 + c[:, k], b1
        out[inside] = x * b1 - b2 + c[:, 0]
        return out.reshape(shape)


@lru_cache(maxsize=64)
def jacobi_rule(order: int, power: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [-1, 1] for weight ``(1 - x)^power (1 + x)^power``."""
    x, w = roots_jacobi(order, power, power)
    return x, w


def lobe_integral(func, a: np.ndarray, b: np.ndarray, p: float, order: int) -> float:
    """Sum over intervals ``[a_i, b_i]`` of the integral of ``|g|^p`` where ``g``
    vanishes linearly at both endpoints.

    ``func(t)`` must return ``|g(t)|^p / ((t - a)(b - t))^p`` evaluated on the
    node array of shape ``(intervals, order)``, i.e. the smooth part; this
    function supplies the Gauss-Jacobi weights that absorb the power zeros.
    """
    x, w = jacobi_rule(order, float(p))
    mid = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    t = mid[:, None] + hw[:, None] * x[None, :]
    smooth = func(t, mid, hw)
    return float(np.sum((hw[:, None] ** (1.0 + 2.0 * p)) * smooth * w[None, :]))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    xs: tuple
    ys: tuple


def fit_loglog_slope(xs, ys, top_half: bool = True) -> SlopeFit:
    """Least-squares slope of ``log y`` against ``log x``.

    With ``top_half`` only the upper half of the schedule (at least three
    points) enters the fit, where asymptotic constants have settled.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise InvalidArgumentError(f"slope fit needs at least 3 points, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidArgumentError("log-log fit requires positive data")
    if top_half:
        keep = max(3, (xs.size + 1) // 2)
        xs, ys = xs[-keep:], ys[-keep:]
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = lx.size - 2
    if dof > 0:
        resid = ly - A @ coef
        s2 = float(resid @ resid) / dof
        stderr = float(np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2)))
    else:
        stderr = 0.0
    return SlopeFit(float(coef[0]), float(coef[1]), stderr, tuple(xs), tuple(ys))


def next_pow2(n: float) -> int:
    return 1 << int(np.ceil(np.log2(max(2.0, n))))


@dataclass(frozen=True)
class NormReport:
    """An ``L^p`` norm with its truncation tail bound and the value change
    observed under a 2x resolution refinement."""

    p: float
    value: float
    tail_bound: float
    refinement_delta: float
    meta: dict | None = None

    @property
    def relative_delta(self) -> float:
        return self.refinement_delta / self.value if self.value else float("inf")

    def row(self) -> dict:
        return {"p": self.p, "norm": self.value, "tail_bound": self.tail_bound,
                "refinement_delta": self.refinement_delta}
