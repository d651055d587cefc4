"""Weight profiles psi = (psi_1, ..., psi_n) and order functions lambda.

Both are immutable wrappers around vectorized callables: a component takes an
array of points of shape ``(m, n)`` and returns ``(m,)`` values. Named families
carry their parameters so they can be rebuilt from a configuration record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvalidPairError, InvalidPointError, ProfileViolationError

Component = Callable[[np.ndarray], np.ndarray]

FAMILIES = ("isotropic-power", "beals-radial", "nagel-stein", "custom")


def as_points(xi, n: int) -> np.ndarray:
    """Coerce ``xi`` to a finite float array of shape ``(m, n)``."""
    a = np.asarray(xi, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, n) if n == 1 and a.size != 1 else a.reshape(1, -1)
    if a.shape[-1] != n:
        raise InvalidPointError(f"expected points in R^{n}, got shape {np.shape(xi)}")
    if not np.all(np.isfinite(a)):
        raise InvalidPointError("non-finite point")
    return a


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def bracket_L(x: np.ndarray, L: Sequence[float]) -> np.ndarray:
    """The anisotropic bracket ``1 + sum_j |x_j|^(1/L_j)``."""
    L = np.asarray(L, dtype=float)
    return 1.0 + np.sum(np.abs(x) ** (1.0 / L), axis=-1)


@dataclass(frozen=True)
class WeightProfile:
    dimension: int
    components: tuple[Component, ...]
    family: str = "custom"
    params: dict = field(default_factory=dict)
    radial: Callable[[np.ndarray], np.ndarray] | None = None
    box_constant: float | None = None  # perturbation box size for the slowly-varying probe

    def __post_init__(self):
        if self.dimension < 1 or len(self.components) != self.dimension:
            raise InvalidArgumentError("profile needs exactly one component per dimension")
        if self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown family {self.family!r}")

    def __call__(self, xi) -> np.ndarray:
        pts = as_points(xi, self.dimension)
        return np.stack([np.asarray(c(pts), dtype=float).reshape(len(pts)) for c in self.components], axis=-1)


@dataclass(frozen=True)
class OrderFunction:
    func: Component
    sup_bound: float
    dimension: int
    family: str = "custom"
    params: dict = field(default_factory=dict)
    radial: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, xi) -> np.ndarray:
        pts = as_points(xi, self.dimension)
        return np.asarray(self.func(pts), dtype=float).reshape(len(pts))

    def scaled(self, a: float) -> "OrderFunction":
        if a <= 0:
            raise InvalidArgumentError("order scale must be positive")
        f = self.func
        rad = self.radial
        return OrderFunction(
            lambda x: a * f(x),
            a * self.sup_bound,
            self.dimension,
            self.family,
            {**self.params, "scale": a * self.params.get("scale", 1.0)},
            None if rad is None else (lambda t: a * rad(t)),
        )


# ---------------------------------------------------------------- families


def isotropic_power(n: int, rho) -> WeightProfile:
    """``psi_j(xi) = (1 + |xi|)^rho_j``; ``rho = 0`` gives the constant profile."""
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (n,)).copy()
    comps = tuple((lambda x, r=r: (1.0 + _norm(x)) ** r) for r in rho)
    radial = (lambda t, r=rho[0]: (1.0 + np.asarray(t, dtype=float)) ** r) if np.all(rho == rho[0]) else None
    return WeightProfile(n, comps, "isotropic-power", {"rho": rho.tolist()}, radial)


def beals_radial(n: int, rho: float = 1.0, Psi: Callable | None = None) -> WeightProfile:
    """Equal radial components ``psi_j(xi) = Psi(|xi|)``, default ``Psi(t) = (1 + t)^rho``."""
    if Psi is None:
        Psi = lambda t, r=float(rho): (1.0 + np.asarray(t, dtype=float)) ** r  # noqa: E731
        params = {"rho": float(rho)}
    else:
        params = {"Psi": getattr(Psi, "__name__", "custom")}
    comps = tuple((lambda x: Psi(_norm(x))) for _ in range(n))
    return WeightProfile(n, comps, "beals-radial", params, Psi)


def nagel_stein(L: Sequence[float], rho: Sequence[float]) -> WeightProfile:
    """``psi_j(xi) = [xi]_L^(rho_j L_j)`` with ``[xi]_L = 1 + sum |xi_j|^(1/L_j)``."""
    L = [float(v) for v in L]
    rho = [float(v) for v in rho]
    if len(L) != len(rho):
        raise InvalidArgumentError("L and rho need one entry per axis")
    comps = tuple((lambda x, e=r * l: bracket_L(x, L) ** e) for r, l in zip(rho, L))
    return WeightProfile(len(L), comps, "nagel-stein", {"L": L, "rho": rho})


def custom_profile(components: Sequence[Component], box_constant: float | None = None) -> WeightProfile:
    return WeightProfile(len(components), tuple(components), "custom", {}, None, box_constant)


def constant_order(n: int, a: float = 1.0) -> OrderFunction:
    return OrderFunction(
        lambda x: np.full(len(x), float(a)), float(a), n, "constant", {"a": float(a)},
        lambda t: np.full(np.shape(t), float(a)),
    )


def power_order(n: int, m: float) -> OrderFunction:
    """``lambda(xi) = (1 + |xi|)^(-m)``, non-increasing and radial."""
    m = float(m)
    if m < 0:
        raise InvalidArgumentError("power order needs m >= 0 to stay bounded")
    return OrderFunction(
        lambda x: (1.0 + _norm(x)) ** (-m), 1.0, n, "power", {"m": m},
        lambda t: (1.0 + np.asarray(t, dtype=float)) ** (-m),
    )


def nagel_stein_order(L: Sequence[float], m: float) -> OrderFunction:
    L = [float(v) for v in L]
    m = float(m)
    if m < 0:
        raise InvalidArgumentError("order exponent m must be >= 0")
    return OrderFunction(lambda x: bracket_L(x, L) ** (-m), 1.0, len(L), "nagel-stein", {"L": L, "m": m})


def custom_order(func: Component, sup_bound: float, n: int) -> OrderFunction:
    return OrderFunction(func, float(sup_bound), n)


def profile_from_config(record: dict, n: int) -> WeightProfile:
    fam = record.get("family")
    if fam == "isotropic-power":
        return isotropic_power(n, record.get("rho", 1.0))
    if fam == "beals-radial":
        return beals_radial(n, record.get("rho", 1.0))
    if fam == "nagel-stein":
        prof = nagel_stein(record["L"], record["rho"])
        if prof.dimension != n:
            raise InvalidArgumentError("nagel-stein L/rho length must equal the dimension")
        return prof
    raise InvalidArgumentError(f"weight family {fam!r} is not constructible from configuration")


def order_from_config(record: dict, n: int) -> OrderFunction:
    fam = record.get("family", "constant")
    if fam == "constant":
        return constant_order(n, record.get("a", 1.0))
    if fam == "power":
        return power_order(n, record.get("m", 0.0))
    if fam == "nagel-stein":
        return nagel_stein_order(record["L"], record.get("m", 0.0))
    raise InvalidArgumentError(f"order family {fam!r} is not constructible from configuration")


# ---------------------------------------------------------------- operations


def evaluate_profile(profile: WeightProfile, xi) -> np.ndarray:
    """Return ``(psi_1(xi), ..., psi_n(xi))``; shape ``(n,)`` for one point, ``(m, n)`` for many."""
    single = np.ndim(xi) <= 1 and not (profile.dimension == 1 and np.size(xi) > 1)
    vals = profile(xi)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise ProfileViolationError("weight component is non-positive or non-finite")
    return vals[0] if single else vals


def evaluate_order(order: OrderFunction, xi) -> np.ndarray:
    vals = order(xi)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0) or np.any(vals > order.sup_bound * (1 + 1e-12)):
        raise ProfileViolationError("order function outside (0, sup_bound]")
    return vals


@dataclass(frozen=True)
class SlowlyVaryingReport:
    psi_ratio_min: np.ndarray
    psi_ratio_max: np.ndarray
    order_ratio_min: float
    order_ratio_max: float
    lower: float
    upper: float
    box_constant: float
    probe_points: np.ndarray
    perturbations: int
    passed: bool


def check_slowly_varying(
    profile: WeightProfile,
    order: OrderFunction,
    probe_points,
    *,
    lower: float = 0.1,
    upper: float = 10.0,
    box_constant: float | None = None,
    perturbations: int = 64,
    seed: int = 0,
) -> SlowlyVaryingReport:
    """Empirical ratio ranges of ``psi_j(xi + eta) / psi_j(xi)`` and of the order,
    with ``|eta_h| <= box_constant * psi_h(xi)``.

    ``box_constant`` falls back to the profile's declared value, then to 1/2;
    it is independent of the ratio bounds ``[lower, upper]``.
    """
    pts = as_points(probe_points, profile.dimension)
    if len(pts) == 0:
        raise InvalidArgumentError("empty probe set")
    c = box_constant if box_constant is not None else (profile.box_constant or 0.5)
    rng = np.random.default_rng(seed)
    psi0 = profile(pts)
    lam0 = order(pts)
    u = rng.uniform(-1.0, 1.0, size=(len(pts), perturbations, profile.dimension))
    eta = c * psi0[:, None, :] * u
    moved = (pts[:, None, :] + eta).reshape(-1, profile.dimension)
    with np.errstate(over="ignore", invalid="ignore"):
        psi1 = profile(moved).reshape(len(pts), perturbations, -1)
        lam1 = order(moved).reshape(len(pts), perturbations)
        rpsi = psi1 / psi0[:, None, :]
        rlam = lam1 / lam0[:, None]
    rpsi = np.where(np.isfinite(rpsi), rpsi, np.inf)
    rlam = np.where(np.isfinite(rlam), rlam, np.inf)
    pmin, pmax = rpsi.min(axis=(0, 1)), rpsi.max(axis=(0, 1))
    lmin, lmax = float(rlam.min()), float(rlam.max())
    ok = bool(np.all(pmin >= lower) and np.all(pmax <= upper) and lmin >= lower and lmax <= upper)
    return SlowlyVaryingReport(pmin, pmax, lmin, lmax, lower, upper, c, pts, perturbations, ok)


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    violations: list


def check_coordinate_monotone(profile: WeightProfile, order: OrderFunction, probe_pairs) -> MonotoneReport:
    """Check ``psi_j(eta) <= psi_j(xi)`` and ``lambda(eta) >= lambda(xi)`` on pairs ``(eta, xi)``
    with ``|eta_h| < |xi_h|`` for every axis."""
    violations = []
    n = profile.dimension
    for i, (eta, xi) in enumerate(probe_pairs):
        eta = as_points(eta, n)[0]
        xi = as_points(xi, n)[0]
        if not np.all(np.abs(eta) < np.abs(xi)):
            raise InvalidPairError(f"pair {i}: need |eta_h| < |xi_h| on every axis")
        pe, px = profile(eta)[0], profile(xi)[0]
        le, lx = order(eta)[0], order(xi)[0]
        bad = np.nonzero(pe > px)[0].tolist()
        if bad or le < lx:
            violations.append({"pair": i, "eta": eta.tolist(), "xi": xi.tolist(), "axes": bad, "order": bool(le < lx)})
    return MonotoneReport(not violations, violations)
