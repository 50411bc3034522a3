"""Variable fractional order in time and the offset-point schedule.

The evaluators in this package collocate the derivative of step k at the
offset point t_{k+sigma_k}, where sigma_k in (1/2, 1) is the root of

    F(sigma) = sigma - 1 + alpha(t_k + sigma*dt)/2 = 0.

For a constant order the root is 1 - alpha/2 in closed form; for a genuine
variable order it is found numerically once per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma

__all__ = [
    "OrderFunction",
    "TemporalMesh",
    "SigmaSchedule",
    "constant_order",
    "sin4_order",
    "tabulated_order",
    "order_from_spec",
    "solve_sigma",
    "build_schedule",
]

# sigma lives strictly inside (1/2, 1); the closed interval endpoints are
# excluded by the nudge so the bisection bracket is always valid.
_SIGMA_LO = 0.5 + 1e-12
_SIGMA_HI = 1.0 - 1e-12


@dataclass(frozen=True)
class OrderFunction:
    """Fractional order alpha(t) together with certified bounds.

    Parameters
    ----------
    evaluate : callable
        Maps a time t >= 0 to the order alpha(t).
    alpha_lo, alpha_hi : float
        Claimed bounds with 0 < alpha_lo <= alpha(t) <= alpha_hi < 1.
        They are spot-checked on a dense sample when the function is bound
        to a temporal mesh (see `check_bounds`).
    """

    evaluate: Callable[[float], float]
    alpha_lo: float
    alpha_hi: float

    def __post_init__(self):
        if not (0.0 < self.alpha_lo <= self.alpha_hi < 1.0):
            raise ValueError(
                f"order bounds must satisfy 0 < lo <= hi < 1, got "
                f"[{self.alpha_lo}, {self.alpha_hi}]"
            )

    def __call__(self, t: float) -> float:
        return float(self.evaluate(t))

    def check_bounds(self, t_max: float, samples: int = 1000) -> None:
        """Spot-check the claimed bounds on a dense sample of [0, t_max]."""
        for t in np.linspace(0.0, t_max, samples):
            a = float(self.evaluate(t))
            if not (self.alpha_lo <= a <= self.alpha_hi):
                raise ValueError(
                    f"order function leaves [{self.alpha_lo}, {self.alpha_hi}] "
                    f"at t={t:.6g} (alpha={a:.6g})"
                )


def constant_order(a: float) -> OrderFunction:
    """Constant order alpha(t) = a."""
    return OrderFunction(lambda t: a, a, a)


def sin4_order() -> OrderFunction:
    """alpha(t) = (2 + sin t)/4, ranging over [1/4, 3/4]."""
    return OrderFunction(lambda t: (2.0 + math.sin(t)) / 4.0, 0.25, 0.75)


def tabulated_order(times, values) -> OrderFunction:
    """Piecewise-linear order through (time, value) pairs.

    Outside the table the nearest value is held constant.
    """
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    if times.ndim != 1 or times.shape != values.shape or len(times) < 1:
        raise ValueError("need matching 1-d time and value tables")
    if np.any(np.diff(times) <= 0):
        raise ValueError("table times must be strictly increasing")
    lo = float(values.min())
    hi = float(values.max())
    return OrderFunction(lambda t: float(np.interp(t, times, values)), lo, hi)


def order_from_spec(spec: str) -> OrderFunction:
    """Build an order function from a short name.

    Accepted forms: ``const:<a>``, ``sin4``, ``tab:t0:a0,t1:a1,...``.
    """
    spec = spec.strip()
    if spec == "sin4":
        return sin4_order()
    if spec.startswith("const:"):
        return constant_order(float(spec[len("const:"):]))
    if spec.startswith("tab:"):
        pairs = []
        for chunk in spec[len("tab:"):].split(","):
            t, _, v = chunk.partition(":")
            if not _:
                raise ValueError(f"bad table entry {chunk!r} in {spec!r}")
            pairs.append((float(t), float(v)))
        times, values = zip(*pairs)
        return tabulated_order(times, values)
    raise ValueError(f"unknown order spec {spec!r}")


@dataclass(frozen=True)
class TemporalMesh:
    """Uniform time grid t_k = k*dt covering [0, T] with T >= 1."""

    T: float
    n: int

    def __post_init__(self):
        if self.T < 1.0:
            raise ValueError(f"final time must satisfy T >= 1, got {self.T}")
        if self.n < 1:
            raise ValueError(f"need at least one step, got n={self.n}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    def node(self, k: int) -> float:
        return k * self.dt


def solve_sigma(order_fn: OrderFunction, t_k: float, dt: float,
                tol: float = 1e-14, max_iter: int = 50) -> float:
    """Root of F(sigma) = sigma - 1 + alpha(t_k + sigma*dt)/2 in (1/2, 1).

    Newton from sigma = 0.75 with a finite-difference slope; falls back to
    bisection if an iterate leaves (1/2, 1) or Newton stalls.  The root is
    unique because F is increasing in sigma for any order in (0, 1) with
    bounded variation over one step.
    """

    def f(s: float) -> float:
        a = order_fn(t_k + s * dt)
        if not (0.0 < a < 1.0):
            raise ValueError(
                f"order out of (0,1) during sigma solve: alpha({t_k + s * dt:.6g})={a:.6g}"
            )
        return s - 1.0 + 0.5 * a

    s = 0.75
    fd = 1e-7
    for _ in range(max_iter):
        fs = f(s)
        if abs(fs) <= tol:
            if _SIGMA_LO <= s <= _SIGMA_HI:
                return s
            break
        slope = (f(min(s + fd, _SIGMA_HI)) - f(max(s - fd, _SIGMA_LO))) / (
            min(s + fd, _SIGMA_HI) - max(s - fd, _SIGMA_LO))
        if slope <= 0.0:
            break
        s = s - fs / slope
        if not (_SIGMA_LO < s < _SIGMA_HI):
            break
    return _bisect_sigma(f, tol)


def _bisect_sigma(f, tol: float) -> float:
    a, b = _SIGMA_LO, _SIGMA_HI
    fa, fb = f(a), f(b)
    if fa > 0.0 or fb < 0.0:
        raise RuntimeError(
            "sigma root solve failed: no sign change on (1/2, 1); "
            "the order function is pathological on this step")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) <= tol or (b - a) < 4.0 * np.finfo(float).eps:
            return mid
        if fm < 0.0:
            a = mid
        else:
            b = mid
    raise RuntimeError("sigma root solve failed to converge")


@dataclass(frozen=True)
class SigmaSchedule:
    """Per-step offsets and frozen-order factors for one temporal mesh.

    Attributes
    ----------
    dt, T : float
        Step size and final time of the underlying mesh.
    sigma : ndarray, shape (n,)
        Offsets sigma_k in (1/2, 1).
    t_sigma : ndarray
        Collocation times t_{k+sigma_k} = (k + sigma_k)*dt.
    alpha_sigma : ndarray
        Orders frozen at the collocation times.
    s_factor : ndarray
        Scale factors s^{(k)} = dt^{-alpha}/Gamma(2-alpha), all positive.
    """

    dt: float
    T: float
    sigma: np.ndarray
    t_sigma: np.ndarray
    alpha_sigma: np.ndarray
    s_factor: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sigma)


def build_schedule(mesh: TemporalMesh, order_fn: OrderFunction,
                   tol: float = 1e-14) -> SigmaSchedule:
    """Solve the offset equation on every step of `mesh`."""
    order_fn.check_bounds(mesh.T)
    dt = mesh.dt
    n = mesh.n
    sigma = np.empty(n)
    t_sigma = np.empty(n)
    alpha_sigma = np.empty(n)
    for k in range(n):
        sigma[k] = solve_sigma(order_fn, mesh.node(k), dt, tol=tol)
        t_sigma[k] = (k + sigma[k]) * dt
        alpha_sigma[k] = order_fn(t_sigma[k])
    s_factor = dt ** (-alpha_sigma) / gamma(2.0 - alpha_sigma)
    return SigmaSchedule(dt=dt, T=mesh.T, sigma=sigma, t_sigma=t_sigma,
                         alpha_sigma=alpha_sigma, s_factor=s_factor)
