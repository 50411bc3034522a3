"""Exponential-sum compression of the power-law kernel s^(-alpha).

One trapezoid ladder on the integral representation

    s^(-alpha) = (1/Gamma(alpha)) * int_R exp(alpha*x - s*e^x) dx

serves every order alpha in [alpha_lo, alpha_hi] simultaneously: the nodes
lambda_i = e^(i*h) are order-independent, only the weights
theta_i(alpha) = h*e^(alpha*i*h)/Gamma(alpha) depend on alpha.  The ladder
is certified to a relative tolerance epsilon on s in [dt/(2T), 1], which is
exactly the range the time-stepping formulas probe after rescaling by T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

__all__ = [
    "ExpSumParams",
    "ExpSumQuadrature",
    "CertifyReport",
    "compute_params",
    "build_quadrature",
    "quadrature_from_params",
    "certify",
]

# Orders are sampled this densely when maximizing truncation bounds over
# [alpha_lo, alpha_hi]; the bounds are smooth in alpha so 257 points is
# far more than enough.
_ALPHA_SAMPLES = 257

# Each truncation tail gets a third of epsilon; the remaining third covers
# the discretization error of the trapezoid ladder itself.
_TAIL_SHARE = 1.0 / 3.0


@dataclass(frozen=True)
class ExpSumParams:
    """Ladder geometry for one (epsilon, order range, dt, T) combination.

    The ladder has nodes at x_i = i*h for integer i in (n_lo, n_hi]; n_lo is
    typically a large negative integer.
    """

    epsilon: float
    h: float
    n_lo: int
    n_hi: int
    alpha_lo: float
    alpha_hi: float
    dt: float
    T: float

    @property
    def size(self) -> int:
        return self.n_hi - self.n_lo

    @property
    def s_min(self) -> float:
        """Left end of the certified range of s."""
        return 0.5 * self.dt / self.T


@dataclass(frozen=True)
class ExpSumQuadrature:
    """Materialized ladder: decay rates plus order-dependent weights."""

    params: ExpSumParams
    indices: np.ndarray
    lambdas: np.ndarray

    @property
    def size(self) -> int:
        return len(self.lambdas)

    def weights(self, alpha: float) -> np.ndarray:
        """theta_i = h * e^(alpha*i*h) / Gamma(alpha) for one order value."""
        p = self.params
        if not (p.alpha_lo <= alpha <= p.alpha_hi):
            raise ValueError(
                f"alpha={alpha} outside certified range [{p.alpha_lo}, {p.alpha_hi}]")
        # log-domain: e^(alpha*i*h) spans hundreds of orders of magnitude but
        # every individual weight is representable.
        return p.h * np.exp(alpha * self.indices * p.h) / gamma(alpha)

    def kernel(self, alpha: float, s) -> np.ndarray:
        """Ladder approximation of s^(-alpha) at abscissae s."""
        s = np.asarray(s, float)
        flat = np.atleast_1d(s).ravel()
        # exponent alpha*i*h - s*e^(i*h) assembled before a single exp so the
        # huge weight and the tiny decay never meet as separate factors
        expo = alpha * self.indices * self.params.h - np.outer(flat, self.lambdas)
        np.clip(expo, -745.0, None, out=expo)
        vals = self.params.h * np.exp(expo).sum(axis=1) / gamma(alpha)
        return vals.reshape(s.shape) if s.shape else float(vals[0])


def _lower_tail(h: float, n: int, agrid: np.ndarray, ga1: np.ndarray) -> float:
    # Sum of h*e^(alpha*i*h)/Gamma(alpha) over i <= n, worst case over the
    # order grid.  Geometric in i, so it has the closed form below; ga1 holds
    # Gamma(1+alpha) = alpha*Gamma(alpha).
    x = agrid * h
    return float(np.max(np.exp(agrid * n * h) * x / (-np.expm1(-x)) / ga1))


def _upper_tail(h: float, n: int, s_min: float, agrid: np.ndarray,
                ga: np.ndarray) -> float:
    # Relative tail sum s^alpha * h * e^(alpha*i*h - s*e^(i*h)) / Gamma(alpha)
    # over i > n, at the worst abscissa s = s_min (the tail grows as s shrinks).
    # Terms past s*e^x > 746 underflow to zero exactly, which bounds the
    # number of terms that need summing.
    x_stop = math.log(746.0 / s_min)
    count = max(int(math.ceil(x_stop / h)) - n, 1)
    x = (n + 1 + np.arange(count)) * h
    expo = np.outer(agrid, x) - (s_min * np.exp(x))[None, :]
    np.clip(expo, -745.0, None, out=expo)
    return float(np.max((s_min ** agrid) * h * np.exp(expo).sum(axis=1) / ga))


def compute_params(epsilon: float, alpha_lo: float, alpha_hi: float,
                   dt: float, T: float) -> ExpSumParams:
    """Choose step and truncation indices for the given tolerance.

    The step h comes from the discretization-error estimate of the trapezoid
    ladder; the truncation indices are then the minimal integers whose tail
    bounds fit inside epsilon/3 each, maximized over the whole order range
    and over s down to dt/(2T).

    Raises
    ------
    ValueError
        If epsilon > 1/e, the order bounds are invalid, dt/T is out of range,
        or the tolerance is so loose that the ladder would be empty.
    """
    if not (0.0 < epsilon <= 1.0 / math.e):
        raise ValueError(f"epsilon must lie in (0, 1/e], got {epsilon}")
    if not (0.0 < alpha_lo <= alpha_hi < 1.0):
        raise ValueError(
            f"order bounds must satisfy 0 < lo <= hi < 1, got [{alpha_lo}, {alpha_hi}]")
    if not (0.0 < dt <= T):
        raise ValueError(f"need 0 < dt <= T, got dt={dt}, T={T}")

    h = 2.0 * math.pi / (math.log(3.0)
                         + alpha_hi * math.log(1.0 / math.cos(1.0))
                         + math.log(1.0 / epsilon))
    budget = epsilon * _TAIL_SHARE
    agrid = np.linspace(alpha_lo, alpha_hi, _ALPHA_SAMPLES)
    ga = gamma(agrid)
    ga1 = gamma(1.0 + agrid)

    # Lower truncation: start from the closed-form estimate, then walk to the
    # minimal |n_lo| meeting the budget (the estimate is usually a few rungs
    # off because it ignores the geometric prefactor).
    n_lo = int(math.ceil((math.log(epsilon) + math.lgamma(1.0 + alpha_hi))
                         / (h * alpha_lo)))
    while _lower_tail(h, n_lo, agrid, ga1) > budget:
        n_lo -= 1
    while _lower_tail(h, n_lo + 1, agrid, ga1) <= budget:
        n_lo += 1

    s_min = 0.5 * dt / T
    n_hi = int(math.floor((math.log(T / dt)
                           + math.log(math.log(1.0 / epsilon))
                           + math.log(1.0 / alpha_lo) + 0.5) / h))
    while _upper_tail(h, n_hi, s_min, agrid, ga) > budget:
        n_hi += 1
    while _upper_tail(h, n_hi - 1, s_min, agrid, ga) <= budget:
        n_hi -= 1

    if n_hi <= n_lo:
        raise ValueError(
            f"empty quadrature: epsilon={epsilon} is too loose for dt/T={dt / T:.3g}; "
            "tighten epsilon or refine the time grid")
    return ExpSumParams(epsilon=epsilon, h=h, n_lo=n_lo, n_hi=n_hi,
                        alpha_lo=alpha_lo, alpha_hi=alpha_hi, dt=dt, T=T)


def quadrature_from_params(params: ExpSumParams) -> ExpSumQuadrature:
    indices = np.arange(params.n_lo + 1, params.n_hi + 1)
    return ExpSumQuadrature(params=params, indices=indices,
                            lambdas=np.exp(indices * params.h))


def build_quadrature(epsilon: float, alpha_lo: float, alpha_hi: float,
                     dt: float, T: float) -> ExpSumQuadrature:
    """One-call constructor: parameters plus materialized nodes."""
    return quadrature_from_params(
        compute_params(epsilon, alpha_lo, alpha_hi, dt, T))


@dataclass(frozen=True)
class CertifyReport:
    """Measured worst-case relative error of a ladder over its certified range."""

    max_rel_err: float
    s_at_max: float
    alpha_at_max: float
    epsilon: float
    passed: bool


def certify(quad: ExpSumQuadrature, samples: int = 10_000,
            n_alpha: int = 9) -> CertifyReport:
    """Sweep the certified range and report the worst relative error.

    Abscissae are log-spaced on [dt/(2T), 1]; orders are equispaced on
    [alpha_lo, alpha_hi] including both endpoints.
    """
    if samples < 2:
        raise ValueError("need at least two abscissae")
    p = quad.params
    s = np.geomspace(p.s_min, 1.0, samples)
    alphas = np.linspace(p.alpha_lo, p.alpha_hi, max(n_alpha, 2))
    worst = -1.0
    s_at = a_at = float("nan")
    for a in alphas:
        rel = np.abs(quad.kernel(a, s) * s ** a - 1.0)
        j = int(np.argmax(rel))
        if rel[j] > worst:
            worst = float(rel[j])
            s_at, a_at = float(s[j]), float(a)
    return CertifyReport(max_rel_err=worst, s_at_max=s_at, alpha_at_max=a_at,
                         epsilon=p.epsilon, passed=worst <= p.epsilon)
