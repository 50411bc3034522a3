"""Direct evaluator for the variable-order Caputo derivative.

At step k the derivative value at the offset point t_{k+sigma_k} is

    s^{(k)} * sum_{l=0}^{k} g_l^{(k)} (u^{k-l+1} - u^{k-l}),

with dimensionless coefficients g_l^{(k)} coming from exact integration of a
piecewise interpolant: quadratic on history panels, linear on the current
panel.  Cost and storage are quadratic/linear in k, which is what the fast
evaluator in `fast` removes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad as _quad
from scipy.special import gamma

from .order import OrderFunction, SigmaSchedule

__all__ = ["g_row", "evaluate_direct", "scan_direct", "caputo_oracle"]

# Switch to the expm1/log1p form of c^p - (c-1)^p once 1/c drops below this;
# the naive difference loses roughly eps/(p/c) relative accuracy there.
_DIFF_SWITCH = 1e-4


def _pow_diff(c, p: float):
    """c**p - (c-1)**p, stable for large c."""
    c = np.asarray(c, float)
    naive = c ** p - (c - 1.0) ** p
    stable = (c ** p) * (-np.expm1(p * np.log1p(-1.0 / c)))
    return np.where(1.0 / c < _DIFF_SWITCH, stable, naive)


def _p_integral(c, a: float):
    # int_0^1 (s - 1/2) (c - s)^(-a) ds for c > 1
    d1 = _pow_diff(c, 1.0 - a)
    d2 = _pow_diff(c, 2.0 - a)
    return (c - 0.5) * d1 / (1.0 - a) - d2 / (2.0 - a)


def _q_integral(c, a: float):
    # int_0^1 (3/2 - s) (c - s)^(-a) ds for c >= 1
    d1 = _pow_diff(c, 1.0 - a)
    d2 = _pow_diff(c, 2.0 - a)
    return (1.5 - c) * d1 / (1.0 - a) + d2 / (2.0 - a)


def g_row(k: int, schedule: SigmaSchedule) -> np.ndarray:
    """Dimensionless coefficients g_0..g_k of the direct formula at step k.

    The evaluator multiplies the row by the scale factor s^{(k)} held in the
    schedule.  Row l weights the difference u^{k-l+1} - u^{k-l}.
    """
    if not (0 <= k < schedule.n):
        raise ValueError(f"step {k} outside schedule of length {schedule.n}")
    sig = schedule.sigma[k]
    a = schedule.alpha_sigma[k]
    if k == 0:
        return np.array([sig ** (1.0 - a)])
    g = np.empty(k + 1)
    g[0] = (1.0 - a) * float(_p_integral(1.0 + sig, a)) + sig ** (1.0 - a)
    if k > 1:
        l = np.arange(1.0, k)
        g[1:k] = (1.0 - a) * (_p_integral(l + 1.0 + sig, a)
                              + _q_integral(l + sig, a))
    g[k] = (1.0 - a) * float(_q_integral(k + sig, a))
    return g


def evaluate_direct(history, row: np.ndarray, s_k: float) -> float:
    """Apply one coefficient row to a scalar history u^0..u^{k+1}.

    The k+1 difference terms are accumulated with compensated summation;
    for large k they carry alternating magnitudes and a plain left-to-right
    sum loses digits the convergence tests can see.
    """
    u = np.asarray(history, float)
    if u.ndim != 1 or len(u) != len(row) + 1:
        raise ValueError(
            f"history holds {len(u)} levels, row of length {len(row)} needs {len(row) + 1}")
    terms = row[::-1] * np.diff(u)
    return s_k * math.fsum(terms.tolist())


def scan_direct(u, schedule: SigmaSchedule) -> np.ndarray:
    """Direct derivative values at every offset point t_{k+sigma_k}.

    Parameters
    ----------
    u : array, shape (n+1,)
        Scalar samples on the mesh nodes.
    """
    u = np.asarray(u, float)
    n = schedule.n
    if u.shape != (n + 1,):
        raise ValueError(f"need {n + 1} node values, got shape {u.shape}")
    out = np.empty(n)
    for k in range(n):
        out[k] = evaluate_direct(u[:k + 2], g_row(k, schedule),
                                 schedule.s_factor[k])
    return out


def caputo_oracle(u_prime, order_fn: OrderFunction, t: float,
                  tol: float = 1e-12) -> float:
    """Adaptive-quadrature reference value of the derivative at time t.

    Computes (1/Gamma(1-a)) * int_0^t u'(tau) (t-tau)^(-a) dtau with the
    order frozen at a = alpha(t).  The integral is split at t/2; on the
    singular half the substitution tau = t - s^(1/(1-a)) removes the
    endpoint singularity entirely, so plain adaptive quadrature converges
    fast on both pieces.  Raises if the estimated quadrature error exceeds
    the requested tolerance.
    """
    if t <= 0.0:
        raise ValueError(f"oracle needs t > 0, got {t}")
    a = order_fn(t)
    ga = gamma(1.0 - a)
    # after dividing by Gamma(1-a) >= 1 the raw budget only shrinks
    budget = 0.5 * tol * ga
    v1, e1 = _quad(lambda tau: u_prime(tau) * (t - tau) ** (-a),
                   0.0, 0.5 * t, epsabs=budget, epsrel=1e-13, limit=300)
    p = 1.0 / (1.0 - a)
    v2, e2 = _quad(lambda s: u_prime(t - s ** p) * p,
                   0.0, (0.5 * t) ** (1.0 - a),
                   epsabs=budget, epsrel=1e-13, limit=300)
    if e1 + e2 > tol * ga:
        raise RuntimeError(
            f"oracle quadrature error {(e1 + e2) / ga:.3g} exceeds tol {tol:.3g} at t={t:.6g}")
    return (v1 + v2) / ga
