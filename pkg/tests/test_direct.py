"""Direct evaluator: coefficient oracles, exactness identities, convergence."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma

from vofrac.direct import caputo_oracle, evaluate_direct, g_row, scan_direct
from vofrac.order import TemporalMesh, build_schedule, constant_order, sin4_order


def _g_row_oracle(k, schedule):
    """Assemble the row by adaptive quadrature of the interpolant weights."""
    sig = schedule.sigma[k]
    a = schedule.alpha_sigma[k]

    def p_int(c):
        return quad(lambda s: (s - 0.5) * (c - s) ** -a, 0.0, 1.0,
                    epsabs=1e-14, epsrel=1e-13)[0]

    def q_int(c):
        return quad(lambda s: (1.5 - s) * (c - s) ** -a, 0.0, 1.0,
                    epsabs=1e-14, epsrel=1e-13)[0]

    g = np.empty(k + 1)
    if k == 0:
        g[0] = sig ** (1.0 - a)
        return g
    g[0] = (1.0 - a) * p_int(1.0 + sig) + sig ** (1.0 - a)
    for l in range(1, k):
        g[l] = (1.0 - a) * (p_int(l + 1.0 + sig) + q_int(l + sig))
    g[k] = (1.0 - a) * q_int(k + sig)
    return g


@pytest.mark.parametrize("order_fn", [constant_order(0.4), sin4_order()],
                         ids=["const", "sin4"])
@pytest.mark.parametrize("k", [0, 1, 2, 5])
def test_g_row_against_quadrature(order_fn, k):
    sched = build_schedule(TemporalMesh(1.0, 8), order_fn)
    np.testing.assert_allclose(g_row(k, sched), _g_row_oracle(k, sched),
                               rtol=1e-12, atol=1e-14)


def test_g_row_positive_decreasing():
    # classical coefficient chain for a constant order
    sched = build_schedule(TemporalMesh(1.0, 64), constant_order(0.5))
    g = g_row(63, sched)
    assert np.all(g > 0.0)
    assert np.all(np.diff(g) < 0.0)


def test_g_row_stable_for_long_history():
    # entries far from the evaluation point hit the expm1/log1p branch;
    # monotonicity would break visibly if the naive difference were kept
    n = 16385
    sched = build_schedule(TemporalMesh(1.0, n), constant_order(0.5))
    g = g_row(n - 1, sched)
    assert np.all(g > 0.0)
    assert np.all(np.diff(g) < 0.0)
    # asymptotically g_l ~ (1-a) * l^(-a): check the far tail's scale
    tail = g[-2] / ((1.0 - 0.5) * (n - 2.0) ** -0.5)
    assert 0.9 < tail < 1.1


def test_row_sum_telescopes_to_power():
    # the formula is exact on u = t: s_k * dt * sum_l g_l must equal
    # t_{k+sigma}^(1-alpha) / Gamma(2-alpha)
    sched = build_schedule(TemporalMesh(1.0, 16), sin4_order())
    for k in range(16):
        a = sched.alpha_sigma[k]
        lhs = sched.s_factor[k] * sched.dt * g_row(k, sched).sum()
        rhs = sched.t_sigma[k] ** (1.0 - a) / gamma(2.0 - a)
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


def test_evaluate_direct_matches_manual_sum():
    rng = np.random.default_rng(7)
    sched = build_schedule(TemporalMesh(1.0, 8), sin4_order())
    k = 5
    u = rng.standard_normal(k + 2)
    row = g_row(k, sched)
    expected = sched.s_factor[k] * sum(
        row[l] * (u[k - l + 1] - u[k - l]) for l in range(k + 1))
    assert abs(evaluate_direct(u, row, sched.s_factor[k]) - expected) < 1e-13


def test_evaluate_direct_validates_length():
    sched = build_schedule(TemporalMesh(1.0, 8), sin4_order())
    with pytest.raises(ValueError, match="levels"):
        evaluate_direct(np.ones(3), g_row(3, sched), 1.0)


@pytest.mark.parametrize("m,alpha", [(1, 0.5), (2, 0.25), (3, 0.75)])
def test_oracle_matches_monomial_closed_form(m, alpha):
    # frozen-order derivative of t^m is m! t^(m-a) / Gamma(m+1-a)
    ofn = constant_order(alpha)
    for t in (0.2, 0.7, 1.0):
        ref = math.factorial(m) * t ** (m - alpha) / gamma(m + 1.0 - alpha)
        got = caputo_oracle(lambda tau: m * tau ** (m - 1), ofn, t, tol=1e-12)
        assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))


def test_oracle_with_variable_order():
    # the variable-order value at t freezes alpha(t); same closed form
    ofn = sin4_order()
    t = 0.8
    a = ofn(t)
    ref = 6.0 * t ** (3.0 - a) / gamma(4.0 - a)
    got = caputo_oracle(lambda tau: 3.0 * tau ** 2, ofn, t, tol=1e-12)
    assert abs(got - ref) <= 1e-11 * abs(ref)


def test_oracle_rejects_nonpositive_time():
    with pytest.raises(ValueError, match="t > 0"):
        caputo_oracle(lambda tau: 1.0, constant_order(0.5), 0.0)


def test_scan_matches_oracle_for_cubic():
    ofn = sin4_order()
    sched = build_schedule(TemporalMesh(1.0, 16), ofn)
    t = np.linspace(0.0, 1.0, 17)
    u = t ** 3
    vals = scan_direct(u, sched)
    for k in (0, 3, 9, 15):
        ref = caputo_oracle(lambda tau: 3.0 * tau ** 2, ofn,
                            float(sched.t_sigma[k]), tol=1e-12)
        # interpolation error at n=16 sits near 1e-3 * dt^(3-a); just check
        # the scheme error band, the sharp slope test lives in acceptance
        assert abs(vals[k] - ref) < 5e-3


def test_scan_error_decays_at_interpolation_order():
    ofn = constant_order(0.5)
    errs = []
    for n in (8, 32):
        sched = build_schedule(TemporalMesh(1.0, n), ofn)
        t = np.linspace(0.0, 1.0, n + 1)
        vals = scan_direct(t ** 3, sched)
        ref = np.array([caputo_oracle(lambda tau: 3.0 * tau ** 2, ofn,
                                      float(tk), tol=1e-12)
                        for tk in sched.t_sigma])
        errs.append(np.abs(vals - ref).max())
    # two refinement levels: expect about (3 - alpha) * 2 = 5 halvings
    rate = math.log2(errs[0] / errs[1]) / 2.0
    assert rate > 3.0 - 0.5 - 0.25


def test_scan_validates_shape():
    sched = build_schedule(TemporalMesh(1.0, 8), sin4_order())
    with pytest.raises(ValueError, match="node values"):
        scan_direct(np.ones(8), sched)


def test_g_row_rejects_out_of_range_step():
    sched = build_schedule(TemporalMesh(1.0, 8), sin4_order())
    with pytest.raises(ValueError, match="outside schedule"):
        g_row(8, sched)
