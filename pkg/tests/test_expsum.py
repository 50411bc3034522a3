"""Exponential-sum ladder: step formula, certification, tails, validation."""

import math

import mpmath
import numpy as np
import pytest
from scipy.special import gamma

from vofrac.expsum import (build_quadrature, certify, compute_params,
                           quadrature_from_params)


def _h_reference(epsilon, alpha_hi):
    # same formula at 50 digits
    with mpmath.workdps(50):
        val = 2 * mpmath.pi / (mpmath.log(3)
                               + alpha_hi * mpmath.log(1 / mpmath.cos(1))
                               + mpmath.log(1 / mpmath.mpf(epsilon)))
        return float(val)


@pytest.mark.parametrize("epsilon,alpha_hi", [
    (1.0 / math.e, 0.5),
    (1e-8, 0.75),
    (1e-4, 0.25),
])
def test_step_formula(epsilon, alpha_hi):
    p = compute_params(epsilon, 0.1, alpha_hi, 0.01, 1.0)
    assert abs(p.h - _h_reference(epsilon, alpha_hi)) < 1e-15


def test_params_basic_shape():
    p = compute_params(1e-8, 0.25, 0.75, 1e-2, 1.0)
    assert p.n_lo < 0 < p.n_hi
    assert p.size == p.n_hi - p.n_lo
    assert p.s_min == 0.5e-2
    q = quadrature_from_params(p)
    assert q.size == p.size
    assert q.indices[0] == p.n_lo + 1 and q.indices[-1] == p.n_hi
    np.testing.assert_allclose(q.lambdas, np.exp(q.indices * p.h), rtol=1e-15)


def test_weights_closed_form():
    q = build_quadrature(1e-6, 0.3, 0.7, 0.05, 1.0)
    for a in (0.3, 0.51, 0.7):
        np.testing.assert_allclose(
            q.weights(a), q.params.h * q.lambdas ** a / gamma(a), rtol=1e-13)
    with pytest.raises(ValueError, match="outside"):
        q.weights(0.9)


@pytest.mark.parametrize("epsilon", [1e-4, 1e-6, 1e-8])
@pytest.mark.parametrize("dt", [1e-1, 1e-2, 1e-3])
def test_certification_sweep(epsilon, dt):
    q = build_quadrature(epsilon, 0.25, 0.75, dt, 1.0)
    rep = certify(q, samples=2000)
    assert rep.passed, f"max rel err {rep.max_rel_err:.3e} > {epsilon:.1e}"
    assert rep.max_rel_err <= epsilon


def test_certified_at_domain_endpoints():
    q = build_quadrature(1e-8, 0.25, 0.75, 1e-2, 1.0)
    for a in (0.25, 0.5, 0.75):
        for s in (q.params.s_min, 1.0):
            rel = abs(q.kernel(a, s) * s ** a - 1.0)
            assert rel <= 1e-8


def test_kernel_pointwise_values():
    q = build_quadrature(1e-10, 0.3, 0.6, 0.05, 1.0)
    s = np.array([0.025, 0.3, 1.0])
    np.testing.assert_allclose(q.kernel(0.45, s), s ** -0.45, rtol=1e-10)
    # scalar in, scalar out
    val = q.kernel(0.3, 0.5)
    assert isinstance(val, float)
    assert abs(val - 0.5 ** -0.3) < 1e-10


def test_narrow_and_wide_order_ranges():
    for lo, hi in [(0.5, 0.5), (0.1, 0.9), (0.05, 0.95)]:
        q = build_quadrature(1e-6, lo, hi, 1e-2, 1.0)
        rep = certify(q, samples=1500, n_alpha=7)
        assert rep.passed


def test_longer_horizon():
    q = build_quadrature(1e-8, 0.25, 0.75, 2.0 / 64, 2.0)
    assert q.params.s_min == pytest.approx(1.0 / 128)
    assert certify(q, samples=1500).passed


def test_loosest_tolerance_still_certifies():
    # even at the legal extreme (epsilon = 1/e, one step) the minimal-integer
    # construction produces a tiny ladder that meets its own tolerance; the
    # emptiness guard in compute_params is purely defensive
    q = build_quadrature(1.0 / math.e, 0.25, 0.75, 1.0, 1.0)
    assert q.size <= 8
    assert certify(q, samples=500).passed


def test_parameter_validation():
    with pytest.raises(ValueError, match="epsilon"):
        compute_params(0.5, 0.25, 0.75, 0.01, 1.0)
    with pytest.raises(ValueError, match="epsilon"):
        compute_params(0.0, 0.25, 0.75, 0.01, 1.0)
    with pytest.raises(ValueError, match="order bounds"):
        compute_params(1e-6, 0.0, 0.75, 0.01, 1.0)
    with pytest.raises(ValueError, match="order bounds"):
        compute_params(1e-6, 0.8, 0.2, 0.01, 1.0)
    with pytest.raises(ValueError, match="dt"):
        compute_params(1e-6, 0.25, 0.75, 2.0, 1.0)
    q = build_quadrature(1e-6, 0.25, 0.75, 0.01, 1.0)
    with pytest.raises(ValueError, match="two abscissae"):
        certify(q, samples=1)


def test_ladder_count_envelope():
    # size <= 4 (log 1/eps + log T/dt) (log 1/eps + loglog 1/eps + log 1/alpha_lo)
    # checked over the supported parameter box with alpha_lo >= 0.05
    for eps in (1e-4, 1e-8, 1e-12):
        for dt in (1e-1, 1e-3):
            for lo, hi in [(0.05, 0.95), (0.25, 0.75), (0.5, 0.6)]:
                q = build_quadrature(eps, lo, hi, dt, 1.0)
                le = math.log(1.0 / eps)
                cap = 4.0 * (le + math.log(1.0 / dt)) * (le + math.log(le)
                                                         + math.log(1.0 / lo))
                assert q.size <= cap


def test_tighter_epsilon_grows_ladder():
    sizes = [build_quadrature(e, 0.25, 0.75, 1e-2, 1.0).size
             for e in (1e-4, 1e-8, 1e-12)]
    assert sizes[0] < sizes[1] < sizes[2]
