import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate

from bmsruin.errors import PoleHit
from bmsruin.model import BonusMalusSystem, DistributionSpec, mean
from bmsruin.presets import TEN_LEVELS
from bmsruin.transforms import (CharacteristicFunction, cdf, claim_convolution, claim_laplace,
                                claim_laplace_prime, complex_erfc, complex_erfcx, eval_D, eval_D_prime,
                                pdf, premium_mgf, premium_mgf_prime)

from conftest import PROPERTY_CASES, systems

CLAIMS = [
    DistributionSpec.exponential(6.0),
    DistributionSpec.gamma(3, 6.0),
    DistributionSpec.half_normal(1.0),
    DistributionSpec.maxwell(1 / math.sqrt(2)),
    DistributionSpec.uniform(0.2, 1.7),
    DistributionSpec.uniform(0.0, 1e-3),
]

complex_points = st.builds(complex, st.floats(-4, 4), st.floats(-4, 4))


# ---------------------------------------------------------------------------
# error function


def test_erfc_values():
    assert complex_erfc(0) == 1
    assert abs(complex_erfc(1.0) - 0.15729920705028513066) < 1e-15


@given(complex_points)
def test_erfc_reflection(z):
    assert abs(complex_erfc(z) + complex_erfc(-z) - 2) <= 1e-13 * max(1.0, abs(complex_erfc(z)))


@given(st.builds(complex, st.floats(-5, 5), st.floats(-5, 5)))
def test_erfcx_against_mpmath(z):
    with mpmath.workdps(40):
        ref = complex(mpmath.exp(mpmath.mpc(z) ** 2) * mpmath.erfc(mpmath.mpc(z)))
    assert abs(complex_erfcx(z) - ref) <= 1e-13 * abs(ref)


def test_erfc_overflow_reported():
    with pytest.raises(OverflowError):
        complex_erfc(complex(0.1, 30))


# ---------------------------------------------------------------------------
# transforms


@pytest.mark.parametrize("spec", CLAIMS)
def test_laplace_at_zero(spec):
    assert abs(claim_laplace(spec, 0.0) - 1) < 1e-15


def test_gamma_laplace_value():
    assert math.isclose(claim_laplace(DistributionSpec.gamma(3, 6.0), 1.0).real, (6 / 7) ** 3, rel_tol=1e-15)


def test_halfnormal_laplace_quadrature():
    q = integrate.quad(lambda x: math.sqrt(2 / math.pi) * math.exp(-x * x / 2 - 2 * x), 0, np.inf,
                       epsabs=1e-15)[0]
    assert abs(claim_laplace(DistributionSpec.half_normal(1.0), 2.0) - q) < 1e-10


def _quad_laplace(spec, s):
    lo, hi = (spec.params["a"], spec.params["b"]) if spec.kind == "uniform" else (0, np.inf)
    re = integrate.quad(lambda x: (np.exp(-s * x) * pdf(spec, x)).real, lo, hi, epsabs=1e-14, limit=200)[0]
    im = integrate.quad(lambda x: (np.exp(-s * x) * pdf(spec, x)).imag, lo, hi, epsabs=1e-14, limit=200)[0]
    return complex(re, im)


@pytest.mark.parametrize("spec", CLAIMS)
@pytest.mark.parametrize("s", [0.3, 1.0 + 2.0j, 2.5 - 0.5j])
def test_laplace_matches_quadrature(spec, s):
    assert abs(claim_laplace(spec, s) - _quad_laplace(spec, s)) < 1e-10


@pytest.mark.parametrize("spec", CLAIMS)
def test_laplace_mpmath_backend(spec):
    s = complex(-1.3, 2.1)
    with mpmath.workdps(30):
        v = claim_laplace(spec, mpmath.mpc(s))
        dv = claim_laplace_prime(spec, mpmath.mpc(s))
    assert abs(complex(v) - claim_laplace(spec, s)) < 1e-12 * max(1, abs(complex(v)))
    assert abs(complex(dv) - claim_laplace_prime(spec, s)) < 1e-12 * max(1, abs(complex(dv)))


def test_premium_mgf_examples():
    spec = DistributionSpec.exponential(2.0)
    for t in (-3.0, 0.5, 1.5):
        assert math.isclose(premium_mgf(spec, t).real, 1 / (1 - t / 2), rel_tol=1e-14)
    mix = DistributionSpec.mixture(TEN_LEVELS, [0.1] * 10)
    assert math.isclose(premium_mgf(mix, 1.0).real, 0.1 * sum(math.exp(c) for c in TEN_LEVELS), rel_tol=1e-15)
    assert abs(premium_mgf(mix, 0.0) - 1) <= 2e-16


def test_exponential_derivative():
    b, s = 3.0, 0.7 - 0.2j
    assert abs(claim_laplace_prime(DistributionSpec.exponential(b), s) + b / (b + s) ** 2) < 1e-15


def test_pole_hit():
    with pytest.raises(PoleHit):
        claim_laplace(DistributionSpec.gamma(2, 3.0), -3.0)
    with pytest.raises(PoleHit):
        premium_mgf(DistributionSpec.exponential(1.0), 1.0)


def test_uniform_removable_singularity():
    spec = DistributionSpec.uniform(0.5, 2.0)
    for s in (1e-14, 1e-7, 0.01, 0.99, 1.01):
        assert abs(claim_laplace(spec, s) - _quad_laplace(spec, s)) < 1e-12


@pytest.mark.parametrize("spec", CLAIMS[:5])
def test_cdf_and_pdf_consistent(spec):
    for u in (0.1, 0.9, 2.5):
        q = integrate.quad(lambda x: pdf(spec, x), 0, u, epsabs=1e-14, points=[0.2, 1.7] if spec.kind == "uniform" else None)[0]
        assert abs(cdf(spec, u) - q) < 1e-12


@pytest.mark.parametrize("spec", CLAIMS[:5])
@pytest.mark.parametrize("z", [-1.5, -8.2 + 3.8j, -4 - 6j])
def test_convolution_matches_quadrature(spec, z):
    for u in (0.0, 0.5, 3.0):
        f = lambda x: np.exp(z * (u - x)) * pdf(spec, x)
        pts = [p for p in (0.2, 1.7) if p < u] if spec.kind == "uniform" else None
        re = integrate.quad(lambda x: f(x).real, 0, u, epsabs=1e-15, points=pts)[0] if u else 0.0
        im = integrate.quad(lambda x: f(x).imag, 0, u, epsabs=1e-15, points=pts)[0] if u else 0.0
        assert abs(claim_convolution(spec, z, u) - complex(re, im)) < 1e-12


# ---------------------------------------------------------------------------
# D(s)


def test_examples_zero(halfnormal_bms, gamma_bms):
    assert abs(eval_D(CharacteristicFunction(halfnormal_bms), -0.7279947)) < 1e-5 * 29
    assert abs(eval_D(CharacteristicFunction(gamma_bms), -1.53082)) < 1e-4 * 29


def test_discrete_derivative_at_zero_is_drift(halfnormal_bms):
    cf = CharacteristicFunction(halfnormal_bms)
    assert math.isclose(eval_D_prime(cf, 0.0).real, halfnormal_bms.drift, rel_tol=1e-12)


def _away_from_poles(cf, s, gap=0.2):
    return all(abs(s - p) > gap for p, _ in cf.pole_list)


@settings(max_examples=PROPERTY_CASES)
@given(systems(positive_drift=False), st.lists(complex_points, min_size=5, max_size=5))
def test_D_properties(system, pts):
    """D(0) = 0, D'(0) = drift, conjugate symmetry and D' against central differences."""
    cf = CharacteristicFunction(system)
    scale = system.total_rate
    assert abs(cf.D(0.0)) <= 1e-10 * scale
    assert abs(cf.D_prime(0.0) - system.drift) <= 1e-10 * max(scale * (mean(system.premium) + mean(system.claim)), 1.0)
    h = 1e-6
    for s in pts:
        assume(_away_from_poles(cf, s))
        d = cf.D(s)
        assert abs(cf.D(s.conjugate()) - np.conj(d)) <= 1e-13 * max(1.0, abs(d))
        an = cf.D_prime(s)
        assume(abs(an) > 1e-3 * scale)
        fd = (cf.D(s + h) - cf.D(s - h)) / (2 * h)
        assert abs(fd - an) <= 1e-6 * abs(an)


@given(st.sampled_from(CLAIMS), complex_points)
def test_premium_derivative_sign(spec, s):
    # premium_mgf(s) = laplace(-s), so its derivative flips sign
    h = 1e-6
    try:
        fd = (premium_mgf(spec, s + h) - premium_mgf(spec, s - h)) / (2 * h)
        an = premium_mgf_prime(spec, s)
    except PoleHit:
        return
    assume(all(abs(s + p) > 0.2 for p in (-6.0,)))
    assert abs(fd - an) <= 1e-6 * max(abs(an), 1.0)


def test_poles_listed(gamma_bms):
    cf = CharacteristicFunction(gamma_bms)
    assert cf.pole_list == ((-6.0, 3),)
    ds = CharacteristicFunction(BonusMalusSystem(DistributionSpec.exponential(2.0),
                                                 DistributionSpec.exponential(1.0), 1, 1))
    assert sorted(ds.pole_list) == [(-1.0, 1), (2.0, 1)]
