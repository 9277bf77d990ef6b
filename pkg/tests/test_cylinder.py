import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import integrate, special

from curvewave import cylinder
from curvewave.errors import DomainError, RangeError, SingularArgumentError


def series_bessel_j(m, z, terms=60):
    """Ascending power series, the independent small-argument oracle."""
    z = complex(z)
    total = 0.0 + 0.0j
    for k in range(terms):
        total += (-1) ** k * (z / 2) ** (m + 2 * k) / (
            math.factorial(k) * math.factorial(m + k))
    return total


def series_bessel_y(n, z, terms=60):
    """Small-argument Y_n series with digamma sums (integer order)."""
    z = complex(z)
    lead = 2.0 / math.pi * math.log(abs(z) / 2.0) * series_bessel_j(n, z, terms)
    s1 = 0.0 + 0j
    for k in range(n):
        s1 += math.factorial(n - k - 1) / math.factorial(k) * (z / 2) ** (2 * k - n)
    def psi(j):
        return -0.5772156649015329 + sum(1.0 / i for i in range(1, j))
    s2 = 0.0 + 0j
    for k in range(terms):
        s2 += ((-1) ** k * (psi(k + 1) + psi(n + k + 1))
               / (math.factorial(k) * math.factorial(n + k)) * (z / 2) ** (2 * k + n))
    return lead - s1 / math.pi - s2 / math.pi


def test_bessel_j_trivial_origin():
    assert cylinder.bessel_j(0, 0.0) == 1.0
    assert cylinder.bessel_j(3, 0.0) == 0.0


def test_bessel_j_series_oracle():
    # frozen from the power-series oracle
    assert series_bessel_j(1, 1.0).real == pytest.approx(0.4400505857449335, rel=1e-14)
    assert cylinder.bessel_j(1, 1.0) == pytest.approx(series_bessel_j(1, 1.0), rel=1e-10)
    for m, z in [(0, 0.7), (2, 3.3), (7, 9.1 + 0.4j), (12, 6.0 - 1.0j)]:
        assert cylinder.bessel_j(m, z) == pytest.approx(series_bessel_j(m, z), rel=1e-12)


def test_hankel1_small_argument_oracle():
    ref = series_bessel_j(1, 1.0) + 1j * series_bessel_y(1, 1.0)
    assert ref == pytest.approx(0.4400505857449335 - 0.7812128213002887j, rel=1e-12)
    assert cylinder.hankel1(1, 1.0) == pytest.approx(ref, rel=1e-10)


def test_hankel1_asymptotic_magnitude():
    mag = abs(cylinder.hankel1(0, 100.0))
    assert mag == pytest.approx(math.sqrt(2.0 / (math.pi * 100.0)), rel=0.01)


def test_wronskian_identity_hot_region():
    # J_m H1_m' - J_m' H1_m = 2i/(pi z).  Cancellation limits the testable
    # imaginary range to |Im z| <~ 6, and far below the turning point the
    # factors themselves leave the double range, so z >= ~m/2 here.
    worst = 0.0
    for m in (0, 1, 5, 60, 120, 200):
        for z in (1.0 + 0j, 5.0 - 0.5j, 52.6 + 0j, 113.0 - 1.57e-6j,
                  250.0 - 3.0j, 300.0 + 6.0j):
            if abs(z) < 0.52 * m:
                continue
            w = (cylinder.bessel_j(m, z) * cylinder.hankel1_deriv(m, z)
                 - cylinder.bessel_j_deriv(m, z) * cylinder.hankel1(m, z))
            target = 2j / (math.pi * z)
            worst = max(worst, abs(w - target) / abs(target))
    assert worst < 1e-10


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 200), x=st.floats(1.0, 300.0), im=st.floats(-4.0, 4.0))
def test_recurrence_identities(m, x, im):
    assume(x >= 0.52 * m)   # factors representable in doubles
    z = complex(x, im)
    for fn in (cylinder.bessel_j, cylinder.hankel1):
        zm1 = fn(m - 1, z)
        zp1 = fn(m + 1, z)
        zm = fn(m, z)
        scale = max(abs(zm1), abs(zp1), abs(zm))
        assert abs(zm1 + zp1 - (2 * m / z) * zm) <= 1e-9 * scale * max(1.0, 2 * m / abs(z))


def test_k_recurrence_identity():
    m, x = 120, 100.0
    lhs = cylinder.bessel_k(m + 1, x) - cylinder.bessel_k(m - 1, x)
    rhs = (2 * m / x) * cylinder.bessel_k(m, x)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_bessel_k_integral_oracle():
    # K_0(x) = int_0^inf exp(-x cosh t) dt
    val, _ = integrate.quad(lambda t: math.exp(-1.0 * math.cosh(t)), 0, 30, limit=200)
    assert val == pytest.approx(0.42102443824070834, rel=1e-12)
    assert cylinder.bessel_k(0, 1.0) == pytest.approx(0.4210244382, rel=1e-10)


def test_bessel_k_asymptotic_and_monotone():
    x = 50.0
    asym = math.sqrt(math.pi / (2 * x)) * math.exp(-x)
    assert cylinder.bessel_k(0, x) / asym == pytest.approx(1.0, abs=0.01)
    xs = np.linspace(0.5, 40, 40)
    vals = [cylinder.bessel_k(3, float(x)) for x in xs]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_ode_residual():
    # z^2 Z'' + z Z' + (z^2 - m^2) Z = 0 with Z'' from derivative recurrences
    for m, z in [(0, 2.0), (5, 7.0 - 0.3j), (60, 80.0), (120, 226.0 - 1e-5j),
                 (200, 210.0)]:
        for fn, dfn in ((cylinder.bessel_j, cylinder.bessel_j_deriv),
                        (cylinder.hankel1, cylinder.hankel1_deriv)):
            val = fn(m, z)
            d1 = dfn(m, z)
            d2 = 0.5 * (dfn(m - 1, z) if m >= 1 else -dfn(1, z)) - 0.5 * dfn(m + 1, z)
            resid = z * z * d2 + z * d1 + (z * z - m * m) * val
            scale = max(abs(z * z * d2), abs(z * z * val), 1e-300)
            assert abs(resid) / scale < 1e-8
    # modified equation for K: z^2 K'' + z K' - (z^2 + m^2) K = 0
    m, x = 40, 55.0
    val = cylinder.bessel_k(m, x)
    d1 = cylinder.bessel_k_deriv(m, x)
    d2 = -0.5 * (cylinder.bessel_k_deriv(m - 1, x) + cylinder.bessel_k_deriv(m + 1, x))
    resid = x * x * d2 + x * d1 - (x * x + m * m) * val
    assert abs(resid) / abs(x * x * d2) < 1e-8


def test_large_order_scaled_paths():
    # no overflow for orders up to 300
    ratio = cylinder.bessel_j(300, 300.0) / cylinder.bessel_j(300, 300.0 * (1 + 1e-6))
    assert np.isfinite(ratio)
    # scaled Hankel agrees with the direct value where both exist
    for m, z in [(50, 20.0), (120, 105.2 + 0j)]:
        val, scale = cylinder.hankel1_scaled(m, z)
        assert val * np.exp(scale) == pytest.approx(cylinder.hankel1(m, z), rel=1e-10)
    # deep-evanescent regime: finite log magnitude where the raw value overflows
    val, scale = cylinder.hankel1_scaled(200, 2.0)
    assert np.isfinite(abs(val)) and scale > 400.0
    assert cylinder.ln_bessel_k(200, 0.5) > 700.0
    assert cylinder.ln_bessel_k(3, 2.0) == pytest.approx(
        math.log(cylinder.bessel_k(3, 2.0)), rel=1e-12)


def test_logderiv_and_ratios_consistency():
    for m, x in [(10, 3.0), (120, 87.2), (200, 1.0)]:
        s = cylinder.bessel_k_logderiv(m, x)
        rm, rp = cylinder.bessel_k_order_ratios(m, x)
        assert -0.5 * (rm + rp) == pytest.approx(s, rel=1e-10)
    for m, z in [(10, 3.0 + 0j), (120, 105.2 - 1e-5j), (150, 4.0 + 0j)]:
        s = cylinder.hankel1_logderiv(m, z)
        rm, rp = cylinder.hankel1_order_ratios(m, z)
        assert 0.5 * (rm - rp) == pytest.approx(s, rel=1e-9)


def test_ratio_arrays_match_direct():
    m, kap = 80, 12.0
    r = np.linspace(2.0, 8.0, 50)
    got = cylinder.bessel_k_ratio_array(m, kap * r, kap * 2.0)
    want = special.kve(m, kap * r) / special.kve(m, kap * 2.0) * np.exp(-(kap * r - kap * 2.0))
    assert np.allclose(got, want, rtol=1e-10)
    m = 120
    z0 = 105.2
    got = cylinder.hankel1_ratio_array(m, z0 * r / 2.0, z0)
    want = special.hankel1(m, z0 * r / 2.0) / special.hankel1(m, z0)
    assert np.allclose(got, want, rtol=1e-9)
    # overflow regime falls back to the scaled recurrence
    m, z0 = 170, 3.0
    got = cylinder.hankel1_ratio_array(m, np.array([3.0, 6.0, 12.0]), z0)
    assert got[0] == pytest.approx(1.0, rel=1e-9)
    assert np.all(np.isfinite(got))
    assert abs(got[2]) < abs(got[1]) < 1.0


def test_domain_and_range_errors():
    with pytest.raises(DomainError):
        cylinder.bessel_k(2, -1.0)
    with pytest.raises(DomainError):
        cylinder.bessel_k(2, 0.0)
    with pytest.raises(SingularArgumentError):
        cylinder.hankel1(3, 0.0)
    with pytest.raises(DomainError):
        cylinder.bessel_j(-2, 1.0)
    with pytest.raises(RangeError) as err:
        cylinder.bessel_j(10, 1.0 + 800.0j)
    assert "10" in str(err.value)
    with pytest.raises(RangeError):
        cylinder.bessel_j(0, 2.0e4)


def test_eval_cylinder_surface():
    ev = cylinder.eval_cylinder("j", 5, 7.0)
    assert ev.order == 5 and ev.argument == 7.0 + 0j
    assert ev.derivative == pytest.approx(
        0.5 * (cylinder.bessel_j(4, 7.0) - cylinder.bessel_j(6, 7.0)), rel=1e-14)
    with pytest.raises(DomainError):
        cylinder.eval_cylinder("k", 2, 1.0 + 1.0j)
