import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eqsynth.errors import ContractError
from eqsynth.tf import RationalTF, Z, poly_roots, as_poly


def test_monic_denominator():
    h = RationalTF([2.0, 4.0], [2.0, 2.0])
    np.testing.assert_allclose(h.den.coef, [1.0, 1.0])
    np.testing.assert_allclose(h.num.coef, [1.0, 2.0])


def test_zero_denominator_rejected():
    with pytest.raises(ContractError):
        RationalTF([1.0], [0.0])


def test_common_factor_cancels():
    # (z-1)(z-0.5) / ((z-1)(z+0.3))
    num = np.polynomial.polynomial.polyfromroots([1.0, 0.5])
    den = np.polynomial.polynomial.polyfromroots([1.0, -0.3])
    h = RationalTF(num, den)
    assert h.den.degree() == 1
    np.testing.assert_allclose(h.poles(), [-0.3])
    np.testing.assert_allclose(h(1.0), (1 - 0.5) / (1 + 0.3))


def test_from_zpk_exact_cancellation():
    h = RationalTF.from_zpk([1.0, 0.2], [1.0, 0.7], 3.0)
    np.testing.assert_allclose(h.num.coef, [-0.6, 3.0])
    np.testing.assert_allclose(h.den.coef, [-0.7, 1.0])


def test_cancel_flag_off_keeps_factors():
    num = np.polynomial.polynomial.polyfromroots([1.0])
    h = RationalTF(num, num, cancel=False)
    assert h.den.degree() == 1


def test_relative_degree_and_properness():
    h = RationalTF([1.0], [-0.5, 1.0])
    assert h.relative_degree == 1
    assert h.is_strictly_proper() and h.is_proper()
    assert not (Z * Z / RationalTF([1.0, 1.0])).is_proper()
    assert h.value_at_infinity() == 0.0
    assert RationalTF([1.0, 2.0], [3.0, 1.0]).value_at_infinity() == 2.0


def test_arithmetic_matches_pointwise(rng):
    a = RationalTF([0.3, 1.0], [0.1, -0.4, 1.0])
    b = RationalTF([2.0], [-0.9, 1.0])
    z = 1.3 * np.exp(2j * np.pi * rng.random(16))
    for expr, ref in [(a + b, a(z) + b(z)), (a - b, a(z) - b(z)), (a * b, a(z) * b(z)),
                      (a / b, a(z) / b(z)), (2 - a, 2 - a(z)), (3 * a, 3 * a(z)),
                      (1 / b, 1 / b(z)), (-a, -a(z))]:
        np.testing.assert_allclose(expr(z), ref, rtol=1e-12)


def test_division_by_zero_tf():
    with pytest.raises(ZeroDivisionError):
        Z / RationalTF([0.0])


def test_scaled_argument(rng):
    h = RationalTF([0.3, 1.0], [0.1, -0.4, 1.0])
    z = np.exp(2j * np.pi * rng.random(8))
    np.testing.assert_allclose(h.scaled_argument(0.7)(z), h(0.7 * z), rtol=1e-13)


def test_impulse_response_geometric():
    # 1/(z - a) = sum_{k>=1} a^{k-1} z^{-k}
    a = 0.6
    h = RationalTF([1.0], [-a, 1.0])
    out = h.impulse_response(10)
    ref = np.concatenate([[0.0], a ** np.arange(9)])
    np.testing.assert_allclose(out, ref, atol=1e-15)


def test_impulse_response_requires_proper():
    with pytest.raises(ContractError):
        (Z * Z / RationalTF([1.0, 1.0])).impulse_response(5)


def test_poly_roots_closed_form_and_companion():
    np.testing.assert_allclose(poly_roots(as_poly([-2.0, 1.0])), [2.0])
    np.testing.assert_allclose(np.sort(poly_roots(as_poly([2.0, -3.0, 1.0]))), [1.0, 2.0])
    r = poly_roots(as_poly(np.polynomial.polynomial.polyfromroots([0.1, -0.2, 0.3, 0.5])))
    np.testing.assert_allclose(np.sort(r.real), [-0.2, 0.1, 0.3, 0.5], atol=1e-12)
    # tiny constant term: stable quadratic formula keeps the small root accurate
    r = poly_roots(as_poly([1e-12, -(1 + 1e-12), 1.0]))
    np.testing.assert_allclose(np.sort(r.real), [1e-12, 1.0], rtol=1e-12)


def test_immutable():
    with pytest.raises(AttributeError):
        Z.foo = 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=3),
       st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=3),
       st.floats(0.5, 2.0))
def test_product_then_divide_roundtrip(zs, ps, k):
    a = RationalTF.from_zpk(zs, ps, k)
    b = RationalTF([0.37, 1.0], [0.21, 1.0])
    z = np.array([1.7, -1.9j, 2.1 + 0.5j])
    np.testing.assert_allclose(((a * b) / b)(z), a(z), rtol=1e-8)
