import math

import mpmath
import numpy as np
import pytest

from deltavar.errors import DomainError, UnsupportedOrderError
from deltavar.series import (
    LaurentSeries,
    eval_main_term,
    main_term_poly,
    stieltjes,
    zeta_laurent,
    zeta_real,
)

EULER_GAMMA = 0.5772156649015329


@pytest.mark.parametrize("m", range(9))
def test_stieltjes_against_mpmath(m):
    assert stieltjes(m) == pytest.approx(float(mpmath.stieltjes(m)), rel=1e-12, abs=1e-15)


def test_stieltjes_examples():
    assert stieltjes(0) == pytest.approx(0.577215664902, abs=1e-12)
    assert stieltjes(1) == pytest.approx(-0.072815845484, abs=1e-12)
    with pytest.raises(UnsupportedOrderError):
        stieltjes(9)


def test_zeta_limit_gives_gamma():
    d = 1e-4
    assert zeta_real(1 + d) - 1 / d == pytest.approx(stieltjes(0), abs=1e-4)


@pytest.mark.parametrize(
    "s, expected",
    [(2.0, math.pi**2 / 6), (4.0, math.pi**4 / 90), (1.5, 2.612375348685488), (3.0, 1.2020569031595942)],
)
def test_zeta_real(s, expected):
    assert zeta_real(s) == pytest.approx(expected, rel=1e-14)


def test_zeta_real_domain():
    with pytest.raises(DomainError):
        zeta_real(1.0)


def test_laurent_product_truncation():
    z = zeta_laurent(3)
    assert (z.lead_order, z.truncation_order) == (-1, 3)
    z2 = z * z
    assert (z2.lead_order, z2.truncation_order) == (-2, 2)
    assert z2[-2] == 1.0
    assert z2[-1] == pytest.approx(2 * EULER_GAMMA)
    with pytest.raises(IndexError):
        z2[2]


def test_laurent_pow_matches_repeated_product():
    z = zeta_laurent(6)
    a, b = z**3, z * z * z
    assert (a.lead_order, a.truncation_order) == (b.lead_order, b.truncation_order)
    np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-14)


def test_laurent_add_scalar():
    s = LaurentSeries.from_coeffs(0, [1.0, 2.0, 3.0]) + 1.0
    assert s.coeffs == (2.0, 2.0, 3.0)
    assert (s - s).coeffs == (0.0, 0.0, 0.0)


def test_main_term_k1_k2():
    assert main_term_poly(1).coeffs == pytest.approx((1.0,))
    c = main_term_poly(2).coeffs
    assert c[1] == pytest.approx(1.0, abs=1e-14)
    assert c[0] == pytest.approx(2 * EULER_GAMMA - 1, abs=1e-14)


def test_main_term_leading_coefficient():
    for k in range(1, 9):
        assert main_term_poly(k).coeffs[-1] == pytest.approx(1 / math.factorial(k - 1), rel=1e-12)


def test_main_term_k3_classical():
    c = main_term_poly(3).coeffs
    g0, g1 = EULER_GAMMA, stieltjes(1)
    assert c[1] == pytest.approx(3 * g0 - 1, rel=1e-12)
    assert c[0] == pytest.approx(3 * g0**2 - 3 * g0 - 3 * g1 + 1, rel=1e-12)


def test_main_term_residue_mpmath():
    # residue of zeta^k(s) x^s / s at s = 1 by contour-free numeric check at k = 4
    k, x = 4, 1e5
    with mpmath.workdps(30):
        f = lambda s: mpmath.zeta(s) ** k * mpmath.mpf(x) ** s / s
        r = mpmath.quad(lambda t: f(1 + 0.5 * mpmath.exp(1j * t)) * 0.5j * mpmath.exp(1j * t), [0, 2 * mpmath.pi])
        r = float((r / (2j * mpmath.pi)).real)
    assert eval_main_term(main_term_poly(k), x) == pytest.approx(r, rel=1e-10)


def test_eval_main_term_examples():
    assert eval_main_term(main_term_poly(1), 100.0) == pytest.approx(100.0)
    assert eval_main_term(main_term_poly(2), 1.0) == pytest.approx(0.15443, abs=1e-5)
    assert eval_main_term(main_term_poly(2), math.e) == pytest.approx(math.e * 2 * EULER_GAMMA, rel=1e-13)
    xs = np.array([1.0, 10.0, 1e6])
    np.testing.assert_allclose(
        eval_main_term(main_term_poly(3), xs), [eval_main_term(main_term_poly(3), x) for x in xs]
    )
    with pytest.raises(DomainError):
        eval_main_term(main_term_poly(2), 0.5)


def test_main_term_poly_domain():
    with pytest.raises(DomainError):
        main_term_poly(9)
