from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from floydkit.functions import (
    InversePolynomial,
    Table,
    affine_distortion,
    distortion,
    exponential,
    inverse_polynomial,
    inverse_power,
    parse_distortion,
    parse_scaling,
    scaling_from_dict,
)


def test_zero_takes_the_value_at_one():
    f = exponential(F(1, 2))
    assert f(0) == f(1) == F(1, 2)
    g = inverse_power(2)
    assert g(0) == g(1) == F(1, 4)


def test_ratio_constants():
    assert exponential(F(1, 3)).ratio_constant() == 3
    # 1/(n+1)^2: the worst step is f(1)/f(2) = 9/4
    assert inverse_power(2).ratio_constant() == F(9, 4)


@pytest.mark.parametrize("f", [exponential(F(1, 2)), exponential(F(2, 3)), inverse_power(2),
                               inverse_power(4), inverse_polynomial([3, 0, 1, 2])])
def test_ratio_constant_bounds_consecutive_ratios(f):
    K = f.ratio_constant()
    for n in range(0, 400):
        assert 1 <= f(n) / f(n + 1) <= K


@pytest.mark.parametrize("f", [exponential(F(1, 2)), exponential(F(3, 4)), inverse_power(2),
                               inverse_power(3), inverse_polynomial([1, 1, 1])])
@pytest.mark.parametrize("r", [0, 1, 2, 5, 20])
def test_tail_bound_dominates_long_partial_sums(f, r):
    assert f.partial_sum(r, r + 3000) <= f.tail_bound(r)


def test_geometric_tail_is_exact():
    f = exponential(F(1, 2))
    for n in range(1, 10):
        assert f.tail_bound(n) == F(2, 2**n)


def test_inverse_polynomial_validation():
    with pytest.raises(ValueError):
        InversePolynomial((1, 1))  # degree 1: not summable
    with pytest.raises(ValueError):
        InversePolynomial((0, 0, 1))  # P(0) = 0
    with pytest.raises(ValueError):
        InversePolynomial((1, -1, 1))
    with pytest.raises(ValueError):
        exponential(F(3, 2))


def test_table_forms():
    t = Table((F(1, 2), F(1, 3)), inverse_power(2))
    assert t(0) == F(1, 2) and t(2) == F(1, 3) and t(3) == F(1, 16)
    assert t.tail_bound(1) >= t.partial_sum(1, 2000)
    with pytest.raises(ValueError):
        Table((F(1, 5), F(1, 2)), inverse_power(2))


@pytest.mark.parametrize("text,expected", [
    ("exp:1/2", exponential(F(1, 2))),
    ("2^-n", exponential(F(1, 2))),
    ("invpow:2", inverse_power(2)),
    ("invpoly:1,2,1", inverse_power(2)),
])
def test_parse_scaling(text, expected):
    f = parse_scaling(text)
    assert [f(n) for n in range(8)] == [expected(n) for n in range(8)]
    assert scaling_from_dict(f.to_dict()) == f


def test_distortion_functions():
    assert distortion([0, 0, 1])(3) == 9
    assert affine_distortion(2)(5) == 12
    assert parse_distortion("n^2")(4) == 16
    with pytest.raises(ValueError):
        distortion([0, F(1, 2)])
    with pytest.raises(ValueError):
        distortion([0, 0, F(1, 10)])  # n^2/10 < n at n = 1


@given(st.lists(st.fractions(min_value=0, max_value=5), min_size=1, max_size=4))
def test_accepted_distortions_dominate_identity(coeffs):
    try:
        a = distortion(coeffs)
    except ValueError:
        return
    assert all(a(n) >= n for n in range(60))
