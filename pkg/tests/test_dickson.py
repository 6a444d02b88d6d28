import numpy as np
import pytest

from app.models.design import DicksonSpec
from app.services import field_service as fs
from app.services.dickson_service import (
    composed_square_table,
    dickson_closed_form,
    dickson_eval,
    dickson_values,
    functional_equation_holds,
    is_permutation,
    is_planar,
)


def test_low_orders(gf3):
    xs = np.arange(gf3.q)
    assert (dickson_values(gf3, DicksonSpec(n=1, u=1), xs) == xs).all()
    # D_2(x, u) = x^2 - 2u
    expected = gf3.sub_array(gf3.mul_array(xs, xs), gf3.mul_array(2, 1))
    assert (dickson_values(gf3, DicksonSpec(n=2, u=1), xs) == expected).all()


def test_d7_in_prime_field(gf1):
    assert dickson_eval(gf1, DicksonSpec(n=7, u=1), 1) == 1


def test_u_zero_is_a_monomial(gf3):
    xs = np.arange(gf3.q)
    for n in (1, 4, 7):
        assert (dickson_values(gf3, DicksonSpec(n=n, u=0), xs) == gf3.pow_array(xs, n)).all()


@pytest.mark.parametrize("m", [3, 5])
def test_recurrence_matches_binomial_sum(m):
    ctx = fs.make_field(m)
    xs = np.arange(ctx.q)
    for n in range(1, 14):
        for u in (1, fs.neg(ctx, 1), ctx.generator):
            spec = DicksonSpec(n=n, u=u)
            assert (dickson_values(ctx, spec, xs) == dickson_closed_form(ctx, spec, xs)).all(), (n, u)


@pytest.mark.parametrize("m", [3, 4, 5])
def test_permutation_criterion_agrees_with_exhaustive(m):
    ctx = fs.make_field(m)
    for n in range(1, 14):
        for u in (1, fs.neg(ctx, 1), ctx.generator):
            spec = DicksonSpec(n=n, u=u)
            assert is_permutation(ctx, spec).is_permutation == is_permutation(ctx, spec, "exhaustive").is_permutation


def test_d7_permutes_when_m_is_prime_to_3(gf5):
    assert is_permutation(gf5, DicksonSpec(n=7, u=1)) == (True, "criterion")
    ctx = fs.make_field(6)
    assert not is_permutation(ctx, DicksonSpec(n=7, u=1)).is_permutation


def test_functional_equation(gf5):
    for n in (5, 7, 11):
        for u in (1, fs.neg(gf5, 1), gf5.generator):
            assert functional_equation_holds(gf5, n, u)


def test_planarity(gf5):
    xs = np.arange(gf5.q)
    minus_one = fs.neg(gf5, 1)
    assert is_planar(gf5, gf5.mul_array(xs, xs))
    assert is_planar(gf5, composed_square_table(gf5, DicksonSpec(n=5, u=minus_one)))
    assert not is_planar(gf5, composed_square_table(gf5, DicksonSpec(n=7, u=1)))


def test_planarity_is_thread_count_independent(gf5):
    table = composed_square_table(gf5, DicksonSpec(n=5, u=1))
    assert is_planar(gf5, table, threads=1) == is_planar(gf5, table, threads=4)


def test_planar_table_must_cover_the_field(gf3):
    with pytest.raises(ValueError):
        is_planar(gf3, np.arange(5))
