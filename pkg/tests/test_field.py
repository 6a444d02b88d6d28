import numpy as np
import pytest

from app.core.errors import CapacityError, FieldDomainError, ReducibleModulusError, UsageError
from app.services import field_service as fs
from app.services.field_service import check_irreducible, load_default_moduli, make_field, parse_element


# ---------------------------------------------------------
# Construction
# ---------------------------------------------------------
def test_default_moduli_are_irreducible():
    moduli = load_default_moduli()
    assert sorted(moduli) == list(range(1, 14))
    for m, modulus in moduli.items():
        assert len(modulus) == m + 1
        assert modulus[-1] == 1
        check_irreducible(modulus)


def test_reducible_modulus_is_rejected_with_a_factor():
    # x^2 - 1 = (x - 1)(x + 1)
    with pytest.raises(ReducibleModulusError) as exc:
        make_field(2, [2, 0, 1])
    factor = exc.value.factor
    assert len(factor) == 2 and factor[-1] == 1


def test_degree_out_of_range():
    with pytest.raises(CapacityError):
        make_field(0)
    with pytest.raises(CapacityError):
        make_field(14)


def test_modulus_of_wrong_degree():
    with pytest.raises(UsageError):
        make_field(3, [1, 1])


def test_contexts_are_cached(gf5):
    assert make_field(5) is gf5


def test_generator_is_primitive(gf5):
    assert np.unique(gf5.exp_table).size == gf5.q - 1
    assert 0 not in gf5.exp_table
    assert gf5.exp_table[0] == 1


# ---------------------------------------------------------
# Field axioms
# ---------------------------------------------------------
def test_axioms_exhaustive_small_field(gf2):
    q = gf2.q
    for a in range(q):
        assert fs.add(gf2, a, 0) == a
        assert fs.mul(gf2, a, 1) == a
        assert fs.mul(gf2, a, 0) == 0
        assert fs.add(gf2, a, fs.neg(gf2, a)) == 0
        for b in range(q):
            assert fs.add(gf2, a, b) == fs.add(gf2, b, a)
            assert fs.mul(gf2, a, b) == fs.mul(gf2, b, a)
            for c in range(q):
                left = fs.mul(gf2, a, fs.add(gf2, b, c))
                right = fs.add(gf2, fs.mul(gf2, a, b), fs.mul(gf2, a, c))
                assert left == right
                assert fs.mul(gf2, fs.mul(gf2, a, b), c) == fs.mul(gf2, a, fs.mul(gf2, b, c))


def test_inverses(gf3):
    for a in range(1, gf3.q):
        assert fs.mul(gf3, a, fs.inv(gf3, a)) == 1


def test_vectorized_ops_match_scalar(gf4, rng):
    a = rng.integers(0, gf4.q, size=200)
    b = rng.integers(0, gf4.q, size=200)
    prod = gf4.mul_array(a, b)
    total = gf4.add_array(a, b)
    for x, y, p, s in zip(a, b, prod, total):
        assert fs.mul(gf4, x, y) == p
        assert fs.add(gf4, x, y) == s


def test_frobenius_is_additive(gf4):
    xs = np.arange(gf4.q)
    for y in (1, 5, 40, 80):
        lhs = gf4.pow_array(gf4.add_array(xs, y), 3)
        rhs = gf4.add_array(gf4.pow_array(xs, 3), fs.pow(gf4, y, 3))
        assert (lhs == rhs).all()


def test_domain_errors(gf3):
    with pytest.raises(FieldDomainError):
        fs.inv(gf3, 0)
    with pytest.raises(FieldDomainError):
        fs.pow(gf3, 0, -1)
    with pytest.raises(FieldDomainError):
        fs.log(gf3, 0)
    with pytest.raises(FieldDomainError):
        fs.add(gf3, gf3.q, 0)
    assert fs.pow(gf3, 0, 0) == 1


# ---------------------------------------------------------
# Trace and quadratic character
# ---------------------------------------------------------
def test_trace_is_linear_and_balanced(gf5, rng):
    counts = np.bincount(gf5.trace_table, minlength=3)
    assert (counts == gf5.q // 3).all()
    a = rng.integers(0, gf5.q, size=100)
    b = rng.integers(0, gf5.q, size=100)
    lhs = gf5.trace_table[gf5.add_array(a, b)]
    rhs = (gf5.trace_table[a].astype(int) + gf5.trace_table[b]) % 3
    assert (lhs == rhs).all()
    assert fs.trace(gf5, 1) == 5 % 3


def test_trace_is_frobenius_invariant(gf5):
    xs = np.arange(gf5.q)
    assert (gf5.trace_table[gf5.pow_array(xs, 3)] == gf5.trace_table).all()


def test_quadratic_character(gf5):
    chi = gf5.chi_table
    assert chi[0] == 0
    assert (chi[1:] == 1).sum() == (gf5.q - 1) // 2
    xs = np.arange(1, gf5.q)
    assert (chi[gf5.mul_array(xs, xs)] == 1).all()
    # -1 is a nonsquare for odd m
    assert fs.quadratic_character(gf5, fs.neg(gf5, 1)) == -1
    assert fs.quadratic_character(gf5, gf5.generator) == -1


def test_minus_one_is_square_for_even_m(gf4):
    assert fs.quadratic_character(gf4, fs.neg(gf4, 1)) == 1


# ---------------------------------------------------------
# Element expressions
# ---------------------------------------------------------
def test_parse_element(gf5):
    g = gf5.generator
    assert parse_element(gf5, "0") == 0
    assert parse_element(gf5, "1") == 1
    assert parse_element(gf5, "-1") == 2
    assert parse_element(gf5, "g") == g
    assert parse_element(gf5, "g^2") == fs.mul(gf5, g, g)
    assert parse_element(gf5, "-g^3") == fs.neg(gf5, fs.pow(gf5, g, 3))
    assert parse_element(gf5, "g^(-1)") == fs.inv(gf5, g)
    with pytest.raises(UsageError):
        parse_element(gf5, "h^2")


def test_element_digits_little_endian(gf3):
    assert fs.element_digits(gf3, 5) == [2, 1, 0]
