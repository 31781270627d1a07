import random

import pytest
from hypothesis import given, settings, strategies as st

from rpm3 import gf
from rpm3.errors import ConfigurationError, FieldMismatchError, InvalidEvaluationSetError
from rpm3.gf import DEFAULT_Q, PrimeField, Polynomial, is_prime

Q = DEFAULT_Q
elem = st.integers(min_value=0, max_value=Q - 1)
F = PrimeField(Q)


def poly_mul(a, b, q):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] = (out[i + j] + x * y) % q
    return out


def basis_by_expansion(points, delta, x, q):
    """Expand the basis polynomial as coefficients, then evaluate with Horner."""
    num = [1]
    den = 1
    for nu, p in enumerate(points):
        if nu != delta:
            num = poly_mul(num, [-p % q, 1], q)
            den = den * (points[delta] - p) % q
    val = 0
    for c in reversed(num):
        val = (val * x + c) % q
    return val * pow(den, q - 2, q) % q


class TestPrimality:
    @pytest.mark.parametrize("q", [2, 3, 5, 7, 257, 65537, Q, 2305843009213693951])
    def test_primes(self, q):
        assert is_prime(q)

    @pytest.mark.parametrize("n", [0, 1, 4, 561, 1105, 2147483649, 3215031751])
    def test_composites(self, n):
        assert not is_prime(n)

    def test_rejects_composite_modulus(self):
        with pytest.raises(ConfigurationError):
            PrimeField(15)

    def test_rejects_oversized_modulus(self):
        with pytest.raises(ConfigurationError):
            PrimeField((1 << 64) - 59)


class TestScalarOps:
    def test_small_examples(self, f7):
        assert f7.add(3, 5) == 1
        assert f7.add(6, 1) == 0
        assert f7.mul(3, 5) == 1
        assert f7.inv(3) == 5
        assert f7.inv(1) == 1
        assert f7.add(0, 4) == 4
        assert f7.mul(1, 4) == 4

    def test_minus_one_squared(self, fbig):
        assert fbig.mul(Q - 1, Q - 1) == 1

    def test_inverse_exhaustive_257(self):
        f = PrimeField(257)
        for a in range(1, 257):
            assert a * f.inv(a) % 257 == 1

    def test_inverse_of_zero(self, f7):
        with pytest.raises(ZeroDivisionError):
            f7.inv(0)
        with pytest.raises(ZeroDivisionError):
            f7(0).inv()

    def test_batch_inverse(self, fbig):
        vals = [random.Random(3).randrange(1, Q) for _ in range(50)]
        assert fbig.batch_inv(vals) == [fbig.inv(v) for v in vals]


class TestFieldElement:
    def test_operators(self, f7):
        a, b = f7(3), f7(5)
        assert (a + b).value == 1
        assert (a * b).value == 1
        assert (a - b).value == 5
        assert (-a).value == 4
        assert (a / b).value == 2
        assert a.inv().value == 5
        assert gf.add(a, b) == f7(1)
        assert gf.mul(a, b) == f7(1)
        assert gf.sub(a, b) == f7(5)
        assert gf.neg(a) == f7(4)
        assert gf.inv(a) == f7(5)

    def test_canonical(self, f7):
        assert f7(-1).value == 6
        with pytest.raises(ValueError):
            gf.FieldElement(7, f7)

    def test_mismatched_moduli(self, f7):
        with pytest.raises(FieldMismatchError):
            f7(1) + PrimeField(11)(1)
        with pytest.raises(ConfigurationError):
            gf.mul(f7(2), PrimeField(5)(2))


@settings(max_examples=10_000, deadline=None)
@given(elem, elem, elem)
def test_field_axioms(a, b, c):
    assert F.add(F.add(a, b), c) == F.add(a, F.add(b, c))
    assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))
    assert F.add(a, b) == F.add(b, a)
    assert F.mul(a, b) == F.mul(b, a)
    assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
    assert F.add(a, F.neg(a)) == 0
    assert F.sub(F.add(a, b), b) == a
    if a:
        assert F.mul(a, F.inv(a)) == 1


class TestLagrangeBasis:
    def test_kronecker(self, f7):
        pts = [0, 2, 5]
        for d in range(3):
            for nu in range(3):
                assert f7.lagrange_basis(pts, d, pts[nu]) == int(d == nu)

    def test_duplicate_points(self, f7):
        with pytest.raises(InvalidEvaluationSetError):
            f7.lagrange_basis([1, 2, 8], 0, 3)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(elem, min_size=1, max_size=32, unique=True), elem)
    def test_partition_of_unity_against_expansion(self, pts, x):
        weights = F.basis_weights(pts, x)
        assert sum(weights) % Q == 1
        for d in range(len(pts)):
            assert weights[d] == basis_by_expansion(pts, d, x, Q)
        d = len(pts) // 2
        assert F.lagrange_basis(pts, d, x) == weights[d]

    @settings(max_examples=40, deadline=None)
    @given(st.lists(elem, min_size=1, max_size=32, unique=True))
    def test_weights_at_nodes(self, pts):
        for i, p in enumerate(pts):
            w = F.basis_weights(pts, p)
            assert w == [int(j == i) for j in range(len(pts))]


class TestInterpolate:
    def test_constant(self, f7):
        p = f7.interpolate([(1, 4), (3, 4), (6, 4)])
        assert p.coeffs == (4, 0, 0)
        assert p.degree == 0

    def test_quadratic_q7(self, f7):
        p = f7.interpolate([(1, 6), (2, 4), (3, 0)])
        assert [p(x) for x in (1, 2, 3)] == [6, 4, 0]
        assert p.degree <= 2

    def test_random_quadratic_q7(self, f7):
        r = random.Random(7)
        for _ in range(50):
            coeffs = tuple(r.randrange(7) for _ in range(3))
            true = Polynomial(coeffs, f7)
            xs = r.sample(range(7), 3)
            assert f7.interpolate([(x, true(x)) for x in xs]).coeffs == coeffs

    def test_errors(self, f7):
        with pytest.raises(ValueError):
            f7.interpolate([])
        with pytest.raises(InvalidEvaluationSetError):
            f7.interpolate([(1, 1), (8, 2)])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(elem, min_size=1, max_size=41), st.randoms(use_true_random=False))
    def test_interpolate_evaluate_roundtrip(self, coeffs, r):
        true = Polynomial(tuple(coeffs), F)
        xs = r.sample(range(Q), len(coeffs))
        assert F.interpolate([(x, true(x)) for x in xs]).coeffs == tuple(coeffs)
