import random
from fractions import Fraction

import pytest

from phasestar.covariant import (
    Connection,
    Diffeomorphism,
    SymplecticMatrix,
    christoffel,
    covariant_derivative,
    covariant_star_direct,
    covariant_star_pullback,
    jacobian_symplectic,
    measure_factor,
    pfaffian,
)
from phasestar.moyal import star
from phasestar.parametrized import causal_map
from phasestar.symbols import PhaseSpace, Symbol, parse_expression

PLANE = PhaseSpace.blocked(("q",), ("p",))
TWO = PhaseSpace.blocked(("q1", "q2"), ("p1", "p2"))


def sym(text, space):
    return parse_expression(text, space)


def shear_map():
    """Canonical 1-DOF shear (q, p) -> (q, p + q^2)."""
    fwd = {"q": sym("q", PLANE), "p": sym("p + q^2", PLANE)}
    inv = {"q": sym("q", PLANE), "p": sym("p - q^2", PLANE)}
    return Diffeomorphism(PLANE, PLANE, fwd, inv)


def twisted_map():
    """2-DOF polynomial automorphism with coordinate-dependent bracket table:
    the new momentum p1 reads old p1 + q2 p2, so {new q2, new p1} = q2."""
    fwd = {
        "q1": sym("q1", TWO),
        "q2": sym("q2", TWO),
        "p1": sym("p1 - q2*p2", TWO),
        "p2": sym("p2", TWO),
    }
    inv = {
        "q1": sym("q1", TWO),
        "q2": sym("q2", TWO),
        "p1": sym("p1 + q2*p2", TWO),
        "p2": sym("p2", TWO),
    }
    return Diffeomorphism(TWO, TWO, fwd, inv)


def scaling_map():
    """Non-symplectic scaling: new q = 2 * old q."""
    fwd = {"q": sym("q/2", PLANE), "p": sym("p", PLANE)}
    inv = {"q": sym("2*q", PLANE), "p": sym("p", PLANE)}
    return Diffeomorphism(PLANE, PLANE, fwd, inv)


class TestDiffeomorphism:
    def test_identity_round_trip(self):
        d = Diffeomorphism.identity(TWO)
        assert d.forward["q1"] == Symbol.coordinate(TWO, "q1")

    def test_bad_inverse_rejected(self):
        fwd = {"q": sym("q", PLANE), "p": sym("p + q^2", PLANE)}
        bad_inv = {"q": sym("q", PLANE), "p": sym("p + q^2", PLANE)}
        with pytest.raises(ValueError):
            Diffeomorphism(PLANE, PLANE, fwd, bad_inv)


class TestJacobianSymplectic:
    def test_identity_is_canonical(self):
        assert jacobian_symplectic(Diffeomorphism.identity(TWO)).is_canonical()

    def test_shear_is_canonical(self):
        # (q, p+q^2) preserves the bracket; J' is the constant canonical matrix
        assert jacobian_symplectic(shear_map()).is_canonical()

    def test_fixture_map_is_canonical(self, coupled):
        assert jacobian_symplectic(causal_map(coupled)).is_canonical()

    def test_twisted_map_has_symbol_entries(self):
        J = jacobian_symplectic(twisted_map())
        assert not J.is_canonical()
        i_q2 = TWO.index("q2")
        i_p1 = TWO.index("p1")
        # {Q2, P1} = q2 by hand contraction
        assert J[i_q2, i_p1] == sym("q2", TWO)

    def test_antisymmetry_enforced(self):
        one = Symbol.one(PLANE)
        with pytest.raises(ValueError):
            SymplecticMatrix(PLANE, ((one, one), (-one, Symbol.zero(PLANE))))


class TestChristoffel:
    def test_identity_vanishes(self):
        assert christoffel(Diffeomorphism.identity(TWO)).is_flat()

    def test_affine_maps_vanish(self):
        rng = random.Random(5)
        for _ in range(5):
            c = Fraction(rng.randint(-3, 3) or 1, rng.randint(1, 3))
            fwd = {"q": sym("q", PLANE) * c, "p": sym("p", PLANE) * (1 / c)}
            inv = {"q": sym("q", PLANE) * (1 / c), "p": sym("p", PLANE) * c}
            d = Diffeomorphism(PLANE, PLANE, fwd, inv)
            assert christoffel(d).is_flat()

    def test_shear_has_connection(self):
        gamma = christoffel(shear_map())
        assert not gamma.is_flat()

    def test_fixture_table(self, coupled):
        from phasestar.parametrized import FIXTURE_CONNECTION, fixture_reference_symbol

        gamma = christoffel(causal_map(coupled))
        ext = coupled.extended_space
        expected = {}
        for (up, lo1, lo2), text in FIXTURE_CONNECTION.items():
            i, j, k = ext.index(up), ext.index(lo1), ext.index(lo2)
            expected[(i, min(j, k), max(j, k))] = fixture_reference_symbol(text, ext, None)
        got = dict(gamma.nonzero_entries())
        assert got == expected

    def test_lower_symmetry_enforced(self):
        zero = Symbol.zero(PLANE)
        one = Symbol.one(PLANE)
        bad = (((zero, one), (zero, zero)), ((zero, zero), (zero, zero)))
        with pytest.raises(ValueError):
            Connection(PLANE, bad)


class TestCovariantDerivative:
    def test_flat_connection_gives_hessian(self):
        gamma = Connection.flat(TWO)
        a = sym("q1^2*p1", TWO)
        hess = covariant_derivative(a, gamma, 2)
        i, j = TWO.index("q1"), TWO.index("p1")
        assert hess[i][j] == sym("2*q1", TWO)

    def test_constant_vanishes(self, coupled):
        gamma = christoffel(causal_map(coupled))
        const = Symbol.constant(coupled.extended_space, 7)
        hess = covariant_derivative(const, gamma, 2)
        assert all(entry.is_zero() for row in hess for entry in row)

    def test_gradient_term_from_connection(self, coupled):
        # second covariant derivative of a coordinate picks up -Gamma^x_{jk}
        gamma = christoffel(causal_map(coupled))
        ext = coupled.extended_space
        q1 = Symbol.coordinate(ext, "q1")
        hess = covariant_derivative(q1, gamma, 2)
        i_x = ext.index("q1")
        for j in range(ext.dim):
            for k in range(ext.dim):
                assert hess[j][k] == -gamma[i_x, j, k]

    def test_order_validation(self, coupled):
        gamma = christoffel(causal_map(coupled))
        with pytest.raises(ValueError):
            covariant_derivative(Symbol.one(coupled.extended_space), gamma, 3)


class TestCovariantStar:
    def test_identity_map_reduces_to_star(self):
        d = Diffeomorphism.identity(TWO)
        a, b = sym("q1^2 + p2", TWO), sym("q2*p1", TWO)
        assert covariant_star_pullback(a, b, d) == star(a, b)

    def test_linear_canonical_map_preserves_star_exactly(self):
        # new (Q1, Q2, P1, P2) = (q1 + q2, q2, p1, p2 - p1): all brackets canonical
        fwd = {
            "q1": sym("q1 - q2", TWO), "q2": sym("q2", TWO),
            "p1": sym("p1", TWO), "p2": sym("p2 + p1", TWO),
        }
        inv = {
            "q1": sym("q1 + q2", TWO), "q2": sym("q2", TWO),
            "p1": sym("p1", TWO), "p2": sym("p2 - p1", TWO),
        }
        d = Diffeomorphism(TWO, TWO, fwd, inv)
        assert jacobian_symplectic(d).is_canonical()
        a, b = sym("q1*p1 + q2", TWO), sym("p2^2 + q1", TWO)
        # linear symplectic maps commute with the Moyal series at every order
        assert covariant_star_pullback(a, b, d) == star(a, b)

    def test_direct_flat_matches_star_through_hbar2(self):
        J = SymplecticMatrix.canonical(TWO)
        gamma = Connection.flat(TWO)
        a, b = sym("q1^2*p2", TWO), sym("q2*p1^2", TWO)
        direct = covariant_star_direct(a, b, J, gamma, 2)
        assert direct == star(a, b, max_order=2)

    def test_direct_hbar_order_zero(self):
        J = SymplecticMatrix.canonical(TWO)
        gamma = Connection.flat(TWO)
        a, b = sym("q1", TWO), sym("p1", TWO)
        assert covariant_star_direct(a, b, J, gamma, 0) == a * b

    def test_fixture_pullback_vs_direct(self, coupled):
        rng = random.Random(11)
        d = causal_map(coupled)
        J = jacobian_symplectic(d)
        gamma = christoffel(d)
        space = coupled.extended_space

        def rand():
            out = Symbol.zero(space)
            for _ in range(4):
                t = Symbol.constant(space, Fraction(rng.randint(-2, 2) or 1, rng.randint(1, 2)))
                for _ in range(rng.randint(0, 3)):
                    t = t * Symbol.coordinate(space, rng.choice(space.coords))
                out = out + t
            return out

        for _ in range(8):
            a, b = rand(), rand()
            assert covariant_star_pullback(a, b, d, max_order=2) == covariant_star_direct(
                a, b, J, gamma, 2
            )


class TestMeasureFactor:
    def test_canonical_determinant(self):
        J = SymplecticMatrix.canonical(TWO)
        assert measure_factor(J) == Symbol.one(TWO)
        pf = measure_factor(J, as_pfaffian=True)
        assert pf * pf == Symbol.one(TWO)

    def test_fixture_measure_is_unit(self, coupled):
        J = jacobian_symplectic(causal_map(coupled))
        assert measure_factor(J) == Symbol.one(coupled.extended_space)

    def test_scaled_map_constant(self):
        J = jacobian_symplectic(scaling_map())
        assert measure_factor(J, as_pfaffian=True) == Symbol.constant(PLANE, 2)
        assert measure_factor(J) == Symbol.constant(PLANE, 4)

def test_odd_dimension_guard():
    # PhaseSpace cannot be odd-dimensional, so exercise the guard directly
    class FakeSpace:
        dim = 3

    class FakeMatrix:
        space = FakeSpace()

    with pytest.raises(ValueError):
        pfaffian(FakeMatrix())
