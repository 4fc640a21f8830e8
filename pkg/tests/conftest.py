from fractions import Fraction

import pytest
from hypothesis import strategies as st

from phasestar.symbols import PhaseSpace, Symbol


@pytest.fixture(scope="session")
def plane():
    return PhaseSpace.blocked(("q1",), ("p1",))


@pytest.fixture(scope="session")
def two_dof():
    return PhaseSpace.blocked(("q1", "q2"), ("p1", "p2"))


@pytest.fixture(scope="session")
def coupled():
    from phasestar.parametrized import fixture_coupled_particles

    return fixture_coupled_particles()


@pytest.fixture(scope="session")
def coupled_numeric():
    from phasestar.parametrized import fixture_coupled_particles

    return fixture_coupled_particles(M=1, m=1, k=Fraction(1, 2))


def symbols_over(space, max_degree=3, max_terms=4, with_hbar=False, with_params=()):
    """Hypothesis strategy for small exact symbols over a space."""
    rationals = st.builds(
        Fraction,
        st.integers(min_value=-4, max_value=4),
        st.integers(min_value=1, max_value=3),
    )

    factors = list(space.coords)

    @st.composite
    def term(draw):
        coeff = draw(rationals)
        sym = Symbol.constant(space, coeff)
        degree = draw(st.integers(min_value=0, max_value=max_degree))
        for _ in range(degree):
            name = draw(st.sampled_from(factors))
            sym = sym * Symbol.coordinate(space, name)
        if with_hbar and draw(st.booleans()):
            sym = sym.scale_hbar(draw(st.integers(min_value=0, max_value=1)))
        for pname in with_params:
            if draw(st.booleans()):
                sym = sym * Symbol.parameter(space, pname)
        return sym

    @st.composite
    def poly(draw):
        n = draw(st.integers(min_value=1, max_value=max_terms))
        out = Symbol.zero(space)
        for _ in range(n):
            out = out + draw(term())
        return out

    return poly()
