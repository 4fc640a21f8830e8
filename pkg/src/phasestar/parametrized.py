"""Parametrized extensions of deparametrized Hamiltonian systems.

Promoting the physical time to a canonical variable turns a Hamiltonian
system (H0 over a base phase space) into a constrained one whose constraint
symbol is P_t + H0.  This module builds that extension, solves the
Heisenberg-flow and Poisson-flow history series (both must terminate; the
generic non-terminating case is detected and rejected), constructs the
coordinate change into history variables, and evaluates the observable
sector in the history representation.  The coupled two-particle demo
system ships as a fixture together with its hand-checked reference tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from .covariant import Diffeomorphism
from .errors import FlowDivergenceError, PhaseStarError
from .moyal import moyal_bracket
from .symbols import PhaseSpace, Symbol, parse_expression

TIME = "t"
TIME_MOMENTUM = "P_t"
CONSTRAINT_COORD = "phi"
DEFAULT_MAX_ORDER = 16


@dataclass
class ExtendedSystem:
    """A deparametrized Hamiltonian plus its parametrized extension.

    ``history_names`` maps every base coordinate to its history partner
    (positions to A1..AN, momenta to B1..BN in pair order).  History data
    and the coordinate change are computed on demand and cached.
    """

    base_space: PhaseSpace
    extended_space: PhaseSpace
    history_space: PhaseSpace
    h0: Symbol
    h0_extended: Symbol
    constraint: Symbol
    history_names: dict[str, str]
    multiplier_name: str = "lam"
    param_values: dict[str, Fraction] | None = None
    _quantum: dict[str, Symbol] | None = field(default=None, repr=False)
    _classical: dict[str, Symbol] | None = field(default=None, repr=False)
    _causal: Diffeomorphism | None = field(default=None, repr=False)

    @property
    def h0_history(self) -> Symbol:
        """H0 with base coordinates replaced by their history partners."""
        bindings = {
            name: Symbol.coordinate(self.history_space, self.history_names[name])
            for name in self.base_space.coords
        }
        return self.h0.substitute(bindings)

    def histories_match(self) -> bool:
        return quantum_histories(self) == classical_histories(self)


def parametrize(h0: Symbol) -> ExtendedSystem:
    """Extend a base Hamiltonian by the canonical pair (t, P_t).

    The constraint symbol is exactly P_t + H0; H0 must not involve the new
    pair's names.
    """
    base = h0.space
    if TIME in base or TIME_MOMENTUM in base:
        raise PhaseStarError("base space already contains the time pair")
    if CONSTRAINT_COORD in base:
        raise PhaseStarError(f"base space reserves {CONSTRAINT_COORD!r}")
    extended = PhaseSpace(
        (TIME, TIME_MOMENTUM) + base.coords,
        ((0, 1),) + tuple((a + 2, b + 2) for a, b in base.pairing),
    )
    history_names: dict[str, str] = {}
    a_names, b_names = [], []
    for s, (a_idx, b_idx) in enumerate(base.pairing, start=1):
        history_names[base.coords[a_idx]] = f"A{s}"
        history_names[base.coords[b_idx]] = f"B{s}"
        a_names.append(f"A{s}")
        b_names.append(f"B{s}")
    n = base.npairs
    history = PhaseSpace(
        (TIME, CONSTRAINT_COORD) + tuple(a_names) + tuple(b_names),
        ((0, 1),) + tuple((2 + s, 2 + n + s) for s in range(n)),
    )
    h0_ext = h0.rename_space(extended)
    constraint = Symbol.coordinate(extended, TIME_MOMENTUM) + h0_ext
    return ExtendedSystem(
        base_space=base,
        extended_space=extended,
        history_space=history,
        h0=h0,
        h0_extended=h0_ext,
        constraint=constraint,
    history_names=history_names,
    )


def _bracket_series(seed: Symbol, h0: Symbol, bracket: Callable[[Symbol, Symbol], Symbol],
                    max_order: int) -> list[Symbol]:
    """Coefficients c_n of the flow sum_n t^n/n! c_n; must terminate."""
    coeffs = [seed]
    current = seed
    for _ in range(max_order):
        current = bracket(current, h0)
        if current.is_zero():
            return coeffs
        coeffs.append(current)
    raise FlowDivergenceError(
        f"history series did not terminate within order {max_order}; "
        f"last bracket has total degree {coeffs[-1].total_degree()}"
    )


def _assemble_flow(coeffs: list[Symbol], target: PhaseSpace,
                   coord_map: Mapping[str, str], time_sign: int) -> Symbol:
    """sum_n (sign*t)^n / n! c_n with base coordinates renamed via coord_map."""
    t = Symbol.coordinate(target, TIME)
    out = Symbol.zero(target)
    t_pow = Symbol.one(target)
    fact = 1
    for n, c in enumerate(coeffs):
        if n:
            t_pow = t_pow * t
            fact *= n
        bindings = {
            name: Symbol.coordinate(target, coord_map[name])
            for name in c.coordinates_present()
        }
        moved = c.substitute(bindings) if bindings else c.rename_space(target)
        out = out + moved * t_pow * Fraction((time_sign) ** n, fact)
    return out


def quantum_histories(sys: ExtendedSystem, max_order: int = DEFAULT_MAX_ORDER) -> dict[str, Symbol]:
    """Moyal-Heisenberg constants of motion over the extended space.

    Solves dF/dt = [F, H0]_M from every base coordinate and substitutes
    t -> -t; the results star-commute with the constraint and realize the
    Heisenberg algebra exactly (checked in the verification suites).
    """
    if sys._quantum is None:
        ident = {name: name for name in sys.base_space.coords}
        out = {}
        for name in sys.base_space.coords:
            coeffs = _bracket_series(
                Symbol.coordinate(sys.base_space, name), sys.h0, moyal_bracket, max_order
            )
            out[sys.history_names[name]] = _assemble_flow(coeffs, sys.extended_space, ident, -1)
        sys._quantum = out
    return dict(sys._quantum)


def classical_histories(sys: ExtendedSystem, max_order: int = DEFAULT_MAX_ORDER) -> dict[str, Symbol]:
    """Poisson-flow analogue of :func:`quantum_histories`."""
    if sys._classical is None:
        ident = {name: name for name in sys.base_space.coords}
        out = {}
        for name in sys.base_space.coords:
            coeffs = _bracket_series(
                Symbol.coordinate(sys.base_space, name), sys.h0, Symbol.poisson, max_order
            )
            out[sys.history_names[name]] = _assemble_flow(coeffs, sys.extended_space, ident, -1)
        sys._classical = out
    return dict(sys._classical)


def histories_classical_guaranteed(sys: ExtendedSystem,
                                   max_order: int = DEFAULT_MAX_ORDER) -> bool:
    """True when every iterated flow bracket has a degree <= 2 argument.

    Under that condition the Moyal and Poisson brackets coincide step by
    step, so the quantum and classical histories are identical polynomials.
    """
    h0_deg = sys.h0.total_degree()
    for name in sys.base_space.coords:
        current = Symbol.coordinate(sys.base_space, name)
        for _ in range(max_order):
            if min(current.total_degree(), h0_deg) > 2:
                return False
            current = current.poisson(sys.h0)
            if current.is_zero():
                break
        else:
            raise FlowDivergenceError("history series did not terminate")
    return True


def causal_map(sys: ExtendedSystem, max_order: int = DEFAULT_MAX_ORDER) -> Diffeomorphism:
    """Coordinate change from the extended space onto history coordinates.

    The forward branch expresses (t, phi, A, B) over (t, P_t, q, p); the
    inverse branch carries the forward-time classical flow.  The exact
    round-trip identity is validated at construction.
    """
    if sys._causal is not None:
        return sys._causal
    classical = classical_histories(sys, max_order)
    forward: dict[str, Symbol] = {
        TIME: Symbol.coordinate(sys.extended_space, TIME),
        CONSTRAINT_COORD: sys.constraint,
    }
    forward.update(classical)
    inverse: dict[str, Symbol] = {
        TIME: Symbol.coordinate(sys.history_space, TIME),
        TIME_MOMENTUM: Symbol.coordinate(sys.history_space, CONSTRAINT_COORD) - sys.h0_history,
    }
    for name in sys.base_space.coords:
        coeffs = _bracket_series(
            Symbol.coordinate(sys.base_space, name), sys.h0, Symbol.poisson, max_order
        )
        inverse[name] = _assemble_flow(coeffs, sys.history_space, sys.history_names, +1)
    sys._causal = Diffeomorphism(sys.extended_space, sys.history_space, forward, inverse)
    return sys._causal


def history_symbol(sys: ExtendedSystem, base_observable: Symbol,
                   max_order: int = DEFAULT_MAX_ORDER) -> Symbol:
    """Heisenberg-picture symbol z(t, A, B) of a base observable."""
    if base_observable.space != sys.base_space:
        raise PhaseStarError("observable must live on the base space")
    coeffs = _bracket_series(base_observable, sys.h0, moyal_bracket, max_order)
    return _assemble_flow(coeffs, sys.history_space, sys.history_names, +1)


def observable_pullback(sys: ExtendedSystem, base_observable: Symbol,
                        max_order: int = DEFAULT_MAX_ORDER) -> Symbol:
    """Compose the Heisenberg-picture symbol with the coordinate change.

    Returns the observable's symbol over the extended space; for systems
    with matching classical and quantum histories the composite collapses
    back to the base observable.
    """
    z_hist = history_symbol(sys, base_observable, max_order)
    return z_hist.substitute(causal_map(sys, max_order).forward)


def observable_time_derivative(sys: ExtendedSystem, base_observable: Symbol,
                               max_order: int = DEFAULT_MAX_ORDER) -> Symbol:
    """Bracket difference [z_hist, H0]_M - {z_hist, H0} over history variables.

    Vanishes identically whenever the Moyal and Poisson brackets agree on
    the history symbol; this is the quantum correction to the classical
    observable evolution.
    """
    z_hist = history_symbol(sys, base_observable, max_order)
    h0_ab = sys.h0_history
    return moyal_bracket(z_hist, h0_ab) - z_hist.poisson(h0_ab)


def hamiltonian_vector_field(sys: ExtendedSystem) -> list[tuple[str, Symbol]]:
    """Components of the constrained Hamiltonian vector field.

    Ordered per the extended coordinates; the undetermined multiplier is
    carried symbolically and never assigned.
    """
    lam = Symbol.parameter(sys.extended_space, sys.multiplier_name)
    components = {name: Symbol.zero(sys.extended_space) for name in sys.extended_space.coords}
    components[TIME] = lam
    for a_idx, b_idx in sys.base_space.pairing:
        qn = sys.base_space.coords[a_idx]
        pn = sys.base_space.coords[b_idx]
        components[qn] = lam * sys.h0_extended.partial(pn)
        components[pn] = -(lam * sys.h0_extended.partial(qn))
    return [(name, components[name]) for name in sys.extended_space.coords]


# ---------------------------------------------------------------------------
# Coupled two-particle fixture: H0 = p1^2/2M + p2^2/2m + k q1 p2^2.
# The reference tables below are hand-checked golden data for the
# verification suites; the A1-dependent connection entries spell the
# composite A1(t, q, p) out explicitly.

FIXTURE_H0 = "p1^2/(2*M) + p2^2/(2*m) + k*q1*p2^2"

FIXTURE_HISTORIES = {
    "A1": "q1 - p1*t/M - (1/2)*(k/M)*p2^2*t^2",
    "B1": "p1 + k*p2^2*t",
    "A2": "q2 - (p2/m + 2*k*q1*p2)*t + (k/M)*p1*p2*t^2 + (1/3)*(k^2/M)*p2^3*t^3",
    "B2": "p2",
}

FIXTURE_FLOW = {
    "q1": "A1 + B1*t/M - (1/2)*(k/M)*B2^2*t^2",
    "p1": "B1 - k*B2^2*t",
    "q2": "A2 + (B2/m + 2*k*A1*B2)*t + (k/M)*B1*B2*t^2 - (1/3)*(k^2/M)*B2^3*t^3",
    "p2": "B2",
}

_A1_COMPOSITE = "(q1 - p1*t/M - (1/2)*(k/M)*p2^2*t^2)"

# Nonzero connection entries on the extended space, keyed by
# (upper, lower, lower); symmetric partners are implied.  The (P_t, p2, p2)
# entry carries the bare 1/m term required by the covariance identity.
FIXTURE_CONNECTION = {
    ("P_t", "p1", "p1"): "1/M",
    ("q1", "t", "p1"): "-1/M",
    ("P_t", "t", "p1"): "(k/M)*p2^2",
    ("q1", "t", "t"): "-(k/M)*p2^2",
    ("P_t", "p2", "p2"): "1/m + 2*k*" + _A1_COMPOSITE,
    ("P_t", "t", "p2"): "-(2*k/M)*p1*p2",
    ("q2", "t", "t"): "(2*k/M)*p1*p2",
    ("P_t", "q1", "p2"): "2*k*p2",
    ("p1", "t", "p2"): "2*k*p2",
    ("q2", "t", "q1"): "-2*k*p2",
    ("P_t", "t", "t"): "(k^2/M)*p2^4",
    ("p1", "p2", "p2"): "2*k*t",
    ("q2", "q1", "p2"): "-2*k*t",
    ("q1", "p2", "p2"): "(k/M)*t^2",
    ("q2", "p1", "p2"): "(k/M)*t^2",
    ("q2", "p2", "p2"): "(2*k^2/M)*p2*t^3",
    ("q2", "t", "p2"): "-1/m - 2*k*" + _A1_COMPOSITE,
}

FIXTURE_VECTOR_FIELD = {
    "t": "lam",
    "P_t": "0",
    "q1": "lam*p1/M",
    "q2": "lam*(p2/m + 2*k*q1*p2)",
    "p1": "0",
    "p2": "-lam*k*p2^2",
}


def fixture_coupled_particles(
    M: int | Fraction | None = None,
    m: int | Fraction | None = None,
    k: int | Fraction | None = None,
) -> ExtendedSystem:
    """The coupled two-particle demo system, fully populated.

    Parameters default to symbolic generators; numeric (rational) overrides
    substitute them exactly.  Histories and the coordinate change are
    computed eagerly so construction already exercises the round-trip
    invariants.
    """
    base = PhaseSpace.blocked(("q1", "q2"), ("p1", "p2"))
    h0 = parse_expression(FIXTURE_H0, base)
    values: dict[str, Fraction] = {}
    for name, value in (("M", M), ("m", m), ("k", k)):
        if value is not None:
            values[name] = Fraction(value)
    if values:
        h0 = h0.subs_params(
            {name: Symbol.constant(base, v) for name, v in values.items()}
        )
    sys = parametrize(h0)
    sys.param_values = values or None
    quantum_histories(sys)
    classical_histories(sys)
    causal_map(sys)
    return sys


def fixture_reference_symbol(text: str, space: PhaseSpace,
                             param_values: dict[str, Fraction] | None) -> Symbol:
    """Parse a reference-table expression, applying numeric overrides."""
    sym = parse_expression(text, space)
    if param_values:
        subs = {
            name: Symbol.constant(space, v)
            for name, v in param_values.items()
            if name in sym.params_present()
        }
        if subs:
            sym = sym.subs_params(subs)
    return sym
