"""Identity suites certifying the symbolic machinery on a given system.

Each check row carries a stable descriptive id, a pass flag and a residual
printout; rows are deterministic and byte-stable for fixed inputs.  The
coupled-particles fixture additionally certifies against its hand-checked
reference tables.
"""

from __future__ import annotations

import random
from dataclasses import asdict, dataclass
from fractions import Fraction

from .covariant import (
    Diffeomorphism,
    christoffel,
    covariant_star_direct,
    covariant_star_pullback,
    jacobian_symplectic,
    measure_factor,
)
from .deltas import build_stargenfunction, verify_stargen
from .errors import PhaseStarError
from .moyal import moyal_bracket
from .parametrized import (
    CONSTRAINT_COORD,
    FIXTURE_CONNECTION,
    FIXTURE_FLOW,
    FIXTURE_HISTORIES,
    ExtendedSystem,
    causal_map,
    classical_histories,
    fixture_reference_symbol,
    histories_classical_guaranteed,
    quantum_histories,
)
from .symbols import Symbol, text_form

SUITES = ("algebra", "histories", "christoffel", "stargen", "covariance")


@dataclass
class CheckRow:
    id: str
    passed: bool
    residual: str = "0"

    def as_dict(self):
        return asdict(self)


def _row(check_id: str, difference: Symbol) -> CheckRow:
    ok = difference.is_zero()
    return CheckRow(check_id, ok, "0" if ok else text_form(difference))


def suite_algebra(sys: ExtendedSystem) -> list[CheckRow]:
    """Moyal-bracket table of the histories: exact Heisenberg algebra."""
    rows: list[CheckRow] = []
    hist = quantum_histories(sys)
    space = sys.extended_space
    one = Symbol.one(space)
    names = sorted(hist)
    n = sys.base_space.npairs
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            b = moyal_bracket(hist[f"A{i}"], hist[f"B{j}"])
            expect = one if i == j else Symbol.zero(space)
            rows.append(_row(f"algebra/bracket-A{i}-B{j}", b - expect))
    for kind in ("A", "B"):
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                b = moyal_bracket(hist[f"{kind}{i}"], hist[f"{kind}{j}"])
                rows.append(_row(f"algebra/bracket-{kind}{i}-{kind}{j}", b))
    for name in names:
        rows.append(
            _row(f"algebra/constraint-commutes-{name}",
                 moyal_bracket(sys.constraint, hist[name]))
        )
    t = Symbol.coordinate(space, "t")
    rows.append(_row("algebra/bracket-t-constraint", moyal_bracket(t, sys.constraint) - one))
    return rows


def suite_histories(sys: ExtendedSystem) -> list[CheckRow]:
    """History series terminate, agree with the Poisson flow when expected,
    and reproduce the fixture reference polynomials."""
    rows: list[CheckRow] = []
    quantum = quantum_histories(sys)
    classical = classical_histories(sys)
    if histories_classical_guaranteed(sys):
        for name in sorted(quantum):
            rows.append(_row(f"histories/quantum-vs-classical-{name}",
                             quantum[name] - classical[name]))
    if sys.param_values is not None or _is_fixture(sys):
        for name, text in FIXTURE_HISTORIES.items():
            ref = fixture_reference_symbol(text, sys.extended_space, sys.param_values)
            rows.append(_row(f"histories/reference-{name}", quantum[name] - ref))
        T = causal_map(sys)
        for name, text in FIXTURE_FLOW.items():
            ref = fixture_reference_symbol(text, sys.history_space, sys.param_values)
            rows.append(_row(f"histories/flow-{name}", T.inverse[name] - ref))
    return rows


def _is_fixture(sys: ExtendedSystem) -> bool:
    from .parametrized import FIXTURE_H0, parse_expression

    if tuple(sys.base_space.coords) != ("q1", "q2", "p1", "p2"):
        return False
    try:
        return sys.h0 == parse_expression(FIXTURE_H0, sys.base_space)
    except PhaseStarError:
        return False


def suite_christoffel(sys: ExtendedSystem) -> list[CheckRow]:
    """Transformed symplectic matrix and connection of the coordinate change."""
    rows: list[CheckRow] = []
    T = causal_map(sys)
    J = jacobian_symplectic(T)
    rows.append(CheckRow("christoffel/symplectic-canonical", J.is_canonical(),
                         "0" if J.is_canonical() else "non-canonical entries"))
    det = measure_factor(J)
    rows.append(_row("christoffel/measure-det-unit", det - Symbol.one(sys.extended_space)))
    gamma = christoffel(T)
    if sys.param_values is not None or _is_fixture(sys):
        names = sys.extended_space.coords
        expected = {}
        for (up, lo1, lo2), text in FIXTURE_CONNECTION.items():
            i = sys.extended_space.index(up)
            j = sys.extended_space.index(lo1)
            k = sys.extended_space.index(lo2)
            expected[(i, min(j, k), max(j, k))] = fixture_reference_symbol(
                text, sys.extended_space, sys.param_values
            )
        got = dict(gamma.nonzero_entries())
        keys = set(expected) | set(got)
        for i, j, k in sorted(keys):
            label = f"christoffel/{names[i]}:{names[j]},{names[k]}"
            want = expected.get((i, j, k), Symbol.zero(sys.extended_space))
            have = got.get((i, j, k), Symbol.zero(sys.extended_space))
            rows.append(_row(label, have - want))
    else:
        sym_ok = True
        for (i, j, k), entry in gamma.nonzero_entries():
            if entry != gamma[i, k, j]:
                sym_ok = False
        rows.append(CheckRow("christoffel/lower-symmetry", sym_ok))
    return rows


def suite_stargen(sys: ExtendedSystem) -> list[CheckRow]:
    """Constraint stargenfunction identities in both representations."""
    rows: list[CheckRow] = []
    hs = sys.history_space
    rho = build_stargenfunction(sys)
    phi = Symbol.coordinate(hs, CONSTRAINT_COORD)
    left, right = verify_stargen(rho, phi, 0, 0)
    rows.append(CheckRow("stargen/constraint-left", left.is_zero(),
                         "0" if left.is_zero() else str(left)))
    rows.append(CheckRow("stargen/constraint-right", right.is_zero(),
                         "0" if right.is_zero() else str(right)))
    n = sys.base_space.npairs
    for j in range(1, n + 1):
        aj = Symbol.parameter(hs, f"a{j}")
        bj = Symbol.parameter(hs, f"b{j}")
        left, right = verify_stargen(rho, Symbol.coordinate(hs, f"A{j}"), aj, bj)
        ok = left.is_zero() and right.is_zero()
        rows.append(CheckRow(f"stargen/label-A{j}", ok, "0" if ok else str(left) + str(right)))
    neg = rho.has_negative_hbar()
    rows.append(CheckRow("stargen/no-negative-hbar", not neg))
    causal = build_stargenfunction(sys, representation="causal")
    pulled = rho.substitute(dict(causal_map(sys).forward))
    rows.append(CheckRow("stargen/representation-consistency", causal == pulled))
    static = rho.derivative("t").is_zero()
    rows.append(CheckRow("stargen/history-static", static))
    return rows


def _random_symbol(space, rng: random.Random, degree: int = 3, nterms: int = 4) -> Symbol:
    out = Symbol.zero(space)
    for _ in range(nterms):
        term = Symbol.constant(space, Fraction(rng.randint(-3, 3) or 1, rng.randint(1, 3)))
        for _ in range(rng.randint(0, degree)):
            term = term * Symbol.coordinate(space, rng.choice(space.coords))
        out = out + term
    return out


def _affine_canonical_map(space, rng: random.Random) -> Diffeomorphism:
    """Random composition of canonical shears and shifts (inverse is exact)."""
    forward = {name: Symbol.coordinate(space, name) for name in space.coords}
    inverse = {name: Symbol.coordinate(space, name) for name in space.coords}
    for _ in range(3):
        a_idx, b_idx = space.pairing[rng.randrange(space.npairs)]
        qn, pn = space.coords[a_idx], space.coords[b_idx]
        c = Fraction(rng.randint(-2, 2) or 1, rng.randint(1, 2))
        if rng.random() < 0.5:
            shear = {qn: Symbol.coordinate(space, qn) + Symbol.coordinate(space, pn) * c}
            unshear = {qn: Symbol.coordinate(space, qn) - Symbol.coordinate(space, pn) * c}
        else:
            shear = {pn: Symbol.coordinate(space, pn) + Symbol.coordinate(space, qn) * c}
            unshear = {pn: Symbol.coordinate(space, pn) - Symbol.coordinate(space, qn) * c}
        full_shear = {n: shear.get(n, Symbol.coordinate(space, n)) for n in space.coords}
        full_unshear = {n: unshear.get(n, Symbol.coordinate(space, n)) for n in space.coords}
        forward = {n: s.substitute(full_shear) for n, s in forward.items()}
        inverse = {n: full_unshear[n].substitute(inverse) for n in space.coords}
    return Diffeomorphism(space, space, forward, inverse)


def suite_covariance(sys: ExtendedSystem, pairs: int = 20, seed: int = 2024) -> list[CheckRow]:
    """Pullback star vs direct covariant star through hbar^2.

    Runs over the identity map, random affine-canonical maps and the
    system's own coordinate change.
    """
    rng = random.Random(seed)
    rows: list[CheckRow] = []
    space = sys.extended_space
    maps = [("identity", Diffeomorphism.identity(space))]
    maps.append(("affine-canonical", _affine_canonical_map(space, rng)))
    maps.append(("system-map", causal_map(sys)))
    for label, d in maps:
        J = jacobian_symplectic(d)
        gamma = christoffel(d)
        bad = 0
        for _ in range(pairs):
            a = _random_symbol(d.source, rng)
            b = _random_symbol(d.source, rng)
            lhs = covariant_star_pullback(a, b, d, max_order=2)
            rhs = covariant_star_direct(a, b, J, gamma, hbar_order=2)
            if lhs != rhs:
                bad += 1
        rows.append(CheckRow(f"covariance/{label}", bad == 0,
                             "0" if bad == 0 else f"{bad}/{pairs} pairs disagree"))
    return rows


def run_suites(sys: ExtendedSystem, which: str = "all", pairs: int = 20) -> list[CheckRow]:
    table = {
        "algebra": lambda: suite_algebra(sys),
        "histories": lambda: suite_histories(sys),
        "christoffel": lambda: suite_christoffel(sys),
        "stargen": lambda: suite_stargen(sys),
        "covariance": lambda: suite_covariance(sys, pairs=pairs),
    }
    if which == "all":
        rows = []
        for name in SUITES:
            rows.extend(table[name]())
        return rows
    if which not in table:
        raise PhaseStarError(f"unknown suite {which!r}")
    return table[which]()
