"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Exact criteria assert symbol equality; numeric criteria pin the stated
tolerances.  Two literal sub-claims are encoded as strict xfails with the
verified analysis in their reasons (see the companion green tests that pin
the computed behavior).
"""

import random
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from phasestar.covariant import (
    Diffeomorphism,
    christoffel,
    covariant_star_direct,
    covariant_star_pullback,
    jacobian_symplectic,
)
from phasestar.deltas import (
    DeltaFactor,
    DeltaSymbol,
    DeltaTerm,
    build_stargenfunction,
    delta_text_form,
    exp_shift_star_delta,
    verify_stargen,
)
from phasestar.grids import (
    Amplitude,
    BracketOperator,
    GridAxis,
    GridSpec,
    amplitude_marginal,
    axis_derivative,
    normalize_check,
    sample,
    step_rk4,
    wigner_of_amplitude,
)
from phasestar.moyal import (
    first_noncollapsing_power,
    moyal_bracket,
    star_exp_classical_check,
    star_power,
)
from phasestar.parametrized import (
    FIXTURE_CONNECTION,
    FIXTURE_HISTORIES,
    causal_map,
    classical_histories,
    fixture_coupled_particles,
    fixture_reference_symbol,
    history_symbol,
    observable_time_derivative,
    quantum_histories,
)
from phasestar.symbols import PhaseSpace, Symbol, parse_expression

GOLDEN = Path(__file__).parent / "golden"


def report(number, name, detail=""):
    suffix = f"  ({detail})" if detail else ""
    print(f"[criterion {number:02d}] {name}: PASS{suffix}")


@pytest.fixture(scope="module")
def fx():
    return fixture_coupled_particles()


@pytest.fixture(scope="module")
def fx_numeric():
    return fixture_coupled_particles(M=1, m=1, k=Fraction(1, 2))


def test_criterion_01_histories_exact(fx):
    started = time.perf_counter()
    quantum = quantum_histories(fx)
    classical = classical_histories(fx)
    for name, text in FIXTURE_HISTORIES.items():
        ref = fixture_reference_symbol(text, fx.extended_space, None)
        assert quantum[name] == ref, name
        assert classical[name] == ref, name
    assert quantum == classical
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report(1, "history polynomials reproduced exactly", f"{elapsed * 1e3:.0f} ms")


def test_criterion_02_heisenberg_algebra(fx):
    hist = quantum_histories(fx)
    ext = fx.extended_space
    one = Symbol.one(ext)
    for i in (1, 2):
        for j in (1, 2):
            expected = one if i == j else Symbol.zero(ext)
            assert moyal_bracket(hist[f"A{i}"], hist[f"B{j}"]) == expected
    assert moyal_bracket(hist["A1"], hist["A2"]).is_zero()
    assert moyal_bracket(hist["B1"], hist["B2"]).is_zero()
    for name in ("A1", "A2", "B1", "B2"):
        assert moyal_bracket(fx.constraint, hist[name]).is_zero()
    assert moyal_bracket(Symbol.coordinate(ext, "t"), fx.constraint) == one
    report(2, "Heisenberg algebra of the histories is exact")


def test_criterion_03_connection_table(fx):
    gamma = christoffel(causal_map(fx))
    ext = fx.extended_space
    expected = {}
    for (up, lo1, lo2), text in FIXTURE_CONNECTION.items():
        i, j, k = ext.index(up), ext.index(lo1), ext.index(lo2)
        expected[(i, min(j, k), max(j, k))] = fixture_reference_symbol(text, ext, None)
    got = dict(gamma.nonzero_entries())
    assert got == expected
    # lower-index symmetry across the full table
    for (i, j, k), entry in got.items():
        assert gamma[i, k, j] == entry
    report(3, "connection table matches the derived reference",
           f"{len(got)} nonzero entries; includes the bare 1/m term")


def _random_symbol(space, rng, degree=3, nterms=4):
    out = Symbol.zero(space)
    for _ in range(nterms):
        term = Symbol.constant(space, Fraction(rng.randint(-3, 3) or 1, rng.randint(1, 3)))
        for _ in range(rng.randint(0, degree)):
            term = term * Symbol.coordinate(space, rng.choice(space.coords))
        out = out + term
    return out


def test_criterion_04_covariance(fx):
    from phasestar.verify import _affine_canonical_map

    started = time.perf_counter()
    rng = random.Random(404)
    space = fx.extended_space
    maps = [
        ("identity", Diffeomorphism.identity(space)),
        ("affine-canonical", _affine_canonical_map(space, rng)),
        ("fixture", causal_map(fx)),
    ]
    pairs_per_map = 34  # >= 100 pairs in total
    total = 0
    for label, d in maps:
        J = jacobian_symplectic(d)
        gamma = christoffel(d)
        for _ in range(pairs_per_map):
            a = _random_symbol(space, rng)
            b = _random_symbol(space, rng)
            lhs = covariant_star_pullback(a, b, d, max_order=2)
            rhs = covariant_star_direct(a, b, J, gamma, hbar_order=2)
            assert lhs == rhs, label
            total += 1
    elapsed = time.perf_counter() - started
    assert total >= 100
    assert elapsed < 30.0
    report(4, "pullback and direct covariant star agree through hbar^2",
           f"{total} pairs x 3 maps in {elapsed:.1f} s")


def test_criterion_05_stargenfunctions(fx):
    hs = fx.history_space
    # shifted-delta identity for a generic conjugate pair
    q1 = Symbol.coordinate(hs, "A1")
    b1 = Symbol.parameter(hs, "b1")
    a1 = Symbol.parameter(hs, "a1")
    shifted = exp_shift_star_delta(
        [b1 - a1], [Symbol.coordinate(hs, "B1")], [q1], [b1]
    )
    expected = DeltaSymbol(
        hs,
        [DeltaTerm(Symbol.one(hs), (b1 - a1) * Symbol.coordinate(hs, "B1"),
                   (DeltaFactor(q1 - (a1 + b1) * Fraction(1, 2), 0),))],
    )
    assert shifted == expected

    rho = build_stargenfunction(fx)
    assert delta_text_form(rho) + "\n" == (GOLDEN / "stargen_history.txt").read_text()
    phi = Symbol.coordinate(hs, "phi")
    left, right = verify_stargen(rho, phi, 0, 0)
    assert left.is_zero() and right.is_zero()
    for j in (1, 2):
        aj, bj = Symbol.parameter(hs, f"a{j}"), Symbol.parameter(hs, f"b{j}")
        left, right = verify_stargen(rho, Symbol.coordinate(hs, f"A{j}"), aj, bj)
        assert left.is_zero() and right.is_zero()
    assert not rho.has_negative_hbar()

    causal = build_stargenfunction(fx, representation="causal")
    assert delta_text_form(causal) + "\n" == (GOLDEN / "stargen_causal.txt").read_text()
    # explicit reference assembled from the history polynomials
    ext = fx.extended_space
    a1e, a2e = Symbol.parameter(ext, "a1"), Symbol.parameter(ext, "a2")
    b1e, b2e = Symbol.parameter(ext, "b1"), Symbol.parameter(ext, "b2")
    hist = {n: fixture_reference_symbol(t, ext, None) for n, t in FIXTURE_HISTORIES.items()}
    reference = DeltaSymbol(
        ext,
        [DeltaTerm(
            Symbol.one(ext),
            (b1e - a1e) * hist["B1"] + (b2e - a2e) * hist["B2"],
            (
                DeltaFactor(hist["A1"] - (a1e + b1e) * Fraction(1, 2), 0),
                DeltaFactor(hist["A2"] - (a2e + b2e) * Fraction(1, 2), 0),
                DeltaFactor(fx.constraint, 0),
            ),
        )],
    )
    assert causal == reference
    assert causal == rho.substitute(dict(causal_map(fx).forward))
    report(5, "stargenfunction identities exact in both representations",
           "residuals 0, no negative hbar powers")


def test_criterion_06_star_exp_classicality(fx):
    base = fx.base_space
    q1h = history_symbol(fx, Symbol.coordinate(base, "q1"))
    p1h = history_symbol(fx, Symbol.coordinate(base, "p1"))
    p2h = history_symbol(fx, Symbol.coordinate(base, "p2"))
    q2h = history_symbol(fx, Symbol.coordinate(base, "q2"))
    assert star_exp_classical_check(q1h, 4)
    assert star_exp_classical_check(p1h, 4)
    assert star_exp_classical_check(p2h, 4)
    assert not star_exp_classical_check(q2h, 4)
    remainder2 = star_power(q2h, 2) - q2h * q2h
    assert remainder2.is_zero()
    assert first_noncollapsing_power(q2h, 4) == 3
    remainder3 = star_power(q2h, 3) - q2h**3
    assert not remainder3.is_zero()
    assert remainder3.hbar_powers() == (2,)
    report(6, "closure holds for q1/p1/p2 histories and fails for q2",
           "first hbar^2 remainder at star-power 3 (power 2 collapses exactly)")


@pytest.mark.xfail(
    strict=True,
    reason=(
        "criterion 6 literal detail: asserts a nonzero remainder already at "
        "star-power 2, but star_power(q2_hist, 2) == q2_hist^2 exactly -- every "
        "mixed second derivative of the q2 history pairs with an A2- or "
        "phi-derivative of itself, which vanishes.  The first non-classical "
        "remainder appears at star-power 3 (see the green criterion-6 test)."
    ),
)
def test_criterion_06_literal_power_two_remainder(fx):
    q2h = history_symbol(fx, Symbol.coordinate(fx.base_space, "q2"))
    assert not (star_power(q2h, 2) - q2h * q2h).is_zero()


def _fd4_fixture_spec(points=32, half=6.0):
    return GridSpec(
        tuple(GridAxis(n, -half, half, points) for n in ("q1", "q2", "p1", "p2")),
        boundary="zero",
        scheme="fd4",
    )


def _gaussian4(spec, widths=(1.6, 1.6, 1.6, 1.6)):
    w1, w2, w3, w4 = widths
    return sample(
        spec,
        lambda q1, q2, p1, p2: np.exp(
            -(q1**2) / w1**2 - (q2**2) / w2**2 - (p1**2) / w3**2 - (p2**2) / w4**2
        ),
    )


def test_criterion_07_moyal_correction(fx_numeric):
    # The quantum-vs-classical bracket difference only differentiates along
    # q2 beyond first order, so the comparison against a separately
    # discretized correction term is limited by the one-shot-vs-composed
    # fd4 mismatch ~3.3 (h/w)^4 on that axis.  A wrapped (periodicized)
    # Gaussian profile along q2 keeps that ratio small without boundary
    # artifacts; a plain truncated Gaussian floors near 4e-3 at 32^4.
    started = time.perf_counter()
    h0 = fx_numeric.h0
    half, w_q2 = 6.0, 3.8
    spec = GridSpec(
        tuple(GridAxis(n, -half, half, 32) for n in ("q1", "q2", "p1", "p2")),
        boundary="periodic",
        scheme="fd4",
    )
    length = 2 * half

    def wrapped(x):
        return sum(np.exp(-((x + j * length) ** 2) / w_q2**2) for j in range(-3, 4))

    f = sample(
        spec,
        lambda q1, q2, p1, p2: np.exp(-(q1**2 + p1**2 + p2**2) / 1.5**2) * wrapped(q2),
    )
    k_value = 0.5
    norms = {}
    rels = {}
    for hbar in (0.5, 1.0, 2.0):
        quantum = BracketOperator(h0, spec, hbar=hbar, quantum=True)
        classical = BracketOperator(h0, spec, hbar=hbar, quantum=False)
        diff = quantum(f.values) - classical(f.values)
        # independent discretization: the correction term
        # -(hbar^2 k / 4) d^3 f / dq2^2 dp1 via composed first derivatives
        d1 = axis_derivative(spec, f.values, spec.axis_index("q2"), 1)
        d2 = axis_derivative(spec, d1, spec.axis_index("q2"), 1)
        d3 = axis_derivative(spec, d2, spec.axis_index("p1"), 1)
        oracle = -(hbar**2 * k_value / 4.0) * d3
        rel = np.linalg.norm(diff - oracle) / np.linalg.norm(oracle)
        assert rel <= 1e-3, rel
        rels[hbar] = float(rel)
        norms[hbar] = float(np.linalg.norm(diff))
    exponent_low = np.log2(norms[1.0] / norms[0.5])
    exponent_high = np.log2(norms[2.0] / norms[1.0])
    for exponent in (exponent_low, exponent_high):
        assert abs(exponent - 2.0) <= 0.02
    # spectral cross-check: one-shot vs composed spectral derivatives agree
    # to roundoff, far below the 1e-8 requirement
    spec_sp = GridSpec(spec.axes, boundary="periodic", scheme="spectral")
    quantum = BracketOperator(h0, spec_sp, hbar=1.0, quantum=True)
    classical = BracketOperator(h0, spec_sp, hbar=1.0, quantum=False)
    diff = quantum(f.values) - classical(f.values)
    d3 = axis_derivative(
        spec_sp,
        axis_derivative(
            spec_sp,
            axis_derivative(spec_sp, f.values, spec_sp.axis_index("q2"), 1),
            spec_sp.axis_index("q2"),
            1,
        ),
        spec_sp.axis_index("p1"),
        1,
    )
    rel_spectral = np.linalg.norm(diff + (k_value / 4.0) * d3) / np.linalg.norm(d3)
    assert rel_spectral <= 1e-8, rel_spectral
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    report(7, "bracket correction matches the independent discretization",
           f"fd4 rel {max(rels.values()):.1e} <= 1e-3, spectral {rel_spectral:.1e} <= 1e-8, "
           f"hbar exponents {exponent_low:.3f}/{exponent_high:.3f}, {elapsed:.1f} s on 32^4")


def test_criterion_08_quadratic_degeneracy():
    space = PhaseSpace.blocked(("q",), ("p",))
    h = parse_expression("(q^2 + p^2)/2", space)
    spec = GridSpec((GridAxis("q", -8, 8, 256), GridAxis("p", -8, 8, 256)))
    f0 = sample(spec, lambda q, p: np.exp(-((q - 1.5) ** 2) - p**2))
    quantum = BracketOperator(h, spec, quantum=True)
    classical = BracketOperator(h, spec, quantum=False)
    assert np.array_equal(quantum(f0.values), classical(f0.values))

    steps = 10_000
    dt = 2.0 * np.pi / steps
    rhs = lambda s: s.with_values(classical(s.values))  # noqa: E731
    state = f0
    for _ in range(steps):
        state = step_rk4(rhs, state, dt)
    err = np.linalg.norm(state.values - f0.values) / np.linalg.norm(f0.values)
    assert err <= 1e-6, err
    report(8, "harmonic evolution is classical and returns after one period",
           f"L2 return error {err:.2e} over {steps} RK4 steps at 256^2")


def test_criterion_09_normalization(fx_numeric):
    # 1-DOF spectral: anharmonic Hamiltonian with a genuine hbar^2 term;
    # the dispersive third-derivative term caps the stable step near
    # dt ~ 2.8 / (hbar^2 |H'''| k_max^3 / 24), hence dt = 1e-3
    space = PhaseSpace.blocked(("q",), ("p",))
    h = parse_expression("(q^2 + p^2)/2 + q^3/20", space)
    spec = GridSpec((GridAxis("q", -9, 9, 256), GridAxis("p", -9, 9, 256)))
    f = sample(spec, lambda q, p: np.exp(-((q - 1.0) ** 2) - p**2))
    f = f.with_values(f.values / normalize_check(f))
    op = BracketOperator(h, spec, hbar=1.0, quantum=True)
    rhs = lambda s: s.with_values(op(s.values))  # noqa: E731
    state = f
    for _ in range(1000):
        state = step_rk4(rhs, state, 0.001)
    drift_1dof = abs(normalize_check(state) - 1.0)
    assert drift_1dof <= 1e-6, drift_1dof

    # fixture 4-DOF fd4 zero-padded grid; the step keeps the advected bulk
    # at >= 4.5 widths from the boundary so no mass reaches the padding
    spec4 = _fd4_fixture_spec(points=20, half=6.0)
    f4 = _gaussian4(spec4, widths=(1.0, 1.0, 1.0, 1.0))
    f4 = f4.with_values(f4.values / normalize_check(f4))
    op4 = BracketOperator(fx_numeric.h0, spec4, hbar=1.0, quantum=False)
    rhs4 = lambda s: s.with_values(op4(s.values))  # noqa: E731
    state4 = f4
    for _ in range(1000):
        state4 = step_rk4(rhs4, state4, 5e-4)
    drift_4d = abs(normalize_check(state4) - 1.0)
    assert drift_4d <= 1e-4, drift_4d
    report(9, "normalization is conserved under both propagators",
           f"drift {drift_1dof:.2e} (1-DOF spectral), {drift_4d:.2e} (4D fd4)")


def test_criterion_10_probability():
    n, half = 256, 12.0
    ax = GridAxis("a1", -half, half, n)
    da = 2 * half / n
    grid = -half + da * np.arange(n)
    gaussian = Amplitude.normalized((ax,), np.exp(-0.5 * grid**2).astype(complex))
    w = wigner_of_amplitude(gaussian, hbar=1.0)
    marg = amplitude_marginal(w, [0])
    err = float(np.max(np.abs(marg - np.abs(gaussian.values) ** 2)))
    assert err <= 1e-6, err
    assert w.values.min() >= -1e-12

    g = lambda u: np.exp(-0.5 * u**2)  # noqa: E731
    odd = Amplitude.normalized((ax,), (g(grid - 2.5) - g(grid + 2.5)).astype(complex))
    w_odd = wigner_of_amplitude(odd, hbar=1.0)
    assert w_odd.values.min() < -1e-3  # quantum signature
    marg_odd = amplitude_marginal(w_odd, [0])
    err_odd = float(np.max(np.abs(marg_odd - np.abs(odd.values) ** 2)))
    assert err_odd <= 1e-6, err_odd
    report(10, "Wigner marginals return |C|^2; superposition shows negativity",
           f"marginal errors {err:.1e}/{err_odd:.1e}, min W = {w_odd.values.min():.3f}")


def test_criterion_11_causal_picture():
    fx = fixture_coupled_particles(M=1, m=1, k=Fraction(1, 8))
    width = 1.2
    spec = GridSpec(
        tuple(GridAxis(n, -7, 7, 28) for n in ("q1", "q2", "p1", "p2")),
        boundary="periodic",
        scheme="spectral",
    )
    hist = quantum_histories(fx)
    meshes = {ax.name: spec.mesh(k) for k, ax in enumerate(spec.axes)}

    def pulled_back(t):
        coords = dict(meshes)
        coords["t"] = t
        coords["P_t"] = 0.0
        values = {
            name: np.real(sym.evaluate(coords, hbar=1.0))
            for name, sym in hist.items()
        }
        return np.broadcast_to(
            np.exp(
                -(values["A1"] ** 2 + values["A2"] ** 2
                  + values["B1"] ** 2 + values["B2"] ** 2) / width**2
            ),
            spec.shape,
        )

    f = sample(
        spec,
        lambda q1, q2, p1, p2: np.exp(-(q1**2 + q2**2 + p1**2 + p2**2) / width**2),
    )
    assert np.allclose(f.values, pulled_back(0.0), atol=1e-12)
    op = BracketOperator(fx.h0, spec, quantum=False)
    rhs = lambda s: s.with_values(op(s.values))  # noqa: E731
    state = f
    dt = 0.005
    worst = 0.0
    for target in (0.5, 1.0):
        while state.time < target - 1e-9:
            state = step_rk4(rhs, state, dt)
        exact = pulled_back(state.time)
        rel = np.linalg.norm(state.values - exact) / np.linalg.norm(exact)
        worst = max(worst, rel)
        assert rel <= 1e-4, (target, rel)
    report(11, "Liouville-evolved causal state matches the static pullback",
           f"worst relative L2 {worst:.2e} at t in (0.5, 1.0) on 28^4 spectral")


def test_criterion_12_observable_sector(fx):
    base = fx.base_space
    for name in ("q1", "p1", "p2"):
        diff = observable_time_derivative(fx, Symbol.coordinate(base, name))
        assert diff.is_zero(), name
    report(12, "observable-sector corrections vanish for q1/p1/p2",
           "q2 bracket difference is also exactly 0; see the xfail note")


@pytest.mark.xfail(
    strict=True,
    reason=(
        "criterion 12 literal detail: expects a nonzero hbar^2 multiple for q2. "
        "For this system the classical and quantum histories are the same "
        "polynomials, so q2(t,A,B) solves both flow equations and "
        "[q2_hist, H0]_M - {q2_hist, H0} == 0 identically (machine-verified; "
        "each candidate hbar^2 pairing hits an absent A2/phi derivative).  The "
        "quantum signature of q2 lives in its stargenfunction (criterion 6), "
        "not in the observable symbol's bracket difference."
    ),
)
def test_criterion_12_literal_q2_nonzero(fx):
    diff = observable_time_derivative(fx, Symbol.coordinate(fx.base_space, "q2"))
    assert not diff.is_zero()
