"""Closed distributional calculus for stargenfunctions.

Objects are finite sums of terms

    poly * exp((i/hbar) * phase) * prod_l delta^(k_l)(arg_l)

with ``poly`` an arbitrary Symbol and ``phase``/``arg`` hbar-free Symbols.
The class is closed under star products against polynomials (terminating
bidifferential series), under star multiplication by exponentials of
coordinate-linear phases (exact shift identity), under coordinate
substitution, and under the standard distributional rewrite rules
(x^m delta^(k)(x) reduction, delta scaling, Fourier orthogonality), which
drive everything to a canonical form with decidable equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping, Sequence

from .errors import (
    CanonicalizationError,
    ClassicalityError,
    ConjugacyError,
    PhaseStarError,
    SpaceMismatchError,
)
from .moyal import _compositions, _full_multi, _ihalf_power, star_exp_classical_check
from .parametrized import (
    CONSTRAINT_COORD,
    ExtendedSystem,
    causal_map,
    history_symbol,
)
from .symbols import GAUSS_I, Gauss, PhaseSpace, Symbol, multinomial_factor

PI_NAME = "pi"
_MAX_SWEEPS = 48


@dataclass(frozen=True)
class DeltaFactor:
    """delta^(order) of a polynomial argument."""

    arg: Symbol
    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("delta derivative order must be non-negative")
        if self.arg.has_negative_hbar() or self.arg.hbar_powers() not in ((), (0,)):
            raise ValueError("delta arguments must be hbar-free")


@dataclass(frozen=True)
class DeltaTerm:
    """One summand: poly * exp((i/hbar) phase) * deltas."""

    poly: Symbol
    phase: Symbol
    deltas: tuple[DeltaFactor, ...]

    def __post_init__(self):
        if self.phase.has_negative_hbar() or self.phase.hbar_powers() not in ((), (0,)):
            raise ValueError("phases carry exactly one power of 1/hbar; no hbar inside")
        for d in self.deltas:
            if d.arg.space != self.poly.space or self.phase.space != self.poly.space:
                raise SpaceMismatchError("term pieces live on different spaces")

    def key(self):
        return (
            tuple((d.arg.sort_key(), d.order) for d in self.deltas),
            self.phase.sort_key(),
        )


def _pivot_of(arg: Symbol, used: set[str]) -> str | None:
    """First coordinate x with arg = c*x + r, c an invertible coordinate-free monomial."""
    space = arg.space
    for name in space.coords:
        if name in used:
            continue
        try:
            c, _ = arg.coefficient_of_coordinate(name)
        except ValueError:
            continue
        if c.is_zero() or not c.is_coordinate_free() or len(c.terms) != 1:
            continue
        return name
    return None


def _leading_parts(sym: Symbol) -> tuple[tuple[int, ...], Symbol]:
    """Leading coordinate-exponent vector and its coordinate-free coefficient."""
    key, coeff = max(sym.terms.items(), key=lambda item: (sum(item[0][0]),) + item[0])
    exps, h, params = key
    zero = (0,) * sym.space.dim
    return exps, Symbol(sym.space, {(zero, h, params): coeff})


def _proportional(u: Symbol, v: Symbol) -> bool:
    """True when u = lambda v for a coefficient-ring scalar lambda."""
    if u.is_zero() or v.is_zero():
        return True
    eu, cu = _leading_parts(u)
    ev, cv = _leading_parts(v)
    if eu != ev:
        return False
    return u * cv == v * cu


def _normalize_delta(arg: Symbol, order: int) -> tuple[Symbol, int, Fraction]:
    """Scale out a rational leading coefficient: delta^k(a u) -> factor * delta^k(u)."""
    if arg.is_zero():
        raise CanonicalizationError("delta of the zero symbol")
    key, coeff = max(arg.terms.items(), key=lambda item: (sum(item[0][0]),) + item[0])
    _, h, params = key
    if h != 0 or params or coeff.im_num != 0:
        return arg, order, Fraction(1)
    alpha = Fraction(coeff.re_num, coeff.den)
    if alpha == 1:
        return arg, order, Fraction(1)
    # delta^(k)(alpha u) = sign(alpha)^k |alpha|^(-k-1) delta^(k)(u)
    sign = 1 if alpha > 0 else -1
    factor = Fraction(sign ** order, 1) / (abs(alpha) ** (order + 1))
    new_arg = arg * Fraction(1, 1) * (Fraction(1) / alpha)
    return new_arg, order, factor


class DeltaSymbol:
    """Canonical finite sum of delta terms over one phase space."""

    __slots__ = ("space", "terms")

    def __init__(self, space: PhaseSpace, terms: Iterable[DeltaTerm] = (), canonical: bool = False):
        self.space = space
        term_list = list(terms)
        for t in term_list:
            if t.poly.space != space:
                raise SpaceMismatchError("term is not over the stated space")
        if canonical:
            self.terms = tuple(term_list)
        else:
            self.terms = tuple(_canonicalize(space, term_list))

    # ------------------------------------------------------------- constructors
    @classmethod
    def zero(cls, space: PhaseSpace) -> "DeltaSymbol":
        return cls(space, (), canonical=True)

    @classmethod
    def from_polynomial(cls, poly: Symbol) -> "DeltaSymbol":
        return cls(poly.space, [DeltaTerm(poly, Symbol.zero(poly.space), ())])

    @classmethod
    def delta(cls, arg: Symbol, order: int = 0) -> "DeltaSymbol":
        space = arg.space
        return cls(
            space,
            [DeltaTerm(Symbol.one(space), Symbol.zero(space), (DeltaFactor(arg, order),))],
        )

    @classmethod
    def phase_exp(cls, phase: Symbol) -> "DeltaSymbol":
        """exp((i/hbar) * phase) with no delta content."""
        space = phase.space
        return cls(space, [DeltaTerm(Symbol.one(space), phase, ())])

    # ------------------------------------------------------------- predicates
    def is_zero(self) -> bool:
        return not self.terms

    def has_negative_hbar(self) -> bool:
        return any(t.poly.has_negative_hbar() for t in self.terms)

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other: "DeltaSymbol") -> "DeltaSymbol":
        if self.space != other.space:
            raise SpaceMismatchError("delta symbols live on different spaces")
        return DeltaSymbol(self.space, list(self.terms) + list(other.terms))

    def __sub__(self, other: "DeltaSymbol") -> "DeltaSymbol":
        return self + (-other)

    def __neg__(self) -> "DeltaSymbol":
        return self.scale(Symbol.constant(self.space, -1))

    def scale(self, factor) -> "DeltaSymbol":
        if isinstance(factor, (int, Fraction, Gauss)):
            factor = Symbol.constant(self.space, factor)
        return DeltaSymbol(
            self.space,
            [DeltaTerm(t.poly * factor, t.phase, t.deltas) for t in self.terms],
        )

    def __eq__(self, other):
        return (
            isinstance(other, DeltaSymbol)
            and self.space == other.space
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.space, self.terms))

    # ------------------------------------------------------------- calculus
    def derivative(self, coord: str) -> "DeltaSymbol":
        return DeltaSymbol(self.space, _derive_terms(list(self.terms), self.space, coord))

    def substitute(self, bindings: Mapping[str, Symbol]) -> "DeltaSymbol":
        """Exact composition of every piece with a polynomial coordinate map."""
        if not bindings:
            return self
        target = next(iter(bindings.values())).space
        ident = {
            name: Symbol.coordinate(target, name) if name not in bindings else bindings[name]
            for name in self.space.coords
        }
        out = []
        for t in self.terms:
            out.append(
                DeltaTerm(
                    t.poly.substitute(ident),
                    t.phase.substitute(ident),
                    tuple(DeltaFactor(d.arg.substitute(ident), d.order) for d in t.deltas),
                )
            )
        return DeltaSymbol(target, out)

    def __repr__(self):
        return f"<DeltaSymbol {delta_text_form(self)!r}>"

    def __str__(self):
        return delta_text_form(self)


def delta_text_form(ds: DeltaSymbol) -> str:
    """Canonical text: `poly * exp((i/hbar)*(...)) * delta^k(...) ...` per term."""
    if not ds.terms:
        return "0"
    rendered = []
    for t in ds.terms:
        parts = []
        if t.poly != Symbol.one(ds.space) or (t.phase.is_zero() and not t.deltas):
            parts.append(f"({t.poly})")
        if not t.phase.is_zero():
            parts.append(f"exp((i/hbar)*({t.phase}))")
        for d in t.deltas:
            if d.order == 0:
                parts.append(f"delta({d.arg})")
            else:
                parts.append(f"delta^{d.order}({d.arg})")
        rendered.append(" * ".join(parts))
    return "\n + ".join(rendered)


# --------------------------------------------------------------- canonical form


def _canonicalize(space: PhaseSpace, raw_terms: list[DeltaTerm]) -> list[DeltaTerm]:
    worklist = list(raw_terms)
    finished: list[DeltaTerm] = []
    sweeps = 0
    while worklist:
        sweeps += 1
        if sweeps > _MAX_SWEEPS * (1 + len(raw_terms)):
            raise CanonicalizationError("rewrite rules did not reach a fixed point")
        term = worklist.pop()
        if term.poly.is_zero():
            continue
        # scale-normalize and sort the delta factors
        poly = term.poly
        deltas = []
        drop_term = False
        for d in term.deltas:
            arg, order, factor = _normalize_delta(d.arg, d.order)
            if factor != 1:
                poly = poly * factor
            if arg.is_coordinate_free() and not arg.params_present():
                value = arg.constant_value()
                if value.is_zero():
                    raise CanonicalizationError("delta of an identically zero argument")
                drop_term = True  # delta of a nonzero constant
                break
            deltas.append(DeltaFactor(arg, order))
        if drop_term:
            continue
        for a in range(len(deltas)):
            for b in range(a + 1, len(deltas)):
                if _proportional(deltas[a].arg, deltas[b].arg):
                    raise CanonicalizationError(
                        "delta arguments must be pairwise linearly independent"
                    )
        deltas.sort(key=lambda d: (d.arg.sort_key(), d.order))
        # pivot reduction: remove pivot-coordinate dependence from poly and phase
        used: set[str] = set()
        pivots: list[str | None] = []
        for d in deltas:
            p = _pivot_of(d.arg, used)
            pivots.append(p)
            if p is not None:
                used.add(p)
        reduced = False
        for idx, d in enumerate(deltas):
            x = pivots[idx]
            if x is None:
                continue
            if x not in poly.coordinates_present() and x not in term.phase.coordinates_present():
                continue
            pieces = _reduce_against_delta(poly, term.phase, deltas, idx, x)
            worklist.extend(pieces)
            reduced = True
            break
        if reduced:
            continue
        finished.append(DeltaTerm(poly, term.phase, tuple(deltas)))
    # merge identical (phase, deltas) shells
    merged: dict = {}
    for t in finished:
        key = t.key()
        if key in merged:
            merged[key] = DeltaTerm(merged[key].poly + t.poly, t.phase, t.deltas)
        else:
            merged[key] = t
    out = [t for t in merged.values() if not t.poly.is_zero()]
    out.sort(key=lambda t: t.key())
    return out


def _reduce_against_delta(
    poly: Symbol, phase: Symbol, deltas: list[DeltaFactor], idx: int, x: str
) -> list[DeltaTerm]:
    """Rewrite F(x) delta^(k)(c x + r) via the standard pairing identity.

    F delta^(k)(u) = sum_j C(k,j) (-1)^(k-j) c^(j-k) [d_x^(k-j) F]|_{x=-r/c}
    delta^(j)(u), where the x-derivative also acts on the (i/hbar) phase.
    """
    space = poly.space
    d = deltas[idx]
    c, r = d.arg.coefficient_of_coordinate(x)
    c_inv = c.monomial_inverse()
    x_solution = -(r * c_inv)
    bindings = {
        name: (x_solution if name == x else Symbol.coordinate(space, name))
        for name in space.coords
    }
    ihbar_inv = Symbol.imag_unit(space).scale_hbar(-1)
    k = d.order
    pieces = []
    f_m = poly  # d_x^m applied to poly * exp((i/hbar) phase), exponential stripped
    phase_dx = phase.partial(x)
    for m in range(0, k + 1):
        j = k - m
        if m > 0:
            f_m = f_m.partial(x) + f_m * phase_dx * ihbar_inv
        if f_m.is_zero():
            continue
        coeff = Fraction(comb(k, j) * (-1) ** m)
        new_poly = (f_m * coeff * c_inv ** m).substitute(bindings)
        if new_poly.is_zero():
            continue
        new_phase = phase.substitute(bindings)
        new_deltas = tuple(
            DeltaFactor(dd.arg, j) if n == idx else dd for n, dd in enumerate(deltas)
        )
        pieces.append(DeltaTerm(new_poly, new_phase, new_deltas))
    return pieces


# --------------------------------------------------------------- derivatives


def _derive_terms(terms: list[DeltaTerm], space: PhaseSpace, coord: str) -> list[DeltaTerm]:
    ihbar_inv = Symbol.imag_unit(space).scale_hbar(-1)
    out = []
    for t in terms:
        dp = t.poly.partial(coord)
        if not dp.is_zero():
            out.append(DeltaTerm(dp, t.phase, t.deltas))
        dphase = t.phase.partial(coord)
        if not dphase.is_zero():
            out.append(DeltaTerm(t.poly * dphase * ihbar_inv, t.phase, t.deltas))
        for idx, d in enumerate(t.deltas):
            darg = d.arg.partial(coord)
            if darg.is_zero():
                continue
            lifted = tuple(
                DeltaFactor(dd.arg, dd.order + 1) if n == idx else dd
                for n, dd in enumerate(t.deltas)
            )
            out.append(DeltaTerm(t.poly * darg, t.phase, lifted))
    return out


# --------------------------------------------------------------- star products


def star_poly_left(p: Symbol, ds: DeltaSymbol, max_order: int | None = None) -> DeltaSymbol:
    """p * ds with the terminating bidifferential series (left star).

    Derivatives act on the polynomial prefactor, bring down (i/hbar) phase
    gradients, and raise delta orders; the series terminates at deg(p).
    """
    return _star_poly(p, ds, left=True, max_order=max_order)


def star_poly_right(ds: DeltaSymbol, p: Symbol, max_order: int | None = None) -> DeltaSymbol:
    """ds * p, the mirrored series (opposite sign on odd orders)."""
    return _star_poly(p, ds, left=False, max_order=max_order)


def _star_poly(p: Symbol, ds: DeltaSymbol, left: bool, max_order: int | None) -> DeltaSymbol:
    if p.space != ds.space:
        raise SpaceMismatchError("polynomial and delta symbol live on different spaces")
    space = p.space
    deg = p.total_degree()
    if deg < 0 or ds.is_zero():
        return DeltaSymbol.zero(space)
    nmax = deg if max_order is None else min(deg, max_order)
    caps = p.max_exponents()
    pos_caps = tuple(caps[a] for a, _ in space.pairing)
    mom_caps = tuple(caps[b] for _, b in space.pairing)
    zeros = (0,) * space.npairs

    deriv_cache: dict[tuple[int, ...], list[DeltaTerm]] = {(0,) * space.dim: list(ds.terms)}

    def derived(multi: tuple[int, ...]) -> list[DeltaTerm]:
        cached = deriv_cache.get(multi)
        if cached is not None:
            return cached
        j = next(i for i, e in enumerate(multi) if e)
        lower = tuple(e - 1 if i == j else e for i, e in enumerate(multi))
        result = _derive_terms(derived(lower), space, space.coords[j])
        deriv_cache[multi] = result
        return result

    out_terms: list[DeltaTerm] = []
    for order in range(0, nmax + 1):
        base = _ihalf_power(order)
        for m_total in range(0, order + 1):
            n_total = order - m_total
            for m in _compositions(m_total, pos_caps):
                for n in _compositions(n_total, mom_caps):
                    dp = p.derive_multi(_full_multi(space, m, n))
                    if dp.is_zero():
                        continue
                    ds_multi = _full_multi(space, n, m)
                    sign = (-1) ** (n_total if left else m_total)
                    dterms = derived(ds_multi)
                    if not dterms:
                        continue
                    coeff = base.scale(sign, multinomial_factor(m) * multinomial_factor(n))
                    scale = Symbol(space, {((0,) * space.dim, order, ()): coeff})
                    factor = dp * scale
                    for t in dterms:
                        out_terms.append(DeltaTerm(t.poly * factor, t.phase, t.deltas))
    return DeltaSymbol(space, out_terms)


def moyal_bracket_poly(p: Symbol, ds: DeltaSymbol) -> DeltaSymbol:
    """[p, ds]_M = (p*ds - ds*p)/(i hbar) within the distributional class."""
    minus_i_over_hbar = Symbol.constant(p.space, Gauss(0, -1)).scale_hbar(-1)
    diff = star_poly_left(p, ds) - star_poly_right(ds, p)
    return diff.scale(minus_i_over_hbar)


def poisson_poly(p: Symbol, ds: DeltaSymbol) -> DeltaSymbol:
    """{p, ds} with formal chain rule on phases and delta arguments."""
    space = p.space
    out = DeltaSymbol.zero(space)
    for a_idx, b_idx in space.pairing:
        qn, pn = space.coords[a_idx], space.coords[b_idx]
        dq_p = p.partial(qn)
        dp_p = p.partial(pn)
        if not dq_p.is_zero():
            out = out + ds.derivative(pn).scale(dq_p)
        if not dp_p.is_zero():
            out = out - ds.derivative(qn).scale(dp_p)
    return out


# --------------------------------------------------------- exponential shifts


def _linear_phase_coefficients(form: Symbol) -> dict[str, Symbol]:
    decomp = form.coordinate_linear_form()
    if decomp is None:
        raise ConjugacyError("phase form is not linear in the coordinates")
    coeffs, _rest = decomp
    for name, c in coeffs.items():
        if not c.is_coordinate_free():
            raise ConjugacyError(f"phase coefficient of {name!r} depends on coordinates")
    return coeffs


def star_exp_linear_left(phase_form: Symbol, ds: DeltaSymbol) -> DeltaSymbol:
    """exp((i/hbar) phase_form) * ds, exactly, for coordinate-linear forms.

    Star multiplication by such an exponential is the canonical shift
    x_j -> x_j - (1/2) c_i J^{ij}; this closed form reproduces the
    order-by-order hbar cancellation of the bidifferential series.
    """
    space = ds.space
    if phase_form.space != space:
        raise SpaceMismatchError("phase form and delta symbol live on different spaces")
    if phase_form.hbar_powers() not in ((), (0,)):
        raise ConjugacyError("phase forms must be hbar-free")
    coeffs = _linear_phase_coefficients(phase_form)
    shift: dict[str, Symbol] = {}
    half = Fraction(1, 2)
    for name, c in coeffs.items():
        k = space.index(name)
        partner = space.partner_index(k)
        # J^{k, partner} = +1 when k is a position, -1 when a momentum
        jsign = space.canonical_sign(k)
        pname = space.coords[partner]
        shift[pname] = shift.get(pname, Symbol.zero(space)) - c * Fraction(jsign) * half
    bindings = {
        name: Symbol.coordinate(space, name) + shift[name]
        if name in shift
        else Symbol.coordinate(space, name)
        for name in space.coords
    }
    shifted = ds.substitute(bindings)
    phased = DeltaSymbol(
        space,
        [DeltaTerm(t.poly, t.phase + phase_form, t.deltas) for t in shifted.terms],
    )
    return phased


def exp_shift_star_delta(
    beta: Sequence[Symbol],
    b_forms: Sequence[Symbol],
    a_forms: Sequence[Symbol],
    b_values: Sequence[Symbol],
) -> DeltaSymbol:
    """Chained exp((i/hbar) beta_j B_j) * delta(A_j - b_j) products.

    Executes the hbar-power/phase cancellation exactly via the shift
    identity; validates that the provided forms are conjugate enough for
    the chain to stay within the closed class and asserts no residual
    negative hbar powers.
    """
    n = len(beta)
    if not (len(b_forms) == len(a_forms) == len(b_values) == n):
        raise ValueError("beta, forms and values must have equal lengths")
    if n == 0:
        raise ValueError("at least one conjugate pair is required")
    space = b_forms[0].space
    for sym in list(b_forms) + list(a_forms):
        if sym.space != space:
            raise SpaceMismatchError("all forms must share one space")
    for coeff in beta:
        if not coeff.is_coordinate_free():
            raise ConjugacyError("shift coefficients must be coordinate-free")
    result = DeltaSymbol.from_polynomial(Symbol.one(space))
    for j in reversed(range(n)):
        delta_j = a_forms[j] - b_values[j]
        _require_disjoint_partner_support(delta_j, result)
        result = DeltaSymbol(
            space,
            [
                DeltaTerm(t.poly, t.phase, (DeltaFactor(delta_j, 0),) + t.deltas)
                for t in result.terms
            ],
        )
        result = star_exp_linear_left(beta[j] * b_forms[j], result)
    if result.has_negative_hbar():
        raise ConjugacyError("residual negative hbar powers: forms are not conjugate")
    return result


def _require_disjoint_partner_support(arg: Symbol, ds: DeltaSymbol):
    """Left star by delta(arg) collapses to a product only if the canonical
    partners of arg's coordinates are absent from the existing factor."""
    space = arg.space
    partners = {
        space.coords[space.partner_index(space.index(name))]
        for name in arg.coordinates_present()
    }
    present: set[str] = set()
    for t in ds.terms:
        present |= t.poly.coordinates_present()
        present |= t.phase.coordinates_present()
        for d in t.deltas:
            present |= d.arg.coordinates_present()
    overlap = partners & present
    if overlap:
        raise ConjugacyError(
            f"delta factor does not star-commute past existing factors: {sorted(overlap)}"
        )


# --------------------------------------------------------- stargenfunctions


def _as_values(space: PhaseSpace, values, prefix: str, count: int) -> list[Symbol]:
    if values is None:
        return [Symbol.parameter(space, f"{prefix}{j + 1}") for j in range(count)]
    out = []
    for v in values:
        if isinstance(v, Symbol):
            out.append(v)
        else:
            out.append(Symbol.constant(space, v))
    if len(out) != count:
        raise ValueError(f"expected {count} values for {prefix!r}")
    return out


def build_stargenfunction(
    sys: ExtendedSystem,
    a_values=None,
    b_values=None,
    representation: str = "history",
) -> DeltaSymbol:
    """Fundamental constraint stargenfunction rho_{a,b}.

    In the history representation this is
    delta(phi) exp((i/hbar)(b-a).B) delta(A - (a+b)/2); the causal
    representation is the same object composed with the coordinate change,
    living on the extended space.
    """
    if representation not in ("history", "causal"):
        raise ValueError(f"unsupported representation {representation!r}")
    space = sys.history_space
    n = sys.base_space.npairs
    a_syms = _as_values(space, a_values, "a", n)
    b_syms = _as_values(space, b_values, "b", n)
    beta = [b_syms[j] - a_syms[j] for j in range(n)]
    a_forms = [Symbol.coordinate(space, f"A{j + 1}") for j in range(n)]
    b_forms = [Symbol.coordinate(space, f"B{j + 1}") for j in range(n)]
    core = exp_shift_star_delta(beta, b_forms, a_forms, b_syms)
    phi = Symbol.coordinate(space, CONSTRAINT_COORD)
    _require_disjoint_partner_support(phi, core)
    rho = DeltaSymbol(
        space,
        [DeltaTerm(t.poly, t.phase, (DeltaFactor(phi, 0),) + t.deltas) for t in core.terms],
    )
    if representation == "causal":
        return rho.substitute(dict(causal_map(sys).forward))
    return rho


def verify_stargen(
    rho: DeltaSymbol, operator: Symbol, left_value, right_value
) -> tuple[DeltaSymbol, DeltaSymbol]:
    """Residuals of the left/right stargenvalue equations.

    Both residuals canonicalize to zero for genuine stargenfunctions; a
    nonzero residual is returned as data, not raised.
    """
    space = rho.space
    if not isinstance(left_value, Symbol):
        left_value = Symbol.constant(space, left_value)
    if not isinstance(right_value, Symbol):
        right_value = Symbol.constant(space, right_value)
    left = star_poly_left(operator, rho) - rho.scale(left_value)
    right = star_poly_right(rho, operator) - rho.scale(right_value)
    return left, right


def marginalize_degeneracy(rho: DeltaSymbol, labels: Sequence[str]) -> DeltaSymbol:
    """Integrate out label parameters or coordinates.

    Rewrite rules: a plain delta affine in the label absorbs the integral
    (substituting the root elsewhere); a coordinate occurring only linearly
    in the phase integrates to 2 pi hbar delta(coefficient).  Any other
    occurrence pattern raises.
    """
    out = rho
    for label in labels:
        out = _integrate_label(out, label)
    return out


def _integrate_label(rho: DeltaSymbol, label: str) -> DeltaSymbol:
    space = rho.space
    is_coord = label in space
    new_terms: list[DeltaTerm] = []
    for t in rho.terms:
        if is_coord:
            new_terms.extend(_integrate_coordinate(space, t, label))
        else:
            new_terms.extend(_integrate_parameter(space, t, label))
    return DeltaSymbol(space, new_terms)


def _occurs_in(sym: Symbol, label: str, is_coord: bool) -> bool:
    return label in (sym.coordinates_present() if is_coord else sym.params_present())


def _integrate_coordinate(space, t: DeltaTerm, x: str) -> list[DeltaTerm]:
    hosts = [idx for idx, d in enumerate(t.deltas) if _occurs_in(d.arg, x, True)]
    if len(hosts) == 1:
        idx = hosts[0]
        d = t.deltas[idx]
        try:
            c, r = d.arg.coefficient_of_coordinate(x)
        except ValueError:
            raise PhaseStarError(f"{x!r} occurs non-affinely in a delta argument") from None
        if c.is_zero() or not c.is_coordinate_free():
            raise PhaseStarError(f"{x!r} has a coordinate-dependent delta coefficient")
        try:
            alpha = c.constant_value()
        except ValueError:
            raise PhaseStarError(
                f"{x!r} carries a non-rational delta scale; sign is undetermined"
            ) from None
        if alpha.im_num != 0:
            raise PhaseStarError("imaginary delta scale is not integrable")
        c_inv = c.monomial_inverse()
        x_solution = -(r * c_inv)
        bindings = {
            name: (x_solution if name == x else Symbol.coordinate(space, name))
            for name in space.coords
        }
        ihbar_inv = Symbol.imag_unit(space).scale_hbar(-1)
        # int dx F(x) delta^(k)(c x + r) = |c|^-1 (-1/c)^k [d_x^k F]|_{x=-r/c}
        f = t.poly
        phase_dx = t.phase.partial(x)
        for _ in range(d.order):
            f = f.partial(x) + f * phase_dx * ihbar_inv
        scale = Fraction((-1) ** d.order) * Fraction(1, 1) / abs(Fraction(alpha.re_num, alpha.den))
        poly = (f * scale * c_inv ** d.order).substitute(bindings)
        phase = t.phase.substitute(bindings)
        deltas = tuple(
            DeltaFactor(dd.arg.substitute(bindings), dd.order)
            for n, dd in enumerate(t.deltas)
            if n != idx
        )
        return [DeltaTerm(poly, phase, deltas)] if not poly.is_zero() else []
    if hosts:
        raise PhaseStarError(f"{x!r} occurs in several delta arguments")
    if _occurs_in(t.poly, x, True):
        raise PhaseStarError(f"{x!r} occurs polynomially outside any delta")
    if _occurs_in(t.phase, x, True):
        w, rest = t.phase.coefficient_of_coordinate(x)
        if not w.is_coordinate_free():
            raise PhaseStarError(f"{x!r} has a coordinate-dependent phase coefficient")
        two_pi_hbar = (Symbol.parameter(space, PI_NAME) * 2).scale_hbar(1)
        return [
            DeltaTerm(t.poly * two_pi_hbar, rest, t.deltas + (DeltaFactor(w, 0),))
        ]
    raise PhaseStarError(f"{x!r} does not occur; the integral diverges")


def _integrate_parameter(space, t: DeltaTerm, s: str) -> list[DeltaTerm]:
    hosts = [idx for idx, d in enumerate(t.deltas) if _occurs_in(d.arg, s, False)]
    if len(hosts) != 1:
        raise PhaseStarError(f"label {s!r} must occur in exactly one delta argument")
    idx = hosts[0]
    d = t.deltas[idx]
    if d.order != 0:
        raise PhaseStarError("label integration through derivative deltas is out of scope")
    c_terms = {}
    r_terms = {}
    for (exps, h, params), coeff in d.arg.terms.items():
        pd = dict(params)
        e = pd.pop(s, 0)
        if e == 0:
            r_terms[(exps, h, params)] = coeff
        elif e == 1:
            c_terms[(exps, h, tuple(sorted(pd.items())))] = coeff
        else:
            raise PhaseStarError(f"label {s!r} occurs non-affinely in a delta argument")
    c = Symbol(space, c_terms)
    r = Symbol(space, r_terms)
    if c.is_zero() or len(c.terms) != 1:
        raise PhaseStarError(f"label {s!r} has a non-invertible delta coefficient")
    try:
        alpha = c.constant_value()
    except ValueError:
        alpha = None
    if alpha is None or alpha.im_num != 0:
        raise PhaseStarError(f"label {s!r} must carry a rational delta coefficient")
    solution = -(r * c.monomial_inverse())
    subs = {s: solution}
    scale = Fraction(1, 1) / abs(Fraction(alpha.re_num, alpha.den))
    poly = t.poly.subs_params(subs) * scale
    phase = t.phase.subs_params(subs)
    deltas = tuple(
        DeltaFactor(dd.arg.subs_params(subs), dd.order)
        for n, dd in enumerate(t.deltas)
        if n != idx
    )
    return [DeltaTerm(poly, phase, deltas)] if not poly.is_zero() else []


def observable_stargenfunction(
    sys: ExtendedSystem, z: str, z0=None, representation: str = "history"
) -> DeltaSymbol:
    """delta(z(t, A, B) - z0) for observables whose star exponential collapses.

    Raises :class:`ClassicalityError` when the closure check fails (the
    collapse of the star exponential does not apply, and series methods are
    out of scope).
    """
    if representation not in ("history", "causal"):
        raise ValueError(f"unsupported representation {representation!r}")
    z_sym = Symbol.coordinate(sys.base_space, z)
    z_hist = history_symbol(sys, z_sym)
    if not star_exp_classical_check(z_hist, max_n=4):
        raise ClassicalityError(
            f"star exponential of the {z!r} history does not collapse; "
            "delta-form stargenfunction unavailable"
        )
    space = sys.history_space
    if z0 is None:
        z0_sym = Symbol.parameter(space, "z0")
    elif isinstance(z0, Symbol):
        z0_sym = z0
    else:
        z0_sym = Symbol.constant(space, z0)
    rho = DeltaSymbol.delta(z_hist - z0_sym)
    if representation == "causal":
        return rho.substitute(dict(causal_map(sys).forward))
    return rho


@dataclass(frozen=True)
class StarChain:
    """Unevaluated chain of star factors, explicitly non-canonical.

    Used for representations whose stargenfunctions do not simplify to the
    delta class; factors are stored in application order and no rewriting
    is attempted.
    """

    factors: tuple[object, ...]
    non_canonical: bool = True

    def __len__(self):
        return len(self.factors)


def schrodinger_stargen_chain(sys: ExtendedSystem, a_values=None, b_values=None) -> StarChain:
    """Constraint stargenfunction in extended coordinates, as a star chain.

    delta(P_t + H0) chained with exp((i/hbar)(b-a) B(t,q,p)) and
    delta(A(t,q,p) - b) factors; stored unevaluated.
    """
    from .parametrized import quantum_histories

    space = sys.extended_space
    n = sys.base_space.npairs
    a_syms = _as_values(space, a_values, "a", n)
    b_syms = _as_values(space, b_values, "b", n)
    hist = quantum_histories(sys)
    factors: list[object] = [DeltaSymbol.delta(sys.constraint)]
    for j in range(n):
        beta = b_syms[j] - a_syms[j]
        factors.append(DeltaSymbol.phase_exp(beta * hist[f"B{j + 1}"]))
        factors.append(DeltaSymbol.delta(hist[f"A{j + 1}"] - b_syms[j]))
    return StarChain(tuple(factors))
