"""Exact polynomial Weyl symbols over a named flat phase space.

A :class:`Symbol` is a multivariate polynomial in the coordinates of a
:class:`PhaseSpace`.  Coefficients are Gaussian rationals times integer
powers of ``hbar`` and of named parameters (masses, coupling constants,
eigenvalue labels); parameter powers may be negative.  All arithmetic is
exact -- there is no floating point anywhere in this module.  Numerics
enter only through :meth:`Symbol.evaluate`.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial, gcd
from typing import Iterable, Mapping

from .errors import (
    ParseError,
    SpaceMismatchError,
    SubstitutionError,
    UnknownCoordinateError,
)

RESERVED_NAMES = ("i", "hbar")


class Gauss:
    """Gaussian rational ``(re_num + im_num*i) / den`` in lowest terms, den > 0."""

    __slots__ = ("re_num", "im_num", "den")

    def __init__(self, re_num=0, im_num=0, den=1):
        if isinstance(re_num, Fraction) or isinstance(im_num, Fraction) or isinstance(den, Fraction):
            re_f = Fraction(re_num)
            im_f = Fraction(im_num)
            dn = Fraction(den)
            re_f, im_f = re_f / dn, im_f / dn
            common = re_f.denominator * im_f.denominator // gcd(re_f.denominator, im_f.denominator)
            re_num = re_f.numerator * (common // re_f.denominator)
            im_num = im_f.numerator * (common // im_f.denominator)
            den = common
        if den == 0:
            raise ZeroDivisionError("Gauss denominator is zero")
        if den < 0:
            re_num, im_num, den = -re_num, -im_num, -den
        g = gcd(gcd(abs(re_num), abs(im_num)), den)
        if g > 1:
            re_num //= g
            im_num //= g
            den //= g
        self.re_num = re_num
        self.im_num = im_num
        self.den = den

    @classmethod
    def _raw(cls, re_num, im_num, den):
        obj = object.__new__(cls)
        if den < 0:
            re_num, im_num, den = -re_num, -im_num, -den
        g = gcd(gcd(abs(re_num), abs(im_num)), den)
        if g > 1:
            re_num //= g
            im_num //= g
            den //= g
        obj.re_num = re_num
        obj.im_num = im_num
        obj.den = den
        return obj

    def is_zero(self):
        return self.re_num == 0 and self.im_num == 0

    def is_real(self):
        return self.im_num == 0

    @property
    def real(self) -> Fraction:
        return Fraction(self.re_num, self.den)

    @property
    def imag(self) -> Fraction:
        return Fraction(self.im_num, self.den)

    def __add__(self, other):
        return Gauss._raw(
            self.re_num * other.den + other.re_num * self.den,
            self.im_num * other.den + other.im_num * self.den,
            self.den * other.den,
        )

    def __sub__(self, other):
        return Gauss._raw(
            self.re_num * other.den - other.re_num * self.den,
            self.im_num * other.den - other.im_num * self.den,
            self.den * other.den,
        )

    def __neg__(self):
        return Gauss._raw(-self.re_num, -self.im_num, self.den)

    def __mul__(self, other):
        return Gauss._raw(
            self.re_num * other.re_num - self.im_num * other.im_num,
            self.re_num * other.im_num + self.im_num * other.re_num,
            self.den * other.den,
        )

    def scale(self, num: int, den: int = 1):
        return Gauss._raw(self.re_num * num, self.im_num * num, self.den * den)

    def reciprocal(self):
        norm = self.re_num * self.re_num + self.im_num * self.im_num
        if norm == 0:
            raise ZeroDivisionError("reciprocal of zero Gaussian rational")
        return Gauss._raw(self.re_num * self.den, -self.im_num * self.den, norm)

    def __truediv__(self, other):
        return self * other.reciprocal()

    def __eq__(self, other):
        return (
            isinstance(other, Gauss)
            and self.re_num == other.re_num
            and self.im_num == other.im_num
            and self.den == other.den
        )

    def __hash__(self):
        return hash((self.re_num, self.im_num, self.den))

    def __complex__(self):
        return complex(self.re_num / self.den, self.im_num / self.den)

    def __repr__(self):
        return f"Gauss({self.re_num}, {self.im_num}, {self.den})"


GAUSS_ZERO = Gauss(0)
GAUSS_ONE = Gauss(1)
GAUSS_I = Gauss(0, 1)
GAUSS_MINUS_I = Gauss(0, -1)


def _as_gauss(value) -> Gauss:
    if isinstance(value, Gauss):
        return value
    if isinstance(value, int):
        return Gauss(value)
    if isinstance(value, Fraction):
        return Gauss(value.numerator, 0, value.denominator)
    raise TypeError(f"cannot interpret {value!r} as an exact coefficient")


class PhaseSpace:
    """Ordered coordinate names plus the canonical symplectic pairing.

    ``pairing`` lists (position_index, momentum_index) pairs; every
    coordinate index appears in exactly one pair, and the induced bracket
    is {q_i, p_j} = delta_ij.
    """

    __slots__ = ("coords", "pairing", "_index", "_partner", "_sign")

    def __init__(self, coords: Iterable[str], pairing: Iterable[tuple[int, int]]):
        self.coords = tuple(coords)
        self.pairing = tuple((int(a), int(b)) for a, b in pairing)
        seen: set[int] = set()
        for a, b in self.pairing:
            seen.update((a, b))
        if seen != set(range(len(self.coords))) or 2 * len(self.pairing) != len(self.coords):
            raise ValueError("every coordinate index must appear in exactly one pair")
        for name in self.coords:
            if name in RESERVED_NAMES:
                raise ValueError(f"coordinate name {name!r} is reserved")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("coordinate names must be unique")
        self._index = {name: k for k, name in enumerate(self.coords)}
        partner = [0] * len(self.coords)
        sign = [0] * len(self.coords)
        for a, b in self.pairing:
            partner[a], partner[b] = b, a
            sign[a], sign[b] = 1, -1  # J^{q p} = +1
        self._partner = tuple(partner)
        self._sign = tuple(sign)

    @classmethod
    def blocked(cls, positions: Iterable[str], momenta: Iterable[str]) -> "PhaseSpace":
        positions = tuple(positions)
        momenta = tuple(momenta)
        if len(positions) != len(momenta):
            raise ValueError("positions and momenta must pair up")
        n = len(positions)
        return cls(positions + momenta, [(k, n + k) for k in range(n)])

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def npairs(self) -> int:
        return len(self.pairing)

    @property
    def position_indices(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.pairing)

    @property
    def momentum_indices(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.pairing)

    @property
    def positions(self) -> tuple[str, ...]:
        return tuple(self.coords[a] for a, _ in self.pairing)

    @property
    def momenta(self) -> tuple[str, ...]:
        return tuple(self.coords[b] for _, b in self.pairing)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownCoordinateError(f"{name!r} is not a coordinate of {self}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def partner_index(self, k: int) -> int:
        return self._partner[k]

    def canonical_sign(self, k: int) -> int:
        """+1 if coordinate k is a position, -1 if a momentum."""
        return self._sign[k]

    def __eq__(self, other):
        return (
            isinstance(other, PhaseSpace)
            and self.coords == other.coords
            and self.pairing == other.pairing
        )

    def __hash__(self):
        return hash((self.coords, self.pairing))

    def __repr__(self):
        return f"PhaseSpace({', '.join(self.coords)})"


# A term key is (coord_exponents, hbar_power, params) with params a sorted
# tuple of (name, exponent); coordinate exponents are >= 0, hbar/param
# exponents may be negative.
TermKey = tuple[tuple[int, ...], int, tuple[tuple[str, int], ...]]


def _merge_params(a: tuple[tuple[str, int], ...], b: tuple[tuple[str, int], ...]):
    if not a:
        return b
    if not b:
        return a
    d = dict(a)
    for name, e in b:
        ne = d.get(name, 0) + e
        if ne:
            d[name] = ne
        else:
            del d[name]
    return tuple(sorted(d.items()))


class Symbol:
    """Exact polynomial symbol over a :class:`PhaseSpace`.

    Immutable value semantics: all operations return new symbols, and two
    symbols are equal iff their canonical term maps are identical.
    """

    __slots__ = ("space", "terms")

    def __init__(self, space: PhaseSpace, terms: Mapping[TermKey, Gauss] | None = None):
        self.space = space
        self.terms = {k: c for k, c in (terms or {}).items() if not c.is_zero()}

    # ---------------------------------------------------------------- constructors
    @classmethod
    def zero(cls, space: PhaseSpace) -> "Symbol":
        return cls(space)

    @classmethod
    def constant(cls, space: PhaseSpace, value) -> "Symbol":
        c = _as_gauss(value)
        zero = (0,) * space.dim
        return cls(space, {(zero, 0, ()): c})

    @classmethod
    def one(cls, space: PhaseSpace) -> "Symbol":
        return cls.constant(space, 1)

    @classmethod
    def imag_unit(cls, space: PhaseSpace) -> "Symbol":
        return cls.constant(space, GAUSS_I)

    @classmethod
    def coordinate(cls, space: PhaseSpace, name: str, power: int = 1) -> "Symbol":
        k = space.index(name)
        if power < 0:
            raise ValueError("coordinate powers must be non-negative")
        exps = tuple(power if j == k else 0 for j in range(space.dim))
        return cls(space, {(exps, 0, ()): GAUSS_ONE})

    @classmethod
    def hbar(cls, space: PhaseSpace, power: int = 1) -> "Symbol":
        zero = (0,) * space.dim
        return cls(space, {(zero, power, ()): GAUSS_ONE})

    @classmethod
    def parameter(cls, space: PhaseSpace, name: str, power: int = 1) -> "Symbol":
        if name in space or name in RESERVED_NAMES:
            raise ValueError(f"{name!r} cannot be used as a parameter name")
        zero = (0,) * space.dim
        return cls(space, {(zero, 0, ((name, power),)): GAUSS_ONE})

    # ---------------------------------------------------------------- predicates
    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        """Total coordinate degree; -1 is the sentinel for the zero symbol."""
        if not self.terms:
            return -1
        return max(sum(exps) for exps, _, _ in self.terms)

    def max_exponents(self) -> tuple[int, ...]:
        caps = [0] * self.space.dim
        for exps, _, _ in self.terms:
            for j, e in enumerate(exps):
                if e > caps[j]:
                    caps[j] = e
        return tuple(caps)

    def coordinates_present(self) -> set[str]:
        out: set[str] = set()
        for exps, _, _ in self.terms:
            for j, e in enumerate(exps):
                if e:
                    out.add(self.space.coords[j])
        return out

    def params_present(self) -> set[str]:
        out: set[str] = set()
        for _, _, params in self.terms:
            out.update(name for name, _ in params)
        return out

    def is_coordinate_free(self) -> bool:
        return all(not any(exps) for exps, _, _ in self.terms)

    def min_hbar_power(self) -> int:
        if not self.terms:
            return 0
        return min(h for _, h, _ in self.terms)

    def has_negative_hbar(self) -> bool:
        return any(h < 0 for _, h, _ in self.terms)

    def hbar_component(self, power: int) -> "Symbol":
        """The coefficient of hbar**power, returned with the hbar factor removed."""
        return Symbol(
            self.space,
            {(exps, 0, params): c for (exps, h, params), c in self.terms.items() if h == power},
        )

    def hbar_powers(self) -> tuple[int, ...]:
        return tuple(sorted({h for _, h, _ in self.terms}))

    def constant_value(self) -> Gauss:
        """The value of a constant (coordinate-, hbar- and parameter-free) symbol."""
        if not self.terms:
            return GAUSS_ZERO
        ((exps, h, params), c), = self.terms.items()  # noqa: E501 -- must be a single term
        if any(exps) or h or params:
            raise ValueError("symbol is not a pure rational constant")
        return c

    # ---------------------------------------------------------------- arithmetic
    def _check_space(self, other: "Symbol"):
        if self.space != other.space:
            raise SpaceMismatchError(f"{self.space} vs {other.space}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction, Gauss)):
            other = Symbol.constant(self.space, other)
        self._check_space(other)
        terms = dict(self.terms)
        for key, c in other.terms.items():
            acc = terms.get(key)
            if acc is None:
                terms[key] = c
            else:
                s = acc + c
                if s.is_zero():
                    del terms[key]
                else:
                    terms[key] = s
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = terms
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = {k: -c for k, c in self.terms.items()}
        return out

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, Gauss)):
            other = Symbol.constant(self.space, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Gauss)):
            g = _as_gauss(other)
            if g.is_zero():
                return Symbol.zero(self.space)
            out = Symbol.__new__(Symbol)
            out.space = self.space
            out.terms = {k: c * g for k, c in self.terms.items()}
            return out
        self._check_space(other)
        terms: dict[TermKey, Gauss] = {}
        for (e1, h1, p1), c1 in self.terms.items():
            for (e2, h2, p2), c2 in other.terms.items():
                key = (
                    tuple(a + b for a, b in zip(e1, e2)),
                    h1 + h2,
                    _merge_params(p1, p2),
                )
                c = c1 * c2
                acc = terms.get(key)
                if acc is None:
                    terms[key] = c
                else:
                    s = acc + c
                    if s.is_zero():
                        del terms[key]
                    else:
                        terms[key] = s
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = {k: c for k, c in terms.items() if not c.is_zero()}
        return out

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative symbol powers are not defined")
        result = Symbol.one(self.space)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def scale_hbar(self, shift: int) -> "Symbol":
        """Multiply by hbar**shift (shift may be negative)."""
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = {(e, h + shift, p): c for (e, h, p), c in self.terms.items()}
        return out

    def __eq__(self, other):
        return isinstance(other, Symbol) and self.space == other.space and self.terms == other.terms

    def __hash__(self):
        return hash((self.space, frozenset(self.terms.items())))

    def sort_key(self):
        return tuple(sorted((k, (c.re_num, c.im_num, c.den)) for k, c in self.terms.items()))

    # ---------------------------------------------------------------- calculus
    def partial(self, coord: str) -> "Symbol":
        """Exact formal partial derivative with respect to a coordinate."""
        k = self.space.index(coord)
        terms: dict[TermKey, Gauss] = {}
        for (exps, h, params), c in self.terms.items():
            e = exps[k]
            if e == 0:
                continue
            new = list(exps)
            new[k] = e - 1
            key = (tuple(new), h, params)
            nc = c.scale(e)
            acc = terms.get(key)
            terms[key] = nc if acc is None else acc + nc
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = {k2: c for k2, c in terms.items() if not c.is_zero()}
        return out

    def derive_multi(self, multi: tuple[int, ...]) -> "Symbol":
        """Iterated partial derivative given one order per coordinate."""
        terms: dict[TermKey, Gauss] = {}
        for (exps, h, params), c in self.terms.items():
            factor = 1
            new = list(exps)
            for j, m in enumerate(multi):
                if m == 0:
                    continue
                e = exps[j]
                if e < m:
                    factor = 0
                    break
                # falling factorial e * (e-1) * ... * (e-m+1)
                for s in range(m):
                    factor *= e - s
                new[j] = e - m
            if factor == 0:
                continue
            key = (tuple(new), h, params)
            nc = c.scale(factor)
            acc = terms.get(key)
            terms[key] = nc if acc is None else acc + nc
        out = Symbol.__new__(Symbol)
        out.space = self.space
        out.terms = {k2: c for k2, c in terms.items() if not c.is_zero()}
        return out

    def poisson(self, other: "Symbol") -> "Symbol":
        """Canonical Poisson bracket sum_pairs (da/dq db/dp - da/dp db/dq)."""
        self._check_space(other)
        out = Symbol.zero(self.space)
        for a_idx, b_idx in self.space.pairing:
            qa, qb = self.space.coords[a_idx], self.space.coords[b_idx]
            out = out + self.partial(qa) * other.partial(qb) - self.partial(qb) * other.partial(qa)
        return out

    # ---------------------------------------------------------------- substitution
    def substitute(self, bindings: Mapping[str, "Symbol"]) -> "Symbol":
        """Exact polynomial composition.

        Every coordinate occurring in ``self`` must be bound; replacement
        symbols must all live on one target space.  Parameters and hbar
        powers carry over unchanged.
        """
        if bindings:
            spaces = {s.space for s in bindings.values()}
            if len(spaces) > 1:
                raise SubstitutionError("replacement symbols live on different spaces")
            target = next(iter(spaces))
        else:
            target = self.space
        for name in bindings:
            self.space.index(name)
        bound = {self.space.index(name): sym for name, sym in bindings.items()}
        powers: dict[tuple[int, int], Symbol] = {}

        def power_of(idx: int, e: int) -> Symbol:
            key = (idx, e)
            cached = powers.get(key)
            if cached is None:
                cached = bound[idx] ** e
                powers[key] = cached
            return cached

        out = Symbol.zero(target)
        zero_target = (0,) * target.dim
        for (exps, h, params), c in self.terms.items():
            piece = Symbol(target, {(zero_target, h, params): c})
            for j, e in enumerate(exps):
                if e == 0:
                    continue
                if j not in bound:
                    raise SubstitutionError(
                        f"coordinate {self.space.coords[j]!r} occurs but is not bound"
                    )
                piece = piece * power_of(j, e)
            out = out + piece
        return out

    def rename_space(self, target: PhaseSpace) -> "Symbol":
        """Reinterpret on a space that shares all occurring coordinate names."""
        bindings = {
            name: Symbol.coordinate(target, name) for name in self.coordinates_present()
        }
        if bindings:
            return self.substitute(bindings)
        zero = (0,) * target.dim
        return Symbol(target, {(zero, h, p): c for (_, h, p), c in self.terms.items()})

    def subs_params(self, bindings: Mapping[str, "Symbol"]) -> "Symbol":
        """Substitute coefficient-ring generators by symbols on the same space."""
        for name, value in bindings.items():
            if name in self.space:
                raise SubstitutionError(f"{name!r} is a coordinate, not a parameter")
            if value.space != self.space:
                raise SpaceMismatchError("parameter replacement must live on the same space")
        out = Symbol.zero(self.space)
        for (exps, h, params), c in self.terms.items():
            kept = tuple((n, e) for n, e in params if n not in bindings)
            piece = Symbol(self.space, {(exps, h, kept): c})
            for n, e in params:
                if n in bindings:
                    if e >= 0:
                        piece = piece * bindings[n] ** e
                    else:
                        try:
                            piece = piece * bindings[n].monomial_inverse() ** (-e)
                        except ValueError as exc:
                            raise SubstitutionError(
                                f"{n!r} occurs with exponent {e} but the replacement "
                                f"is not invertible: {exc}"
                            ) from None
            out = out + piece
        return out

    # ---------------------------------------------------------------- structure helpers
    def coordinate_linear_form(self):
        """Decompose as sum_x coeff_x * x + rest with coordinate-free coefficients.

        Returns ``(coeffs, rest)`` where ``coeffs`` maps coordinate names to
        coordinate-free Symbols; returns ``None`` if any term is quadratic or
        higher in the coordinates.
        """
        coeffs: dict[str, Symbol] = {}
        rest = Symbol.zero(self.space)
        zero = (0,) * self.space.dim
        for (exps, h, params), c in self.terms.items():
            deg = sum(exps)
            if deg == 0:
                rest = rest + Symbol(self.space, {(exps, h, params): c})
            elif deg == 1:
                j = next(k for k, e in enumerate(exps) if e)
                name = self.space.coords[j]
                piece = Symbol(self.space, {(zero, h, params): c})
                coeffs[name] = coeffs.get(name, Symbol.zero(self.space)) + piece
            else:
                return None
        return {n: s for n, s in coeffs.items() if not s.is_zero()}, rest

    def coefficient_of_coordinate(self, coord: str) -> tuple["Symbol", "Symbol"]:
        """Split as ``c * coord + r`` with both parts free of ``coord``.

        Raises :class:`ValueError` when the symbol is not affine in ``coord``.
        """
        k = self.space.index(coord)
        c_terms: dict[TermKey, Gauss] = {}
        r_terms: dict[TermKey, Gauss] = {}
        for (exps, h, params), coeff in self.terms.items():
            e = exps[k]
            if e == 0:
                r_terms[(exps, h, params)] = coeff
            elif e == 1:
                new = list(exps)
                new[k] = 0
                c_terms[(tuple(new), h, params)] = coeff
            else:
                raise ValueError(f"symbol is not affine in {coord!r}")
        return Symbol(self.space, c_terms), Symbol(self.space, r_terms)

    def monomial_inverse(self) -> "Symbol":
        """Inverse of a single-term symbol with no coordinate dependence."""
        if len(self.terms) != 1:
            raise ValueError("only monomials are invertible")
        (exps, h, params), c = next(iter(self.terms.items()))
        if any(exps):
            raise ValueError("coordinates cannot be inverted")
        inv_params = tuple((n, -e) for n, e in params)
        return Symbol(self.space, {(exps, -h, inv_params): c.reciprocal()})

    # ---------------------------------------------------------------- numerics
    def evaluate(self, coord_values: Mapping[str, object] | None = None,
                 hbar: float | None = None,
                 params: Mapping[str, float] | None = None):
        """Evaluate numerically; coordinate values may be numpy arrays.

        Complex output; callers needing real data check the imaginary part.
        """
        coord_values = coord_values or {}
        params = params or {}
        total = 0
        for (exps, h, p), c in self.terms.items():
            val = complex(c)
            if h:
                if hbar is None:
                    raise ValueError("symbol contains hbar but no value was given")
                val *= hbar ** h
            for name, e in p:
                if name not in params:
                    raise ValueError(f"no value given for parameter {name!r}")
                val *= params[name] ** e
            acc = val
            for j, e in enumerate(exps):
                if e:
                    name = self.space.coords[j]
                    if name not in coord_values:
                        raise ValueError(f"no value given for coordinate {name!r}")
                    acc = acc * coord_values[name] ** e
            total = total + acc
        return total

    # ---------------------------------------------------------------- text form
    def __repr__(self):
        return f"<Symbol {text_form(self)!r}>"

    def __str__(self):
        return text_form(self)


def _term_sort_key(item):
    (exps, h, params), _ = item
    return (sum(exps), exps, h, params)


def _format_magnitude(num: int, den: int, imag: bool, tail: list[str]) -> str:
    parts = []
    if den != 1:
        parts.append(f"({num}/{den})")
    elif num != 1 or (not imag and not tail):
        parts.append(str(num))
    if imag:
        parts.append("i")
    parts.extend(tail)
    return "*".join(parts)


def text_form(sym: Symbol) -> str:
    """Canonical text form: graded-lex term order, explicit hbar powers, i as `i`."""
    if not sym.terms:
        return "0"
    rendered: list[tuple[bool, str]] = []  # (negative, body)
    for (exps, h, params), c in sorted(sym.terms.items(), key=_term_sort_key, reverse=True):
        tail = [f"{n}^{e}" if e != 1 else n for n, e in params]
        for j, e in enumerate(exps):
            if e:
                name = sym.space.coords[j]
                tail.append(f"{name}^{e}" if e != 1 else name)
        if h:
            tail.append(f"hbar^{h}" if h != 1 else "hbar")
        for num, imag in ((c.re_num, False), (c.im_num, True)):
            if num == 0:
                continue
            rendered.append((num < 0, _format_magnitude(abs(num), c.den, imag, tail)))
    out = []
    for k, (neg, body) in enumerate(rendered):
        if k == 0:
            out.append("-" + body if neg else body)
        else:
            out.append(" - " + body if neg else " + " + body)
    return "".join(out)


# ---------------------------------------------------------------------- parser

_TOKEN_CHARS = set("+-*/^()")


def _tokenize(text: str):
    tokens: list[tuple[str, str]] = []
    k = 0
    n = len(text)
    while k < n:
        ch = text[k]
        if ch.isspace():
            k += 1
        elif ch in _TOKEN_CHARS:
            tokens.append((ch, ch))
            k += 1
        elif ch.isdigit():
            j = k
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                raise ParseError("floating-point literals are not part of the exact grammar")
            tokens.append(("int", text[k:j]))
            k = j
        elif ch.isalpha() or ch == "_":
            j = k
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[k:j]))
            k = j
        else:
            raise ParseError(f"unexpected character {ch!r}")
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, tokens, space: PhaseSpace):
        self.tokens = tokens
        self.pos = 0
        self.space = space

    def peek(self):
        return self.tokens[self.pos][0]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind}, found {tok[1]!r}")
        return tok

    def parse_expr(self) -> Symbol:
        if self.peek() == "-":
            self.next()
            value = -self.parse_term()
        else:
            value = self.parse_term()
        while self.peek() in ("+", "-"):
            op = self.next()[0]
            rhs = self.parse_term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def parse_term(self) -> Symbol:
        value = self.parse_factor()
        while self.peek() in ("*", "/"):
            op = self.next()[0]
            rhs = self.parse_factor()
            if op == "*":
                value = value * rhs
            else:
                try:
                    value = value * rhs.monomial_inverse()
                except ValueError as exc:
                    raise ParseError(f"cannot divide by {text_form(rhs)!r}: {exc}") from None
        return value

    def parse_factor(self) -> Symbol:
        if self.peek() == "-":
            self.next()
            return -self.parse_factor()
        base = self.parse_atom()
        if self.peek() == "^":
            self.next()
            sign = 1
            if self.peek() == "-":
                self.next()
                sign = -1
            exp = sign * int(self.expect("int")[1])
            if exp >= 0:
                return base ** exp
            try:
                return base.monomial_inverse() ** (-exp)
            except ValueError as exc:
                raise ParseError(f"negative power of non-monomial: {exc}") from None
        return base

    def parse_atom(self) -> Symbol:
        kind, value = self.next()
        if kind == "int":
            return Symbol.constant(self.space, int(value))
        if kind == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if kind == "name":
            if value == "i":
                return Symbol.imag_unit(self.space)
            if value == "hbar":
                return Symbol.hbar(self.space)
            if value in self.space:
                return Symbol.coordinate(self.space, value)
            return Symbol.parameter(self.space, value)
        raise ParseError(f"unexpected token {value!r}")


def parse_expression(text: str, space: PhaseSpace) -> Symbol:
    """Parse the canonical text grammar; any unknown name is a parameter."""
    parser = _Parser(_tokenize(text), space)
    result = parser.parse_expr()
    if parser.peek() != "end":
        raise ParseError(f"trailing input at token {parser.tokens[parser.pos][1]!r}")
    return result


# ------------------------------------------------------------------ module API


def add(a: Symbol, b: Symbol) -> Symbol:
    return a + b


def mul(a: Symbol, b: Symbol) -> Symbol:
    return a * b


def partial(a: Symbol, coord: str) -> Symbol:
    return a.partial(coord)


def poisson(a: Symbol, b: Symbol) -> Symbol:
    return a.poisson(b)


def substitute(a: Symbol, bindings: Mapping[str, Symbol]) -> Symbol:
    return a.substitute(bindings)


def degree(a: Symbol) -> int:
    return a.total_degree()


def multinomial_factor(multi: tuple[int, ...]) -> int:
    out = 1
    for m in multi:
        out *= factorial(m)
    return out
