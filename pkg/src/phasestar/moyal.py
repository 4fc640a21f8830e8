"""Flat-space Moyal star product, Moyal bracket, star powers and exponentials.

The star product is evaluated as the terminating bidifferential series

    a * b = sum_{m,n} (i hbar/2)^{|m|+|n|} (-1)^{|n|} / (m! n!)
            (d_q^m d_p^n a) (d_q^n d_p^m b)

with m, n multi-indices over the canonical pairs of the phase space.  For
polynomial symbols the series terminates at min(deg a, deg b), so every
result is exact.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import SpaceMismatchError
from .symbols import GAUSS_I, Gauss, PhaseSpace, Symbol, multinomial_factor


def _compositions(total: int, caps: tuple[int, ...]):
    """All tuples t with sum(t) == total and t[j] <= caps[j]."""
    n = len(caps)

    def rec(j: int, remaining: int):
        if j == n - 1:
            if remaining <= caps[j]:
                yield (remaining,)
            return
        upper = min(remaining, caps[j])
        for v in range(upper + 1):
            for rest in rec(j + 1, remaining - v):
                yield (v,) + rest

    if n == 0:
        if total == 0:
            yield ()
        return
    yield from rec(0, total)


def _full_multi(space: PhaseSpace, on_positions, on_momenta):
    multi = [0] * space.dim
    for s, (a_idx, b_idx) in enumerate(space.pairing):
        multi[a_idx] = on_positions[s]
        multi[b_idx] = on_momenta[s]
    return tuple(multi)


def _pair_caps(sym: Symbol, space: PhaseSpace):
    caps = sym.max_exponents()
    pos = tuple(caps[a] for a, _ in space.pairing)
    mom = tuple(caps[b] for _, b in space.pairing)
    return pos, mom


def _ihalf_power(order: int) -> Gauss:
    """(i/2)**order as an exact Gaussian rational."""
    i_pow = GAUSS_I
    pow_ = Gauss(1)
    for _ in range(order):
        pow_ = pow_ * i_pow
    return pow_.scale(1, 2 ** order)


def star(a: Symbol, b: Symbol, max_order: int | None = None) -> Symbol:
    """Moyal star product of two polynomial symbols, exact and terminating.

    ``max_order`` truncates the bidifferential series; for hbar-free inputs
    the order-n term is exactly the hbar^n coefficient, so truncation at 2
    yields the hbar^0..hbar^2 part of the full product.
    """
    if a.space != b.space:
        raise SpaceMismatchError(f"{a.space} vs {b.space}")
    space = a.space
    da, db = a.total_degree(), b.total_degree()
    if da < 0 or db < 0:
        return Symbol.zero(space)
    nmax = min(da, db)
    if max_order is not None:
        nmax = min(nmax, max_order)
    a_pos, a_mom = _pair_caps(a, space)
    b_pos, b_mom = _pair_caps(b, space)
    m_caps = tuple(min(x, y) for x, y in zip(a_pos, b_mom))
    n_caps = tuple(min(x, y) for x, y in zip(a_mom, b_pos))
    total = a * b
    for order in range(1, nmax + 1):
        coeff_base = _ihalf_power(order)
        for m_total in range(0, order + 1):
            n_total = order - m_total
            for m in _compositions(m_total, m_caps):
                d_a_m = a.derive_multi(_full_multi(space, m, (0,) * space.npairs))
                if d_a_m.is_zero():
                    continue
                for n in _compositions(n_total, n_caps):
                    d_a = d_a_m.derive_multi(_full_multi(space, (0,) * space.npairs, n))
                    if d_a.is_zero():
                        continue
                    d_b = b.derive_multi(_full_multi(space, n, m))
                    if d_b.is_zero():
                        continue
                    coeff = coeff_base.scale((-1) ** n_total, multinomial_factor(m) * multinomial_factor(n))
                    total = total + (d_a * d_b * coeff).scale_hbar(order)
    return total


def moyal_bracket(a: Symbol, b: Symbol, max_order: int | None = None) -> Symbol:
    """(a*b - b*a)/(i hbar): the quantum deformation of the Poisson bracket.

    Equals poisson(a, b) exactly whenever either argument has total degree
    at most 2; corrections enter only at even powers of hbar.
    """
    if a.space != b.space:
        raise SpaceMismatchError(f"{a.space} vs {b.space}")
    space = a.space
    da, db = a.total_degree(), b.total_degree()
    if da < 0 or db < 0:
        return Symbol.zero(space)
    nmax = min(da, db)
    if max_order is not None:
        nmax = min(nmax, max_order)
    a_pos, a_mom = _pair_caps(a, space)
    b_pos, b_mom = _pair_caps(b, space)
    m_caps = tuple(min(x, y) for x, y in zip(a_pos, b_mom))
    n_caps = tuple(min(x, y) for x, y in zip(a_mom, b_pos))
    total = Symbol.zero(space)
    minus_i = Gauss(0, -1)
    for order in range(1, nmax + 1, 2):  # even orders cancel in the commutator
        # (1/(i hbar)) * (i hbar / 2)^order * [(-1)^{|n|} - (-1)^{|m|}]
        coeff_base = (_ihalf_power(order) * minus_i)
        for m_total in range(0, order + 1):
            n_total = order - m_total
            sign = (-1) ** n_total - (-1) ** m_total
            if sign == 0:
                continue
            for m in _compositions(m_total, m_caps):
                d_a_m = a.derive_multi(_full_multi(space, m, (0,) * space.npairs))
                if d_a_m.is_zero():
                    continue
                for n in _compositions(n_total, n_caps):
                    d_a = d_a_m.derive_multi(_full_multi(space, (0,) * space.npairs, n))
                    if d_a.is_zero():
                        continue
                    d_b = b.derive_multi(_full_multi(space, n, m))
                    if d_b.is_zero():
                        continue
                    coeff = coeff_base.scale(sign, multinomial_factor(m) * multinomial_factor(n))
                    total = total + (d_a * d_b * coeff).scale_hbar(order - 1)
    return total


def star_power(a: Symbol, n: int) -> Symbol:
    """Left-associated n-fold star power; star_power(a, 0) == 1."""
    if n < 0:
        raise ValueError("star powers are defined for n >= 0")
    result = Symbol.one(a.space)
    for _ in range(n):
        result = star(result, a)
    return result


def star_exp_classical_check(a: Symbol, max_n: int = 4) -> bool:
    """True iff star powers equal ordinary powers for all 2 <= n <= max_n.

    When true the star exponential of ``a`` collapses to the ordinary
    exponential and may be used in closed form downstream.
    """
    if max_n < 2:
        raise ValueError("max_n must be at least 2")
    return first_noncollapsing_power(a, max_n) is None


def first_noncollapsing_power(a: Symbol, max_n: int = 4) -> int | None:
    """Smallest 2 <= n <= max_n with star_power(a, n) != a**n, else None."""
    acc = a
    plain = a
    for n in range(2, max_n + 1):
        acc = star(acc, a)
        plain = plain * a
        if acc != plain:
            return n
    return None


def star_exp_series(a: Symbol, k_order: int) -> list[Symbol]:
    """Star powers [a^(*0), a^(*1), ..., a^(*k_order)].

    These are the Taylor data of the star exponential: contracting entry n
    against (ik)^n/n! reproduces the truncated exponential series.  No
    convergence claim is made.
    """
    if k_order < 0:
        raise ValueError("k_order must be non-negative")
    out = [Symbol.one(a.space)]
    acc = Symbol.one(a.space)
    for _ in range(k_order):
        acc = star(acc, a)
        out.append(acc)
    return out


def hbar_over_two_coefficient(order: int) -> Fraction:
    """|(1/2)^order| helper exposed for term-generation cross-checks."""
    return Fraction(1, 2 ** order)
