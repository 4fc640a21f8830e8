"""Polynomial phase-space diffeomorphisms and the covariant star product.

A :class:`Diffeomorphism` carries both branches of an invertible polynomial
coordinate change.  The induced structures (transformed symplectic matrix,
Poisson connection) live on the *source* space; the *target* space is the
one carrying the flat canonical Moyal product.  The reference semantics of
the covariant star is pullback through the map (exact at all orders for
polynomial data); the direct bidifferential form is a cross-check truncated
at hbar^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import SpaceMismatchError
from .moyal import star
from .symbols import GAUSS_I, Gauss, PhaseSpace, Symbol


@dataclass(frozen=True)
class Diffeomorphism:
    """Invertible polynomial coordinate map with explicit branches.

    ``forward`` expresses every target coordinate as a Symbol over the
    source space; ``inverse`` expresses every source coordinate over the
    target space.  Both round trips are validated exactly at construction,
    which rejects maps that are not polynomial automorphisms.
    """

    source: PhaseSpace
    target: PhaseSpace
    forward: Mapping[str, Symbol]
    inverse: Mapping[str, Symbol]

    def __post_init__(self):
        if set(self.forward) != set(self.target.coords):
            raise ValueError("forward branch must bind every target coordinate")
        if set(self.inverse) != set(self.source.coords):
            raise ValueError("inverse branch must bind every source coordinate")
        for name, sym in self.forward.items():
            if sym.space != self.source:
                raise SpaceMismatchError(f"forward[{name!r}] is not over the source space")
        for name, sym in self.inverse.items():
            if sym.space != self.target:
                raise SpaceMismatchError(f"inverse[{name!r}] is not over the target space")
        for name in self.target.coords:
            comp = self.forward[name].substitute(self.inverse)
            if comp != Symbol.coordinate(self.target, name):
                raise ValueError(f"forward then inverse is not the identity on {name!r}")
        for name in self.source.coords:
            comp = self.inverse[name].substitute(self.forward)
            if comp != Symbol.coordinate(self.source, name):
                raise ValueError(f"inverse then forward is not the identity on {name!r}")

    @classmethod
    def identity(cls, space: PhaseSpace) -> "Diffeomorphism":
        ident = {name: Symbol.coordinate(space, name) for name in space.coords}
        return cls(space, space, ident, dict(ident))

    def pull_to_target(self, sym: Symbol) -> Symbol:
        """Express a symbol over the source in target coordinates."""
        if sym.space != self.source:
            raise SpaceMismatchError("symbol is not over the source space")
        return sym.substitute(self.inverse)

    def push_to_source(self, sym: Symbol) -> Symbol:
        """Express a symbol over the target in source coordinates."""
        if sym.space != self.target:
            raise SpaceMismatchError("symbol is not over the target space")
        return sym.substitute(self.forward)


@dataclass(frozen=True)
class SymplecticMatrix:
    """Antisymmetric matrix of symbols J'^{ij} over one phase space."""

    space: PhaseSpace
    entries: tuple[tuple[Symbol, ...], ...]

    def __post_init__(self):
        n = self.space.dim
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise ValueError("entries must form a square matrix over the space")
        for i in range(n):
            for j in range(i, n):
                if self.entries[i][j] != -self.entries[j][i]:
                    raise ValueError("symplectic matrix must be antisymmetric")

    @classmethod
    def canonical(cls, space: PhaseSpace) -> "SymplecticMatrix":
        n = space.dim
        zero = Symbol.zero(space)
        rows = [[zero] * n for _ in range(n)]
        for a, b in space.pairing:
            rows[a][b] = Symbol.one(space)
            rows[b][a] = -Symbol.one(space)
        return cls(space, tuple(tuple(r) for r in rows))

    def is_canonical(self) -> bool:
        return self == SymplecticMatrix.canonical(self.space)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]


@dataclass(frozen=True)
class Connection:
    """Poisson-connection coefficients Gamma^i_{jk}, symmetric in (j, k)."""

    space: PhaseSpace
    entries: tuple[tuple[tuple[Symbol, ...], ...], ...]

    def __post_init__(self):
        n = self.space.dim
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    if self.entries[i][j][k] != self.entries[i][k][j]:
                        raise ValueError("connection must be symmetric in the lower indices")

    @classmethod
    def flat(cls, space: PhaseSpace) -> "Connection":
        zero = Symbol.zero(space)
        n = space.dim
        return cls(space, tuple(tuple((zero,) * n for _ in range(n)) for _ in range(n)))

    def is_flat(self) -> bool:
        return all(
            entry.is_zero() for plane in self.entries for row in plane for entry in row
        )

    def nonzero_entries(self):
        """Sorted list of ((i, j, k), Symbol) with j <= k and nonzero value."""
        out = []
        n = self.space.dim
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    if not self.entries[i][j][k].is_zero():
                        out.append(((i, j, k), self.entries[i][j][k]))
        return out

    def __getitem__(self, ijk):
        i, j, k = ijk
        return self.entries[i][j][k]


def jacobian_symplectic(d: Diffeomorphism) -> SymplecticMatrix:
    """Transformed symplectic matrix on the source space.

    Contracts the Jacobian of the source coordinates (as functions of the
    target) with the canonical matrix of the target, then expresses the
    result back in source coordinates.  Antisymmetry holds by construction.
    """
    src, tgt = d.source, d.target
    n = src.dim
    grad = [
        [d.inverse[src.coords[i]].partial(tgt.coords[k]) for k in range(tgt.dim)]
        for i in range(n)
    ]
    zero = Symbol.zero(tgt)
    rows = [[zero] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            acc = Symbol.zero(tgt)
            for a, b in tgt.pairing:
                acc = acc + grad[i][a] * grad[j][b] - grad[i][b] * grad[j][a]
            rows[i][j] = acc
            rows[j][i] = -acc
    pushed = [[d.push_to_source(entry) for entry in row] for row in rows]
    return SymplecticMatrix(src, tuple(tuple(r) for r in pushed))


def christoffel(d: Diffeomorphism) -> Connection:
    """Poisson connection on the source space induced by the map.

    Gamma^i_{jk} = (d src_i / d tgt_b) (d^2 tgt_b / d src_j d src_k), with
    the first factor re-expressed in source coordinates.  Vanishes exactly
    for affine maps.
    """
    src, tgt = d.source, d.target
    n = src.dim
    first = [
        [d.push_to_source(d.inverse[src.coords[i]].partial(tgt.coords[b])) for b in range(tgt.dim)]
        for i in range(n)
    ]
    second = []
    for b in range(tgt.dim):
        fwd = d.forward[tgt.coords[b]]
        grads = [fwd.partial(src.coords[j]) for j in range(n)]
        second.append([[grads[j].partial(src.coords[k]) for k in range(n)] for j in range(n)])
    planes = []
    for i in range(n):
        plane = []
        for j in range(n):
            row = []
            for k in range(n):
                acc = Symbol.zero(src)
                for b in range(tgt.dim):
                    hess = second[b][j][k]
                    if hess.is_zero():
                        continue
                    acc = acc + first[i][b] * hess
                row.append(acc)
            plane.append(tuple(row))
        planes.append(tuple(plane))
    return Connection(src, tuple(planes))


def covariant_derivative(a: Symbol, conn: Connection, order: int):
    """First- or second-order covariant derivative arrays.

    Order 1 is the plain gradient; order 2 is the Hessian minus the
    connection contraction, symmetric in its two indices.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    space = conn.space
    if a.space != space:
        raise SpaceMismatchError("symbol and connection live on different spaces")
    grad = [a.partial(name) for name in space.coords]
    if order == 1:
        return tuple(grad)
    n = space.dim
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            entry = grad[i].partial(space.coords[j])
            for k in range(n):
                gamma = conn[k, i, j]
                if not gamma.is_zero():
                    entry = entry - gamma * grad[k]
            row.append(entry)
        rows.append(tuple(row))
    return tuple(rows)


def covariant_star_pullback(
    a: Symbol, b: Symbol, d: Diffeomorphism, max_order: int | None = None
) -> Symbol:
    """Reference covariant star: route through the flat target space.

    Both symbols (over the source) are composed into target coordinates,
    star-multiplied there with the canonical Moyal product, and the result
    is pulled back.  Exact at all orders when ``max_order`` is None; for
    hbar-free inputs, ``max_order=2`` yields exactly the hbar^0..hbar^2
    part.
    """
    flat_a = d.pull_to_target(a)
    flat_b = d.pull_to_target(b)
    product = star(flat_a, flat_b, max_order=max_order)
    return d.push_to_source(product)


def covariant_star_direct(
    a: Symbol,
    b: Symbol,
    jprime: SymplecticMatrix,
    conn: Connection,
    hbar_order: int = 2,
) -> Symbol:
    """Direct bidifferential covariant star truncated at hbar^2.

    a b + (i hbar/2) Da.J'.Db + (1/2)(i hbar/2)^2 (DDa).J'J'.(DDb), using
    covariant second derivatives built from the connection.
    """
    if hbar_order not in (0, 1, 2):
        raise ValueError("hbar_order must be 0, 1 or 2")
    space = jprime.space
    if a.space != space or b.space != space or conn.space != space:
        raise SpaceMismatchError("all operands must live on one space")
    total = a * b
    if hbar_order == 0:
        return total
    n = space.dim
    grad_a = [a.partial(name) for name in space.coords]
    grad_b = [b.partial(name) for name in space.coords]
    half_i = GAUSS_I.scale(1, 2)
    first = Symbol.zero(space)
    for i in range(n):
        if grad_a[i].is_zero():
            continue
        for j in range(n):
            jij = jprime[i, j]
            if jij.is_zero() or grad_b[j].is_zero():
                continue
            first = first + grad_a[i] * jij * grad_b[j]
    total = total + (first * half_i).scale_hbar(1)
    if hbar_order == 1:
        return total
    dda = covariant_derivative(a, conn, 2)
    ddb = covariant_derivative(b, conn, 2)
    second = Symbol.zero(space)
    for i in range(n):
        for k in range(n):
            if dda[i][k].is_zero():
                continue
            for j in range(n):
                jij = jprime[i, j]
                if jij.is_zero():
                    continue
                for l in range(n):
                    jkl = jprime[k, l]
                    if jkl.is_zero() or ddb[j][l].is_zero():
                        continue
                    second = second + dda[i][k] * jij * jkl * ddb[j][l]
    coeff = (half_i * half_i).scale(1, 2)  # (1/2)(i/2)^2
    total = total + (second * coeff).scale_hbar(2)
    return total


def pfaffian(matrix: SymplecticMatrix) -> Symbol:
    """Pfaffian of the antisymmetric matrix, by recursive expansion."""
    n = matrix.space.dim
    if n % 2:
        raise ValueError("Pfaffian requires even dimension")

    def rec(rows: list[list[Symbol]]) -> Symbol:
        m = len(rows)
        if m == 0:
            return Symbol.one(matrix.space)
        if m == 2:
            return rows[0][1]
        acc = Symbol.zero(matrix.space)
        for j in range(1, m):
            entry = rows[0][j]
            if entry.is_zero():
                continue
            keep = [k for k in range(m) if k not in (0, j)]
            minor = [[rows[a][b] for b in keep] for a in keep]
            sign = 1 if j % 2 == 1 else -1
            acc = acc + entry * rec(minor) * Gauss(sign)
        return acc

    rows = [list(r) for r in matrix.entries]
    return rec(rows)


def measure_factor(matrix: SymplecticMatrix, as_pfaffian: bool = False) -> Symbol:
    """det J' as a Symbol (the square of the Pfaffian).

    Grid consumers apply the -1/2 power numerically; ``as_pfaffian=True``
    returns the Pfaffian itself.
    """
    pf = pfaffian(matrix)
    return pf if as_pfaffian else pf * pf
