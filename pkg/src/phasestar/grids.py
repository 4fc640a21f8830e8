"""Quasidistribution propagation on rectangular phase-space grids.

The bracket right-hand sides are generated symbolically from a polynomial
Hamiltonian (so the quantum corrections are exact term data, not
approximations) and evaluated with spectral or fd4 derivatives of the
gridded distribution.  Also provides RK4 stepping, normalization
quadrature, the Wigner transform of history amplitudes, probability
extraction, and snapshot/manifest export.

Determinism: evaluation is single-threaded over whole arrays; repeated
evaluation of the same inputs is bitwise identical.  The slab contract for
parallel decompositions is numerical equivalence within 1 ulp per
accumulation; the reference implementation uses one slab.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .deltas import DeltaSymbol
from .errors import GridError, NonSeparableError, NumericalAbortError
from .moyal import _compositions, _full_multi
from .symbols import Symbol, multinomial_factor


@dataclass(frozen=True)
class GridAxis:
    name: str
    lo: float
    hi: float
    points: int

    def __post_init__(self):
        if self.points < 8:
            raise GridError("grids need at least 8 points per axis")
        if not self.hi > self.lo:
            raise GridError("axis length must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid with a boundary model and derivative scheme."""

    axes: tuple[GridAxis, ...]
    boundary: str = "periodic"  # periodic | zero
    scheme: str = "spectral"  # spectral | fd4

    def __post_init__(self):
        if self.boundary not in ("periodic", "zero"):
            raise GridError(f"unknown boundary {self.boundary!r}")
        if self.scheme not in ("spectral", "fd4"):
            raise GridError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "spectral" and self.boundary != "periodic":
            raise GridError("spectral derivatives require periodic boundaries")
        if len({ax.name for ax in self.axes}) != len(self.axes):
            raise GridError("axis names must be unique")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.points for ax in self.axes)

    def axis_index(self, name: str) -> int:
        for k, ax in enumerate(self.axes):
            if ax.name == name:
                return k
        raise GridError(f"no grid axis named {name!r}")

    def spacing(self, k: int) -> float:
        ax = self.axes[k]
        if self.boundary == "periodic":
            return (ax.hi - ax.lo) / ax.points
        return (ax.hi - ax.lo) / (ax.points - 1)

    def coordinates(self, k: int) -> np.ndarray:
        ax = self.axes[k]
        dx = self.spacing(k)
        return ax.lo + dx * np.arange(ax.points)

    def mesh(self, k: int) -> np.ndarray:
        """Axis coordinates shaped for broadcasting over the full grid."""
        shape = [1] * len(self.axes)
        shape[k] = self.axes[k].points
        return self.coordinates(k).reshape(shape)

    def cell_volume(self) -> float:
        out = 1.0
        for k in range(len(self.axes)):
            out *= self.spacing(k)
        return out


@dataclass(frozen=True)
class GridState:
    """Sampled quasidistribution with time and optional measure weight."""

    spec: GridSpec
    values: np.ndarray
    time: float = 0.0
    measure_weight: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != self.spec.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.spec.shape}"
            )
        if not np.isfinite(self.values).all():
            raise GridError("grid values must be finite")

    def with_values(self, values: np.ndarray, time: float | None = None) -> "GridState":
        return GridState(self.spec, values, self.time if time is None else time,
                         self.measure_weight)


def sample(spec: GridSpec, fn: Callable[..., np.ndarray], time: float = 0.0) -> GridState:
    """Sample fn(*axis_meshes) onto a grid state."""
    meshes = [spec.mesh(k) for k in range(len(spec.axes))]
    values = np.asarray(np.broadcast_to(fn(*meshes), spec.shape), dtype=np.float64).copy()
    return GridState(spec, values, time)


# ------------------------------------------------------------------ derivatives


def axis_derivative(spec: GridSpec, values: np.ndarray, axis: int, order: int) -> np.ndarray:
    """One-shot derivative of the given order along one axis."""
    if order == 0:
        return values
    dx = spec.spacing(axis)
    if spec.scheme == "spectral":
        n = spec.axes[axis].points
        freqs = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)
        mult = (1j * freqs) ** order
        if order % 2 == 1 and n % 2 == 0:
            mult = mult.copy()
            mult[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
        spectrum = np.fft.rfft(values, axis=axis)
        shape = [1] * values.ndim
        shape[axis] = mult.size
        spectrum *= mult.reshape(shape)
        return np.fft.irfft(spectrum, n=n, axis=axis)
    return kernels.fd4_derivative(values, axis, order, dx, periodic=spec.boundary == "periodic")


def mixed_derivative(spec: GridSpec, values: np.ndarray, multi: Sequence[int]) -> np.ndarray:
    """Mixed partial derivative; one one-shot stencil per axis."""
    out = values
    for axis, order in enumerate(multi):
        if order:
            out = axis_derivative(spec, out, axis, order)
    return out


# ------------------------------------------------------- bracket term generation


def bracket_terms(h: Symbol, quantum: bool = True):
    """Symbolic term list of [h, .]_M (or {h, .}).

    Yields (hbar_power, rational coefficient, h-derivative Symbol,
    f-derivative orders per space coordinate).  For a polynomial h the list
    is finite and exact; the classical variant keeps only the first-order
    terms.
    """
    space = h.space
    caps = h.max_exponents()
    pos_caps = tuple(caps[a] for a, _ in space.pairing)
    mom_caps = tuple(caps[b] for _, b in space.pairing)
    deg = h.total_degree()
    top = 1 if not quantum else max(deg, 1)
    out = []
    for order in range(1, top + 1, 2):
        for m_total in range(0, order + 1):
            n_total = order - m_total
            sign = (-1) ** n_total - (-1) ** m_total
            if sign == 0:
                continue
            for m in _compositions(m_total, pos_caps):
                for n in _compositions(n_total, mom_caps):
                    dh = h.derive_multi(_full_multi(space, m, n))
                    if dh.is_zero():
                        continue
                    # (1/(i hbar)) (i hbar/2)^order sign / (m! n!)
                    i_pow = order - 1  # i^(order-1) with order odd -> (-1)^((order-1)/2)
                    real_sign = (-1) ** (i_pow // 2)
                    coeff = Fraction(sign * real_sign, 2 ** order) / (
                        multinomial_factor(m) * multinomial_factor(n)
                    )
                    f_multi = _full_multi(space, n, m)
                    out.append((order - 1, coeff, dh, f_multi))
    return out


class BracketOperator:
    """Evaluates [H, f]_M (or {H, f}) on a grid, derivatives precompiled.

    Hamiltonian derivative factors are evaluated analytically on the grid
    once; distribution derivatives use the grid scheme.  Calling the
    operator is deterministic and allocation-light.
    """

    def __init__(self, h: Symbol, spec: GridSpec, hbar: float = 1.0,
                 quantum: bool = True, params: Mapping[str, float] | None = None):
        space = h.space
        names = {ax.name for ax in spec.axes}
        if set(space.coords) != names:
            raise GridError("grid axes must cover exactly the Hamiltonian's phase space")
        self.spec = spec
        self.hbar = float(hbar)
        coord_values = {ax.name: spec.mesh(spec.axis_index(ax.name)) for ax in spec.axes}
        self.terms = []
        for hbar_power, coeff, dh, f_multi in bracket_terms(h, quantum=quantum):
            weight = float(coeff) * self.hbar ** hbar_power
            harr = dh.evaluate(coord_values, hbar=self.hbar, params=params)
            if np.iscomplexobj(harr):
                if np.max(np.abs(np.imag(harr))) != 0.0:
                    raise GridError("Hamiltonian derivative evaluated to complex data")
                harr = np.real(harr)
            grid_multi = [0] * len(spec.axes)
            for j, order in enumerate(f_multi):
                grid_multi[spec.axis_index(space.coords[j])] = order
            self.terms.append((weight * harr, tuple(grid_multi)))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(values)
        cache: dict[tuple[int, ...], np.ndarray] = {}
        for warr, multi in self.terms:
            darr = cache.get(multi)
            if darr is None:
                darr = mixed_derivative(self.spec, values, multi)
                cache[multi] = darr
            out += warr * darr
        return out


def moyal_rhs(h: Symbol, f: GridState, hbar: float = 1.0,
              params: Mapping[str, float] | None = None) -> GridState:
    """d f/dt = [H, f]_M with exact polynomial-Hamiltonian hbar corrections."""
    op = BracketOperator(h, f.spec, hbar=hbar, quantum=True, params=params)
    return f.with_values(op(f.values))


def liouville_rhs(h: Symbol, f: GridState,
                  params: Mapping[str, float] | None = None) -> GridState:
    """Classical advection right-hand side {H, f}."""
    op = BracketOperator(h, f.spec, hbar=1.0, quantum=False, params=params)
    return f.with_values(op(f.values))


# ------------------------------------------------------------------- stepping


def step_rk4(rhs: Callable[[GridState], GridState], f: GridState, dt: float) -> GridState:
    """Classical RK4 step; aborts on non-finite data in any stage."""
    if dt <= 0:
        raise GridError("dt must be positive")
    try:
        k1 = rhs(f).values
        k2 = rhs(f.with_values(f.values + 0.5 * dt * k1)).values
        k3 = rhs(f.with_values(f.values + 0.5 * dt * k2)).values
        k4 = rhs(f.with_values(f.values + dt * k3)).values
    except GridError as exc:
        raise NumericalAbortError(f"non-finite stage data at t={f.time}: {exc}") from None
    new = f.values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(new).all():
        raise NumericalAbortError(f"non-finite data after step at t={f.time}")
    return GridState(f.spec, new, f.time + dt, f.measure_weight)


def evolve(rhs: Callable[[GridState], GridState], f: GridState, dt: float, steps: int,
           callback: Callable[[int, GridState], None] | None = None) -> GridState:
    state = f
    for k in range(steps):
        state = step_rk4(rhs, state, dt)
        if callback is not None:
            callback(k + 1, state)
    return state


# ----------------------------------------------------------------- quadrature


def _quadrature_weights(spec: GridSpec, axis: int) -> np.ndarray:
    n = spec.axes[axis].points
    dx = spec.spacing(axis)
    w = np.full(n, dx)
    if spec.boundary == "zero":
        w[0] *= 0.5
        w[-1] *= 0.5
    return w


def normalize_check(f: GridState) -> float:
    """Quadrature of f d(mu); trapezoid on zero-padded grids, Riemann (exact
    for periodic data) on periodic ones."""
    values = f.values
    if f.measure_weight is not None:
        values = values * f.measure_weight
    total = values
    for axis in range(len(f.spec.axes) - 1, -1, -1):
        w = _quadrature_weights(f.spec, axis)
        shape = [1] * total.ndim
        shape[axis] = w.size
        total = (total * w.reshape(shape)).sum(axis=axis)
    return float(total)


# --------------------------------------------------------------- Wigner layer


@dataclass(frozen=True)
class Amplitude:
    """Complex history-label amplitude on a uniform grid, unit-normalized."""

    axes: tuple[GridAxis, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != tuple(ax.points for ax in self.axes):
            raise GridError("amplitude shape does not match axes")
        norm = self.norm_squared()
        if abs(norm - 1.0) > 1e-9:
            raise GridError(f"amplitude is not normalized: |C|^2 integrates to {norm}")

    def spacing(self, k: int) -> float:
        ax = self.axes[k]
        return (ax.hi - ax.lo) / ax.points

    def coordinates(self, k: int) -> np.ndarray:
        return self.axes[k].lo + self.spacing(k) * np.arange(self.axes[k].points)

    def norm_squared(self) -> float:
        da = 1.0
        for k in range(len(self.axes)):
            da *= self.spacing(k)
        return float(np.sum(np.abs(self.values) ** 2) * da)

    @classmethod
    def normalized(cls, axes: Iterable[GridAxis], values: np.ndarray) -> "Amplitude":
        axes = tuple(axes)
        da = 1.0
        for k, ax in enumerate(axes):
            da *= (ax.hi - ax.lo) / ax.points
        norm = np.sqrt(np.sum(np.abs(values) ** 2) * da)
        if norm == 0:
            raise GridError("cannot normalize the zero amplitude")
        return cls(axes, np.asarray(values, dtype=np.complex128) / norm)


def wigner_of_amplitude(c: Amplitude, hbar: float = 1.0,
                        imag_tolerance: float = 1e-10) -> GridState:
    """Wigner transform of a history amplitude.

    Output axes are the label axes followed by their Fourier-dual momentum
    axes (B_j = pi hbar j' / (n da), j' centered); the discrete transform
    makes the B-marginal reproduce |C(A)|^2 exactly.  The imaginary residue
    is checked against ``imag_tolerance`` and discarded.
    """
    import itertools

    n_axes = len(c.axes)
    shapes = tuple(ax.points for ax in c.axes)
    corr = np.zeros(shapes + shapes, dtype=np.complex128)
    values = c.values
    # correlation C(A + m da) conj(C(A - m da)), zero outside the grid;
    # the m lattice is small (product of label sizes)
    m_ranges = [range(-(n // 2), n - (n // 2)) for n in shapes]
    for m_multi in itertools.product(*m_ranges):
        src_plus, src_minus, dest = [], [], []
        ok = True
        for n, m in zip(shapes, m_multi):
            lo = max(0, m, -m)
            hi = min(n, n + m, n - m)
            if lo >= hi:
                ok = False
                break
            dest.append(slice(lo, hi))
            src_plus.append(slice(lo + m, hi + m))
            src_minus.append(slice(lo - m, hi - m))
        if not ok:
            continue
        block = values[tuple(src_plus)] * np.conj(values[tuple(src_minus)])
        corr[tuple(dest) + tuple(m % n for n, m in zip(shapes, m_multi))] = block

    # inverse DFT over the m axes realizes sum_m K e^{2 pi i m j'/n}
    w = corr
    for k in range(n_axes):
        w = np.fft.ifft(w, axis=n_axes + k) * shapes[k]
        w = np.fft.fftshift(w, axes=n_axes + k)
    prefactor = 1.0
    for k in range(n_axes):
        prefactor *= c.spacing(k) / (np.pi * hbar)
    w = w * prefactor
    residue = float(np.max(np.abs(w.imag))) if w.size else 0.0
    scale = float(np.max(np.abs(w.real))) or 1.0
    if residue > imag_tolerance * max(1.0, scale):
        raise GridError(f"imaginary residue {residue} above tolerance")
    out_axes = list(c.axes)
    for k, ax in enumerate(c.axes):
        n = ax.points
        da = c.spacing(k)
        db = np.pi * hbar / (n * da)
        lo = -db * (n // 2)
        out_axes.append(GridAxis("B_" + ax.name, lo, lo + db * n, n))
    spec = GridSpec(tuple(out_axes), boundary="periodic", scheme="spectral")
    return GridState(spec, np.ascontiguousarray(w.real), 0.0)


def amplitude_marginal(w: GridState, keep_axes: Sequence[int]) -> np.ndarray:
    """Integrate the distribution over all axes not listed."""
    total = w.values
    for axis in range(len(w.spec.axes) - 1, -1, -1):
        if axis in keep_axes:
            continue
        weights = _quadrature_weights(w.spec, axis)
        shape = [1] * total.ndim
        shape[axis] = weights.size
        total = (total * weights.reshape(shape)).sum(axis=axis)
    return total


# ---------------------------------------------------------------- probability


def delta_slices(observable: DeltaSymbol, hbar: float = 1.0,
                 params: Mapping[str, float] | None = None) -> tuple[dict[str, float], float]:
    """Reduce a separable product-of-deltas observable to coordinate slices.

    Returns (slices, weight); the weight is the constant prefactor the
    canonical delta-scale normalization produced.
    """
    if len(observable.terms) != 1:
        raise NonSeparableError("observable must be a single product of deltas")
    term = observable.terms[0]
    if not term.phase.is_zero():
        raise NonSeparableError("observable carries a phase; not a coordinate slice")
    if not term.poly.is_coordinate_free():
        raise NonSeparableError("observable carries a non-constant prefactor")
    weight = complex(term.poly.evaluate({}, hbar=hbar, params=params))
    if weight.imag:
        raise NonSeparableError("observable weight evaluated to complex data")
    out: dict[str, float] = {}
    for d in term.deltas:
        if d.order != 0:
            raise NonSeparableError("derivative deltas are not coordinate slices")
        coords = sorted(d.arg.coordinates_present())
        if len(coords) != 1:
            raise NonSeparableError("delta argument mixes coordinates")
        name = coords[0]
        c, r = d.arg.coefficient_of_coordinate(name)
        cval = complex(c.evaluate({}, hbar=hbar, params=params))
        rval = complex(r.evaluate({}, hbar=hbar, params=params))
        if cval.imag or rval.imag:
            raise NonSeparableError("slice position evaluated to complex data")
        out[name] = -rval.real / cval.real
    return out, weight.real


def probability(f: GridState, observable, hbar: float = 1.0,
                params: Mapping[str, float] | None = None):
    """Integrate f d(mu) against a slice observable.

    ``observable`` may be a DeltaSymbol (separable product of plain deltas),
    a {coordinate: value} mapping, a single coordinate name (returning the
    full marginal array along it), or 1/None for the plain normalization
    integral.
    """
    if observable is None or observable == 1:
        return normalize_check(f)
    weight = 1.0
    if isinstance(observable, DeltaSymbol):
        observable, weight = delta_slices(observable, hbar=hbar, params=params)
    if isinstance(observable, str):
        axis = f.spec.axis_index(observable)
        values = f.values if f.measure_weight is None else f.values * f.measure_weight
        state = GridState(f.spec, values, f.time)
        return amplitude_marginal(state, [axis])
    values = f.values if f.measure_weight is None else f.values * f.measure_weight
    spec = f.spec
    for name, value in sorted(observable.items()):
        axis = spec.axis_index(name)
        coords = spec.coordinates(axis)
        dx = spec.spacing(axis)
        pos = (value - coords[0]) / dx
        i0 = int(np.floor(pos))
        frac = pos - i0
        n = spec.axes[axis].points
        if spec.boundary == "periodic":
            lo = np.take(values, i0 % n, axis=axis)
            hi = np.take(values, (i0 + 1) % n, axis=axis)
        else:
            if i0 < 0 or i0 + 1 >= n:
                raise GridError(f"slice {name}={value} is outside the grid")
            lo = np.take(values, i0, axis=axis)
            hi = np.take(values, i0 + 1, axis=axis)
        values = (1.0 - frac) * lo + frac * hi
        kept = tuple(ax for k, ax in enumerate(spec.axes) if k != axis)
        spec = GridSpec(kept, spec.boundary, spec.scheme) if kept else None
        if spec is None:
            return weight * float(values)
    sliced = GridState(spec, values, f.time)
    return weight * normalize_check(sliced)


# ------------------------------------------------------------------- snapshots

_MAGIC = b"PSGR"
_VERSION = 1


def save_snapshot(path, state: GridState) -> None:
    """Flat little-endian binary snapshot: header then float64 payload."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(state.spec.axes)))
        fh.write(struct.pack("<d", state.time))
        for k, ax in enumerate(state.spec.axes):
            fh.write(struct.pack("<Idd", ax.points, ax.lo, state.spec.spacing(k)))
        fh.write(np.ascontiguousarray(state.values, dtype="<f8").tobytes())


def load_snapshot(path, boundary: str = "periodic", scheme: str = "spectral") -> GridState:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise GridError("not a grid snapshot")
        version, ndim = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise GridError(f"unsupported snapshot version {version}")
        (time,) = struct.unpack("<d", fh.read(8))
        axes = []
        for k in range(ndim):
            points, lo, dx = struct.unpack("<Idd", fh.read(20))
            if boundary == "periodic":
                hi = lo + dx * points
            else:
                hi = lo + dx * (points - 1)
            axes.append(GridAxis(f"x{k}", lo, hi, points))
        spec = GridSpec(tuple(axes), boundary, scheme)
        payload = np.frombuffer(fh.read(), dtype="<f8").reshape(spec.shape)
    return GridState(spec, payload.astype(np.float64), time)


def write_gnuplot_slice(path, state: GridState, axis_x: str, axis_y: str,
                        fixed: Mapping[str, int] | None = None) -> None:
    """Two-dimensional text slice in gnuplot block format."""
    fixed = dict(fixed or {})
    ix = state.spec.axis_index(axis_x)
    iy = state.spec.axis_index(axis_y)
    values = state.values
    index: list = [0] * values.ndim
    for k, ax in enumerate(state.spec.axes):
        if k == ix or k == iy:
            index[k] = slice(None)
        else:
            index[k] = fixed.get(ax.name, ax.points // 2)
    plane = values[tuple(index)]
    if ix > iy:
        plane = plane.T
    xs = state.spec.coordinates(ix)
    ys = state.spec.coordinates(iy)
    with open(path, "w") as fh:
        fh.write(f"# {axis_x} {axis_y} f  (t={state.time!r})\n")
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                fh.write(f"{x:.12e} {y:.12e} {plane[i, j]:.12e}\n")
            fh.write("\n")


def file_checksum(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, payload: Mapping) -> None:
    """Deterministic run manifest: sorted keys, fixed float formatting."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, Fraction):
        return str(value)
    raise TypeError(f"cannot serialize {type(value)!r}")
