"""Command-line interface: verification suites, symbolic calculators, grid runs.

Exit codes: 0 all checks pass, 1 identity failure, 2 input error,
3 numerical abort.  Reports are deterministic and byte-stable for fixed
inputs (sorted keys, fixed float formatting).
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .covariant import christoffel, jacobian_symplectic
from .errors import FlowDivergenceError, NumericalAbortError, ParseError, PhaseStarError
from .grids import (
    BracketOperator,
    GridAxis,
    GridSpec,
    GridState,
    file_checksum,
    normalize_check,
    sample,
    save_snapshot,
    step_rk4,
    write_gnuplot_slice,
    write_manifest,
)
from .moyal import moyal_bracket, star
from .parametrized import (
    ExtendedSystem,
    causal_map,
    fixture_coupled_particles,
    parametrize,
    quantum_histories,
)
from .symbols import PhaseSpace, Symbol, parse_expression, text_form
from .verify import SUITES, run_suites

FIXTURES = ("coupled",)


def _float_repr(x: float) -> str:
    return f"{x:.12e}"


def load_system_file(path: Path) -> ExtendedSystem:
    """Minimal key-value system definition: positions, momenta, h0, params."""
    data: dict[str, str] = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"malformed system line {line!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = value.strip()
    try:
        positions = [c.strip() for c in data["positions"].split(",") if c.strip()]
        momenta = [c.strip() for c in data["momenta"].split(",") if c.strip()]
        h0_text = data["h0"]
    except KeyError as exc:
        raise ParseError(f"system file misses key {exc}") from None
    space = PhaseSpace.blocked(positions, momenta)
    h0 = parse_expression(h0_text, space)
    sys_ = parametrize(h0)
    if "params" in data:
        values = {}
        for piece in data["params"].split(","):
            piece = piece.strip()
            if not piece:
                continue
            name, _, value = piece.partition("=")
            if value:
                values[name.strip()] = Fraction(value.strip())
        if values:
            sys_.param_values = values or None
    return sys_


def system_from_inline(text: str) -> ExtendedSystem:
    """Inline form `h0=<expr>`; q*/p* names are paired by suffix."""
    if not text.startswith("h0="):
        raise ParseError("inline systems use the form h0=<expression>")
    expr = text[3:]
    names = sorted(set(re.findall(r"[A-Za-z_][A-Za-z_0-9]*", expr)))
    suffixes = sorted(
        {n[1:] for n in names if re.fullmatch(r"[qp]\d*", n)},
        key=lambda s: (len(s), s),
    )
    if not suffixes:
        raise ParseError("inline h0 names no q*/p* coordinates")
    space = PhaseSpace.blocked([f"q{s}" for s in suffixes], [f"p{s}" for s in suffixes])
    return parametrize(parse_expression(expr, space))


def resolve_system(args) -> ExtendedSystem:
    if getattr(args, "fixture", None):
        if args.fixture != "coupled":
            raise ParseError(f"unknown fixture {args.fixture!r}")
        return fixture_coupled_particles()
    if getattr(args, "system", None):
        if "=" in args.system and not Path(args.system).exists():
            return system_from_inline(args.system)
        return load_system_file(Path(args.system))
    raise ParseError("give --fixture or --system")


def _emit_report(rows, as_json: bool) -> int:
    ok = all(r.passed for r in rows)
    if as_json:
        payload = {
            "checks": [r.as_dict() for r in rows],
            "failed": sum(0 if r.passed else 1 for r in rows),
            "passed": sum(1 if r.passed else 0 for r in rows),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for r in rows:
            status = "pass" if r.passed else "FAIL"
            line = f"[{status}] {r.id}"
            if not r.passed:
                line += f"  residual: {r.residual}"
            print(line)
        print(f"{sum(r.passed for r in rows)}/{len(rows)} checks passed")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    sys_ = resolve_system(args)
    rows = run_suites(sys_, args.suite, pairs=args.pairs)
    return _emit_report(rows, args.json)


def _expression_space(args) -> PhaseSpace:
    if getattr(args, "fixture", None) or getattr(args, "system", None):
        return resolve_system(args).extended_space
    if args.space:
        names = [c.strip() for c in args.space.split(",") if c.strip()]
        half = len(names) // 2
        return PhaseSpace.blocked(names[:half], names[half:])
    return PhaseSpace.blocked(("q1",), ("p1",))


def cmd_star(args) -> int:
    space = _expression_space(args)
    bindings = None
    if getattr(args, "fixture", None):
        bindings = quantum_histories(resolve_system(args))
    syms = []
    for text in (args.a, args.b):
        if bindings and text in bindings:
            syms.append(bindings[text])
        else:
            syms.append(parse_expression(text, space))
    op = moyal_bracket if args.bracket else star
    print(text_form(op(syms[0], syms[1])))
    return 0


def cmd_christoffel(args) -> int:
    if getattr(args, "map", None):
        sys_ = load_system_file(Path(args.map))
    else:
        sys_ = resolve_system(args)
    T = causal_map(sys_)
    gamma = christoffel(T)
    names = sys_.extended_space.coords
    entries = gamma.nonzero_entries()
    if args.json:
        payload = {
            "entries": [
                {"upper": names[i], "lower": [names[j], names[k]], "value": text_form(v)}
                for (i, j, k), v in entries
            ],
            "symplectic_canonical": jacobian_symplectic(T).is_canonical(),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for (i, j, k), v in entries:
            print(f"Gamma[{names[i]}][{names[j]},{names[k]}] = {text_form(v)}")
    return 0


def cmd_histories(args) -> int:
    sys_ = resolve_system(args)
    try:
        hist = quantum_histories(sys_)
    except FlowDivergenceError as exc:
        print(json.dumps({"error": str(exc), "kind": "non-terminating-flow"},
                         sort_keys=True))
        return 2
    rows = run_suites(sys_, "algebra")
    payload = {
        "histories": {name: text_form(sym) for name, sym in sorted(hist.items())},
        "constraint": text_form(sys_.constraint),
        "checks": [r.as_dict() for r in rows],
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0 if all(r.passed for r in rows) else 1


def cmd_causal_map(args) -> int:
    sys_ = resolve_system(args)
    T = causal_map(sys_)
    payload = {
        "forward": {name: text_form(sym) for name, sym in sorted(T.forward.items())},
        "inverse": {name: text_form(sym) for name, sym in sorted(T.inverse.items())},
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _grid_from_config(cfg) -> GridSpec:
    axes = tuple(
        GridAxis(ax["name"], float(ax["lo"]), float(ax["hi"]), int(ax["points"]))
        for ax in cfg["axes"]
    )
    return GridSpec(axes, cfg.get("boundary", "periodic"), cfg.get("scheme", "spectral"))


def _initial_state(cfg, spec: GridSpec) -> GridState:
    kind = cfg.get("type", "gaussian")
    if kind != "gaussian":
        raise ParseError(f"unknown initial condition {kind!r}")
    centers = cfg.get("centers", {})
    widths = cfg.get("widths", {})

    def profile(*meshes):
        expo = 0.0
        for k, ax in enumerate(spec.axes):
            c = float(centers.get(ax.name, 0.0))
            w = float(widths.get(ax.name, 1.0))
            expo = expo + ((meshes[k] - c) / w) ** 2
        return np.exp(-expo)

    state = sample(spec, profile)
    norm = normalize_check(state)
    return state.with_values(state.values / norm)


def cmd_evolve(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    out_dir = Path(args.out or "evolve-out")
    out_dir.mkdir(parents=True, exist_ok=True)
    system_cfg = cfg.get("system", "coupled")
    if system_cfg == "coupled":
        sys_ = fixture_coupled_particles()
    elif isinstance(system_cfg, dict):
        space = PhaseSpace.blocked(tuple(system_cfg["positions"]), tuple(system_cfg["momenta"]))
        sys_ = parametrize(parse_expression(system_cfg["h0"], space))
    else:
        sys_ = load_system_file(Path(system_cfg))
    params = {k: float(v) for k, v in cfg.get("params", {}).items()}
    hbar = float(args.hbar if args.hbar is not None else cfg.get("hbar", 1.0))
    evolution = cfg.get("evolution", "liouville")
    if evolution not in ("moyal", "liouville"):
        raise ParseError(f"unknown evolution {evolution!r}")
    spec = _grid_from_config(cfg["grid"])
    state = _initial_state(cfg.get("initial", {}), spec)
    op = BracketOperator(sys_.h0, spec, hbar=hbar, quantum=evolution == "moyal",
                         params=params)
    classical_op = BracketOperator(sys_.h0, spec, hbar=hbar, quantum=False, params=params)
    dt = float(cfg["dt"])
    steps = int(cfg["steps"])
    snapshot_every = int(cfg.get("snapshot_every", 0) or 0)
    max_speed = max(float(np.max(np.abs(warr))) for warr, _ in classical_op.terms)
    min_dx = min(spec.spacing(k) for k in range(len(spec.axes)))
    cfl = max_speed * dt / min_dx
    if cfl > 1.0:
        print(f"warning: CFL estimate {cfl:.3f} exceeds 1; advection may be unstable",
              file=sys.stderr)
    norm0 = normalize_check(state)
    snapshots = []

    def snap(tag: str, st: GridState):
        path = out_dir / f"snapshot-{tag}.bin"
        save_snapshot(path, st)
        snapshots.append({"file": path.name, "time": _float_repr(st.time),
                          "sha256": file_checksum(path)})
        if len(spec.axes) >= 2:
            write_gnuplot_slice(out_dir / f"slice-{tag}.dat", st,
                                spec.axes[0].name, spec.axes[1].name)

    snap("000000", state)
    rhs = lambda s: s.with_values(op(s.values))  # noqa: E731
    try:
        for k in range(1, steps + 1):
            state = step_rk4(rhs, state, dt)
            if snapshot_every and k % snapshot_every == 0:
                snap(f"{k:06d}", state)
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    if not snapshot_every or steps % max(snapshot_every, 1) != 0:
        snap(f"{steps:06d}", state)
    norm1 = normalize_check(state)
    correction = None
    if evolution == "moyal":
        diff = op(state.values) - classical_op(state.values)
        denom = float(np.linalg.norm(classical_op(state.values)))
        correction = float(np.linalg.norm(diff)) / denom if denom else 0.0
    summary = {
        "backend": kernels.BACKEND,
        "cfl_estimate": _float_repr(cfl),
        "evolution": evolution,
        "hbar": _float_repr(hbar),
        "normalization_drift": _float_repr(abs(norm1 - norm0)),
        "representation": cfg.get("representation", "schrodinger"),
        "steps": steps,
    }
    if correction is not None:
        summary["relative_quantum_correction"] = _float_repr(correction)
    manifest = {
        "dt": _float_repr(dt),
        "grid": {
            "axes": [
                {"name": ax.name, "lo": _float_repr(ax.lo), "hi": _float_repr(ax.hi),
                 "points": ax.points}
                for ax in spec.axes
            ],
            "boundary": spec.boundary,
            "scheme": spec.scheme,
        },
        "snapshots": snapshots,
        "summary": summary,
    }
    write_manifest(out_dir / "manifest.json", manifest)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasestar",
        description="Star-product verification suites and Wigner-grid runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_system_flags(p):
        p.add_argument("--fixture", choices=FIXTURES, help="built-in demo system")
        p.add_argument("--system", help="system definition file or inline h0=<expr>")

    p = sub.add_parser("verify", help="run identity suites")
    add_system_flags(p)
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p.add_argument("--pairs", type=int, default=20, help="random pairs per covariance map")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    for name, bracket in (("star", False), ("mbracket", True)):
        p = sub.add_parser(name, help=f"print a {'Moyal bracket' if bracket else 'star product'}")
        p.add_argument("a")
        p.add_argument("b")
        add_system_flags(p)
        p.add_argument("--space", help="comma-separated coordinates, positions then momenta")
        p.set_defaults(func=cmd_star, bracket=bracket)

    p = sub.add_parser("christoffel", help="connection table of the system's coordinate change")
    add_system_flags(p)
    p.add_argument("--map", help="system definition file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_christoffel)

    p = sub.add_parser("histories", help="history symbols plus the algebra checklist")
    add_system_flags(p)
    p.set_defaults(func=cmd_histories)

    p = sub.add_parser("causal-map", help="both branches of the coordinate change")
    add_system_flags(p)
    p.set_defaults(func=cmd_causal_map)

    p = sub.add_parser("evolve", help="propagate a gridded quasidistribution")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--hbar", type=float, help="override the config hbar")
    p.set_defaults(func=cmd_evolve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FlowDivergenceError, FileNotFoundError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except PhaseStarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
