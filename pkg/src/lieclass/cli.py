"""Command-line front end.

Subcommands::

    classify   system JSON -> classification report (JSON + text summary)
    construct  case spec JSON -> system fixture + expected report
    verify     system + generators -> determining-equation residual table
    transform  system JSON -> trace-normalized or point-changed system
    solve      {A, B, Q} or {commutant: A} -> Sylvester / commutant solution

Exit status: 0 on success (including "no symmetry"), 1 for a rejected case
spec, 2 for unreadable or malformed input, 3 for numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _linalg as la
from .classify import classify_system
from .construct import CaseSpec, RoundTripError, SpecRejected, build_system, corpus_dir, fixture_document, write_corpus
from .detsolve import AmbiguousRankError, Generator, max_residual
from .io import SCHEMA, SchemaError, dumps, matrix_from_json, matrix_to_json
from .matcore import IntegrationError, Tolerance, commutant_basis, conj_exp, solve_matrix_ode, solve_sylvester
from .mfun import ConjugatedExponential, Sampled, chebyshev_grid
from .transform import (CanonicalSystem, DomainError, PointChange, RawSystem, apply_point_change,
                        remove_first_derivative, remove_inhomogeneity, system_from_json, system_to_json,
                        trace_normalize)

EXIT_OK, EXIT_REJECTED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    input: str | None
    out: str | None
    mode: str
    tol: Tolerance
    interval: tuple[float, float] | None
    grid: int

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "input": self.input,
            "out": self.out,
            "mode": self.mode,
            "tol_abs": self.tol.abs,
            "tol_rel": self.tol.rel,
            "interval": list(self.interval) if self.interval else None,
            "grid": self.grid,
        }


def _interval(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'a,b'") from None
    if not a < b:
        raise argparse.ArgumentTypeError("interval must satisfy a < b")
    return a, b


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _grid(text: str) -> int:
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("grid needs at least 2 points")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=("auto", "exact", "float"), default="auto",
                        help="scalar kind used when reading matrices (default: as written)")
    common.add_argument("--tol-abs", type=_positive, default=1e-9)
    common.add_argument("--tol-rel", type=_positive, default=1e-9)
    common.add_argument("--interval", type=_interval, default=None, help="working interval 'a,b'")
    common.add_argument("--grid", type=_grid, default=101, help="sample-grid size for residual checks")
    common.add_argument("--out", default=None, help="output path (directory for construct)")

    p = argparse.ArgumentParser(prog="lieclass", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("classify", parents=[common], help="classify a system")
    c.add_argument("input")
    c = sub.add_parser("construct", parents=[common], help="build a fixture from a case spec")
    c.add_argument("input", nargs="?", help="case spec JSON (omit with --defaults)")
    c.add_argument("--defaults", action="store_true", help="write the built-in fixture corpus")
    c = sub.add_parser("verify", parents=[common], help="residuals of candidate generators")
    c.add_argument("input")
    c.add_argument("--oracle", action="store_true", help="compare conj_exp with the matrix-ODE integrator")
    c = sub.add_parser("transform", parents=[common], help="trace-normalize or change variables")
    c.add_argument("input")
    c.add_argument("--op", choices=("trace-normalize", "point-change", "canonical"), default="trace-normalize")
    c.add_argument("--change", choices=("identity", "involution", "mobius", "shift", "scale", "log"),
                   default="identity")
    c.add_argument("--param", type=float, default=0.0)
    c = sub.add_parser("solve", parents=[common], help="Sylvester equation or commutant")
    c.add_argument("input")
    return p


def _config(args) -> RunConfig:
    return RunConfig(args.command, getattr(args, "input", None), args.out, args.mode,
                     Tolerance(args.tol_abs, args.tol_rel), args.interval, args.grid)


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("$", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _emit(cfg: RunConfig, doc: dict, text: str | None = None) -> None:
    body = dumps(doc)
    if cfg.out:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(body)
        if text is not None:
            Path(cfg.out).with_suffix(".txt").write_text(text)
            sys.stdout.write(text)
    else:
        sys.stdout.write(body)
        if text is not None:
            sys.stderr.write(text)


def _load_system(cfg: RunConfig, data) -> CanonicalSystem:
    if isinstance(data, dict) and "system" in data and "m" not in data:
        data = data["system"]
    sysobj = system_from_json(data, cfg.mode, cfg.interval)
    if isinstance(sysobj, RawSystem):
        sysobj = remove_first_derivative(remove_inhomogeneity(sysobj))
    return sysobj


def cmd_classify(cfg: RunConfig) -> int:
    sysobj = _load_system(cfg, _read_json(cfg.input))
    report = classify_system(sysobj, cfg.tol, config=cfg.to_json())
    _emit(cfg, report.to_json(), report.to_text())
    return EXIT_OK


def cmd_construct(cfg: RunConfig, defaults: bool) -> int:
    if defaults:
        paths = write_corpus(cfg.out, tol=cfg.tol)
        for p in paths:
            print(p)
        return EXIT_OK
    if cfg.input is None:
        raise SchemaError("$", "a case spec file is required (or --defaults)")
    spec = CaseSpec.from_json(_read_json(cfg.input), cfg.mode)
    try:
        built = build_system(spec, cfg.tol, interval=cfg.interval or (-1.0, 1.0))
    except SpecRejected as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_REJECTED
    name = Path(cfg.input).stem
    out_dir = corpus_dir(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = fixture_document(name, built)
    doc["config"] = cfg.to_json()
    path = out_dir / f"{name}.json"
    path.write_text(dumps(doc))
    print(path)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, oracle: bool) -> int:
    data = _read_json(cfg.input)
    if not isinstance(data, dict) or "system" not in data:
        raise SchemaError("$", "expected {'system': ..., 'generators': [...]}")
    sysobj = _load_system(cfg, data["system"])
    gens = [Generator.from_json(g, cfg.mode, f"$.generators[{i}]") for i, g in enumerate(data.get("generators", []))]
    iv = cfg.interval or sysobj.interval
    xs = chebyshev_grid(iv, cfg.grid)
    if sysobj.C.exact and cfg.mode != "float":
        # rational grid points keep the residual exact
        xs = [Fraction(float(x)) for x in xs]
    rows = []
    for i, g in enumerate(gens):
        if g.m != sysobj.m:
            raise SchemaError(f"$.generators[{i}].A", f"expected {sysobj.m}x{sysobj.m}")
        r = max_residual(sysobj.C, g, xs)
        rows.append({"generator": i, "k": g.to_json()["k"], "max_residual": r,
                     "admitted": r <= cfg.tol.abs + cfg.tol.rel * max(1.0, la.max_abs(g.A))})
    doc = {"schema": SCHEMA, "config": cfg.to_json(), "residuals": rows}
    lines = [f"g{r['generator'] + 1}  k={r['k']}  max residual {r['max_residual']:.3e}  "
             f"{'admitted' if r['admitted'] else 'NOT admitted'}" for r in rows]
    if oracle:
        C = sysobj.C
        if not isinstance(C, ConjugatedExponential):
            raise SchemaError("$.system.C", "oracle mode needs a conj_exp matrix function")
        A = la.as_float(C.A)
        pts = [float(x) for x in xs if x >= 0] or [float(iv[1])]
        dev = max(la.max_abs(solve_matrix_ode(A, -A, C.C0, x) - conj_exp(A, la.as_float(C.C0), x)) for x in pts)
        doc["oracle"] = {"max_deviation": dev, "points": len(pts)}
        lines.append(f"conj_exp vs matrix-ODE integrator: max deviation {dev:.3e}")
    _emit(cfg, doc, "\n".join(lines) + "\n")
    return EXIT_OK


def _change(name: str, a: float) -> PointChange:
    return {
        "identity": PointChange.identity,
        "involution": PointChange.involution,
        "mobius": lambda: PointChange.mobius(a),
        "shift": lambda: PointChange.shift(a),
        "scale": lambda: PointChange.scale(a),
        "log": PointChange.log_change,
    }[name]()


def _sampled_system_json(m: int, F, interval, grid: int) -> dict:
    xs = chebyshev_grid(interval, grid)
    return {"m": m, "C": {"type": "samples", "xs": [float(x) for x in xs],
                          "values": [matrix_to_json(F(x)) for x in xs]},
            "interval": list(interval)}


def cmd_transform(cfg: RunConfig, op: str, change: str, param: float) -> int:
    data = _read_json(cfg.input)
    raw = system_from_json(data, cfg.mode, cfg.interval)
    if isinstance(raw, RawSystem):
        sysobj = remove_first_derivative(remove_inhomogeneity(raw))
    else:
        sysobj = raw
    info: dict = {}
    if op == "canonical":
        F = sysobj.C
    elif op == "trace-normalize":
        out, chg = trace_normalize(sysobj, tol=cfg.tol)
        F = out.C
        info = {"change": chg.name, "params": chg.params}
    else:
        chg = _change(change, param)
        F = apply_point_change(sysobj.C, chg, cfg.interval or sysobj.interval, cfg.tol)
        info = {"change": chg.name, "params": chg.params}
    iv = getattr(F, "bounds", None) or cfg.interval or sysobj.interval
    body = (_sampled_system_json(sysobj.m, F, iv, cfg.grid) if isinstance(F, Sampled)
            else system_to_json(CanonicalSystem(sysobj.m, F, interval=tuple(iv))))
    doc = {"schema": SCHEMA, "config": cfg.to_json(), "transform": info, **body}
    _emit(cfg, doc)
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    data = _read_json(cfg.input)
    if not isinstance(data, dict):
        raise SchemaError("$", "expected an object")
    doc: dict = {"schema": SCHEMA, "config": cfg.to_json()}
    if "commutant" in data:
        A = matrix_from_json(data["commutant"], cfg.mode, "$.commutant")
        doc["commutant_basis"] = [matrix_to_json(X) for X in commutant_basis(A)]
    else:
        for key in ("A", "B", "Q"):
            if key not in data:
                raise SchemaError(f"$.{key}", "missing field")
        A, B, Q = (matrix_from_json(data[k], cfg.mode, f"$.{k}") for k in ("A", "B", "Q"))
        sol = solve_sylvester(A, B, Q)
        doc["feasible"] = sol.feasible
        doc["particular"] = matrix_to_json(sol.particular) if sol.feasible else None
        doc["homogeneous"] = [matrix_to_json(X) for X in sol.homogeneous]
    _emit(cfg, doc)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "construct":
            return cmd_construct(cfg, args.defaults)
        if args.command == "verify":
            return cmd_verify(cfg, args.oracle)
        if args.command == "transform":
            return cmd_transform(cfg, args.op, args.change, args.param)
        return cmd_solve(cfg)
    except SchemaError as exc:
        sys.stderr.write(f"schema error: {exc}\n")
        return EXIT_INPUT
    except (IntegrationError, DomainError, AmbiguousRankError, RoundTripError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
