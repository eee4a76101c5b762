"""``graphindex`` command-line front end.

Exit codes: 0 when every identity passes, 1 when any identity fails or is
indeterminate, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any, Callable, Sequence

from . import __version__, lab, nls
from .graph import GraphValidationError, build_graph, conditions_to_lagrangian, validate_document
from .hamiltonian import HamiltonianError, SLCoefficients
from .maslov import MaslovError, clm_result_fixed
from .parallel import max_workers
from .spectral import (
    DEFAULT_MESH,
    EPS_KERNEL,
    OperatorFamily,
    SpectralError,
    assemble,
    morse_index,
    spectral_flow,
)
from .symplectic import SymplecticError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_HORIZON = 20.0
DEFAULT_SEEDS = (0, 1, 2)


class ConfigError(ValueError):
    """Invalid flags, configuration file or graph document."""


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _dump_json(doc: dict) -> str:
    return json.dumps(lab._clean(doc), sort_keys=True, indent=2) + "\n"


def _write(path: str | None, text: str) -> None:
    if not path:
        return
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _sibling(path: str, suffix: str) -> str:
    stem = path[:-4] if path.endswith(".csv") else path
    return f"{stem}{suffix}.csv"


def _run_info(args) -> dict:
    info = {"command": args.command, "seed": getattr(args, "seed", None),
            "seeds": list(_seeds(args)), "version": __version__}
    for key in ("m", "d", "mA", "mB", "mesh_n", "horizon", "eps_kernel", "graph", "p", "mass"):
        val = getattr(args, key, None)
        if val is not None:
            info[key] = val
    return info


def _finish_reports(args, reports: list[lab.IndexReport]) -> int:
    for rep in reports:
        for line in rep.lines():
            print(line)
    doc = lab.merge_reports(reports)
    doc["run"] = _run_info(args)
    _write(args.json, _dump_json(doc))
    if args.csv:
        rows = [(r.scenario, i.name, i.lhs, i.rhs, i.status)
                for r in reports for i in r.identities]
        _write(args.csv, _csv_text(["scenario", "identity", "lhs", "rhs", "status"], rows))
    return EXIT_PASS if reports and all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _positive(kind):
    def parse(text: str):
        try:
            val = kind(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"expected a {kind.__name__}, got {text!r}") from exc
        if val <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {text!r}")
        return val
    return parse


def _common(p: argparse.ArgumentParser, graph: bool = True) -> None:
    if graph:
        p.add_argument("--graph", help="graph description document (JSON)")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: batch 0,1,2)")
    p.add_argument("--d", type=_positive(int), default=None, help="fiber dimension")
    p.add_argument("--mesh-n", dest="mesh_n", type=_positive(int), default=None,
                   help=f"elements per unit length (default {DEFAULT_MESH})")
    p.add_argument("--horizon", type=_positive(float), default=None,
                   help=f"half-line truncation (default {DEFAULT_HORIZON:g})")
    p.add_argument("--eps-kernel", dest="eps_kernel", type=_positive(float), default=None,
                   help=f"zero threshold for eigenvalues (default {EPS_KERNEL:g})")
    p.add_argument("--json", help="write the JSON report here ('-' for stdout)")
    p.add_argument("--csv", help="write CSV data here")
    p.add_argument("--config", help="JSON file with default values for these flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphindex",
                                     description="Index theory computations on metric graphs.")
    parser.add_argument("--version", action="version", version=f"graphindex {__version__}")
    sub = parser.add_subparsers(dest="group", required=True)

    g = sub.add_parser("graph", help="graph documents").add_subparsers(dest="action",
                                                                         required=True)
    v = g.add_parser("validate", help="check a graph document")
    v.add_argument("file", nargs="?", help="graph document (or use --graph)")
    _common(v)

    idx = sub.add_parser("index", help="single index computations").add_subparsers(
        dest="action", required=True)
    for name, text in (("morse", "Morse index of the operator with the graph's conditions"),
                       ("maslov", "Maslov index of the conditions against Cauchy data"),
                       ("sf", "spectral flow of s -> L + s C on [0, 1]")):
        _common(idx.add_parser(name, help=text))

    ver = sub.add_parser("verify", help="index identity batches").add_subparsers(
        dest="action", required=True)
    for name in ("morse-theorem", "sf-formula", "morse-difference", "star", "two-star",
                 "reduction"):
        p = ver.add_parser(name, help=f"verify the {name} identities")
        _common(p)
        if name == "star":
            p.add_argument("--m", type=_positive(int), default=None, help="number of leaves")
        if name == "two-star":
            p.add_argument("--mA", dest="mA", type=_positive(int), default=None)
            p.add_argument("--mB", dest="mB", type=_positive(int), default=None)
        if name == "sf-formula":
            p.add_argument("--c", type=_positive(float), default=None,
                           help="strength of C_s = -s c I (default batch 5, 30, 70)")
        if name in ("morse-theorem", "morse-difference"):
            p.add_argument("--omega", type=_positive(float), default=None,
                           help="frequency in units of pi (default: the standard batch)")

    n = sub.add_parser("nls", help="nonlinear Schrodinger waves").add_subparsers(
        dest="action", required=True)
    for name in ("groundstate", "residual"):
        p = n.add_parser(name)
        _common(p)
        p.add_argument("--p", type=float, default=None, help="nonlinearity exponent (default 4)")
        p.add_argument("--mass", type=_positive(float), default=None, help="mass (default 1)")
    return parser


_DEFAULTS = {"mesh_n": DEFAULT_MESH, "horizon": DEFAULT_HORIZON, "eps_kernel": EPS_KERNEL,
             "p": 4.0, "mass": 1.0}


def _apply_config(args) -> None:
    """Fill unset flags from ``--config`` and then from the defaults."""
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise ConfigError(f"unknown config key {key!r}")
            if getattr(args, dest) is None:
                setattr(args, dest, val)
    for key, val in _DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, val)
    for key in ("mesh_n", "horizon", "eps_kernel", "mass", "d", "m", "mA", "mB", "c", "omega"):
        val = getattr(args, key, None)
        if val is not None and (not isinstance(val, (int, float)) or val <= 0):
            raise ConfigError(f"{key} must be positive, got {val!r}")
    args.mesh_n = int(args.mesh_n) if hasattr(args, "mesh_n") else None


def _seeds(args) -> tuple[int, ...]:
    return (args.seed,) if args.seed is not None else DEFAULT_SEEDS


def _load(path: str | None):
    if not path:
        raise ConfigError("this command needs --graph FILE")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read graph document {path}: {exc}") from exc
    g = build_graph(doc)
    return g, SLCoefficients.from_graph(g)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_graph_validate(args) -> int:
    path = args.file or args.graph
    if not path:
        raise ConfigError("graph validate needs a document path")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read graph document {path}: {exc}") from exc
    violations = validate_document(doc)
    report = {"schema": lab.SCHEMA_VERSION, "document": path, "valid": not violations,
              "violations": violations}
    _write(args.json, _dump_json(report))
    if violations:
        for v in violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_USAGE
    g = build_graph(doc)
    print(f"valid: {len(g.vertices)} vertices, {g.m} edges, fiber_dim {g.fiber_dim}, "
          f"{'compact' if g.compact else 'noncompact'}")
    return EXIT_PASS


def _index_report(args, name: str, quantities: dict, g) -> int:
    rep = lab.IndexReport(f"index-{name}", quantities=quantities,
                          tolerances=lab._tolerances(args.eps_kernel, args.mesh_n,
                                                     None if g.compact else args.horizon),
                          provenance={"seed": args.seed or 0, "graph": args.graph})
    doc = rep.to_dict()
    doc["run"] = _run_info(args)
    _write(args.json, _dump_json(doc))
    return EXIT_PASS


def cmd_index_morse(args) -> int:
    g, c = _load(args.graph)
    op = assemble(g, c, conditions_to_lagrangian(g), args.mesh_n, 0.0, args.horizon)
    mr = morse_index(op, args.eps_kernel)
    print(f"iMor = {mr.index}" + (" (indeterminate: eigenvalues near zero)"
                                  if mr.indeterminate else ""))
    if args.csv:
        _write(args.csv, _csv_text(["mesh_n", "index"], list(zip(mr.mesh_sizes, mr.indices))))
    _index_report(args, "morse", {"morse_index": mr.index, "mesh_sizes": list(mr.mesh_sizes),
                                  "indices": list(mr.indices),
                                  "near_zero_eigenvalues": list(mr.near_zero)}, g)
    return EXIT_FAIL if mr.indeterminate else EXIT_PASS


def cmd_index_maslov(args) -> int:
    g, c = _load(args.graph)
    lam = conditions_to_lagrangian(g)
    if g.compact:
        path, kind = lab.conjugate_sweep_path(g, c), "conjugate sweep sigma in [0, 1]"
    else:
        path, kind = lab.cauchy_family_path(g, c, args.horizon), "Cauchy data, s in [0, 1]"
    res = clm_result_fixed(lam, path, seed=args.seed or 0)
    print(f"mu_CLM = {res.value} ({kind})")
    if args.csv:
        _write(args.csv, res.crossing_csv())
    _index_report(args, "maslov", {"mu_clm": res.value, "path": kind,
                                   "crossings": res.crossing_table(),
                                   "perturbed": res.perturbed}, g)
    return EXIT_PASS


def cmd_index_sf(args) -> int:
    g, c = _load(args.graph)
    fam = OperatorFamily(g, c, conditions_to_lagrangian(g), args.mesh_n, args.horizon)
    sf = spectral_flow(fam, eps=args.eps_kernel)
    print(f"sf = {sf.value}")
    if args.csv:
        _write(args.csv, _csv_text(["s", "count_below"], list(zip(sf.grid, sf.counts))))
    _index_report(args, "sf", {"spectral_flow": sf.value,
                               "crossings": [{"s": s, "change": k} for s, k in sf.crossings]},
                  g)
    return EXIT_PASS


def _tasks_verify(args) -> list[Callable[[], Any]]:
    mesh, eps, hor = args.mesh_n, args.eps_kernel, args.horizon
    action = args.action
    if action == "star":
        m = args.m or 3
        d = args.d or 2
        return [lambda s=s: lab.verify_star_formula(m, d, seed=s, mesh_n=mesh, eps=eps)
                for s in _seeds(args)]
    if action == "two-star":
        ma, mb, d = args.mA or 1, args.mB or 1, args.d or 1
        return [lambda s=s: lab.verify_two_star_formula(ma, mb, d, seed=s, mesh_n=mesh, eps=eps)
                for s in _seeds(args)]
    if action == "morse-theorem":
        if args.graph:
            g, c = _load(args.graph)
            return [lambda: lab.verify_morse_index_theorem(g, c, mesh, eps)]
        omegas = [args.omega] if args.omega else [1.3, 2.5, 3.7]
        ds = [args.d] if args.d else [1, 2]
        return [lambda w=w, d=d: lab.verify_segment_morse_theorem(w * math.pi, d, mesh, eps)
                for w in omegas for d in ds]
    if action == "morse-difference":
        omegas = [args.omega] if args.omega else [0.3, 0.7, 1.2]
        d = args.d or 1
        return [lambda w=w, s=s: lab.verify_segment_morse_difference(w * math.pi, d, s, mesh, eps)
                for w in omegas for s in _seeds(args)]
    if action == "sf-formula":
        if args.graph:
            g, c = _load(args.graph)
            return [lambda s=s: lab.verify_spectral_flow_formula(
                g, c, mesh_n=mesh, eps=eps, horizon=hor, seed=s,
                scenario=f"sf-formula-file-seed{s}") for s in _seeds(args)]
        strengths = [args.c] if args.c else [5.0, 30.0, 70.0]
        d = args.d or 1
        tasks = []
        for kind in ("segment", "star3"):
            for cs in strengths:
                for s in _seeds(args):
                    def task(kind=kind, cs=cs, s=s):
                        g, c = lab.sf_family(kind, cs, s, d)
                        return lab.verify_spectral_flow_formula(
                            g, c, mesh_n=mesh, eps=eps, seed=s,
                            scenario=f"sf-formula-{kind}-c{cs:g}-d{d}-seed{s}")
                    tasks.append(task)
        return tasks
    if action == "reduction":
        d = args.d or 1
        return [lambda s=s: lab.verify_reduction(d, s, hor, mesh, eps) for s in _seeds(args)]
    raise ConfigError(f"unknown verification {action!r}")


def cmd_verify(args) -> int:
    return _finish_reports(args, lab.run_batch(_tasks_verify(args)))


def _nls_graph(args):
    if args.graph:
        g, _ = _load(args.graph)
        return g
    return nls.line_graph()


def cmd_nls_groundstate(args) -> int:
    g = _nls_graph(args)
    mesh = nls.graph_mesh(g, args.horizon)
    flow = nls.normalized_gradient_flow(mesh, args.mass, args.p)
    phi = flow.field
    idx = nls.standing_wave_morse_index(phi, flow.omega, args.p, eps=args.eps_kernel)
    e = nls.energy(phi, args.p, flow.tail_rate)
    rep = lab.IndexReport("nls-groundstate")
    rep.quantities = {"omega": flow.omega, "energy": e,
                      "mass": nls.mass(phi, flow.tail_rate), "steps": len(flow.steps),
                      "flow_residual": flow.residual, "converged": flow.converged,
                      "morse_index": idx.unconstrained, "constrained_morse_index": idx.constrained,
                      "mass_direction": idx.mass_direction}
    rep.tolerances = {"horizon": args.horizon, "nodes_per_unit": nls.NODES_PER_UNIT,
                      "eps_kernel": args.eps_kernel}
    rep.provenance = {"seed": args.seed or 0, "graph": args.graph or "line", "p": args.p}
    line = args.graph is None
    if line:
        prof = nls.soliton_profile(args.p, args.mass, args.horizon)
        err = nls.l2_error(phi, prof)
        rep.quantities.update({"soliton_omega": prof.omega, "soliton_energy": prof.energy,
                               "l2_error": err})
        rep.add("flow converged to the line soliton (L2 error <= 1e-3)", int(err <= 1e-3), 1)
        rep.add("linearized Morse index", idx.unconstrained, 1)
    else:
        rep.notes.append("ground state reported descriptively: the constrained minimum "
                         "need not be attained on this graph")
    rep.add("flow converged (1 = yes)", int(flow.converged), 1)
    print(f"omega = {flow.omega:.10g}, energy = {e:.10g}, Morse index = {idx.unconstrained} "
          f"(constrained {idx.constrained})")
    for text in rep.lines():
        print(text)
    doc = rep.to_dict()
    doc["run"] = _run_info(args)
    _write(args.json, _dump_json(doc))
    if args.csv:
        _write(args.csv, _csv_text(["edge", "t", "value"], nls.profile_rows(phi)))
        _write(_sibling(args.csv, "_energy"),
               _csv_text(["step", "energy", "mass", "tau"], flow.trace_rows()))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_nls_residual(args) -> int:
    prof = nls.soliton_profile(args.p, args.mass, args.horizon)
    closed = prof.residual()
    fd = nls.traveling_wave_residual(prof.x, prof.values, -prof.omega, 0.0, p=args.p)
    rep = lab.IndexReport("nls-residual")
    rep.quantities = {"omega": prof.omega, "C_p": prof.C_p, "c_p": prof.c_p,
                      "alpha": prof.alpha, "beta_nls": prof.beta_nls,
                      "residual_closed_form": closed, "residual_finite_difference": fd,
                      "energy": prof.energy, "tail_mass": prof.tail_mass}
    rep.tolerances = {"residual": 1e-6, "truncation": args.horizon}
    rep.provenance = {"seed": args.seed or 0, "p": args.p, "mass": args.mass}
    rep.add("elliptic residual <= 1e-6 (1 = yes)", int(max(closed, fd) <= 1e-6), 1)
    print(f"residual = {max(closed, fd):.3e} (closed form {closed:.3e}, "
          f"finite differences {fd:.3e})")
    for text in rep.lines():
        print(text)
    doc = rep.to_dict()
    doc["run"] = _run_info(args)
    _write(args.json, _dump_json(doc))
    if args.csv:
        _write(args.csv, _csv_text(["x", "phi"], list(zip(prof.x.tolist(),
                                                          prof.values.tolist()))))
    return EXIT_PASS if rep.passed else EXIT_FAIL


_COMMANDS = {
    ("graph", "validate"): cmd_graph_validate,
    ("index", "morse"): cmd_index_morse,
    ("index", "maslov"): cmd_index_maslov,
    ("index", "sf"): cmd_index_sf,
    ("nls", "groundstate"): cmd_nls_groundstate,
    ("nls", "residual"): cmd_nls_residual,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    args.command = f"{args.group} {args.action}"
    try:
        max_workers()
        _apply_config(args)
        handler = cmd_verify if args.group == "verify" else _COMMANDS[(args.group, args.action)]
        return handler(args)
    except GraphValidationError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_USAGE
    except (MaslovError, SpectralError, HamiltonianError, SymplecticError,
            nls.NLSError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
