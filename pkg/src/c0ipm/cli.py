"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 acceptance-gate failure.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter

from .config import PRESETS, ProblemSpec, parse_config
from .errors import C0IPMError, ParseError, ParameterError, SpecificationError, ConstraintConflictError
from .mesh import apply_boundary_spec, build_connectivity, read_mesh

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_GATE = 0, 1, 2, 3

_USAGE_ERRORS = (ParseError, ParameterError, SpecificationError, ConstraintConflictError)


def _report(result, stream):
    for line in result.lines:
        print(line, file=stream)
    for path in result.files:
        print(f"wrote {path}", file=stream)
    return EXIT_OK if result.passed else EXIT_GATE


def _run(name, spec, stream):
    from .presets import run_preset
    return _report(run_preset(name, spec), stream)


def cmd_run(args, stream):
    spec = parse_config(args.config)
    return _run(spec.preset, spec, stream)


def cmd_preset(args, stream):
    spec = ProblemSpec(preset=args.name).with_(p=args.p, levels=args.levels, out=args.out)
    if args.alpha is not None:
        spec = spec.with_(alpha=args.alpha)
    spec = spec.with_(deterministic=args.deterministic or None)
    return _run(args.name, spec, stream)


def cmd_beta_estimate(args, stream):
    from .presets import beta_estimate
    spec = parse_config(args.config)
    result = beta_estimate(spec)
    print(result.flags["estimate"].csv_line(), file=stream)
    return EXIT_OK


def cmd_mesh_info(args, stream):
    mesh = read_mesh(args.file)
    faces, edges = build_connectivity(mesh)
    print(f"dimension {mesh.n_sd}", file=stream)
    print(f"shape {mesh.shape} degree {mesh.degree}", file=stream)
    print(f"nodes {mesh.n_nodes} elements {mesh.n_elements}", file=stream)
    print(f"faces interior {len(faces.interior)} boundary {len(faces.boundary)}", file=stream)
    counts = Counter(edges.classification.tolist())
    kind = "vertices" if mesh.n_sd == 2 else "edges"
    print(f"{kind} " + " ".join(f"{k}={counts[k]}" for k in sorted(counts)), file=stream)
    lo, hi = mesh.bounding_box()
    print("bounding box " + " ".join(f"[{float(a)!r}, {float(b)!r}]" for a, b in zip(lo, hi)), file=stream)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="c0ipm", description="C0 interior penalty solver for "
                                     "flexoelectricity and strain gradient elasticity")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the preset named in a configuration file")
    run.add_argument("--config", required=True)
    run.set_defaults(func=cmd_run)

    pre = sub.add_parser("preset", help="run a named experiment")
    pre.add_argument("name", choices=PRESETS)
    pre.add_argument("--p", type=int)
    pre.add_argument("--levels", type=int)
    pre.add_argument("--alpha", type=float)
    pre.add_argument("--out", default=".")
    pre.add_argument("--deterministic", action="store_true")
    pre.set_defaults(func=cmd_preset)

    est = sub.add_parser("beta-estimate", help="print lambda_max,alpha_equivalent,beta")
    est.add_argument("--config", required=True)
    est.set_defaults(func=cmd_beta_estimate)

    info = sub.add_parser("mesh-info", help="summarize a mesh file")
    info.add_argument("file")
    info.set_defaults(func=cmd_mesh_info)
    return parser


def main(argv=None, stream=None):
    stream = stream or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args, stream)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (C0IPMError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
