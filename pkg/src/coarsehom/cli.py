"""Command line: ``coarsehom compute|verify|rips|discretize``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import CapExceeded
from .io import dump_json, load_space
from .linalg import Ring
from .maps import discretize
from .pipeline import GateRejected, PipelineConfig, compute_coarsified
from .rips import build_rips
from .suite import SuiteConfig, load_suite, verify_suite

log = logging.getLogger("coarsehom")


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _spec_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _pipeline_config(args, extra: dict) -> PipelineConfig:
    # command-line flags override a "pipeline" block inside the example file
    pick = lambda flag, key, default: flag if flag is not None else extra.get(key, default)
    seeds = args.seeds if args.seeds is not None else tuple(extra.get("seeds", (None, 1)))
    return PipelineConfig(level=pick(args.level, "level", 1), windows=tuple(pick(args.windows, "windows", (6, 9, 12))),
                          collar=pick(args.collar, "collar", None), sep=pick(args.sep, "sep", 0), seeds=seeds,
                          top=pick(args.top, "top", 2), oracle=args.oracle, equivariant=args.equivariant)


def cmd_compute(args) -> int:
    X, act = load_space(args.spec)
    cfg = _pipeline_config(args, _spec_json(args.spec).get("pipeline", {}))
    try:
        rep = compute_coarsified(X, Ring.parse(args.ring), args.kind, cfg, act if args.equivariant else None)
    except GateRejected as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return 2
    text = rep.dumps()
    if args.out:
        Path(args.out).write_text(text + "\n")
        Path(args.out).with_suffix(".csv").write_text(rep.to_csv())
    else:
        print(text)
    if rep.partial:
        log.warning("partial report: %s", rep.notes[0])
    return 0


def cmd_verify(args) -> int:
    cfg, corpus = load_suite(args.suite)
    if args.axioms:
        cfg = SuiteConfig(**{**cfg.__dict__, "axioms": tuple(args.axioms.split(","))})
    rep = verify_suite(cfg, corpus)
    text = json.dumps(rep.to_json(), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    for axiom, counts in rep.summary().items():
        print(f"{axiom}: {counts['pass']} pass, {counts['fail']} fail, {counts['inconclusive']} inconclusive")
    for row in rep.failures:
        print(f"FAIL {row['axiom']} {row['item']}: {json.dumps(row['witness'], sort_keys=True)[:300]}")
    return 0 if rep.ok else 1


def cmd_rips(args) -> int:
    X, _ = load_space(args.spec)
    try:
        K = build_rips(X, None, args.level, max_dim=args.max_dim)
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return 3
    text = K.export(args.export)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_discretize(args) -> int:
    X, act = load_space(args.spec)
    if args.equivariant and act is None:
        print("the example names no action", file=sys.stderr)
        return 2
    d = discretize(X, args.sep, act if args.equivariant else None, seed=args.seed)
    lab = lambda x: list(X.labels[x]) if isinstance(X.labels[x], tuple) else X.labels[x]
    # the projection lands in the subspace table, whose k-th point is d.points[k]
    out = {"space": X.name, "sep_level": d.sep_level, "density_level": d.density_level,
           "equivariant": bool(args.equivariant), "points": [lab(x) for x in d.points],
           "projection": [[lab(x), lab(d.points[d.projection.assignment[x]])] for x in range(X.size)],
           "enlarged": [lab(x) for x in d.enlarged]}
    text = dump_json(out, args.out)
    if not args.out:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coarsehom", description="Coarse (co)homology of finite metric windows.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="coarsified (co)homology through a window or level tower")
    c.add_argument("--spec", required=True)
    c.add_argument("--ring", default="Z", help="Z, Q or Z/p")
    c.add_argument("--kind", default="homology", choices=["homology", "cohomology", "chain", "cochain"])
    c.add_argument("--out", help="JSON report path; a CSV summary is written next to it")
    c.add_argument("--level", type=int)
    c.add_argument("--windows", type=_ints, help="comma separated radii, e.g. 6,9,12")
    c.add_argument("--collar", type=int)
    c.add_argument("--sep", type=int)
    c.add_argument("--top", type=int)
    c.add_argument("--seeds", type=lambda t: tuple(None if s == "none" else int(s) for s in t.split(",")))
    c.add_argument("--oracle", action="store_true", help="cross-check against the ordered-tuple complex")
    c.add_argument("--equivariant", action="store_true")
    c.set_defaults(func=cmd_compute)

    v = sub.add_parser("verify", help="run the axiom suites; exit 1 on any failure")
    v.add_argument("--suite", help="suite JSON (default: the bundled corpus)")
    v.add_argument("--axioms", help="comma separated subset of axioms")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rips", help="export a Rips complex")
    r.add_argument("--spec", required=True)
    r.add_argument("--level", type=int, default=1)
    r.add_argument("--export", default="off", choices=["off", "dot", "json"])
    r.add_argument("--max-dim", type=int, default=2)
    r.add_argument("--out")
    r.set_defaults(func=cmd_rips)

    d = sub.add_parser("discretize", help="separated net and nearest-point projection")
    d.add_argument("--spec", required=True)
    d.add_argument("--sep", type=int, default=1)
    d.add_argument("--seed", type=int)
    d.add_argument("--equivariant", action="store_true")
    d.add_argument("--out")
    d.set_defaults(func=cmd_discretize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
