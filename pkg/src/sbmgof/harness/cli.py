"""Command-line interface.

Exit status: 0 on success, 2 for invalid parameters, 3 for I/O and input
format errors, 4 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import EdgeListParseError, NumericError, ParameterError
from ..gof import bootstrap_corrected_test, gof_test
from ..netgen import Membership, largest_connected_component, read_edge_list, read_labels, write_edge_list, write_membership
from ..rng import SeededRng
from ..select import PowerLawThreshold, QuantileThreshold, estimate_k
from .config import ExperimentSpec, ModelConfig, load_json
from .experiments import run_experiment, run_real_data

EXIT_OK, EXIT_PARAM, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

SIMULATIONS = {"null-dist": "null-dist", "errors": "error-table", "select-k": "select-k"}


def _emit(args, doc: dict) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    if args.json or not getattr(args, "out", None):
        print(text)


def _load_graph(args):
    graph = read_edge_list(args.edges, indexing=args.indexing)
    index = np.arange(graph.n)
    if args.lcc:
        graph, index = largest_connected_component(graph)
    return graph, index


def _labels_for(args, n_full: int, index: np.ndarray) -> Membership | None:
    if not args.labels:
        return None
    tokens = read_labels(args.labels)
    if len(tokens) == n_full:
        tokens = [tokens[k] for k in index]
    elif len(tokens) != index.size:
        raise ParameterError(f"label file has {len(tokens)} labels for a graph with {index.size} nodes")
    return Membership.from_labels(tokens)


def cmd_gen(args) -> int:
    doc = load_json(args.config) if args.config else {}
    for key in ("model", "n", "K", "r", "within", "between", "membership", "psi_dist", "seed"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            doc[key] = val
    if args.B is not None:
        doc["B"] = json.loads(args.B)
    if args.dirichlet is not None:
        doc["alpha"] = args.dirichlet
    cfg = ModelConfig.from_dict(doc)
    graph, truth = cfg.generate(SeededRng(cfg.seed))
    write_edge_list(graph, args.out, indexing=args.indexing)
    if args.labels_out and "membership" in truth:
        write_membership(truth["membership"], args.labels_out)
    summary = {"n": graph.n, "edges": graph.n_edges, "model": cfg.model, "K": cfg.K, "seed": cfg.seed, "out": args.out}
    if args.json:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_test(args) -> int:
    full = read_edge_list(args.edges, indexing=args.indexing)
    graph, index = (largest_connected_component(full) if args.lcc else (full, np.arange(full.n)))
    ghat = _labels_for(args, full.n, index)
    rng = SeededRng(args.seed)
    if args.bootstrap:
        res = bootstrap_corrected_test(graph, args.k0, args.alpha, args.bootstrap, ghat=ghat, rng=rng)
    else:
        res = gof_test(graph, args.k0, args.alpha, ghat=ghat, rng=rng)
    _emit(args, res.to_dict())
    return EXIT_OK


def cmd_estimate_k(args) -> int:
    graph, _ = _load_graph(args)
    if args.power_law:
        mode = PowerLawThreshold(*args.power_law)
    else:
        mode = QuantileThreshold(args.alpha)
    res = estimate_k(
        graph,
        mode,
        k_max=args.kmax,
        bootstrap=not args.no_bootstrap,
        M=args.bootstrap or 50,
        rng=SeededRng(args.seed),
    )
    doc = res.to_dict()
    doc["membership"] = res.membership.labels.tolist()
    _emit(args, doc)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_json(args.config) if args.config else {}
    doc["kind"] = SIMULATIONS[args.experiment]
    overrides = {
        "preset": args.preset,
        "reps": args.reps,
        "seed": args.seed,
        "n": args.n,
        "alpha": args.alpha,
        "k_max": args.kmax,
        "workers": args.workers,
        "out": args.out,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.k0:
        doc["K0"] = args.k0
    if args.bootstrap:
        doc["M"] = args.bootstrap
    if args.plain_only:
        doc["modes"] = ["plain"]
    spec = ExperimentSpec.from_dict(doc)
    if spec.out is None:
        raise ParameterError("simulate needs --out (directory for CSV outputs)")
    result = run_experiment(spec)
    summary = {"experiment": spec.kind, "files": [str(p) for p in result.files]}
    for name in ("error_table", "select_k_table"):
        if name in result.tables:
            summary[name] = result.tables[name]
    print(json.dumps(summary, indent=2) if args.json else "\n".join(summary["files"]))
    return EXIT_OK


def cmd_real_data(args) -> int:
    report = run_real_data(
        args.edges,
        labels=args.labels,
        K0=args.k0,
        alpha=args.alpha,
        bootstrap=args.bootstrap,
        seed=args.seed,
        indexing=args.indexing,
        sequential_alpha=args.sequential_alpha,
        k_max=args.kmax,
    )
    _emit(args, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmgof", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p, alpha=0.05):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output file (directory for simulate)")
        p.add_argument("--json", action="store_true", help="print the JSON result to stdout")
        p.add_argument("--alpha", type=float, default=alpha)

    def graph_input(p):
        p.add_argument("edges", help="edge-list file")
        p.add_argument("--indexing", type=int, choices=(0, 1), default=0)
        p.add_argument("--lcc", action="store_true", help="restrict to the largest connected component")

    def bootstrap_flag(p):
        p.add_argument("--bootstrap", type=int, nargs="?", const=50, default=None, metavar="M",
                       help="use the bootstrap correction with M replicates (default 50)")

    p = sub.add_parser("gen", help="generate a random graph and write it as an edge list")
    p.add_argument("--config", help="JSON model document")
    p.add_argument("--model", choices=("sbm", "dcbm", "mmbm"))
    p.add_argument("--n", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--B", help="block matrix as a JSON nested list")
    p.add_argument("--r", type=float)
    p.add_argument("--within", type=float)
    p.add_argument("--between", type=float)
    p.add_argument("--membership", choices=("iid", "balanced"))
    p.add_argument("--psi-dist", dest="psi_dist", choices=("uniform", "ones"))
    p.add_argument("--dirichlet", type=float, help="Dirichlet parameter for mmbm rows")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--labels-out")
    p.add_argument("--indexing", type=int, choices=(0, 1), default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("test", help="goodness-of-fit test of H0: K = K0")
    graph_input(p)
    shared(p)
    bootstrap_flag(p)
    p.add_argument("--k0", type=int, required=True)
    p.add_argument("--labels", help="label file used as the estimated membership")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("estimate-k", help="sequential-testing estimate of K")
    graph_input(p)
    shared(p, alpha=1e-4)
    bootstrap_flag(p)
    p.add_argument("--no-bootstrap", action="store_true")
    p.add_argument("--kmax", type=int)
    p.add_argument("--power-law", type=float, nargs=2, metavar=("C", "EPS"),
                   help="threshold C * n**EPS instead of a TW quantile")
    p.set_defaults(func=cmd_estimate_k)

    p = sub.add_parser("simulate", help="run a simulation experiment")
    p.add_argument("experiment", choices=tuple(SIMULATIONS))
    p.add_argument("--config", help="JSON experiment spec")
    p.add_argument("--preset", choices=("paper", "smoke"))
    p.add_argument("--reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--k0", type=int, nargs="+")
    p.add_argument("--kmax", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--plain-only", action="store_true")
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    bootstrap_flag(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("real-data", help="test a real network on its largest connected component")
    p.add_argument("edges")
    p.add_argument("--indexing", type=int, choices=(0, 1), default=0)
    p.add_argument("--labels")
    p.add_argument("--k0", type=int, default=2)
    p.add_argument("--kmax", type=int)
    p.add_argument("--sequential-alpha", type=float)
    shared(p)
    bootstrap_flag(p)
    p.set_defaults(func=cmd_real_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EdgeListParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
