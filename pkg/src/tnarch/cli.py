"""Command-line interface: ``tnarch {analyze,mincut,simulate,advise,contract}``.

Exit codes: 0 success, 1 invalid input, 2 internal error. Machine-readable
output goes to stdout (or ``--out``), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from . import __version__
from .analysis import (
    InputPartition,
    min_cut,
    modified_min_cut,
    power_rounding_bounds,
    to_analysis_graph,
    EXHAUSTIVE,
    FLOW,
)
from .convac import ConvACSpec, WeightSet, build_tn, forward, load_spec, precise_weights_tensor, random_weights, weights_tensor
from .errors import TnarchError
from .network import contract, from_json, to_json
from .simulation import SimulationConfig, advise, run_simulation
from .tensors import IndexPartition, auto_tolerance, entanglement_measures, matricize, numerical_rank, svd_spectrum


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _count(text: str) -> int | None:
    if text == "all":
        return None
    if text.startswith("sample:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return k
    raise argparse.ArgumentTypeError(f"expected 'all' or 'sample:K' with K >= 1, got {text!r}")


def _load_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _weights(args, spec: ConvACSpec) -> WeightSet:
    if getattr(args, "weights", None):
        w = WeightSet.from_json(_load_json(args.weights))
        w.check(spec)
        return w
    return random_weights(spec, args.seed)


def _emit(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False)


def _partition(args, n: int) -> InputPartition:
    return InputPartition.from_side(args.partition, n)


def cmd_analyze(args) -> int:
    spec = load_spec(args.spec)
    w = _weights(args, spec)
    p = _partition(args, spec.n)
    tensor = precise_weights_tensor(spec, w, args.cls)
    mat = matricize(tensor, IndexPartition(p.A, p.B))
    tol = auto_tolerance(mat.shape) if args.tol is None else args.tol
    spectrum = svd_spectrum(mat)
    report = entanglement_measures(spectrum, tol)
    g = to_analysis_graph(build_tn(spec, w))
    bounds = power_rounding_bounds(g, p)
    out = {
        "spec": spec.to_json(),
        "partition": {"A": list(p.A), "B": list(p.B)},
        "class": args.cls,
        "rank": numerical_rank(spectrum, tol),
        **report.to_dict(),
        "mincut": str(min_cut(g, p).weight),
        "modified_mincut": str(modified_min_cut(g, p).weight),
        "lower_bound": str(max(bounds.values(), default=1)),
    }
    if args.inputs:
        x = np.asarray(_load_json(args.inputs)["x"], dtype=np.float64)
        out["scores"] = forward(spec, w, x).tolist()
    _emit(args, _dump(out))
    return 0


def cmd_mincut(args) -> int:
    if args.tn:
        tn = from_json(_load_json(args.tn))
    elif args.spec:
        spec = load_spec(args.spec)
        tn = build_tn(spec, _weights(args, spec))
    else:
        raise UsageError("mincut needs --spec or --tn")
    g = to_analysis_graph(tn)
    p = _partition(args, g.n_inputs)
    method = EXHAUSTIVE if args.exhaustive else FLOW
    report = modified_min_cut(g, p, method) if args.modified else min_cut(g, p, method)
    out = report.to_json()
    out["modified"] = args.modified
    if args.lower_bound:
        bounds = power_rounding_bounds(g, p)
        out["lower_bound"] = str(max(bounds.values(), default=1))
        out["lower_bound_by_base"] = {str(k): str(v) for k, v in bounds.items()}
    _emit(args, _dump(out))
    return 0


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(
        n=args.n,
        m=args.m,
        dim_pool=tuple(args.dims),
        arrangements=args.arrangements,
        partitions=args.partitions,
        master_seed=args.seed,
        weight_seeds_per_config=args.weight_seeds,
        rank_tol=args.tol,
        workers=args.threads,
        repeat_dims=args.repeat_dims,
    )
    report = run_simulation(cfg)
    if args.json:
        body = _dump({"summary": report.summary, "records": [r.to_json() for r in report.records]})
    else:
        body = report.csv_text()
    _emit(args, body)
    summary = _dump(report.summary) + "\n"
    (sys.stdout if args.out else sys.stderr).write(summary)
    return 0


def cmd_advise(args) -> int:
    spec = load_spec(args.spec)
    _emit(args, _dump(advise(spec, args.xi).to_json()))
    return 0


def cmd_contract(args) -> int:
    if args.tn:
        tn = from_json(_load_json(args.tn))
        if args.emit_tn:
            _emit(args, _dump(to_json(tn)))
            return 0
        result = contract(tn)
    elif args.spec:
        spec = load_spec(args.spec)
        w = _weights(args, spec)
        if args.emit_tn:
            _emit(args, _dump(to_json(build_tn(spec, w))))
            return 0
        result = weights_tensor(spec, w, args.cls)
    else:
        raise UsageError("contract needs --spec or --tn")
    _emit(args, json.dumps({"shape": list(result.shape), "data": result.ravel().tolist()}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tnarch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tnarch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required, help="ConvAC spec JSON file")
        p.add_argument("--seed", type=int, default=0, help="weight seed (default 0)")
        p.add_argument("--weights", help="weight set JSON (overrides --seed)")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--json", action="store_true", help="JSON output (default for all but simulate)")

    p = sub.add_parser("analyze", help="rank, entanglement measures and cut bounds for one partition")
    common(p)
    p.add_argument("--partition", type=_int_list, required=True, help="1-based inputs on side A, e.g. 1,3,5,7")
    p.add_argument("--class", dest="cls", type=int, default=0, help="0-based class index")
    p.add_argument("--tol", type=float, default=None, help="relative rank tolerance (default max(shape)*eps)")
    p.add_argument("--inputs", help='representation values JSON {"x": [[...], ...]}; adds class scores')
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mincut", help="minimal multiplicative cut for one partition")
    common(p, spec_required=False)
    p.add_argument("--tn", help="tensor network JSON instead of --spec")
    p.add_argument("--partition", type=_int_list, required=True)
    p.add_argument("--modified", action="store_true", help="count each δ group once")
    p.add_argument("--lower-bound", action="store_true", help="also report the power-rounding lower bound")
    p.add_argument("--exhaustive", action="store_true", help="brute-force search instead of max-flow")
    p.set_defaults(func=cmd_mincut)

    p = sub.add_parser("simulate", help="rank vs. min-cut sweep over channel arrangements and partitions")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--dims", type=_int_list, default=[2, 3, 5, 7, 11, 13])
    p.add_argument("--arrangements", type=_count, default=None, help="all | sample:K")
    p.add_argument("--partitions", type=_count, default=None, help="all | sample:K")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--weight-seeds", type=int, default=1, help="weight draws per configuration")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--repeat-dims", action="store_true", help="allow a dimension in several layers")
    p.add_argument("--out", help="CSV output path (summary then goes to stdout)")
    p.add_argument("--json", action="store_true", help="emit records as JSON instead of CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("advise", help="which layers matter for features of a given size")
    common(p)
    p.add_argument("--xi", "--feature-size", dest="xi", type=int, required=True)
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser("contract", help="contract a network (or a ConvAC's weights tensor)")
    common(p, spec_required=False)
    p.add_argument("--tn", help="tensor network JSON")
    p.add_argument("--class", dest="cls", type=int, default=0)
    p.add_argument("--emit-tn", action="store_true", help="print the network JSON instead of contracting")
    p.set_defaults(func=cmd_contract)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except (TnarchError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"tnarch: {exc}\n")
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
