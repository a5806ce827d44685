"""Command-line interface: ``detachment {generate,stats,epoi,optimize,bench}``.

Exit codes: 0 success, 2 usage or malformed input, 3 domain error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from .cascade import RngSpec, SourceDistribution, estimate_epoi, exact_epoi, key64
from .errors import DetachmentError, InputError
from .generator import (
    PAPER_LINKS_PER_BRIDGE,
    PAPER_MIX,
    PAPER_WEIGHT_A,
    PAPER_WEIGHT_B,
    GeneratorParams,
    beta_filler,
    generate_instance,
    graph_stats,
)
from .network import (
    fill_weights,
    induce_network,
    load_circles,
    load_weights,
    save_circles,
    save_weights,
)
from .optimizer import (
    DEFAULT_TRIALS,
    Evaluator,
    MinCutConfig,
    compare_methods,
    exhaustive_detach,
    greedy_detach,
    min_cut_detach,
)

log = logging.getLogger("detachment")

EXIT_USAGE, EXIT_DOMAIN, EXIT_IO = 2, 3, 4
BENCH_HEADER = ["n", "mincut", "epoi_cut", "epoi_greedy", "epoi_stderr", "epoi_base", "seed", "ms_cut", "ms_greedy"]
DEFAULT_SEARCH_TRIALS = 1_000


def _dump(obj, out: Optional[str] = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --- input helpers -----------------------------------------------------------


def _pair(text: str, cast=float):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    try:
        return cast(parts[0]), cast(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_inputs(args):
    circles = load_circles(args.circles)
    given = load_weights(args.weights) if args.weights else {}
    if args.flat_weight is not None:
        weights = fill_weights(circles, given, lambda pairs: [args.flat_weight] * len(pairs))
    elif args.beta is not None:
        weights = fill_weights(circles, given, beta_filler(args.beta[0], args.beta[1], RngSpec(args.seed, key64("weights"))))
    else:
        weights = given
    if args.p == "uniform":
        p = SourceDistribution.uniform(circles)
    else:
        with open(args.p, encoding="utf-8") as fh:
            try:
                p = SourceDistribution(json.load(fh))
            except (json.JSONDecodeError, AttributeError, TypeError) as exc:
                raise InputError(f"{args.p}: {exc}") from None
        p.check_support(circles)
    return circles, weights, p


def _add_input_flags(sp):
    sp.add_argument("--circles", required=True, help="circle file (JSON)")
    sp.add_argument("--weights", help="weight file (CSV u,v,w)")
    fill = sp.add_mutually_exclusive_group()
    fill.add_argument("--flat-weight", type=float, help="weight for pairs absent from --weights")
    fill.add_argument("--beta", type=_pair, metavar="A,B", help="Beta(A,B) weights for absent pairs")
    sp.add_argument("--p", default="uniform", help="'uniform' or a JSON file {circle: probability}")


# --- commands ------------------------------------------------------------------


def _generator_params(args) -> GeneratorParams:
    if args.paper_profile:
        params = GeneratorParams.paper_profile(args.n, seed=args.seed, links_per_bridge=args.links_per_bridge, mix=args.mix)
    else:
        missing = [f for f in ("alpha", "beta", "gamma") if getattr(args, f) is None]
        if missing:
            raise InputError("without --paper-profile, --alpha, --beta and --gamma are required")
        params = GeneratorParams(args.n, args.alpha, args.beta, args.gamma, mix=args.mix, seed=args.seed)
    wa, wb = args.weight_beta
    return GeneratorParams(**{**params.__dict__, "weight_a": wa, "weight_b": wb})


def cmd_generate(args) -> int:
    params = _generator_params(args)
    circles, weights, network = generate_instance(params)
    stats = graph_stats(circles, network)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_circles(circles, out / "circles.json")
        save_weights(weights, out / "weights.csv")
        _dump({"params": params.to_json(), "stats": stats.to_json()}, out / "stats.json")
    except OSError as exc:
        log.error("cannot write %s: %s", out, exc)
        return EXIT_IO
    print(
        f"n={stats.n_vertices} circles={stats.n_circles} bridges={stats.n_bridges} "
        f"links={stats.n_links} edges={stats.n_edges} components={stats.bbn_component_count} -> {out}"
    )
    return 0


def cmd_stats(args) -> int:
    circles = load_circles(args.circles)
    network = induce_network(circles, fill_weights(circles, {}, lambda pairs: [0.0] * len(pairs)))
    _dump(graph_stats(circles, network).to_json(), args.out)
    return 0


def cmd_epoi(args) -> int:
    circles, weights, p = _load_inputs(args)
    if args.exact:
        est = exact_epoi(circles, weights, p)
    else:
        est = estimate_epoi(circles, weights, p, args.trials, RngSpec(args.seed))
    _dump(est.to_json(), args.out)
    return 0


def cmd_optimize(args) -> int:
    circles, weights, p = _load_inputs(args)
    rng = RngSpec(args.seed)
    evaluator = Evaluator.exact() if args.exact else Evaluator.monte_carlo(args.trials)
    if args.method == "greedy":
        result = greedy_detach(circles, weights, p, args.m, evaluator, rng)
    elif args.method == "exhaustive":
        result = exhaustive_detach(circles, weights, p, args.m)
    else:
        config = MinCutConfig(
            terminal_selection="explicit" if args.terminals else args.terminal_selection,
            capacity_policy=args.capacity,
            terminals=args.terminals,
        )
        result = min_cut_detach(circles, weights, p, config, args.trials, rng, evaluator)
    if args.out:
        try:
            save_circles(result.final_circles, args.out)
        except OSError as exc:
            log.error("cannot write %s: %s", args.out, exc)
            return EXIT_IO
    _dump(result.to_json())
    return 0


@dataclass(frozen=True)
class BenchRow:
    n: int
    seed: int
    mincut_size: Optional[int] = None
    epoi_cut: Optional[float] = None
    epoi_greedy: Optional[float] = None
    epoi_stderr: Optional[float] = None
    epoi_base: Optional[float] = None
    ms_cut: Optional[int] = None
    ms_greedy: Optional[int] = None
    error: Optional[str] = None

    def cells(self, timing: bool) -> list:
        def real(x):
            return "" if x is None else f"{x:.6f}"

        def opt(x):
            return "" if x is None or not timing else str(x)

        return [
            str(self.n),
            "" if self.mincut_size is None else str(self.mincut_size),
            real(self.epoi_cut),
            real(self.epoi_greedy),
            real(self.epoi_stderr),
            real(self.epoi_base),
            str(self.seed),
            opt(self.ms_cut),
            opt(self.ms_greedy),
        ]


def bench_row(n: int, replicate: int, seed: int, trials: int, search_trials: int) -> BenchRow:
    row_seed = key64("bench", seed, n, replicate)
    try:
        circles, weights, _ = generate_instance(GeneratorParams.paper_profile(n, seed=row_seed))
        cmp = compare_methods(circles, weights, None, trials, RngSpec(row_seed), search_trials)
    except DetachmentError as exc:
        return BenchRow(n, row_seed, error=f"{type(exc).__name__}: {exc}")
    stderr = cmp.epoi_stderr
    for name, est in (("cut", cmp.epoi_cut), ("greedy", cmp.epoi_greedy)):
        if est.value > cmp.epoi_base.value + 3 * stderr:
            log.warning("n=%d seed=%d: %s EPOI %.6f exceeds base %.6f + 3 stderr", n, row_seed, name, est.value, cmp.epoi_base.value)
    return BenchRow(
        n,
        row_seed,
        cmp.mincut_size,
        cmp.epoi_cut.value,
        cmp.epoi_greedy.value,
        stderr,
        cmp.epoi_base.value,
        round(cmp.cut.wall_time * 1000),
        round(cmp.greedy.wall_time * 1000),
    )


def read_bench_csv(path) -> List[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    for rec in csv.DictReader(lines):
        row = {}
        for key, value in rec.items():
            if value == "":
                row[key] = None
            elif key in ("n", "mincut", "seed", "ms_cut", "ms_greedy"):
                row[key] = int(value)
            else:
                row[key] = float(value)
        rows.append(row)
    return rows


def cmd_bench(args) -> int:
    jobs = [(n, r) for n in args.sizes for r in range(args.replicates)]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    failed = 0
    try:
        out.write(f"# greedy uses m = min-cut size; EPOI from {args.trials} trials per circle, greedy search {args.search_trials}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        out.flush()
        call = [(n, r, args.seed, args.trials, args.search_trials) for n, r in jobs]
        if args.threads > 1:
            with ProcessPoolExecutor(args.threads) as pool:
                rows = pool.map(bench_row, *zip(*call))
                for row in rows:
                    failed += _emit(writer, out, row, args.timing)
        else:
            for job in call:
                failed += _emit(writer, out, bench_row(*job), args.timing)
    except OSError as exc:
        log.error("cannot write bench output: %s", exc)
        return EXIT_IO
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_DOMAIN if failed else 0


def _emit(writer, out, row: BenchRow, timing: bool) -> int:
    writer.writerow(row.cells(timing))
    out.flush()
    if row.error:
        log.error("n=%d seed=%d failed: %s", row.n, row.seed, row.error)
        return 1
    log.info("n=%d mincut=%s base=%.4f cut=%.4f greedy=%.4f", row.n, row.mincut_size, row.epoi_base, row.epoi_cut, row.epoi_greedy)
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for bench")
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="detachment", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a random circle collection")
    g.add_argument("--n", type=int, required=True, help="number of vertices")
    g.add_argument("--paper-profile", action="store_true", help="ratios of the 967-vertex insider network")
    g.add_argument("--alpha", type=float, help="|V| / |circles|")
    g.add_argument("--beta", type=float, help="|V| / |bridges|")
    g.add_argument("--gamma", type=float, help="|V| / |links|")
    g.add_argument("--mix", type=float, default=PAPER_MIX, help="uniform/preferential mixing coefficient")
    g.add_argument("--links-per-bridge", type=float, default=PAPER_LINKS_PER_BRIDGE)
    g.add_argument("--weight-beta", type=_pair, default=(PAPER_WEIGHT_A, PAPER_WEIGHT_B), metavar="A,B")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", parents=[common], help="graph statistics of a circle file")
    s.add_argument("--circles", required=True)
    s.set_defaults(func=cmd_stats)

    e = sub.add_parser("epoi", parents=[common], help="estimate EPOI")
    _add_input_flags(e)
    e.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="Monte Carlo trials per circle")
    e.add_argument("--exact", action="store_true", help="exact live-edge enumeration (small inputs)")
    e.set_defaults(func=cmd_epoi)

    o = sub.add_parser("optimize", parents=[common], help="choose detachments")
    _add_input_flags(o)
    o.add_argument("--method", choices=["greedy", "mincut", "exhaustive"], required=True)
    o.add_argument("--m", type=int, default=1, help="number of detachments (greedy, exhaustive)")
    o.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    o.add_argument("--exact", action="store_true", help="evaluate EPOI exactly")
    o.add_argument("--terminal-selection", choices=["largest_influence", "largest_size"], default="largest_influence")
    o.add_argument("--terminals", type=lambda t: _pair(t, str), metavar="C1,C2", help="explicit terminal circles")
    o.add_argument("--capacity", choices=["unit", "weighted"], default="unit")
    o.set_defaults(func=cmd_optimize)

    b = sub.add_parser("bench", parents=[common], help="min-cut vs greedy on generated graphs")
    b.add_argument("--sizes", type=_int_list, required=True, help="comma-separated vertex counts")
    b.add_argument("--replicates", type=int, default=1)
    b.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="trials per circle for reported EPOI")
    b.add_argument("--search-trials", type=int, default=DEFAULT_SEARCH_TRIALS, help="trials per circle inside the greedy search")
    b.add_argument("--timing", action="store_true", help="fill ms_cut/ms_greedy (makes output run-dependent)")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except DetachmentError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_DOMAIN
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
