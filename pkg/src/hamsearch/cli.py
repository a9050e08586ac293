"""Command-line front door.

Subcommands: gen, permute, build, query, bench, plot, serve.
Exit codes: 0 success, 1 usage error, 2 data or format error.
Settings resolve as flags > environment (HAMSEARCH_*) > config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import (
    BenchConfig,
    BenchReport,
    dataset_from_spec,
    SyntheticSpec,
    render_latency_figure,
    run_bench,
)
from .core import SubCodeLayout
from .engine import SearchEngine, SearchStrategy, result_to_document
from .errors import HamsearchError
from .permutation import (
    estimate_correlations,
    kernighan_lin,
    load_permutation,
    save_permutation,
)
from .service import serve
from .store import parse_code_hex, read_codes, save_dataset
from .subcode import build_index, load_index, save_index

_ENV_PREFIX = "HAMSEARCH_"


class _Parser(argparse.ArgumentParser):
    # spec'd exit codes: usage problems are 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setting(flag_value, env_name: str, file_value=None, default=None, cast=str):
    """Flags beat HAMSEARCH_* environment variables beat config-file values."""
    if flag_value is not None:
        return flag_value
    env = os.environ.get(_ENV_PREFIX + env_name)
    if env is not None:
        return cast(env)
    if file_value is not None:
        return file_value
    return default


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hamsearch",
                     description="Exact Hamming-space search over binary codes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="generate a synthetic FBIN dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--nbits", type=int, required=True)
    p.add_argument("--model", choices=["uniform", "clustered"], default="uniform")
    p.add_argument("--block-size", type=int, default=4)
    p.add_argument("--flip-prob", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("permute", help="compute a decorrelating bit permutation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter-width", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-limit", type=int, default=100_000)

    p = sub.add_parser("build", help="build a sub-code inverted index (FIDX)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--filter-width", type=int, default=16)
    p.add_argument("--permutation")

    p = sub.add_parser("query", help="run one r-neighbor or k-NN query")
    p.add_argument("--data", required=True)
    p.add_argument("--index")
    p.add_argument("--permutation")
    p.add_argument("--code", required=True, help="query code as hex")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--radius", type=int)
    group.add_argument("--k", type=int)
    p.add_argument("--strategy",
                   choices=[s.value for s in SearchStrategy],
                   default=SearchStrategy.FILTERED_PERMUTED.value)

    p = sub.add_parser("bench", help="run the latency benchmark")
    p.add_argument("--config", required=True, help="BenchConfig JSON file")
    p.add_argument("--out", help="report path (overrides config)")
    p.add_argument("--csv", help="raw-sample CSV path (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--queries", type=int)
    p.add_argument("--warmup", type=int)

    p = sub.add_parser("plot", help="render latency-vs-radius SVG from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="start the HTTP query service")
    p.add_argument("--data", required=True)
    p.add_argument("--index")
    p.add_argument("--permutation")
    p.add_argument("--listen", help="host:port (default 127.0.0.1:8080)")
    p.add_argument("--enable-term-match", action="store_true",
                   help="also build term-match postings (memory-hungry)")
    return parser


def _cmd_gen(args) -> int:
    spec = SyntheticSpec(count=args.count, nbits=args.nbits, model=args.model,
                         block_size=args.block_size, flip_prob=args.flip_prob,
                         seed=args.seed)
    save_dataset(dataset_from_spec(spec), args.out)
    print(f"wrote {args.count} x {args.nbits}-bit codes to {args.out}")
    return 0


def _cmd_permute(args) -> int:
    dataset = read_codes(args.data)
    layout = SubCodeLayout.with_width(dataset.nbits, args.filter_width)
    corr = estimate_correlations(dataset, sample_limit=args.sample_limit,
                                 seed=args.seed)
    perm = kernighan_lin(corr, layout)
    save_permutation(perm, args.out)
    print(f"wrote permutation for m={dataset.nbits} to {args.out}")
    return 0


def _cmd_build(args) -> int:
    dataset = read_codes(args.data)
    layout = SubCodeLayout.with_width(dataset.nbits, args.filter_width)
    perm = load_permutation(args.permutation) if args.permutation else None
    index = build_index(dataset, layout, perm)
    save_index(index, args.out)
    kind = "permuted" if perm is not None else "plain"
    print(f"wrote {kind} index ({layout.segment_count} segments of "
          f"width {layout.segment_width}) to {args.out}")
    return 0


def _load_engine(args, enable_term_match: bool = False) -> SearchEngine:
    dataset = read_codes(args.data)
    perm = load_permutation(args.permutation) if args.permutation else None
    plain = permuted = None
    if args.index:
        index = load_index(args.index, dataset, perm)
        if index.perm_digest:
            permuted = index
        else:
            plain = index
    postings = None
    if enable_term_match:
        from .term_match import build_position_postings
        postings = build_position_postings(dataset)
    return SearchEngine(dataset, term_postings=postings, plain_index=plain,
                        permuted_index=permuted, permutation=perm)


def _cmd_query(args) -> int:
    engine = _load_engine(args,
                          enable_term_match=args.strategy == "term_match")
    query = parse_code_hex(args.code, engine.nbits)
    if args.radius is not None:
        result = engine.r_neighbor_search(args.strategy, query, args.radius)
    else:
        result = engine.knn_search(args.strategy, query, args.k)
    print(json.dumps(result_to_document(result)))
    return 0


def _cmd_bench(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = BenchConfig.from_json(fh.read())
    cfg.output_path = _setting(args.out, "BENCH_OUT", cfg.output_path)
    cfg.csv_path = _setting(args.csv, "BENCH_CSV", cfg.csv_path)
    cfg.seed = _setting(args.seed, "SEED", cfg.seed, cast=int)
    cfg.query_count = _setting(args.queries, "QUERIES", cfg.query_count, cast=int)
    cfg.warmup = _setting(args.warmup, "WARMUP", cfg.warmup, cast=int)
    report = run_bench(cfg)
    for cell in report.cells:
        print(f"{cell.strategy:18s} r={cell.radius:<3d} "
              f"median={cell.median_us / 1000.0:9.3f} ms  "
              f"mean={cell.mean_us / 1000.0:9.3f} ms  "
              f"candidates={cell.mean_candidate_fraction * 100.0:7.4f}%")
    if cfg.output_path:
        print(f"report written to {cfg.output_path}")
    return 0


def _cmd_plot(args) -> int:
    with open(args.report, "r", encoding="utf-8") as fh:
        report = BenchReport.from_json(fh.read())
    render_latency_figure(report, args.out)
    print(f"figure written to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    listen = _setting(args.listen, "LISTEN", default="127.0.0.1:8080")
    host, _, port_text = listen.rpartition(":")
    if not host or not port_text.isdigit():
        raise ValueError(f"--listen wants host:port, got {listen!r}")
    engine = _load_engine(args, enable_term_match=args.enable_term_match)
    server = serve(engine, host, int(port_text))
    print(f"serving on http://{host}:{server.server_address[1]}  "
          f"(strategies: {', '.join(s.value for s in engine.available_strategies())})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "permute": _cmd_permute,
    "build": _cmd_build,
    "query": _cmd_query,
    "bench": _cmd_bench,
    "plot": _cmd_plot,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return _COMMANDS[args.command](args)
    except (HamsearchError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"hamsearch: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
