"""Command-line entry point: ``cliquescout <subcommand> ...``.

Options can also come from an INI config file (``--config``): keys in
``[cliquescout]`` apply to every subcommand, keys in a section named after
the subcommand apply to that one.  Key names are the long flag names with
dashes or underscores.  Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from contextlib import contextmanager
from typing import IO, Iterator, Sequence

from . import __version__
from .clique import maximal_cliques
from .graph import read_edge_list, write_dot, write_edge_list
from .ingest import DEFAULT_MAX_SKIP_FRACTION, ReviewSchema, ingest_reviews, ingest_users
from .kdgraph import DEFAULT_PAIR_BUDGET, KDParams, WeightMode, build_kd_graph, kd_parameter_sweep
from .quasiclique import QuasiParams, as_fraction, maximal_pseudo_cliques, pseudo_cliques
from .report import (
    CLIQUE,
    KINDS,
    LabelFile,
    annotate,
    count_table_from_graphs,
    export_group_graph,
    flag_groups,
    read_jsonl,
    sweep_violations,
    table_violations,
    validate_groups,
    write_jsonl,
)
from .store import parse_day, read_store, write_store
from .synth import SynthConfig, write_synth
from .verify import differential_cliques, differential_pseudo_cliques

log = logging.getLogger("cliquescout")


class CommandError(Exception):
    pass


def int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must be non-empty")
    return values


def plant_spec(text: str) -> tuple[int, int, int]:
    parts = int_list(text)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--plant takes MEMBERS,VENUES,SPREAD")
    return tuple(parts)  # type: ignore[return-value]


def theta_value(text: str):
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad theta {text!r}") from None


@contextmanager
def _open_out(path: str | None, binary: bool = False) -> Iterator[IO]:
    if path in (None, "-"):
        yield sys.stdout.buffer if binary else sys.stdout
        return
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "wb" if binary else "w", encoding=None if binary else "utf-8", newline=None if binary else "\n") as fh:
        yield fh


@contextmanager
def _open_in(path: str | None, binary: bool = False) -> Iterator[IO]:
    if path in (None, "-"):
        yield sys.stdin.buffer if binary else sys.stdin
        return
    with open(path, "rb" if binary else "r", encoding=None if binary else "utf-8") as fh:
        yield fh


def _load_store(path: str | None):
    with _open_in(path, binary=True) as fh:
        return read_store(fh)


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args) -> None:
    config = SynthConfig(
        seed=args.seed,
        n_users=args.n_users,
        n_venues=args.n_venues,
        background_rate=args.background_rate,
        start_day=parse_day(args.start_date),
        span_days=args.span_days,
        planted=tuple(args.plant or ()),
        mean_friends=args.mean_friends,
    )
    users = open(args.users_out, "w", encoding="utf-8") if args.users_out else None
    truth = open(args.truth_out, "w", encoding="utf-8") if args.truth_out else None
    try:
        with _open_out(args.out) as out:
            write_synth(config, out, users, truth)
    finally:
        for fh in (users, truth):
            if fh is not None:
                fh.close()


def cmd_ingest(args) -> None:
    schema = ReviewSchema(args.user_field, args.venue_field, args.date_field, args.stars_field, args.truncate_time)
    with _open_in(args.input, binary=True) as fh:
        store, report = ingest_reviews(fh, schema, args.max_skip_fraction)
    summary = {"reviews": report.as_dict()}
    if args.users:
        store, ureport = ingest_users(store, args.users, max_skip_fraction=args.max_skip_fraction)
        summary["users"] = ureport.as_dict()
    summary["store"] = {"n_users": store.n_users, "n_venues": store.n_venues, "n_reviews": store.n_reviews}
    with _open_out(args.out, binary=True) as out:
        write_store(store, out)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)


def cmd_build(args) -> None:
    store = _load_store(args.store)
    graph = build_kd_graph(store, KDParams(args.k, args.d), WeightMode.parse(args.mode), args.pair_budget, args.threads)
    log.info("(%d,%d)-graph: %d vertices, %d edges", args.k, args.d, graph.n, graph.n_edges)
    with _open_out(args.out) as out:
        if args.format == "dot":
            write_dot(graph, out, name=f"kd_{args.k}_{args.d}")
        else:
            write_edge_list(graph, out)


def _write_sets(graph, groups, out, extra=None) -> None:
    rows = sorted((tuple(sorted(graph.labels[v] for v in g)) for g in groups), key=lambda m: (-len(m), m))
    for members in rows:
        rec = {"size": len(members), "members": list(members)}
        if extra:
            rec.update(extra)
        out.write(json.dumps(rec, sort_keys=True) + "\n")


def cmd_cliques(args) -> None:
    with _open_in(args.graph) as fh:
        graph = read_edge_list(fh)
    with _open_out(args.out) as out:
        _write_sets(graph, maximal_cliques(graph, args.min_size), out)


def cmd_quasicliques(args) -> None:
    with _open_in(args.graph) as fh:
        graph = read_edge_list(fh)
    params = QuasiParams(args.theta, args.min_size, args.max_size)
    enum = pseudo_cliques if args.all else maximal_pseudo_cliques
    with _open_out(args.out) as out:
        _write_sets(graph, enum(graph, params), out, {"theta": str(params.theta)})


def cmd_table(args) -> None:
    store = _load_store(args.store)
    sizes = args.sizes or (list(range(7, 13)) if args.kind != CLIQUE else [9, 10, 11])
    graphs = kd_parameter_sweep(store, args.k, args.d, WeightMode.UNWEIGHTED, args.pair_budget, args.threads)
    table = count_table_from_graphs(graphs, sizes, args.kind, args.theta, args.threads)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        stem = os.path.join(args.out_dir, f"{args.kind}_counts")
        with open(stem + ".csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table.to_csv())
        with open(stem + "_cumulative.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table.cumulative_csv())
        with open(stem + ".txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(table.render())
    if args.pretty:
        sys.stdout.write(table.render())
    elif not args.out_dir:
        sys.stdout.write(table.to_csv())
    if args.check:
        problems = sweep_violations(graphs, store.n_users) + table_violations(table)
        if problems:
            raise CommandError("monotonicity check failed: " + "; ".join(problems))
        print("monotonicity checks passed", file=sys.stderr)


def cmd_flag(args) -> None:
    store = _load_store(args.store)
    records = flag_groups(
        store, KDParams(args.k, args.d), args.kind, args.min_size, args.theta, full_evidence=args.full_evidence
    )
    with _open_out(args.out) as out:
        write_jsonl(records, out)


def cmd_annotate(args) -> None:
    labels = LabelFile.read(args.labels)
    with _open_in(args.groups) as fh:
        groups = read_jsonl(fh)
    store = _load_store(args.store) if args.store else None
    graph_users = None
    if args.graph:
        with open(args.graph, encoding="utf-8") as fh:
            graph_users = read_edge_list(fh).labels
    stats = annotate(groups, labels, store, graph_users)
    with _open_out(args.out) as out:
        out.write(json.dumps(stats.as_dict(), sort_keys=True, indent=2) + "\n")


def cmd_export(args) -> None:
    store = _load_store(args.store)
    with _open_in(args.groups) as fh:
        groups = read_jsonl(fh)
    labels = LabelFile.read(args.labels) if args.labels else None
    with _open_out(args.out) as out:
        export_group_graph(store, groups, out, WeightMode.parse(args.mode), args.format, labels)


def cmd_verify(args) -> None:
    if args.groups:
        if not args.store:
            raise CommandError("--groups needs --store")
        store = _load_store(args.store)
        with _open_in(args.groups) as fh:
            problems = validate_groups(store, read_jsonl(fh))
        if problems:
            raise CommandError(f"{len(problems)} evidence problems, first: {problems[0]}")
        print(json.dumps({"evidence": "ok"}))
        return
    failures = differential_cliques(args.graphs, args.seed) + differential_pseudo_cliques(args.graphs, args.seed + 1)
    print(json.dumps({"graphs": args.graphs, "failures": len(failures)}))
    if failures:
        raise CommandError(f"oracle mismatch: {failures[0]}")


# -- parser ------------------------------------------------------------------------


def _add_store(p, required=False) -> None:
    p.add_argument("--store", default=None if required else "-", required=required, help="store file ('-' = stdin)")


def _add_out(p, what: str) -> None:
    p.add_argument("--out", "-o", default="-", help=f"{what} destination ('-' = stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cliquescout", description="Find coordinated reviewer groups in review data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="INI file with option defaults")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="parallelism degree (default: all cores)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="write a synthetic review stream with planted groups")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-users", type=int, default=1000)
    p.add_argument("--n-venues", type=int, default=200)
    p.add_argument("--background-rate", type=float, default=2.0, help="background reviews per user")
    p.add_argument("--start-date", default="2012-01-01")
    p.add_argument("--span-days", type=int, default=365)
    p.add_argument("--plant", type=plant_spec, action="append", help="MEMBERS,VENUES,SPREAD (repeatable)")
    p.add_argument("--mean-friends", type=float, default=0.0)
    p.add_argument("--users-out", help="also write user/friend records here")
    p.add_argument("--truth-out", help="write planted-group ground truth JSON here")
    _add_out(p, "review NDJSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="NDJSON reviews (and users) -> store file")
    p.add_argument("input", nargs="?", default="-", help="review NDJSON ('-' = stdin)")
    p.add_argument("--users", help="user NDJSON with friend lists")
    p.add_argument("--user-field", default="user_id")
    p.add_argument("--venue-field", default="business_id")
    p.add_argument("--date-field", default="date")
    p.add_argument("--stars-field", default="stars")
    p.add_argument("--truncate-time", action="store_true", help="accept 'YYYY-MM-DD HH:MM:SS' dates")
    p.add_argument("--max-skip-fraction", type=float, default=DEFAULT_MAX_SKIP_FRACTION)
    _add_out(p, "store")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="store -> (k,d)-graph edge list")
    _add_store(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", default="unweighted", help="unweighted | co_review_count | friend_intersection")
    p.add_argument("--format", choices=("tsv", "dot"), default="tsv")
    p.add_argument("--pair-budget", type=int, default=DEFAULT_PAIR_BUDGET)
    _add_out(p, "graph")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("cliques", help="edge list -> maximal cliques (JSON lines)")
    p.add_argument("--graph", default="-", help="TSV edge list ('-' = stdin)")
    p.add_argument("--min-size", type=int, default=3)
    _add_out(p, "clique listing")
    p.set_defaults(func=cmd_cliques)

    p = sub.add_parser("quasicliques", help="edge list -> pseudo-cliques (JSON lines)")
    p.add_argument("--graph", default="-", help="TSV edge list ('-' = stdin)")
    p.add_argument("--theta", type=theta_value, default=as_fraction("0.9"))
    p.add_argument("--min-size", type=int, default=7)
    p.add_argument("--max-size", type=int)
    p.add_argument("--all", action="store_true", help="emit every pseudo-clique, not only maximal ones")
    _add_out(p, "listing")
    p.set_defaults(func=cmd_quasicliques)

    p = sub.add_parser("table", help="(k,d) x size count table")
    _add_store(p)
    p.add_argument("--kind", choices=KINDS, default=CLIQUE)
    p.add_argument("--k", type=int_list, required=True)
    p.add_argument("--d", type=int_list, required=True)
    p.add_argument("--sizes", type=int_list, help="default 9,10,11 for cliques, 7..12 for quasicliques")
    p.add_argument("--theta", type=theta_value, default=as_fraction("0.9"))
    p.add_argument("--pair-budget", type=int, default=DEFAULT_PAIR_BUDGET)
    p.add_argument("--out-dir", help="write <kind>_counts.csv, <kind>_counts_cumulative.csv and .txt here")
    p.add_argument("--pretty", action="store_true", help="print the aligned table instead of CSV")
    p.add_argument("--check", action="store_true", help="assert the sweep monotonicity checks")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("flag", help="list suspicious groups with evidence (JSON lines)")
    _add_store(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--kind", choices=KINDS, default=CLIQUE)
    p.add_argument("--min-size", type=int, default=9)
    p.add_argument("--theta", type=theta_value, default=as_fraction("0.9"))
    p.add_argument("--full-evidence", action="store_true", help="do not cap venues listed per pair")
    _add_out(p, "group listing")
    p.set_defaults(func=cmd_flag)

    p = sub.add_parser("annotate", help="label statistics for flagged groups")
    p.add_argument("--groups", default="-", help="group listing from 'flag' ('-' = stdin)")
    p.add_argument("--labels", required=True, help="user_id<TAB>label file")
    p.add_argument("--store", help="store, to count labelled users it does not know")
    p.add_argument("--graph", help="TSV edge list, to also report fractions over all graph users")
    _add_out(p, "statistics")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("export", help="combined group graph as DOT or TSV")
    _add_store(p, required=True)
    p.add_argument("--groups", default="-", help="group listing from 'flag' ('-' = stdin)")
    p.add_argument("--mode", default="co_review_count", help="unweighted | co_review_count | friend_intersection")
    p.add_argument("--format", choices=("dot", "tsv"), default="dot")
    p.add_argument("--labels", help="user_id<TAB>label file for node annotations")
    _add_out(p, "graph")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="oracle differential suite, or evidence validation with --groups")
    p.add_argument("--graphs", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", help="validate a 'flag' listing instead")
    p.add_argument("--store", help="store the listing was produced from")
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = configparser.ConfigParser()
    if not cfg.read(known.config, encoding="utf-8"):
        raise CommandError(f"cannot read config file {known.config}")
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))

    def defaults_for(p: argparse.ArgumentParser, section: str) -> None:
        if not cfg.has_section(section):
            return
        actions = {a.dest: a for a in p._actions}
        values = {}
        for key, raw in cfg.items(section):
            dest = key.replace("-", "_")
            action = actions.get(dest)
            if action is None:
                continue
            if isinstance(action, (argparse._StoreTrueAction,)):
                values[dest] = cfg.getboolean(section, key)
            elif action.type is not None:
                values[dest] = action.type(raw)
            else:
                values[dest] = raw
            action.required = False
        p.set_defaults(**values)

    defaults_for(parser, "cliquescout")
    if command in subparsers.choices:
        defaults_for(subparsers.choices[command], "cliquescout")
        defaults_for(subparsers.choices[command], command)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (CommandError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"cliquescout: error: config: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args.threads = max(1, args.threads)
    try:
        args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # noqa: BLE001 - one-line error contract
        log.debug("failure", exc_info=True)
        message = " ".join(str(exc).split())
        print(f"cliquescout: error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
