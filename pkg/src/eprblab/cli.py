"""Command line interface.

Exit codes: 0 success, 2 configuration or usage problems, 3 malformed or
inconsistent input data, 4 violated internal invariants.  Every command
that writes a file also writes ``<file>.manifest.json`` (for simulate,
``<out>.manifest.json`` covering both event files) recording input and
output digests, the seed, and the tool version.  Results and summaries go
to stdout as single JSON objects; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .counting import count_triple_classes, enumerate_eu_classes
from .errors import (
    ConfigMismatchError,
    ConfigParseError,
    EmptyCellError,
    FormatError,
    InternalInvariantError,
    InvalidStreamError,
    MalformedTupleError,
    SettingCollisionError,
    SupportViolationError,
    TooLargeError,
)
from .feasibility import joint_feasibility
from .ioformats import (
    RunManifest,
    load_config,
    read_events,
    read_pairs,
    read_raw_station,
    read_tables,
    read_tally,
    sha256_file,
    write_events,
    write_manifest,
    write_pairs_indexed,
    write_sweep_csv,
    write_tally,
)
from .model import domain_key_to_string
from .pairing import PairingConfig, match_pairs_indexed
from .sources import generate
from .stats import bell_wigner, chsh, sweep_window, tally

USAGE_EXIT = 2
DATA_EXIT = 3
INTERNAL_EXIT = 4


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _require_islands(left, right) -> None:
    if left.island != "T" or right.island != "L":
        raise ConfigMismatchError(
            f"--left must be a T-island file and --right an L-island file, "
            f"got islands {left.island!r} and {right.island!r}"
        )


def _parse_ordering(text: str, kind: str) -> tuple[str, ...]:
    ordering = tuple(part.strip() for part in text.split(","))
    want = 3 if kind == "bell-wigner" else 4
    if len(ordering) != want or len(set(ordering)) != want:
        raise ValueError(f"--ordering for {kind} needs {want} distinct labels, got {text!r}")
    return ordering


def _cmd_simulate(args) -> int:
    t0 = time.monotonic()
    config = load_config(args.config, seed_override=args.seed)
    left, right = generate(config)
    t_path, l_path = f"{args.out}.T.jsonl", f"{args.out}.L.jsonl"
    write_events(t_path, left)
    write_events(l_path, right)
    config_digest = sha256_file(args.config)
    manifest = RunManifest(
        command="simulate",
        seed=int(config.seed),
        config_digest=config_digest,
        inputs={args.config: config_digest},
        outputs={t_path: sha256_file(t_path), l_path: sha256_file(l_path)},
        parameters={"kind": config.kind, "emissions": config.n_emissions()},
        wall_time_s=round(time.monotonic() - t0, 6),
    )
    write_manifest(f"{args.out}.manifest.json", manifest)
    _emit({"t_events": len(left), "l_events": len(right), "t_file": t_path, "l_file": l_path})
    return 0


def _cmd_pair(args) -> int:
    t0 = time.monotonic()
    if args.window_ns < 0:
        raise ValueError("--window-ns must be nonnegative")
    left = read_events(args.left)
    right = read_events(args.right)
    _require_islands(left, right)
    mi, mj, unmatched_l, unmatched_r = match_pairs_indexed(left, right, PairingConfig(args.window_ns))
    write_pairs_indexed(args.out, left, right, mi, mj, args.window_ns)
    manifest = RunManifest(
        command="pair",
        inputs={args.left: sha256_file(args.left), args.right: sha256_file(args.right)},
        outputs={args.out: sha256_file(args.out)},
        parameters={"window_ns": args.window_ns, "unmatched_left": unmatched_l, "unmatched_right": unmatched_r},
        wall_time_s=round(time.monotonic() - t0, 6),
    )
    write_manifest(f"{args.out}.manifest.json", manifest)
    _emit({"pairs": len(mi), "unmatched_left": unmatched_l, "unmatched_right": unmatched_r})
    return 0


def _cmd_tally(args) -> int:
    t0 = time.monotonic()
    pairs = read_pairs(args.pairs)
    table = tally(pairs)
    write_tally(args.out, table)
    manifest = RunManifest(
        command="tally",
        inputs={args.pairs: sha256_file(args.pairs)},
        outputs={args.out: sha256_file(args.out)},
        parameters={"pairs": len(pairs)},
        wall_time_s=round(time.monotonic() - t0, 6),
    )
    write_manifest(f"{args.out}.manifest.json", manifest)
    _emit({"pairs": len(pairs), "setting_pairs": len(table.counts)})
    return 0


def _cmd_inequalities(args) -> int:
    table = read_tally(args.tally)
    ordering = _parse_ordering(args.ordering, args.kind)
    if args.kind == "bell-wigner":
        report = bell_wigner(table, ordering, args.convention)  # type: ignore[arg-type]
    else:
        report = chsh(table, ordering)  # type: ignore[arg-type]
    payload = {
        "kind": report.name,
        "violated": report.violated,
        "statistic": report.statistic,
        "standard_error": report.standard_error,
        "pair_counts": {f"{x};{y}": n for (x, y), n in sorted(report.pair_counts.items())},
        "ordering": list(ordering),
    }
    if args.kind == "bell-wigner":
        payload["lhs"] = report.lhs
        payload["rhs"] = report.rhs
        payload["convention"] = args.convention
    else:
        payload["s_value"] = report.s_value
        payload["bound"] = 2.0
    _emit(payload)
    return 0


def _cmd_sweep(args) -> int:
    t0 = time.monotonic()
    try:
        windows = [int(w) for w in args.windows.split(",") if w.strip()]
    except ValueError:
        raise ValueError(f"--windows must be comma-separated integers, got {args.windows!r}")
    left = read_events(args.left)
    right = read_events(args.right)
    _require_islands(left, right)
    rows = sweep_window(left, right, windows, args.kind)
    write_sweep_csv(args.out, rows)
    manifest = RunManifest(
        command="sweep",
        inputs={args.left: sha256_file(args.left), args.right: sha256_file(args.right)},
        outputs={args.out: sha256_file(args.out)},
        parameters={"kind": args.kind, "windows": windows},
        wall_time_s=round(time.monotonic() - t0, 6),
    )
    write_manifest(f"{args.out}.manifest.json", manifest)
    _emit({"rows": len(rows), "out": args.out})
    return 0


def _cmd_enumerate(args) -> int:
    if args.model is None:
        classes = enumerate_eu_classes(args.M)
        _emit({"M": args.M, "classes": [str(c) for c in classes], "count": len(classes)})
        return 0
    report = count_triple_classes(args.M, args.model)
    _emit(
        {
            "M": report.M,
            "model": report.model.kind,
            "enumerated_count": report.enumerated_count,
            "closed_form": report.closed_form,
            "agrees": report.agrees,
        }
    )
    return 0


def _cmd_feasibility(args) -> int:
    tables, convention = read_tables(args.tables)
    convention = convention or "equal"
    result = joint_feasibility(tables, identify_equal_settings=args.identify_equal_settings, convention=convention)
    payload = {
        "status": result.status,
        "identify_equal_settings": result.identify_equal_settings,
        "convention": result.convention,
        "settings": list(result.setting_labels),
    }
    if result.witness is not None:
        payload["witness"] = {
            domain_key_to_string(k): str(w) for k, w in result.witness.weights.items() if w != 0
        }
    if result.certificate is not None:
        payload["certificate"] = {label: str(v) for label, v in result.certificate.items()}
    _emit(payload)
    return 0


def _cmd_ingest(args) -> int:
    t0 = time.monotonic()
    stream = read_raw_station(args.raw, args.island)
    write_events(args.out, stream)
    manifest = RunManifest(
        command="ingest",
        inputs={args.raw: sha256_file(args.raw)},
        outputs={args.out: sha256_file(args.out)},
        parameters={"island": args.island},
        wall_time_s=round(time.monotonic() - t0, 6),
    )
    write_manifest(f"{args.out}.manifest.json", manifest)
    _emit({"events": len(stream), "island": stream.island, "out": args.out})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eprblab",
        description="Simulate, pair, and analyze time-tagged two-station detection experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate two station event files from a config")
    p.add_argument("--config", required=True, help="source config JSON")
    p.add_argument("--out", required=True, help="output prefix; writes <out>.T.jsonl and <out>.L.jsonl")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("pair", help="match two event files into coincidence pairs")
    p.add_argument("--left", required=True, help="T-island event file")
    p.add_argument("--right", required=True, help="L-island event file")
    p.add_argument("--window-ns", type=int, required=True)
    p.add_argument("--out", required=True, help="output pairs JSONL")
    p.set_defaults(func=_cmd_pair)

    p = sub.add_parser("tally", help="count outcomes per setting pair")
    p.add_argument("--pairs", required=True, help="pairs JSONL")
    p.add_argument("--out", required=True, help="output tally JSON")
    p.set_defaults(func=_cmd_tally)

    p = sub.add_parser("inequalities", help="evaluate an inequality on a tally")
    p.add_argument("--tally", required=True, help="tally JSON")
    p.add_argument("--kind", required=True, choices=["bell-wigner", "chsh"])
    p.add_argument("--ordering", required=True, help="comma-separated setting labels, e.g. a,b,c")
    p.add_argument("--convention", required=True, choices=["equal", "anti"])
    p.set_defaults(func=_cmd_inequalities)

    p = sub.add_parser("sweep", help="evaluate an inequality across coincidence windows")
    p.add_argument("--left", required=True, help="T-island event file")
    p.add_argument("--right", required=True, help="L-island event file")
    p.add_argument("--windows", required=True, help="comma-separated windows in ns, ascending")
    p.add_argument("--kind", required=True, choices=["bell-wigner", "chsh"])
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("enumerate", help="count correlation classes")
    p.add_argument("--M", type=int, required=True, help="trials per setting pair")
    p.add_argument(
        "--model",
        choices=["independent", "shared", "shared-identified"],
        default=None,
        help="count reachable class triples under this constraint model "
        "(omit to list the single-pair classes)",
    )
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("feasibility", help="decide whether tables admit a joint distribution")
    p.add_argument("--tables", required=True, help="tables JSON (counts or exact probabilities)")
    p.add_argument("--identify-equal-settings", action="store_true")
    p.set_defaults(func=_cmd_feasibility)

    p = sub.add_parser("ingest", help="convert a raw station log to the event format")
    p.add_argument("--raw", required=True, help="whitespace-separated 't_ns setting outcome' log")
    p.add_argument("--island", required=True, choices=["T", "L"])
    p.add_argument("--out", required=True, help="output events JSONL")
    p.set_defaults(func=_cmd_ingest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigParseError, ConfigMismatchError, TooLargeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (
        FormatError,
        InvalidStreamError,
        EmptyCellError,
        SupportViolationError,
        MalformedTupleError,
        SettingCollisionError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except InternalInvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_EXIT


if __name__ == "__main__":
    sys.exit(main())
