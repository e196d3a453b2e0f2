"""Operator command line for chain-table stores.

Subcommands: init, append, verify, reconstruct, materialize, tamper, status.
Exit codes are machine-stable so scripts can gate on them:

    0  success
    1  integrity violation detected (broken chain, divergent table)
    2  usage or validation error (nothing written)
    3  I/O or storage failure (nothing partially written)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from .attack import measure_rewrite_cascade, tamper_update_in_place, tamper_with_rehash
from .chain import (
    Divergence,
    materialize,
    reconstruct,
    verify_against_table,
    verify_chain,
)
from .encoding import encode_record, parse_batch_input, record_as_dict
from .errors import (
    ChainTableError,
    DuplicateKeyError,
    InvalidLedgerError,
    LidOutOfRangeError,
    LockError,
    MalformedBatchError,
    StorageFailureError,
    StorageViolation,
    StorageViolationKind,
    StoreInconsistentError,
    StoreMismatchError,
)
from .storage import load_ledger, read_ledger_header
from .store import ChainTableStore
from .table import DataTable, read_data_file, write_data_file

EXIT_OK = 0
EXIT_INTEGRITY = 1
EXIT_USAGE = 2
EXIT_STORAGE = 3


def _emit(args: argparse.Namespace, payload: dict[str, Any], lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, separators=(",", ":"), ensure_ascii=False))
    else:
        for line in lines:
            print(line)


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def cmd_init(args: argparse.Namespace) -> int:
    store = ChainTableStore.create(args.ledger, args.table, args.name)
    store.close()
    _emit(
        args,
        {"name": args.name, "ledger": str(args.ledger), "table": str(args.table)},
        [
            f"initialized chain table '{args.name}'",
            f"  ledger: {args.ledger}",
            f"  table:  {args.table}",
        ],
    )
    return EXIT_OK


def cmd_append(args: argparse.Namespace) -> int:
    if args.input is None:
        raw: str | bytes = sys.stdin.read()
    else:
        raw = Path(args.input).read_bytes()
    batch = parse_batch_input(raw)
    with ChainTableStore.open(args.ledger, args.table) as store:
        record = store.append(batch)
    _emit(
        args,
        {
            "lid": record.lid,
            "hash": record.hash.hex,
            "prev_hash": None if record.prev_hash is None else record.prev_hash.hex,
            "records": len(batch),
        },
        [f"appended lid {record.lid} ({len(batch)} update record(s))", f"hash: {record.hash.hex}"],
    )
    return EXIT_OK


def _divergence_payload(div: Divergence) -> dict[str, Any]:
    return {
        "position": div.position,
        "opid": div.opid,
        "expected": None if div.expected is None else record_as_dict(div.expected),
        "found": None if div.found is None else record_as_dict(div.found),
    }


def _divergence_line(div: Divergence) -> str:
    expected = "absent" if div.expected is None else encode_record(div.expected)
    found = "absent" if div.found is None else encode_record(div.found)
    return f"  row {div.position}: expected {expected}, found {found}"


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        ledger = load_ledger(args.ledger)
    except StorageViolation as exc:
        # A file that cannot even be parsed is an integrity failure here,
        # not a usage error: verify exists to pronounce on exactly that.
        _fail(str(exc))
        _emit(args, {"chain": {"valid": False, "failure_kind": exc.kind.name}, "table": None}, [])
        return EXIT_INTEGRITY

    report = verify_chain(ledger)
    payload: dict[str, Any] = {
        "chain": {
            "valid": report.valid,
            "records": len(ledger),
            "first_invalid_lid": report.first_invalid_lid,
            "failure_kind": None if report.failure_kind is None else report.failure_kind.name,
        },
        "table": None,
    }
    lines: list[str] = []
    if report.valid:
        lines.append(f"chain: valid ({len(ledger)} records)")
    else:
        lines.append("chain: INVALID")
        lines.append(f"first invalid lid: {report.first_invalid_lid}")
        lines.append(f"failure: {report.failure_kind.name}")
        _emit(args, payload, lines)
        return EXIT_INTEGRITY

    if args.table is not None:
        ledger_name = read_ledger_header(args.ledger)
        table_name, rows = read_data_file(args.table)
        if table_name != ledger_name:
            raise StoreMismatchError(
                f"ledger is for table '{ledger_name}' but data file is '{table_name}'"
            )
        consistency = verify_against_table(ledger, DataTable(table_name, tuple(rows)))
        payload["table"] = {
            "consistent": consistency.consistent,
            "rows": len(rows),
            "divergences": [_divergence_payload(d) for d in consistency.divergences],
        }
        if consistency.consistent:
            lines.append(f"table: consistent ({len(rows)} rows)")
        else:
            lines.append("table: DIVERGENT")
            lines.extend(_divergence_line(d) for d in consistency.divergences)
            _emit(args, payload, lines)
            return EXIT_INTEGRITY

    _emit(args, payload, lines)
    return EXIT_OK


def cmd_reconstruct(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.ledger)
    report = verify_chain(ledger)
    if not report.valid:
        _fail(
            f"ledger fails verification (first invalid lid: {report.first_invalid_lid}); "
            "refusing to reconstruct"
        )
        return EXIT_INTEGRITY
    name = read_ledger_header(args.ledger)
    table = reconstruct(ledger)
    write_data_file(args.out, name, table.rows)
    _emit(
        args,
        {"rows": len(table), "out": str(args.out), "name": name},
        [f"reconstructed {len(table)} rows into {args.out}"],
    )
    return EXIT_OK


def cmd_materialize(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.ledger)
    report = verify_chain(ledger)
    if not report.valid:
        _fail(
            f"ledger fails verification (first invalid lid: {report.first_invalid_lid}); "
            "refusing to materialize"
        )
        return EXIT_INTEGRITY
    view = materialize(ledger)
    entries = [
        {
            "opid": e.opid,
            "timestamp": e.timestamp,
            "description": e.description,
            "deleted": e.deleted,
        }
        for e in view.entries
    ]
    if args.out is not None:
        rendered = json.dumps(entries, separators=(",", ":"), ensure_ascii=False) + "\n"
        Path(args.out).write_text(rendered, encoding="utf-8")
    lines = []
    for e in view.entries:
        if e.deleted:
            lines.append(f"opid {e.opid}: deleted (tombstone at timestamp {e.timestamp})")
        else:
            lines.append(f"opid {e.opid}: timestamp={e.timestamp} description={e.description}")
    if args.out is not None:
        lines.append(f"wrote {len(entries)} entries to {args.out}")
    _emit(args, {"view": entries, "out": None if args.out is None else str(args.out)}, lines)
    return EXIT_OK


def cmd_tamper(args: argparse.Namespace) -> int:
    ledger = load_ledger(args.ledger)
    n = len(ledger)
    if n == 0:
        _fail("ledger holds no records; nothing to tamper with")
        return EXIT_USAGE

    if args.scenario == 1:
        if args.lid is None:
            _fail("--scenario 1 requires --lid")
            return EXIT_USAGE
        lid = args.lid
        cascade = measure_rewrite_cascade(ledger, lid) if 1 <= lid <= n else 0
        if args.rehash_through is None:
            tamper_update_in_place(args.ledger, lid, args.record, args.set)
            prediction = f"chain verification fails, first invalid lid: {lid}"
            rehashed = None
        else:
            tamper_with_rehash(args.ledger, lid, args.record, args.set, args.rehash_through)
            rehashed = args.rehash_through
            if args.rehash_through == n:
                prediction = (
                    "chain verification passes; only comparison against the honest "
                    "data table exposes the rewrite"
                )
            else:
                prediction = (
                    f"chain verification fails, first invalid lid: {args.rehash_through + 1}"
                )
    else:
        lid = n
        cascade = measure_rewrite_cascade(ledger, lid)
        tamper_with_rehash(args.ledger, lid, args.record, args.set, n)
        rehashed = n
        prediction = (
            "chain verification passes; only comparison against the honest "
            "data table exposes the rewrite"
        )

    _emit(
        args,
        {
            "scenario": args.scenario,
            "lid": lid,
            "record": args.record,
            "set": args.set,
            "rehash_through": rehashed,
            "records_requiring_rewrite": cascade,
            "prediction": prediction,
        },
        [
            f"mutated record {args.record} of lid {lid}: description -> {args.set!r}",
            (
                "stored hashes left untouched"
                if rehashed is None
                else f"re-hashed lids {lid}..{rehashed}"
            ),
            f"a verifiable forgery would need {cascade} record(s) rewritten",
            f"prediction: {prediction}",
        ],
    )
    return EXIT_OK


def cmd_status(args: argparse.Namespace) -> int:
    name = read_ledger_header(args.ledger)
    ledger = load_ledger(args.ledger)
    tip = ledger.tip_hash
    _emit(
        args,
        {
            "name": name,
            "records": len(ledger),
            "tip": None if tip is None else tip.hex,
        },
        [
            f"table name: {name}",
            f"records: {len(ledger)}",
            f"tip hash: {'-' if tip is None else tip.hex}",
        ],
    )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaintable",
        description="Tamper-evident append-only table backed by a hash-chained ledger.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_text: str, handler: Any) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--ledger", required=True, metavar="PATH", help="ledger file")
        p.add_argument("--json", action="store_true", help="emit one JSON object instead of text")
        p.set_defaults(handler=handler)
        return p

    p = add("init", "create a fresh ledger file and data file pair", cmd_init)
    p.add_argument("name", help="table name recorded in both headers")
    p.add_argument("--table", required=True, metavar="PATH", help="data file")

    p = add("append", "append one update batch (JSON array of records)", cmd_append)
    p.add_argument("--table", required=True, metavar="PATH", help="data file")
    p.add_argument(
        "--input", metavar="PATH", help="read the batch from this file instead of stdin"
    )

    p = add("verify", "verify the hash chain, optionally against a data file", cmd_verify)
    p.add_argument("--table", metavar="PATH", help="data file to compare against the ledger")

    p = add("reconstruct", "rebuild the data file from the ledger alone", cmd_reconstruct)
    p.add_argument("--out", required=True, metavar="PATH", help="where to write the rebuilt file")

    p = add("materialize", "replay the ledger into the current per-opid view", cmd_materialize)
    p.add_argument("--out", metavar="PATH", help="also write the view as JSON to this file")

    p = add("tamper", "simulate an attack by mutating stored bytes", cmd_tamper)
    p.add_argument("--scenario", required=True, type=int, choices=(1, 2), help="attack scenario")
    p.add_argument("--lid", type=int, help="target record (scenario 1)")
    p.add_argument("--set", required=True, metavar="TEXT", help="replacement description")
    p.add_argument(
        "--record", type=int, default=1, metavar="N", help="update record within the batch"
    )
    p.add_argument(
        "--rehash-through",
        type=int,
        metavar="LID",
        help="scenario 1: also recompute stored hashes up to this lid",
    )

    add("status", "print record count and tip hash", cmd_status)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        return args.handler(args)
    except StorageViolation as exc:
        _fail(str(exc))
        if exc.kind is StorageViolationKind.MULTI_RECORD_WRITE:
            return EXIT_USAGE
        return EXIT_STORAGE
    except (InvalidLedgerError, StoreInconsistentError) as exc:
        _fail(str(exc))
        return EXIT_INTEGRITY
    except (
        MalformedBatchError,
        DuplicateKeyError,
        StoreMismatchError,
        LidOutOfRangeError,
        FileExistsError,
        ValueError,
    ) as exc:
        _fail(str(exc))
        return EXIT_USAGE
    except (LockError, StorageFailureError, FileNotFoundError, OSError) as exc:
        _fail(str(exc))
        return EXIT_STORAGE
    except ChainTableError as exc:  # any remaining library error is a usage problem
        _fail(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
