"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import contextlib
import io
import json
import sys
from pathlib import Path
from random import Random

import pytest

from chaintable import (
    ChainTableStore,
    Ledger,
    UpdateBatch,
    UpdateRecord,
    append_batch,
)
from chaintable.cli import main as cli_main

GOLDEN_PATH = Path(__file__).parent / "golden" / "double_sha256.json"

# The worked example: Insertion 1, Insertion 2 (two rows), Update 1.
WORKED_BATCHES = (
    UpdateBatch([UpdateRecord(1, "t1", "opt1")]),
    UpdateBatch([UpdateRecord(2, "t2", "opt2"), UpdateRecord(3, "t3", "opt3")]),
    UpdateBatch([UpdateRecord(1, "t4", "opt4")]),
)

WORKED_HISTORY = (
    UpdateRecord(1, "t1", "opt1"),
    UpdateRecord(2, "t2", "opt2"),
    UpdateRecord(3, "t3", "opt3"),
    UpdateRecord(1, "t4", "opt4"),
)

WORKED_VIEW = (
    (1, "t4", "opt4"),
    (2, "t2", "opt2"),
    (3, "t3", "opt3"),
)


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads(GOLDEN_PATH.read_text())


def golden_digest(golden: dict, label: str) -> str:
    for case in golden["preimages"]:
        if case["label"] == label:
            return case["double_sha256"]
    raise KeyError(label)


def build_worked_ledger() -> Ledger:
    ledger = Ledger()
    for batch in WORKED_BATCHES:
        append_batch(ledger, batch)
    return ledger


@pytest.fixture
def worked_ledger() -> Ledger:
    return build_worked_ledger()


@pytest.fixture
def worked_store(tmp_path: Path) -> tuple[Path, Path]:
    """On-disk worked example; returns (ledger_path, table_path)."""
    ledger_path = tmp_path / "ledger.ctl"
    table_path = tmp_path / "table.ctd"
    with ChainTableStore.create(ledger_path, table_path, "Events") as store:
        for batch in WORKED_BATCHES:
            store.append(batch)
    return ledger_path, table_path


def random_batch(rng: Random, counter: list[int] | None = None) -> UpdateBatch:
    """A small batch; with counter, (opid, timestamp) keys are globally unique."""
    records = []
    for _ in range(rng.randint(1, 3)):
        if counter is None:
            opid = rng.randint(1, 9)
            timestamp = f"t{rng.randint(1, 99)}"
        else:
            counter[0] += 1
            opid = rng.randint(1, 9)
            timestamp = f"t{counter[0]}"
        description = None if rng.random() < 0.2 else f"d{rng.randint(0, 999)}"
        record = UpdateRecord(opid, timestamp, description)
        if any(r.key == record.key for r in records):
            continue
        records.append(record)
    if not records:
        records.append(UpdateRecord(1, f"t{rng.randint(100, 999)}", "d"))
    return UpdateBatch(records)


def random_ledger(rng: Random, n: int) -> Ledger:
    ledger = Ledger()
    for _ in range(n):
        append_batch(ledger, random_batch(rng))
    return ledger


def random_op_sequence(rng: Random, n_batches: int) -> list[UpdateBatch]:
    """Insert/update/delete mix with globally unique (opid, timestamp) keys."""
    counter = 0
    live_opids: list[int] = []
    next_opid = 1
    batches: list[UpdateBatch] = []
    for _ in range(n_batches):
        records = []
        for _ in range(rng.randint(1, 3)):
            counter += 1
            timestamp = f"t{counter}"
            choice = rng.random()
            if not live_opids or choice < 0.5:
                opid = next_opid
                next_opid += 1
                live_opids.append(opid)
                records.append(UpdateRecord(opid, timestamp, f"ins{counter}"))
            elif choice < 0.8:
                records.append(UpdateRecord(rng.choice(live_opids), timestamp, f"upd{counter}"))
            else:
                records.append(UpdateRecord(rng.choice(live_opids), timestamp, None))
        batches.append(UpdateBatch(records))
    return batches


def invoke_cli(argv: list, stdin_text: str | None = None) -> tuple[int, str, str]:
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    stdout, stderr = io.StringIO(), io.StringIO()
    old_stdin = sys.stdin
    try:
        sys.stdin = io.StringIO(stdin_text or "")
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = cli_main([str(a) for a in argv])
    finally:
        sys.stdin = old_stdin
    return code, stdout.getvalue(), stderr.getvalue()
