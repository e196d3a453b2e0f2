"""Hash-chained ledger core: hashing, append, verification, replay.

Every chain record stores (lid, hash, prevHash, update). The record hash is a
double SHA-256 over the preimage

    ascii-decimal lid | canonical update bytes | prevHash hex

with 0x7C ("|") separators and an empty third segment for the genesis record,
whose prevHash is absent. The inner digest's raw 32 bytes feed the outer
SHA-256, matching the usual double-SHA convention. Tampering any stored field
of record k breaks recomputation at k or linkage at k+1, so restoring a
verifiable chain forces rewriting every hash from k to the end.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

from .encoding import Hash, UpdateBatch, UpdateRecord, canonical_encode_update
from .errors import DuplicateKeyError, InvalidLedgerError, MalformedBatchError
from .table import ActualView, DataRow, DataTable, ViewEntry

HASH_ALGORITHM = "double-sha256-v1"

_SEPARATOR = b"\x7c"


class FailureKind(enum.Enum):
    HASH_MISMATCH = "HASH_MISMATCH"
    LINK_BREAK = "LINK_BREAK"
    LID_GAP = "LID_GAP"
    GENESIS_VIOLATION = "GENESIS_VIOLATION"


@dataclass(frozen=True)
class ChainRecord:
    """One ledger row. prev_hash is None only for the genesis record."""

    lid: int
    hash: Hash
    prev_hash: Hash | None
    update: UpdateBatch

    def __post_init__(self) -> None:
        if not isinstance(self.lid, int) or isinstance(self.lid, bool) or self.lid < 1:
            raise MalformedBatchError(f"lid must be a positive integer, got {self.lid!r}")


@dataclass
class Ledger:
    """Ordered chain records with contiguous lids 1..n.

    Records are immutable; only the container grows, and only via
    append_batch. Construction does not re-verify so that tampered ledgers
    remain representable; verify_chain is the integrity check.
    """

    records: list[ChainRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def tip_hash(self) -> Hash | None:
        return self.records[-1].hash if self.records else None

    def copy(self) -> "Ledger":
        return Ledger(list(self.records))


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a chain scan; valid iff no record failed."""

    valid: bool
    first_invalid_lid: int | None = None
    failure_kind: FailureKind | None = None


@dataclass(frozen=True)
class Divergence:
    """One row-level disagreement between ledger history and a table."""

    position: int  # 1-based row position
    opid: int | None
    expected: DataRow | None  # what the ledger says; None = extra row in table
    found: DataRow | None  # what the table holds; None = row missing


@dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    divergences: tuple[Divergence, ...] = ()


def compute_hash(lid: int, update: UpdateBatch, prev_hash: Hash | None) -> Hash:
    """Double SHA-256 of the record preimage (see module docstring)."""
    if not isinstance(lid, int) or isinstance(lid, bool) or lid < 1:
        raise MalformedBatchError(f"lid must be a positive integer, got {lid!r}")
    preimage = (
        str(lid).encode("ascii")
        + _SEPARATOR
        + canonical_encode_update(update)
        + _SEPARATOR
        + (prev_hash.hex.encode("ascii") if prev_hash is not None else b"")
    )
    inner = hashlib.sha256(preimage).digest()
    return Hash(hashlib.sha256(inner).digest())


def verify_chain(ledger: Ledger) -> VerificationReport:
    """Scan the chain in order and report the first failing record.

    Checks per record, in order: lid contiguity, genesis rule (prevHash
    absent iff lid 1), linkage to the previous stored hash, and recomputation
    of the stored hash. Never modifies the ledger; an empty chain is valid.
    """

    def invalid(lid: int, kind: FailureKind) -> VerificationReport:
        return VerificationReport(valid=False, first_invalid_lid=lid, failure_kind=kind)

    for index, record in enumerate(ledger.records):
        expected_lid = index + 1
        if record.lid != expected_lid:
            return invalid(expected_lid, FailureKind.LID_GAP)
        if (record.prev_hash is None) != (record.lid == 1):
            return invalid(record.lid, FailureKind.GENESIS_VIOLATION)
        if index > 0 and record.prev_hash != ledger.records[index - 1].hash:
            return invalid(record.lid, FailureKind.LINK_BREAK)
        if compute_hash(record.lid, record.update, record.prev_hash) != record.hash:
            return invalid(record.lid, FailureKind.HASH_MISMATCH)
    return VerificationReport(valid=True)


def _require_valid(ledger: Ledger) -> None:
    report = verify_chain(ledger)
    if not report.valid:
        raise InvalidLedgerError(report)


def append_batch(ledger: Ledger, batch: UpdateBatch) -> ChainRecord:
    """Append exactly one chain record carrying batch; returns the record.

    Refuses to extend a ledger that fails verification. Existing records are
    never touched.
    """
    if not isinstance(batch, UpdateBatch):
        raise MalformedBatchError(f"not an update batch: {batch!r}")
    _require_valid(ledger)
    lid = len(ledger.records) + 1
    prev_hash = ledger.tip_hash
    record = ChainRecord(
        lid=lid,
        hash=compute_hash(lid, batch, prev_hash),
        prev_hash=prev_hash,
        update=batch,
    )
    ledger.records.append(record)
    return record


def reconstruct(ledger: Ledger) -> DataTable:
    """Rebuild the full append-only row history from a valid ledger."""
    _require_valid(ledger)
    rows: list[DataRow] = []
    for record in ledger.records:
        rows.extend(record.update.records)
    return DataTable(name="reconstructed", rows=tuple(rows))


def materialize(ledger: Ledger) -> ActualView:
    """Replay a valid ledger into the current per-opid state.

    The last-replayed record per opid wins (lid order, then within-batch
    order); a null description stays visible as a tombstone. Implemented as a
    direct replay over the chain records, independent of reconstruct and
    actual_view, so the two routes can be checked against each other.
    """
    _require_valid(ledger)
    latest: dict[int, UpdateRecord] = {}
    for record in ledger.records:
        for update in record.update:
            latest[update.opid] = update
    entries = tuple(
        ViewEntry(opid, latest[opid].timestamp, latest[opid].description)
        for opid in sorted(latest)
    )
    return ActualView(entries)


def verify_against_table(ledger: Ledger, table: DataTable) -> ConsistencyReport:
    """Compare the ledger's reconstructed history against a table, row by row.

    Every positional disagreement is reported, including rows missing from
    the table and extra rows beyond the ledger history.
    """
    expected_rows = reconstruct(ledger).rows
    found_rows = table.rows
    divergences: list[Divergence] = []
    for index in range(max(len(expected_rows), len(found_rows))):
        expected = expected_rows[index] if index < len(expected_rows) else None
        found = found_rows[index] if index < len(found_rows) else None
        if expected != found:
            opid = expected.opid if expected is not None else found.opid  # type: ignore[union-attr]
            divergences.append(
                Divergence(position=index + 1, opid=opid, expected=expected, found=found)
            )
    return ConsistencyReport(consistent=not divergences, divergences=tuple(divergences))


def apply_batch(
    table: DataTable, ledger: Ledger, batch: UpdateBatch
) -> tuple[DataTable, ChainRecord]:
    """Write one batch to the table and its ledger in lockstep.

    All validation happens before either side changes, so an error leaves
    both untouched: the batch must be well formed, none of its (opid,
    timestamp) keys may already exist in the table, and the ledger must
    verify. Returns the grown table and the new chain record.
    """
    if not isinstance(batch, UpdateBatch):
        raise MalformedBatchError(f"not an update batch: {batch!r}")
    existing = table.keys()
    clashes = [record.key for record in batch if record.key in existing]
    if clashes:
        raise DuplicateKeyError(f"(opid, timestamp) already present in table: {clashes}")
    _require_valid(ledger)
    record = append_batch(ledger, batch)
    grown = DataTable(name=table.name, rows=table.rows + batch.records)
    return grown, record
