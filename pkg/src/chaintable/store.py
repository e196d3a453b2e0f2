"""Coupled durable store: one data file and one ledger file in lockstep.

The ledger is the source of truth. Writes go ledger-first, data file second;
if the process dies between the two, open() finds the data file to be a
proper prefix of the ledger's row history and replays the missing suffix
before accepting new writes. The two paths are independent so the ledger can
live on separate, better-guarded storage than the table it protects.
"""

from __future__ import annotations

import os
from pathlib import Path

from .chain import ChainRecord, Ledger, append_batch, reconstruct, verify_chain
from .encoding import UpdateBatch
from .errors import (
    DuplicateKeyError,
    InvalidLedgerError,
    StorageFailureError,
    StoreInconsistentError,
    StoreMismatchError,
)
from .storage import LedgerFile
from .table import (
    DataTable,
    append_data_rows,
    create_data_file,
    read_data_file,
)


class ChainTableStore:
    """Single-writer handle over a (data file, ledger file) pair."""

    def __init__(
        self,
        ledger_file: LedgerFile,
        ledger: Ledger,
        table: DataTable,
        table_path: Path,
    ) -> None:
        self._ledger_file = ledger_file
        self._ledger = ledger
        self._table = table
        self._table_path = table_path
        self._broken = False

    @classmethod
    def create(
        cls,
        ledger_path: str | os.PathLike[str],
        table_path: str | os.PathLike[str],
        name: str,
    ) -> "ChainTableStore":
        """Create both files fresh; refuses to overwrite either."""
        ledger_path, table_path = Path(ledger_path), Path(table_path)
        if table_path.exists():
            raise FileExistsError(f"data file already exists: {table_path}")
        ledger_file = LedgerFile.create(ledger_path, name)
        try:
            create_data_file(table_path, name)
        except Exception:
            ledger_file.close()
            ledger_path.unlink(missing_ok=True)
            raise
        return cls(ledger_file, Ledger(), DataTable(name=name), table_path)

    @classmethod
    def open(
        cls,
        ledger_path: str | os.PathLike[str],
        table_path: str | os.PathLike[str],
        repair: bool = False,
    ) -> "ChainTableStore":
        """Open for writing: verify the chain, then reconcile the data file.

        A data file that is a proper prefix of the ledger history (the mark
        of an interrupted coupled write) is completed by appending the
        missing rows. Anything else that diverges refuses to open; run the
        verification commands instead of appending to a tampered store.
        """
        table_path = Path(table_path)
        ledger_file = LedgerFile.open(ledger_path, repair=repair)
        try:
            ledger = ledger_file.load()
            report = verify_chain(ledger)
            if not report.valid:
                raise InvalidLedgerError(report)
            table_name, rows = read_data_file(table_path)
            if table_name != ledger_file.name:
                raise StoreMismatchError(
                    f"data file is for table {table_name!r} but ledger is for "
                    f"{ledger_file.name!r}"
                )
            history = reconstruct(ledger).rows
            if tuple(rows) != history[: len(rows)] or len(rows) > len(history):
                raise StoreInconsistentError(
                    "data file content is not a prefix of the ledger history; "
                    "verify and reconstruct instead of appending"
                )
            if len(rows) < len(history):
                append_data_rows(table_path, history[len(rows) :])
                rows = list(history)
        except Exception:
            ledger_file.close()
            raise
        table = DataTable(name=table_name, rows=tuple(rows))
        return cls(ledger_file, ledger, table, table_path)

    @property
    def ledger(self) -> Ledger:
        return self._ledger

    @property
    def table(self) -> DataTable:
        return self._table

    @property
    def name(self) -> str:
        return self._ledger_file.name

    def append(self, batch: UpdateBatch) -> ChainRecord:
        """Durably apply one batch to ledger then table; returns the record."""
        if self._broken:
            raise StorageFailureError(
                "a previous append failed after the ledger committed; reopen "
                "the store to reconcile before writing again"
            )
        existing = self._table.keys()
        clashes = [record.key for record in batch if record.key in existing]
        if clashes:
            raise DuplicateKeyError(f"(opid, timestamp) already present in table: {clashes}")
        record = append_batch(self._ledger, batch)
        try:
            self._ledger_file.append(record)
        except Exception:
            self._ledger.records.pop()  # nothing durable happened
            raise
        try:
            append_data_rows(self._table_path, batch.records)
        except Exception as exc:
            self._broken = True
            raise StorageFailureError(
                f"ledger record {record.lid} committed but the data file write "
                f"failed; reopening will replay it ({exc})"
            ) from exc
        self._table = DataTable(name=self._table.name, rows=self._table.rows + batch.records)
        return record

    def close(self) -> None:
        self._ledger_file.close()

    def __enter__(self) -> "ChainTableStore":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
