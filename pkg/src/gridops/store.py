"""Append-log persistence with per-namespace single-writer discipline.

Each namespace is one JSON-lines journal under the data directory. Records
are envelopes {"op": "append"|"upsert", "key": ..., "data": {...}}; upsert
namespaces resolve to a latest-wins map on load, append-only namespaces
(probe results, WMS history, audit) reject upserts outright. Loading a
data directory replays every journal, so a restart reconstructs exactly
the state that was appended.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Callable

from .errors import ValidationError
from .timeutil import format_ts, utcnow

NAMESPACES = ("registry", "probe_results", "usage", "wms", "tickets", "audit")
APPEND_ONLY = frozenset({"probe_results", "wms", "audit"})


class Store:
    """Durable append/upsert store over one journal file per namespace."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._locks = {ns: threading.Lock() for ns in NAMESPACES}
        self._appended: dict[str, list[dict]] = {ns: [] for ns in NAMESPACES}
        self._latest: dict[str, dict[str, dict]] = {ns: {} for ns in NAMESPACES}
        self._files = {}
        for ns in NAMESPACES:
            path = self._path(ns)
            if path.exists():
                self._load(ns, path)
            self._files[ns] = open(path, "a", encoding="utf-8")

    def _path(self, ns: str) -> Path:
        return self.data_dir / f"{ns}.log"

    def _load(self, ns: str, path: Path) -> None:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                envelope = json.loads(line)
                if envelope["op"] == "append":
                    self._appended[ns].append(envelope["data"])
                else:
                    self._latest[ns][envelope["key"]] = envelope["data"]

    def _check_ns(self, ns: str) -> None:
        if ns not in self._locks:
            raise ValidationError(f"unknown store namespace {ns!r}")

    def append(self, ns: str, record: dict) -> int:
        self._check_ns(ns)
        with self._locks[ns]:
            self._write(ns, {"op": "append", "data": record})
            self._appended[ns].append(record)
            return len(self._appended[ns]) - 1

    def upsert(self, ns: str, key: str, record: dict) -> None:
        self._check_ns(ns)
        if ns in APPEND_ONLY:
            raise ValidationError(f"namespace {ns!r} is append-only")
        with self._locks[ns]:
            self._write(ns, {"op": "upsert", "key": key, "data": record})
            self._latest[ns][key] = record

    def _write(self, ns: str, envelope: dict) -> None:
        fh = self._files[ns]
        fh.write(json.dumps(envelope, separators=(",", ":")) + "\n")
        fh.flush()

    def records(self, ns: str) -> list[dict]:
        """Appended records in arrival order (snapshot copy)."""
        self._check_ns(ns)
        with self._locks[ns]:
            return list(self._appended[ns])

    def latest(self, ns: str) -> dict[str, dict]:
        """Latest-wins view of an upsert namespace (snapshot copy)."""
        self._check_ns(ns)
        with self._locks[ns]:
            return dict(self._latest[ns])

    def healthy(self) -> bool:
        try:
            probe = self.data_dir / ".healthcheck"
            probe.write_text(format_ts(utcnow()))
            probe.unlink()
            return True
        except OSError:
            return False

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()
        self._files = {}


class AuditLog:
    """Append-only record of every mutating operation, one entry per call."""

    def __init__(self, store: Store | None = None, clock: Callable = utcnow):
        self._store = store
        self._memory: list[dict] = []
        self._clock = clock
        self._lock = threading.Lock()

    def emit(self, actor: str, operation: str, target: str, outcome: str) -> None:
        entry = {
            "ts": format_ts(self._clock()),
            "actor": actor,
            "operation": operation,
            "target": target,
            "outcome": outcome,
        }
        with self._lock:
            if self._store is not None:
                self._store.append("audit", entry)
            else:
                self._memory.append(entry)

    def entries(self) -> list[dict]:
        with self._lock:
            if self._store is not None:
                return self._store.records("audit")
            return list(self._memory)

    def __len__(self) -> int:
        return len(self.entries())
