"""Batch-job accounting: log parsing, normalization, pivoted usage queries.

Accepted log grammar, one record per line (only end-of-job lines count)::

    MM/DD/YYYY HH:MM:SS;E;<job_id>;<space-separated key=value pairs>

Required keys: user, group, queue, start, end (unix epoch seconds),
exec_host (host/slot entries joined by '+'), resources_used.walltime and
resources_used.cput (both HH:MM:SS, hours unbounded). Parsing is total:
malformed end-of-job lines become error entries, everything else is
ignored.

CPU hours are kept as exact rationals end to end. A job that ran on
multiple slots is an MPI job and its usage is walltime times slot count;
serial usage takes max(cput, walltime) to survive schedulers that report
zero cput. One CPU-year is 8766 hours (365.25 days).
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, ROUND_HALF_EVEN
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional
from xml.etree import ElementTree

from .errors import EmptyWindow, InvalidDims, UnknownSite, ValidationError, ZeroCapacity
from .registry import NodeKind, Registry
from .timeutil import UTC, ensure_utc, format_ts, parse_ts

log = logging.getLogger(__name__)

HOURS_PER_CPU_YEAR = 8766  # 365.25 days


class JobType(str, Enum):
    SERIAL = "SERIAL"
    MPI = "MPI"


class Dimension(str, Enum):
    VO = "VO"
    COUNTRY = "COUNTRY"
    SITE = "SITE"
    MONTH = "MONTH"
    JOB_TYPE = "JOB_TYPE"


class Metric(str, Enum):
    CPU_HOURS = "CPU_HOURS"
    CPU_YEARS = "CPU_YEARS"
    JOB_COUNT = "JOB_COUNT"


_HMS_RE = re.compile(r"^(\d+):([0-5]?\d):([0-5]?\d)$")
_REQUIRED_KEYS = (
    "user",
    "group",
    "queue",
    "start",
    "end",
    "exec_host",
    "resources_used.walltime",
    "resources_used.cput",
)


def parse_hms(text: str) -> int:
    m = _HMS_RE.match(text)
    if not m:
        raise ValueError(f"bad HH:MM:SS value {text!r}")
    h, mins, secs = (int(g) for g in m.groups())
    return h * 3600 + mins * 60 + secs


@dataclass
class JobRecord:
    job_id: str
    site: str
    vo: str
    user: str
    queue: str
    submit: int
    start: int
    end: int
    walltime_s: int
    cput_s: int
    exec_slots: list[tuple[str, int]]

    @property
    def job_type(self) -> JobType:
        return JobType.MPI if len(self.exec_slots) >= 2 else JobType.SERIAL

    @property
    def cores(self) -> int:
        return len(self.exec_slots)


@dataclass(frozen=True)
class ParseError:
    line_no: int
    reason: str


def parse_batch_log(site: str, stream: Iterable[str] | str) -> tuple[list[JobRecord], list[ParseError]]:
    """Total parser: one JobRecord per well-formed 'E' line, errors otherwise."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    records: list[JobRecord] = []
    errors: list[ParseError] = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split(";", 3)
        if len(parts) < 2 or parts[1] != "E":
            continue  # not an end-of-job line
        try:
            records.append(_parse_e_line(site, parts))
        except ValueError as exc:
            errors.append(ParseError(line_no, str(exc)))
    return records, errors


def _parse_e_line(site: str, parts: list[str]) -> JobRecord:
    if len(parts) != 4:
        raise ValueError("truncated end-of-job line")
    stamp, _, job_id, kv_blob = parts
    try:
        datetime.strptime(stamp, "%m/%d/%Y %H:%M:%S")
    except ValueError:
        raise ValueError(f"bad timestamp prefix {stamp!r}") from None
    if not job_id:
        raise ValueError("empty job id")

    kv: dict[str, str] = {}
    for token in kv_blob.split():
        if "=" not in token:
            raise ValueError(f"malformed key=value token {token!r}")
        key, _, value = token.partition("=")
        kv[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in kv]
    if missing:
        raise ValueError(f"missing required keys: {', '.join(missing)}")

    try:
        start = int(kv["start"])
        end = int(kv["end"])
        submit = int(kv.get("ctime", kv["start"]))
    except ValueError:
        raise ValueError("start/end must be unix epoch seconds") from None
    if end < start:
        raise ValueError(f"end {end} before start {start}")

    walltime_s = parse_hms(kv["resources_used.walltime"])
    cput_s = parse_hms(kv["resources_used.cput"])

    slots: list[tuple[str, int]] = []
    for entry in kv["exec_host"].split("+"):
        host, sep, slot = entry.partition("/")
        if not sep or not host:
            raise ValueError(f"malformed exec_host entry {entry!r}")
        try:
            slots.append((host, int(slot)))
        except ValueError:
            raise ValueError(f"non-numeric slot in exec_host entry {entry!r}") from None
    if not slots:
        raise ValueError("empty exec_host")

    return JobRecord(
        job_id=job_id,
        site=site,
        vo=kv["group"],
        user=kv["user"],
        queue=kv["queue"],
        submit=submit,
        start=start,
        end=end,
        walltime_s=walltime_s,
        cput_s=cput_s,
        exec_slots=slots,
    )


@dataclass(frozen=True)
class UsageRecord:
    job_id: str
    site: str
    vo: str
    country: str
    end: datetime
    cores: int
    cpu_hours: Fraction
    job_type: JobType

    @property
    def key(self) -> tuple[str, str]:
        return (self.site, self.job_id)

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "site": self.site,
            "vo": self.vo,
            "country": self.country,
            "end": format_ts(self.end),
            "cores": self.cores,
            "cpu_hours": f"{self.cpu_hours.numerator}/{self.cpu_hours.denominator}",
            "job_type": self.job_type.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UsageRecord":
        num, _, den = data["cpu_hours"].partition("/")
        return cls(
            job_id=data["job_id"],
            site=data["site"],
            vo=data["vo"],
            country=data["country"],
            end=parse_ts(data["end"]),
            cores=int(data["cores"]),
            cpu_hours=Fraction(int(num), int(den or 1)),
            job_type=JobType(data["job_type"]),
        )


def normalize(job: JobRecord, registry: Registry) -> UsageRecord:
    """Apply the usage formulas and resolve the job's country."""
    site = registry.find_node(job.site)
    if site is None or site.kind is not NodeKind.SITE:
        raise UnknownSite(f"no site {job.site!r} in registry")
    country = registry.country_of(job.site)
    if job.job_type is JobType.MPI:
        cpu_hours = Fraction(job.walltime_s * job.cores, 3600)
    else:
        cpu_hours = Fraction(max(job.cput_s, job.walltime_s), 3600)
    return UsageRecord(
        job_id=job.job_id,
        site=job.site,
        vo=job.vo,
        country=country.name if country else "",
        end=datetime.fromtimestamp(job.end, UTC),
        cores=job.cores,
        cpu_hours=cpu_hours,
        job_type=job.job_type,
    )


def merge_streams(
    serial: Iterable[UsageRecord], mpi: Iterable[UsageRecord]
) -> list[UsageRecord]:
    """Union keyed by (site, job_id); the MPI record wins a collision.

    The serial accounting stream sees only the mother node of a parallel
    job, so the MPI stream carries the corrected core count.
    """
    merged: dict[tuple[str, str], UsageRecord] = {}
    for record in serial:
        merged[record.key] = record
    for record in mpi:
        merged[record.key] = record
    return sorted(merged.values(), key=lambda r: (r.end, r.site, r.job_id))


class UsageStore:
    """Usage records keyed by (site, job_id) with incremental MPI-wins merge."""

    def __init__(self, sink: Callable[[UsageRecord], None] | None = None):
        self._lock = threading.Lock()
        self._records: dict[tuple[str, str], UsageRecord] = {}
        self._sink = sink or (lambda record: None)

    def add(self, record: UsageRecord) -> bool:
        """Returns False when an existing MPI record outranks the new one."""
        with self._lock:
            existing = self._records.get(record.key)
            if (
                existing is not None
                and existing.job_type is JobType.MPI
                and record.job_type is JobType.SERIAL
            ):
                return False
            if existing == record:
                return False
            self._records[record.key] = record
            self._sink(record)
            return True

    def add_all(self, records: Iterable[UsageRecord]) -> int:
        return sum(1 for r in records if self.add(r))

    def preload(self, records: Iterable[UsageRecord]) -> None:
        """Restore from persistence without re-running merge or sinks."""
        with self._lock:
            for record in records:
                self._records[record.key] = record

    def records(self) -> list[UsageRecord]:
        with self._lock:
            return sorted(self._records.values(), key=lambda r: (r.end, r.site, r.job_id))

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


@dataclass
class UsageFilter:
    vo: Optional[str] = None
    country: Optional[str] = None
    site: Optional[str] = None
    window: Optional[tuple[datetime, datetime]] = None
    job_type: Optional[JobType] = None

    def matches(self, record: UsageRecord) -> bool:
        if self.vo is not None and record.vo != self.vo:
            return False
        if self.country is not None and record.country != self.country:
            return False
        if self.site is not None and record.site != self.site:
            return False
        if self.job_type is not None and record.job_type is not self.job_type:
            return False
        if self.window is not None:
            start, end = ensure_utc(self.window[0]), ensure_utc(self.window[1])
            if not (start <= record.end < end):
                return False
        return True


def _dim_value(record: UsageRecord, dim: Dimension) -> str:
    if dim is Dimension.VO:
        return record.vo
    if dim is Dimension.COUNTRY:
        return record.country
    if dim is Dimension.SITE:
        return record.site
    if dim is Dimension.MONTH:
        return record.end.strftime("%Y-%m")
    return record.job_type.value


def _metric_value(record: UsageRecord, metric: Metric) -> Fraction:
    if metric is Metric.CPU_HOURS:
        return record.cpu_hours
    if metric is Metric.CPU_YEARS:
        return record.cpu_hours / HOURS_PER_CPU_YEAR
    return Fraction(1)


@dataclass
class UsageTable:
    rows_dim: Dimension
    cols_dim: Dimension
    metric: Metric
    cells: dict[tuple[str, str], Fraction] = field(default_factory=dict)

    def row_labels(self) -> list[str]:
        return sorted({row for row, _ in self.cells})

    def col_labels(self) -> list[str]:
        return sorted({col for _, col in self.cells})

    def row_total(self, row: str) -> Fraction:
        return sum((v for (r, _), v in self.cells.items() if r == row), Fraction(0))

    def col_total(self, col: str) -> Fraction:
        return sum((v for (_, c), v in self.cells.items() if c == col), Fraction(0))

    def grand_total(self) -> Fraction:
        return sum(self.cells.values(), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "rows": self.rows_dim.value,
            "cols": self.cols_dim.value,
            "metric": self.metric.value,
            "cells": [
                {"row": r, "col": c, "value": float(v)}
                for (r, c), v in sorted(self.cells.items())
            ],
            "row_totals": {r: float(self.row_total(r)) for r in self.row_labels()},
            "col_totals": {c: float(self.col_total(c)) for c in self.col_labels()},
            "grand_total": float(self.grand_total()),
        }


def query_usage(
    records: Iterable[UsageRecord],
    filter: UsageFilter,
    rows_dim: Dimension,
    cols_dim: Dimension,
    metric: Metric,
) -> UsageTable:
    """Pivot matching records; an empty result is a valid all-zero table."""
    rows_dim, cols_dim, metric = Dimension(rows_dim), Dimension(cols_dim), Metric(metric)
    if rows_dim is cols_dim:
        raise InvalidDims("rows and cols dimensions must differ")
    table = UsageTable(rows_dim=rows_dim, cols_dim=cols_dim, metric=metric)
    for record in records:
        if not filter.matches(record):
            continue
        key = (_dim_value(record, rows_dim), _dim_value(record, cols_dim))
        table.cells[key] = table.cells.get(key, Fraction(0)) + _metric_value(record, metric)
    return table


def utilization(
    usage_hours: float | Fraction,
    avg_cpus: int,
    window: tuple[datetime, datetime],
) -> float:
    """Delivered hours over theoretical capacity, clamped to [0, 1]."""
    if avg_cpus <= 0:
        raise ZeroCapacity("average CPU count must be positive")
    start, end = ensure_utc(window[0]), ensure_utc(window[1])
    if end <= start:
        raise EmptyWindow("utilization window is empty")
    capacity_hours = (end - start).total_seconds() / 3600 * avg_cpus
    ratio = float(usage_hours) / capacity_hours
    if ratio > 1:
        log.warning("utilization %.3f exceeds capacity; clamping to 1.0", ratio)
        return 1.0
    return max(0.0, ratio)


# -- XML export / import -----------------------------------------------------

def _fmt3(value: Fraction) -> str:
    dec = (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
        Decimal("0.001"), rounding=ROUND_HALF_EVEN
    )
    return f"{dec:.3f}"


def export_xml(table: UsageTable) -> str:
    """Schema: usage-table root, cell/row-total/col-total/grand-total children,
    all values rendered with exactly 3 fraction digits."""
    root = ElementTree.Element(
        "usage-table",
        {
            "rows": table.rows_dim.value,
            "cols": table.cols_dim.value,
            "metric": table.metric.value,
        },
    )
    for (row, col), value in sorted(table.cells.items()):
        ElementTree.SubElement(
            root, "cell", {"row": row, "col": col, "value": _fmt3(value)}
        )
    for row in table.row_labels():
        ElementTree.SubElement(
            root, "row-total", {"row": row, "value": _fmt3(table.row_total(row))}
        )
    for col in table.col_labels():
        ElementTree.SubElement(
            root, "col-total", {"col": col, "value": _fmt3(table.col_total(col))}
        )
    ElementTree.SubElement(root, "grand-total", {"value": _fmt3(table.grand_total())})
    return ElementTree.tostring(root, encoding="unicode")


def import_xml(text: str) -> UsageTable:
    try:
        root = ElementTree.fromstring(text)
    except ElementTree.ParseError as exc:
        raise ValidationError(f"malformed usage-table document: {exc}") from exc
    if root.tag != "usage-table":
        raise ValidationError(f"unexpected root element {root.tag!r}")
    table = UsageTable(
        rows_dim=Dimension(root.attrib["rows"]),
        cols_dim=Dimension(root.attrib["cols"]),
        metric=Metric(root.attrib["metric"]),
    )
    for cell in root.findall("cell"):
        value = Fraction(Decimal(cell.attrib["value"]))
        table.cells[(cell.attrib["row"], cell.attrib["col"])] = value
    return table
