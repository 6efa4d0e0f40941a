"""Service probing: scheduling, result recording, current-status derivation.

The engine mirrors a client/server availability monitor: a scheduler works
out which probes are due, an executor produces results (the shipped one
replays scripted outcomes; real middleware submission is pluggable), and
the store keeps an append-only, replay-idempotent result log per service.

Wire format for results, one JSON object per line::

    {"service":"<id>","probe":"<probe_id>","ts":"<ISO-8601 UTC>",
     "status":"OK|WARN|ERROR|TIMEOUT","detail":"..."}
"""

from __future__ import annotations

import bisect
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import (
    FutureTimestamp,
    MpiNotSupported,
    PayloadTooLarge,
    UnknownService,
    UnknownSite,
    ValidationError,
)
from .registry import NodeKind, NodeStatus, Registry, ServiceType, TopologySnapshot
from .timeutil import UTC, ensure_utc, format_ts, parse_ts, utcnow

DEFAULT_PERIOD = timedelta(minutes=30)
MPI_PROBE_ID = "mpi-setup"
MPI_PERIOD = timedelta(days=7)
CLOCK_SKEW = timedelta(minutes=5)
MAX_DETAIL_BYTES = 4096
STALENESS_FACTOR = 2  # results older than factor*period stop counting


class ProbeStatus(str, Enum):
    OK = "OK"
    WARN = "WARN"
    ERROR = "ERROR"
    TIMEOUT = "TIMEOUT"


class ServiceState(str, Enum):
    UP = "UP"
    DEGRADED = "DEGRADED"
    DOWN = "DOWN"
    UNKNOWN = "UNKNOWN"


STATUS_TO_STATE = {
    ProbeStatus.OK: ServiceState.UP,
    ProbeStatus.WARN: ServiceState.DEGRADED,
    ProbeStatus.ERROR: ServiceState.DOWN,
    ProbeStatus.TIMEOUT: ServiceState.DOWN,
}


@dataclass(frozen=True)
class ProbeDefinition:
    probe_id: str
    service_type: ServiceType
    period: timedelta = DEFAULT_PERIOD
    timeout: timedelta = timedelta(minutes=5)
    critical: bool = True

    def __post_init__(self):
        if self.period <= timedelta(0):
            raise ValidationError("probe period must be positive")
        if self.timeout >= self.period:
            raise ValidationError("probe timeout must be shorter than its period")


def default_catalogue(period: timedelta = DEFAULT_PERIOD) -> list[ProbeDefinition]:
    """One standard probe per service type plus the weekly MPI check.

    The catalogue is configuration: deployments override it, tests shrink it.
    """
    timeout = min(timedelta(minutes=5), period / 2)
    probes = [
        ProbeDefinition("ce-job-submit", ServiceType.CE, period, timeout),
        ProbeDefinition("se-transfer", ServiceType.SE, period, timeout),
        ProbeDefinition("bdii-query", ServiceType.SBDII, period, timeout),
        ProbeDefinition("wms-match", ServiceType.WMS, period, timeout),
        ProbeDefinition("voms-proxy", ServiceType.VOMS, period, timeout),
        ProbeDefinition("lfc-ls", ServiceType.LFC, period, timeout),
        ProbeDefinition("fts-channel", ServiceType.FTS, period, timeout),
        ProbeDefinition("myproxy-get", ServiceType.MYPROXY, period, timeout),
        ProbeDefinition("tcp-ping", ServiceType.OTHER, period, timeout),
        ProbeDefinition(MPI_PROBE_ID, ServiceType.CE, MPI_PERIOD, timedelta(hours=1)),
    ]
    return probes


@dataclass(frozen=True)
class ProbeResult:
    service: str
    probe_id: str
    timestamp: datetime
    status: ProbeStatus
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "timestamp", ensure_utc(self.timestamp))
        object.__setattr__(self, "status", ProbeStatus(self.status))

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.service, self.probe_id, format_ts(self.timestamp))

    @property
    def result_id(self) -> str:
        return "|".join(self.key)

    def to_dict(self) -> dict:
        return {
            "service": self.service,
            "probe": self.probe_id,
            "ts": format_ts(self.timestamp),
            "status": self.status.value,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProbeResult":
        return cls(
            service=data["service"],
            probe_id=data["probe"],
            timestamp=parse_ts(data["ts"]),
            status=ProbeStatus(data["status"]),
            detail=data.get("detail", ""),
        )

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "ProbeResult":
        return cls.from_dict(json.loads(line))


def parse_results_jsonl(text: str) -> list[ProbeResult]:
    results = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            results.append(ProbeResult.from_line(line))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValidationError(f"bad result line {lineno}: {exc}") from exc
    return results


@dataclass
class ServiceStatus:
    service: str
    state: ServiceState
    as_of: datetime
    source_result: Optional[ProbeResult] = None

    def to_dict(self) -> dict:
        return {
            "service": self.service,
            "state": self.state.value,
            "as_of": format_ts(self.as_of),
            "source_result": (
                json.loads(self.source_result.to_line()) if self.source_result else None
            ),
        }


@dataclass
class MpiCheckReport:
    site: str
    timestamp: datetime
    worker_nodes: list[str]
    concurrent: bool
    passed: bool

    def __post_init__(self):
        self.timestamp = ensure_utc(self.timestamp)
        if self.passed and (not self.concurrent or len(self.worker_nodes) < 2):
            raise ValidationError(
                "a passed MPI check requires concurrent execution on >= 2 worker nodes"
            )


class ProbeStore:
    """Append-only result log, indexed per service, replay-idempotent."""

    def __init__(self):
        self._lock = threading.Lock()
        self._by_service: dict[str, list[ProbeResult]] = {}
        self._ts_index: dict[str, list[datetime]] = {}
        self._seen: set[tuple[str, str, str]] = set()

    def append(self, result: ProbeResult) -> tuple[str, bool]:
        """Returns (result id, appended?); replays return the existing id."""
        with self._lock:
            if result.key in self._seen:
                return result.result_id, False
            self._seen.add(result.key)
            series = self._by_service.setdefault(result.service, [])
            index = self._ts_index.setdefault(result.service, [])
            pos = bisect.bisect_right(index, result.timestamp)
            series.insert(pos, result)
            index.insert(pos, result.timestamp)
            return result.result_id, True

    def results_for(
        self,
        service: str,
        window: tuple[datetime, datetime] | None = None,
    ) -> list[ProbeResult]:
        with self._lock:
            series = self._by_service.get(service, [])
            if window is None:
                return list(series)
            index = self._ts_index.get(service, [])
            lo = bisect.bisect_left(index, ensure_utc(window[0]))
            hi = bisect.bisect_left(index, ensure_utc(window[1]))
            return series[lo:hi]

    def latest(self, service: str) -> Optional[ProbeResult]:
        with self._lock:
            series = self._by_service.get(service, [])
            return series[-1] if series else None

    def last_n(self, service: str, n: int) -> list[ProbeResult]:
        with self._lock:
            return list(self._by_service.get(service, [])[-n:])

    def services(self) -> list[str]:
        with self._lock:
            return sorted(self._by_service)

    def last_run_map(self) -> dict[tuple[str, str], datetime]:
        """Most recent timestamp per (service, probe), for the scheduler."""
        out: dict[tuple[str, str], datetime] = {}
        with self._lock:
            for service, series in self._by_service.items():
                for result in series:
                    key = (service, result.probe_id)
                    if key not in out or result.timestamp > out[key]:
                        out[key] = result.timestamp
        return out

    def __len__(self) -> int:
        with self._lock:
            return sum(len(s) for s in self._by_service.values())


def due_probes(
    now: datetime,
    topology: TopologySnapshot | Registry,
    last_run: dict[tuple[str, str], datetime],
    catalogue: Iterable[ProbeDefinition] | None = None,
) -> list[tuple[str, ProbeDefinition]]:
    """Every ACTIVE service whose probe never ran or ran >= period ago.

    last_run is keyed by (service id, probe id): the MPI check runs on a
    weekly cadence against CE services that also carry a 30-minute job
    probe, so a single per-service timestamp cannot schedule both.
    Ordered oldest-first, never-run services ahead of everything.
    """
    now = ensure_utc(now)
    catalogue = list(catalogue) if catalogue is not None else default_catalogue()
    nodes = topology.nodes if isinstance(topology, TopologySnapshot) else topology.nodes()
    by_id = {n.id: n for n in nodes}
    never = datetime.min.replace(tzinfo=UTC)

    due: list[tuple[datetime, str, str, ProbeDefinition]] = []
    for node in nodes:
        if node.kind is not NodeKind.SERVICE or node.status is not NodeStatus.ACTIVE:
            continue
        for probe in catalogue:
            if probe.service_type is not node.service_type:
                continue
            if probe.probe_id == MPI_PROBE_ID and not _site_supports_mpi(node, by_id):
                continue
            last = last_run.get((node.id, probe.probe_id))
            if last is None:
                due.append((never, node.id, probe.probe_id, probe))
            elif now - ensure_utc(last) >= probe.period:
                due.append((ensure_utc(last), node.id, probe.probe_id, probe))
    due.sort(key=lambda item: (item[0], item[1], item[2]))
    return [(service, probe) for _, service, _, probe in due]


def _site_supports_mpi(service_node, nodes_by_id) -> bool:
    site = nodes_by_id.get(service_node.parent)
    return site is not None and site.attributes.get("mpi", "").lower() == "true"


AuditSink = Callable[[str, str, str, str], None]


class ProbeEngine:
    """Records results against the registry and derives current status."""

    def __init__(
        self,
        registry: Registry,
        catalogue: Iterable[ProbeDefinition] | None = None,
        audit: AuditSink | None = None,
        sink: Callable[[ProbeResult], None] | None = None,
    ):
        self.registry = registry
        self.catalogue = list(catalogue) if catalogue is not None else default_catalogue()
        self.store = ProbeStore()
        self._audit = audit or (lambda actor, op, target, outcome: None)
        self._sink = sink or (lambda result: None)

    def _period_for(self, service_type: ServiceType, probe_id: str | None = None) -> timedelta:
        if probe_id is not None:
            for probe in self.catalogue:
                if probe.probe_id == probe_id and probe.service_type is service_type:
                    return probe.period
        for probe in self.catalogue:
            if probe.service_type is service_type and probe.probe_id != MPI_PROBE_ID:
                return probe.period
        return DEFAULT_PERIOD

    def record_result(
        self,
        result: ProbeResult,
        now: datetime | None = None,
        actor: str = "system:probe",
    ) -> str:
        now = ensure_utc(now) if now else utcnow()
        node = self.registry.find_node(result.service)
        if node is None or node.kind is not NodeKind.SERVICE:
            raise UnknownService(f"no service {result.service!r}")
        if result.timestamp > now + CLOCK_SKEW:
            raise FutureTimestamp(
                f"result timestamp {format_ts(result.timestamp)} is in the future"
            )
        if len(result.detail.encode("utf-8")) > MAX_DETAIL_BYTES:
            raise PayloadTooLarge(f"detail exceeds {MAX_DETAIL_BYTES} bytes")
        result_id, appended = self.store.append(result)
        if appended:
            self._sink(result)
            self._audit(actor, "record_result", result.service, "OK")
        return result_id

    def latest_status(self, service: str, now: datetime) -> ServiceStatus:
        now = ensure_utc(now)
        node = self.registry.find_node(service)
        if node is None or node.kind is not NodeKind.SERVICE:
            raise UnknownService(f"no service {service!r}")
        last = self.store.latest(service)
        if last is None:
            return ServiceStatus(service, ServiceState.UNKNOWN, now, None)
        period = self._period_for(node.service_type, last.probe_id)
        if now - last.timestamp >= STALENESS_FACTOR * period:
            return ServiceStatus(service, ServiceState.UNKNOWN, now, last)
        return ServiceStatus(service, STATUS_TO_STATE[last.status], now, last)

    def record_mpi_check(
        self,
        report: MpiCheckReport,
        now: datetime | None = None,
        actor: str = "system:mpi-check",
    ) -> ProbeResult:
        site = self.registry.find_node(report.site)
        if site is None or site.kind is not NodeKind.SITE:
            raise UnknownSite(f"no site {report.site!r}")
        if site.attributes.get("mpi", "").lower() != "true":
            raise MpiNotSupported(f"site {report.site!r} does not advertise MPI support")
        ces = [
            n
            for n in self.registry.children(site.id)
            if n.kind is NodeKind.SERVICE and n.service_type is ServiceType.CE
        ]
        if not ces:
            raise MpiNotSupported(f"site {report.site!r} has no CE service to test")
        ce = min(ces, key=lambda n: n.name)
        detail = json.dumps(
            {
                "worker_nodes": report.worker_nodes,
                "concurrent": report.concurrent,
                "passed": report.passed,
            },
            separators=(",", ":"),
        )
        result = ProbeResult(
            service=ce.id,
            probe_id=MPI_PROBE_ID,
            timestamp=report.timestamp,
            status=ProbeStatus.OK if report.passed else ProbeStatus.ERROR,
            detail=detail,
        )
        self.record_result(result, now=now, actor=actor)
        return result

    def statuses_under(self, scope: str, now: datetime) -> list[ServiceStatus]:
        return [
            self.latest_status(svc.id, now) for svc in self.registry.services_under(scope)
        ]


class SimulatedExecutor:
    """Probe executor that replays scripted outcomes.

    outcomes maps (service id, probe id) -> ProbeStatus; unlisted probes
    come back OK. Real job-submission executors plug in behind the same
    execute() call.
    """

    def __init__(self, outcomes: dict[tuple[str, str], ProbeStatus] | None = None):
        self.outcomes = dict(outcomes or {})

    def execute(self, service: str, probe: ProbeDefinition, now: datetime) -> ProbeResult:
        status = ProbeStatus(self.outcomes.get((service, probe.probe_id), ProbeStatus.OK))
        return ProbeResult(
            service=service,
            probe_id=probe.probe_id,
            timestamp=now,
            status=status,
            detail=f"simulated {probe.probe_id}",
        )


class ProbeScheduler:
    """Single periodic loop; executions fan out up to the parallelism bound."""

    def __init__(self, engine: ProbeEngine, executor=None, parallelism: int = 16):
        self.engine = engine
        self.executor = executor or SimulatedExecutor()
        self.parallelism = max(1, parallelism)
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.last_tick: datetime | None = None

    def run_once(self, now: datetime | None = None) -> list[str]:
        now = ensure_utc(now) if now else utcnow()
        due = due_probes(
            now, self.engine.registry, self.engine.store.last_run_map(), self.engine.catalogue
        )
        ids: list[str] = []
        if due:
            with ThreadPoolExecutor(max_workers=min(self.parallelism, len(due))) as pool:
                results = list(
                    pool.map(lambda sp: self.executor.execute(sp[0], sp[1], now), due)
                )
            for result in results:
                ids.append(self.engine.record_result(result, now=now, actor="system:scheduler"))
        self.last_tick = now
        return ids

    @property
    def alive(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self, interval_s: float = 60.0) -> None:
        if self.alive:
            return
        self._stop.clear()

        def loop():
            while not self._stop.wait(interval_s):
                self.run_once()

        self._thread = threading.Thread(target=loop, name="probe-scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
