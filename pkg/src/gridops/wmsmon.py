"""Collector-agent monitoring of workload-management services.

Agents aggregate a fixed five-metric catalogue locally and ship snapshots
to the collector, which keeps per-WMS history and drives threshold alarms.
Alarm rules carry a hysteresis band (raise above / clear below) so a value
oscillating inside the band never flaps, plus a troubleshooting guide URL
surfaced with every raised alarm.

Snapshot wire format::

    {"wms":"<id>","ts":"<ISO-8601>","metrics":{...},"agent_version":"x.y"}
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, replace
from datetime import datetime
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import (
    MissingMetric,
    OutOfOrderSnapshot,
    OutOfRange,
    UnknownMetric,
    UnknownWms,
    ValidationError,
)
from .registry import NodeKind, Registry, ServiceType
from .timeutil import ensure_utc, format_ts, parse_ts

METRIC_CATALOGUE = (
    "input_queue_length",
    "jobs_waiting",
    "load_1min",
    "disk_used_pct",
    "daemons_down_count",
)


@dataclass(frozen=True)
class WmsSnapshot:
    wms: str
    timestamp: datetime
    metrics: dict[str, float]
    agent_version: str = "1.0"

    def __post_init__(self):
        object.__setattr__(self, "timestamp", ensure_utc(self.timestamp))

    def to_dict(self) -> dict:
        return {
            "wms": self.wms,
            "ts": format_ts(self.timestamp),
            "metrics": {k: self.metrics[k] for k in METRIC_CATALOGUE},
            "agent_version": self.agent_version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WmsSnapshot":
        return cls(
            wms=data["wms"],
            timestamp=parse_ts(data["ts"]),
            metrics={k: float(v) for k, v in data["metrics"].items()},
            agent_version=data.get("agent_version", "1.0"),
        )


def agent_snapshot(
    readings: dict[str, float], wms: str, now: datetime, agent_version: str = "1.0"
) -> WmsSnapshot:
    """Validate local readings into a transmittable snapshot."""
    metrics: dict[str, float] = {}
    for name in METRIC_CATALOGUE:
        if name not in readings:
            raise MissingMetric(f"reading for {name!r} missing")
        metrics[name] = float(readings[name])
    if not 0 <= metrics["disk_used_pct"] <= 100:
        raise OutOfRange(f"disk_used_pct {metrics['disk_used_pct']} outside [0, 100]")
    if metrics["daemons_down_count"] < 0:
        raise OutOfRange("daemons_down_count must be >= 0")
    return WmsSnapshot(wms=wms, timestamp=ensure_utc(now), metrics=metrics,
                       agent_version=agent_version)


@dataclass(frozen=True)
class AlarmRule:
    metric: str
    raise_above: float
    clear_below: float
    guide_url: str = ""

    def __post_init__(self):
        if self.metric not in METRIC_CATALOGUE:
            raise UnknownMetric(f"no metric {self.metric!r} in catalogue")
        if self.clear_below > self.raise_above:
            raise ValidationError("clear_below must not exceed raise_above (hysteresis band)")


def load_rules(text: str) -> list[AlarmRule]:
    """Rule file: JSON array of {metric, raise_above, clear_below, guide_url}."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValidationError("alarm rule file must be a JSON array")
    return [
        AlarmRule(
            metric=item["metric"],
            raise_above=float(item["raise_above"]),
            clear_below=float(item["clear_below"]),
            guide_url=item.get("guide_url", ""),
        )
        for item in data
    ]


class AlarmState(str, Enum):
    RAISED = "RAISED"
    CLEARED = "CLEARED"


@dataclass
class Alarm:
    wms: str
    metric: str
    state: AlarmState
    raised_at: datetime
    peak_value: float
    cleared_at: Optional[datetime] = None
    guide_url: str = ""

    def to_dict(self) -> dict:
        return {
            "wms": self.wms,
            "metric": self.metric,
            "state": self.state.value,
            "raised_at": format_ts(self.raised_at),
            "cleared_at": format_ts(self.cleared_at) if self.cleared_at else None,
            "peak_value": self.peak_value,
            "guide_url": self.guide_url,
        }


class WmsMonitor:
    """Collector: stores snapshot history and evaluates alarm rules.

    Ingestion is serialized per WMS; alarm evaluation is atomic with the
    history append. Snapshots must arrive in strictly increasing timestamp
    order per WMS (duplicates rejected), which keeps replay deterministic.
    """

    def __init__(
        self,
        registry: Registry,
        rules: Iterable[AlarmRule] = (),
        sink: Callable[[WmsSnapshot], None] | None = None,
        audit: Callable[[str, str, str, str], None] | None = None,
    ):
        self.registry = registry
        self.rules: dict[str, AlarmRule] = {r.metric: r for r in rules}
        self._lock = threading.Lock()
        self._history: dict[str, list[WmsSnapshot]] = {}
        self._active: dict[tuple[str, str], Alarm] = {}
        self._completed: list[Alarm] = []
        self._sink = sink or (lambda snapshot: None)
        self._audit = audit or (lambda actor, op, target, outcome: None)

    def _check_wms(self, wms: str) -> None:
        node = self.registry.find_node(wms)
        if (
            node is None
            or node.kind is not NodeKind.SERVICE
            or node.service_type is not ServiceType.WMS
        ):
            raise UnknownWms(f"no WMS service {wms!r}")

    def ingest_snapshot(
        self, snapshot: WmsSnapshot, actor: str = "system:wms-agent"
    ) -> list[Alarm]:
        """Append to history and return the alarm transitions it caused."""
        self._check_wms(snapshot.wms)
        for name in METRIC_CATALOGUE:
            if name not in snapshot.metrics:
                raise MissingMetric(f"snapshot missing metric {name!r}")
        with self._lock:
            history = self._history.setdefault(snapshot.wms, [])
            if history and snapshot.timestamp <= history[-1].timestamp:
                raise OutOfOrderSnapshot(
                    f"snapshot for {snapshot.wms} at {format_ts(snapshot.timestamp)} "
                    "does not advance history"
                )
            history.append(snapshot)
            transitions = self._evaluate(snapshot)
            self._sink(snapshot)
        self._audit(actor, "ingest_snapshot", snapshot.wms, "OK")
        return transitions

    def _evaluate(self, snapshot: WmsSnapshot) -> list[Alarm]:
        transitions: list[Alarm] = []
        for metric, rule in self.rules.items():
            value = snapshot.metrics[metric]
            key = (snapshot.wms, metric)
            active = self._active.get(key)
            if active is None:
                if value > rule.raise_above:
                    alarm = Alarm(
                        wms=snapshot.wms,
                        metric=metric,
                        state=AlarmState.RAISED,
                        raised_at=snapshot.timestamp,
                        peak_value=value,
                        guide_url=rule.guide_url,
                    )
                    self._active[key] = alarm
                    transitions.append(replace(alarm))
            else:
                active.peak_value = max(active.peak_value, value)
                if value < rule.clear_below:
                    active.state = AlarmState.CLEARED
                    active.cleared_at = snapshot.timestamp
                    self._completed.append(active)
                    del self._active[key]
                    transitions.append(replace(active))
        return transitions

    def wms_history(
        self, wms: str, metric: str, window: tuple[datetime, datetime]
    ) -> list[tuple[datetime, float]]:
        self._check_wms(wms)
        if metric not in METRIC_CATALOGUE:
            raise UnknownMetric(f"no metric {metric!r} in catalogue")
        start, end = ensure_utc(window[0]), ensure_utc(window[1])
        with self._lock:
            return [
                (s.timestamp, s.metrics[metric])
                for s in self._history.get(wms, [])
                if start <= s.timestamp < end
            ]

    def active_alarms(self) -> list[Alarm]:
        with self._lock:
            return [replace(a) for a in sorted(self._active.values(), key=lambda a: (a.wms, a.metric))]

    def all_alarms(self) -> list[Alarm]:
        with self._lock:
            completed = [replace(a) for a in self._completed]
            active = [replace(a) for a in self._active.values()]
        return sorted(completed + active, key=lambda a: (a.raised_at, a.wms, a.metric))

    def replay(self, snapshots: Iterable[WmsSnapshot]) -> None:
        """Rebuild history and alarm state from a stored snapshot stream.

        Persistence and audit hooks stay quiet: the stream being replayed
        is already durable.
        """
        sink, audit = self._sink, self._audit
        self._sink = lambda snapshot: None
        self._audit = lambda actor, op, target, outcome: None
        try:
            for snapshot in snapshots:
                self.ingest_snapshot(snapshot)
        finally:
            self._sink, self._audit = sink, audit
