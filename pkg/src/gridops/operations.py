"""Operator-on-duty rotation, trouble tickets, and resolution metrics.

Each country's operations team takes a one-week monitoring shift in a
fixed rotation. Problems spotted by monitoring become tickets against the
offending site; automatic detection only drafts suggestions, a human
confirms them. Resolution targets: one working day for simple problems,
three for complex ones, Mon-Fri at date granularity.
"""

from __future__ import annotations

import itertools
import json
import math
import threading
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import (
    AuthzDenied,
    DateBeforeEpoch,
    IllegalTransition,
    NoSiteContact,
    UnknownNode,
    UnknownSite,
    UnknownTicket,
    ValidationError,
)
from .probes import ProbeStatus, ProbeStore
from .registry import Action, CertIdentity, NodeKind, Privilege, Registry
from .timeutil import business_days_between, ensure_utc, format_ts, parse_ts, utcnow
from .wmsmon import Alarm, AlarmState


@dataclass(frozen=True)
class ShiftRota:
    countries: tuple[str, ...]
    epoch_week_start: date

    def __post_init__(self):
        if not self.countries:
            raise ValidationError("rota needs at least one country")
        if len(set(self.countries)) != len(self.countries):
            raise ValidationError("rota countries must be unique")
        if self.epoch_week_start.weekday() != 0:
            raise ValidationError("rota epoch must start on a Monday")

    def to_json(self) -> str:
        return json.dumps(
            {
                "countries": list(self.countries),
                "epoch_week_start": self.epoch_week_start.isoformat(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ShiftRota":
        data = json.loads(text)
        return cls(
            countries=tuple(data["countries"]),
            epoch_week_start=date.fromisoformat(data["epoch_week_start"]),
        )


def current_good(day: date, rota: ShiftRota) -> str:
    """Country on duty for the week containing day (stable within a week)."""
    if day < rota.epoch_week_start:
        raise DateBeforeEpoch(f"{day} precedes rota epoch {rota.epoch_week_start}")
    week = (day - rota.epoch_week_start).days // 7
    return rota.countries[week % len(rota.countries)]


class TicketState(str, Enum):
    NEW = "NEW"
    ASSIGNED = "ASSIGNED"
    IN_PROGRESS = "IN_PROGRESS"
    SOLVED = "SOLVED"
    VERIFIED = "VERIFIED"
    REOPENED = "REOPENED"


class Severity(str, Enum):
    SIMPLE = "SIMPLE"
    COMPLEX = "COMPLEX"


# SIMPLE within one working day, COMPLEX within three
RESOLUTION_TARGET_DAYS = {Severity.SIMPLE: 1, Severity.COMPLEX: 3}

LEGAL_TRANSITIONS: dict[TicketState, set[TicketState]] = {
    TicketState.NEW: {TicketState.ASSIGNED},
    TicketState.ASSIGNED: {TicketState.IN_PROGRESS},
    TicketState.IN_PROGRESS: {TicketState.SOLVED},
    TicketState.SOLVED: {TicketState.VERIFIED, TicketState.REOPENED},
    TicketState.REOPENED: {TicketState.IN_PROGRESS},
    TicketState.VERIFIED: set(),
}

OPEN_STATES = {
    TicketState.NEW,
    TicketState.ASSIGNED,
    TicketState.IN_PROGRESS,
    TicketState.REOPENED,
}


@dataclass
class HistoryEntry:
    at: datetime
    actor: str
    from_state: Optional[TicketState]
    to_state: TicketState
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "at": format_ts(self.at),
            "actor": self.actor,
            "from": self.from_state.value if self.from_state else None,
            "to": self.to_state.value,
            "note": self.note,
        }


def evidence_class(ref: dict) -> str:
    """Collapse an evidence reference to its dedup class."""
    kind = ref.get("kind")
    if kind == "probe":
        return f"service-down:{ref.get('service')}"
    if kind == "alarm":
        return f"alarm:{ref.get('wms')}:{ref.get('metric')}"
    return f"other:{json.dumps(ref, sort_keys=True)}"


@dataclass
class Ticket:
    id: str
    site: str
    opened_by: str
    assignee: str
    severity: Severity
    state: TicketState
    summary: str
    opened_at: datetime
    solved_at: Optional[datetime] = None
    closed_at: Optional[datetime] = None
    linked_evidence: list[dict] = field(default_factory=list)
    history: list[HistoryEntry] = field(default_factory=list)

    def evidence_classes(self) -> set[str]:
        return {evidence_class(ref) for ref in self.linked_evidence}

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "site": self.site,
            "opened_by": self.opened_by,
            "assignee": self.assignee,
            "severity": self.severity.value,
            "state": self.state.value,
            "summary": self.summary,
            "opened_at": format_ts(self.opened_at),
            "solved_at": format_ts(self.solved_at) if self.solved_at else None,
            "closed_at": format_ts(self.closed_at) if self.closed_at else None,
            "linked_evidence": list(self.linked_evidence),
            "history": [h.to_dict() for h in self.history],
        }


class TicketDesk:
    """Ticket lifecycle with an append-only event log per ticket.

    Mutations serialize per desk; the event stream (opened / transition /
    notification) is the persistence format, and replaying it rebuilds
    the same state.
    """

    def __init__(
        self,
        registry: Registry,
        sink: Callable[[dict], None] | None = None,
        audit: Callable[[str, str, str, str], None] | None = None,
        clock: Callable[[], datetime] | None = None,
    ):
        self.registry = registry
        self._lock = threading.RLock()
        self._tickets: dict[str, Ticket] = {}
        self._sink = sink or (lambda event: None)
        self._audit = audit or (lambda actor, op, target, outcome: None)
        self._clock = clock or utcnow
        self._counter = itertools.count(1)

    # ------------------------------------------------------------------

    def open_ticket(
        self,
        actor: CertIdentity,
        site: str,
        severity: Severity | str,
        summary: str,
        evidence: Iterable[dict] = (),
        now: datetime | None = None,
    ) -> Ticket:
        severity = Severity(severity)
        node = self.registry.find_node(site)
        if node is None or node.kind is not NodeKind.SITE:
            raise UnknownSite(f"no site {site!r}")
        opener = self.registry.identity(actor.subject_dn)
        admins = [
            c for c in self.registry.contacts_at(site) if c.privilege is Privilege.ADMIN
        ]
        if not admins:
            raise NoSiteContact(f"site {node.name!r} has no ADMIN contact to assign")
        assignee = admins[0]
        now = ensure_utc(now) if now else self._clock()
        with self._lock:
            ticket = Ticket(
                id=f"TT-{next(self._counter):06d}",
                site=site,
                opened_by=opener.mapped_contact,
                assignee=assignee.id,
                severity=severity,
                state=TicketState.NEW,
                summary=summary,
                opened_at=now,
                linked_evidence=list(evidence),
                history=[HistoryEntry(now, opener.mapped_contact, None, TicketState.NEW)],
            )
            self._tickets[ticket.id] = ticket
            self._sink({"event": "opened", "ticket": ticket.to_dict()})
            self._sink(
                {
                    "event": "notification",
                    "ticket": ticket.id,
                    "to": assignee.email,
                    "reason": "assigned",
                    "at": format_ts(now),
                }
            )
        self._audit(actor.subject_dn, "open_ticket", ticket.id, "OK")
        return ticket

    def transition(
        self,
        actor: CertIdentity,
        ticket_id: str,
        new_state: TicketState | str,
        note: str = "",
        now: datetime | None = None,
    ) -> Ticket:
        new_state = TicketState(new_state)
        now = ensure_utc(now) if now else self._clock()
        with self._lock:
            ticket = self._tickets.get(ticket_id)
            if ticket is None:
                raise UnknownTicket(f"no ticket {ticket_id!r}")
            if new_state not in LEGAL_TRANSITIONS[ticket.state]:
                raise IllegalTransition(
                    f"{ticket.state.value} -> {new_state.value} is not allowed"
                )
            ident = self.registry.identity(actor.subject_dn)
            contact = ident.mapped_contact
            site_admin = False
            try:
                site_admin = self.registry.check_authz(actor, Action.EDIT, ticket.site)
            except UnknownNode:
                pass
            if contact not in (ticket.assignee, ticket.opened_by) and not site_admin:
                raise AuthzDenied("only the assignee, the opener or a site admin may act")
            if ticket.history and now < ticket.history[-1].at:
                raise ValidationError("ticket history timestamps must be monotone")
            prev = ticket.state
            ticket.state = new_state
            if new_state is TicketState.SOLVED:
                ticket.solved_at = now
            if new_state is TicketState.VERIFIED:
                ticket.closed_at = now
            ticket.history.append(HistoryEntry(now, contact, prev, new_state, note))
            self._sink(
                {
                    "event": "transition",
                    "ticket": ticket.id,
                    "actor": contact,
                    "from": prev.value,
                    "to": new_state.value,
                    "note": note,
                    "at": format_ts(now),
                }
            )
        self._audit(actor.subject_dn, "transition_ticket", ticket_id, "OK")
        return ticket

    def get(self, ticket_id: str) -> Ticket:
        with self._lock:
            ticket = self._tickets.get(ticket_id)
            if ticket is None:
                raise UnknownTicket(f"no ticket {ticket_id!r}")
            return ticket

    def tickets(self, state: TicketState | None = None) -> list[Ticket]:
        with self._lock:
            out = list(self._tickets.values())
        if state is not None:
            out = [t for t in out if t.state is state]
        return sorted(out, key=lambda t: t.id)

    # ------------------------------------------------------------------

    def replay(self, events: Iterable[dict]) -> None:
        """Rebuild desk state from the persisted event stream."""
        sink, audit = self._sink, self._audit
        self._sink = lambda event: None
        self._audit = lambda actor, op, target, outcome: None
        try:
            max_seq = 0
            for event in events:
                kind = event.get("event")
                if kind == "opened":
                    data = event["ticket"]
                    ticket = Ticket(
                        id=data["id"],
                        site=data["site"],
                        opened_by=data["opened_by"],
                        assignee=data["assignee"],
                        severity=Severity(data["severity"]),
                        state=TicketState(data["state"]),
                        summary=data["summary"],
                        opened_at=parse_ts(data["opened_at"]),
                        linked_evidence=list(data.get("linked_evidence", [])),
                        history=[
                            HistoryEntry(
                                at=parse_ts(h["at"]),
                                actor=h["actor"],
                                from_state=TicketState(h["from"]) if h["from"] else None,
                                to_state=TicketState(h["to"]),
                                note=h.get("note", ""),
                            )
                            for h in data.get("history", [])
                        ],
                    )
                    self._tickets[ticket.id] = ticket
                    max_seq = max(max_seq, int(ticket.id.split("-")[1]))
                elif kind == "transition":
                    ticket = self._tickets[event["ticket"]]
                    prev = TicketState(event["from"])
                    new = TicketState(event["to"])
                    at = parse_ts(event["at"])
                    ticket.state = new
                    if new is TicketState.SOLVED:
                        ticket.solved_at = at
                    if new is TicketState.VERIFIED:
                        ticket.closed_at = at
                    ticket.history.append(
                        HistoryEntry(at, event.get("actor", ""), prev, new, event.get("note", ""))
                    )
                # notifications carry no state
            self._counter = itertools.count(max_seq + 1)
        finally:
            self._sink, self._audit = sink, audit


@dataclass(frozen=True)
class DraftTicket:
    site: str
    severity: Severity
    summary: str
    evidence: tuple[dict, ...]
    evidence_class: str

    def to_dict(self) -> dict:
        return {
            "site": self.site,
            "severity": self.severity.value,
            "summary": self.summary,
            "evidence": list(self.evidence),
            "evidence_class": self.evidence_class,
        }


DOWN_STATUSES = {ProbeStatus.ERROR, ProbeStatus.TIMEOUT}


def suggest_tickets(
    registry: Registry,
    probe_store: ProbeStore,
    alarms: Iterable[Alarm],
    tickets: Iterable[Ticket],
    now: datetime | None = None,
    staleness: timedelta = timedelta(hours=1),
) -> list[DraftTicket]:
    """Draft a ticket per persistent failure that nobody is working yet.

    A critical service must be DOWN on its last two consecutive results
    (single blips are debounced) and the latest result must still be fresh
    (within the staleness horizon, default twice the standard probe
    period); a RAISED alarm qualifies immediately. Any open ticket already
    referencing the same evidence class suppresses the draft. Output is
    deterministic for fixed inputs.
    """
    now = ensure_utc(now) if now else utcnow()
    covered: set[str] = set()
    for ticket in tickets:
        if ticket.state in OPEN_STATES:
            covered |= ticket.evidence_classes()

    drafts: list[DraftTicket] = []
    for svc in sorted(registry.nodes(), key=lambda n: n.id):
        if svc.kind is not NodeKind.SERVICE or not svc.critical:
            continue
        last_two = probe_store.last_n(svc.id, 2)
        if len(last_two) < 2 or not all(r.status in DOWN_STATUSES for r in last_two):
            continue
        if now - last_two[-1].timestamp >= staleness:
            continue  # an old outage is history, not a current failure
        cls = f"service-down:{svc.id}"
        if cls in covered:
            continue
        covered.add(cls)
        site = registry.site_of(svc.id)
        if site is None:
            continue
        drafts.append(
            DraftTicket(
                site=site.id,
                severity=Severity.COMPLEX,
                summary=f"critical service {svc.name} is DOWN "
                f"({last_two[-1].status.value} twice in a row)",
                evidence=tuple(
                    {
                        "kind": "probe",
                        "service": svc.id,
                        "probe": r.probe_id,
                        "ts": format_ts(r.timestamp),
                    }
                    for r in last_two
                ),
                evidence_class=cls,
            )
        )

    for alarm in sorted(alarms, key=lambda a: (a.wms, a.metric)):
        if alarm.state is not AlarmState.RAISED:
            continue
        cls = f"alarm:{alarm.wms}:{alarm.metric}"
        if cls in covered:
            continue
        covered.add(cls)
        site = registry.site_of(alarm.wms)
        if site is None:
            continue
        drafts.append(
            DraftTicket(
                site=site.id,
                severity=Severity.SIMPLE,
                summary=f"WMS alarm {alarm.metric} raised (peak {alarm.peak_value:g})",
                evidence=(
                    {
                        "kind": "alarm",
                        "wms": alarm.wms,
                        "metric": alarm.metric,
                        "raised_at": format_ts(alarm.raised_at),
                    },
                ),
                evidence_class=cls,
            )
        )
    return drafts


def percentile(sorted_values: list[int], q: float) -> Optional[float]:
    """Nearest-rank percentile over a pre-sorted list."""
    if not sorted_values:
        return None
    rank = max(1, math.ceil(q * len(sorted_values)))
    return float(sorted_values[rank - 1])


@dataclass
class SeverityStats:
    count: int
    median_days: Optional[float]
    p90_days: Optional[float]
    target_met_fraction: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "median_days": self.median_days,
            "p90_days": self.p90_days,
            "target_met_fraction": self.target_met_fraction,
        }


@dataclass
class ResolutionStats:
    window: tuple[datetime, datetime]
    per_severity: dict[Severity, SeverityStats]

    def to_dict(self) -> dict:
        return {
            "window": {"from": format_ts(self.window[0]), "to": format_ts(self.window[1])},
            "per_severity": {
                sev.value: stats.to_dict() for sev, stats in sorted(self.per_severity.items())
            },
        }


def resolution_metrics(
    window: tuple[datetime, datetime], tickets: Iterable[Ticket]
) -> ResolutionStats:
    """Business-day resolution stats for tickets opened (and solved) in window.

    target_met_fraction is vacuously 1.0 for a severity with no solved
    tickets in the window.
    """
    start, end = ensure_utc(window[0]), ensure_utc(window[1])
    buckets: dict[Severity, list[int]] = {sev: [] for sev in Severity}
    for ticket in tickets:
        if ticket.solved_at is None:
            continue
        if not (start <= ticket.opened_at < end):
            continue
        days = business_days_between(ticket.opened_at.date(), ticket.solved_at.date())
        buckets[ticket.severity].append(days)

    per_severity: dict[Severity, SeverityStats] = {}
    for sev, days in buckets.items():
        days.sort()
        target = RESOLUTION_TARGET_DAYS[sev]
        met = sum(1 for d in days if d <= target)
        per_severity[sev] = SeverityStats(
            count=len(days),
            median_days=percentile(days, 0.5),
            p90_days=percentile(days, 0.9),
            target_met_fraction=met / len(days) if days else 1.0,
        )
    return ResolutionStats(window=(start, end), per_severity=per_severity)
