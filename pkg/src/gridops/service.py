"""Suite façade: one object wiring every engine to the persistent store.

Both the HTTP API and the CLI go through this class, so reports are
identical no matter which face asked, and every mutating operation is
audited exactly once with its outcome. Construction replays the journals
in the data directory, reproducing the pre-restart state.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Optional

from . import accounting, fixtures, operations, probes, sla, wmsmon
from .config import Config
from .errors import GridOpsError, UnknownNode, UnknownSite, ValidationError
from .probes import ProbeEngine, ProbeResult, ProbeScheduler, default_catalogue
from .registry import (
    CertIdentity,
    Contact,
    NodeKind,
    Registry,
    RegistryNode,
    TopologySnapshot,
)
from .sla import AvailabilityReport, SlaEngine
from .store import AuditLog, Store
from .timeutil import ensure_utc, format_ts, parse_ts, utcnow

KIND_ORDER = {NodeKind.ROC: 0, NodeKind.COUNTRY: 1, NodeKind.SITE: 2, NodeKind.SERVICE: 3}


class GridOps:
    """The operations suite bound to one data directory."""

    def __init__(self, config: Config | None = None):
        self.config = config or Config()
        self.store = Store(self.config.store.data_dir)
        self.audit = AuditLog(self.store)

        self.registry = Registry()
        self._load_registry()

        period = timedelta(minutes=self.config.probes.default_period_min)
        self.probe_engine = ProbeEngine(
            self.registry,
            catalogue=default_catalogue(period),
            sink=self._persist_result,
        )
        for record in self.store.records("probe_results"):
            self.probe_engine.store.append(ProbeResult.from_dict(record))

        self.usage = accounting.UsageStore(sink=self._persist_usage)
        self.usage.preload(
            accounting.UsageRecord.from_dict(d) for d in self.store.latest("usage").values()
        )

        rules = self._load_rules()
        self.wms = wmsmon.WmsMonitor(self.registry, rules, sink=self._persist_snapshot)
        self.wms.replay(wmsmon.WmsSnapshot.from_dict(d) for d in self.store.records("wms"))

        self.tickets = operations.TicketDesk(self.registry, sink=self._persist_ticket_event)
        self.tickets.replay(self.store.records("tickets"))

        self.sla = SlaEngine(
            self.registry,
            self.probe_engine.store,
            period=period,
            sla_threshold=self.config.sla.threshold,
            quarter_epoch=self.config.sla.quarter_epoch,
        )
        self.scheduler = ProbeScheduler(
            self.probe_engine, parallelism=self.config.probes.parallelism
        )
        self.rota = self._load_rota()

    # ------------------------------------------------------------------
    # persistence hooks and loaders

    def _persist_result(self, result: ProbeResult) -> None:
        self.store.append("probe_results", result.to_dict())

    def _persist_usage(self, record: accounting.UsageRecord) -> None:
        self.store.upsert("usage", f"{record.site}|{record.job_id}", record.to_dict())

    def _persist_snapshot(self, snapshot: wmsmon.WmsSnapshot) -> None:
        self.store.append("wms", snapshot.to_dict())

    def _persist_ticket_event(self, event: dict) -> None:
        self.store.append("tickets", event)

    def _persist_node(self, node: RegistryNode) -> None:
        self.store.upsert("registry", f"node:{node.id}", node.to_dict())
        self._persist_topology_meta()

    def _persist_topology_meta(self) -> None:
        self.store.upsert(
            "registry",
            "meta:topology",
            {"version": self.registry.version, "mutated_at": format_ts(self.registry.mutated_at)},
        )

    def _load_registry(self) -> None:
        latest = self.store.latest("registry")
        nodes = [
            RegistryNode.from_dict(v) for k, v in latest.items() if k.startswith("node:")
        ]
        for node in sorted(nodes, key=lambda n: KIND_ORDER[n.kind]):
            self.registry.seed_node(node)
        for key, value in latest.items():
            if key.startswith("contact:"):
                self.registry.seed_contact(Contact.from_dict(value))
        for key, value in latest.items():
            if key.startswith("ident:"):
                self.registry.map_identity(value["subject_dn"], value["contact"])
        meta = latest.get("meta:topology")
        if meta:
            self.registry.restore_counters(meta["version"], parse_ts(meta["mutated_at"]))

    def _load_rules(self) -> list[wmsmon.AlarmRule]:
        if self.config.alarms.rule_file:
            return wmsmon.load_rules(Path(self.config.alarms.rule_file).read_text())
        return fixtures.default_alarm_rules()

    def _load_rota(self) -> Optional[operations.ShiftRota]:
        stored = self.store.latest("registry").get("meta:rota")
        if stored:
            return operations.ShiftRota(
                countries=tuple(stored["countries"]),
                epoch_week_start=date.fromisoformat(stored["epoch_week_start"]),
            )
        if self.config.operations.rota_file:
            return operations.ShiftRota.from_json(
                Path(self.config.operations.rota_file).read_text()
            )
        return None

    @contextmanager
    def _audited(self, actor: str, operation: str, target: str):
        try:
            yield
        except GridOpsError as exc:
            self.audit.emit(actor, operation, target, exc.code)
            raise
        else:
            self.audit.emit(actor, operation, target, "OK")

    # ------------------------------------------------------------------
    # registry surface

    def default_scope(self) -> str:
        rocs = [n for n in self.registry.nodes() if n.kind is NodeKind.ROC]
        if not rocs:
            raise UnknownNode("registry has no ROC yet")
        return sorted(rocs, key=lambda n: n.id)[0].id

    def upsert_node(self, actor_dn: str, node_data: dict) -> str:
        node = RegistryNode.from_dict(node_data)
        with self._audited(actor_dn, "upsert_node", node.id):
            node_id = self.registry.upsert_node(CertIdentity(actor_dn, ""), node)
        self._persist_node(node)
        return node_id

    def import_topology_document(self, text: str, actor: str = "system:import") -> int:
        """Merge a topology snapshot into the registry (bootstrap path)."""
        snapshot = TopologySnapshot.from_document(text)
        with self._audited(actor, "import_topology", f"{len(snapshot.nodes)} nodes"):
            for node in sorted(snapshot.nodes, key=lambda n: KIND_ORDER[n.kind]):
                self.registry.seed_node(node)
                self.store.upsert("registry", f"node:{node.id}", node.to_dict())
            self.registry.restore_counters(snapshot.version, snapshot.generated_at)
            self._persist_topology_meta()
        return len(snapshot.nodes)

    def add_contact(self, contact: Contact, subject_dn: str | None = None,
                    actor: str = "system:import") -> None:
        with self._audited(actor, "add_contact", contact.id):
            self.registry.seed_contact(contact)
            self.store.upsert("registry", f"contact:{contact.id}", contact.to_dict())
            if subject_dn:
                ident = self.registry.map_identity(subject_dn, contact.id)
                self.store.upsert(
                    "registry",
                    f"ident:{ident.subject_dn}",
                    {"subject_dn": ident.subject_dn, "contact": contact.id},
                )

    def topology_document(self, scope: str | None = None) -> str:
        return self.registry.export_topology(scope or self.default_scope()).to_document()

    def resource_summary(self, scope: str | None = None) -> dict:
        return self.registry.resource_summary(scope or self.default_scope()).to_dict()

    # ------------------------------------------------------------------
    # probes / status

    def ingest_results_text(self, text: str, actor: str) -> dict:
        results = probes.parse_results_jsonl(text)
        with self._audited(actor, "ingest_results", f"{len(results)} results"):
            new = 0
            before = len(self.probe_engine.store)
            for result in results:
                self.probe_engine.record_result(result, actor=actor)
            new = len(self.probe_engine.store) - before
        return {"received": len(results), "appended": new}

    def record_mpi_check(self, report: probes.MpiCheckReport, actor: str) -> ProbeResult:
        with self._audited(actor, "record_mpi_check", report.site):
            return self.probe_engine.record_mpi_check(report, actor=actor)

    def statuses(self, scope: str | None = None, now: datetime | None = None) -> list[dict]:
        now = ensure_utc(now) if now else utcnow()
        return [
            s.to_dict()
            for s in self.probe_engine.statuses_under(scope or self.default_scope(), now)
        ]

    # ------------------------------------------------------------------
    # accounting

    def ingest_accounting(self, site: str, text: str, actor: str) -> dict:
        with self._audited(actor, "ingest_accounting", site):
            if not self.registry.has_node(site):
                raise UnknownSite(f"no site {site!r}")
            records, errors = accounting.parse_batch_log(site, text)
            usage_records = [accounting.normalize(job, self.registry) for job in records]
            self.usage.add_all(usage_records)
        return {"records": len(records), "errors": len(errors),
                "error_lines": [e.line_no for e in errors[:50]]}

    def usage_table(
        self,
        rows: str,
        cols: str,
        metric: str,
        vo: str | None = None,
        country: str | None = None,
        site: str | None = None,
        window: tuple[datetime, datetime] | None = None,
        job_type: str | None = None,
    ) -> accounting.UsageTable:
        flt = accounting.UsageFilter(
            vo=vo,
            country=country,
            site=site,
            window=window,
            job_type=accounting.JobType(job_type) if job_type else None,
        )
        return accounting.query_usage(
            self.usage.records(),
            flt,
            accounting.Dimension(rows),
            accounting.Dimension(cols),
            accounting.Metric(metric),
        )

    # ------------------------------------------------------------------
    # sla

    def availability_figure(self, scope: str | None, window) -> dict:
        fig = self.sla.availability_figure(scope or self.default_scope(), window)
        return fig.to_dict()

    def quarterly_report(self, index: int) -> AvailabilityReport:
        return self.sla.quarterly_report(self.sla.quarter(index))

    def window_report(self, window) -> AvailabilityReport:
        return self.sla.window_report(window)

    # ------------------------------------------------------------------
    # wms

    def ingest_wms_snapshot(self, data: dict, actor: str) -> list[dict]:
        snapshot = wmsmon.WmsSnapshot.from_dict(data)
        with self._audited(actor, "ingest_wms_snapshot", snapshot.wms):
            transitions = self.wms.ingest_snapshot(snapshot, actor=actor)
        return [t.to_dict() for t in transitions]

    def wms_history(self, wms: str, metric: str, window) -> list[dict]:
        series = self.wms.wms_history(wms, metric, window)
        return [{"ts": format_ts(ts), "value": value} for ts, value in series]

    def alarms(self, active_only: bool = False) -> list[dict]:
        alarms = self.wms.active_alarms() if active_only else self.wms.all_alarms()
        return [a.to_dict() for a in alarms]

    # ------------------------------------------------------------------
    # operations

    def open_ticket(
        self,
        actor_dn: str,
        site: str,
        severity: str,
        summary: str,
        evidence: Iterable[dict] = (),
    ) -> operations.Ticket:
        with self._audited(actor_dn, "open_ticket", site):
            return self.tickets.open_ticket(
                CertIdentity(actor_dn, ""), site, severity, summary, evidence
            )

    def transition_ticket(
        self, actor_dn: str, ticket_id: str, new_state: str, note: str = ""
    ) -> operations.Ticket:
        with self._audited(actor_dn, "transition_ticket", ticket_id):
            return self.tickets.transition(CertIdentity(actor_dn, ""), ticket_id, new_state, note)

    def list_tickets(self, state: str | None = None) -> list[dict]:
        filt = operations.TicketState(state) if state else None
        return [t.to_dict() for t in self.tickets.tickets(filt)]

    def suggestions(self, now: datetime | None = None) -> list[dict]:
        drafts = operations.suggest_tickets(
            self.registry,
            self.probe_engine.store,
            self.wms.active_alarms(),
            self.tickets.tickets(),
            now=now,
            staleness=2 * timedelta(minutes=self.config.probes.default_period_min),
        )
        return [d.to_dict() for d in drafts]

    def good_current(self, day: date | None = None) -> dict:
        if self.rota is None:
            raise ValidationError("no shift rota configured")
        day = day or utcnow().date()
        return {"date": day.isoformat(), "country": operations.current_good(day, self.rota)}

    def set_rota(self, rota: operations.ShiftRota, actor: str = "system:import") -> None:
        with self._audited(actor, "set_rota", ",".join(rota.countries[:3]) + "..."):
            self.rota = rota
            self.store.upsert("registry", "meta:rota", json.loads(rota.to_json()))

    # ------------------------------------------------------------------

    def seed_inventory(self, actor: str = "system:fixtures") -> None:
        """Load the bundled inventory registry, contacts and rota."""
        snapshot = fixtures.build_registry().export_topology(fixtures.ROC_ID)
        self.import_topology_document(snapshot.to_document(), actor=actor)
        for contact, dn in fixtures.inventory_contacts():
            self.add_contact(contact, dn, actor=actor)
        self.set_rota(fixtures.default_rota(), actor=actor)

    def healthcheck(self) -> dict:
        store_ok = self.store.healthy()
        return {
            "status": "ok" if store_ok else "degraded",
            "store": "ok" if store_ok else "unreachable",
            "scheduler": "running" if self.scheduler.alive else "idle",
            "version": self.config.build_version,
        }

    def close(self) -> None:
        self.scheduler.stop()
        self.store.close()
