"""Deterministic fixture generators: registry, probe corpora, batch logs.

Everything here is reproducible without randomness so reports built from
generated corpora are byte-stable across runs. The registry mirrors the
production inventory at its 14-country scale; probe corpora are engineered
so each site realises a designed availability fraction, and the batch-log
corpus totals an exact number of CPU hours split across user communities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from .operations import ShiftRota
from .probes import ProbeResult, ProbeStatus
from .registry import (
    Contact,
    NodeKind,
    Privilege,
    Registry,
    RegistryNode,
    ServiceType,
    TopologySnapshot,
)
from .sla import Window
from .timeutil import UTC, ensure_utc
from .wmsmon import AlarmRule, WmsSnapshot

from datetime import date


@dataclass(frozen=True)
class SiteSpec:
    name: str
    cpus: int
    storage_tb: str
    mpi: bool = False


@dataclass(frozen=True)
class CountrySpec:
    name: str
    code: str
    sites: tuple[SiteSpec, ...]

    @property
    def cpus(self) -> int:
        return sum(s.cpus for s in self.sites)

    @property
    def storage_tb(self) -> Decimal:
        return sum((Decimal(s.storage_tb) for s in self.sites), Decimal("0"))


# Production inventory rows (country, CPUs, storage TB), split into sites
# for the three largest contributors.
INVENTORY: tuple[CountrySpec, ...] = (
    CountrySpec("Greece", "gr", (
        SiteSpec("HG-01-GRNET", 800, "33.4", mpi=True),
        SiteSpec("HG-02-IASA", 400, "33.4"),
    )),
    CountrySpec("Bulgaria", "bg", (SiteSpec("BG01-IPP", 1210, "42.3", mpi=True),)),
    CountrySpec("Romania", "ro", (SiteSpec("RO-01-ICI", 120, "4.0"),)),
    CountrySpec("Turkey", "tr", (SiteSpec("TR-01-ULAKBIM", 2380, "528.0", mpi=True),)),
    CountrySpec("Hungary", "hu", (SiteSpec("HU-01-SZTAKI", 8, "2.0"),)),
    CountrySpec("Albania", "al", (SiteSpec("AL-01-TIRANA", 34, "1.3"),)),
    CountrySpec("Bosnia-Herzegovina", "ba", (SiteSpec("BA-01-ETFBL", 80, "1.1"),)),
    CountrySpec("FYR of Macedonia", "mk", (SiteSpec("MK-01-UKIM", 80, "4.1"),)),
    CountrySpec("Serbia", "rs", (
        SiteSpec("AEGIS01-IPB", 674, "90.0", mpi=True),
        SiteSpec("AEGIS04-KG", 300, "7.0"),
    )),
    CountrySpec("Montenegro", "me", (SiteSpec("ME-01-UOM", 40, "0.6"),)),
    CountrySpec("Moldova", "md", (SiteSpec("MD-01-RENAM", 24, "6.5"),)),
    CountrySpec("Croatia", "hr", (SiteSpec("HR-01-SRCE", 44, "0.2"),)),
    CountrySpec("Armenia", "am", (SiteSpec("AM-01-IIAP", 424, "0.2"),)),
    CountrySpec("Georgia", "ge", (SiteSpec("GE-01-GRENA", 16, "0.1"),)),
)

ROC_ID = "roc-see"
PROJECT_VOS = ("seegrid", "meteo", "seismo", "env")
OTHER_VOS = ("atlas", "cms")


def site_id(site: SiteSpec) -> str:
    return "site-" + site.name.lower().replace("_", "-")


def service_id(site: SiteSpec, kind: str) -> str:
    return f"svc-{kind.lower()}-" + site.name.lower()


def inventory_nodes() -> list[RegistryNode]:
    nodes = [RegistryNode(id=ROC_ID, kind=NodeKind.ROC, name="SEE-ROC")]
    for country in INVENTORY:
        cid = f"country-{country.code}"
        nodes.append(RegistryNode(id=cid, kind=NodeKind.COUNTRY, name=country.name, parent=ROC_ID))
        for site in country.sites:
            sid = site_id(site)
            attrs = {"cpu_count": str(site.cpus), "storage_tb": site.storage_tb}
            if site.mpi:
                attrs["mpi"] = "true"
            nodes.append(
                RegistryNode(id=sid, kind=NodeKind.SITE, name=site.name, parent=cid,
                             attributes=attrs)
            )
            host = site.name.lower().replace("_", "-")
            nodes.append(
                RegistryNode(
                    id=service_id(site, "ce"),
                    kind=NodeKind.SERVICE,
                    name=f"ce.{host}",
                    parent=sid,
                    attributes={
                        "service_type": ServiceType.CE.value,
                        "endpoint": f"ce.{host}.example.org:2119",
                        "critical": "true",
                    },
                )
            )
            nodes.append(
                RegistryNode(
                    id=service_id(site, "se"),
                    kind=NodeKind.SERVICE,
                    name=f"se.{host}",
                    parent=sid,
                    attributes={
                        "service_type": ServiceType.SE.value,
                        "endpoint": f"se.{host}.example.org:8446",
                        "critical": "false",
                    },
                )
            )
    # one monitored WMS per infrastructure, hosted at the Serbian site
    nodes.append(
        RegistryNode(
            id="svc-wms-aegis01-ipb",
            kind=NodeKind.SERVICE,
            name="wms.aegis01-ipb",
            parent="site-aegis01-ipb",
            attributes={
                "service_type": ServiceType.WMS.value,
                "endpoint": "wms.aegis01-ipb.example.org:7772",
                "critical": "false",
            },
        )
    )
    return nodes


def inventory_contacts() -> list[tuple[Contact, str]]:
    """(contact, subject DN) pairs: a ROC admin, country admins, site admins."""
    out: list[tuple[Contact, str]] = []
    out.append(
        (
            Contact(
                id="ct-roc-admin",
                name="ROC Operator",
                email="ops@see-roc.example.org",
                phone="+30 210 0000000",
                node=ROC_ID,
                privilege=Privilege.ADMIN,
            ),
            "/C=GR/O=SEE-ROC/CN=ROC Operator",
        )
    )
    for country in INVENTORY:
        cid = f"country-{country.code}"
        out.append(
            (
                Contact(
                    id=f"ct-{country.code}-gim",
                    name=f"{country.name} GIM",
                    email=f"gim@{country.code}.example.org",
                    phone="+000",
                    node=cid,
                    privilege=Privilege.ADMIN,
                ),
                f"/C={country.code.upper()}/O=Grid/CN={country.name} GIM",
            )
        )
        for site in country.sites:
            slug = site.name.lower()
            out.append(
                (
                    Contact(
                        id=f"ct-{slug}-admin",
                        name=f"{site.name} admin",
                        email=f"admin@{slug}.example.org",
                        phone="+000",
                        node=site_id(site),
                        privilege=Privilege.ADMIN,
                    ),
                    f"/C={country.code.upper()}/O=Grid/CN={site.name} Admin",
                )
            )
    out.append(
        (
            Contact(
                id="ct-guest-viewer",
                name="Guest Viewer",
                email="guest@example.org",
                phone="+000",
                node=ROC_ID,
                privilege=Privilege.VIEWER,
            ),
            "/C=EU/O=Guests/CN=Guest Viewer",
        )
    )
    return out


def build_registry(audit=None, clock=None) -> Registry:
    """The inventory registry with contacts and identity mappings seeded."""
    reg = Registry(audit=audit, clock=clock)
    for node in inventory_nodes():
        reg.seed_node(node)
    for contact, dn in inventory_contacts():
        reg.seed_contact(contact)
        reg.map_identity(dn, contact.id)
    return reg


def default_rota() -> ShiftRota:
    return ShiftRota(
        countries=tuple(c.name for c in INVENTORY),
        epoch_week_start=date(2008, 5, 5),  # first Monday of the project
    )


def default_alarm_rules() -> list[AlarmRule]:
    guide = "https://wiki.example.org/wms-troubleshooting"
    return [
        AlarmRule("input_queue_length", 5000, 4000, guide + "#queue"),
        AlarmRule("jobs_waiting", 2000, 1500, guide + "#waiting"),
        AlarmRule("load_1min", 32, 16, guide + "#load"),
        AlarmRule("disk_used_pct", 90, 80, guide + "#disk"),
        AlarmRule("daemons_down_count", 0, 0, guide + "#daemons"),
    ]


# -- engineered availability corpora ----------------------------------------

# per-site availability offsets around the corpus target; the largest site
# takes whatever value balances the CPU-weighted mean back onto target
_DELTAS = (-0.06, 0.04, -0.03, 0.05, -0.01, 0.02, -0.05, 0.03, 0.0, -0.02,
           0.06, -0.04, 0.01, 0.0, 0.02)

PROBE_STEP = timedelta(minutes=30)


@dataclass
class QuarterCorpus:
    window: Window
    results: list[ProbeResult]
    site_fractions: dict[str, Fraction]  # designed availability per site
    expected_infrastructure: float

    def to_jsonl(self) -> str:
        return "\n".join(r.to_line() for r in self.results) + "\n"


def quarter_corpus(window: Window, target: float) -> QuarterCorpus:
    """Probe corpus over window whose CPU-weighted availability lands on target.

    Each site's critical CE is OK for a designed fraction of the window and
    ERROR afterwards, probed every 30 minutes; the SE stays OK throughout.
    The largest site's fraction balances the weighted mean onto the target.
    """
    start, end = ensure_utc(window[0]), ensure_utc(window[1])
    slots = int((end - start) / PROBE_STEP)
    sites: list[tuple[SiteSpec, int]] = []
    for country in INVENTORY:
        for site in country.sites:
            sites.append((site, site.cpus))
    largest = max(range(len(sites)), key=lambda i: sites[i][1])

    fractions: dict[int, Fraction] = {}
    delta_iter = iter(_DELTAS * 3)
    for i, (site, cpus) in enumerate(sites):
        if i == largest:
            continue
        designed = target + next(delta_iter)
        fractions[i] = Fraction(round(designed * slots), slots)
    total_w = sum(c for _, c in sites)
    other_sum = sum(Fraction(sites[i][1]) * f for i, f in fractions.items())
    balance = (Fraction(target).limit_denominator(10**6) * total_w - other_sum) / sites[largest][1]
    fractions[largest] = Fraction(round(float(balance) * slots), slots)
    if not 0 <= fractions[largest] <= 1:
        raise ValueError("corpus target is not balanceable with the built-in deltas")

    results: list[ProbeResult] = []
    site_fractions: dict[str, Fraction] = {}
    for i, (site, cpus) in enumerate(sites):
        frac = fractions[i]
        switch_slot = int(frac * slots)  # exact by construction
        site_fractions[site_id(site)] = frac
        ce = service_id(site, "ce")
        se = service_id(site, "se")
        for slot in range(slots):
            ts = start + slot * PROBE_STEP
            status = ProbeStatus.OK if slot < switch_slot else ProbeStatus.ERROR
            results.append(ProbeResult(ce, "ce-job-submit", ts, status, "fixture"))
            results.append(ProbeResult(se, "se-transfer", ts, ProbeStatus.OK, "fixture"))

    expected = float(
        sum(Fraction(sites[i][1]) * fractions[i] for i in range(len(sites))) / total_w
    )
    return QuarterCorpus(
        window=(start, end),
        results=results,
        site_fractions=site_fractions,
        expected_infrastructure=expected,
    )


# -- accounting corpus --------------------------------------------------------

# exact CPU-hour totals per community: project VOs take 16.4M of 22.5M
VO_HOURS = {
    "seegrid": 6_400_000,
    "meteo": 4_000_000,
    "seismo": 3_200_000,
    "env": 2_800_000,
    "atlas": 3_300_000,
    "cms": 2_800_000,
}
ACCOUNTING_WINDOW: Window = (
    datetime(2008, 5, 1, tzinfo=UTC),
    datetime(2010, 5, 1, 12, 0, tzinfo=UTC),  # 730.5 days = 17532 hours
)
MAX_JOB_HOURS = 2400


@dataclass
class AccountingCorpus:
    logs: dict[str, str]  # site id -> batch log text
    total_hours: int
    project_hours: int
    job_count: int


def accounting_corpus() -> AccountingCorpus:
    """Batch logs per site totalling exactly 22.5M CPU hours.

    Jobs alternate between 8-slot MPI (walltime x 8 accounting) and serial,
    chunks of at most 2400 hours, spread month by month over the two-year
    window and round-robin across every site.
    """
    sites: list[SiteSpec] = [s for country in INVENTORY for s in country.sites]
    lines: dict[str, list[str]] = {site_id(s): [] for s in sites}
    window_start, window_end = ACCOUNTING_WINDOW
    months = 24
    seq = 0
    total = 0
    for vo, vo_hours in VO_HOURS.items():
        remaining = vo_hours
        while remaining > 0:
            hours = min(MAX_JOB_HOURS, remaining)
            remaining -= hours
            site = sites[seq % len(sites)]
            month = seq % months
            year = 2008 + (5 + month - 1) // 12
            mon = (5 + month - 1) % 12 + 1
            day = 1 + (seq % 27)
            hour = seq % 24
            end_dt = datetime(year, mon, day, hour, 15, tzinfo=UTC)
            # modulus coprime to the site count so every site sees both types
            mpi = seq % 3 != 0
            if mpi:
                cores = 8
                walltime_s = hours * 450  # hours * 3600 / 8
                exec_host = "+".join(f"wn{w:02d}/{slot}" for w in range(1, 5) for slot in (0, 1))
                cput_s = max(0, walltime_s - 60)
            else:
                cores = 1
                walltime_s = hours * 3600
                exec_host = "wn01/0"
                cput_s = max(0, walltime_s - 300)
            end_epoch = int(end_dt.timestamp())
            start_epoch = end_epoch - walltime_s
            stamp = end_dt.strftime("%m/%d/%Y %H:%M:%S")
            job_id = f"{seq}.ce.{site.name.lower()}.example.org"
            wt = _fmt_hms(walltime_s)
            ct = _fmt_hms(cput_s)
            lines[site_id(site)].append(
                f"{stamp};E;{job_id};user={vo}001 group={vo} queue=seegrid "
                f"start={start_epoch} end={end_epoch} exec_host={exec_host} "
                f"resources_used.walltime={wt} resources_used.cput={ct}"
            )
            total += hours
            seq += 1
    project = sum(VO_HOURS[vo] for vo in PROJECT_VOS)
    return AccountingCorpus(
        logs={sid: "\n".join(rows) + "\n" for sid, rows in lines.items() if rows},
        total_hours=total,
        project_hours=project,
        job_count=seq,
    )


def _fmt_hms(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}:{seconds % 60:02d}"


def demo_wms_snapshots() -> list[WmsSnapshot]:
    """A short snapshot series that raises and clears a queue alarm."""
    wms = "svc-wms-aegis01-ipb"
    base = datetime(2010, 4, 1, 8, 0, tzinfo=UTC)
    queue_values = [1200, 3000, 6200, 5800, 4500, 3200, 1500]
    out = []
    for i, queue in enumerate(queue_values):
        out.append(
            WmsSnapshot(
                wms=wms,
                timestamp=base + i * timedelta(minutes=10),
                metrics={
                    "input_queue_length": float(queue),
                    "jobs_waiting": 400.0 + 10 * i,
                    "load_1min": 2.5,
                    "disk_used_pct": 61.0,
                    "daemons_down_count": 0.0,
                },
                agent_version="1.2",
            )
        )
    return out


# -- profile writer -----------------------------------------------------------

PROFILES = ("table1", "quarter-q5", "quarter-q8", "accounting", "demo")


def write_profile(profile: str, out_dir: str | Path) -> list[Path]:
    """Materialize a named fixture profile; returns the files written."""
    from .sla import QuarterId

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, text: str) -> None:
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    registry = build_registry()
    snapshot = registry.export_topology(ROC_ID)
    if profile in ("table1", "demo"):
        emit("registry.json", snapshot.to_document())
        contacts = [
            {**contact.to_dict(), "subject_dn": dn} for contact, dn in inventory_contacts()
        ]
        emit("contacts.json", json.dumps(contacts, indent=2))
        emit("rota.json", default_rota().to_json())
    if profile in ("quarter-q5", "demo"):
        corpus = quarter_corpus(QuarterId(5).window, 0.78)
        emit("results-q5.jsonl", corpus.to_jsonl())
    if profile in ("quarter-q8", "demo"):
        corpus = quarter_corpus(QuarterId(8).window, 0.89)
        emit("results-q8.jsonl", corpus.to_jsonl())
    if profile in ("accounting", "demo"):
        corpus = accounting_corpus()
        for sid, text in sorted(corpus.logs.items()):
            emit(f"accounting-{sid}.log", text)
        emit(
            "accounting-manifest.json",
            json.dumps(
                {
                    "total_hours": corpus.total_hours,
                    "project_hours": corpus.project_hours,
                    "job_count": corpus.job_count,
                    "window": [ACCOUNTING_WINDOW[0].isoformat(), ACCOUNTING_WINDOW[1].isoformat()],
                },
                indent=2,
            ),
        )
    if profile == "demo":
        emit(
            "alarm-rules.json",
            json.dumps(
                [
                    {
                        "metric": r.metric,
                        "raise_above": r.raise_above,
                        "clear_below": r.clear_below,
                        "guide_url": r.guide_url,
                    }
                    for r in default_alarm_rules()
                ],
                indent=2,
            ),
        )
        emit(
            "wms-snapshots.jsonl",
            "\n".join(json.dumps(s.to_dict(), separators=(",", ":")) for s in demo_wms_snapshots())
            + "\n",
        )
    if profile not in PROFILES:
        raise ValueError(f"unknown fixture profile {profile!r}; choose from {PROFILES}")
    return written
