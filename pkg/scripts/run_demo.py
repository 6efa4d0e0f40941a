#!/usr/bin/env python3
"""End-to-end demo: seed inventory, ingest corpora, print every report.

Runs store-direct against a throwaway data directory, exercising the same
code paths the HTTP service serves. Takes a couple of minutes' worth of
synthetic history and shows where each operator-facing number comes from.

Usage: python scripts/run_demo.py [data-dir]
"""

from __future__ import annotations

import sys
import tempfile
from datetime import timedelta

from gridops import accounting, fixtures
from gridops.config import Config, StoreConfig
from gridops.service import GridOps
from gridops.sla import QuarterId


def main() -> int:
    data_dir = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="gridops-demo-")
    print(f"data directory: {data_dir}")
    ops = GridOps(Config(store=StoreConfig(data_dir=data_dir)))

    print("seeding inventory registry, contacts, rota ...")
    ops.seed_inventory()
    totals = ops.resource_summary()
    print(f"  {totals['cpu_total']} CPUs / {totals['storage_tb_total']} TB over "
          f"{totals['site_count']} sites")

    print("ingesting quarter 5 probe corpus (engineered ~78% availability) ...")
    corpus = fixtures.quarter_corpus(QuarterId(5).window, 0.78)
    outcome = ops.ingest_results_text(corpus.to_jsonl(), actor="demo")
    print(f"  {outcome['appended']} results")
    report = ops.quarterly_report(5)
    print(f"  infrastructure availability Q5: {report.infrastructure.availability:.3f} "
          f"(coverage {report.coverage:.2f})")
    worst = sorted(report.per_country, key=lambda f: f.availability)[:3]
    for fig in worst:
        print(f"    lowest: {fig.name} {fig.availability:.3f} (weight {fig.weight})")

    print("ingesting accounting corpus (22.5M CPU hours) ...")
    acct = fixtures.accounting_corpus()
    for site_id, text in sorted(acct.logs.items()):
        ops.ingest_accounting(site_id, text, actor="demo")
    table = ops.usage_table("VO", "JOB_TYPE", "CPU_HOURS")
    print(f"  grand total: {float(table.grand_total()):,.0f} CPU hours")
    years = ops.usage_table("VO", "JOB_TYPE", "CPU_YEARS")
    print(f"  = {float(years.grand_total()):,.1f} CPU years")
    util = accounting.utilization(
        float(sum((table.row_total(vo) for vo in fixtures.PROJECT_VOS),
                  start=0 * table.grand_total())),
        1050,
        fixtures.ACCOUNTING_WINDOW,
    )
    print(f"  dedicated-resource utilization: {util:.1%}")

    print("driving WMS alarms ...")
    for snap in fixtures.demo_wms_snapshots():
        transitions = ops.ingest_wms_snapshot(snap.to_dict(), actor="demo")
        for t in transitions:
            print(f"  alarm {t['state']}: {t['metric']} peak {t['peak_value']:.0f}"
                  f" -> {t['guide_url']}")

    print("ticket suggestions from current failures ...")
    # make one CE fail twice so the suggester has something to chew on
    from gridops.probes import ProbeResult, ProbeStatus
    from gridops.timeutil import utcnow

    ce = "svc-ce-ro-01-ici"
    now = utcnow()
    for minutes in (60, 30):
        ops.probe_engine.record_result(
            ProbeResult(ce, "ce-job-submit", now - timedelta(minutes=minutes),
                        ProbeStatus.ERROR),
            actor="demo",
        )
    for draft in ops.suggestions():
        print(f"  draft [{draft['severity']}] {draft['site']}: {draft['summary']}")

    good = ops.good_current()
    print(f"operator on duty today: {good['country']}")
    ops.close()
    print("done; restart-safe state lives in", data_dir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
