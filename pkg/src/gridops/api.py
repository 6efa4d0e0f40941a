"""HTTP face of the suite: /api/v1 JSON endpoints plus the static console.

Identity comes from a verified client certificate DN. At desk scale the
TLS terminator is expected to sit in front of the service and forward the
subject DN in a trusted header (disabled by default; enable
[server].trusted_proxy_header). A valid but unmapped DN yields a guest
who may only read.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import accounting
from .errors import (
    AuthzDenied,
    GridOpsError,
    IllegalTransition,
    PayloadTooLarge,
    Unauthenticated,
)
from .registry import CertIdentity, normalize_dn
from .service import GridOps
from .timeutil import parse_ts

STATUS_BY_CODE = {
    "UNAUTHENTICATED": 401,
    "AUTHZ_DENIED": 403,
    "UNKNOWN_IDENTITY": 403,
    "UNKNOWN_DN": 403,
    "UNKNOWN_NODE": 404,
    "UNKNOWN_SERVICE": 404,
    "UNKNOWN_SITE": 404,
    "UNKNOWN_WMS": 404,
    "UNKNOWN_TICKET": 404,
    "UNKNOWN_METRIC": 404,
    "PAYLOAD_TOO_LARGE": 413,
    "ILLEGAL_TRANSITION": 409,
    "OUT_OF_ORDER_SNAPSHOT": 409,
    "DUPLICATE_SIBLING_NAME": 409,
}


class IdentitySource(str, Enum):
    MUTUAL_TLS = "MUTUAL_TLS"
    TRUSTED_HEADER = "TRUSTED_HEADER"


@dataclass
class ApiIdentity:
    subject_dn: str
    source: IdentitySource
    resolved: Optional[CertIdentity]  # None: valid cert, unmapped DN (guest)

    @property
    def is_guest(self) -> bool:
        return self.resolved is None


def create_app(gridops: GridOps, console_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="gridops", version=gridops.config.build_version, docs_url=None)
    app.state.gridops = gridops

    @app.exception_handler(GridOpsError)
    async def gridops_error(request: Request, exc: GridOpsError):
        status = STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content={"error": exc.code, "message": exc.message})

    def authenticate(request: Request) -> ApiIdentity:
        cfg = gridops.config.server
        if cfg.trusted_proxy_header:
            dn = request.headers.get(cfg.proxy_header_name)
            if dn:
                dn = normalize_dn(dn)
                if gridops.registry.has_identity(dn):
                    return ApiIdentity(dn, IdentitySource.TRUSTED_HEADER,
                                       gridops.registry.identity(dn))
                return ApiIdentity(dn, IdentitySource.TRUSTED_HEADER, None)
        # mutual TLS termination happens in front of the app server; without
        # the trusted header there is no identity to go on
        raise Unauthenticated("request carries no verified client identity")

    def editor(identity: ApiIdentity = Depends(authenticate)) -> ApiIdentity:
        if identity.is_guest:
            raise AuthzDenied("guests (unmapped DN) may only read")
        return identity

    # -- registry ------------------------------------------------------

    @app.get("/api/v1/topology")
    def topology(scope: str | None = None, identity: ApiIdentity = Depends(authenticate)):
        return Response(gridops.topology_document(scope), media_type="application/json")

    @app.put("/api/v1/nodes/{node_id}")
    def put_node(node_id: str, body: dict, identity: ApiIdentity = Depends(editor)):
        body = dict(body)
        body.setdefault("id", node_id)
        if body["id"] != node_id:
            raise GridOpsError(f"body id {body['id']!r} does not match path")
        stored = gridops.upsert_node(identity.subject_dn, body)
        return {"id": stored, "version": gridops.registry.version}

    @app.get("/api/v1/summary")
    def summary(scope: str | None = None, identity: ApiIdentity = Depends(authenticate)):
        return gridops.resource_summary(scope)

    # -- probes / status ------------------------------------------------

    @app.post("/api/v1/results")
    async def post_results(request: Request, identity: ApiIdentity = Depends(editor)):
        body = await request.body()
        # a full quarter backfill for the whole infrastructure runs ~20 MiB
        if len(body) > 64 * 1024 * 1024:
            raise PayloadTooLarge("result batch exceeds 64 MiB")
        return gridops.ingest_results_text(body.decode("utf-8"), actor=identity.subject_dn)

    @app.get("/api/v1/status")
    def status(scope: str | None = None, identity: ApiIdentity = Depends(authenticate)):
        return {"statuses": gridops.statuses(scope)}

    # -- sla -------------------------------------------------------------

    @app.get("/api/v1/availability")
    def availability(
        scope: str | None = None,
        from_: str = Query(alias="from"),
        to: str = Query(),
        identity: ApiIdentity = Depends(authenticate),
    ):
        window = (parse_ts(from_), parse_ts(to))
        return gridops.availability_figure(scope, window)

    @app.get("/api/v1/reports/quarter/{index}")
    def quarter_report(index: int, identity: ApiIdentity = Depends(authenticate)):
        report = gridops.quarterly_report(index)
        return Response(report.to_json(), media_type="application/json")

    # -- accounting -------------------------------------------------------

    @app.post("/api/v1/accounting/logs")
    async def post_accounting(
        request: Request, site: str = Query(), identity: ApiIdentity = Depends(editor)
    ):
        body = await request.body()
        return gridops.ingest_accounting(site, body.decode("utf-8", "replace"),
                                         actor=identity.subject_dn)

    @app.get("/api/v1/accounting/query")
    def accounting_query(
        request: Request,
        rows: str = Query(),
        cols: str = Query(),
        metric: str = Query(),
        vo: str | None = None,
        country: str | None = None,
        site: str | None = None,
        from_: str | None = Query(default=None, alias="from"),
        to: str | None = None,
        job_type: str | None = None,
        identity: ApiIdentity = Depends(authenticate),
    ):
        window = (parse_ts(from_), parse_ts(to)) if from_ and to else None
        table = gridops.usage_table(
            rows, cols, metric, vo=vo, country=country, site=site,
            window=window, job_type=job_type,
        )
        if "application/xml" in request.headers.get("accept", ""):
            return Response(accounting.export_xml(table), media_type="application/xml")
        return table.to_dict()

    # -- wms ---------------------------------------------------------------

    @app.post("/api/v1/wms/snapshots")
    def post_wms_snapshot(body: dict, identity: ApiIdentity = Depends(editor)):
        return {"transitions": gridops.ingest_wms_snapshot(body, actor=identity.subject_dn)}

    @app.get("/api/v1/wms/{wms_id}/history")
    def get_wms_history(
        wms_id: str,
        metric: str = Query(),
        from_: str = Query(alias="from"),
        to: str = Query(),
        identity: ApiIdentity = Depends(authenticate),
    ):
        window = (parse_ts(from_), parse_ts(to))
        return {"wms": wms_id, "metric": metric,
                "points": gridops.wms_history(wms_id, metric, window)}

    @app.get("/api/v1/alarms")
    def get_alarms(active: bool = False, identity: ApiIdentity = Depends(authenticate)):
        return {"alarms": gridops.alarms(active_only=active)}

    # -- operations ----------------------------------------------------------

    @app.post("/api/v1/tickets", status_code=201)
    def post_ticket(body: dict, identity: ApiIdentity = Depends(editor)):
        ticket = gridops.open_ticket(
            identity.subject_dn,
            site=body["site"],
            severity=body.get("severity", "SIMPLE"),
            summary=body.get("summary", ""),
            evidence=body.get("evidence", []),
        )
        return ticket.to_dict()

    @app.patch("/api/v1/tickets/{ticket_id}")
    def patch_ticket(ticket_id: str, body: dict, identity: ApiIdentity = Depends(editor)):
        if "state" not in body:
            raise IllegalTransition("PATCH body must carry the target state")
        ticket = gridops.transition_ticket(
            identity.subject_dn, ticket_id, body["state"], note=body.get("note", "")
        )
        return ticket.to_dict()

    @app.get("/api/v1/tickets")
    def get_tickets(state: str | None = None, identity: ApiIdentity = Depends(authenticate)):
        return {"tickets": gridops.list_tickets(state)}

    @app.get("/api/v1/good/current")
    def good_current(date_: str | None = Query(default=None, alias="date"),
                     identity: ApiIdentity = Depends(authenticate)):
        day = date.fromisoformat(date_) if date_ else None
        return gridops.good_current(day)

    @app.get("/api/v1/suggestions")
    def get_suggestions(identity: ApiIdentity = Depends(authenticate)):
        return {"suggestions": gridops.suggestions()}

    # -- unauthenticated surface ----------------------------------------------

    @app.get("/healthz")
    def healthz():
        return gridops.healthcheck()

    @app.get("/api/v1/console-config")
    def console_config():
        return {"api_base": "/api/v1", "refresh_interval_s": 60}

    console = Path(console_dir) if console_dir else _default_console_dir()
    if console is not None and console.is_dir():
        app.mount("/console", StaticFiles(directory=console, html=True), name="console")

    return app


def _default_console_dir() -> Path | None:
    # repo layout: frontend/dist next to the installed package's repo root
    here = Path(__file__).resolve()
    for parent in here.parents:
        candidate = parent / "frontend" / "dist"
        if candidate.is_dir():
            return candidate
    return None
