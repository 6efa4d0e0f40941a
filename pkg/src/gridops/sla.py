"""Availability computation over probe results.

Timelines are built on an integer minute grid: each minute of a window
takes the state implied by the most recent result at or before the minute
start, and flips to UNKNOWN once that result is older than twice the probe
period. UNKNOWN time counts as unavailable everywhere (strict policy: a
silent site earns nothing). Site availability is the per-minute AND over
the site's critical services; anything above site level is a mean of site
figures weighted by site CPU counts.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Optional, Sequence

from .errors import EmptyWindow, NoCriticalServices, UnknownNode, UnsortedResults, ValidationError
from .probes import (
    DEFAULT_PERIOD,
    STALENESS_FACTOR,
    STATUS_TO_STATE,
    ProbeResult,
    ProbeStore,
    ServiceState,
)
from .registry import NodeKind, NodeStatus, Registry
from .timeutil import (
    UTC,
    add_months,
    ceil_minute,
    ensure_utc,
    format_ts,
    is_minute_aligned,
    to_minute,
)

UP_STATES = (ServiceState.UP, ServiceState.DEGRADED)

Window = tuple[datetime, datetime]


def _window_minutes(window: Window) -> tuple[int, int]:
    start, end = ensure_utc(window[0]), ensure_utc(window[1])
    if end <= start:
        raise EmptyWindow(f"window [{start}, {end}) is empty")
    if not (is_minute_aligned(start) and is_minute_aligned(end)):
        raise ValidationError("window boundaries must be minute-aligned")
    return to_minute(start), to_minute(end)


@dataclass(frozen=True)
class Segment:
    start: int  # epoch minute, inclusive
    end: int  # epoch minute, exclusive
    state: ServiceState

    @property
    def minutes(self) -> int:
        return self.end - self.start


@dataclass
class StatusTimeline:
    service: str
    window: Window
    segments: list[Segment]

    def total_minutes(self) -> int:
        lo, hi = _window_minutes(self.window)
        return hi - lo

    def minutes_in(self, *states: ServiceState) -> int:
        wanted = set(states)
        return sum(s.minutes for s in self.segments if s.state in wanted)

    def known_minutes(self) -> int:
        return sum(s.minutes for s in self.segments if s.state is not ServiceState.UNKNOWN)

    def up_intervals(self) -> list[tuple[int, int]]:
        """Merged [start, end) minute intervals where the service counts as up."""
        out: list[tuple[int, int]] = []
        for seg in self.segments:
            if seg.state in UP_STATES:
                if out and out[-1][1] == seg.start:
                    out[-1] = (out[-1][0], seg.end)
                else:
                    out.append((seg.start, seg.end))
        return out

    def state_at(self, minute: int) -> ServiceState:
        for seg in self.segments:
            if seg.start <= minute < seg.end:
                return seg.state
        raise ValueError(f"minute {minute} outside timeline window")


def build_timeline(
    service: str,
    window: Window,
    results: Sequence[ProbeResult],
    period: timedelta = DEFAULT_PERIOD,
) -> StatusTimeline:
    """Derive the UP/DEGRADED/DOWN/UNKNOWN partition of a window.

    results must be sorted by timestamp and may extend beyond the window
    on both sides; results before the window seed the initial state.
    """
    lo, hi = _window_minutes(window)
    for a, b in zip(results, results[1:]):
        if b.timestamp < a.timestamp:
            raise UnsortedResults("results must be sorted by timestamp")

    stale_after = STALENESS_FACTOR * period
    # changepoints[(minute, state)] built result-by-result; each result
    # reigns from its apply-minute until the next result's apply-minute,
    # going UNKNOWN at its staleness horizon inside that reign.
    raw: list[tuple[int, ServiceState]] = [(lo, ServiceState.UNKNOWN)]
    applies = [ceil_minute(r.timestamp) for r in results]
    for i, result in enumerate(results):
        reign_start = applies[i]
        reign_end = applies[i + 1] if i + 1 < len(results) else hi
        if reign_end <= reign_start:
            continue  # superseded within the same minute
        stale_at = ceil_minute(result.timestamp + stale_after)
        raw.append((reign_start, STATUS_TO_STATE[result.status]))
        if stale_at < reign_end:
            raw.append((stale_at, ServiceState.UNKNOWN))

    segments: list[Segment] = []
    for i, (start, state) in enumerate(raw):
        end = raw[i + 1][0] if i + 1 < len(raw) else hi
        start, end = max(start, lo), min(end, hi)
        if start >= end:
            continue
        if segments and segments[-1].state is state and segments[-1].end == start:
            segments[-1] = Segment(segments[-1].start, end, state)
        else:
            segments.append(Segment(start, end, state))
    if not segments:
        segments = [Segment(lo, hi, ServiceState.UNKNOWN)]
    return StatusTimeline(service=service, window=window, segments=segments)


def service_availability(timeline: StatusTimeline) -> float:
    """(UP + DEGRADED minutes) / window minutes; UNKNOWN is unavailable."""
    return timeline.minutes_in(*UP_STATES) / timeline.total_minutes()


def intersect_intervals(
    a: list[tuple[int, int]], b: list[tuple[int, int]]
) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def combined_up_fraction(timelines: Sequence[StatusTimeline], window: Window) -> float:
    """Fraction of window minutes where every timeline is UP or DEGRADED."""
    lo, hi = _window_minutes(window)
    common: list[tuple[int, int]] = [(lo, hi)]
    for tl in timelines:
        common = intersect_intervals(common, tl.up_intervals())
        if not common:
            return 0.0
    return sum(e - s for s, e in common) / (hi - lo)


@dataclass(frozen=True)
class QuarterId:
    """Project quarter n counted from the project epoch (quarter 1)."""

    index: int
    epoch: date = date(2008, 5, 1)

    def __post_init__(self):
        if self.index < 1:
            raise ValidationError("quarter index starts at 1")

    @property
    def window(self) -> Window:
        start = add_months(self.epoch, 3 * (self.index - 1))
        end = add_months(self.epoch, 3 * self.index)
        return (
            datetime(start.year, start.month, start.day, tzinfo=UTC),
            datetime(end.year, end.month, end.day, tzinfo=UTC),
        )


@dataclass
class AvailabilityFigure:
    scope: str
    kind: str
    name: str
    window: Window
    availability: float
    weight: int
    coverage: float = 0.0

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "kind": self.kind,
            "name": self.name,
            "availability": self.availability,
            "weight": self.weight,
            "coverage": self.coverage,
        }


def weighted_mean(pairs: Iterable[tuple[int, float]]) -> tuple[float, int]:
    """CPU-weighted mean; zero total weight yields (0.0, 0)."""
    total_weight = 0
    acc = 0.0
    for weight, value in pairs:
        if weight < 0:
            raise ValidationError("weights must be non-negative")
        total_weight += weight
        acc += weight * value
    if total_weight == 0:
        return 0.0, 0
    return acc / total_weight, total_weight


@dataclass
class AvailabilityReport:
    quarter: Optional[QuarterId]
    window: Window
    sla_threshold: float
    infrastructure: AvailabilityFigure
    per_country: list[AvailabilityFigure]
    per_site: list[AvailabilityFigure]
    per_service: list[AvailabilityFigure]
    sla_conformance: dict[str, bool]
    coverage: float
    weights_as_of: str = "window_end"

    def to_dict(self) -> dict:
        return {
            "quarter": self.quarter.index if self.quarter else None,
            "window": {"from": format_ts(self.window[0]), "to": format_ts(self.window[1])},
            "sla_threshold": self.sla_threshold,
            "weights_as_of": self.weights_as_of,
            "coverage": self.coverage,
            "infrastructure": self.infrastructure.to_dict(),
            "per_country": [f.to_dict() for f in self.per_country],
            "per_site": [f.to_dict() for f in self.per_site],
            "per_service": [f.to_dict() for f in self.per_service],
            "sla_conformance": dict(sorted(self.sla_conformance.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scope_kind", "scope_name", "availability", "weight", "coverage"])
        rows = [self.infrastructure] + self.per_country + self.per_site + self.per_service
        for fig in rows:
            writer.writerow(
                [fig.kind, fig.name, f"{fig.availability:.6f}", fig.weight, f"{fig.coverage:.6f}"]
            )
        return buf.getvalue()


class SlaEngine:
    """Computes availability figures and reports over a registry + store."""

    def __init__(
        self,
        registry: Registry,
        store: ProbeStore,
        period: timedelta = DEFAULT_PERIOD,
        sla_threshold: float = 0.80,
        quarter_epoch: date = date(2008, 5, 1),
    ):
        self.registry = registry
        self.store = store
        self.period = period
        self.sla_threshold = sla_threshold
        self.quarter_epoch = quarter_epoch

    def quarter(self, index: int) -> QuarterId:
        return QuarterId(index, self.quarter_epoch)

    def service_timeline(self, service: str, window: Window) -> StatusTimeline:
        margin = STALENESS_FACTOR * self.period
        results = self.store.results_for(
            service, (ensure_utc(window[0]) - margin, ensure_utc(window[1]))
        )
        return build_timeline(service, window, results, period=self.period)

    def site_availability(
        self,
        site: str,
        window: Window,
        timelines: dict[str, StatusTimeline] | None = None,
    ) -> float:
        """Per-minute AND over the site's critical services."""
        node = self.registry.node(site)
        critical = [
            svc
            for svc in self.registry.children(site)
            if svc.kind is NodeKind.SERVICE and svc.critical
        ]
        if not critical:
            raise NoCriticalServices(f"site {node.name!r} has no critical service")
        chosen = []
        for svc in sorted(critical, key=lambda n: n.name):
            if timelines is not None and svc.id in timelines:
                chosen.append(timelines[svc.id])
            else:
                chosen.append(self.service_timeline(svc.id, window))
        return combined_up_fraction(chosen, window)

    def weighted_availability(
        self,
        scope: str,
        window: Window,
        site_figures: dict[str, float],
    ) -> AvailabilityFigure:
        """CPU-weighted mean over ACTIVE descendant sites of scope."""
        node = self.registry.node(scope)
        pairs = []
        for site in self.registry.sites_under(scope):
            if site.status is not NodeStatus.ACTIVE:
                continue
            if site.id not in site_figures:
                raise ValidationError(f"missing availability figure for site {site.id!r}")
            pairs.append((site.cpu_count, site_figures[site.id]))
        availability, weight = weighted_mean(pairs)
        return AvailabilityFigure(
            scope=node.id,
            kind=node.kind.value,
            name=node.name,
            window=window,
            availability=availability,
            weight=weight,
        )

    def availability_figure(self, scope: str, window: Window) -> AvailabilityFigure:
        """Availability of an arbitrary scope over a window."""
        node = self.registry.node(scope)
        if node.kind is NodeKind.SERVICE:
            tl = self.service_timeline(scope, window)
            site = self.registry.site_of(scope)
            return AvailabilityFigure(
                scope=node.id,
                kind=node.kind.value,
                name=node.name,
                window=window,
                availability=service_availability(tl),
                weight=site.cpu_count if site else 0,
                coverage=tl.known_minutes() / tl.total_minutes(),
            )
        if node.kind is NodeKind.SITE:
            avail = self.site_availability(scope, window)
            return AvailabilityFigure(
                scope=node.id,
                kind=node.kind.value,
                name=node.name,
                window=window,
                availability=avail,
                weight=node.cpu_count,
                coverage=self._coverage(scope, window),
            )
        site_figures = {}
        for site in self.registry.sites_under(scope):
            if site.status is NodeStatus.ACTIVE:
                site_figures[site.id] = self._site_availability_or_zero(site.id, window)
        fig = self.weighted_availability(scope, window, site_figures)
        fig.coverage = self._coverage(scope, window)
        return fig

    def _site_availability_or_zero(self, site: str, window: Window) -> float:
        # strict policy: an unmeasurable site (no critical services) earns 0
        try:
            return self.site_availability(site, window)
        except NoCriticalServices:
            return 0.0

    def _coverage(self, scope: str, window: Window) -> float:
        known = total = 0
        for svc in self.registry.services_under(scope):
            tl = self.service_timeline(svc.id, window)
            known += tl.known_minutes()
            total += tl.total_minutes()
        return known / total if total else 0.0

    def quarterly_report(self, quarter: QuarterId) -> AvailabilityReport:
        return self.window_report(quarter.window, quarter=quarter)

    def window_report(
        self, window: Window, quarter: QuarterId | None = None
    ) -> AvailabilityReport:
        """Full per-service/site/country/infrastructure report.

        Absent data is not an error: it shows up as UNKNOWN time, low
        availability, and a low coverage figure. CPU weights come from the
        registry state at report time (see weights_as_of).
        """
        _window_minutes(window)
        rocs = [n for n in self.registry.nodes() if n.kind is NodeKind.ROC]
        if len(rocs) != 1:
            raise UnknownNode(f"report requires exactly one ROC, found {len(rocs)}")
        roc = rocs[0]

        timelines: dict[str, StatusTimeline] = {}
        per_service: list[AvailabilityFigure] = []
        for svc in sorted(self.registry.services_under(roc.id), key=lambda n: (n.name, n.id)):
            tl = self.service_timeline(svc.id, window)
            timelines[svc.id] = tl
            site = self.registry.site_of(svc.id)
            per_service.append(
                AvailabilityFigure(
                    scope=svc.id,
                    kind=svc.kind.value,
                    name=svc.name,
                    window=window,
                    availability=service_availability(tl),
                    weight=site.cpu_count if site else 0,
                    coverage=tl.known_minutes() / tl.total_minutes(),
                )
            )

        site_figures: dict[str, float] = {}
        per_site: list[AvailabilityFigure] = []
        conformance: dict[str, bool] = {}
        for site in sorted(self.registry.sites_under(roc.id), key=lambda n: (n.name, n.id)):
            if site.status is not NodeStatus.ACTIVE:
                continue
            avail = self._site_availability_with(site.id, window, timelines)
            site_figures[site.id] = avail
            per_site.append(
                AvailabilityFigure(
                    scope=site.id,
                    kind=site.kind.value,
                    name=site.name,
                    window=window,
                    availability=avail,
                    weight=site.cpu_count,
                    coverage=self._scope_coverage(site.id, timelines),
                )
            )
            conformance[site.id] = avail >= self.sla_threshold

        per_country: list[AvailabilityFigure] = []
        for country in sorted(
            (n for n in self.registry.nodes() if n.kind is NodeKind.COUNTRY),
            key=lambda n: (n.name, n.id),
        ):
            fig = self.weighted_availability(country.id, window, site_figures)
            fig.coverage = self._scope_coverage(country.id, timelines)
            per_country.append(fig)

        infrastructure = self.weighted_availability(roc.id, window, site_figures)
        infrastructure.coverage = self._scope_coverage(roc.id, timelines)

        return AvailabilityReport(
            quarter=quarter,
            window=window,
            sla_threshold=self.sla_threshold,
            infrastructure=infrastructure,
            per_country=per_country,
            per_site=per_site,
            per_service=per_service,
            sla_conformance=conformance,
            coverage=infrastructure.coverage,
        )

    def _site_availability_with(
        self, site: str, window: Window, timelines: dict[str, StatusTimeline]
    ) -> float:
        try:
            return self.site_availability(site, window, timelines)
        except NoCriticalServices:
            return 0.0

    def _scope_coverage(self, scope: str, timelines: dict[str, StatusTimeline]) -> float:
        known = total = 0
        for svc in self.registry.services_under(scope):
            tl = timelines.get(svc.id)
            if tl is None:
                continue
            known += tl.known_minutes()
            total += tl.total_minutes()
        return known / total if total else 0.0
