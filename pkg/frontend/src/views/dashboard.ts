// Live availability board: sites grouped by country, each site coloured
// by the worst state among its services, suggestion chips that prefill
// the ticket form. Pure functions over API payloads; rendering emits
// HTML strings so the bucketing contract is testable without a DOM.

import type { NodeDto, ServiceState, ServiceStatusDto, SuggestionDto } from "../types.js";
import { escapeHtml } from "./html.js";

// worst-wins ordering: DOWN > UNKNOWN > DEGRADED > UP
const SEVERITY: Record<ServiceState, number> = {
  DOWN: 3,
  UNKNOWN: 2,
  DEGRADED: 1,
  UP: 0,
};

export function worstState(states: ServiceState[]): ServiceState {
  let worst: ServiceState = "UP";
  for (const state of states) {
    if (SEVERITY[state] > SEVERITY[worst]) worst = state;
  }
  return worst;
}

export interface SiteBucket {
  siteId: string;
  siteName: string;
  state: ServiceState;
  services: { id: string; name: string; state: ServiceState }[];
}

export interface CountryGroup {
  country: string;
  sites: SiteBucket[];
}

export function bucketSites(
  statuses: ServiceStatusDto[],
  nodes: NodeDto[],
): CountryGroup[] {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  const stateByService = new Map(statuses.map((s) => [s.service, s.state]));

  const siteBuckets = new Map<string, SiteBucket>();
  for (const node of nodes) {
    if (node.kind !== "SERVICE") continue;
    const site = node.parent ? byId.get(node.parent) : undefined;
    if (!site || site.kind !== "SITE") continue;
    let bucket = siteBuckets.get(site.id);
    if (!bucket) {
      bucket = { siteId: site.id, siteName: site.name, state: "UP", services: [] };
      siteBuckets.set(site.id, bucket);
    }
    const state = stateByService.get(node.id) ?? "UNKNOWN";
    bucket.services.push({ id: node.id, name: node.name, state });
  }

  const groups = new Map<string, CountryGroup>();
  for (const bucket of siteBuckets.values()) {
    bucket.state = worstState(bucket.services.map((s) => s.state));
    bucket.services.sort((a, b) => a.name.localeCompare(b.name));
    const site = byId.get(bucket.siteId)!;
    const country = site.parent ? byId.get(site.parent) : undefined;
    const countryName = country?.name ?? "?";
    let group = groups.get(countryName);
    if (!group) {
      group = { country: countryName, sites: [] };
      groups.set(countryName, group);
    }
    group.sites.push(bucket);
  }
  const out = [...groups.values()];
  out.sort((a, b) => a.country.localeCompare(b.country));
  for (const group of out) group.sites.sort((a, b) => a.siteName.localeCompare(b.siteName));
  return out;
}

export function renderDashboard(
  groups: CountryGroup[],
  suggestions: SuggestionDto[],
  canEdit: boolean,
): string {
  const chips = suggestions
    .map(
      (s, i) => `
    <button class="chip chip-${s.severity.toLowerCase()}" data-action="confirm-suggestion"
            data-index="${i}" ${canEdit ? "" : "disabled"}
            title="${escapeHtml(s.evidence_class)}">
      ${escapeHtml(s.summary)}
    </button>`,
    )
    .join("");

  const countries = groups
    .map(
      (group) => `
    <section class="country">
      <h3>${escapeHtml(group.country)}</h3>
      <div class="sites">
        ${group.sites
          .map(
            (site) => `
        <div class="site state-${site.state.toLowerCase()}" data-site="${escapeHtml(site.siteId)}">
          <span class="site-name">${escapeHtml(site.siteName)}</span>
          <span class="site-state">${site.state}</span>
          <ul class="services">
            ${site.services
              .map(
                (svc) =>
                  `<li class="state-${svc.state.toLowerCase()}">${escapeHtml(svc.name)}: ${svc.state}</li>`,
              )
              .join("")}
          </ul>
        </div>`,
          )
          .join("")}
      </div>
    </section>`,
    )
    .join("");

  const chipBlock = suggestions.length
    ? `<div class="suggestions"><h3>Suggested tickets</h3>${chips}</div>`
    : `<div class="suggestions empty">No suggested tickets</div>`;
  return `<div class="dashboard">${chipBlock}${countries}</div>`;
}

export function renderStaleBanner(lastFetch: Date | null, reason: string): string {
  const seen = lastFetch ? lastFetch.toISOString() : "never";
  return `<div class="stale-banner">API unreachable (${escapeHtml(reason)}); showing data fetched: ${seen}</div>`;
}
