// Mock API plumbing: a fetch stub that serves canned /api/v1 payloads and
// records every request so tests can assert call counts and bodies.

import { vi } from "vitest";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

export class MockApi {
  readonly calls: RecordedCall[] = [];
  private routes = new Map<string, unknown>();
  private failures = new Map<string, { status: number; error: string; message: string }>();

  on(method: string, path: string, payload: unknown): void {
    this.routes.set(`${method} ${path}`, payload);
  }

  failWith(method: string, path: string, status: number, error: string, message = ""): void {
    this.failures.set(`${method} ${path}`, { status, error, message });
  }

  callsTo(method: string, pathPrefix: string): RecordedCall[] {
    return this.calls.filter(
      (c) => c.method === method && c.url.startsWith(pathPrefix),
    );
  }

  install(): void {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
        const url = String(input);
        const method = init?.method ?? "GET";
        const body = init?.body ? JSON.parse(String(init.body)) : undefined;
        this.calls.push({ method, url, body });
        const pathOnly = url.split("?")[0];
        const failure =
          this.failures.get(`${method} ${url}`) ?? this.failures.get(`${method} ${pathOnly}`);
        if (failure) {
          return new Response(
            JSON.stringify({ error: failure.error, message: failure.message }),
            { status: failure.status, headers: { "content-type": "application/json" } },
          );
        }
        const payload = this.routes.get(`${method} ${url}`) ?? this.routes.get(`${method} ${pathOnly}`);
        if (payload === undefined) {
          return new Response(JSON.stringify({ error: "UNKNOWN_ROUTE", message: url }), {
            status: 404,
            headers: { "content-type": "application/json" },
          });
        }
        return new Response(JSON.stringify(payload), {
          status: 200,
          headers: { "content-type": "application/json" },
        });
      }),
    );
  }
}

// a compact availability fixture: two countries, three sites, five services
export const TOPOLOGY = {
  version: 7,
  generated_at: "2010-04-01T00:00:00Z",
  nodes: [
    { id: "roc", kind: "ROC", name: "SEE-ROC", parent: null, attributes: {}, status: "ACTIVE" },
    { id: "c-rs", kind: "COUNTRY", name: "Serbia", parent: "roc", attributes: {}, status: "ACTIVE" },
    { id: "c-bg", kind: "COUNTRY", name: "Bulgaria", parent: "roc", attributes: {}, status: "ACTIVE" },
    { id: "s-a", kind: "SITE", name: "AEGIS01", parent: "c-rs",
      attributes: { cpu_count: "674", storage_tb: "90.0" }, status: "ACTIVE" },
    { id: "s-b", kind: "SITE", name: "AEGIS04", parent: "c-rs",
      attributes: { cpu_count: "300", storage_tb: "7.0" }, status: "ACTIVE" },
    { id: "s-c", kind: "SITE", name: "BG01", parent: "c-bg",
      attributes: { cpu_count: "1210", storage_tb: "42.3" }, status: "ACTIVE" },
    { id: "svc-a-ce", kind: "SERVICE", name: "ce.aegis01", parent: "s-a",
      attributes: { service_type: "CE", endpoint: "ce.a:2119", critical: "true" }, status: "ACTIVE" },
    { id: "svc-a-se", kind: "SERVICE", name: "se.aegis01", parent: "s-a",
      attributes: { service_type: "SE", endpoint: "se.a:8446", critical: "false" }, status: "ACTIVE" },
    { id: "svc-b-ce", kind: "SERVICE", name: "ce.aegis04", parent: "s-b",
      attributes: { service_type: "CE", endpoint: "ce.b:2119", critical: "true" }, status: "ACTIVE" },
    { id: "svc-c-ce", kind: "SERVICE", name: "ce.bg01", parent: "s-c",
      attributes: { service_type: "CE", endpoint: "ce.c:2119", critical: "true" }, status: "ACTIVE" },
    { id: "svc-c-se", kind: "SERVICE", name: "se.bg01", parent: "s-c",
      attributes: { service_type: "SE", endpoint: "se.c:8446", critical: "false" }, status: "ACTIVE" },
  ],
};

export const STATUSES = {
  statuses: [
    { service: "svc-a-ce", state: "DOWN", as_of: "2010-04-01T08:00:00Z", source_result: null },
    { service: "svc-a-se", state: "UP", as_of: "2010-04-01T08:00:00Z", source_result: null },
    { service: "svc-b-ce", state: "DEGRADED", as_of: "2010-04-01T08:00:00Z", source_result: null },
    { service: "svc-c-ce", state: "UP", as_of: "2010-04-01T08:00:00Z", source_result: null },
    { service: "svc-c-se", state: "UNKNOWN", as_of: "2010-04-01T08:00:00Z", source_result: null },
  ],
};

export const USAGE_HOURS = {
  rows: "VO",
  cols: "COUNTRY",
  metric: "CPU_HOURS",
  cells: [
    { row: "seegrid", col: "Serbia", value: 8766000.0 },
    { row: "seegrid", col: "Bulgaria", value: 876600.0 },
    { row: "meteo", col: "Serbia", value: 87660.0 },
  ],
  row_totals: { seegrid: 9642600.0, meteo: 87660.0 },
  col_totals: { Serbia: 8853660.0, Bulgaria: 876600.0 },
  grand_total: 9730260.0,
};

export const USAGE_YEARS = {
  ...USAGE_HOURS,
  metric: "CPU_YEARS",
  cells: USAGE_HOURS.cells.map((c) => ({ ...c, value: c.value / 8766 })),
  row_totals: { seegrid: 9642600.0 / 8766, meteo: 87660.0 / 8766 },
  col_totals: { Serbia: 8853660.0 / 8766, Bulgaria: 876600.0 / 8766 },
  grand_total: 9730260.0 / 8766,
};

export const SUGGESTION = {
  site: "s-a",
  severity: "COMPLEX" as const,
  summary: "critical service ce.aegis01 is DOWN (ERROR twice in a row)",
  evidence: [{ kind: "probe", service: "svc-a-ce", ts: "2010-04-01T07:30:00Z" }],
  evidence_class: "service-down:svc-a-ce",
};

export const TICKET = {
  id: "TT-000001",
  site: "s-a",
  opened_by: "ct-gim",
  assignee: "ct-admin",
  severity: "COMPLEX" as const,
  state: "NEW" as const,
  summary: "CE down",
  opened_at: "2010-04-01T08:10:00Z",
  solved_at: null,
  closed_at: null,
  linked_evidence: [],
  history: [],
};
