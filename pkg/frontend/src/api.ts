// Thin fetch wrapper over /api/v1. All reads and writes go through here,
// which is what makes "every number is traceable to an API response"
// checkable: tests mock fetch and assert the render equals the payload.

import type {
  AlarmDto,
  ApiError,
  ConsoleConfigDto,
  GoodDto,
  HistoryPointDto,
  ServiceStatusDto,
  SuggestionDto,
  TicketDto,
  TopologyDto,
  UsageTableDto,
} from "./types.js";

export class ApiRequestError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, body: ApiError | null) {
    super(body?.message ?? `API request failed (${status})`);
    this.code = body?.error ?? "HTTP_" + status;
    this.status = status;
  }
}

export class ApiClient {
  constructor(readonly base: string = "/api/v1") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      (init.headers as Record<string, string>)["content-type"] = "application/json";
    }
    const response = await fetch(this.base + path, init);
    if (!response.ok) {
      let payload: ApiError | null = null;
      try {
        payload = (await response.json()) as ApiError;
      } catch {
        payload = null;
      }
      throw new ApiRequestError(response.status, payload);
    }
    return (await response.json()) as T;
  }

  topology(): Promise<TopologyDto> {
    return this.request("GET", "/topology");
  }

  statuses(): Promise<{ statuses: ServiceStatusDto[] }> {
    return this.request("GET", "/status");
  }

  suggestions(): Promise<{ suggestions: SuggestionDto[] }> {
    return this.request("GET", "/suggestions");
  }

  tickets(state?: string): Promise<{ tickets: TicketDto[] }> {
    const query = state ? `?state=${encodeURIComponent(state)}` : "";
    return this.request("GET", "/tickets" + query);
  }

  openTicket(body: {
    site: string;
    severity: string;
    summary: string;
    evidence: Record<string, string>[];
  }): Promise<TicketDto> {
    return this.request("POST", "/tickets", body);
  }

  transitionTicket(id: string, state: string, note = ""): Promise<TicketDto> {
    return this.request("PATCH", `/tickets/${encodeURIComponent(id)}`, { state, note });
  }

  usage(params: {
    rows: string;
    cols: string;
    metric: string;
    vo?: string;
    country?: string;
    site?: string;
  }): Promise<UsageTableDto> {
    const query = new URLSearchParams();
    for (const [key, value] of Object.entries(params)) {
      if (value !== undefined && value !== "") query.set(key, value);
    }
    return this.request("GET", "/accounting/query?" + query.toString());
  }

  alarms(): Promise<{ alarms: AlarmDto[] }> {
    return this.request("GET", "/alarms");
  }

  wmsHistory(wms: string, metric: string, from: string, to: string): Promise<{
    wms: string;
    metric: string;
    points: HistoryPointDto[];
  }> {
    const query = new URLSearchParams({ metric, from, to });
    return this.request("GET", `/wms/${encodeURIComponent(wms)}/history?` + query.toString());
  }

  goodCurrent(date?: string): Promise<GoodDto> {
    const query = date ? `?date=${encodeURIComponent(date)}` : "";
    return this.request("GET", "/good/current" + query);
  }
}

export async function loadConsoleConfig(): Promise<ConsoleConfigDto> {
  const response = await fetch("/api/v1/console-config");
  if (!response.ok) return { api_base: "/api/v1", refresh_interval_s: 60 };
  return (await response.json()) as ConsoleConfigDto;
}
