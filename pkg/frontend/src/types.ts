// Wire types mirroring the /api/v1 JSON responses. The console never
// derives these numbers itself; every figure on screen came off the wire.

export type ServiceState = "UP" | "DEGRADED" | "DOWN" | "UNKNOWN";

export interface ServiceStatusDto {
  service: string;
  state: ServiceState;
  as_of: string;
  source_result: unknown;
}

export interface NodeDto {
  id: string;
  kind: "ROC" | "COUNTRY" | "SITE" | "SERVICE";
  name: string;
  parent: string | null;
  attributes: Record<string, string>;
  status: "ACTIVE" | "SUSPENDED";
}

export interface TopologyDto {
  version: number;
  generated_at: string;
  nodes: NodeDto[];
}

export interface SuggestionDto {
  site: string;
  severity: "SIMPLE" | "COMPLEX";
  summary: string;
  evidence: Record<string, string>[];
  evidence_class: string;
}

export interface TicketDto {
  id: string;
  site: string;
  opened_by: string;
  assignee: string;
  severity: "SIMPLE" | "COMPLEX";
  state: "NEW" | "ASSIGNED" | "IN_PROGRESS" | "SOLVED" | "VERIFIED" | "REOPENED";
  summary: string;
  opened_at: string;
  solved_at: string | null;
  closed_at: string | null;
  linked_evidence: Record<string, string>[];
  history: { at: string; actor: string; from: string | null; to: string; note: string }[];
}

export interface UsageCellDto {
  row: string;
  col: string;
  value: number;
}

export interface UsageTableDto {
  rows: string;
  cols: string;
  metric: string;
  cells: UsageCellDto[];
  row_totals: Record<string, number>;
  col_totals: Record<string, number>;
  grand_total: number;
}

export interface AlarmDto {
  wms: string;
  metric: string;
  state: "RAISED" | "CLEARED";
  raised_at: string;
  cleared_at: string | null;
  peak_value: number;
  guide_url: string;
}

export interface HistoryPointDto {
  ts: string;
  value: number;
}

export interface GoodDto {
  date: string;
  country: string;
}

export interface ConsoleConfigDto {
  api_base: string;
  refresh_interval_s: number;
}

export interface ApiError {
  error: string;
  message: string;
}
