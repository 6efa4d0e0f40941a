// Shift banner: today's operator-on-duty plus the next two weeks, each
// figure fetched from the rotation endpoint (no client-side modulo).

import { ApiClient } from "../api.js";
import type { GoodDto } from "../types.js";
import { escapeHtml } from "./html.js";

export function isoDatePlusDays(base: Date, days: number): string {
  const shifted = new Date(base.getTime() + days * 86_400_000);
  return shifted.toISOString().slice(0, 10);
}

export async function fetchShiftWindow(
  client: ApiClient,
  today: Date,
): Promise<GoodDto[]> {
  return Promise.all([
    client.goodCurrent(isoDatePlusDays(today, 0)),
    client.goodCurrent(isoDatePlusDays(today, 7)),
    client.goodCurrent(isoDatePlusDays(today, 14)),
  ]);
}

export function renderShiftBanner(window: GoodDto[]): string {
  const [now, next, later] = window;
  return `<div class="shift-banner">
    <span class="shift-now">On duty: <strong>${escapeHtml(now.country)}</strong> (${now.date})</span>
    <span class="shift-next">next week: ${escapeHtml(next.country)}</span>
    <span class="shift-later">in two weeks: ${escapeHtml(later.country)}</span>
  </div>`;
}
