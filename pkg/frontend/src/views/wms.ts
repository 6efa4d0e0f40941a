// Alarm list with troubleshooting links plus a history sparkline, both
// straight renderings of collector endpoints.

import type { AlarmDto, HistoryPointDto } from "../types.js";
import { escapeHtml } from "./html.js";

export function renderAlarms(alarms: AlarmDto[]): string {
  if (!alarms.length) return `<div class="alarms empty">No alarms</div>`;
  const rows = alarms
    .map(
      (a) => `
    <tr class="alarm-${a.state.toLowerCase()}">
      <td>${escapeHtml(a.wms)}</td>
      <td>${escapeHtml(a.metric)}</td>
      <td>${a.state}</td>
      <td>${a.peak_value}</td>
      <td>${escapeHtml(a.raised_at)}</td>
      <td>${a.cleared_at ? escapeHtml(a.cleared_at) : "-"}</td>
      <td>${a.guide_url ? `<a href="${escapeHtml(a.guide_url)}" target="_blank">guide</a>` : ""}</td>
    </tr>`,
    )
    .join("");
  return `<table class="alarms">
    <thead><tr><th>wms</th><th>metric</th><th>state</th><th>peak</th><th>raised</th><th>cleared</th><th></th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

export function renderSparkline(points: HistoryPointDto[], width = 420, height = 60): string {
  if (!points.length) return `<svg class="spark empty" width="${width}" height="${height}"></svg>`;
  const values = points.map((p) => p.value);
  const min = Math.min(...values);
  const max = Math.max(...values);
  const span = max - min || 1;
  const step = points.length > 1 ? width / (points.length - 1) : 0;
  const path = points
    .map((p, i) => {
      const x = (i * step).toFixed(2);
      const y = (height - ((p.value - min) / span) * (height - 4) - 2).toFixed(2);
      return `${i ? "L" : "M"}${x},${y}`;
    })
    .join(" ");
  return `<svg class="spark" width="${width}" height="${height}">
    <path d="${path}" fill="none" stroke="#4c78a8" stroke-width="1.5"></path>
  </svg>`;
}
