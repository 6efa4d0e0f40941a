// Bootstrap: wire the API client, poll the active view, delegate clicks.
// Rendering is innerHTML of the strings produced by the view modules;
// in-flight fetches are last-write-wins per widget (a stale response
// never overwrites a newer one thanks to the fetch sequence counter).

import { ApiClient, ApiRequestError, loadConsoleConfig } from "./api.js";
import { canEdit, newSession, type ConsoleSession, type View } from "./session.js";
import { bucketSites, renderDashboard, renderStaleBanner } from "./views/dashboard.js";
import {
  DIMENSIONS,
  METRICS,
  renderBarChart,
  renderPieChart,
  renderUsageTable,
  validateDims,
} from "./views/accounting.js";
import { confirmSuggestion, renderTicketForm, renderTickets, transitionOptimistic } from "./views/tickets.js";
import { renderAlarms, renderSparkline } from "./views/wms.js";
import { fetchShiftWindow, renderShiftBanner } from "./views/shift.js";
import type { SuggestionDto, TicketDto } from "./types.js";

const session: ConsoleSession = newSession();
let client = new ApiClient();
let fetchSeq = 0;
let currentSuggestions: SuggestionDto[] = [];
let currentTickets: TicketDto[] = [];

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function setBanner(html: string): void {
  el("banner").innerHTML = html;
}

async function refreshDashboard(): Promise<void> {
  const seq = ++fetchSeq;
  try {
    const [topology, statuses, suggestions] = await Promise.all([
      client.topology(),
      client.statuses(),
      client.suggestions(),
    ]);
    if (seq !== fetchSeq) return; // superseded
    session.authenticated = true;
    session.lastFetch = new Date();
    currentSuggestions = suggestions.suggestions;
    const groups = bucketSites(statuses.statuses, topology.nodes);
    el("content").innerHTML = renderDashboard(groups, currentSuggestions, canEdit(session));
    setBanner("");
  } catch (err) {
    if (err instanceof ApiRequestError && err.status === 401) {
      session.authenticated = false;
      setBanner(renderStaleBanner(session.lastFetch, "not authenticated"));
      return;
    }
    setBanner(renderStaleBanner(session.lastFetch, String(err)));
  }
}

async function refreshTickets(): Promise<void> {
  const seq = ++fetchSeq;
  try {
    const { tickets } = await client.tickets();
    if (seq !== fetchSeq) return;
    currentTickets = tickets;
    session.lastFetch = new Date();
    el("content").innerHTML =
      renderTicketForm({}, canEdit(session)) + renderTickets(tickets, canEdit(session));
  } catch (err) {
    setBanner(renderStaleBanner(session.lastFetch, String(err)));
  }
}

async function refreshAccounting(): Promise<void> {
  const form = `
  <form id="usage-form" class="usage-form">
    rows <select name="rows">${DIMENSIONS.map((d) => `<option>${d}</option>`).join("")}</select>
    cols <select name="cols">${DIMENSIONS.map((d) => `<option ${d === "COUNTRY" ? "selected" : ""}>${d}</option>`).join("")}</select>
    metric <select name="metric">${METRICS.map((m) => `<option>${m}</option>`).join("")}</select>
    <button type="submit">Query</button>
    <span class="form-error" role="alert"></span>
  </form>
  <div id="usage-output"></div>`;
  el("content").innerHTML = form;
  await runUsageQuery("VO", "COUNTRY", "CPU_HOURS");
}

async function runUsageQuery(rows: string, cols: string, metric: string): Promise<void> {
  const problem = validateDims(rows, cols);
  const errorSlot = document.querySelector<HTMLElement>("#usage-form .form-error");
  if (problem) {
    if (errorSlot) errorSlot.textContent = problem;
    return;
  }
  if (errorSlot) errorSlot.textContent = "";
  try {
    const table = await client.usage({ rows, cols, metric });
    session.lastFetch = new Date();
    el("usage-output").innerHTML =
      renderUsageTable(table) + renderPieChart(table) + renderBarChart(table);
  } catch (err) {
    if (err instanceof ApiRequestError && errorSlot) {
      errorSlot.textContent = `${err.code}: ${err.message}`;
    } else {
      setBanner(renderStaleBanner(session.lastFetch, String(err)));
    }
  }
}

async function refreshWms(): Promise<void> {
  const seq = ++fetchSeq;
  try {
    const { alarms } = await client.alarms();
    if (seq !== fetchSeq) return;
    session.lastFetch = new Date();
    let spark = "";
    if (alarms.length) {
      const horizonDays = 2;
      const to = new Date();
      const from = new Date(to.getTime() - horizonDays * 86_400_000);
      const history = await client.wmsHistory(
        alarms[0].wms,
        alarms[0].metric,
        from.toISOString(),
        to.toISOString(),
      );
      spark = renderSparkline(history.points);
    }
    el("content").innerHTML = renderAlarms(alarms) + spark;
  } catch (err) {
    setBanner(renderStaleBanner(session.lastFetch, String(err)));
  }
}

async function refreshShift(): Promise<void> {
  try {
    const window = await fetchShiftWindow(client, new Date());
    session.lastFetch = new Date();
    el("content").innerHTML = renderShiftBanner(window);
  } catch (err) {
    setBanner(renderStaleBanner(session.lastFetch, String(err)));
  }
}

const REFRESHERS: Record<View, () => Promise<void>> = {
  DASHBOARD: refreshDashboard,
  TICKETS: refreshTickets,
  ACCOUNTING: refreshAccounting,
  WMS: refreshWms,
  SHIFT: refreshShift,
};

async function refresh(): Promise<void> {
  await REFRESHERS[session.view]();
}

function switchView(view: View): void {
  session.view = view;
  document.querySelectorAll("nav button").forEach((b) => {
    b.classList.toggle("active", (b as HTMLElement).dataset.view === view);
  });
  void refresh();
}

function wireEvents(): void {
  document.body.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const viewButton = target.closest<HTMLElement>("[data-view]");
    if (viewButton) {
      switchView(viewButton.dataset.view as View);
      return;
    }
    const chip = target.closest<HTMLElement>('[data-action="confirm-suggestion"]');
    if (chip) {
      const suggestion = currentSuggestions[Number(chip.dataset.index)];
      if (suggestion) {
        void confirmSuggestion(client, suggestion).then(
          () => refresh(),
          (err) => setBanner(renderStaleBanner(session.lastFetch, String(err))),
        );
      }
      return;
    }
    const transition = target.closest<HTMLElement>('[data-action="transition"]');
    if (transition) {
      const ticket = currentTickets.find((t) => t.id === transition.dataset.ticket);
      if (ticket) {
        void transitionOptimistic(
          client,
          ticket,
          transition.dataset.state as TicketDto["state"],
          (updated) => {
            const row = document.querySelector(
              `tr[data-ticket="${updated.id}"] .ticket-state`,
            );
            if (row) row.textContent = updated.state;
          },
        ).then((outcome) => {
          if (outcome.error) setBanner(`<div class="inline-error">${outcome.error}</div>`);
          else void refreshTickets();
        });
      }
    }
  });

  document.body.addEventListener("submit", (event) => {
    const form = event.target as HTMLFormElement;
    if (form.id === "usage-form") {
      event.preventDefault();
      const data = new FormData(form);
      void runUsageQuery(
        String(data.get("rows")),
        String(data.get("cols")),
        String(data.get("metric")),
      );
    }
    if (form.dataset.action === "open-ticket") {
      event.preventDefault();
      const data = new FormData(form);
      void client
        .openTicket({
          site: String(data.get("site")),
          severity: String(data.get("severity")),
          summary: String(data.get("summary")),
          evidence: JSON.parse(String(data.get("evidence") || "[]")),
        })
        .then(
          () => refreshTickets(),
          (err) => {
            const slot = form.querySelector<HTMLElement>(".form-error");
            if (slot) slot.textContent = String(err);
          },
        );
    }
  });
}

async function boot(): Promise<void> {
  const config = await loadConsoleConfig();
  client = new ApiClient(config.api_base);
  session.refreshIntervalS = config.refresh_interval_s;
  wireEvents();
  await refresh();
  setInterval(() => void refresh(), session.refreshIntervalS * 1000);
}

if (typeof document !== "undefined" && document.getElementById("content")) {
  void boot();
}
