// Ticket workflow: list, open from a prefilled suggestion, transition.
// Writes map 1:1 onto POST/PATCH ticket endpoints; the optimistic
// transition keeps a copy of the previous state and rolls back when the
// API rejects the move (e.g. ILLEGAL_TRANSITION surfaces inline).

import { ApiClient, ApiRequestError } from "../api.js";
import type { SuggestionDto, TicketDto } from "../types.js";
import { escapeHtml } from "./html.js";

export async function confirmSuggestion(
  client: ApiClient,
  suggestion: SuggestionDto,
): Promise<TicketDto> {
  // exactly one creation call per confirmation
  return client.openTicket({
    site: suggestion.site,
    severity: suggestion.severity,
    summary: suggestion.summary,
    evidence: suggestion.evidence,
  });
}

export interface TransitionOutcome {
  ticket: TicketDto;
  error: string | null;
}

export async function transitionOptimistic(
  client: ApiClient,
  ticket: TicketDto,
  newState: TicketDto["state"],
  apply: (ticket: TicketDto) => void,
): Promise<TransitionOutcome> {
  const before = { ...ticket };
  apply({ ...ticket, state: newState }); // optimistic render
  try {
    const confirmed = await client.transitionTicket(ticket.id, newState);
    apply(confirmed);
    return { ticket: confirmed, error: null };
  } catch (err) {
    apply(before); // roll back
    const message =
      err instanceof ApiRequestError ? `${err.code}: ${err.message}` : String(err);
    return { ticket: before, error: message };
  }
}

const NEXT_STATES: Record<TicketDto["state"], TicketDto["state"][]> = {
  NEW: ["ASSIGNED"],
  ASSIGNED: ["IN_PROGRESS"],
  IN_PROGRESS: ["SOLVED"],
  SOLVED: ["VERIFIED", "REOPENED"],
  REOPENED: ["IN_PROGRESS"],
  VERIFIED: [],
};

export function renderTickets(tickets: TicketDto[], canEdit: boolean): string {
  if (!tickets.length) return `<div class="tickets empty">No tickets</div>`;
  const rows = tickets
    .map(
      (t) => `
    <tr data-ticket="${escapeHtml(t.id)}" class="state-${t.state.toLowerCase()}">
      <td>${escapeHtml(t.id)}</td>
      <td>${escapeHtml(t.site)}</td>
      <td>${t.severity}</td>
      <td class="ticket-state">${t.state}</td>
      <td>${escapeHtml(t.summary)}</td>
      <td>${NEXT_STATES[t.state]
        .map(
          (next) =>
            `<button data-action="transition" data-ticket="${escapeHtml(t.id)}"
                     data-state="${next}" ${canEdit ? "" : "disabled"}>${next}</button>`,
        )
        .join(" ")}</td>
    </tr>`,
    )
    .join("");
  return `
  <table class="tickets">
    <thead><tr><th>id</th><th>site</th><th>severity</th><th>state</th><th>summary</th><th></th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderTicketForm(prefill: Partial<SuggestionDto>, canEdit: boolean): string {
  return `
  <form class="ticket-form" data-action="open-ticket">
    <input name="site" value="${escapeHtml(prefill.site ?? "")}" placeholder="site id" required>
    <select name="severity">
      <option ${prefill.severity === "SIMPLE" ? "selected" : ""}>SIMPLE</option>
      <option ${prefill.severity === "COMPLEX" ? "selected" : ""}>COMPLEX</option>
    </select>
    <input name="summary" value="${escapeHtml(prefill.summary ?? "")}" placeholder="summary" required>
    <input type="hidden" name="evidence" value="${escapeHtml(JSON.stringify(prefill.evidence ?? []))}">
    <button type="submit" ${canEdit ? "" : "disabled"}>Open ticket</button>
    <span class="form-error" role="alert"></span>
  </form>`;
}
