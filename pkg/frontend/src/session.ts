// Console session: which view is active, how often to poll, and whether
// the identity behind the proxy may write. Unauthenticated (or guest)
// sessions render everything read-only.

export type View = "DASHBOARD" | "TICKETS" | "ACCOUNTING" | "WMS" | "SHIFT";

export interface ConsoleSession {
  authenticated: boolean;
  view: View;
  refreshIntervalS: number;
  lastFetch: Date | null;
}

export function newSession(refreshIntervalS = 60): ConsoleSession {
  return {
    authenticated: false,
    view: "DASHBOARD",
    refreshIntervalS,
    lastFetch: null,
  };
}

export function canEdit(session: ConsoleSession): boolean {
  return session.authenticated;
}
