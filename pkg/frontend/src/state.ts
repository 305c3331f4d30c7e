/** View state and the pure logic behind the judging screen.
 *
 * Everything here is derived from server payloads; no judgment lives
 * only in the client, so rebuilding the state from a fresh payload
 * always reproduces what the server knows.
 */

import type { GroupPayload, ReportsPayload } from "./api.js";

export const VOTE_CHOICES = [0, 1, 2, 3, 4, 5] as const;

export const EXCERPT_LIMIT = 1200;

export type Screen = "register" | "login" | "judging" | "complete" | "reports";

export interface ViewState {
  screen: Screen;
  token: string | null;
  runId: string;
  group: GroupPayload | null;
  /** Vote picked in the widget but not submitted yet, per rank. */
  selected: Map<number, number>;
  /** Ranks whose vote the server has acknowledged (locked rows). */
  locked: Map<number, number>;
  reports: ReportsPayload | null;
  error: string | null;
}

export function initialState(runId: string): ViewState {
  return {
    screen: "register",
    token: null,
    runId,
    group: null,
    selected: new Map(),
    locked: new Map(),
    reports: null,
    error: null,
  };
}

export function isValidVote(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value >= 0 && value <= 5;
}

/** Rebuild the per-row state from a fresh group payload (reload path). */
export function applyGroup(state: ViewState, group: GroupPayload): ViewState {
  const locked = new Map<number, number>();
  for (const result of group.results) {
    if (result.my_vote !== null && result.my_vote !== undefined) {
      locked.set(result.rank, result.my_vote);
    }
  }
  return {
    ...state,
    screen: group.complete ? "complete" : "judging",
    group,
    selected: new Map(),
    locked,
    error: null,
  };
}

export function selectVote(state: ViewState, rank: number, vote: number): ViewState {
  if (!isValidVote(vote) || state.locked.has(rank)) return state;
  const selected = new Map(state.selected);
  selected.set(rank, vote);
  return { ...state, selected };
}

export function lockVote(state: ViewState, rank: number, vote: number): ViewState {
  const locked = new Map(state.locked);
  locked.set(rank, vote);
  const selected = new Map(state.selected);
  selected.delete(rank);
  return { ...state, locked, selected };
}

export function unlockVote(state: ViewState, rank: number): ViewState {
  const locked = new Map(state.locked);
  locked.delete(rank);
  return { ...state, locked };
}

export function judgedCount(state: ViewState): number {
  return state.locked.size;
}

export function groupTotal(state: ViewState): number {
  return state.group?.results.length ?? 0;
}

export function progressFraction(state: ViewState): number {
  const total = groupTotal(state);
  return total === 0 ? 1 : judgedCount(state) / total;
}

export function groupFullyJudged(state: ViewState): boolean {
  const total = groupTotal(state);
  return total > 0 && judgedCount(state) >= total;
}

export function clampExcerpt(text: string, limit: number = EXCERPT_LIMIT): string {
  if (text.length <= limit) return text;
  return text.slice(0, limit - 1) + "…";
}
