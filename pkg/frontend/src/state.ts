// Console state machine. One in-flight request at a time; responses that
// arrive for a superseded request are dropped by sequence number.

import {
  DEFAULT_ALPHA,
  DEFAULT_REPOSITORY,
  DEFAULT_TOPN,
  MedicRequest,
  MedicResponse,
  validateRequest,
} from "./api.js";

export type SourceMode =
  | { kind: "repository"; name: string }
  | { kind: "pasted"; text: string };

export type ConsoleState = {
  query: string;
  alpha: number;
  topn: number;
  source: SourceMode;
  repositories: string[];
  inFlight: boolean;
  sequence: number;
  lastResponse: MedicResponse | null;
  error: string | null;
};

export function initialState(): ConsoleState {
  return {
    query: "",
    alpha: DEFAULT_ALPHA,
    topn: DEFAULT_TOPN,
    source: { kind: "repository", name: DEFAULT_REPOSITORY },
    repositories: [DEFAULT_REPOSITORY],
    inFlight: false,
    sequence: 0,
    lastResponse: null,
    error: null,
  };
}

export function setQuery(state: ConsoleState, query: string): ConsoleState {
  return { ...state, query };
}

export function setAlpha(state: ConsoleState, alpha: number): ConsoleState {
  return { ...state, alpha: Math.min(1, Math.max(0, alpha)) };
}

export function setTopn(state: ConsoleState, topn: number): ConsoleState {
  return { ...state, topn: Math.max(1, Math.round(topn)) };
}

export function selectRepository(state: ConsoleState, name: string): ConsoleState {
  return { ...state, source: { kind: "repository", name } };
}

export function setPastedText(state: ConsoleState, text: string): ConsoleState {
  if (!text.trim()) {
    // Clearing the paste box reverts to repository mode.
    return { ...state, source: { kind: "repository", name: DEFAULT_REPOSITORY } };
  }
  return { ...state, source: { kind: "pasted", text } };
}

export function setRepositories(state: ConsoleState, names: string[]): ConsoleState {
  return { ...state, repositories: names.length ? names : state.repositories };
}

export function requestOf(state: ConsoleState): MedicRequest {
  const req: MedicRequest = {
    query: state.query,
    alpha: state.alpha,
    topn: state.topn,
  };
  if (state.source.kind === "pasted") {
    req.sentences = state.source.text;
  } else {
    req.repository = state.source.name;
  }
  return req;
}

export function canSubmit(state: ConsoleState): boolean {
  return validateRequest(requestOf(state)) === null;
}

export function requestStarted(state: ConsoleState): ConsoleState {
  return {
    ...state,
    inFlight: true,
    error: null,
    sequence: state.sequence + 1,
  };
}

export function responseArrived(
  state: ConsoleState,
  sequence: number,
  response: MedicResponse,
): ConsoleState {
  if (sequence !== state.sequence) return state; // stale; a newer submit won
  return { ...state, inFlight: false, lastResponse: response, error: null };
}

export function requestFailed(
  state: ConsoleState,
  sequence: number,
  message: string,
): ConsoleState {
  if (sequence !== state.sequence) return state;
  // Error banner only; previous results stay on screen.
  return { ...state, inFlight: false, error: message };
}
