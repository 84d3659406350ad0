// DOM wiring. All logic lives in api/state/render; this file only moves
// values between the controls and the state object.

import { fetchHealth, fetchRanking } from "./api.js";
import { debounce } from "./debounce.js";
import {
  ConsoleState,
  canSubmit,
  initialState,
  requestFailed,
  requestOf,
  requestStarted,
  responseArrived,
  selectRepository,
  setAlpha,
  setPastedText,
  setQuery,
  setRepositories,
  setTopn,
} from "./state.js";
import { renderError, renderRepositoryOptions, renderResults } from "./render.js";

const API_BASE = "";

let state: ConsoleState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const queryInput = el<HTMLInputElement>("query");
const alphaSlider = el<HTMLInputElement>("alpha");
const alphaValue = el<HTMLSpanElement>("alpha-value");
const topnInput = el<HTMLInputElement>("topn");
const repositorySelect = el<HTMLSelectElement>("repository");
const pasteBox = el<HTMLTextAreaElement>("pasted-text");
const modeIndicator = el<HTMLSpanElement>("mode-indicator");
const submitButton = el<HTMLButtonElement>("submit");
const resultsPane = el<HTMLDivElement>("results");
const errorPane = el<HTMLDivElement>("error");

function refreshControls(): void {
  alphaValue.textContent = state.alpha.toFixed(2);
  submitButton.disabled = !canSubmit(state) || state.inFlight;
  modeIndicator.textContent =
    state.source.kind === "pasted" ? "searching pasted text" : `repository: ${state.source.name}`;
  repositorySelect.innerHTML = renderRepositoryOptions(
    state.repositories,
    state.source.kind === "repository" ? state.source.name : "",
  );
  errorPane.innerHTML = state.error ? renderError(state.error) : "";
  resultsPane.innerHTML = state.lastResponse ? renderResults(state.lastResponse) : "";
}

async function submit(): Promise<void> {
  if (!canSubmit(state) || state.inFlight) return;
  state = requestStarted(state);
  const sequence = state.sequence;
  refreshControls();
  try {
    const response = await fetchRanking(API_BASE, requestOf(state));
    state = responseArrived(state, sequence, response);
  } catch (err) {
    state = requestFailed(state, sequence, err instanceof Error ? err.message : String(err));
  }
  refreshControls();
}

const debouncedSubmit = debounce(() => void submit(), 200);

queryInput.addEventListener("input", () => {
  state = setQuery(state, queryInput.value);
  refreshControls();
});
queryInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") debouncedSubmit();
});
alphaSlider.addEventListener("input", () => {
  state = setAlpha(state, Number(alphaSlider.value));
  refreshControls();
});
topnInput.addEventListener("change", () => {
  state = setTopn(state, Number(topnInput.value));
  refreshControls();
});
repositorySelect.addEventListener("change", () => {
  state = selectRepository(state, repositorySelect.value);
  refreshControls();
});
pasteBox.addEventListener("input", () => {
  state = setPastedText(state, pasteBox.value);
  refreshControls();
});
submitButton.addEventListener("click", () => debouncedSubmit());

void fetchHealth(API_BASE)
  .then((health) => {
    state = setRepositories(state, health.repositories);
    refreshControls();
  })
  .catch(() => undefined);

refreshControls();
