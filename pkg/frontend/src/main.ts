/** Browser shell: wires the renderers to the API client.
 *
 * Votes submit optimistically (the row locks immediately) and roll back
 * if the server rejects them; a stale group answer triggers a reload
 * prompt instead of silently mis-filing votes.
 */

import { Api, ApiError, RegisterPayload } from "./api.js";
import {
  renderJudging,
  renderLogin,
  renderRegistration,
  renderReports,
  renderStalePrompt,
} from "./render.js";
import {
  ViewState,
  applyGroup,
  groupFullyJudged,
  initialState,
  isValidVote,
  lockVote,
  selectVote,
  unlockVote,
} from "./state.js";

declare global {
  interface Window {
    SERPEVAL_API_BASE?: string;
  }
}

const params = new URLSearchParams(window.location.search);
const api = new Api(params.get("api") ?? window.SERPEVAL_API_BASE ?? "");
let state: ViewState = initialState(params.get("run") ?? "demo");
let registerErrors: Record<string, string> = {};
let loginError: string | null = null;

const root = document.getElementById("app")!;

function paint(): void {
  switch (state.screen) {
    case "register":
      root.innerHTML = renderRegistration(registerErrors);
      break;
    case "login":
      root.innerHTML = renderLogin(loginError);
      break;
    case "judging":
    case "complete":
      root.innerHTML = renderJudging(state);
      break;
    case "reports":
      root.innerHTML = renderReports(state.reports);
      break;
  }
}

function formValue(form: HTMLFormElement, name: string): string {
  const input = form.elements.namedItem(name) as HTMLInputElement | null;
  return input?.value ?? "";
}

function registerPayload(form: HTMLFormElement): RegisterPayload {
  return {
    connection: {
      email: formValue(form, "email"),
      password: formValue(form, "password"),
    },
    personal: {
      name: formValue(form, "name"),
      country: formValue(form, "country"),
      language: formValue(form, "language"),
    },
    interests: {
      domains: formValue(form, "domains"),
      specialty: formValue(form, "specialty"),
    },
    competence: {
      profession: formValue(form, "profession"),
      study_level: formValue(form, "study_level"),
    },
  };
}

async function fetchNext(): Promise<void> {
  const group = await api.next(state.runId);
  state = applyGroup(state, group);
  paint();
}

async function openReports(): Promise<void> {
  state = { ...state, screen: "reports", reports: null };
  paint();
  state = { ...state, reports: await api.reports(state.runId) };
  paint();
}

async function submitVote(rank: number): Promise<void> {
  const vote = state.selected.get(rank);
  const token = state.group?.group_token;
  if (!isValidVote(vote) || !token) return;
  state = lockVote(state, rank, vote);
  paint();
  try {
    await api.vote(state.runId, token, rank, vote);
  } catch (error) {
    state = unlockVote(state, rank);
    if (error instanceof ApiError && error.code === "outside-group") {
      root.innerHTML = renderStalePrompt();
      return;
    }
    state = { ...state, error: error instanceof Error ? error.message : String(error) };
    paint();
    return;
  }
  if (groupFullyJudged(state)) {
    await fetchNext(); // auto-advance once every result is judged
  } else {
    paint();
  }
}

async function onRegisterSubmit(form: HTMLFormElement): Promise<void> {
  registerErrors = {};
  const payload = registerPayload(form);
  try {
    await api.register(payload);
  } catch (error) {
    if (error instanceof ApiError) {
      if (error.code === "duplicate-email") {
        registerErrors["connection.email"] = "email taken — try logging in";
      } else {
        registerErrors[error.field ?? "form"] = error.message;
      }
      paint();
      return;
    }
    throw error;
  }
  await api.login(payload.connection.email, payload.connection.password);
  state = { ...state, token: api.token };
  await fetchNext();
}

async function onLoginSubmit(form: HTMLFormElement): Promise<void> {
  loginError = null;
  try {
    await api.login(formValue(form, "email"), formValue(form, "password"));
  } catch (error) {
    loginError = error instanceof ApiError ? error.message : String(error);
    paint();
    return;
  }
  state = { ...state, token: api.token };
  await fetchNext();
}

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.matches(".vote-choice")) {
    const rank = Number(target.dataset.rank);
    const vote = Number(target.dataset.vote);
    state = selectVote(state, rank, vote);
    paint();
  } else if (target.matches(".vote-submit")) {
    void submitVote(Number(target.dataset.rank));
  } else if (target.id === "goto-login") {
    state = { ...state, screen: "login" };
    paint();
  } else if (target.id === "goto-register") {
    state = { ...state, screen: "register" };
    paint();
  } else if (target.id === "goto-reports") {
    void openReports();
  } else if (target.id === "back-to-judging") {
    void fetchNext();
  } else if (target.id === "reload-group") {
    void fetchNext();
  }
});

root.addEventListener("submit", (event) => {
  const form = event.target as HTMLFormElement;
  event.preventDefault();
  if (form.id === "register-form") void onRegisterSubmit(form);
  if (form.id === "login-form") void onLoginSubmit(form);
});

paint();
