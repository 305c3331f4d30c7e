/** HTML renderers for every screen.
 *
 * Pure string producers: the browser shell mounts them with innerHTML
 * and wires events by delegation, and the tests assert on the strings
 * directly. All server-sourced text is escaped.
 */

import type { GroupPayload, ReportsPayload, TablePayload } from "./api.js";
import { VOTE_CHOICES, ViewState, clampExcerpt, judgedCount, groupTotal } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function fieldError(errors: Record<string, string>, field: string): string {
  const message = errors[field];
  return message ? `<span class="field-error">${escapeHtml(message)}</span>` : "";
}

export function renderRegistration(errors: Record<string, string> = {}): string {
  return `
<section class="card" id="register-card">
  <h2>Create your judge profile</h2>
  <form id="register-form">
    <fieldset>
      <legend>Connection</legend>
      <label>Email <input name="email" type="email" required></label>
      ${fieldError(errors, "connection.email")}
      <label>Password <input name="password" type="password" minlength="8" required></label>
      ${fieldError(errors, "connection.password")}
    </fieldset>
    <fieldset>
      <legend>Personal</legend>
      <label>Name <input name="name"></label>
      <label>Country <input name="country"></label>
      <label>Language <input name="language"></label>
    </fieldset>
    <fieldset>
      <legend>Interests</legend>
      <label>Domains <input name="domains"></label>
      <label>Specialty <input name="specialty"></label>
    </fieldset>
    <fieldset>
      <legend>Competence</legend>
      <label>Profession <input name="profession"></label>
      <label>Study level <input name="study_level"></label>
    </fieldset>
    ${fieldError(errors, "form")}
    <button type="submit">Register</button>
    <button type="button" id="goto-login">I already have an account</button>
  </form>
</section>`;
}

export function renderLogin(error: string | null = null): string {
  const banner = error ? `<p class="field-error">${escapeHtml(error)}</p>` : "";
  return `
<section class="card" id="login-card">
  <h2>Sign in</h2>
  ${banner}
  <form id="login-form">
    <label>Email <input name="email" type="email" required></label>
    <label>Password <input name="password" type="password" required></label>
    <button type="submit">Log in</button>
    <button type="button" id="goto-register">Create an account</button>
  </form>
</section>`;
}

function renderVoteWidget(rank: number, selected: number | undefined, locked: number | undefined): string {
  if (locked !== undefined) {
    return `<div class="vote-widget locked" data-rank="${rank}">
      voted <strong>${locked}</strong>/5
    </div>`;
  }
  const buttons = VOTE_CHOICES.map(
    (vote) =>
      `<button type="button" class="vote-choice${selected === vote ? " picked" : ""}"
        data-rank="${rank}" data-vote="${vote}" aria-label="vote ${vote}">${vote}</button>`,
  ).join("");
  const disabled = selected === undefined ? " disabled" : "";
  return `<div class="vote-widget" data-rank="${rank}">
    ${buttons}
    <button type="button" class="vote-submit" data-rank="${rank}"${disabled}>Submit</button>
  </div>`;
}

export function renderProgressBar(judged: number, total: number): string {
  const percent = total === 0 ? 100 : Math.round((judged / total) * 100);
  return `<div class="progress-bar" role="progressbar" aria-valuenow="${judged}"
    aria-valuemax="${total}">
    <div class="progress-fill" style="width:${percent}%"></div>
    <span class="progress-text">${judged}/${total}</span>
  </div>`;
}

export function renderJudging(state: ViewState): string {
  const group = state.group;
  if (!group || group.complete) return renderComplete(state);
  const engineBadge = group.engine_id
    ? `<span class="engine-badge">${escapeHtml(group.engine_id)}</span>`
    : "";
  const rows = group.results
    .map((result) => {
      const locked = state.locked.get(result.rank);
      const selected = state.selected.get(result.rank);
      return `
  <li class="result-row${locked !== undefined ? " locked" : ""}" data-rank="${result.rank}">
    <div class="result-head">
      <span class="result-rank">#${result.rank}</span>
      <span class="result-title">${escapeHtml(result.title || result.url)}</span>
      <a class="result-open" href="${escapeHtml(result.url)}" target="_blank"
        rel="noopener noreferrer">open page</a>
    </div>
    <div class="result-url">${escapeHtml(result.url)}</div>
    <p class="result-snippet">${escapeHtml(result.snippet)}</p>
    <blockquote class="result-excerpt">${escapeHtml(clampExcerpt(result.excerpt))}</blockquote>
    ${renderVoteWidget(result.rank, selected, locked)}
  </li>`;
    })
    .join("");
  const error = state.error ? `<p class="field-error">${escapeHtml(state.error)}</p>` : "";
  return `
<section id="judging-screen">
  <header>
    <h2>${escapeHtml(group.topic_label ?? "")}: “${escapeHtml(group.query_text ?? "")}”</h2>
    ${engineBadge}
    ${renderProgressBar(judgedCount(state), groupTotal(state))}
    <p class="overall">group ${group.overall.groups_done + 1} of ${group.overall.groups_total}</p>
  </header>
  ${error}
  <p class="hint">Rate each result from 0 (useless or off-topic) to 5 (answers the query perfectly).</p>
  <ol class="results-list">${rows}</ol>
</section>`;
}

export function renderStalePrompt(): string {
  return `
<section class="card" id="stale-prompt">
  <p>This result list moved on while you were judging.</p>
  <button type="button" id="reload-group">Reload the current list</button>
</section>`;
}

export function renderComplete(state: ViewState): string {
  const overall = state.group?.overall;
  const summary = overall
    ? `<p>${overall.groups_done} of ${overall.groups_total} result lists judged.</p>`
    : "";
  return `
<section class="card" id="complete-screen">
  <h2>All done — thank you!</h2>
  ${summary}
  <button type="button" id="goto-reports">See the evaluation so far</button>
</section>`;
}

function renderTable(table: TablePayload | null, name: string): string {
  if (!table) {
    return `<div class="report-empty" data-table="${name}">no data yet</div>`;
  }
  const header = [table.corner, ...table.columns]
    .map((cell) => `<th>${escapeHtml(cell)}</th>`)
    .join("");
  const body = table.rows
    .map((row) => {
      const cells = table.columns
        .map((column) => {
          const value = table.cells[row]?.[column];
          return `<td>${value === null || value === undefined ? "" : value.toFixed(2)}</td>`;
        })
        .join("");
      return `<tr><th>${escapeHtml(row)}</th>${cells}</tr>`;
    })
    .join("");
  const badge = table.flags.length
    ? `<span class="partial-badge" title="${escapeHtml(table.flags.join("; "))}">partial</span>`
    : "";
  return `
<figure class="report-table" data-table="${name}">
  <figcaption>${escapeHtml(table.title)} ${badge}</figcaption>
  <table><thead><tr>${header}</tr></thead><tbody>${body}</tbody></table>
</figure>`;
}

/** CSS bar chart: x = R@k level, y = average note 0-5, one bar series per engine. */
export function renderUserChart(table: TablePayload | null): string {
  if (!table) return "";
  const maxVote = 5;
  const groups = table.rows
    .map((row) => {
      const bars = table.columns
        .map((column) => {
          const value = table.cells[row]?.[column];
          const height = value === null || value === undefined ? 0 : (value / maxVote) * 100;
          const label = value === null || value === undefined ? "" : value.toFixed(2);
          return `<div class="bar" data-series="${escapeHtml(column)}"
            style="height:${height.toFixed(0)}%" title="${label}"></div>`;
        })
        .join("");
      return `<div class="bar-group"><div class="bars">${bars}</div>
        <span class="x-label">${escapeHtml(row)}</span></div>`;
    })
    .join("");
  const legend = table.columns
    .map((column) => `<span class="legend-item">${escapeHtml(column)}</span>`)
    .join("");
  return `
<div class="bar-chart" data-chart="user-relevance" data-y-axis="average note (0-5)">
  <div class="chart-area">${groups}</div>
  <div class="legend">${legend}</div>
</div>`;
}

export function renderReports(reports: ReportsPayload | null): string {
  if (!reports) {
    return `<section id="report-view"><p class="report-empty">loading…</p></section>`;
  }
  const flags = reports.flags.length
    ? `<ul class="report-flags">${reports.flags
        .map((flag) => `<li>${escapeHtml(flag)}</li>`)
        .join("")}</ul>`
    : "";
  return `
<section id="report-view">
  <h2>Evaluation so far</h2>
  <button type="button" id="back-to-judging">Back to judging</button>
  ${flags}
  ${renderTable(reports.performance, "performance")}
  ${renderTable(reports.user_relevance, "user_relevance")}
  ${renderUserChart(reports.user_relevance)}
  ${renderTable(reports.query_relevance, "query_relevance")}
  ${renderTable(reports.coupled, "coupled")}
</section>`;
}
