/** Scripted judging session against a live serpeval service.
 *
 * Seeds a fixture run (1 topic x 1 query x 2 engines x 20 results),
 * starts the real HTTP API in a child process, and drives the UI's own
 * api/state/render modules through a full session: register, log in,
 * judge all 20 results of a group with 0-5 votes, watch progress reach
 * 20/20, auto-advance, finish the run, and check the server-side user
 * table reflects exactly the submitted votes.
 */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { renderJudging } from "../src/render.js";
import {
  ViewState,
  applyGroup,
  groupFullyJudged,
  initialState,
  lockVote,
  selectVote,
} from "../src/state.js";

const PORT = 18000 + Math.floor(Math.random() * 20000);
const BASE = `http://127.0.0.1:${PORT}`;
const RUN = "demo";
const ENGINE_IDS = ["engine-a", "engine-b"];

let dataRoot: string;
let server: ChildProcess;

async function waitForHealth(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/v1/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  dataRoot = mkdtempSync(join(tmpdir(), "serpeval-ui-"));
  execFileSync("python3", [
    "-m", "serpeval.demo", dataRoot,
    "--run-id", RUN, "--engines", "2", "--topics", "1",
    "--queries-per-topic", "1", "--results-per-query", "20",
  ]);
  server = spawn("python3", [
    "-m", "serpeval.cli", "serve",
    "--data-root", dataRoot, "--addr", `127.0.0.1:${PORT}`,
  ], { stdio: "ignore" });
  await waitForHealth();
}, 30000);

afterAll(() => {
  server?.kill();
  rmSync(dataRoot, { recursive: true, force: true });
});

describe("scripted judging session", () => {
  const api = new Api(BASE);
  let state: ViewState;

  const voteFor = (rank: number) => rank % 6;

  async function judgeCurrentGroup(): Promise<string> {
    const token = state.group!.group_token!;
    for (const result of state.group!.results) {
      state = selectVote(state, result.rank, voteFor(result.rank));
      const ack = await api.vote(RUN, token, result.rank, voteFor(result.rank));
      expect(ack.ok).toBe(true);
      state = lockVote(state, result.rank, voteFor(result.rank));
      expect(ack.progress.judged).toBe(state.locked.size);
    }
    return token;
  }

  it("registers, logs in and receives the first 20-result group", async () => {
    await api.register({
      connection: { email: "ui-judge@example.org", password: "long-enough-secret" },
      personal: { name: "UI Judge", country: "DZ", language: "fr" },
      interests: { domains: "sports", specialty: "football" },
      competence: { profession: "student", study_level: "license 2" },
    });
    await api.login("ui-judge@example.org", "long-enough-secret");
    state = applyGroup(initialState(RUN), await api.next(RUN));
    expect(state.screen).toBe("judging");
    expect(state.group!.results.length).toBe(20);
    expect(state.group!.progress).toEqual({ judged: 0, total: 20, fraction: 0 });
  }, 20000);

  it("keeps every engine identifier out of the judging DOM (blind mode)", () => {
    const html = renderJudging(state);
    for (const engine of ENGINE_IDS) {
      expect(html).not.toContain(engine);
    }
    expect(html).not.toContain("engine-badge");
  });

  it("judges all 20 results, reaches 20/20 and auto-advances", async () => {
    const firstToken = await judgeCurrentGroup();
    expect(groupFullyJudged(state)).toBe(true);
    expect(state.locked.size).toBe(20);

    // Auto-advance: the next fetch lands on the second engine's group.
    const next = await api.next(RUN);
    expect(next.complete).toBe(false);
    expect(next.group_token).not.toBe(firstToken);
    expect(next.overall.groups_done).toBe(1);
    state = applyGroup(state, next);
    expect(state.locked.size).toBe(0);
  }, 30000);

  it("completes the run after the second group", async () => {
    await judgeCurrentGroup();
    const done = await api.next(RUN);
    expect(done.complete).toBe(true);
    expect(done.overall).toEqual({ groups_done: 2, groups_total: 2 });
  }, 30000);

  it("server-side user table reflects exactly the submitted votes", async () => {
    const reports = await api.reports(RUN);
    const table = reports.user_relevance!;
    expect(table.rows).toEqual(["R@01", "R@05", "R@10", "R@15", "R@20"]);
    expect(table.columns).toEqual(ENGINE_IDS);
    // votes were rank % 6 on every result of both groups
    const expected: Record<string, number> = {
      "R@01": 1.0, "R@05": 3.0, "R@10": 2.5, "R@15": 2.4, "R@20": 2.4,
    };
    for (const [row, value] of Object.entries(expected)) {
      for (const engine of ENGINE_IDS) {
        expect(table.cells[row][engine]).toBe(value);
      }
    }
    expect(table.flags).toEqual([]);
  }, 20000);

  it("reload rebuilds the completed state from the server alone", async () => {
    const fresh = new Api(BASE);
    await fresh.login("ui-judge@example.org", "long-enough-secret");
    const next = await fresh.next(RUN);
    expect(next.complete).toBe(true);
  }, 20000);
});
