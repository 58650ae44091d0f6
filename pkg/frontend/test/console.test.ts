import { describe, expect, it } from "vitest";

import {
  ApiError,
  BudgetPair,
  ConsoleApi,
  FetchLike,
  MeanResult,
  QueryKind,
  QuerySuccess,
  ServerError,
  defaultDraft,
  queryBody,
} from "../src/api.js";
import { ConsoleSession, HistoryEntry } from "../src/session.js";
import { renderGauge, renderHistory, renderPreview, renderResult } from "../src/render.js";
import { MockServer } from "./mock.js";

// -- helpers ----------------------------------------------------------------

/** data-* attributes of the outermost tag of an HTML fragment. */
function rootAttrs(html: string): Record<string, string> {
  const head = html.slice(0, html.indexOf(">"));
  const out: Record<string, string> = {};
  for (const m of head.matchAll(/data-([a-z0-9-]+)="([^"]*)"/g)) {
    out[m[1]!] = m[2]!;
  }
  return out;
}

/** data-* attributes of every <tr> in an HTML fragment, in order. */
function rowAttrs(html: string): Record<string, string>[] {
  const rows: Record<string, string>[] = [];
  for (const tr of html.matchAll(/<tr([^>]*)>/g)) {
    const out: Record<string, string> = {};
    for (const m of tr[1]!.matchAll(/data-([a-z0-9-]+)="([^"]*)"/g)) {
      out[m[1]!] = m[2]!;
    }
    if (Object.keys(out).length > 0) rows.push(out);
  }
  return rows;
}

interface Fixture {
  mock: MockServer;
  api: ConsoleApi;
  session: ConsoleSession;
}

async function connect(opts?: { budgets?: Record<string, BudgetPair> }): Promise<Fixture> {
  const mock = new MockServer();
  const budgets = opts?.budgets ?? {
    alpha: { epsilon: 3, delta: 1e-3 },
    beta: { epsilon: 1.5, delta: 0 },
  };
  for (const [id, total] of Object.entries(budgets)) mock.addDataset(id, total);
  const api = new ConsoleApi("http://mock", undefined, mock.fetch);
  const session = new ConsoleSession(api);
  await session.selectDataset(Object.keys(budgets)[0]!);
  return { mock, api, session };
}

/** The gauge must show exactly the mock ledger's numbers. */
function expectGaugeMirrorsLedger(session: ConsoleSession, mock: MockServer, id: string): void {
  const a = rootAttrs(renderGauge(session.budget));
  const spent = mock.spentOf(id);
  const remaining = mock.remainingOf(id);
  expect(Number(a["remaining-epsilon"])).toBe(remaining.epsilon);
  expect(Number(a["remaining-delta"])).toBe(remaining.delta);
  expect(Number(a["spent-epsilon"])).toBe(spent.epsilon);
  expect(Number(a["spent-delta"])).toBe(spent.delta);
  expect(Number(a["n-charges"])).toBe(mock.chargesOf(id).length);
  expect(a["dataset"]).toBe(id);
}

function chargeEq(a: BudgetPair, b: BudgetPair): boolean {
  return a.epsilon === b.epsilon && a.delta === b.delta;
}

// -- the round-trip gate ------------------------------------------------------

describe("console round trip against the mocked server", () => {
  it("scripted preview and submit sequences keep the gauge equal to the ledger and gate submission on the preview verdict", async () => {
    const epsilons = [0, 0.05, 0.1, 0.25, 0.5, 1, 2, 5, 9];
    const deltas = [0, 1e-6, 1e-3];
    const kinds: QueryKind[] = ["mean", "histogram", "quantile", "regression"];
    const ids = ["alpha", "beta"];

    for (let script = 0; script < 30; script++) {
      let state = (script * 2654435761 + 1) >>> 0;
      const rand = () => {
        state = (state * 1664525 + 1013904223) >>> 0;
        return state / 2 ** 32;
      };
      const pick = <T>(xs: readonly T[]): T => xs[Math.floor(rand() * xs.length)]!;

      const { mock, session } = await connect();
      let currentId = "alpha";

      for (let step = 0; step < 25; step++) {
        const savedLength = session.history.length;
        const savedHead = session.history[0];
        const roll = rand();

        if (roll < 0.3) {
          session.setDraft({
            kind: pick(kinds),
            epsilon: pick(epsilons),
            delta: pick(deltas),
          });
        } else if (roll < 0.6) {
          await session.previewDraft();
        } else if (roll < 0.85) {
          const before = mock.chargesOf(currentId).length;
          const allowed = session.canSubmit();
          const entry = await session.submitDraft();
          if (!allowed) {
            expect(entry).toBeNull();
            expect(mock.chargesOf(currentId).length).toBe(before);
            expect(session.history.length).toBe(savedLength);
          } else {
            expect(entry).not.toBeNull();
            expect(session.history.length).toBe(savedLength + 1);
          }
        } else if (roll < 0.95) {
          await session.refreshBudget();
        } else {
          currentId = pick(ids);
          await session.selectDataset(currentId);
        }

        // Gauge: whatever just happened, the rendered numbers are the
        // mock's own arithmetic, nothing locally computed.
        expectGaugeMirrorsLedger(session, mock, currentId);

        // Submit gate: enabled exactly when a live preview of the current
        // draft reports acceptance, which must match the mock's ledger.
        const p = session.preview;
        const live = p !== null && p.kind === "server" && chargeEq(p.charge, session.draftCharge());
        const oracle = live ? mock.wouldAccept(currentId, session.draftCharge()) : false;
        expect(session.canSubmit()).toBe(oracle);
        if (live && p.kind === "server") {
          expect(p.outcome.accepted).toBe(oracle);
        }

        // History is append-only: nothing rewritten, nothing dropped.
        expect(session.history.length).toBeGreaterThanOrEqual(savedLength);
        if (savedHead !== undefined) expect(session.history[0]).toBe(savedHead);
      }
    }
  });
});

// -- previews -----------------------------------------------------------------

describe("preview", () => {
  it("a zero epsilon draft previews as no charge without calling the server", async () => {
    const { mock, session } = await connect();
    const before = mock.previewHits;
    session.setDraft({ epsilon: 0 });
    await session.previewDraft();
    expect(mock.previewHits).toBe(before);
    expect(session.canSubmit()).toBe(false);
    const a = rootAttrs(renderPreview(session.preview, session.budget));
    expect(a["preview"]).toBe("zero-charge");
    expect(Number(a["after-epsilon"])).toBe(mock.remainingOf("alpha").epsilon);
  });

  it("an accepted preview shows the remaining budget minus the charge", async () => {
    const { mock, session } = await connect();
    session.setDraft({ epsilon: 0.5, delta: 1e-6 });
    await session.previewDraft();
    const a = rootAttrs(renderPreview(session.preview, session.budget));
    expect(a["accepted"]).toBe("true");
    // ledger arithmetic: total minus (spent plus charge), clamped at zero
    const spent = mock.spentOf("alpha");
    expect(Number(a["after-epsilon"])).toBe(Math.max(0, 3 - (spent.epsilon + 0.5)));
    expect(Number(a["after-delta"])).toBe(Math.max(0, 1e-3 - (spent.delta + 1e-6)));
    expect(Number(a["after-epsilon"])).toBe(2.5);
  });

  it("an over-budget draft previews as rejected and cannot be submitted", async () => {
    const { session } = await connect();
    session.setDraft({ epsilon: 9 });
    await session.previewDraft();
    const html = renderPreview(session.preview, session.budget);
    expect(rootAttrs(html)["accepted"]).toBe("false");
    expect(html).toContain("preview-rejected");
    expect(session.canSubmit()).toBe(false);
    expect(await session.submitDraft()).toBeNull();
  });

  it("a delta charge against a pure-DP budget is rejected", async () => {
    const { session } = await connect();
    await session.selectDataset("beta");
    session.setDraft({ epsilon: 0.1, delta: 1e-6 });
    await session.previewDraft();
    expect(session.canSubmit()).toBe(false);
    expect(rootAttrs(renderPreview(session.preview, session.budget))["accepted"]).toBe("false");
  });

  it("racing previews are last-write-wins on the display", async () => {
    const mock = new MockServer();
    mock.addDataset("alpha", { epsilon: 3, delta: 1e-3 });
    const held: Array<() => void> = [];
    const gated: FetchLike = (url, init) =>
      new Promise((resolve) => {
        const run = () => resolve(mock.fetch(url, init));
        if (String(url).includes("/preview")) held.push(run);
        else run();
      });
    const session = new ConsoleSession(new ConsoleApi("http://mock", undefined, gated));
    await session.selectDataset("alpha");

    session.setDraft({ epsilon: 0.3 });
    const first = session.previewDraft();
    session.setDraft({ epsilon: 0.7 });
    const second = session.previewDraft();
    expect(held.length).toBe(2);
    held[1]!();
    await second;
    held[0]!();
    await first;

    // The older request landed last, so its verdict is what shows, and the
    // stale-match guard keeps the submit control off for the 0.7 draft.
    expect(session.preview?.charge.epsilon).toBe(0.3);
    expect(session.canSubmit()).toBe(false);
  });

  it("editing the draft after a preview stales it until the next preview", async () => {
    const { session } = await connect();
    session.setDraft({ epsilon: 0.2 });
    await session.previewDraft();
    expect(session.canSubmit()).toBe(true);
    session.setDraft({ epsilon: 0.4 });
    expect(session.canSubmit()).toBe(false);
    await session.previewDraft();
    expect(session.canSubmit()).toBe(true);
  });
});

// -- submissions ----------------------------------------------------------------

describe("submit", () => {
  it("a mean query renders the served point and interval and refreshes the gauge", async () => {
    const { mock, session } = await connect();
    session.setDraft({ kind: "mean", epsilon: 0.5, column: "income" });
    await session.previewDraft();
    const entry = await session.submitDraft();
    expect(entry).not.toBeNull();
    expect(entry!.ok).toBe(true);

    const resp = entry!.response as QuerySuccess;
    const served = resp.result as MeanResult;
    const a = rootAttrs(renderResult(entry!));
    expect(Number(a["point"])).toBe(served.point);
    expect(Number(a["ci-lower"])).toBe(served.ci_lower);
    expect(Number(a["ci-upper"])).toBe(served.ci_upper);
    expect(mock.chargesOf("alpha").length).toBe(1);
    expectGaugeMirrorsLedger(session, mock, "alpha");
  });

  it("an insufficient-data rejection is rendered without any budget change", async () => {
    const { mock, session } = await connect();
    session.setDraft({
      kind: "mean",
      epsilon: 0.5,
      filter: { column: "grp", level: "empty" },
    });
    await session.previewDraft();
    expect(session.canSubmit()).toBe(true);
    const entry = await session.submitDraft();
    expect(entry!.ok).toBe(false);
    expect((entry!.response as ApiError).code).toBe("insufficient-data");
    expect(mock.chargesOf("alpha").length).toBe(0);
    expect(session.history.length).toBe(1);
    expectGaugeMirrorsLedger(session, mock, "alpha");
    expect(renderResult(entry!)).toContain("insufficient-data");
  });

  it("budget exhaustion disables the submit control", async () => {
    const { mock, session } = await connect({
      budgets: { tiny: { epsilon: 0.2, delta: 0 } },
    });
    session.setDraft({ kind: "mean", epsilon: 0.1, delta: 0 });
    await session.previewDraft();
    expect(await session.submitDraft()).not.toBeNull();
    expect(session.canSubmit()).toBe(true); // 0.1 of 0.2 left, one more fits
    expect(await session.submitDraft()).not.toBeNull();

    // Exhausted: the auto re-preview reports rejection, the control locks.
    expect(mock.remainingOf("tiny").epsilon).toBe(0);
    expect(session.canSubmit()).toBe(false);
    expect(await session.submitDraft()).toBeNull();
    expect(mock.chargesOf("tiny").length).toBe(2);
    expectGaugeMirrorsLedger(session, mock, "tiny");
  });

  it("keeps at most one submission in flight", async () => {
    const mock = new MockServer();
    mock.addDataset("alpha", { epsilon: 3, delta: 1e-3 });
    const held: Array<() => void> = [];
    const gated: FetchLike = (url, init) =>
      new Promise((resolve) => {
        const run = () => resolve(mock.fetch(url, init));
        if (String(url).includes("/queries")) held.push(run);
        else run();
      });
    const session = new ConsoleSession(new ConsoleApi("http://mock", undefined, gated));
    await session.selectDataset("alpha");

    session.setDraft({ epsilon: 0.25 });
    await session.previewDraft();
    const first = session.submitDraft();
    const second = session.submitDraft();
    expect(held.length).toBe(1); // the second call never reached the server
    held[0]!();
    expect(await second).toBeNull();
    expect(await first).not.toBeNull();
    expect(mock.chargesOf("alpha").length).toBe(1);
  });

  it("records request and response pairs verbatim in the history", async () => {
    const { session } = await connect();
    session.setDraft({ kind: "quantile", epsilon: 0.3, probabilities: [0.1, 0.9] });
    await session.previewDraft();
    await session.submitDraft();
    const entry = session.history[0]!;
    expect(entry.request).toEqual(queryBody(session.draft));
    const resp = entry.response as QuerySuccess;
    expect(resp.kind).toBe("quantile");
    expect(resp.query_id).toMatch(/^q-\d{6}:quantile$/);
  });
});

// -- rendering ------------------------------------------------------------------

describe("rendering", () => {
  it("histogram bars carry exactly the served counts", async () => {
    const { session } = await connect();
    session.setDraft({ kind: "histogram", epsilon: 0.5, nBins: 4 });
    await session.previewDraft();
    const entry = await session.submitDraft();
    const resp = entry!.response as QuerySuccess;
    const counts = (resp.result as { counts: number[] }).counts;
    const rows = rowAttrs(renderResult(entry!));
    expect(rows.length).toBe(4);
    rows.forEach((row, i) => {
      expect(Number(row["count"])).toBe(counts[i]);
    });
  });

  it("quantile tables carry exactly the served values", async () => {
    const { session } = await connect();
    session.setDraft({ kind: "quantile", epsilon: 0.4, probabilities: [0.25, 0.5, 0.75] });
    await session.previewDraft();
    const entry = await session.submitDraft();
    const resp = entry!.response as QuerySuccess;
    const values = (resp.result as { values: number[] }).values;
    const rows = rowAttrs(renderResult(entry!));
    expect(rows.map((r) => Number(r["value"]))).toEqual(values);
  });

  it("regression tables show both interval families", async () => {
    const { session } = await connect();
    session.setDraft({ kind: "regression", epsilon: 1, numeric: ["log_agi"], categorical: [] });
    await session.previewDraft();
    const entry = await session.submitDraft();
    const html = renderResult(entry!);
    const rows = rowAttrs(html);
    expect(rows.length).toBeGreaterThan(1);
    for (const row of rows) {
      expect(row["asym-lower"]).toBeDefined();
      expect(row["boot-lower"]).toBeDefined();
      expect(Number(row["asym-lower"])).toBeLessThan(Number(row["estimate"]));
    }
  });

  it("a coefficient without a bootstrap interval renders as n/a", () => {
    const entry: HistoryEntry = {
      request: { kind: "regression" },
      ok: true,
      response: {
        dataset_id: "alpha",
        query_id: "q-000001:regression",
        kind: "regression",
        charge: { epsilon: 1, delta: 0 },
        remaining: { epsilon: 1, delta: 0 },
        result: {
          method: "plugin",
          coefficients: [
            { name: "intercept", estimate: 1.5, ci_asymptotic: [1.0, 2.0] as [number, number] },
          ],
          sigma2: 0.5,
          n_hat: 100,
          confidence: 0.95,
          metadata: {},
        },
      },
    };
    const html = renderResult(entry);
    expect(html).toContain("n/a");
    expect(html).not.toContain("boot-lower");
  });

  it("renders placeholders before any dataset or query exists", () => {
    expect(renderGauge(null)).toContain("no dataset selected");
    expect(renderHistory([])).toContain("no queries yet");
    expect(renderPreview(null, null)).toContain("sliders");
  });

  it("escapes markup arriving in server strings", async () => {
    const { session } = await connect();
    session.setDraft({ kind: "mean", epsilon: 0.2, column: '<img src=x onerror="1">' });
    await session.previewDraft();
    const entry = await session.submitDraft();
    const html = renderResult(entry!);
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img");
  });
});

// -- transport ------------------------------------------------------------------

describe("transport", () => {
  it("surfaces unauthorized errors when the token is wrong", async () => {
    const mock = new MockServer();
    mock.addDataset("alpha", { epsilon: 3, delta: 0 });
    mock.token = "s3cret";
    const bare = new ConsoleApi("http://mock", undefined, mock.fetch);
    await expect(bare.budget("alpha")).rejects.toMatchObject({
      status: 401,
      body: { code: "unauthorized" },
    });
    const authed = new ConsoleApi("http://mock", "s3cret", mock.fetch);
    const budget = await authed.budget("alpha");
    expect(budget.total.epsilon).toBe(3);
  });

  it("maps unknown datasets to not-found errors", async () => {
    const { api } = await connect();
    await expect(api.budget("nope")).rejects.toSatisfy(
      (e: unknown) => e instanceof ServerError && e.status === 404 && e.body.code === "not-found",
    );
  });

  it("composes the documented body for every query kind", () => {
    const draft = { ...defaultDraft(), epsilon: 0.7, delta: 1e-6, column: "income" };

    expect(queryBody({ ...draft, kind: "histogram", nBins: 12, mechanism: "gaussian" })).toEqual({
      kind: "histogram",
      epsilon: 0.7,
      delta: 1e-6,
      column: "income",
      n_bins: 12,
      mechanism: "gaussian",
    });
    expect(queryBody({ ...draft, kind: "mean", meanMethod: "bhm" })).toEqual({
      kind: "mean",
      epsilon: 0.7,
      delta: 1e-6,
      column: "income",
      method: "bhm",
    });
    expect(
      queryBody({ ...draft, kind: "quantile", probabilities: [0.5], quantileMode: "smooth" }),
    ).toEqual({
      kind: "quantile",
      epsilon: 0.7,
      delta: 1e-6,
      column: "income",
      probabilities: [0.5],
      mode: "smooth",
    });
    expect(
      queryBody({
        ...draft,
        kind: "regression",
        numeric: ["log_agi"],
        categorical: ["age65"],
        filter: { column: "age65", level: "over65" },
      }),
    ).toEqual({
      kind: "regression",
      epsilon: 0.7,
      delta: 1e-6,
      response: "income",
      numeric: ["log_agi"],
      categorical: ["age65"],
      filter: { age65: "over65" },
    });
  });
});
