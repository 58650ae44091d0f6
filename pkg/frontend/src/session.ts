// Session state for one analyst working one server. The budget shown to the
// user always mirrors the server's own accounting: it is re-fetched after
// every submission attempt rather than updated by client-side arithmetic.

import {
  ApiError,
  BudgetPair,
  BudgetStatus,
  ConsoleApi,
  DraftQuery,
  PreviewOutcome,
  QuerySuccess,
  ServerError,
  defaultDraft,
  queryBody,
} from "./api.js";

export type PreviewState =
  /** The server judged this charge. */
  | { kind: "server"; charge: BudgetPair; outcome: PreviewOutcome }
  /** A zero-epsilon draft charges nothing, so there is nothing to ask. */
  | { kind: "zero-charge"; charge: BudgetPair };

export interface HistoryEntry {
  request: Record<string, unknown>;
  response: QuerySuccess | ApiError;
  ok: boolean;
}

export class ConsoleSession {
  datasetId: string | null = null;
  budget: BudgetStatus | null = null;
  draft: DraftQuery = defaultDraft();
  preview: PreviewState | null = null;
  /** Request and response of every submission, in order, never rewritten. */
  readonly history: HistoryEntry[] = [];
  private submitting = false;

  constructor(private readonly api: ConsoleApi) {}

  async selectDataset(id: string): Promise<void> {
    this.datasetId = id;
    this.preview = null;
    await this.refreshBudget();
  }

  async refreshBudget(): Promise<void> {
    if (this.datasetId === null) return;
    this.budget = await this.api.budget(this.datasetId);
  }

  setDraft(patch: Partial<DraftQuery>): void {
    this.draft = { ...this.draft, ...patch };
  }

  draftCharge(): BudgetPair {
    return { epsilon: this.draft.epsilon, delta: this.draft.delta };
  }

  /**
   * Ask the server whether the draft's charge would fit. Free, no mutation.
   * Concurrent previews are not serialized; whichever response lands last
   * is the one displayed.
   */
  async previewDraft(): Promise<void> {
    if (this.datasetId === null) return;
    const charge = this.draftCharge();
    if (charge.epsilon === 0) {
      this.preview = { kind: "zero-charge", charge };
      return;
    }
    const outcome = await this.api.preview(this.datasetId, charge);
    this.preview = { kind: "server", charge, outcome };
  }

  private previewMatchesDraft(): boolean {
    return (
      this.preview !== null &&
      this.preview.charge.epsilon === this.draft.epsilon &&
      this.preview.charge.delta === this.draft.delta
    );
  }

  /**
   * The submit control's enabled state. True only when the server has
   * previewed the draft exactly as it now stands and accepted it; a
   * rejected preview, a stale preview, a zero charge, or an in-flight
   * submission all disable it.
   */
  canSubmit(): boolean {
    return (
      !this.submitting &&
      this.preview !== null &&
      this.preview.kind === "server" &&
      this.previewMatchesDraft() &&
      this.preview.outcome.accepted
    );
  }

  /**
   * Submit the draft. At most one submission is in flight; calls while
   * disabled do nothing and return null. Every attempt, accepted or not,
   * is appended to the history, after which the budget gauge re-fetches
   * from the server and the what-if preview re-arms for the new balance.
   */
  async submitDraft(): Promise<HistoryEntry | null> {
    if (!this.canSubmit() || this.datasetId === null) return null;
    const request = queryBody(this.draft);
    this.submitting = true;
    try {
      let entry: HistoryEntry;
      try {
        const response = await this.api.submit(this.datasetId, request);
        entry = { request, response, ok: true };
      } catch (err) {
        if (!(err instanceof ServerError)) throw err;
        entry = { request, response: err.body, ok: false };
      }
      this.history.push(entry);
      await this.refreshBudget();
      await this.previewDraft();
      return entry;
    } finally {
      this.submitting = false;
    }
  }
}
