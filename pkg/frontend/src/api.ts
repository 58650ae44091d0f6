// Types and a thin client for the dpvalid server's JSON API. Everything the
// console shows comes out of these response bodies; the client never
// recomputes a statistic on its own.

export interface BudgetPair {
  epsilon: number;
  delta: number;
}

export interface BudgetStatus {
  dataset_id: string;
  total: BudgetPair;
  spent: BudgetPair;
  remaining: BudgetPair;
  n_charges: number;
}

export interface PreviewOutcome {
  accepted: boolean;
  spent_after: BudgetPair;
  remaining_after: BudgetPair;
}

export type QueryKind = "histogram" | "mean" | "quantile" | "regression";

export interface HistogramResult {
  column: string;
  edges: number[];
  counts: number[];
  raw_counts: number[];
  mechanism: string;
  noise_scale: number;
  renyi_alpha: number | null;
}

export interface MeanResult {
  column: string;
  method: string;
  point: number;
  ci_lower: number;
  ci_upper: number;
  confidence: number;
  sigma_tilde: number;
}

export interface QuantileResult {
  column: string;
  mode: string;
  probabilities: number[];
  values: number[];
  per_quantile_epsilon: number;
}

export interface RegressionCoefficient {
  name: string;
  estimate: number;
  ci_asymptotic: [number, number];
  ci_bootstrap?: [number, number];
}

export interface RegressionResult {
  method: string;
  coefficients: RegressionCoefficient[];
  sigma2: number;
  n_hat: number;
  confidence: number;
  metadata: Record<string, unknown>;
}

export type QueryResult =
  | HistogramResult
  | MeanResult
  | QuantileResult
  | RegressionResult;

export interface QuerySuccess {
  dataset_id: string;
  query_id: string;
  kind: QueryKind;
  result: QueryResult;
  charge: BudgetPair;
  remaining: BudgetPair;
}

export interface ApiError {
  code: string;
  message: string;
  remaining?: BudgetPair;
}

export interface HealthStatus {
  status: string;
  datasets: string[];
}

/** A non-2xx response, carrying the server's structured error body. */
export class ServerError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiError,
  ) {
    super(body.message);
    this.name = "ServerError";
  }
}

/** Everything the query form edits. One draft covers all four kinds. */
export interface DraftQuery {
  kind: QueryKind;
  epsilon: number;
  delta: number;
  /** Target column; doubles as the response column for regression. */
  column: string;
  nBins: number;
  mechanism: string;
  meanMethod: string;
  probabilities: number[];
  quantileMode: string;
  numeric: string[];
  categorical: string[];
  filter?: { column: string; level: string };
}

export function defaultDraft(): DraftQuery {
  return {
    kind: "mean",
    epsilon: 0.1,
    delta: 0,
    column: "income",
    nBins: 10,
    mechanism: "laplace",
    meanMethod: "noisyvar",
    probabilities: [0.25, 0.5, 0.75],
    quantileMode: "pure-split",
    numeric: [],
    categorical: [],
  };
}

/** Compose the POST /queries body the server expects for this draft. */
export function queryBody(draft: DraftQuery): Record<string, unknown> {
  const body: Record<string, unknown> = {
    kind: draft.kind,
    epsilon: draft.epsilon,
    delta: draft.delta,
  };
  switch (draft.kind) {
    case "histogram":
      body.column = draft.column;
      body.n_bins = draft.nBins;
      body.mechanism = draft.mechanism;
      break;
    case "mean":
      body.column = draft.column;
      body.method = draft.meanMethod;
      break;
    case "quantile":
      body.column = draft.column;
      body.probabilities = draft.probabilities;
      body.mode = draft.quantileMode;
      break;
    case "regression":
      body.response = draft.column;
      body.numeric = draft.numeric;
      body.categorical = draft.categorical;
      break;
  }
  if (draft.filter) {
    body.filter = { [draft.filter.column]: draft.filter.level };
  }
  return body;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ConsoleApi {
  constructor(
    private readonly baseUrl: string,
    private readonly token?: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token !== undefined) headers["x-api-token"] = this.token;
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = (await res.json()) as unknown;
    if (!res.ok) throw new ServerError(res.status, parsed as ApiError);
    return parsed as T;
  }

  health(): Promise<HealthStatus> {
    return this.call("GET", "/healthz");
  }

  budget(datasetId: string): Promise<BudgetStatus> {
    return this.call("GET", `/datasets/${encodeURIComponent(datasetId)}/budget`);
  }

  preview(datasetId: string, charge: BudgetPair): Promise<PreviewOutcome> {
    return this.call("POST", `/datasets/${encodeURIComponent(datasetId)}/preview`, charge);
  }

  submit(datasetId: string, body: Record<string, unknown>): Promise<QuerySuccess> {
    return this.call("POST", `/datasets/${encodeURIComponent(datasetId)}/queries`, body);
  }
}
