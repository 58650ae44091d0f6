// Browser entry point: wires the form controls to a ConsoleSession and
// repaints the gauge, preview, and history after every interaction.

import { ConsoleApi, DraftQuery, QueryKind } from "./api.js";
import { ConsoleSession } from "./session.js";
import { renderGauge, renderHistory, renderPreview } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const connectForm = el<HTMLFormElement>("connect-form");
const baseUrlInput = el<HTMLInputElement>("base-url");
const tokenInput = el<HTMLInputElement>("api-token");
const datasetSelect = el<HTMLSelectElement>("dataset");
const kindSelect = el<HTMLSelectElement>("kind");
const columnInput = el<HTMLInputElement>("column");
const epsilonSlider = el<HTMLInputElement>("epsilon");
const epsilonReadout = el<HTMLElement>("epsilon-readout");
const deltaSelect = el<HTMLSelectElement>("delta");
const nBinsInput = el<HTMLInputElement>("n-bins");
const mechanismSelect = el<HTMLSelectElement>("mechanism");
const meanMethodSelect = el<HTMLSelectElement>("mean-method");
const probabilitiesInput = el<HTMLInputElement>("probabilities");
const quantileModeSelect = el<HTMLSelectElement>("quantile-mode");
const numericInput = el<HTMLInputElement>("numeric");
const categoricalInput = el<HTMLInputElement>("categorical");
const filterColumnInput = el<HTMLInputElement>("filter-column");
const filterLevelInput = el<HTMLInputElement>("filter-level");
const submitButton = el<HTMLButtonElement>("submit");
const gaugeBox = el<HTMLElement>("gauge-box");
const previewBox = el<HTMLElement>("preview-box");
const historyBox = el<HTMLElement>("history-box");
const statusLine = el<HTMLElement>("status-line");

let session: ConsoleSession | null = null;

function paint(): void {
  gaugeBox.innerHTML = renderGauge(session?.budget ?? null);
  previewBox.innerHTML = renderPreview(session?.preview ?? null, session?.budget ?? null);
  historyBox.innerHTML = renderHistory(session?.history ?? []);
  submitButton.disabled = !(session?.canSubmit() ?? false);
  epsilonReadout.textContent = epsilonSlider.value;
  const kind = kindSelect.value;
  for (const row of document.querySelectorAll<HTMLElement>("[data-for-kind]")) {
    row.hidden = !(row.dataset.forKind ?? "").split(" ").includes(kind);
  }
}

function parseList(raw: string): string[] {
  return raw
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0);
}

function draftFromForm(): Partial<DraftQuery> {
  const filterColumn = filterColumnInput.value.trim();
  const filterLevel = filterLevelInput.value.trim();
  return {
    kind: kindSelect.value as QueryKind,
    epsilon: Number(epsilonSlider.value),
    delta: Number(deltaSelect.value),
    column: columnInput.value.trim(),
    nBins: Number(nBinsInput.value) || 10,
    mechanism: mechanismSelect.value,
    meanMethod: meanMethodSelect.value,
    probabilities: parseList(probabilitiesInput.value).map(Number),
    quantileMode: quantileModeSelect.value,
    numeric: parseList(numericInput.value),
    categorical: parseList(categoricalInput.value),
    filter: filterColumn && filterLevel ? { column: filterColumn, level: filterLevel } : undefined,
  };
}

async function onDraftChanged(): Promise<void> {
  if (!session) return;
  session.setDraft(draftFromForm());
  paint();
  try {
    await session.previewDraft();
    statusLine.textContent = "";
  } catch (err) {
    statusLine.textContent = `preview failed: ${err instanceof Error ? err.message : err}`;
  }
  paint();
}

connectForm.addEventListener("submit", async (ev) => {
  ev.preventDefault();
  const token = tokenInput.value.trim();
  const api = new ConsoleApi(baseUrlInput.value.replace(/\/+$/, ""), token || undefined);
  try {
    const health = await api.health();
    datasetSelect.innerHTML = health.datasets
      .map((d) => `<option value="${d}">${d}</option>`)
      .join("");
    session = new ConsoleSession(api);
    const first = health.datasets[0];
    if (first !== undefined) {
      await session.selectDataset(first);
      const total = session.budget?.total.epsilon ?? 5;
      epsilonSlider.max = String(total);
      statusLine.textContent = `connected, ${health.datasets.length} dataset(s)`;
    } else {
      statusLine.textContent = "connected, but the server has no datasets";
    }
    await onDraftChanged();
  } catch (err) {
    statusLine.textContent = `connection failed: ${err instanceof Error ? err.message : err}`;
  }
  paint();
});

datasetSelect.addEventListener("change", async () => {
  if (!session) return;
  await session.selectDataset(datasetSelect.value);
  const total = session.budget?.total.epsilon;
  if (total !== undefined) epsilonSlider.max = String(total);
  await onDraftChanged();
});

for (const input of [
  kindSelect,
  columnInput,
  epsilonSlider,
  deltaSelect,
  nBinsInput,
  mechanismSelect,
  meanMethodSelect,
  probabilitiesInput,
  quantileModeSelect,
  numericInput,
  categoricalInput,
  filterColumnInput,
  filterLevelInput,
]) {
  input.addEventListener("input", () => void onDraftChanged());
}

submitButton.addEventListener("click", async () => {
  if (!session) return;
  submitButton.disabled = true;
  try {
    await session.submitDraft();
    statusLine.textContent = "";
  } catch (err) {
    statusLine.textContent = `submit failed: ${err instanceof Error ? err.message : err}`;
  }
  paint();
});

paint();
