/** DOM construction. Display rule: every model quantity is rendered with
 * String(value) on the untouched service response — no rounding, no
 * reformatting — so what the user reads is what the service said.
 */

import type {
  Attribution,
  Counterfactual,
  Feature,
  Prediction,
  Schema,
} from "./types.js";
import type { Scenario } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

export type EditHandler = (name: string, value: number | string) => void;

function fieldInput(feature: Feature, onEdit: EditHandler): HTMLElement {
  if (feature.kind === "binary") {
    const input = el("input", { type: "checkbox", "data-input": feature.name });
    input.addEventListener("change", () =>
      onEdit(feature.name, input.checked ? 1 : 0),
    );
    return input;
  }
  if (feature.kind === "categorical") {
    const select = el("select", { "data-input": feature.name });
    for (const level of feature.levels) {
      select.appendChild(el("option", { value: level }, level));
    }
    select.addEventListener("change", () => onEdit(feature.name, select.value));
    return select;
  }
  const input = el("input", {
    type: "number",
    "data-input": feature.name,
    min: String(feature.min),
    max: String(feature.max),
    step: feature.integer_valued ? "1" : "any",
  });
  input.addEventListener("change", () => {
    const parsed = Number(input.value);
    // Empty or unparseable text goes through as-is so the service names
    // the offending field instead of the client inventing a value.
    onEdit(feature.name, Number.isFinite(parsed) && input.value !== "" ? parsed : input.value);
  });
  return input;
}

/** Schema-driven form: one row per feature, widget chosen by kind, with an
 * inline error slot the app fills from service validation responses. */
export function buildForm(
  schema: Schema,
  container: HTMLElement,
  onEdit: EditHandler,
): Map<string, HTMLInputElement | HTMLSelectElement> {
  container.textContent = "";
  const inputs = new Map<string, HTMLInputElement | HTMLSelectElement>();
  for (const feature of schema.features) {
    const row = el("div", { class: "field", "data-field": feature.name });
    const label = el("label", {}, feature.name.replaceAll("_", " "));
    const input = fieldInput(feature, onEdit);
    label.appendChild(input);
    row.appendChild(label);
    if (feature.kind === "numeric") {
      row.appendChild(
        el("span", { class: "range-hint" }, `${feature.min} – ${feature.max}`),
      );
    }
    row.appendChild(el("span", { class: "field-error", role: "alert" }));
    container.appendChild(row);
    inputs.set(feature.name, input as HTMLInputElement | HTMLSelectElement);
  }
  return inputs;
}

/** Push the state's feature map into the widgets (after apply/revert). */
export function fillForm(
  inputs: Map<string, HTMLInputElement | HTMLSelectElement>,
  features: Record<string, number | string>,
): void {
  for (const [name, input] of inputs) {
    const value = features[name];
    if (value === undefined) continue;
    if (input instanceof HTMLInputElement && input.type === "checkbox") {
      input.checked = value === 1 || value === "1";
    } else {
      input.value = String(value);
    }
  }
}

export function renderPrediction(
  panel: HTMLElement,
  prediction: Prediction | null,
): void {
  panel.textContent = "";
  if (prediction === null) {
    panel.appendChild(el("p", { class: "placeholder" }, "awaiting prediction…"));
    return;
  }
  const badgeWord = prediction.label === 1 ? "abnormal" : "normal";
  const badge = el(
    "span",
    { class: `badge ${badgeWord}`, "data-testid": "class-badge" },
    badgeWord,
  );
  panel.appendChild(badge);
  const dl = el("dl");
  dl.appendChild(el("dt", {}, "probability"));
  dl.appendChild(
    el("dd", { "data-testid": "probability" }, String(prediction.probability)),
  );
  dl.appendChild(el("dt", {}, "threshold"));
  dl.appendChild(
    el("dd", { "data-testid": "threshold" }, String(prediction.threshold)),
  );
  dl.appendChild(el("dt", {}, "member probabilities"));
  const members = el("dd", { "data-testid": "member-probabilities" });
  prediction.member_probabilities.forEach((p, i) => {
    const alpha = prediction.alphas[i];
    members.appendChild(
      el("div", {}, `member ${i}: ${String(p)} (weight ${String(alpha)})`),
    );
  });
  dl.appendChild(members);
  panel.appendChild(dl);
  if (prediction.fallback_uniform) {
    panel.appendChild(
      el(
        "p",
        { class: "note" },
        "all folds missed the quality gate; uniform voting in effect",
      ),
    );
  }
}

/** One suggestion card: changed attributes with before → after values and an
 * apply action that writes the suggestion into the form. */
export function renderCounterfactual(
  panel: HTMLElement,
  cf: Counterfactual | null,
  onApply: (cf: Counterfactual) => void,
): void {
  panel.textContent = "";
  if (cf === null) {
    panel.appendChild(el("p", { class: "placeholder" }, "no suggestion yet"));
    return;
  }
  if (cf.changed_features.length === 0) {
    panel.appendChild(
      el("p", {}, "already classified as the target class; nothing to change"),
    );
    return;
  }
  const list = el("ul", { "data-testid": "cf-changes" });
  for (const name of cf.changed_features) {
    const item = el("li", { "data-changed": name });
    item.appendChild(el("span", { class: "cf-feature" }, name));
    item.appendChild(
      el("span", { class: "cf-before" }, String(cf.original[name])),
    );
    item.appendChild(el("span", { class: "cf-arrow" }, " → "));
    item.appendChild(
      el("span", { class: "cf-after" }, String(cf.counterfactual[name])),
    );
    list.appendChild(item);
  }
  panel.appendChild(list);
  const dl = el("dl");
  dl.appendChild(el("dt", {}, "predicted probability after changes"));
  dl.appendChild(
    el("dd", { "data-testid": "cf-probability" }, String(cf.counterfactual_prob)),
  );
  panel.appendChild(dl);
  const apply = el(
    "button",
    { type: "button", "data-testid": "cf-apply" },
    "apply to form",
  );
  apply.addEventListener("click", () => onApply(cf));
  panel.appendChild(apply);
}

/** Horizontal bars sorted by attribution magnitude; bar length is layout,
 * the printed value is the service's number verbatim. */
export function renderAttribution(
  panel: HTMLElement,
  attribution: Attribution | null,
): void {
  panel.textContent = "";
  if (attribution === null) {
    panel.appendChild(el("p", { class: "placeholder" }, "no attribution yet"));
    return;
  }
  const order = attribution.features
    .map((name, i) => ({ name, i }))
    .sort(
      (a, b) =>
        Math.abs(attribution.values[b.i] ?? 0) -
        Math.abs(attribution.values[a.i] ?? 0),
    );
  const maxAbs = Math.max(
    ...attribution.values.map((v) => Math.abs(v)),
    Number.MIN_VALUE,
  );
  const chart = el("div", { class: "bars", "data-testid": "attribution-bars" });
  for (const { name, i } of order) {
    const value = attribution.values[i] ?? 0;
    const se = attribution.std_errors[i] ?? 0;
    const row = el("div", { class: "bar-row", "data-attr": name });
    row.appendChild(el("span", { class: "bar-label" }, name));
    const bar = el("div", {
      class: `bar ${value < 0 ? "negative" : "positive"}`,
    });
    bar.style.width = `${(Math.abs(value) / maxAbs) * 100}%`;
    row.appendChild(bar);
    row.appendChild(
      el("span", { class: "bar-value" }, `${String(value)} ± ${String(se)}`),
    );
    chart.appendChild(row);
  }
  panel.appendChild(chart);
}

export function renderHistory(
  panel: HTMLElement,
  history: readonly Scenario[],
  onRevert: (index: number) => void,
): void {
  panel.textContent = "";
  const list = el("ol", { "data-testid": "history" });
  history.forEach((scenario, index) => {
    const item = el("li", { "data-history-index": String(index) });
    const probability = scenario.prediction
      ? String(scenario.prediction.probability)
      : "—";
    item.appendChild(
      el("span", {}, `${scenario.source}: probability ${probability}`),
    );
    const revert = el(
      "button",
      { type: "button", "data-testid": `revert-${index}` },
      "revert",
    );
    revert.addEventListener("click", () => onRevert(index));
    item.appendChild(revert);
    list.appendChild(item);
  });
  panel.appendChild(list);
}

export function renderBanner(
  banner: HTMLElement,
  message: string | null,
  onRetry: (() => void) | null,
): void {
  banner.textContent = "";
  if (message === null) {
    banner.hidden = true;
    return;
  }
  banner.hidden = false;
  banner.appendChild(el("span", { "data-testid": "banner-message" }, message));
  if (onRetry) {
    const retry = el(
      "button",
      { type: "button", "data-testid": "banner-retry" },
      "retry",
    );
    retry.addEventListener("click", onRetry);
    banner.appendChild(retry);
  }
}

/** Write or clear the inline error slot of one field row. */
export function setFieldError(
  container: HTMLElement,
  field: string,
  message: string | null,
): void {
  const slot = container.querySelector<HTMLElement>(
    `[data-field="${field}"] .field-error`,
  );
  if (slot) slot.textContent = message ?? "";
}

export function clearFieldErrors(container: HTMLElement): void {
  for (const slot of container.querySelectorAll<HTMLElement>(".field-error")) {
    slot.textContent = "";
  }
}
