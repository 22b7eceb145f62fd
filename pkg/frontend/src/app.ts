/** Wiring: form edits → /predict, suggestion requests → /counterfactual,
 * explanation requests → /attribution, with latest-edit-wins request
 * handling, inline validation errors, and an unreachable-service banner.
 */

import { ApiClient, ApiError, ServiceUnreachableError } from "./api.js";
import { FormState } from "./state.js";
import {
  buildForm,
  clearFieldErrors,
  fillForm,
  renderAttribution,
  renderBanner,
  renderCounterfactual,
  renderHistory,
  renderPrediction,
  setFieldError,
} from "./render.js";
import type { Attribution, Counterfactual } from "./types.js";

export interface AppElements {
  form: HTMLElement;
  prediction: HTMLElement;
  thresholdSlider: HTMLInputElement;
  counterfactual: HTMLElement;
  counterfactualButton: HTMLButtonElement;
  attribution: HTMLElement;
  attributionButton: HTMLButtonElement;
  history: HTMLElement;
  banner: HTMLElement;
}

type PredictionKind = "edit" | "counterfactual";

export class App {
  state!: FormState;
  private inputs!: Map<string, HTMLInputElement | HTMLSelectElement>;
  private inflight: AbortController | null = null;
  private lastFailed: (() => void) | null = null;
  private lastCounterfactual: Counterfactual | null = null;
  private lastAttribution: Attribution | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly ui: AppElements,
  ) {}

  async init(): Promise<void> {
    try {
      const [schema, model] = await Promise.all([
        this.client.getSchema(),
        this.client.getModel(),
      ]);
      this.state = new FormState(schema, model.decision_threshold);
    } catch (err) {
      this.fail(err, () => void this.init());
      return;
    }
    this.inputs = buildForm(this.state.schema, this.ui.form, this.onEdit);
    fillForm(this.inputs, this.state.getFeatures());
    this.ui.thresholdSlider.value = String(this.state.threshold);
    this.ui.thresholdSlider.addEventListener("input", () => {
      const token = this.state.setThreshold(Number(this.ui.thresholdSlider.value));
      void this.predict(token, "edit");
    });
    this.ui.counterfactualButton.addEventListener("click", () => {
      void this.requestCounterfactual();
    });
    this.ui.attributionButton.addEventListener("click", () => {
      void this.requestAttribution();
    });
    this.renderAll();
    void this.predict(this.state.currentToken(), "edit");
  }

  private onEdit = (name: string, value: number | string): void => {
    setFieldError(this.ui.form, name, null);
    const token = this.state.edit(name, value);
    void this.predict(token, "edit");
  };

  /** POST /predict for the state as of `token`; drop the response if a newer
   * edit superseded it (latest edit wins). */
  async predict(token: number, kind: PredictionKind): Promise<void> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const prediction = await this.client.predict(
        { features: this.state.getFeatures(), threshold: this.state.threshold },
        controller.signal,
      );
      const committed =
        kind === "counterfactual"
          ? this.state.commitCounterfactualPrediction(prediction, token)
          : this.state.commitPrediction(prediction, token);
      if (committed) {
        clearFieldErrors(this.ui.form);
        this.clearBanner();
        this.renderAll();
      }
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") return;
      this.fail(err, () => void this.predict(this.state.currentToken(), kind));
    }
  }

  async requestCounterfactual(): Promise<void> {
    try {
      const cf = await this.client.counterfactual({
        features: this.state.getFeatures(),
        threshold: this.state.threshold,
      });
      this.lastCounterfactual = cf;
      this.clearBanner();
      this.renderAll();
    } catch (err) {
      this.fail(err, () => void this.requestCounterfactual());
    }
  }

  /** Write the suggestion into the form, then re-predict through the
   * service; the form now equals the counterfactual map field-for-field. */
  applyCounterfactual = (cf: Counterfactual): void => {
    const token = this.state.applyCounterfactual(cf);
    fillForm(this.inputs, this.state.getFeatures());
    this.renderAll();
    void this.predict(token, "counterfactual");
  };

  async requestAttribution(): Promise<void> {
    try {
      this.lastAttribution = await this.client.attribution({
        features: this.state.getFeatures(),
        n_samples: 200,
        seed: 0,
      });
      this.clearBanner();
      this.renderAll();
    } catch (err) {
      this.fail(err, () => void this.requestAttribution());
    }
  }

  revert = (index: number): void => {
    const token = this.state.revertTo(index);
    fillForm(this.inputs, this.state.getFeatures());
    this.renderAll();
    void this.predict(token, "edit");
  };

  private fail(err: unknown, retry: () => void): void {
    if (err instanceof ApiError && err.field) {
      setFieldError(this.ui.form, err.field, err.body.message);
      return;
    }
    if (err instanceof ApiError) {
      renderBanner(this.ui.banner, err.body.message, null);
      return;
    }
    if (err instanceof ServiceUnreachableError) {
      this.lastFailed = retry;
      renderBanner(this.ui.banner, "service unreachable", () => {
        this.lastFailed?.();
      });
      return;
    }
    throw err;
  }

  private clearBanner(): void {
    this.lastFailed = null;
    renderBanner(this.ui.banner, null, null);
  }

  private renderAll(): void {
    renderPrediction(this.ui.prediction, this.state.getPrediction());
    renderCounterfactual(
      this.ui.counterfactual,
      this.lastCounterfactual,
      this.applyCounterfactual,
    );
    renderAttribution(this.ui.attribution, this.lastAttribution);
    renderHistory(this.ui.history, this.state.getHistory(), this.revert);
  }
}
