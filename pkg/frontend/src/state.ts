/** Form/session state: the current feature map, the last prediction, which
 * edits are awaiting a re-predict, and the scenario history.
 *
 * The store never computes model quantities — predictions enter only via
 * `commitPrediction`, straight from a service response. A monotonically
 * increasing edit token implements latest-edit-wins: responses to stale
 * requests are dropped instead of overwriting newer state.
 */

import type { Counterfactual, FeatureMap, Prediction, Schema } from "./types.js";

export interface Scenario {
  /** What produced this snapshot. */
  source: "initial" | "edit" | "counterfactual";
  features: FeatureMap;
  prediction: Prediction | null;
}

/** Schema-complete starting map: numeric at its minimum, binary off,
 * categorical at its first level. */
export function initialFeatures(schema: Schema): FeatureMap {
  const features: FeatureMap = {};
  for (const f of schema.features) {
    if (f.kind === "numeric") features[f.name] = f.min;
    else if (f.kind === "binary") features[f.name] = 0;
    else features[f.name] = f.levels[0] ?? "";
  }
  return features;
}

export class FormState {
  readonly schema: Schema;
  private features: FeatureMap;
  private prediction: Prediction | null = null;
  private pendingEdits = new Set<string>();
  private history: Scenario[] = [];
  private editToken = 0;
  threshold: number;

  constructor(schema: Schema, defaultThreshold: number) {
    this.schema = schema;
    this.features = initialFeatures(schema);
    this.threshold = defaultThreshold;
    this.history.push({
      source: "initial",
      features: { ...this.features },
      prediction: null,
    });
  }

  /** Defensive copy; always schema-complete. */
  getFeatures(): FeatureMap {
    return { ...this.features };
  }

  getPrediction(): Prediction | null {
    return this.prediction;
  }

  getPendingEdits(): string[] {
    return [...this.pendingEdits];
  }

  getHistory(): readonly Scenario[] {
    return this.history;
  }

  currentToken(): number {
    return this.editToken;
  }

  private assertKnown(name: string): void {
    if (!(name in this.features)) {
      throw new Error(`unknown feature: ${name}`);
    }
  }

  /** Record an edit and invalidate in-flight requests. Returns the token a
   * subsequent request must carry to be allowed to commit. */
  edit(name: string, value: number | string): number {
    this.assertKnown(name);
    this.features[name] = value;
    this.pendingEdits.add(name);
    this.prediction = null; // stale until the service answers again
    return ++this.editToken;
  }

  /** Changing the threshold re-asks the service rather than re-deriving the
   * class locally. */
  setThreshold(threshold: number): number {
    this.threshold = threshold;
    this.prediction = null;
    return ++this.editToken;
  }

  /** Accept a service response if it answers the newest edit. */
  commitPrediction(prediction: Prediction, token: number): boolean {
    if (token !== this.editToken) return false;
    this.prediction = prediction;
    this.pendingEdits.clear();
    this.history.push({
      source: "edit",
      features: { ...this.features },
      prediction,
    });
    return true;
  }

  /** Overwrite the form with the service's counterfactual feature map,
   * field-for-field. Returns the token for the follow-up re-predict. */
  applyCounterfactual(cf: Counterfactual): number {
    for (const f of this.schema.features) {
      const value = cf.counterfactual[f.name];
      if (value === undefined) {
        throw new Error(`counterfactual is missing feature: ${f.name}`);
      }
      this.features[f.name] = value;
    }
    this.pendingEdits = new Set(cf.changed_features);
    this.prediction = null;
    return ++this.editToken;
  }

  /** Record the post-apply re-predict under a counterfactual scenario. */
  commitCounterfactualPrediction(prediction: Prediction, token: number): boolean {
    if (token !== this.editToken) return false;
    this.prediction = prediction;
    this.pendingEdits.clear();
    this.history.push({
      source: "counterfactual",
      features: { ...this.features },
      prediction,
    });
    return true;
  }

  /** Restore a history snapshot into the form. The caller re-predicts. */
  revertTo(index: number): number {
    const scenario = this.history[index];
    if (!scenario) throw new Error(`no scenario at index ${index}`);
    this.features = { ...scenario.features };
    this.pendingEdits.clear();
    this.prediction = null;
    return ++this.editToken;
  }
}
