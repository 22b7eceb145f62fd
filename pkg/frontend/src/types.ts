/** Payload shapes of the inference service, verbatim. */

export interface NumericFeature {
  name: string;
  kind: "numeric";
  min: number;
  max: number;
  integer_valued: boolean;
}

export interface BinaryFeature {
  name: string;
  kind: "binary";
}

export interface CategoricalFeature {
  name: string;
  kind: "categorical";
  levels: string[];
}

export type Feature = NumericFeature | BinaryFeature | CategoricalFeature;

export interface Schema {
  features: Feature[];
  outcome_name: string;
}

/** Complete feature map: every schema feature name to its raw value. */
export type FeatureMap = Record<string, number | string>;

export interface Prediction {
  probability: number;
  label: 0 | 1;
  threshold: number;
  member_probabilities: number[];
  alphas: number[];
  fallback_uniform: boolean;
}

export interface Counterfactual {
  original: FeatureMap;
  counterfactual: FeatureMap;
  changed_features: string[];
  distance: number;
  original_prob: number;
  counterfactual_prob: number;
  flipped: boolean;
  trace: { feature: string; prob: number }[];
  original_label: 0 | 1;
  counterfactual_label: 0 | 1;
  threshold: number;
}

export interface Attribution {
  features: string[];
  values: number[];
  std_errors: number[];
  baseline: number;
  prediction: number;
  efficiency_residual: number;
  n_samples: number;
}

export interface ModelInfo {
  backbones: string[];
  alphas: number[];
  gate: number;
  decision_threshold: number;
  fallback_uniform: boolean;
  member_metadata: Record<string, number>[];
  n_features: number;
}

export interface ServiceError {
  code: string;
  message: string;
  field?: string | null;
  id?: string;
}
