/** Browser entry point: service base URL from ?service=, else same origin. */

import { ApiClient } from "./api.js";
import { App, type AppElements } from "./app.js";

function required<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? window.location.origin;

const ui: AppElements = {
  form: required("form"),
  prediction: required("prediction"),
  thresholdSlider: required<HTMLInputElement>("threshold-slider"),
  counterfactual: required("counterfactual"),
  counterfactualButton: required<HTMLButtonElement>("counterfactual-button"),
  attribution: required("attribution"),
  attributionButton: required<HTMLButtonElement>("attribution-button"),
  history: required("history"),
  banner: required("banner"),
};

void new App(new ApiClient(baseUrl), ui).init();
