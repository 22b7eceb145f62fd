/** Shared DOM scaffolding for app-level tests. */

import { ApiClient } from "../src/api.js";
import { App, type AppElements } from "../src/app.js";
import { MockService } from "./mockService.js";

export function mountShell(): AppElements {
  document.body.innerHTML = `
    <div id="banner" hidden></div>
    <div id="form"></div>
    <input id="threshold-slider" type="range" min="0" max="1" step="0.01">
    <div id="prediction"></div>
    <button id="counterfactual-button" type="button"></button>
    <div id="counterfactual"></div>
    <button id="attribution-button" type="button"></button>
    <div id="attribution"></div>
    <div id="history"></div>
  `;
  const byId = <T extends HTMLElement>(id: string): T =>
    document.getElementById(id) as T;
  return {
    form: byId("form"),
    prediction: byId("prediction"),
    thresholdSlider: byId<HTMLInputElement>("threshold-slider"),
    counterfactual: byId("counterfactual"),
    counterfactualButton: byId<HTMLButtonElement>("counterfactual-button"),
    attribution: byId("attribution"),
    attributionButton: byId<HTMLButtonElement>("attribution-button"),
    history: byId("history"),
    banner: byId("banner"),
  };
}

export async function mountApp(): Promise<{
  app: App;
  ui: AppElements;
  service: MockService;
}> {
  const service = new MockService();
  const ui = mountShell();
  const app = new App(new ApiClient("http://svc.test", service.fetch), ui);
  await app.init();
  return { app, ui, service };
}

/** Drain pending microtasks/macrotasks so fire-and-forget fetches settle. */
export async function flush(times = 4): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

export function text(root: HTMLElement, selector: string): string {
  const node = root.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`no element matches ${selector}`);
  return node.textContent ?? "";
}

export function setNumeric(ui: AppElements, name: string, value: number): void {
  const input = ui.form.querySelector<HTMLInputElement>(`[data-input="${name}"]`);
  if (!input) throw new Error(`no input for ${name}`);
  input.value = String(value);
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function setBinary(ui: AppElements, name: string, on: boolean): void {
  const input = ui.form.querySelector<HTMLInputElement>(`[data-input="${name}"]`);
  if (!input) throw new Error(`no input for ${name}`);
  input.checked = on;
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

export function setCategorical(ui: AppElements, name: string, level: string): void {
  const select = ui.form.querySelector<HTMLSelectElement>(`[data-input="${name}"]`);
  if (!select) throw new Error(`no select for ${name}`);
  select.value = level;
  select.dispatchEvent(new Event("change", { bubbles: true }));
}
