import { ApiClient } from "./api.js";
import { App, AppElements } from "./app.js";

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function collectElements(): AppElements {
  return {
    graph: byId("graph-view"),
    patterns: byId("patterns-view"),
    diagnostics: byId("diagnostics-view"),
    comparison: byId("comparison-view"),
    history: byId("history-view"),
    notice: byId("notice"),
  };
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const app = new App(api, collectElements());
  (window as unknown as { causeq: App }).causeq = app;

  byId("btn-update").addEventListener("click", () => void app.updateModel());
  byId("btn-confirm").addEventListener("click", () => app.confirmSelected());
  byId("btn-remove").addEventListener("click", () => app.removeSelected());
  byId("btn-snapshot").addEventListener("click", () => void app.saveSnapshot());
  byId("btn-history").addEventListener("click", () => void app.showHistory());

  const windowSlider = byId("window-slider") as HTMLInputElement;
  windowSlider.addEventListener("change", () => void app.setWindow(Number(windowSlider.value)));
  const strengthSlider = byId("strength-slider") as HTMLInputElement;
  const coverageSlider = byId("coverage-slider") as HTMLInputElement;
  const applyThresholds = () => void app.setThresholds(
    Number(strengthSlider.value), Number(coverageSlider.value));
  strengthSlider.addEventListener("change", applyThresholds);
  coverageSlider.addEventListener("change", applyThresholds);

  const form = byId("session-form") as HTMLFormElement;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const sid = (byId("session-id") as HTMLInputElement).value.trim();
    if (sid) {
      window.localStorage.setItem("causeq-session", sid);
      void app.attach(sid);
    }
  });

  // restore the previous session on reload: the view is a pure function
  // of server-side session state
  const remembered = window.localStorage.getItem("causeq-session");
  if (remembered) {
    (byId("session-id") as HTMLInputElement).value = remembered;
    await app.attach(remembered);
  }
}

window.addEventListener("DOMContentLoaded", () => void boot());
