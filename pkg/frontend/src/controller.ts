// Wires the API client, the view model and the DOM. Exposed as a class so
// tests can drive the exact flows a user would.

import { ApiClient } from "./api.js";
import {
  SessionViewModel,
  emptyViewModel,
  withAdvance,
  withDose,
  withGuidance,
  withSession,
} from "./state.js";
import { renderSession, renderSetup } from "./render.js";
import { medianOf, validateDose, validateSetup, SetupInput } from "./validate.js";

export class Console {
  vm: SessionViewModel = emptyViewModel();
  rawResponses: string[] = [];

  constructor(
    private root: HTMLElement,
    private api: ApiClient
  ) {}

  showSetup(): void {
    renderSetup(this.root);
    const form = this.root.querySelector("#setup-form") as HTMLFormElement;
    const deltaInput = this.root.querySelector("#f-delta") as HTMLInputElement;
    const preview = this.root.querySelector("#delta-preview") as HTMLElement;
    const updatePreview = () => {
      const lo = Number((this.root.querySelector("#f-lo") as HTMLInputElement).value);
      const hi = Number((this.root.querySelector("#f-hi") as HTMLInputElement).value);
      preview.textContent = deltaInput.value.trim()
        ? ""
        : `median default: ${medianOf(lo, hi)}`;
    };
    updatePreview();
    deltaInput.addEventListener("input", updatePreview);
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitSetup();
    });
  }

  readSetupInput(): SetupInput {
    const val = (id: string) => (this.root.querySelector(id) as HTMLInputElement).value;
    return {
      bmi: val("#f-bmi"),
      dilation: val("#f-dilation"),
      rangeLo: val("#f-lo"),
      rangeHi: val("#f-hi"),
      delta: val("#f-delta"),
      windowHours: val("#f-window"),
    };
  }

  async submitSetup(): Promise<boolean> {
    const input = this.readSetupInput();
    const seed = Number((this.root.querySelector("#f-seed") as HTMLInputElement).value) || 0;
    const { values, errors } = validateSetup(input);
    for (const key of ["bmi", "dilation", "rangeLo", "rangeHi", "delta", "windowHours"]) {
      const el = this.root.querySelector(`#e-${key}`) as HTMLElement | null;
      if (el) el.textContent = (errors as Record<string, string>)[key] ?? "";
    }
    if (!values) return false;
    const baseline: Record<string, number> = { bmi: values.bmi };
    if (values.dilation !== null) baseline.dilation = values.dilation;
    const reply = await this.api.createSession({
      baseline,
      dose_range: [values.rangeLo, values.rangeHi],
      delta: values.delta,
      seed,
      window_hours: values.windowHours,
    });
    this.rawResponses.push(reply.raw);
    if (!reply.ok || !reply.data) {
      const el = this.root.querySelector("#e-server") as HTMLElement;
      el.textContent = reply.error?.message ?? "server error";
      return false;
    }
    this.vm = withSession(this.vm, reply.data.snapshot);
    renderSession(this.root, this.vm);
    this.bindSessionControls();
    return true;
  }

  bindSessionControls(): void {
    const adv = this.root.querySelector("#advance-btn");
    adv?.addEventListener("click", () => void this.advance());
    const doseBtn = this.root.querySelector("#dose-btn");
    doseBtn?.addEventListener("click", () => void this.applyDose(false));
    const overrideBtn = this.root.querySelector("#override-btn");
    overrideBtn?.addEventListener("click", () => void this.applyDose(true));
    const cancelBtn = this.root.querySelector("#cancel-dose-btn");
    cancelBtn?.addEventListener("click", () => {
      this.vm = { ...this.vm, guidance: null };
      this.rerender();
    });
  }

  rerender(): void {
    const doseValue = (this.root.querySelector("#dose-input") as HTMLInputElement | null)?.value;
    renderSession(this.root, this.vm);
    if (doseValue !== undefined) {
      const input = this.root.querySelector("#dose-input") as HTMLInputElement | null;
      if (input && this.vm.pendingDose !== null) input.value = String(this.vm.pendingDose);
    }
    this.bindSessionControls();
  }

  async advance(): Promise<void> {
    if (!this.vm.sessionId || !this.vm.snapshot) return;
    const steps = Math.round(this.vm.snapshot.window_hours / 0.01);
    const reply = await this.api.advance(this.vm.sessionId, steps);
    this.rawResponses.push(reply.raw);
    if (!reply.ok || !reply.data) {
      if (reply.error?.code === "session_completed") {
        this.vm = { ...this.vm, finished: true };
        this.rerender();
      }
      return;
    }
    this.vm = withAdvance(this.vm, reply.data, reply.raw);
    this.rerender();
  }

  async applyDose(override: boolean): Promise<void> {
    if (!this.vm.sessionId || !this.vm.snapshot) return;
    const input = this.root.querySelector("#dose-input") as HTMLInputElement;
    const dose = override && this.vm.guidance ? this.vm.guidance.dose : Number(input.value);
    const [lo, hi] = this.vm.snapshot.dose_range;
    const err = validateDose(dose, lo, hi);
    const errEl = this.root.querySelector("#e-dose") as HTMLElement;
    if (err) {
      errEl.textContent = err;
      return;
    }
    this.vm = { ...this.vm, pendingDose: dose };
    const sessionId = this.vm.sessionId as string;
    const reply = await this.api.applyDose(sessionId, dose, override);
    this.rawResponses.push(reply.raw);
    if (!reply.ok) {
      if (reply.error?.code === "stratum_mismatch") {
        const detail = reply.error.detail as {
          recommended_stratum: number;
          proposed_stratum: number;
        };
        this.vm = withGuidance(this.vm, dose, detail);
        this.rerender();
      } else {
        errEl.textContent = reply.error?.message ?? "server error";
      }
      return;
    }
    this.vm = withDose(this.vm, reply.data as never);
    this.rerender();
  }
}

export function mount(root: HTMLElement, baseUrl: string): Console {
  const app = new Console(root, new ApiClient(baseUrl));
  app.showSetup();
  return app;
}
