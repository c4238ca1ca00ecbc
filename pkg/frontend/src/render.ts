// DOM rendering for the console: a setup form, then a live session screen
// with a recommendation banner, dose entry, an intensity color-band
// timeline and the session history.

import type { SessionViewModel } from "./state.js";
import { bandColor, timelineMaxIntensity } from "./state.js";

export function strataLabel(s: number | null): string {
  if (s === null) return "-";
  return s === 1 ? "upper" : "lower";
}

export function renderSetup(root: HTMLElement): void {
  root.innerHTML = `
    <h1>Dose-stratum console</h1>
    <form id="setup-form">
      <label>BMI <input id="f-bmi" value="30"></label>
      <span class="err" id="e-bmi"></span>
      <label>Dilation (cm) <input id="f-dilation" value="3"></label>
      <span class="err" id="e-dilation"></span>
      <label>Dose range low <input id="f-lo" value="0"></label>
      <span class="err" id="e-rangeLo"></span>
      <label>Dose range high <input id="f-hi" value="8"></label>
      <span class="err" id="e-rangeHi"></span>
      <label>Threshold &delta; (blank = median) <input id="f-delta" value=""></label>
      <span class="err" id="e-delta"></span>
      <span id="delta-preview"></span>
      <label>Window (hours) <input id="f-window" value="0.5"></label>
      <span class="err" id="e-windowHours"></span>
      <label>Seed <input id="f-seed" value="7"></label>
      <button id="create-btn" type="submit">Start session</button>
      <span class="err" id="e-server"></span>
    </form>
  `;
}

export function renderSession(root: HTMLElement, vm: SessionViewModel): void {
  const snap = vm.snapshot;
  if (!snap) return;
  const maxLam = timelineMaxIntensity(vm.windows);
  const windowsHtml = vm.windows
    .map((w) => {
      const cells = w.intensityStrings
        .map(
          (s, i) =>
            `<span class="band-cell" title="${s}" data-raw="${s}" ` +
            `style="background:${bandColor(Number(s), maxLam)}"></span>`
        )
        .join("");
      return `
        <div class="window" data-index="${w.index}">
          <span class="clock">t=${w.clockEnd.toFixed(2)}h</span>
          <span class="band">${cells}</span>
          <span class="events">${w.events} event(s)</span>
          <span class="z3">dilation ${w.z3}</span>
          <span class="rec">rec ${strataLabel(w.recommended)}</span>
        </div>`;
    })
    .join("");
  const dosesHtml = vm.doses
    .map(
      (d) =>
        `<li class="dose-entry${d.override ? " override" : ""}">t=${d.time.toFixed(2)}h ` +
        `dose ${d.dose}${d.override ? " (override)" : ""}</li>`
    )
    .join("");
  const historyHtml = snap.history
    .map(
      (h) =>
        `<li class="history-entry kind-${h.kind}${h.override ? " override" : ""}">` +
        `${h.kind} @ ${h.time.toFixed(2)}h dose=${h.dose} stratum=${strataLabel(h.stratum)}` +
        `${h.override ? " [override]" : ""}</li>`
    )
    .join("");
  const last = vm.windows[vm.windows.length - 1];
  const banner = last
    ? `recommended stratum: <b id="banner-stratum">${strataLabel(last.recommended)}</b>
       <span id="banner-survival">no-switch probability ${last.survivalProbability.toFixed(3)}</span>`
    : "no recommendation yet";
  const guidance = vm.guidance
    ? `<div id="guidance-dialog" role="dialog">
         server recommends the <b>${strataLabel(vm.guidance.recommended)}</b> stratum;
         dose ${vm.guidance.dose} lands in the ${strataLabel(vm.guidance.proposed)} stratum.
         <button id="override-btn">Apply anyway (override)</button>
         <button id="cancel-dose-btn">Cancel</button>
       </div>`
    : "";
  const pickerHint =
    last && last.recommended === 1
      ? `recommended range [${snap.delta}, ${snap.dose_range[1]}]`
      : last
        ? `recommended range [${snap.dose_range[0]}, ${snap.delta})`
        : "";
  root.innerHTML = `
    <h1>Session ${snap.session_id}</h1>
    <div id="status">
      clock <span id="clock">${snap.clock.toFixed(2)}</span>h,
      dose <span id="dose">${snap.dose}</span>,
      stratum <span id="stratum">${strataLabel(snap.stratum)}</span>,
      &delta;=<span id="delta">${snap.delta}</span>
      ${vm.finished ? '<b id="finished">completed</b>' : ""}
    </div>
    <div id="banner" class="${last ? "rec-" + strataLabel(last.recommended) : ""}">${banner}</div>
    <div id="controls">
      <button id="advance-btn" ${vm.finished ? "disabled" : ""}>Advance window</button>
      <label>Dose <input id="dose-input" value="${snap.dose}"></label>
      <span id="picker-hint">${pickerHint}</span>
      <button id="dose-btn" ${vm.finished ? "disabled" : ""}>Apply dose</button>
      <span class="err" id="e-dose"></span>
    </div>
    ${guidance}
    <div id="timeline">${windowsHtml}</div>
    <ul id="doses">${dosesHtml}</ul>
    <ul id="history">${historyHtml}</ul>
  `;
}
