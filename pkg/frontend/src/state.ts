// Session view model: a pure fold over server responses plus local input.
// No clinical quantity is computed here; every number shown in the timeline
// is carried as the exact string the server returned.

import type { Snapshot, StateDelta } from "./api.js";
import { extractIntensityStrings } from "./api.js";

export interface WindowView {
  index: number;
  clockEnd: number;
  intensityStrings: string[]; // raw substrings from the response body
  maxIntensity: number;
  events: number;
  recommended: number;
  survivalProbability: number;
  z3: number;
}

export interface TimelineDose {
  time: number;
  dose: number;
  override: boolean;
}

export interface SessionViewModel {
  sessionId: string | null;
  snapshot: Snapshot | null;
  windows: WindowView[];
  doses: TimelineDose[];
  pendingDose: number | null;
  guidance: { recommended: number; proposed: number; dose: number } | null;
  finished: boolean;
  lastError: string | null;
}

export function emptyViewModel(): SessionViewModel {
  return {
    sessionId: null,
    snapshot: null,
    windows: [],
    doses: [],
    pendingDose: null,
    guidance: null,
    finished: false,
    lastError: null,
  };
}

export function withSession(vm: SessionViewModel, snapshot: Snapshot): SessionViewModel {
  return { ...emptyViewModel(), sessionId: snapshot.session_id, snapshot };
}

export function withAdvance(
  vm: SessionViewModel,
  delta: StateDelta,
  raw: string
): SessionViewModel {
  const strings = extractIntensityStrings(raw);
  const window: WindowView = {
    index: vm.windows.length,
    clockEnd: delta.clock,
    intensityStrings: strings,
    maxIntensity: Math.max(...delta.intensity),
    events: delta.n_events,
    recommended: delta.recommended_stratum,
    survivalProbability: delta.survival_probability,
    z3: delta.z3,
  };
  const snapshot = vm.snapshot
    ? {
        ...vm.snapshot,
        clock: delta.clock,
        z3: delta.z3,
        recommended_stratum: delta.recommended_stratum,
        completed: delta.completed,
      }
    : vm.snapshot;
  return {
    ...vm,
    snapshot,
    windows: [...vm.windows, window],
    finished: delta.completed,
    lastError: null,
  };
}

export function withDose(vm: SessionViewModel, snapshot: Snapshot): SessionViewModel {
  const last = snapshot.history[snapshot.history.length - 1];
  const doses = [
    ...vm.doses,
    { time: snapshot.clock, dose: snapshot.dose, override: Boolean(last && last.override) },
  ];
  return { ...vm, snapshot, doses, guidance: null, pendingDose: null, lastError: null };
}

export function withGuidance(
  vm: SessionViewModel,
  dose: number,
  detail: { recommended_stratum: number; proposed_stratum: number }
): SessionViewModel {
  return {
    ...vm,
    guidance: {
      recommended: detail.recommended_stratum,
      proposed: detail.proposed_stratum,
      dose,
    },
  };
}

// Color for an intensity band cell: share of the timeline's maximum, darker
// for higher intensity (display only; values come from the server).
export function bandColor(value: number, timelineMax: number): string {
  const share = timelineMax > 0 ? Math.min(value / timelineMax, 1) : 0;
  const light = Math.round(92 - 62 * share);
  return `hsl(16, 78%, ${light}%)`;
}

export function timelineMaxIntensity(windows: WindowView[]): number {
  return windows.reduce((acc, w) => Math.max(acc, w.maxIntensity), 0);
}
