import { describe, expect, it } from "vitest";

import { extractIntensityStrings } from "../src/api.js";
import {
  bandColor,
  emptyViewModel,
  timelineMaxIntensity,
  withAdvance,
  withSession,
} from "../src/state.js";
import type { Snapshot, StateDelta } from "../src/api.js";

const snapshot: Snapshot = {
  session_id: "abc",
  clock: 0,
  dose: 0,
  stratum: 0,
  z3: 3,
  z_bmi: 1.1,
  delta: 4,
  dose_range: [0, 8],
  eta: [-1.8, 1.2, 0.3, 1.2],
  window_hours: 0.5,
  recommended_stratum: null,
  completed: false,
  last_change: 0,
  history: [],
};

function fakeDelta(): { delta: StateDelta; raw: string } {
  const delta: StateDelta = {
    clock: 0.5,
    times: [0, 0.01],
    intensity: [0.25, 0.5],
    events: [false, true],
    n_events: 1,
    recommended_stratum: 1,
    survival_probability: 0.9,
    z3: 3.2,
    completed: false,
    current_stratum: 0,
  };
  const raw = JSON.stringify(delta);
  return { delta, raw };
}

describe("view model", () => {
  it("keeps the raw intensity substrings from the response body", () => {
    const { delta, raw } = fakeDelta();
    const vm = withAdvance(withSession(emptyViewModel(), snapshot), delta, raw);
    expect(vm.windows).toHaveLength(1);
    expect(vm.windows[0].intensityStrings).toEqual(["0.25", "0.5"]);
    for (const s of vm.windows[0].intensityStrings) {
      expect(raw).toContain(s);
    }
  });

  it("extract handles exponent and integer forms verbatim", () => {
    const raw = '{"intensity":[1e-12, 0.5, 2]}';
    expect(extractIntensityStrings(raw)).toEqual(["1e-12", "0.5", "2"]);
  });

  it("darkest color goes to the max intensity", () => {
    const { delta, raw } = fakeDelta();
    const vm = withAdvance(withSession(emptyViewModel(), snapshot), delta, raw);
    const max = timelineMaxIntensity(vm.windows);
    const darkest = bandColor(max, max);
    const lighter = bandColor(max / 5, max);
    const lightness = (c: string) => Number(c.match(/(\d+)%\)$/)?.[1]);
    expect(lightness(darkest)).toBeLessThan(lightness(lighter));
  });

  it("timeline clock is monotone across advances", () => {
    const { delta, raw } = fakeDelta();
    let vm = withSession(emptyViewModel(), snapshot);
    vm = withAdvance(vm, delta, raw);
    vm = withAdvance(vm, { ...delta, clock: 1.0 }, raw.replace("0.5", "1.0"));
    expect(vm.windows.map((w) => w.clockEnd)).toEqual([0.5, 1.0]);
  });
});
