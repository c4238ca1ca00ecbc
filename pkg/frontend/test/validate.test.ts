import { describe, expect, it } from "vitest";

import { medianOf, validateDose, validateSetup } from "../src/validate.js";

const base = {
  bmi: "37",
  dilation: "3",
  rangeLo: "0",
  rangeHi: "8",
  delta: "4",
  windowHours: "0.5",
};

describe("setup validation", () => {
  it("accepts a clean setup", () => {
    const { values, errors } = validateSetup(base);
    expect(errors).toEqual({});
    expect(values?.delta).toBe(4);
  });

  it("blank threshold means median default", () => {
    const { values } = validateSetup({ ...base, delta: "" });
    expect(values?.delta).toBeNull();
    expect(medianOf(0, 8)).toBe(4);
  });

  it("rejects a threshold outside the range without a request", () => {
    const { values, errors } = validateSetup({ ...base, delta: "9" });
    expect(values).toBeUndefined();
    expect(errors.delta).toMatch(/threshold/);
  });

  it("rejects inverted ranges", () => {
    const { errors } = validateSetup({ ...base, rangeLo: "6", rangeHi: "2" });
    expect(errors.rangeHi).toBeTruthy();
  });

  it("rejects non-numeric bmi", () => {
    const { errors } = validateSetup({ ...base, bmi: "abc" });
    expect(errors.bmi).toBeTruthy();
  });
});

describe("dose validation", () => {
  it("bounds the dose to the range", () => {
    expect(validateDose(9, 0, 8)).toMatch(/\[0, 8\]/);
    expect(validateDose(5, 0, 8)).toBeNull();
  });
});
