// Client-side validation mirroring the server's session rules, so obviously
// malformed setups never produce a request.

export interface SetupInput {
  bmi: string;
  dilation: string;
  rangeLo: string;
  rangeHi: string;
  delta: string; // blank means "use the median"
  windowHours: string;
}

export interface SetupValues {
  bmi: number;
  dilation: number | null;
  rangeLo: number;
  rangeHi: number;
  delta: number | null;
  windowHours: number;
}

export type FieldErrors = Partial<Record<keyof SetupInput, string>>;

export function medianOf(lo: number, hi: number): number {
  return (lo + hi) / 2;
}

export function validateSetup(input: SetupInput): { values?: SetupValues; errors: FieldErrors } {
  const errors: FieldErrors = {};
  const bmi = Number(input.bmi);
  if (!input.bmi.trim() || !Number.isFinite(bmi) || bmi < 10 || bmi > 80) {
    errors.bmi = "BMI must be a number between 10 and 80";
  }
  let dilation: number | null = null;
  if (input.dilation.trim()) {
    dilation = Number(input.dilation);
    if (!Number.isFinite(dilation) || dilation < 0 || dilation > 10) {
      errors.dilation = "dilation must be between 0 and 10 cm";
    }
  }
  const lo = Number(input.rangeLo);
  const hi = Number(input.rangeHi);
  if (!Number.isFinite(lo) || lo < 0) errors.rangeLo = "lower bound must be a number >= 0";
  if (!Number.isFinite(hi) || hi <= lo) errors.rangeHi = "upper bound must exceed the lower bound";
  let delta: number | null = null;
  if (input.delta.trim()) {
    delta = Number(input.delta);
    if (!Number.isFinite(delta)) {
      errors.delta = "threshold must be a number";
    } else if (delta !== 0 && !(delta > lo && delta <= hi)) {
      errors.delta = "threshold must be 0 or inside the dose range";
    }
  }
  const windowHours = input.windowHours.trim() ? Number(input.windowHours) : 0.5;
  if (!Number.isFinite(windowHours) || windowHours <= 0 || windowHours > 4) {
    errors.windowHours = "window must be between 0 and 4 hours";
  }
  if (Object.keys(errors).length) return { errors };
  return {
    values: { bmi, dilation, rangeLo: lo, rangeHi: hi, delta, windowHours },
    errors: {},
  };
}

export function validateDose(dose: number, lo: number, hi: number): string | null {
  if (!Number.isFinite(dose)) return "dose must be a number";
  if (dose < lo || dose > hi) return `dose must lie in [${lo}, ${hi}]`;
  return null;
}
