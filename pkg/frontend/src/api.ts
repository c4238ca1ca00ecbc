// Typed client for the recommendation service. Every displayed number must
// originate from a server response, so responses keep their raw body text
// alongside the parsed object and intensity values are extracted as the
// exact substrings the server sent.

export interface Snapshot {
  session_id: string;
  clock: number;
  dose: number;
  stratum: number;
  z3: number;
  z_bmi: number;
  delta: number;
  dose_range: [number, number];
  eta: number[];
  window_hours: number;
  recommended_stratum: number | null;
  completed: boolean;
  last_change: number;
  history: HistoryEntry[];
}

export interface HistoryEntry {
  kind: string;
  time: number;
  dose: number;
  stratum: number;
  intensity: number | null;
  recommendation: number | null;
  override?: boolean;
  events?: number;
  survival_probability?: number;
}

export interface StateDelta {
  clock: number;
  times: number[];
  intensity: number[];
  events: boolean[];
  n_events: number;
  recommended_stratum: number;
  survival_probability: number;
  z3: number;
  completed: boolean;
  current_stratum: number;
}

export interface ApiFailure {
  status: number;
  code: string;
  message: string;
  detail: unknown;
}

export interface Reply<T> {
  ok: boolean;
  status: number;
  raw: string;
  data?: T;
  error?: ApiFailure;
}

export class ApiClient {
  constructor(private baseUrl: string, private fetchFn: typeof fetch = fetch) {}

  private async request<T>(path: string, init?: RequestInit): Promise<Reply<T>> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const raw = await resp.text();
    if (!resp.ok) {
      let failure: ApiFailure = {
        status: resp.status,
        code: "unknown",
        message: raw,
        detail: null,
      };
      try {
        const obj = JSON.parse(raw);
        failure = {
          status: resp.status,
          code: obj.code ?? "unknown",
          message: obj.message ?? raw,
          detail: obj.detail ?? null,
        };
      } catch {
        // non-JSON error body; keep the raw text
      }
      return { ok: false, status: resp.status, raw, error: failure };
    }
    return { ok: true, status: resp.status, raw, data: JSON.parse(raw) as T };
  }

  createSession(body: {
    baseline: Record<string, number>;
    dose_range: [number, number];
    delta: number | null;
    eta?: number[] | null;
    seed?: number;
    window_hours?: number;
  }): Promise<Reply<{ session_id: string; snapshot: Snapshot }>> {
    return this.request("/sessions", { method: "POST", body: JSON.stringify(body) });
  }

  getState(sessionId: string): Promise<Reply<Snapshot>> {
    return this.request(`/sessions/${sessionId}`);
  }

  advance(sessionId: string, dtSteps: number): Promise<Reply<StateDelta>> {
    return this.request(`/sessions/${sessionId}/advance`, {
      method: "POST",
      body: JSON.stringify({ dt_steps: dtSteps }),
    });
  }

  applyDose(sessionId: string, dose: number, override: boolean): Promise<Reply<Snapshot>> {
    return this.request(`/sessions/${sessionId}/dose`, {
      method: "POST",
      body: JSON.stringify({ dose, override }),
    });
  }
}

// Exact byte substrings of the "intensity" array in a raw advance response.
export function extractIntensityStrings(raw: string): string[] {
  const key = '"intensity":';
  const start = raw.indexOf(key);
  if (start < 0) return [];
  const open = raw.indexOf("[", start);
  if (open < 0) return [];
  let depth = 0;
  let end = open;
  for (let i = open; i < raw.length; i++) {
    if (raw[i] === "[") depth++;
    else if (raw[i] === "]") {
      depth--;
      if (depth === 0) {
        end = i;
        break;
      }
    }
  }
  const body = raw.slice(open + 1, end).trim();
  if (!body) return [];
  return body.split(",").map((s) => s.trim());
}
