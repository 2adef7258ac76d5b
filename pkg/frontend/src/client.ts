// Typed client for the study HTTP API, with retry/backoff on transient
// failures.  The server enforces one outstanding trial per participant,
// which is what makes retried submits safe: if our first POST landed but
// the ack got lost, the retry is answered with 409 and we treat that as
// "already recorded" instead of submitting twice.

export interface TrialPayload {
  trial_id: string;
  reference_image_url: string;
  left_render_url: string;
  right_render_url: string;
}

export interface Progress {
  answered: number;
  pairs: number;
  trials: number;
  coverage_histogram: Record<string, number>;
}

export type Choice = "left" | "right";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;
export type SleepFn = (ms: number) => Promise<void>;

export interface ClientOptions {
  fetchFn?: FetchLike;
  sleep?: SleepFn;
  /** Total tries per request, first attempt included. */
  attempts?: number;
  baseDelayMs?: number;
}

const defaultSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class StudyClient {
  private readonly fetchFn: FetchLike;
  private readonly sleep: SleepFn;
  private readonly attempts: number;
  private readonly baseDelayMs: number;

  constructor(opts: ClientOptions = {}) {
    this.fetchFn = opts.fetchFn ?? ((input, init) => fetch(input, init));
    this.sleep = opts.sleep ?? defaultSleep;
    this.attempts = opts.attempts ?? 4;
    this.baseDelayMs = opts.baseDelayMs ?? 250;
  }

  /** GET the next trial; null means every assigned trial is answered (204). */
  async nextTrial(participant: string): Promise<TrialPayload | null> {
    const resp = await this.request(
      `/api/trial?participant=${encodeURIComponent(participant)}`,
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw new Error(`trial fetch failed: HTTP ${resp.status}`);
    return (await resp.json()) as TrialPayload;
  }

  async progress(): Promise<Progress> {
    const resp = await this.request("/api/progress");
    if (!resp.ok) throw new Error(`progress fetch failed: HTTP ${resp.status}`);
    return (await resp.json()) as Progress;
  }

  /**
   * POST one forced choice.  "recorded" on a fresh 200;
   * "already-recorded" when a *retried* POST hits the outstanding-trial
   * guard (409), meaning the earlier attempt landed.  A 409 on the very
   * first attempt is a real client error and throws.
   */
  async submit(
    participant: string,
    trialId: string,
    choice: Choice,
  ): Promise<"recorded" | "already-recorded"> {
    let retried = false;
    for (let attempt = 0; ; attempt++) {
      let resp: Response;
      try {
        resp = await this.fetchFn("/api/response", {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ participant, trial_id: trialId, choice }),
        });
      } catch (err) {
        if (attempt + 1 >= this.attempts) throw err;
        retried = true;
        await this.sleep(this.baseDelayMs * 2 ** attempt);
        continue;
      }
      if (resp.ok) return "recorded";
      if (resp.status === 409 && retried) return "already-recorded";
      if (resp.status >= 500 && attempt + 1 < this.attempts) {
        retried = true;
        await this.sleep(this.baseDelayMs * 2 ** attempt);
        continue;
      }
      throw new Error(`submit failed: HTTP ${resp.status}`);
    }
  }

  /** GET with retry on network errors and 5xx; other statuses pass through. */
  private async request(path: string, init?: RequestInit): Promise<Response> {
    for (let attempt = 0; ; attempt++) {
      try {
        const resp = await this.fetchFn(path, init);
        if (resp.status >= 500 && attempt + 1 < this.attempts) {
          await this.sleep(this.baseDelayMs * 2 ** attempt);
          continue;
        }
        return resp;
      } catch (err) {
        if (attempt + 1 >= this.attempts) throw err;
        await this.sleep(this.baseDelayMs * 2 ** attempt);
      }
    }
  }
}
