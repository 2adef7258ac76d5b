// The trial loop: join screen -> (fetch trial -> pick left/right ->
// submit)* -> completion screen.  All state lives on the server; the
// only thing this page remembers is the participant token in
// localStorage, so a reload resumes at the outstanding trial.

import { Choice, StudyClient, TrialPayload } from "./client.js";

export const TOKEN_KEY = "participant_token";

type Screen = "join" | "trial" | "done" | "error";

const SCREEN_IDS: Record<Screen, string> = {
  join: "join-section",
  trial: "trial-section",
  done: "done-section",
  error: "error-section",
};

export interface AppOptions {
  client?: StudyClient;
  storage?: Storage;
}

export class App {
  private readonly doc: Document;
  private readonly client: StudyClient;
  private readonly storage: Storage;

  private screen: Screen = "join";
  private trial: TrialPayload | null = null;
  private selection: Choice | null = null;
  private busy = false; // a submit is in flight
  private pending: Promise<void> = Promise.resolve();
  private readonly onKey = (ev: KeyboardEvent) => this.handleKey(ev);

  constructor(doc: Document, opts: AppOptions = {}) {
    this.doc = doc;
    this.client = opts.client ?? new StudyClient();
    this.storage = opts.storage ?? doc.defaultView!.localStorage;
  }

  // -- lifecycle -----------------------------------------------------------

  mount(): void {
    this.el("join-button").addEventListener("click", () => this.joinClicked());
    this.el("token-input").addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter") this.joinClicked();
    });
    this.el("left-card").addEventListener("click", () => this.select("left"));
    this.el("right-card").addEventListener("click", () => this.select("right"));
    this.el("submit-button").addEventListener("click", () => this.submitClicked());
    this.el("retry-button").addEventListener("click", () =>
      this.enqueue(() => this.advance()),
    );
    this.doc.addEventListener("keydown", this.onKey);

    if (this.storage.getItem(TOKEN_KEY)) {
      this.enqueue(() => this.advance());
    } else {
      this.showScreen("join");
    }
  }

  /** Detach document-level listeners (page teardown). */
  destroy(): void {
    this.doc.removeEventListener("keydown", this.onKey);
  }

  /** Resolves once every queued operation has settled (test hook). */
  whenIdle(): Promise<void> {
    return this.pending;
  }

  // -- user actions ----------------------------------------------------------

  private joinClicked(): void {
    const input = this.el("token-input") as HTMLInputElement;
    const token = input.value.trim();
    if (!token) return;
    this.storage.setItem(TOKEN_KEY, token);
    this.enqueue(() => this.advance());
  }

  private select(choice: Choice): void {
    if (this.screen !== "trial" || this.trial === null || this.busy) return;
    this.selection = choice;
    this.updateSelectionUi();
  }

  private submitClicked(): void {
    this.enqueue(() => this.submit());
  }

  private handleKey(ev: KeyboardEvent): void {
    if (this.screen !== "trial") return;
    if (ev.key === "ArrowLeft") this.select("left");
    else if (ev.key === "ArrowRight") this.select("right");
    else if (ev.key === "Enter") this.submitClicked();
  }

  // -- trial loop -------------------------------------------------------------

  private async advance(): Promise<void> {
    const token = this.storage.getItem(TOKEN_KEY);
    if (!token) {
      this.showScreen("join");
      return;
    }
    const trial = await this.client.nextTrial(token);
    await this.refreshProgress();
    if (trial === null) {
      this.showScreen("done");
      return;
    }
    this.trial = trial;
    this.selection = null;
    (this.el("reference-img") as HTMLImageElement).src = trial.reference_image_url;
    (this.el("left-img") as HTMLImageElement).src = trial.left_render_url;
    (this.el("right-img") as HTMLImageElement).src = trial.right_render_url;
    this.updateSelectionUi();
    this.showScreen("trial");
  }

  private async submit(): Promise<void> {
    if (this.trial === null || this.selection === null || this.busy) return;
    const token = this.storage.getItem(TOKEN_KEY);
    if (!token) return;
    this.busy = true;
    this.updateSelectionUi();
    try {
      await this.client.submit(token, this.trial.trial_id, this.selection);
    } finally {
      this.busy = false;
    }
    this.trial = null;
    await this.advance();
  }

  private async refreshProgress(): Promise<void> {
    const progress = await this.client.progress();
    const fraction = progress.trials > 0 ? progress.answered / progress.trials : 0;
    const percent = `${Math.round(100 * fraction)}%`;
    (this.el("progress-fill") as HTMLElement).style.width = percent;
    this.el("progress-text").textContent =
      `${progress.answered} / ${progress.trials} comparisons answered`;
    this.el("done-progress").textContent =
      `${progress.answered} of ${progress.trials} comparisons are in.`;
  }

  // -- view helpers ---------------------------------------------------------

  private enqueue(op: () => Promise<void>): void {
    this.pending = this.pending
      .then(op)
      .catch((err) => this.showFailure(err));
  }

  private showFailure(err: unknown): void {
    this.el("error-text").textContent = String(err);
    this.showScreen("error");
  }

  private showScreen(screen: Screen): void {
    this.screen = screen;
    for (const [name, id] of Object.entries(SCREEN_IDS)) {
      (this.el(id) as HTMLElement).hidden = name !== screen;
    }
  }

  private updateSelectionUi(): void {
    const left = this.el("left-card");
    const right = this.el("right-card");
    left.classList.toggle("selected", this.selection === "left");
    right.classList.toggle("selected", this.selection === "right");
    left.setAttribute("aria-pressed", String(this.selection === "left"));
    right.setAttribute("aria-pressed", String(this.selection === "right"));
    (this.el("submit-button") as HTMLButtonElement).disabled =
      this.selection === null || this.busy;
  }

  private el(id: string): Element {
    const node = this.doc.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node;
  }
}
