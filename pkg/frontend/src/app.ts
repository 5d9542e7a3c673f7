/** Keyboard-first annotation view.
 *
 * Digits 1-8 toggle the categories in display order, 0 clears all flags and
 * submits ("no impurity"), Enter submits the current draft. After a
 * successful submit the next task loads automatically. All requests run
 * sequentially; `idle()` resolves once pending work settles.
 */
import {
  AnnotationRecord,
  ApiClient,
  CATEGORY_NAMES,
  N_CATEGORIES,
  NextTask,
} from "./api.js";
import { matchesFilter, ReviewFilter } from "./review.js";

type State = "loading" | "annotating" | "complete" | "error" | "review";

export class AnnotationApp {
  draft: boolean[] = new Array(N_CATEGORIES).fill(false);
  task: NextTask | null = null;
  state: State = "loading";

  private chain: Promise<void> = Promise.resolve();
  private els: Record<string, HTMLElement> = {};
  private keyListener: (e: KeyboardEvent) => void;

  constructor(private root: HTMLElement, private api: ApiClient) {
    this.buildDom();
    this.keyListener = (e) => this.handleKey(e.key);
    root.ownerDocument.addEventListener("keydown", this.keyListener);
  }

  /** Resolves when all queued requests have settled. */
  idle(): Promise<void> {
    return this.chain;
  }

  start(): Promise<void> {
    return this.enqueue(async () => {
      await this.refreshProgress();
      await this.loadNext();
    });
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyListener);
  }

  handleKey(key: string): void {
    if (this.state !== "annotating" || !this.task) return;
    if (key >= "1" && key <= "8") {
      const idx = Number(key) - 1;
      this.draft[idx] = !this.draft[idx];
      this.renderToggles();
    } else if (key === "0") {
      this.draft.fill(false);
      this.renderToggles();
      this.enqueue(() => this.submit());
    } else if (key === "Enter") {
      this.enqueue(() => this.submit());
    }
  }

  retry(): void {
    this.enqueue(async () => {
      await this.refreshProgress();
      await this.loadNext();
    });
  }

  openReview(filter: ReviewFilter): void {
    this.enqueue(async () => {
      let records: AnnotationRecord[];
      try {
        records = await this.api.currentAnnotations();
      } catch (e) {
        this.showError(String(e));
        return;
      }
      this.state = "review";
      this.renderReview(records.filter((r) => matchesFilter(r, filter)));
    });
  }

  /** Re-open a stored record for re-annotation (service bumps the revision). */
  reannotate(record: AnnotationRecord): void {
    this.task = { image_id: record.image_id, image_url: `/api/images/${record.image_id}` };
    this.draft = [...record.flags];
    this.state = "annotating";
    this.renderTask();
  }

  private enqueue(work: () => Promise<void>): Promise<void> {
    this.chain = this.chain.then(work, work);
    return this.chain;
  }

  private async loadNext(): Promise<void> {
    this.state = "loading";
    let task: NextTask | null;
    try {
      task = await this.api.nextTask();
    } catch (e) {
      this.showError(String(e));
      return;
    }
    if (task === null) {
      this.task = null;
      this.state = "complete";
      this.renderComplete();
      return;
    }
    this.task = task;
    this.draft = new Array(N_CATEGORIES).fill(false); // draft resets per task
    this.state = "annotating";
    this.renderTask();
  }

  private async submit(): Promise<void> {
    if (!this.task) return;
    try {
      await this.api.submit(this.task.image_id, [...this.draft]);
    } catch (e) {
      // draft preserved so the annotator can correct and resubmit
      this.showInlineError(String(e));
      return;
    }
    await this.refreshProgress();
    await this.loadNext();
  }

  private async refreshProgress(): Promise<void> {
    try {
      const p = await this.api.progress();
      this.els.progress.textContent = `${p.done} / ${p.total} annotated`;
      const bar = this.els.progressBar as HTMLProgressElement;
      bar.max = p.total;
      bar.value = p.done;
    } catch {
      // progress is advisory; the annotate flow keeps going
    }
  }

  private buildDom(): void {
    this.root.innerHTML = `
      <header>
        <span id="progress-text"></span>
        <progress id="progress-bar" max="1" value="0"></progress>
        <button id="review-button" type="button">review</button>
      </header>
      <div id="error-banner" hidden>
        <span id="error-text"></span>
        <button id="retry-button" type="button">retry</button>
      </div>
      <main id="stage"></main>
    `;
    this.els.progress = this.must("#progress-text");
    this.els.progressBar = this.must("#progress-bar");
    this.els.banner = this.must("#error-banner");
    this.els.errorText = this.must("#error-text");
    this.els.stage = this.must("#stage");
    this.must("#retry-button").addEventListener("click", () => this.retry());
    this.must("#review-button").addEventListener("click", () => this.openReview("any"));
  }

  private renderTask(): void {
    if (!this.task) return;
    this.els.banner.hidden = true;
    const toggles = CATEGORY_NAMES.map(
      (name, i) => `
        <label class="toggle">
          <input type="checkbox" data-index="${i}" />
          <kbd>${i + 1}</kbd> ${name.replace(/_/g, " ")}
        </label>`
    ).join("");
    this.els.stage.innerHTML = `
      <figure>
        <img id="task-image" src="${this.task.image_url}" alt="${this.task.image_id}" />
        <figcaption>${this.task.image_id}</figcaption>
      </figure>
      <form id="flag-form">${toggles}</form>
      <p class="hint"><kbd>1</kbd>-<kbd>8</kbd> toggle, <kbd>0</kbd> clean + submit, <kbd>Enter</kbd> submit</p>
      <p id="inline-error" hidden></p>
    `;
    this.els.stage.querySelectorAll<HTMLInputElement>("input[data-index]").forEach((box) => {
      box.addEventListener("change", () => {
        this.draft[Number(box.dataset.index)] = box.checked;
      });
    });
    this.renderToggles();
  }

  private renderToggles(): void {
    this.els.stage.querySelectorAll<HTMLInputElement>("input[data-index]").forEach((box) => {
      box.checked = this.draft[Number(box.dataset.index)];
    });
  }

  private renderComplete(): void {
    this.els.banner.hidden = true;
    this.els.stage.innerHTML = `<p id="complete">All images annotated. Nothing left in the queue.</p>`;
  }

  private renderReview(records: AnnotationRecord[]): void {
    this.els.banner.hidden = true;
    if (records.length === 0) {
      this.els.stage.innerHTML = `<p id="review-empty">No stored labels match this filter.</p>`;
      return;
    }
    this.els.stage.innerHTML = `<div id="gallery"></div>`;
    const gallery = this.must("#gallery");
    for (const record of records) {
      const img = this.root.ownerDocument.createElement("img");
      img.className = "thumb";
      img.src = `/api/images/${record.image_id}`;
      img.alt = record.image_id;
      img.addEventListener("click", () => this.reannotate(record));
      gallery.appendChild(img);
    }
  }

  private showError(message: string): void {
    this.state = "error";
    this.els.banner.hidden = false;
    this.els.errorText.textContent = message;
  }

  private showInlineError(message: string): void {
    const el = this.els.stage.querySelector<HTMLElement>("#inline-error");
    if (el) {
      el.hidden = false;
      el.textContent = message;
    }
  }

  private must(selector: string): HTMLElement {
    const el = this.root.querySelector<HTMLElement>(selector);
    if (!el) throw new Error(`missing element ${selector}`);
    return el;
  }
}

export function createApp(root: HTMLElement, api = new ApiClient()): AnnotationApp {
  return new AnnotationApp(root, api);
}
