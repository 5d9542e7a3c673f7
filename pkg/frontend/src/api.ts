/** Thin typed client over the annotation service REST API. */

export const N_CATEGORIES = 8;

/** Category display order matches the flag vector the service expects. */
export const CATEGORY_NAMES = [
  "narrator",
  "desktop_chrome",
  "text_logo",
  "arrow_annotation",
  "low_quality",
  "slide_overview",
  "control_elements",
  "multi_panel",
] as const;

export interface NextTask {
  image_id: string;
  image_url: string;
}

export interface Progress {
  done: number;
  total: number;
}

export interface AnnotationRecord {
  image_id: string;
  flags: boolean[];
  annotator: string;
  revision: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  private fetchFn: typeof fetch;

  constructor(fetchFn?: typeof fetch) {
    this.fetchFn = fetchFn ?? fetch.bind(globalThis);
  }

  /** null means the queue is drained (204). */
  async nextTask(): Promise<NextTask | null> {
    const res = await this.fetchFn("/api/tasks/next");
    if (res.status === 204) return null;
    if (!res.ok) throw new ApiError(res.status, `next task failed: ${res.status}`);
    return (await res.json()) as NextTask;
  }

  async submit(imageId: string, flags: boolean[], annotator = "browser"): Promise<AnnotationRecord> {
    if (flags.length !== N_CATEGORIES) {
      throw new Error(`flags must have length ${N_CATEGORIES}, got ${flags.length}`);
    }
    const res = await this.fetchFn("/api/annotations", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ image_id: imageId, flags, annotator }),
    });
    if (!res.ok) throw new ApiError(res.status, `submit failed: ${res.status}`);
    return (await res.json()) as AnnotationRecord;
  }

  async progress(): Promise<Progress> {
    const res = await this.fetchFn("/api/progress");
    if (!res.ok) throw new ApiError(res.status, `progress failed: ${res.status}`);
    return (await res.json()) as Progress;
  }

  async currentAnnotations(): Promise<AnnotationRecord[]> {
    const res = await this.fetchFn("/api/annotations/current");
    if (!res.ok) throw new ApiError(res.status, `annotations failed: ${res.status}`);
    return (await res.json()) as AnnotationRecord[];
  }
}
