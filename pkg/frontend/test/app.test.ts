import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient, N_CATEGORIES, NextTask, AnnotationRecord } from "../src/api.js";
import { AnnotationApp, createApp } from "../src/app.js";
import { matchesFilter } from "../src/review.js";

interface PostedBody {
  image_id: string;
  flags: boolean[];
  annotator: string;
}

/** In-memory stand-in for the annotation service. */
function fakeService(queue: string[], options: { down?: boolean } = {}) {
  const posts: PostedBody[] = [];
  const pending = [...queue];
  let done = 0;
  const total = queue.length;

  const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });

  const fetchFn: typeof fetch = async (input, init) => {
    if (options.down) throw new TypeError("fetch failed");
    const url = String(input);
    if (url.endsWith("/api/tasks/next")) {
      if (pending.length === 0) return new Response(null, { status: 204 });
      const image_id = pending[0];
      const task: NextTask = { image_id, image_url: `/api/images/${image_id}` };
      return json(task);
    }
    if (url.endsWith("/api/annotations") && init?.method === "POST") {
      const body = JSON.parse(String(init.body)) as PostedBody;
      posts.push(body);
      const idx = pending.indexOf(body.image_id);
      if (idx >= 0) {
        pending.splice(idx, 1);
        done += 1;
      }
      return json({ ...body, revision: 1, timestamp: "t" }, 201);
    }
    if (url.endsWith("/api/progress")) return json({ done, total });
    if (url.endsWith("/api/annotations/current")) return json([]);
    return new Response("not found", { status: 404 });
  };

  return { fetchFn, posts };
}

/** The submitted payload must satisfy the service's POST schema. */
function expectValidPayload(body: PostedBody) {
  expect(typeof body.image_id).toBe("string");
  expect(body.image_id.length).toBeGreaterThan(0);
  expect(Array.isArray(body.flags)).toBe(true);
  expect(body.flags).toHaveLength(N_CATEGORIES);
  for (const flag of body.flags) expect(typeof flag).toBe("boolean");
  expect(typeof body.annotator).toBe("string");
}

function press(key: string) {
  document.dispatchEvent(new KeyboardEvent("keydown", { key }));
}

async function startApp(queue: string[], options: { down?: boolean } = {}) {
  const service = fakeService(queue, options);
  const root = document.createElement("div");
  document.body.appendChild(root);
  const app = createApp(root, new ApiClient(service.fetchFn));
  await app.start();
  return { app, root, service };
}

let apps: AnnotationApp[] = [];

beforeEach(() => {
  for (const app of apps) app.destroy();
  apps = [];
  document.body.innerHTML = "";
});

describe("key sequences produce schema-valid submissions", () => {
  it("1 then Enter posts with only the first flag set", async () => {
    const { app, service } = await startApp(["img-a"]);
    apps.push(app);
    press("1");
    press("Enter");
    await app.idle();
    expect(service.posts).toHaveLength(1);
    expectValidPayload(service.posts[0]);
    expect(service.posts[0].image_id).toBe("img-a");
    expect(service.posts[0].flags).toEqual([true, false, false, false, false, false, false, false]);
  });

  it("0 clears the draft and submits all-false", async () => {
    const { app, service } = await startApp(["img-a"]);
    apps.push(app);
    press("2");
    press("5");
    press("0");
    await app.idle();
    expect(service.posts).toHaveLength(1);
    expectValidPayload(service.posts[0]);
    expect(service.posts[0].flags).toEqual(new Array(N_CATEGORIES).fill(false));
  });

  it("3 pressed twice toggles the third flag off again", async () => {
    const { app, service } = await startApp(["img-a"]);
    apps.push(app);
    press("3");
    expect(app.draft[2]).toBe(true);
    press("3");
    expect(app.draft[2]).toBe(false);
    press("Enter");
    await app.idle();
    expectValidPayload(service.posts[0]);
    expect(service.posts[0].flags).toEqual(new Array(N_CATEGORIES).fill(false));
  });
});

describe("session flow", () => {
  it("a 2-task queue drives load, submit, load, submit, complete", async () => {
    const { app, root, service } = await startApp(["img-a", "img-b"]);
    apps.push(app);
    expect(app.task?.image_id).toBe("img-a");

    press("1");
    press("Enter");
    await app.idle();
    expect(app.task?.image_id).toBe("img-b");
    expect(app.draft).toEqual(new Array(N_CATEGORIES).fill(false)); // fresh draft

    press("0");
    await app.idle();
    expect(service.posts.map((p) => p.image_id)).toEqual(["img-a", "img-b"]);
    for (const post of service.posts) expectValidPayload(post);
    expect(app.state).toBe("complete");
    expect(root.querySelector("#complete")).not.toBeNull();
  });

  it("keys after completion post nothing", async () => {
    const { app, service } = await startApp([]);
    apps.push(app);
    expect(app.state).toBe("complete");
    press("1");
    press("Enter");
    await app.idle();
    expect(service.posts).toHaveLength(0);
  });

  it("a down service shows the retry banner instead of crashing", async () => {
    const { app, root } = await startApp(["img-a"], { down: true });
    apps.push(app);
    expect(app.state).toBe("error");
    const banner = root.querySelector<HTMLElement>("#error-banner");
    expect(banner?.hidden).toBe(false);
    expect(root.querySelector("#retry-button")).not.toBeNull();
  });

  it("progress reflects the service counts", async () => {
    const { app, root } = await startApp(["img-a", "img-b"]);
    apps.push(app);
    press("0");
    await app.idle();
    expect(root.querySelector("#progress-text")?.textContent).toBe("1 / 2 annotated");
  });
});

describe("review filtering", () => {
  const record = (id: string, flagIdx: number | null): AnnotationRecord => ({
    image_id: id,
    flags: new Array(N_CATEGORIES).fill(false).map((_, i) => i === flagIdx),
    annotator: "a",
    revision: 1,
  });

  it("matches per-category and any filters", () => {
    const narrator = record("x", 0);
    const clean = record("y", null);
    expect(matchesFilter(narrator, "narrator")).toBe(true);
    expect(matchesFilter(narrator, "text_logo")).toBe(false);
    expect(matchesFilter(narrator, "any")).toBe(true);
    expect(matchesFilter(clean, "any")).toBe(false);
  });

  it("re-annotating a record preloads its flags", async () => {
    const { app, service } = await startApp([]);
    apps.push(app);
    app.reannotate(record("img-z", 3));
    expect(app.state).toBe("annotating");
    expect(app.draft[3]).toBe(true);
    press("Enter");
    await app.idle();
    expect(service.posts[0].image_id).toBe("img-z");
    expect(service.posts[0].flags[3]).toBe(true);
    expectValidPayload(service.posts[0]);
  });
});
