/**
 * End-to-end tests against the real annotation service, spawned as a
 * child process. The UI layer talks to it exclusively through the HTTP
 * API, exactly as the browser build does.
 */
import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, mkdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api, ApiError } from "../src/api.js";
import {
  acceptAllMachineSpans,
  addSpan,
  afterSave,
  fromPayload,
  mergePretags,
  savePayload,
} from "../src/state.js";

const DOC_TEXT = "Patient: Amelia Huxley MRN: 123456\nPh: 9123 4567";

const EXPECTED_BIO =
  "# doc_id = d1\n" +
  "Patient\tO\n:\tO\n" +
  "Amelia\tB-PERSON\nHuxley\tI-PERSON\n" +
  "MRN\tO\n:\tO\n123456\tB-IDN\n" +
  "\n" +
  "Ph\tO\n:\tO\n9123\tB-PHONE\n4567\tI-PHONE\n";

const port = 20000 + Math.floor(Math.random() * 20000);
const base = `http://127.0.0.1:${port}`;
let server: ChildProcess;
const api = new Api(base);

async function waitForServer(timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const response = await fetch(`${base}/api/docs`);
      if (response.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error("service did not start");
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

beforeAll(async () => {
  const work = mkdtempSync(join(tmpdir(), "deidkit-ui-"));
  const corpusDir = join(work, "corpus");
  mkdirSync(corpusDir);
  writeFileSync(
    join(corpusDir, "corpus.jsonl"),
    JSON.stringify({ doc_id: "d1", text: DOC_TEXT }) + "\n",
  );
  const modelsDir = join(work, "models");
  mkdirSync(modelsDir);
  writeFileSync(
    join(modelsDir, "pattern.model.json"),
    JSON.stringify({
      format_version: 1,
      tagger_id: "pattern",
      kind: "pattern",
      training_mode: "n/a",
      dev_scores: [1, 1, 1],
      parameters: {},
    }),
  );
  writeFileSync(
    join(modelsDir, "e1.ensemble.json"),
    JSON.stringify({
      format_version: 1,
      ensemble_id: "e1",
      method: "majority_vote",
      group: { selector: "all", members: ["pattern"] },
      ranking: ["pattern"],
      members: [{ tagger_id: "pattern", file: "pattern.model.json" }],
      stacker: null,
    }),
  );
  server = spawn(
    "python3",
    ["-m", "deidkit.cli", "serve",
      "--host", "127.0.0.1", "--port", String(port),
      "--annotations", join(work, "annotations.jsonl"),
      "--corpus", corpusDir,
      "--models", modelsDir],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 40000);

afterAll(() => {
  server?.kill();
});

describe("annotate, save, export", () => {
  it("produces a BIO export byte-identical to the fixture", async () => {
    const payload = await api.getDoc("d1", "a1");
    let state = fromPayload(payload, "a1");
    expect(state.text).toBe(DOC_TEXT);

    // raw, sloppy selections: snapping must align them to tokens
    for (const [s, e, cat] of [
      [11, 19, "PERSON"],
      [29, 33, "IDN"],
      [40, 47, "PHONE"],
    ] as const) {
      const result = addSpan(state, s, e, cat);
      expect(result.ok).toBe(true);
      if (result.ok) state = result.state;
    }
    expect(state.spans.map((s) => [s.start, s.end])).toEqual([
      [9, 22], [28, 34], [39, 48],
    ]);

    const saved = await api.saveSpans("d1", savePayload(state, true));
    state = afterSave(state, saved.revision, true);
    expect(state.revision).toBe(1);
    expect(state.dirty).toBe(false);

    const bio = await api.exportBio();
    expect(bio).toBe(EXPECTED_BIO);
  });

  it("lists the document with its saved span count", async () => {
    const docs = await api.listDocs("a1");
    expect(docs).toHaveLength(1);
    expect(docs[0]).toMatchObject({
      doc_id: "d1",
      status: "confirmed",
      span_count: 3,
    });
  });
});

describe("conflicting saves (two tabs)", () => {
  it("second save on a stale revision surfaces 409", async () => {
    const tabA = fromPayload(await api.getDoc("d1", "tab"), "tab");
    const tabB = fromPayload(await api.getDoc("d1", "tab"), "tab");

    const first = await api.saveSpans("d1", savePayload(tabA));
    expect(first.revision).toBe(1);

    let conflict: ApiError | null = null;
    try {
      await api.saveSpans("d1", savePayload(tabB));
    } catch (err) {
      if (err instanceof ApiError) conflict = err;
    }
    expect(conflict?.status).toBe(409);

    // reload-and-merge: the fresh payload carries the winning revision
    const reloaded = fromPayload(await api.getDoc("d1", "tab"), "tab");
    expect(reloaded.revision).toBe(1);
    const retry = await api.saveSpans("d1", savePayload(reloaded));
    expect(retry.revision).toBe(2);
  });
});

describe("machine pre-tag review", () => {
  it("pretag, accept-all, confirm turns machine spans human", async () => {
    const payload = await api.getDoc("d1", "reviewer");
    let state = fromPayload(payload, "reviewer");

    const response = await api.pretag("d1", "e1", "reviewer");
    state = mergePretags(state, response.spans, response.revision);
    // the pattern model finds the cued IDN and PHONE mentions
    expect(state.spans.map((s) => [s.start, s.end, s.category])).toEqual([
      [28, 34, "IDN"],
      [39, 48, "PHONE"],
    ]);
    expect(state.spans.every((s) => s.source === "machine")).toBe(true);

    state = acceptAllMachineSpans(state);
    expect(state.spans.every((s) => s.source === "human")).toBe(true);

    const saved = await api.saveSpans("d1", savePayload(state, true));
    state = afterSave(state, saved.revision, true);

    const after = await api.getDoc("d1", "reviewer");
    expect(after.status).toBe("confirmed");
    expect(after.spans.every((s) => s.source === "human")).toBe(true);
  });

  it("unknown ensemble id surfaces 404", async () => {
    let failure: ApiError | null = null;
    try {
      await api.pretag("d1", "ghost", "reviewer");
    } catch (err) {
      if (err instanceof ApiError) failure = err;
    }
    expect(failure?.status).toBe(404);
  });
});
