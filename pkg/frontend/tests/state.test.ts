import { describe, expect, it } from "vitest";

import {
  acceptAllMachineSpans,
  acceptSpan,
  addSpan,
  afterSave,
  deleteSpan,
  fromPayload,
  mergePretags,
  overlapsExisting,
  savePayload,
  snapToTokens,
  UiAnnotationState,
} from "../src/state.js";
import type { DocPayload } from "../src/types.js";

// "Patient: Amelia Huxley MRN: 123456"
const TOKENS: [number, number][] = [
  [0, 7], [7, 8], [9, 15], [16, 22], [23, 26], [26, 27], [28, 34],
];

const PAYLOAD: DocPayload = {
  schema_version: 1,
  doc_id: "d1",
  text: "Patient: Amelia Huxley MRN: 123456",
  revision: 0,
  status: "in_progress",
  spans: [],
  tokens: TOKENS,
  categories: ["PERSON", "ADDRESS", "DOB", "IDN", "PHONE"],
};

function fresh(): UiAnnotationState {
  return fromPayload(PAYLOAD, "a1");
}

describe("snapToTokens", () => {
  it("snaps a mid-token selection out to the covering tokens", () => {
    // selection "melia Hux" -> tokens "Amelia" + "Huxley"
    expect(snapToTokens(TOKENS, 10, 19)).toEqual([9, 22]);
  });

  it("keeps an exactly aligned selection", () => {
    expect(snapToTokens(TOKENS, 9, 22)).toEqual([9, 22]);
  });

  it("returns null for zero-length selections", () => {
    expect(snapToTokens(TOKENS, 5, 5)).toBeNull();
  });

  it("returns null for whitespace-only selections", () => {
    expect(snapToTokens(TOKENS, 8, 9)).toBeNull();
  });
});

describe("addSpan", () => {
  it("adds a snapped human span and sets the dirty flag", () => {
    const result = addSpan(fresh(), 10, 19, "PERSON");
    expect(result.ok).toBe(true);
    if (!result.ok) return;
    expect(result.span).toMatchObject({
      start: 9,
      end: 22,
      category: "PERSON",
      source: "human",
    });
    expect(result.state.dirty).toBe(true);
  });

  it("rejects selections overlapping an existing span", () => {
    const first = addSpan(fresh(), 9, 22, "PERSON");
    if (!first.ok) throw new Error("setup failed");
    const second = addSpan(first.state, 16, 30, "IDN");
    expect(second).toEqual({ ok: false, reason: "overlap" });
  });

  it("treats zero-length selections as a no-op", () => {
    const result = addSpan(fresh(), 12, 12, "PERSON");
    expect(result).toEqual({ ok: false, reason: "empty-selection" });
  });

  it("keeps spans sorted by start offset", () => {
    const a = addSpan(fresh(), 28, 34, "IDN");
    if (!a.ok) throw new Error("setup failed");
    const b = addSpan(a.state, 9, 22, "PERSON");
    if (!b.ok) throw new Error("setup failed");
    expect(b.state.spans.map((s) => s.start)).toEqual([9, 28]);
  });
});

describe("editing", () => {
  it("deleteSpan removes exactly the clicked span", () => {
    const a = addSpan(fresh(), 9, 22, "PERSON");
    if (!a.ok) throw new Error("setup failed");
    const after = deleteSpan(a.state, 9, 22);
    expect(after.spans).toHaveLength(0);
    expect(after.dirty).toBe(true);
  });

  it("overlapsExisting sees touching ranges as disjoint", () => {
    const spans = [{ start: 9, end: 22, category: "PERSON", source: "human" }] as const;
    expect(overlapsExisting([...spans], 22, 34)).toBe(false);
    expect(overlapsExisting([...spans], 21, 34)).toBe(true);
  });
});

describe("machine pre-tag review", () => {
  const pretags = [
    { start: 9, end: 22, category: "PERSON", source: "machine" },
    { start: 28, end: 34, category: "IDN", source: "machine" },
  ] as const;

  function withPretags(): UiAnnotationState {
    return mergePretags(fresh(), [...pretags], 1);
  }

  it("mergePretags adopts the server revision and clears dirty", () => {
    const state = withPretags();
    expect(state.revision).toBe(1);
    expect(state.dirty).toBe(false);
    expect(state.spans.every((s) => s.source === "machine")).toBe(true);
  });

  it("accept-all converts every machine span to human", () => {
    const state = acceptAllMachineSpans(withPretags());
    expect(state.spans.every((s) => s.source === "human")).toBe(true);
    expect(state.dirty).toBe(true);
  });

  it("accepting a single span leaves the rest machine-sourced", () => {
    const state = acceptSpan(withPretags(), 9, 22);
    expect(state.spans.map((s) => s.source)).toEqual(["human", "machine"]);
  });

  it("deleting a machine span removes it from the save payload", () => {
    const state = deleteSpan(withPretags(), 9, 22);
    const body = savePayload(state);
    expect(body.spans).toEqual([
      { start: 28, end: 34, category: "IDN", source: "machine" },
    ]);
  });
});

describe("save cycle", () => {
  it("savePayload carries revision, annotator, and span fields only", () => {
    const a = addSpan(fresh(), 9, 22, "PERSON");
    if (!a.ok) throw new Error("setup failed");
    expect(savePayload(a.state)).toEqual({
      revision: 0,
      annotator: "a1",
      status: "in_progress",
      spans: [{ start: 9, end: 22, category: "PERSON", source: "human" }],
    });
  });

  it("confirming marks the payload confirmed", () => {
    expect(savePayload(fresh(), true).status).toBe("confirmed");
  });

  it("afterSave clears the dirty flag and bumps the revision", () => {
    const a = addSpan(fresh(), 9, 22, "PERSON");
    if (!a.ok) throw new Error("setup failed");
    const saved = afterSave(a.state, 1, false);
    expect(saved.dirty).toBe(false);
    expect(saved.revision).toBe(1);
    expect(saved.spans[0].local).toBe(false);
  });
});
