/**
 * Client-side annotation state: the last server payload plus unsaved
 * local edits. All transitions are pure functions so they can be tested
 * without a DOM; rendering reads the state, never mutates it.
 */
import type { Category, DocPayload, SaveBody, SpanJson } from "./types.js";

export interface UiSpan extends SpanJson {
  /** true until the next successful save for spans added locally */
  local?: boolean;
}

export interface UiAnnotationState {
  docId: string;
  text: string;
  tokens: [number, number][];
  spans: UiSpan[];
  revision: number;
  status: string;
  dirty: boolean;
  annotator: string;
}

export function fromPayload(
  payload: DocPayload,
  annotator: string,
): UiAnnotationState {
  return {
    docId: payload.doc_id,
    text: payload.text,
    tokens: payload.tokens,
    spans: payload.spans.map((s) => ({ ...s })),
    revision: payload.revision,
    status: payload.status,
    dirty: false,
    annotator,
  };
}

/**
 * Snap a raw character selection to token boundaries using the
 * server-provided token offsets: the result covers every token the
 * selection touches. Returns null for selections touching no token
 * (including zero-length ones).
 */
export function snapToTokens(
  tokens: [number, number][],
  start: number,
  end: number,
): [number, number] | null {
  if (end <= start) return null;
  let lo = Number.POSITIVE_INFINITY;
  let hi = Number.NEGATIVE_INFINITY;
  for (const [ts, te] of tokens) {
    if (ts < end && te > start) {
      lo = Math.min(lo, ts);
      hi = Math.max(hi, te);
    }
  }
  return Number.isFinite(lo) ? [lo, hi] : null;
}

export function overlapsExisting(
  spans: UiSpan[],
  start: number,
  end: number,
): boolean {
  return spans.some((s) => s.start < end && s.end > start);
}

export type AddResult =
  | { ok: true; state: UiAnnotationState; span: UiSpan }
  | { ok: false; reason: "empty-selection" | "overlap" };

/** Add a span for a raw selection; snapping happens here. */
export function addSpan(
  state: UiAnnotationState,
  start: number,
  end: number,
  category: Category,
): AddResult {
  const snapped = snapToTokens(state.tokens, start, end);
  if (!snapped) return { ok: false, reason: "empty-selection" };
  const [s, e] = snapped;
  if (overlapsExisting(state.spans, s, e)) {
    return { ok: false, reason: "overlap" };
  }
  const span: UiSpan = {
    start: s,
    end: e,
    category,
    source: "human",
    local: true,
  };
  const spans = [...state.spans, span].sort((a, b) => a.start - b.start);
  return { ok: true, state: { ...state, spans, dirty: true }, span };
}

export function deleteSpan(
  state: UiAnnotationState,
  start: number,
  end: number,
): UiAnnotationState {
  const spans = state.spans.filter((s) => s.start !== start || s.end !== end);
  if (spans.length === state.spans.length) return state;
  return { ...state, spans, dirty: true };
}

export function setSpanCategory(
  state: UiAnnotationState,
  start: number,
  end: number,
  category: Category,
): UiAnnotationState {
  const spans = state.spans.map((s) =>
    s.start === start && s.end === end
      ? { ...s, category, source: "human" as const }
      : s,
  );
  return { ...state, spans, dirty: true };
}

/** Accept one machine span: it becomes a human annotation. */
export function acceptSpan(
  state: UiAnnotationState,
  start: number,
  end: number,
): UiAnnotationState {
  const spans = state.spans.map((s) =>
    s.start === start && s.end === end && s.source === "machine"
      ? { ...s, source: "human" as const }
      : s,
  );
  return { ...state, spans, dirty: true };
}

/** Accept every machine pre-tag at once. */
export function acceptAllMachineSpans(
  state: UiAnnotationState,
): UiAnnotationState {
  if (!state.spans.some((s) => s.source === "machine")) return state;
  return {
    ...state,
    spans: state.spans.map((s) =>
      s.source === "machine" ? { ...s, source: "human" } : s,
    ),
    dirty: true,
  };
}

export function mergePretags(
  state: UiAnnotationState,
  pretags: SpanJson[],
  revision: number,
): UiAnnotationState {
  return {
    ...state,
    spans: pretags.map((s) => ({ ...s })),
    revision,
    dirty: false,
  };
}

/** The PUT body for the current state. */
export function savePayload(
  state: UiAnnotationState,
  confirm = false,
): SaveBody {
  return {
    revision: state.revision,
    annotator: state.annotator,
    status: confirm ? "confirmed" : "in_progress",
    spans: state.spans.map(({ start, end, category, source }) => ({
      start,
      end,
      category,
      source,
    })),
  };
}

/** A successful save clears the dirty flag and adopts the new revision. */
export function afterSave(
  state: UiAnnotationState,
  revision: number,
  confirmed: boolean,
): UiAnnotationState {
  return {
    ...state,
    revision,
    dirty: false,
    status: confirmed ? "confirmed" : "in_progress",
    spans: state.spans.map((s) => ({ ...s, local: false })),
  };
}
