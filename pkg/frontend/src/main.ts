/**
 * App wiring: document list, selection-driven tagging with keyboard
 * shortcuts (1-5 per category), machine pre-tag review, optimistic
 * saves with reload-and-merge on conflict, and BIO export.
 */
import { Api, ApiError } from "./api.js";
import { CATEGORIES, CATEGORY_COLORS, categoryForKey } from "./colors.js";
import { renderDocument, selectionOffsets } from "./render.js";
import {
  UiAnnotationState,
  UiSpan,
  acceptAllMachineSpans,
  addSpan,
  afterSave,
  deleteSpan,
  fromPayload,
  mergePretags,
  savePayload,
} from "./state.js";
import type { Category } from "./types.js";

const api = new Api();
const annotator =
  new URLSearchParams(window.location.search).get("annotator") ?? "default";

let state: UiAnnotationState | null = null;
let pendingSelection: [number, number] | null = null;

const docList = el("#doc-list");
const textPane = el("#text-pane");
const statusBar = el("#status-bar");
const toolbar = el("#toolbar");

function el(selector: string): HTMLElement {
  const found = document.querySelector<HTMLElement>(selector);
  if (!found) throw new Error(`missing element ${selector}`);
  return found;
}

function setStatus(message: string, kind: "info" | "error" = "info"): void {
  statusBar.textContent = message;
  statusBar.className = kind;
}

function redraw(): void {
  if (!state) return;
  renderDocument(textPane, state.text, state.spans, {
    onSpanClick: onSpanClick,
  });
  const dirty = state.dirty ? " (unsaved changes)" : "";
  setStatus(
    `${state.docId} - revision ${state.revision} - ${state.status}` +
      ` - ${state.spans.length} spans${dirty}`,
  );
}

function onSpanClick(span: UiSpan, event: MouseEvent): void {
  if (!state) return;
  event.preventDefault();
  if (event.altKey || event.metaKey || confirmDelete(span)) {
    state = deleteSpan(state, span.start, span.end);
    redraw();
  }
}

function confirmDelete(span: UiSpan): boolean {
  return window.confirm(
    `Delete ${span.category} span "${state?.text.slice(span.start, span.end)}"?`,
  );
}

function applyCategory(category: Category): void {
  if (!state || !pendingSelection) {
    setStatus("select text first, then pick a category", "error");
    return;
  }
  const [start, end] = pendingSelection;
  const result = addSpan(state, start, end, category);
  if (!result.ok) {
    setStatus(
      result.reason === "overlap"
        ? "selection overlaps an existing span"
        : "selection covers no tokens",
      "error",
    );
    return;
  }
  state = result.state;
  pendingSelection = null;
  window.getSelection()?.removeAllRanges();
  redraw();
}

async function save(confirm: boolean): Promise<void> {
  if (!state) return;
  try {
    const response = await api.saveSpans(state.docId, savePayload(state, confirm));
    state = afterSave(state, response.revision, confirm);
    redraw();
    setStatus(`saved revision ${response.revision}` +
      (confirm ? " (confirmed)" : ""));
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // optimistic-lock conflict: reload the server copy, keep nothing
      setStatus("save conflict: another save landed first; reloading",
        "error");
      if (window.confirm(
        "This document changed on the server. Reload the latest version? " +
        "Your unsaved edits will be lost.")) {
        await loadDoc(state.docId);
      }
      return;
    }
    setStatus(String(err), "error");
  }
}

async function pretag(): Promise<void> {
  if (!state) return;
  const ensembleId = (el("#ensemble-id") as HTMLInputElement).value.trim();
  if (!ensembleId) {
    setStatus("enter an ensemble id to pre-tag", "error");
    return;
  }
  try {
    const response = await api.pretag(state.docId, ensembleId, annotator);
    state = mergePretags(state, response.spans, response.revision);
    redraw();
    setStatus(
      `${response.spans.length} machine spans loaded; review, then accept`,
    );
  } catch (err) {
    setStatus(String(err), "error");
  }
}

async function loadDoc(docId: string): Promise<void> {
  const payload = await api.getDoc(docId, annotator);
  state = fromPayload(payload, annotator);
  pendingSelection = null;
  redraw();
}

async function refreshList(): Promise<void> {
  const docs = await api.listDocs(annotator);
  docList.textContent = "";
  for (const doc of docs) {
    const item = document.createElement("li");
    item.textContent =
      `${doc.doc_id} (${doc.span_count} spans, r${doc.revision}` +
      `${doc.status === "confirmed" ? ", confirmed" : ""})`;
    item.addEventListener("click", () => void loadDoc(doc.doc_id));
    docList.appendChild(item);
  }
}

function buildToolbar(): void {
  CATEGORIES.forEach((category, i) => {
    const button = document.createElement("button");
    button.textContent = `${i + 1} ${category}`;
    button.style.backgroundColor = CATEGORY_COLORS[category];
    button.addEventListener("click", () => applyCategory(category));
    toolbar.insertBefore(button, el("#save"));
  });
}

textPane.addEventListener("mouseup", () => {
  pendingSelection = selectionOffsets(textPane);
});

document.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement) return;
  const category = categoryForKey(event.key);
  if (category) applyCategory(category);
  if (event.key === "s" && (event.ctrlKey || event.metaKey)) {
    event.preventDefault();
    void save(false);
  }
});

el("#save").addEventListener("click", () => void save(false));
el("#confirm").addEventListener("click", () => void save(true));
el("#pretag").addEventListener("click", () => void pretag());
el("#accept-all").addEventListener("click", () => {
  if (!state) return;
  state = acceptAllMachineSpans(state);
  redraw();
});
el("#export").addEventListener("click", () => {
  window.open("/api/export/bio", "_blank");
});

buildToolbar();
void refreshList().catch((err) => setStatus(String(err), "error"));
