/**
 * Text rendering with highlighted spans. The document is laid out line
 * by line; each piece of text sits in a .seg element carrying its
 * global start offset, so DOM selections map back to character offsets
 * exactly. The document text itself is never mutated.
 */
import { CATEGORY_COLORS } from "./colors.js";
import type { UiSpan } from "./state.js";

export interface RenderHandlers {
  onSpanClick(span: UiSpan, event: MouseEvent): void;
}

export function renderDocument(
  container: HTMLElement,
  text: string,
  spans: UiSpan[],
  handlers: RenderHandlers,
): void {
  container.textContent = "";
  const ordered = [...spans].sort((a, b) => a.start - b.start);
  const lines = text.split("\n");
  let offset = 0;
  for (const line of lines) {
    const lineEl = document.createElement("div");
    lineEl.className = "line";
    const lineStart = offset;
    const lineEnd = offset + line.length;
    let pos = lineStart;
    for (const span of ordered) {
      if (span.end <= lineStart || span.start >= lineEnd) continue;
      if (span.start > pos) {
        lineEl.appendChild(plainSeg(text.slice(pos, span.start), pos));
      }
      lineEl.appendChild(spanSeg(text, span, handlers));
      pos = span.end;
    }
    if (pos < lineEnd) {
      lineEl.appendChild(plainSeg(text.slice(pos, lineEnd), pos));
    }
    if (lineEl.childNodes.length === 0) {
      lineEl.appendChild(document.createElement("br"));
    }
    container.appendChild(lineEl);
    offset = lineEnd + 1;
  }
}

function plainSeg(content: string, start: number): HTMLElement {
  const el = document.createElement("span");
  el.className = "seg";
  el.dataset.start = String(start);
  el.textContent = content;
  return el;
}

function spanSeg(
  text: string,
  span: UiSpan,
  handlers: RenderHandlers,
): HTMLElement {
  const el = document.createElement("span");
  el.className = `seg pii ${span.source}`;
  el.dataset.start = String(span.start);
  // the category label renders via CSS ::after so the DOM text stays
  // exactly equal to the document text and selection offsets hold
  el.dataset.cat = span.category;
  el.style.backgroundColor = CATEGORY_COLORS[span.category];
  el.title = `${span.category} (${span.source}) - click to edit`;
  el.textContent = text.slice(span.start, span.end);
  el.addEventListener("click", (e) => handlers.onSpanClick(span, e));
  return el;
}

/**
 * Current browser selection as [start, end) character offsets in the
 * document text, or null when the selection is empty or outside the
 * rendered text.
 */
export function selectionOffsets(container: HTMLElement): [number, number] | null {
  const sel = window.getSelection();
  if (!sel || sel.rangeCount === 0 || sel.isCollapsed) return null;
  const range = sel.getRangeAt(0);
  const start = offsetOf(container, range.startContainer, range.startOffset);
  const end = offsetOf(container, range.endContainer, range.endOffset);
  if (start === null || end === null || end <= start) return null;
  return [start, end];
}

function offsetOf(
  container: HTMLElement,
  node: Node,
  offsetInNode: number,
): number | null {
  let el: Node | null = node;
  while (el && el !== container) {
    if (el instanceof HTMLElement && el.dataset.start !== undefined) {
      return Number.parseInt(el.dataset.start, 10) + offsetInNode;
    }
    el = el.parentNode;
  }
  return null;
}
