/** Browser shell around the EditorController.
 *
 * Renders the draft textarea, the suggestion panel, and the bridge
 * controls, and forwards user gestures to the controller. All protocol
 * behaviour (feedback events, staleness, ordering) lives in the
 * controller; this layer only paints state and reports errors inline.
 */

import { ApiClient } from "./api.js";
import {
  EditorController,
  SelectionError,
  StaleSuggestionError,
  type BridgeSelection,
} from "./state.js";

interface UiRefs {
  editor: HTMLTextAreaElement;
  status: HTMLElement;
  notice: HTMLElement;
  warnings: HTMLElement;
  panel: HTMLElement;
  bridgeState: HTMLElement;
}

export function mountDraftingUi(
  root: HTMLElement,
  baseUrl = "",
): EditorController {
  const controller = new EditorController(new ApiClient(baseUrl));
  const refs = buildLayout(root, controller);

  controller.onChange(() => render(controller, refs));
  controller.init().catch((error) => {
    refs.notice.textContent = `service unavailable: ${describe(error)}`;
  });
  render(controller, refs);
  return controller;
}

function buildLayout(root: HTMLElement, controller: EditorController): UiRefs {
  root.innerHTML = "";

  const editor = document.createElement("textarea");
  editor.className = "cf-editor";
  editor.rows = 14;
  editor.placeholder = "Draft a claim…";
  editor.addEventListener("input", () => {
    controller.setDocument(editor.value, editor.selectionStart ?? 0);
  });
  const syncCursor = () => {
    if (editor.value === controller.document) {
      controller.setCursor(editor.selectionStart ?? 0);
    }
  };
  editor.addEventListener("keyup", syncCursor);
  editor.addEventListener("click", syncCursor);

  const toolbar = document.createElement("div");
  toolbar.className = "cf-toolbar";

  const extent = document.createElement("select");
  for (const level of ["token", "word", "phrase", "span", "sentence"]) {
    const option = document.createElement("option");
    option.value = level;
    option.textContent = level;
    if (level === "word") option.selected = true;
    extent.appendChild(option);
  }

  const notice = document.createElement("div");
  notice.className = "cf-notice";

  const guarded = (action: () => Promise<void>) => () => {
    notice.textContent = "";
    action().catch((error) => {
      notice.textContent = describe(error);
    });
  };

  const backwardBtn = button("◀ complete", guarded(() =>
    controller.fetchSuggestions("backward", {
      extent: extent.value as never,
    })));
  const forwardBtn = button("complete ▶", guarded(() =>
    controller.fetchSuggestions("forward", {
      extent: extent.value as never,
    })));

  let pendingLeft: [number, number] | null = null;
  const bridgeState = document.createElement("span");
  bridgeState.className = "cf-bridge-state";
  const markBtn = button("mark selection", () => {
    const start = editor.selectionStart ?? 0;
    const end = editor.selectionEnd ?? 0;
    notice.textContent = "";
    try {
      if (pendingLeft === null) {
        if (start >= end) {
          throw new SelectionError("select some text to mark first");
        }
        pendingLeft = [start, end];
      } else {
        controller.setBridgeSelection(
          pendingLeft[0], pendingLeft[1], start, end);
        pendingLeft = null;
      }
    } catch (error) {
      pendingLeft = null;
      notice.textContent = describe(error);
    }
    render(controller, refs);
  });
  const bridgeBtn = button("bridge", guarded(() => controller.fetchBridge()));

  toolbar.append(
    backwardBtn, forwardBtn, extent, markBtn, bridgeBtn, bridgeState);

  const status = document.createElement("div");
  status.className = "cf-status";
  const warnings = document.createElement("div");
  warnings.className = "cf-warnings";
  const panel = document.createElement("ol");
  panel.className = "cf-panel";

  root.append(editor, toolbar, notice, status, warnings, panel);

  const refs: UiRefs = { editor, status, notice, warnings, panel, bridgeState };

  controller.onChange(() => {
    if (editor.value !== controller.document) {
      editor.value = controller.document;
      editor.setSelectionRange(controller.cursor, controller.cursor);
    }
  });
  return refs;
}

function render(controller: EditorController, refs: UiRefs): void {
  refs.status.textContent = controller.sessionId
    ? `session ${controller.sessionId} — ${controller.status}`
    : "connecting…";
  refs.notice.textContent = controller.notice ?? refs.notice.textContent;
  refs.bridgeState.textContent = describeBridge(controller.bridgeSelection);

  refs.warnings.innerHTML = "";
  for (const warning of controller.antecedentWarnings) {
    const item = document.createElement("div");
    item.className = "cf-warning";
    item.textContent =
      `possible missing antecedent: "the ${warning.phrase}"`;
    refs.warnings.appendChild(item);
  }

  refs.panel.innerHTML = "";
  const stale = controller.isSuggestionStale;
  controller.displayedCandidates.forEach((candidate, index) => {
    const item = document.createElement("li");
    item.className = stale ? "cf-candidate cf-stale" : "cf-candidate";

    const text = document.createElement("span");
    text.textContent = candidate.text;
    const score = document.createElement("small");
    score.textContent = ` (score ${candidate.score.toFixed(3)})`;

    const act = (fn: () => Promise<void>) => () => {
      fn().catch((error) => {
        refs.notice.textContent = error instanceof StaleSuggestionError
          ? "the draft changed; fetch fresh suggestions"
          : describe(error);
        render(controller, refs);
      });
    };
    const acceptBtn = button("accept", act(() => controller.accept(index)));
    acceptBtn.disabled = stale;
    const editBtn = button("edit…", act(async () => {
      const edited = window.prompt("Edit before accepting:", candidate.text);
      if (edited !== null) {
        await controller.acceptEdited(index, edited);
      }
    }));
    editBtn.disabled = stale;
    const rejectBtn = button("reject", act(() => controller.reject(index)));

    item.append(text, score, acceptBtn, editBtn, rejectBtn);
    refs.panel.appendChild(item);
  });
  if (stale && controller.displayedCandidates.length > 0) {
    const note = document.createElement("li");
    note.className = "cf-stale-note";
    note.textContent = "draft changed since these were fetched";
    refs.panel.appendChild(note);
  }
}

function describeBridge(selection: BridgeSelection | null): string {
  if (!selection) return "";
  return `bridging [${selection.leftStart}:${selection.leftEnd}] ↔ `
    + `[${selection.rightStart}:${selection.rightEnd}]`;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const element = document.createElement("button");
  element.type = "button";
  element.textContent = label;
  element.addEventListener("click", onClick);
  return element;
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
