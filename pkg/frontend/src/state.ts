/** Headless drafting-editor controller.
 *
 * Owns the document, the cursor, the suggestion lifecycle, and the feedback
 * protocol. The DOM layer renders this state and forwards user actions; all
 * behaviour the tests care about lives here.
 *
 * Invariants enforced:
 *  - candidates are displayed exactly in response order, never reordered;
 *  - each accept / reject / edit-accept posts exactly one feedback event;
 *  - a suggestion fetched for an earlier document revision cannot be
 *    accepted after the document changed (StaleSuggestionError);
 *  - of two overlapping completion requests, only the newest one may
 *    populate the panel (last-write-wins).
 */

import {
  ApiClient,
  ApiError,
  type Candidate,
  type ConstraintsBody,
  type Direction,
  type Extent,
  type SamplingBody,
} from "./api.js";

export class StaleSuggestionError extends Error {
  constructor() {
    super("the document changed after this suggestion was fetched");
    this.name = "StaleSuggestionError";
  }
}

export class SelectionError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SelectionError";
  }
}

export type SuggestionKind = "complete" | "bridge";
export type PanelStatus = "idle" | "loading" | "ready" | "error";

export interface Suggestion {
  kind: SuggestionKind;
  direction: Direction;
  candidates: Candidate[];
  /** Document revision the candidates were generated against. */
  docRevision: number;
  /** Cursor position (completions) the insertion is anchored to. */
  anchor: number;
}

export interface BridgeSelection {
  leftStart: number;
  leftEnd: number;
  rightStart: number;
  rightEnd: number;
}

export interface CompletionOptions {
  extent?: Extent;
  k?: number;
  lookahead?: number;
  constraints?: ConstraintsBody;
  sampling?: SamplingBody;
}

export interface BridgeOptions {
  window?: number;
  k?: number;
  maxBridgeTokens?: number;
  sampling?: SamplingBody;
}

export interface AntecedentWarning {
  phrase: string;
  index: number;
}

/** Joins two fragments with a single space unless a boundary already
 * carries whitespace (mirrors how the service splices accepted text). */
export function joinText(left: string, right: string): string {
  if (!left) return right;
  if (!right) return left;
  if (/\s$/.test(left) || /^\s/.test(right)) return left + right;
  return `${left} ${right}`;
}

type Listener = () => void;

export class EditorController {
  document = "";
  cursor = 0;
  sessionId: string | null = null;
  suggestion: Suggestion | null = null;
  status: PanelStatus = "idle";
  /** Inline, non-blocking message: conflicts (infeasible constraints, no
   * bridge found) and transport errors land here instead of throwing. */
  notice: string | null = null;
  bridgeSelection: BridgeSelection | null = null;

  private docRevision = 0;
  private requestCounter = 0;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  onChange(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  async init(): Promise<void> {
    this.sessionId = await this.api.createSession();
    this.emit();
  }

  // -- document -------------------------------------------------------------

  /** Replaces the document content (user typing, paste, programmatic load).
   * Any content change makes previously fetched suggestions stale. */
  setDocument(text: string, cursor: number = text.length): void {
    this.document = text;
    this.cursor = this.clamp(cursor);
    this.docRevision += 1;
    this.bridgeSelection = null;
    this.emit();
  }

  /** Moves the cursor without touching content. Does not invalidate
   * suggestions: accepts are anchored to the position they were fetched
   * for, so a wandering cursor cannot relocate an insertion. */
  setCursor(cursor: number): void {
    this.cursor = this.clamp(cursor);
    this.emit();
  }

  private clamp(cursor: number): number {
    return Math.max(0, Math.min(this.document.length, cursor));
  }

  get isSuggestionStale(): boolean {
    return this.suggestion !== null
      && this.suggestion.docRevision !== this.docRevision;
  }

  /** Context sent to the service: forward completions continue the text
   * before the cursor; backward completions precede the text after it. */
  contextFor(direction: Direction): string {
    return direction === "forward"
      ? this.document.slice(0, this.cursor)
      : this.document.slice(this.cursor);
  }

  // -- fetching -------------------------------------------------------------

  async fetchSuggestions(
    direction: Direction,
    options: CompletionOptions = {},
  ): Promise<void> {
    const sessionId = this.requireSession();
    const requestId = ++this.requestCounter;
    const revision = this.docRevision;
    const anchor = this.cursor;
    this.status = "loading";
    this.notice = null;
    this.emit();
    try {
      const candidates = await this.api.complete({
        session_id: sessionId,
        context: this.contextFor(direction),
        direction,
        extent: options.extent,
        k: options.k,
        lookahead: options.lookahead,
        constraints: options.constraints,
        sampling: options.sampling,
      });
      if (requestId !== this.requestCounter) return; // superseded
      this.suggestion = {
        kind: "complete",
        direction,
        candidates,
        docRevision: revision,
        anchor,
      };
      this.status = "ready";
    } catch (error) {
      if (requestId !== this.requestCounter) return;
      this.suggestion = null;
      this.status = "error";
      this.notice = error instanceof ApiError
        ? error.detail
        : String(error);
    }
    this.emit();
  }

  // -- bridge mode ----------------------------------------------------------

  /** Registers the two selections a bridge should connect. The selections
   * must be non-empty, in order, and non-overlapping. */
  setBridgeSelection(
    leftStart: number,
    leftEnd: number,
    rightStart: number,
    rightEnd: number,
  ): void {
    const n = this.document.length;
    const ordered =
      0 <= leftStart && leftStart < leftEnd
      && leftEnd <= rightStart && rightStart < rightEnd && rightEnd <= n;
    if (!ordered) {
      throw new SelectionError(
        "bridge selections must be non-empty, non-overlapping, and in order");
    }
    this.bridgeSelection = { leftStart, leftEnd, rightStart, rightEnd };
    this.emit();
  }

  async fetchBridge(options: BridgeOptions = {}): Promise<void> {
    const sessionId = this.requireSession();
    const selection = this.bridgeSelection;
    if (!selection) {
      throw new SelectionError("mark the two selections to bridge first");
    }
    const requestId = ++this.requestCounter;
    const revision = this.docRevision;
    this.status = "loading";
    this.notice = null;
    this.emit();
    try {
      const candidates = await this.api.bridge({
        session_id: sessionId,
        left: this.document.slice(selection.leftStart, selection.leftEnd),
        right: this.document.slice(selection.rightStart, selection.rightEnd),
        window: options.window,
        k: options.k,
        max_bridge_tokens: options.maxBridgeTokens,
        sampling: options.sampling,
      });
      if (requestId !== this.requestCounter) return;
      this.suggestion = {
        kind: "bridge",
        direction: "forward",
        candidates,
        docRevision: revision,
        anchor: selection.leftEnd,
      };
      this.status = "ready";
    } catch (error) {
      if (requestId !== this.requestCounter) return;
      this.suggestion = null;
      this.status = "error";
      this.notice = error instanceof ApiError ? error.detail : String(error);
    }
    this.emit();
  }

  // -- acting on candidates -------------------------------------------------

  /** The candidates as they must be rendered: exactly response order. */
  get displayedCandidates(): readonly Candidate[] {
    return this.suggestion ? this.suggestion.candidates : [];
  }

  async accept(index: number): Promise<void> {
    const { suggestion, candidate } = this.take(index, { forAccept: true });
    this.apply(suggestion, candidate.text);
    await this.api.feedback(
      this.requireSession(), candidate.candidate_id, "Accepted");
  }

  /** Accepts candidate text the user modified before inserting. */
  async acceptEdited(index: number, editedText: string): Promise<void> {
    if (!editedText.trim()) {
      throw new SelectionError("edited text must be non-empty");
    }
    const { suggestion, candidate } = this.take(index, { forAccept: true });
    this.apply(suggestion, editedText);
    await this.api.feedback(
      this.requireSession(), candidate.candidate_id, "Edited", editedText);
  }

  /** Declines one candidate; the document is untouched and the remaining
   * candidates stay on the panel in their original order. */
  async reject(index: number): Promise<void> {
    const { suggestion, candidate } = this.take(index, { forAccept: false });
    this.suggestion = {
      ...suggestion,
      candidates: suggestion.candidates.filter((_, i) => i !== index),
    };
    this.emit();
    await this.api.feedback(
      this.requireSession(), candidate.candidate_id, "Rejected");
  }

  private take(
    index: number,
    { forAccept }: { forAccept: boolean },
  ): { suggestion: Suggestion; candidate: Candidate } {
    const suggestion = this.suggestion;
    if (!suggestion) {
      throw new SelectionError("no suggestions to act on");
    }
    if (forAccept && suggestion.docRevision !== this.docRevision) {
      throw new StaleSuggestionError();
    }
    const candidate = suggestion.candidates[index];
    if (!candidate) {
      throw new SelectionError(`no candidate at index ${index}`);
    }
    return { suggestion, candidate };
  }

  private apply(suggestion: Suggestion, text: string): void {
    if (suggestion.kind === "bridge") {
      this.applyBridge(text);
    } else if (suggestion.direction === "forward") {
      this.applyForward(suggestion.anchor, text);
    } else {
      this.applyBackward(suggestion.anchor, text);
    }
    this.suggestion = null;
    this.status = "idle";
    this.docRevision += 1;
    this.emit();
  }

  /** Forward accepts land after the context: cursor ends up at the end of
   * the inserted text. */
  private applyForward(anchor: number, text: string): void {
    const before = this.document.slice(0, anchor);
    const after = this.document.slice(anchor);
    const withText = joinText(before, text);
    this.document = joinText(withText, after);
    this.cursor = withText.length;
  }

  /** Backward accepts land before the trailing context: cursor ends up at
   * the start of the inserted text, ready to extend further leftward. */
  private applyBackward(anchor: number, text: string): void {
    const before = this.document.slice(0, anchor);
    const after = this.document.slice(anchor);
    const tail = joinText(text, after);
    this.document = joinText(before, tail);
    this.cursor = this.document.length - tail.length;
  }

  /** A bridge replaces the gap between the two selections, leaving
   * left + bridge + right contiguous. */
  private applyBridge(text: string): void {
    const selection = this.bridgeSelection;
    if (!selection) {
      throw new SelectionError("bridge selection was cleared");
    }
    const before = this.document.slice(0, selection.leftEnd);
    const after = this.document.slice(selection.rightStart);
    const withBridge = joinText(before, text);
    this.document = joinText(withBridge, after);
    this.cursor = withBridge.length;
    this.bridgeSelection = null;
  }

  // -- antecedent warnings --------------------------------------------------

  /** Heuristic, advisory-only scan: flags "the X" / "said X" phrases whose
   * head noun was never introduced with "a"/"an" earlier in the document.
   * The server-side checker is authoritative; this exists so the drafting
   * surface can warn inline without blocking anything. */
  get antecedentWarnings(): AntecedentWarning[] {
    const warnings: AntecedentWarning[] = [];
    const definite = /\b(?:the|said)\s+([a-z]+)/gi;
    for (const match of this.document.matchAll(definite)) {
      const head = (match[1] ?? "").toLowerCase();
      if (!head) continue;
      const earlier = this.document.slice(0, match.index ?? 0);
      const intro = new RegExp(`\\ban?\\s+${head}\\b`, "i");
      if (!intro.test(earlier)) {
        warnings.push({ phrase: head, index: match.index ?? 0 });
      }
    }
    return warnings;
  }

  private requireSession(): string {
    if (!this.sessionId) {
      throw new SelectionError("no session: call init() first");
    }
    return this.sessionId;
  }
}
