// Annotation session state machine.
//
// One interval is open at a time: marking a start opens a draft, marking an
// end (at least 15 frames later, overlapping nothing) moves the session into
// the attribute prompts, and committing the attributes closes the interval.

import type {
  CommittedInterval,
  IntervalAttributes,
  SessionDescriptor,
} from "./types.js";

export const MIN_INTERVAL_FRAMES = 15; // 1 second of video

export type SessionPhase = "idle" | "draft" | "prompting";

export type MarkError =
  | "DraftAlreadyOpen"
  | "NoOpenDraft"
  | "EndNotAfterStart"
  | "TooShort"
  | "OverlapWithExisting";

export type MarkResult = { ok: true } | { ok: false; error: MarkError; message: string };

const ok: MarkResult = { ok: true };

function fail(error: MarkError, message: string): MarkResult {
  return { ok: false, error, message };
}

export class AnnotationSession {
  readonly descriptor: SessionDescriptor;
  private draftStart: number | null = null;
  private pendingEnd: number | null = null;
  private committed: CommittedInterval[] = [];

  constructor(descriptor: SessionDescriptor) {
    this.descriptor = descriptor;
  }

  get phase(): SessionPhase {
    if (this.draftStart === null) return "idle";
    return this.pendingEnd === null ? "draft" : "prompting";
  }

  get openDraftStart(): number | null {
    return this.draftStart;
  }

  /** Committed intervals, sorted by start frame. */
  intervals(): CommittedInterval[] {
    return [...this.committed].sort((a, b) => a.startFrame - b.startFrame);
  }

  canMarkStart(): boolean {
    return this.phase === "idle";
  }

  canMarkEnd(): boolean {
    return this.phase === "draft";
  }

  markStart(currentFrame: number): MarkResult {
    if (this.phase !== "idle") {
      return fail("DraftAlreadyOpen", "Finish the open interval first.");
    }
    const inside = this.committed.find(
      (iv) => currentFrame >= iv.startFrame && currentFrame < iv.endFrame,
    );
    if (inside) {
      return fail(
        "OverlapWithExisting",
        `Frame ${currentFrame} lies inside the committed interval ` +
          `[${inside.startFrame}, ${inside.endFrame}).`,
      );
    }
    this.draftStart = currentFrame;
    return ok;
  }

  /** Validate the end point; on success the session awaits the attributes. */
  markEnd(currentFrame: number): MarkResult {
    if (this.phase !== "draft" || this.draftStart === null) {
      return fail("NoOpenDraft", "Mark a start point first.");
    }
    if (currentFrame <= this.draftStart) {
      return fail("EndNotAfterStart", "The end must come after the start.");
    }
    const length = currentFrame - this.draftStart;
    if (length < MIN_INTERVAL_FRAMES) {
      return fail(
        "TooShort",
        `Intervals must span at least ${MIN_INTERVAL_FRAMES} frames ` +
          `(1 second); this one has ${length}.`,
      );
    }
    const start = this.draftStart;
    const overlap = this.committed.find(
      (iv) => start < iv.endFrame && currentFrame > iv.startFrame,
    );
    if (overlap) {
      return fail(
        "OverlapWithExisting",
        `[${start}, ${currentFrame}) overlaps the committed interval ` +
          `[${overlap.startFrame}, ${overlap.endFrame}).`,
      );
    }
    this.pendingEnd = currentFrame;
    return ok;
  }

  /** Attach the prompted attributes and commit the pending interval. */
  commitPending(attributes: IntervalAttributes): MarkResult {
    if (this.phase !== "prompting" || this.draftStart === null || this.pendingEnd === null) {
      return fail("NoOpenDraft", "No interval is awaiting attributes.");
    }
    this.committed.push({
      startFrame: this.draftStart,
      endFrame: this.pendingEnd,
      ...attributes,
    });
    this.draftStart = null;
    this.pendingEnd = null;
    return ok;
  }

  /** Abandon the open draft or pending interval. */
  cancelDraft(): void {
    this.draftStart = null;
    this.pendingEnd = null;
  }

  removeInterval(index: number): void {
    const sorted = this.intervals();
    const target = sorted[index];
    if (!target) return;
    this.committed = this.committed.filter((iv) => iv !== target);
  }
}
