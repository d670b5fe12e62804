// Session export to the ee-annotation/1 JSON document.
//
// The UI works in native video frames for frame-accurate marking; the
// document stores evaluation-grid frames, so boundaries are converted with
// the same rounding the backend uses.

import type { AnnotationSession } from "./session.js";
import type { AnnotationDocument } from "./types.js";

export function nativeToEvalFrame(nativeFrame: number, fps: number, evalHz: number): number {
  return Math.round((nativeFrame * evalHz) / fps);
}

export function exportSession(session: AnnotationSession): AnnotationDocument {
  const d = session.descriptor;
  return {
    schema: "ee-annotation/1",
    video_id: d.videoId,
    worker_id: d.workerId,
    chunk_start_sec: d.chunkStartSec,
    eval_hz: d.evalHz,
    intervals: session.intervals().map((iv) => ({
      start: nativeToEvalFrame(iv.startFrame, d.fps, d.evalHz),
      end: nativeToEvalFrame(iv.endFrame, d.fps, d.evalHz),
      touched: iv.touched,
      clarity: iv.clarity,
      description: iv.description,
    })),
  };
}

export function documentFilename(doc: AnnotationDocument): string {
  return `${doc.video_id}.${doc.worker_id}.json`;
}

/** Trigger a browser download of the exported document. */
export function downloadDocument(doc: AnnotationDocument): void {
  const blob = new Blob([JSON.stringify(doc, null, 2) + "\n"], {
    type: "application/json",
  });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = documentFilename(doc);
  anchor.click();
  URL.revokeObjectURL(url);
}
