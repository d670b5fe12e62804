// Shared annotation types. The exported JSON document must stay
// byte-compatible with the ee-annotation/1 schema consumed by the
// aggregation backend.

export type Clarity = "obvious" | "fairly_clear" | "subtle";

export const CLARITY_LABELS: Record<Clarity, string> = {
  obvious: "Obvious",
  fairly_clear: "Fairly clear",
  subtle: "Subtle",
};

export interface IntervalAttributes {
  touched: boolean;
  clarity: Clarity;
  description: string;
}

export interface CommittedInterval extends IntervalAttributes {
  /** Native-fps frame, inclusive, relative to the chunk start. */
  startFrame: number;
  /** Native-fps frame, exclusive. */
  endFrame: number;
}

/** Sidecar descriptor accompanying the video file. */
export interface SessionDescriptor {
  videoId: string;
  workerId: string;
  fps: number;
  chunkStartSec: number;
  evalHz: number;
}

export interface AnnotationDocumentInterval {
  start: number;
  end: number;
  touched: boolean;
  clarity: Clarity;
  description: string;
}

export interface AnnotationDocument {
  schema: "ee-annotation/1";
  video_id: string;
  worker_id: string;
  chunk_start_sec: number;
  eval_hz: number;
  intervals: AnnotationDocumentInterval[];
}

export function parseDescriptor(raw: unknown): SessionDescriptor {
  const obj = raw as Partial<Record<string, unknown>>;
  if (typeof obj !== "object" || obj === null) {
    throw new Error("descriptor must be a JSON object");
  }
  const fps = Number(obj.fps);
  if (!Number.isFinite(fps) || fps <= 0) {
    throw new Error("descriptor.fps must be a positive number");
  }
  return {
    videoId: String(obj.video_id ?? obj.videoId ?? "video"),
    workerId: String(obj.worker_id ?? obj.workerId ?? "w00"),
    fps,
    chunkStartSec: Number(obj.chunk_start_sec ?? obj.chunkStartSec ?? 0),
    evalHz: Number(obj.eval_hz ?? obj.evalHz ?? 1),
  };
}
