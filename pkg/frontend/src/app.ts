// DOM shell wiring the session, transport, and exporter to the page.
// All annotation logic lives in the pure modules; this file only moves
// state in and out of the browser widgets.

import { downloadDocument, exportSession } from "./exporter.js";
import { AnnotationSession } from "./session.js";
import { applyTransport, type PlaybackController } from "./transport.js";
import { CLARITY_LABELS, parseDescriptor, type Clarity, type SessionDescriptor } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const videoEl = el<HTMLVideoElement>("video");
const videoInput = el<HTMLInputElement>("video-file");
const sidecarInput = el<HTMLInputElement>("sidecar-file");
const frameLabel = el<HTMLSpanElement>("frame-label");
const statusLabel = el<HTMLSpanElement>("status-label");
const startBtn = el<HTMLButtonElement>("mark-start");
const endBtn = el<HTMLButtonElement>("mark-end");
const cancelBtn = el<HTMLButtonElement>("cancel-draft");
const intervalList = el<HTMLUListElement>("interval-list");
const reviewBtn = el<HTMLButtonElement>("review");
const annotateView = el<HTMLDivElement>("annotate-view");
const reviewView = el<HTMLDivElement>("review-view");
const reviewList = el<HTMLUListElement>("review-list");
const confirmBtn = el<HTMLButtonElement>("confirm-export");
const backBtn = el<HTMLButtonElement>("back-to-annotate");
const promptBox = el<HTMLDivElement>("prompt-box");

let descriptor: SessionDescriptor | null = null;
let session: AnnotationSession | null = null;

const player: PlaybackController = {
  get fps() {
    return descriptor?.fps ?? 15;
  },
  get totalFrames() {
    return Math.max(1, Math.round((videoEl.duration || 0) * this.fps));
  },
  get currentFrame() {
    return Math.min(
      Math.round(videoEl.currentTime * this.fps),
      this.totalFrames - 1,
    );
  },
  get playing() {
    return !videoEl.paused;
  },
  seekToFrame(frame: number) {
    videoEl.currentTime = frame / this.fps;
  },
  play() {
    void videoEl.play();
  },
  pause() {
    videoEl.pause();
  },
};

function setStatus(text: string, isError = false): void {
  statusLabel.textContent = text;
  statusLabel.className = isError ? "error" : "";
}

function refresh(): void {
  frameLabel.textContent = String(player.currentFrame);
  const ready = session !== null && videoEl.src !== "";
  startBtn.disabled = !ready || !session!.canMarkStart();
  endBtn.disabled = !ready || !session!.canMarkEnd();
  cancelBtn.disabled = !ready || session!.phase === "idle";
  reviewBtn.disabled = !ready;
  if (session) {
    renderIntervalList();
    const draft = session.openDraftStart;
    if (draft !== null && session.phase === "draft") {
      setStatus(`Interval open at frame ${draft}; mark the end when ready.`);
    }
  }
}

function renderIntervalList(): void {
  intervalList.replaceChildren();
  session!.intervals().forEach((iv, index) => {
    const item = document.createElement("li");
    item.textContent =
      `[${iv.startFrame}, ${iv.endFrame})  ` +
      `${iv.touched ? "touched" : "looked"} / ${CLARITY_LABELS[iv.clarity]}` +
      (iv.description ? ` — ${iv.description}` : "");
    const remove = document.createElement("button");
    remove.textContent = "remove";
    remove.addEventListener("click", () => {
      session!.removeInterval(index);
      refresh();
    });
    item.appendChild(remove);
    intervalList.appendChild(item);
  });
}

// --- attribute prompt sequence: touched -> clarity -> description -----------

function promptAttributes(): void {
  promptBox.hidden = false;
  promptBox.replaceChildren();
  askTouched();
}

function stage(title: string, ...controls: HTMLElement[]): void {
  promptBox.replaceChildren();
  const heading = document.createElement("p");
  heading.textContent = title;
  promptBox.appendChild(heading);
  controls.forEach((c) => promptBox.appendChild(c));
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.addEventListener("click", onClick);
  return b;
}

function askTouched(): void {
  stage(
    "Did the recorder touch (grab, turn, hold) the object?",
    button("Yes", () => askClarity(true)),
    button("No", () => askClarity(false)),
  );
}

function askClarity(touched: boolean): void {
  const buttons = (Object.keys(CLARITY_LABELS) as Clarity[]).map((value) =>
    button(CLARITY_LABELS[value], () => askDescription(touched, value)),
  );
  stage("How clear is the engagement?", ...buttons);
}

function askDescription(touched: boolean, clarity: Clarity): void {
  const input = document.createElement("input");
  input.type = "text";
  input.placeholder = "What captured the attention?";
  stage(
    "Describe what captured the attention:",
    input,
    button("Save interval", () => {
      const result = session!.commitPending({
        touched,
        clarity,
        description: input.value.trim(),
      });
      promptBox.hidden = true;
      setStatus(result.ok ? "Interval saved." : result.message, !result.ok);
      refresh();
    }),
  );
  input.focus();
}

// --- review screen ------------------------------------------------------------

function showReview(): void {
  reviewList.replaceChildren();
  session!.intervals().forEach((iv) => {
    const item = document.createElement("li");
    const seconds = (f: number) => (f / player.fps).toFixed(1);
    item.textContent =
      `frames [${iv.startFrame}, ${iv.endFrame})  ` +
      `(${seconds(iv.startFrame)}s to ${seconds(iv.endFrame)}s)  ` +
      `${iv.touched ? "touched" : "looked"} / ${CLARITY_LABELS[iv.clarity]}` +
      (iv.description ? ` — ${iv.description}` : "");
    reviewList.appendChild(item);
  });
  annotateView.hidden = true;
  reviewView.hidden = false;
}

// --- wiring ---------------------------------------------------------------------

videoInput.addEventListener("change", () => {
  const file = videoInput.files?.[0];
  if (file) {
    videoEl.src = URL.createObjectURL(file);
    setStatus("Watch the whole clip once before annotating.");
  }
  refresh();
});

sidecarInput.addEventListener("change", async () => {
  const file = sidecarInput.files?.[0];
  if (!file) return;
  try {
    descriptor = parseDescriptor(JSON.parse(await file.text()));
    session = new AnnotationSession(descriptor);
    setStatus(
      `Annotating ${descriptor.videoId} as ${descriptor.workerId} ` +
        `(${descriptor.fps} fps, chunk at ${descriptor.chunkStartSec}s).`,
    );
  } catch (err) {
    setStatus(`Could not read descriptor: ${err}`, true);
  }
  refresh();
});

startBtn.addEventListener("click", () => {
  const result = session!.markStart(player.currentFrame);
  setStatus(result.ok ? `Start marked at frame ${player.currentFrame}.` : result.message, !result.ok);
  refresh();
});

endBtn.addEventListener("click", () => {
  const result = session!.markEnd(player.currentFrame);
  if (result.ok) {
    player.pause();
    promptAttributes();
  } else {
    setStatus(result.message, true);
  }
  refresh();
});

cancelBtn.addEventListener("click", () => {
  session!.cancelDraft();
  promptBox.hidden = true;
  setStatus("Draft discarded.");
  refresh();
});

reviewBtn.addEventListener("click", showReview);
backBtn.addEventListener("click", () => {
  reviewView.hidden = true;
  annotateView.hidden = false;
});

confirmBtn.addEventListener("click", () => {
  downloadDocument(exportSession(session!));
  reviewView.hidden = true;
  annotateView.hidden = false;
  setStatus("Annotation file downloaded.");
});

document.addEventListener("keydown", (event) => {
  const target = event.target as HTMLElement | null;
  if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
    return; // typing a description
  }
  if (!promptBox.hidden) return;
  if (applyTransport(event.key, player) !== "none") {
    event.preventDefault();
    refresh();
  }
});

videoEl.addEventListener("timeupdate", refresh);
videoEl.addEventListener("loadedmetadata", refresh);
refresh();
