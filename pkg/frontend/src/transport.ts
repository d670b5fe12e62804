// Keyboard transport for the annotation player.
//
//   t  toggle play/pause        r  rewind to the start
//   d  jump forward a bit       f  jump backward a bit
//   v  step forward a tiny bit  c  step backward a tiny bit
//
// Jump and step magnitudes are fixed here: 2 seconds and 1 frame.

export const JUMP_SECONDS = 2;
export const STEP_FRAMES = 1;

export type TransportAction =
  | "toggle"
  | "rewind"
  | "jump-forward"
  | "jump-backward"
  | "step-forward"
  | "step-backward"
  | "none";

const KEY_MAP: Record<string, TransportAction> = {
  t: "toggle",
  r: "rewind",
  d: "jump-forward",
  f: "jump-backward",
  v: "step-forward",
  c: "step-backward",
};

export function transportAction(key: string): TransportAction {
  return KEY_MAP[key] ?? "none";
}

export interface PlaybackController {
  readonly fps: number;
  readonly totalFrames: number;
  readonly currentFrame: number;
  readonly playing: boolean;
  seekToFrame(frame: number): void;
  play(): void;
  pause(): void;
}

export function applyTransport(key: string, player: PlaybackController): TransportAction {
  const action = transportAction(key);
  const clamp = (frame: number) =>
    Math.min(Math.max(frame, 0), Math.max(player.totalFrames - 1, 0));
  const jump = Math.round(JUMP_SECONDS * player.fps);
  switch (action) {
    case "toggle":
      if (player.playing) player.pause();
      else player.play();
      break;
    case "rewind":
      player.seekToFrame(0);
      break;
    case "jump-forward":
      player.seekToFrame(clamp(player.currentFrame + jump));
      break;
    case "jump-backward":
      player.seekToFrame(clamp(player.currentFrame - jump));
      break;
    case "step-forward":
      player.seekToFrame(clamp(player.currentFrame + STEP_FRAMES));
      break;
    case "step-backward":
      player.seekToFrame(clamp(player.currentFrame - STEP_FRAMES));
      break;
    case "none":
      break;
  }
  return action;
}
