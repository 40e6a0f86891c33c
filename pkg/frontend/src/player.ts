// Region playback with a single shared audio element: starting a new
// region stops the previous one, and playback halts at the region end.
// The element, clock and timer hooks are injected so the stop timing can
// be tested against the +-50 ms contract with fake time.

export interface AudioLike {
  currentTime: number;
  paused: boolean;
  play(): void | Promise<void>;
  pause(): void;
  addEventListener(type: string, listener: () => void): void;
  removeEventListener(type: string, listener: () => void): void;
}

export interface Region {
  start_s: number;
  end_s: number;
}

type Schedule = (fn: () => void, ms: number) => unknown;
type Cancel = (handle: unknown) => void;

export class RegionPlayer {
  private timer: unknown = null;
  private active: Region | null = null;
  private readonly onTimeUpdate: () => void;

  constructor(
    private audio: AudioLike,
    private schedule: Schedule = (fn, ms) => setTimeout(fn, ms),
    private cancel: Cancel = (handle) => clearTimeout(handle as number),
  ) {
    // guard against seek drift: never let playback run past the region end
    this.onTimeUpdate = () => {
      if (this.active && this.audio.currentTime >= this.active.end_s) {
        this.stop();
      }
    };
    this.audio.addEventListener("timeupdate", this.onTimeUpdate);
  }

  get activeRegion(): Region | null {
    return this.active;
  }

  play(region: Region): void {
    this.stop();
    this.active = region;
    this.audio.currentTime = region.start_s;
    void this.audio.play();
    const durationMs = Math.max(0, (region.end_s - region.start_s) * 1000);
    this.timer = this.schedule(() => {
      this.timer = null;
      this.stop();
    }, durationMs);
  }

  stop(): void {
    if (this.timer !== null) {
      this.cancel(this.timer);
      this.timer = null;
    }
    if (this.active !== null) {
      this.audio.pause();
      this.active = null;
    }
  }

  dispose(): void {
    this.stop();
    this.audio.removeEventListener("timeupdate", this.onTimeUpdate);
  }
}
