import { beforeEach, describe, expect, it, vi } from "vitest";

import { RegionPlayer, type AudioLike } from "../src/player.js";

// Audio element stub driven by vitest's fake clock; currentTime advances
// with elapsed fake milliseconds while playing.
class FakeAudio implements AudioLike {
  currentTime = 0;
  paused = true;
  playedAt: number | null = null;
  pauseLog: Array<{ at: number; currentTime: number }> = [];
  private listeners = new Map<string, Set<() => void>>();

  play(): void {
    this.paused = false;
    this.playedAt = Date.now();
  }

  pause(): void {
    if (!this.paused && this.playedAt !== null) {
      this.currentTime += (Date.now() - this.playedAt) / 1000;
    }
    this.paused = true;
    this.pauseLog.push({ at: Date.now(), currentTime: this.currentTime });
  }

  tick(): void {
    if (!this.paused && this.playedAt !== null) {
      this.currentTime += (Date.now() - this.playedAt) / 1000;
      this.playedAt = Date.now();
    }
    for (const fn of this.listeners.get("timeupdate") ?? []) {
      fn();
    }
  }

  addEventListener(type: string, listener: () => void): void {
    if (!this.listeners.has(type)) {
      this.listeners.set(type, new Set());
    }
    this.listeners.get(type)!.add(listener);
  }

  removeEventListener(type: string, listener: () => void): void {
    this.listeners.get(type)?.delete(listener);
  }
}

describe("region player", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    vi.setSystemTime(0);
  });

  it("plays exactly the region and stops within 50ms of its end", () => {
    const audio = new FakeAudio();
    const player = new RegionPlayer(audio);
    player.play({ start_s: 10.0, end_s: 14.2 });
    expect(audio.currentTime).toBe(10.0);
    expect(audio.paused).toBe(false);

    vi.advanceTimersByTime(4100); // still inside the region
    expect(audio.paused).toBe(false);

    vi.advanceTimersByTime(200); // past the scheduled stop
    expect(audio.paused).toBe(true);
    const stop = audio.pauseLog.at(-1)!;
    expect(Math.abs(stop.currentTime - 14.2)).toBeLessThanOrEqual(0.05);
    player.dispose();
  });

  it("a second playback request stops the first", () => {
    const audio = new FakeAudio();
    const player = new RegionPlayer(audio);
    player.play({ start_s: 5.0, end_s: 9.0 });
    vi.advanceTimersByTime(1000);
    player.play({ start_s: 30.0, end_s: 31.0 });
    // first region paused before the seek, then playback restarted
    expect(audio.pauseLog.length).toBe(1);
    expect(audio.currentTime).toBe(30.0);
    expect(audio.paused).toBe(false);
    expect(player.activeRegion).toEqual({ start_s: 30.0, end_s: 31.0 });

    vi.advanceTimersByTime(1001);
    expect(audio.paused).toBe(true);
    player.dispose();
  });

  it("timeupdate past the region end stops playback (seek drift guard)", () => {
    const audio = new FakeAudio();
    const player = new RegionPlayer(audio);
    player.play({ start_s: 0.0, end_s: 60.0 });
    audio.currentTime = 61.0; // user scrubbed past the end
    audio.tick();
    expect(audio.paused).toBe(true);
    player.dispose();
  });

  it("stop is idempotent and cancels the timer", () => {
    const audio = new FakeAudio();
    const player = new RegionPlayer(audio);
    player.play({ start_s: 0.0, end_s: 2.0 });
    player.stop();
    player.stop();
    expect(audio.pauseLog.length).toBe(1);
    vi.advanceTimersByTime(5000); // timer was cancelled; no second pause
    expect(audio.pauseLog.length).toBe(1);
    player.dispose();
  });
});
