import { describe, expect, it } from "vitest";

import { barGeometry, formatTime, markerGeometry } from "../src/timeline.js";

describe("timeline geometry", () => {
  it("bar position and width are proportional within 1px at viewports >= 800", () => {
    const duration = 2525.4; // seconds
    const regions = [
      { start_s: 0.0, end_s: 29.7 },
      { start_s: 310.2, end_s: 338.9 },
      { start_s: 2490.0, end_s: 2525.4 },
    ];
    for (const viewport of [800, 1024, 1440, 2560]) {
      for (const region of regions) {
        const geom = barGeometry(region, duration, viewport);
        const exactLeft = (region.start_s / duration) * viewport;
        const exactWidth = ((region.end_s - region.start_s) / duration) * viewport;
        expect(Math.abs(geom.leftPx - exactLeft)).toBeLessThanOrEqual(1);
        expect(Math.abs(geom.widthPx - Math.max(exactWidth, 2))).toBeLessThanOrEqual(1);
        expect(geom.leftPx + geom.widthPx).toBeLessThanOrEqual(viewport + 1);
      }
    }
  });

  it("keeps slivers visible with a minimum width", () => {
    const geom = barGeometry({ start_s: 10, end_s: 10.01 }, 3600, 800);
    expect(geom.widthPx).toBe(2);
  });

  it("marker scales like the bars", () => {
    expect(markerGeometry(1800, 3600, 800)).toBeCloseTo(400, 6);
    expect(markerGeometry(0, 3600, 800)).toBe(0);
  });

  it("degenerate durations do not blow up", () => {
    expect(barGeometry({ start_s: 0, end_s: 1 }, 0, 800)).toEqual({ leftPx: 0, widthPx: 2 });
  });

  it("formats seconds as m:ss", () => {
    expect(formatTime(0)).toBe("0:00");
    expect(formatTime(61.4)).toBe("1:01");
    expect(formatTime(600)).toBe("10:00");
  });
});
