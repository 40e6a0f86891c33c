// Timeline geometry: bars positioned proportionally to wall-clock time
// within the interview. Pure pixel math so it can be held to the 1 px
// contract in tests.

export interface Region {
  start_s: number;
  end_s: number;
}

export interface BarGeometry {
  leftPx: number;
  widthPx: number;
}

export const MIN_BAR_WIDTH_PX = 2;

export function barGeometry(region: Region, durationS: number, viewportPx: number): BarGeometry {
  if (durationS <= 0 || viewportPx <= 0) {
    return { leftPx: 0, widthPx: MIN_BAR_WIDTH_PX };
  }
  const left = (region.start_s / durationS) * viewportPx;
  const width = ((region.end_s - region.start_s) / durationS) * viewportPx;
  return { leftPx: left, widthPx: Math.max(width, MIN_BAR_WIDTH_PX) };
}

export function markerGeometry(timeS: number, durationS: number, viewportPx: number): number {
  if (durationS <= 0 || viewportPx <= 0) {
    return 0;
  }
  return (timeS / durationS) * viewportPx;
}

export function formatTime(seconds: number): string {
  const sign = seconds < 0 ? "-" : "";
  const total = Math.floor(Math.abs(seconds));
  const minutes = Math.floor(total / 60);
  const rest = total % 60;
  return `${sign}${minutes}:${rest.toString().padStart(2, "0")}`;
}
