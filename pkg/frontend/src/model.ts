// Pure view-state for one query round-trip. Results keep the exact API
// order (never re-sorted client-side); verdicts and selection may only
// reference returned rows.

import type { QueryResponse, ResultRow, Verdict } from "./api.js";

export interface QueryView {
  interviewId: string;
  queryText: string;
  k: number;
  results: ResultRow[];
  clamped: boolean;
  selected: number | null;
  verdicts: Record<number, Verdict>;
  error: string | null;
  loading: boolean;
}

export function emptyView(interviewId: string, k = 5): QueryView {
  return {
    interviewId,
    queryText: "",
    k,
    results: [],
    clamped: false,
    selected: null,
    verdicts: {},
    error: null,
    loading: false,
  };
}

export function canSubmit(view: QueryView): boolean {
  return view.queryText.trim().length > 0 && view.interviewId.length > 0 && !view.loading;
}

export function beginQuery(view: QueryView): QueryView {
  return { ...view, loading: true, error: null };
}

export function applyResponse(view: QueryView, response: QueryResponse): QueryView {
  // fresh results invalidate selection and verdicts from the previous list
  return {
    ...view,
    loading: false,
    error: null,
    results: response.results,
    clamped: response.clamped,
    selected: null,
    verdicts: {},
  };
}

export function applyError(view: QueryView, message: string): QueryView {
  // no stale results behind an error banner
  return { ...view, loading: false, error: message, results: [], clamped: false, selected: null, verdicts: {} };
}

export function selectResult(view: QueryView, index: number): QueryView {
  if (index < 0 || index >= view.results.length) {
    return view;
  }
  return { ...view, selected: index };
}

export function setVerdict(view: QueryView, index: number, verdict: Verdict): QueryView {
  if (index < 0 || index >= view.results.length) {
    return view;
  }
  return { ...view, verdicts: { ...view.verdicts, [index]: verdict } };
}

export function clearVerdict(view: QueryView, index: number, previous: Verdict | undefined): QueryView {
  const verdicts = { ...view.verdicts };
  if (previous === undefined) {
    delete verdicts[index];
  } else {
    verdicts[index] = previous;
  }
  return { ...view, verdicts };
}

export function renderedOrder(view: QueryView): number[] {
  // rendered order always equals response order
  return view.results.map((row) => row.segment);
}
