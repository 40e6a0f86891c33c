// DOM wiring for the review console: pick an interview, ask a question
// (free text or questionnaire pick), inspect the ranked windows on a
// timeline, play the audio region when available, and record verdicts.

import { ApiClient, ApiError, QuerySequencer } from "./api.js";
import type { InterviewInfo, QuestionEntry, Verdict } from "./api.js";
import {
  QueryView,
  applyError,
  applyResponse,
  beginQuery,
  canSubmit,
  clearVerdict,
  emptyView,
  selectResult,
  setVerdict,
} from "./model.js";
import { RegionPlayer } from "./player.js";
import { barGeometry, formatTime, markerGeometry } from "./timeline.js";

const api = new ApiClient("");
const sequencer = new QuerySequencer();

interface AppState {
  interviews: InterviewInfo[];
  questionnaire: QuestionEntry[];
  view: QueryView;
}

const state: AppState = { interviews: [], questionnaire: [], view: emptyView("") };

const el = {
  interview: document.getElementById("interview") as HTMLSelectElement,
  question: document.getElementById("question") as HTMLSelectElement,
  text: document.getElementById("query-text") as HTMLInputElement,
  k: document.getElementById("k") as HTMLInputElement,
  submit: document.getElementById("submit") as HTMLButtonElement,
  banner: document.getElementById("banner") as HTMLDivElement,
  clampNote: document.getElementById("clamp-note") as HTMLDivElement,
  results: document.getElementById("results") as HTMLDivElement,
  timeline: document.getElementById("timeline") as HTMLDivElement,
  audio: document.getElementById("audio") as HTMLAudioElement,
};

const player = new RegionPlayer(el.audio);

function currentInterview(): InterviewInfo | undefined {
  return state.interviews.find((iv) => iv.id === state.view.interviewId);
}

function setView(view: QueryView): void {
  state.view = view;
  render();
}

async function runQuery(): Promise<void> {
  if (!canSubmit(state.view)) {
    return;
  }
  player.stop();
  const seq = sequencer.next();
  setView(beginQuery(state.view));
  const picked = state.questionnaire.find((q) => q.text === state.view.queryText.trim());
  try {
    const response = await api.query({
      interview_id: state.view.interviewId,
      question_id: picked ? picked.id : null,
      text: picked ? null : state.view.queryText.trim(),
      k: state.view.k,
    });
    if (!sequencer.isCurrent(seq)) {
      return; // superseded by a newer query
    }
    setView(applyResponse(state.view, response));
  } catch (err) {
    if (!sequencer.isCurrent(seq)) {
      return;
    }
    const message = err instanceof ApiError ? err.message : `service unreachable: ${err}`;
    setView(applyError(state.view, message));
  }
}

async function sendVerdict(index: number, verdict: Verdict): Promise<void> {
  const row = state.view.results[index];
  if (!row) {
    return;
  }
  const previous = state.view.verdicts[index];
  setView(setVerdict(state.view, index, verdict)); // optimistic
  try {
    await api.feedback(state.view.interviewId, state.view.queryText.trim(), row.segment, verdict);
  } catch {
    setView(clearVerdict(state.view, index, previous)); // rollback
    flashBanner("feedback not recorded; try again");
  }
}

function flashBanner(message: string): void {
  el.banner.textContent = message;
  el.banner.hidden = false;
  setTimeout(() => {
    el.banner.hidden = true;
  }, 4000);
}

function render(): void {
  const view = state.view;
  el.submit.disabled = !canSubmit(view);
  el.banner.hidden = view.error === null;
  el.banner.textContent = view.error ?? "";
  el.clampNote.hidden = !view.clamped;
  el.clampNote.textContent = view.clamped
    ? `fewer than ${view.k} windows exist; showing all ${view.results.length}`
    : "";
  renderResults();
  renderTimeline();
}

function renderResults(): void {
  const view = state.view;
  const interview = currentInterview();
  el.results.replaceChildren();
  view.results.forEach((row, index) => {
    const item = document.createElement("div");
    item.className = "result-row" + (view.selected === index ? " selected" : "");

    const rank = document.createElement("span");
    rank.className = "rank";
    rank.textContent = `#${index + 1}`;

    const span = document.createElement("span");
    span.className = "span";
    span.textContent = `${formatTime(row.start_s)} – ${formatTime(row.end_s)}`;

    const score = document.createElement("span");
    score.className = "score";
    score.textContent = `score ${row.score.toFixed(3)}`;

    const best = document.createElement("span");
    best.className = "best";
    best.textContent = `best chunk ${row.best_chunk} @ ${formatTime(row.best_chunk_start_s)}`;

    const playButton = document.createElement("button");
    playButton.textContent = "play";
    const hasAudio = Boolean(interview?.audio_uri);
    playButton.disabled = !hasAudio;
    if (!hasAudio) {
      playButton.title = "no audio file for this interview";
    }
    playButton.addEventListener("click", (event) => {
      event.stopPropagation();
      player.play({ start_s: row.start_s, end_s: row.end_s });
    });

    const verdictBox = document.createElement("span");
    verdictBox.className = "verdicts";
    (["correct", "incorrect"] as const).forEach((verdict) => {
      const button = document.createElement("button");
      button.textContent = verdict;
      button.className = view.verdicts[index] === verdict ? `verdict ${verdict} on` : "verdict";
      button.addEventListener("click", (event) => {
        event.stopPropagation();
        void sendVerdict(index, verdict);
      });
      verdictBox.appendChild(button);
    });

    item.append(rank, span, score, best, playButton, verdictBox);
    item.addEventListener("click", () => setView(selectResult(state.view, index)));
    el.results.appendChild(item);
  });
}

function renderTimeline(): void {
  const view = state.view;
  const interview = currentInterview();
  el.timeline.replaceChildren();
  if (!interview || view.results.length === 0) {
    return;
  }
  const width = el.timeline.clientWidth || 800;
  view.results.forEach((row, index) => {
    const bar = document.createElement("div");
    bar.className = "bar" + (view.selected === index ? " selected" : "");
    const geom = barGeometry(row, interview.duration_s, width);
    bar.style.left = `${geom.leftPx}px`;
    bar.style.width = `${geom.widthPx}px`;
    bar.title = `#${index + 1} ${formatTime(row.start_s)}–${formatTime(row.end_s)}`;
    bar.addEventListener("click", () => setView(selectResult(state.view, index)));
    el.timeline.appendChild(bar);

    const marker = document.createElement("div");
    marker.className = "marker";
    marker.style.left = `${markerGeometry(row.best_chunk_start_s, interview.duration_s, width)}px`;
    el.timeline.appendChild(marker);
  });
}

function fillInterviewPicker(): void {
  el.interview.replaceChildren();
  for (const interview of state.interviews) {
    const option = document.createElement("option");
    option.value = interview.id;
    option.textContent = `${interview.id} (${interview.n_segments} windows)`;
    el.interview.appendChild(option);
  }
}

function fillQuestionPicker(): void {
  el.question.replaceChildren(new Option("— free text —", ""));
  for (const entry of state.questionnaire) {
    el.question.appendChild(new Option(entry.text, entry.id));
  }
}

function wire(): void {
  el.interview.addEventListener("change", () => {
    player.stop();
    setView(emptyView(el.interview.value, state.view.k));
    const interview = currentInterview();
    if (interview?.audio_uri) {
      el.audio.src = interview.audio_uri;
    }
  });
  el.question.addEventListener("change", () => {
    const entry = state.questionnaire.find((q) => q.id === el.question.value);
    if (entry) {
      el.text.value = entry.text;
    }
    setView({ ...state.view, queryText: el.text.value });
  });
  el.text.addEventListener("input", () => setView({ ...state.view, queryText: el.text.value }));
  el.k.addEventListener("change", () => {
    const k = Math.max(1, Number(el.k.value) || 5);
    setView({ ...state.view, k });
  });
  el.submit.addEventListener("click", () => void runQuery());
  el.text.addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      void runQuery();
    }
  });
}

async function boot(): Promise<void> {
  wire();
  try {
    state.interviews = await api.interviews();
    state.questionnaire = await api.questionnaire();
  } catch (err) {
    flashBanner(`cannot reach the query service: ${err}`);
    return;
  }
  fillInterviewPicker();
  fillQuestionPicker();
  const first = state.interviews[0];
  if (first) {
    el.interview.value = first.id;
    setView(emptyView(first.id, state.view.k));
    if (first.audio_uri) {
      el.audio.src = first.audio_uri;
    }
  }
  render();
}

void boot();
