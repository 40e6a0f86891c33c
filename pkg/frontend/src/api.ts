// Typed client for the query service. The console consumes exactly these
// endpoints: GET /interviews, POST /query, POST /feedback,
// GET /questionnaire.jsonl.

export interface InterviewInfo {
  id: string;
  n_chunks: number;
  n_segments: number;
  audio_uri: string | null;
  duration_s: number;
}

export interface ResultRow {
  segment: number;
  score: number;
  start_s: number;
  end_s: number;
  best_chunk: number;
  best_chunk_start_s: number;
}

export interface QueryResponse {
  results: ResultRow[];
  clamped: boolean;
}

export interface QuestionEntry {
  id: string;
  text: string;
  position: number;
}

export type Verdict = "correct" | "incorrect";

export interface QueryRequest {
  interview_id: string;
  question_id?: string | null;
  text?: string | null;
  k: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson(resp: Response): Promise<unknown> {
  const body = (await resp.json().catch(() => ({}))) as { error?: string };
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? `HTTP ${resp.status}`);
  }
  return body;
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async interviews(): Promise<InterviewInfo[]> {
    const body = (await asJson(await this.fetchImpl(`${this.base}/interviews`))) as {
      interviews: InterviewInfo[];
    };
    return body.interviews;
  }

  async query(request: QueryRequest): Promise<QueryResponse> {
    const resp = await this.fetchImpl(`${this.base}/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    return (await asJson(resp)) as QueryResponse;
  }

  async feedback(
    interviewId: string,
    question: string,
    segment: number,
    verdict: Verdict,
  ): Promise<void> {
    const resp = await this.fetchImpl(`${this.base}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ interview_id: interviewId, question, segment, verdict }),
    });
    await asJson(resp);
  }

  async questionnaire(): Promise<QuestionEntry[]> {
    const resp = await this.fetchImpl(`${this.base}/questionnaire.jsonl`);
    if (!resp.ok) {
      throw new ApiError(resp.status, `HTTP ${resp.status}`);
    }
    const text = await resp.text();
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as QuestionEntry);
  }
}

// At most one query is in flight; responses that no longer match the
// newest sequence number are discarded instead of overwriting fresh state.
export class QuerySequencer {
  private seq = 0;

  next(): number {
    this.seq += 1;
    return this.seq;
  }

  isCurrent(seq: number): boolean {
    return seq === this.seq;
  }
}
