import { createServer, type Server } from "node:http";
import type { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, QuerySequencer } from "../src/api.js";

// Minimal fixture service with the same endpoint shapes as the real one;
// feedback lines land in an in-memory JSONL log.
const feedbackLog: string[] = [];
let server: Server;
let base = "";

const fixtureResults = {
  results: [
    { segment: 2, score: 8.25, start_s: 60.0, end_s: 88.4, best_chunk: 31, best_chunk_start_s: 63.1 },
    { segment: 0, score: 7.5, start_s: 0.0, end_s: 29.0, best_chunk: 3, best_chunk_start_s: 6.4 },
  ],
  clamped: true,
};

beforeAll(async () => {
  server = createServer((req, res) => {
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      const send = (status: number, body: unknown) => {
        res.writeHead(status, { "Content-Type": "application/json" });
        res.end(JSON.stringify(body));
      };
      if (req.method === "GET" && req.url === "/interviews") {
        send(200, {
          interviews: [
            { id: "iv-1", n_chunks: 140, n_segments: 10, audio_uri: null, duration_s: 280.0 },
          ],
        });
      } else if (req.method === "GET" && req.url === "/questionnaire.jsonl") {
        res.writeHead(200, { "Content-Type": "application/jsonl" });
        res.end('{"id": "q1", "text": "first?", "position": 0}\n{"id": "q2", "text": "second?", "position": 1}\n');
      } else if (req.method === "POST" && req.url === "/query") {
        const body = JSON.parse(Buffer.concat(chunks).toString());
        if (body.question_id === "missing") {
          send(404, { error: "unknown question_id 'missing'" });
        } else {
          send(200, fixtureResults);
        }
      } else if (req.method === "POST" && req.url === "/feedback") {
        const raw = Buffer.concat(chunks).toString();
        const body = JSON.parse(raw);
        if (body.verdict !== "correct" && body.verdict !== "incorrect") {
          send(400, { error: "bad verdict" });
        } else {
          feedbackLog.push(raw);
          send(200, { ok: true });
        }
      } else {
        send(404, { error: "not found" });
      }
    });
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  base = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(() => {
  server.close();
});

describe("api client against the fixture service", () => {
  it("lists interviews", async () => {
    const api = new ApiClient(base);
    const interviews = await api.interviews();
    expect(interviews).toHaveLength(1);
    expect(interviews[0]!.duration_s).toBe(280.0);
  });

  it("query returns rows in server order with the clamp flag", async () => {
    const api = new ApiClient(base);
    const response = await api.query({ interview_id: "iv-1", text: "first?", k: 5 });
    expect(response.clamped).toBe(true);
    expect(response.results.map((r) => r.segment)).toEqual([2, 0]);
  });

  it("surfaces service errors with status codes", async () => {
    const api = new ApiClient(base);
    await expect(
      api.query({ interview_id: "iv-1", question_id: "missing", k: 3 }),
    ).rejects.toThrowError(ApiError);
    await expect(
      api.query({ interview_id: "iv-1", question_id: "missing", k: 3 }),
    ).rejects.toMatchObject({ status: 404 });
  });

  it("verdict POST reaches the feedback log verbatim", async () => {
    const api = new ApiClient(base);
    const before = feedbackLog.length;
    await api.feedback("iv-1", "where is the mobile question?", 2, "correct");
    expect(feedbackLog.length).toBe(before + 1);
    const entry = JSON.parse(feedbackLog.at(-1)!);
    expect(entry).toEqual({
      interview_id: "iv-1",
      question: "where is the mobile question?",
      segment: 2,
      verdict: "correct",
    });
  });

  it("parses the questionnaire jsonl", async () => {
    const api = new ApiClient(base);
    const entries = await api.questionnaire();
    expect(entries.map((e) => e.id)).toEqual(["q1", "q2"]);
  });
});

describe("query sequencing", () => {
  it("discards responses of superseded queries", () => {
    const sequencer = new QuerySequencer();
    const first = sequencer.next();
    const second = sequencer.next();
    expect(sequencer.isCurrent(first)).toBe(false); // stale: must be dropped
    expect(sequencer.isCurrent(second)).toBe(true);
  });

  it("out-of-order completion keeps only the newest", async () => {
    // two in-flight queries finishing in reverse order: the late response
    // for the old sequence number must not overwrite the fresh one
    const sequencer = new QuerySequencer();
    const applied: number[] = [];
    const arrival: Array<{ seq: number; delayMs: number }> = [
      { seq: sequencer.next(), delayMs: 30 },
      { seq: sequencer.next(), delayMs: 5 },
    ];
    await Promise.all(
      arrival.map(({ seq, delayMs }) =>
        new Promise<void>((resolve) =>
          setTimeout(() => {
            if (sequencer.isCurrent(seq)) {
              applied.push(seq);
            }
            resolve();
          }, delayMs),
        ),
      ),
    );
    expect(applied).toEqual([arrival[1]!.seq]);
  });
});
