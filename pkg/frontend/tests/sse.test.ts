import { describe, expect, it } from "vitest";

import { SseParser, consumeEventStream, frameToSessionEvent } from "../src/sse.js";
import type { SessionEvent } from "../src/types.js";

function frame(kind: string, payload: string, timestamp: number): string {
  const data = JSON.stringify({ kind, payload, timestamp });
  return `id: ${timestamp}\nevent: ${kind}\ndata: ${data}\n\n`;
}

describe("SseParser", () => {
  it("parses complete frames", () => {
    const parser = new SseParser();
    const frames = parser.push(frame("assistant_chunk", "Hel", 4));
    expect(frames).toHaveLength(1);
    expect(frames[0].id).toBe("4");
    expect(frames[0].event).toBe("assistant_chunk");
    expect(JSON.parse(frames[0].data).payload).toBe("Hel");
  });

  it("reassembles frames split across arbitrary chunk boundaries", () => {
    const whole = frame("assistant_chunk", "one ", 1) + frame("assistant_done", "one two", 2);
    for (const cut of [1, 5, 17, whole.length - 3]) {
      const parser = new SseParser();
      const collected = [
        ...parser.push(whole.slice(0, cut)),
        ...parser.push(whole.slice(cut)),
      ];
      expect(collected).toHaveLength(2);
      expect(collected[1].event).toBe("assistant_done");
    }
  });

  it("handles crlf line endings", () => {
    const parser = new SseParser();
    const frames = parser.push('event: x\r\ndata: {"kind":"error","payload":"p","timestamp":0}\r\n\r\n');
    expect(frames).toHaveLength(1);
  });

  it("ignores malformed data frames", () => {
    expect(frameToSessionEvent({ id: null, event: "x", data: "not-json" })).toBeNull();
    expect(frameToSessionEvent({ id: null, event: null, data: "" })).toBeNull();
  });
});

function streamResponse(body: string, chunkSize = 7): Response {
  const encoder = new TextEncoder();
  let offset = 0;
  const stream = new ReadableStream<Uint8Array>({
    pull(controller) {
      if (offset >= body.length) {
        controller.close();
        return;
      }
      controller.enqueue(encoder.encode(body.slice(offset, offset + chunkSize)));
      offset += chunkSize;
    },
  });
  return new Response(stream, { headers: { "Content-Type": "text/event-stream" } });
}

describe("consumeEventStream", () => {
  it("delivers events in order and stops at the terminal event", async () => {
    const body =
      frame("user_message", "q", 1) +
      frame("assistant_chunk", "Hel", 2) +
      frame("assistant_chunk", "lo", 3) +
      frame("assistant_done", "Hello", 4) +
      frame("user_message", "should never arrive", 5);
    const seen: SessionEvent[] = [];
    const lastId = await consumeEventStream(streamResponse(body), (event) => seen.push(event));
    expect(seen.map((e) => e.kind)).toEqual([
      "user_message",
      "assistant_chunk",
      "assistant_chunk",
      "assistant_done",
    ]);
    expect(seen.map((e) => e.timestamp)).toEqual([1, 2, 3, 4]);
    expect(lastId).toBe(4);
  });

  it("treats error as terminal", async () => {
    const body = frame("user_message", "q", 1) + frame("error", '{"code":"transport"}', 2);
    const kinds: string[] = [];
    await consumeEventStream(streamResponse(body), (event) => kinds.push(event.kind));
    expect(kinds).toEqual(["user_message", "error"]);
  });
});
