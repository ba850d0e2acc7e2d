/** Incremental server-sent-events parsing over a fetch body stream.
 *
 * EventSource cannot POST, so the chat stream is read off the response body
 * directly. The parser is incremental (frames may split across network
 * chunks) and surfaces `id:` fields so a dropped stream can resume from the
 * last seen event via the replay endpoint.
 */

import type { SessionEvent } from "./types.js";

export type SseFrame = {
  id: string | null;
  event: string | null;
  data: string;
};

/** Stateful parser: feed raw text chunks, collect completed frames. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseFrame[] {
    this.buffer += chunk.replace(/\r\n/g, "\n");
    const frames: SseFrame[] = [];
    let boundary = this.buffer.indexOf("\n\n");
    while (boundary >= 0) {
      const block = this.buffer.slice(0, boundary);
      this.buffer = this.buffer.slice(boundary + 2);
      const frame = parseBlock(block);
      if (frame) {
        frames.push(frame);
      }
      boundary = this.buffer.indexOf("\n\n");
    }
    return frames;
  }
}

function parseBlock(block: string): SseFrame | null {
  const frame: SseFrame = { id: null, event: null, data: "" };
  const dataLines: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("id:")) {
      frame.id = line.slice(3).trim();
    } else if (line.startsWith("event:")) {
      frame.event = line.slice(6).trim();
    } else if (line.startsWith("data:")) {
      dataLines.push(line.slice(5).trimStart());
    }
  }
  if (frame.event === null && dataLines.length === 0) {
    return null;
  }
  frame.data = dataLines.join("\n");
  return frame;
}

export function frameToSessionEvent(frame: SseFrame): SessionEvent | null {
  if (!frame.data) {
    return null;
  }
  try {
    const parsed = JSON.parse(frame.data);
    if (parsed && typeof parsed.kind === "string") {
      return parsed as SessionEvent;
    }
  } catch {
    // Ignore malformed frames; the replay endpoint can fill gaps.
  }
  return null;
}

export const TERMINAL_KINDS = new Set(["assistant_done", "error"]);

/**
 * Consume a message stream, invoking `onEvent` per session event in order.
 * Resolves once the terminal event (assistant_done or error) arrives.
 * Returns the last seen event id, the resume cursor for reconnects.
 */
export async function consumeEventStream(
  response: Response,
  onEvent: (event: SessionEvent) => void,
): Promise<number> {
  if (!response.body) {
    throw new Error("response has no body stream");
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  const parser = new SseParser();
  let lastId = -1;
  try {
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
        const event = frameToSessionEvent(frame);
        if (!event) {
          continue;
        }
        lastId = event.timestamp;
        onEvent(event);
        if (TERMINAL_KINDS.has(event.kind)) {
          return lastId;
        }
      }
    }
  } finally {
    reader.releaseLock();
  }
  return lastId;
}
