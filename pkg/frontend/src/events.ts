/** Pure reduction of server session events into the visible chat state.
 *
 * Everything the transcript shows originates in a server event: user bubbles
 * come from user_message events, assistant text from chunks finalized by
 * assistant_done, and tool activity renders as transient status chips, never
 * as chat bubbles and never with raw payload JSON.
 */

import type { SessionEvent } from "./types.js";

export type ChatItem =
  | { kind: "user"; text: string }
  | { kind: "assistant"; text: string; streaming: boolean }
  | { kind: "tool"; label: string; pending: boolean };

export type ChatState = {
  items: ChatItem[];
  streaming: boolean;
  errorBanner: string | null;
  lastEventId: number;
};

export function initialChatState(): ChatState {
  return { items: [], streaming: false, errorBanner: null, lastEventId: -1 };
}

/** Status-chip label for a tool_call event: "looking up: <identifier>". */
export function toolCallLabel(payload: string): string {
  try {
    const parsed = JSON.parse(payload);
    const names: unknown = parsed?.arguments?.names;
    if (Array.isArray(names) && names.length > 0) {
      return `looking up: ${names.join(", ")}`;
    }
  } catch {
    // fall through to the generic label
  }
  return "looking up records";
}

function lastStreamingAssistant(items: ChatItem[]): ChatItem | null {
  const last = items[items.length - 1];
  return last && last.kind === "assistant" && last.streaming ? last : null;
}

/** Apply one server event. Items are appended strictly in event order. */
export function reduceEvent(state: ChatState, event: SessionEvent): ChatState {
  const items = [...state.items];
  let { streaming, errorBanner } = state;

  switch (event.kind) {
    case "user_message":
      items.push({ kind: "user", text: event.payload });
      streaming = true;
      errorBanner = null;
      break;
    case "tool_call":
      items.push({ kind: "tool", label: toolCallLabel(event.payload), pending: true });
      break;
    case "tool_result": {
      // Resolve the oldest pending chip; the payload JSON itself stays out
      // of the visible transcript.
      const pending = items.findIndex((item) => item.kind === "tool" && item.pending);
      if (pending >= 0) {
        items[pending] = { ...(items[pending] as ChatItem & { kind: "tool" }), pending: false };
      }
      break;
    }
    case "assistant_chunk": {
      const open = lastStreamingAssistant(items);
      if (open && open.kind === "assistant") {
        items[items.length - 1] = { ...open, text: open.text + event.payload };
      } else {
        items.push({ kind: "assistant", text: event.payload, streaming: true });
      }
      break;
    }
    case "assistant_done": {
      const open = lastStreamingAssistant(items);
      // The done payload is authoritative for the final text.
      if (open) {
        items[items.length - 1] = { kind: "assistant", text: event.payload, streaming: false };
      } else {
        items.push({ kind: "assistant", text: event.payload, streaming: false });
      }
      streaming = false;
      break;
    }
    case "cleared":
      return { items: [], streaming: false, errorBanner: null, lastEventId: event.timestamp };
    case "error": {
      let message = event.payload;
      try {
        const parsed = JSON.parse(event.payload);
        message = parsed.message ?? parsed.code ?? event.payload;
      } catch {
        // plain-text error payload
      }
      errorBanner = message;
      streaming = false;
      break;
    }
  }
  return { items, streaming, errorBanner, lastEventId: event.timestamp };
}

export function reduceAll(state: ChatState, events: SessionEvent[]): ChatState {
  return events.reduce(reduceEvent, state);
}

/** The rendered transcript text of every assistant bubble, in order. */
export function assistantTexts(state: ChatState): string[] {
  return state.items.filter((i) => i.kind === "assistant").map((i) => (i as any).text);
}
