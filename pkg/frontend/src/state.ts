/** Session store: one event-stream consumer wired to the pure reducer.
 *
 * Holds the invariants the views rely on: at most one message in flight,
 * items appended strictly in server event order, and reconnect support via
 * the replay endpoint and the last seen event id.
 */

import { FhirlitApi } from "./api.js";
import { ChatState, initialChatState, reduceEvent } from "./events.js";
import { consumeEventStream } from "./sse.js";
import type { Locale, PatientHandle, SessionEvent } from "./types.js";

export type SessionView = {
  patient: PatientHandle | null;
  sessionId: string | null;
  locale: Locale;
  chat: ChatState;
};

export class SessionStore {
  private chat: ChatState = initialChatState();
  private listeners: Array<(view: SessionView) => void> = [];
  sessionId: string | null = null;
  patient: PatientHandle | null = null;
  locale: Locale = "en";

  constructor(private api: FhirlitApi) {}

  get view(): SessionView {
    return {
      patient: this.patient,
      sessionId: this.sessionId,
      locale: this.locale,
      chat: this.chat,
    };
  }

  subscribe(listener: (view: SessionView) => void): () => void {
    this.listeners.push(listener);
    listener(this.view);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this.view);
    }
  }

  private apply(event: SessionEvent): void {
    this.chat = reduceEvent(this.chat, event);
    this.notify();
  }

  async openSession(patient: PatientHandle, locale: Locale): Promise<void> {
    const handle = await this.api.createSession(patient.patient_id, locale);
    this.patient = patient;
    this.sessionId = handle.session_id;
    this.locale = locale;
    this.chat = initialChatState();
    this.notify();
  }

  /** Send one message; rejects while another message is streaming. */
  async send(text: string): Promise<void> {
    if (!this.sessionId) {
      throw new Error("no open session");
    }
    if (this.chat.streaming) {
      throw new Error("a message is already in flight");
    }
    const response = await this.api.openMessageStream(this.sessionId, text);
    await consumeEventStream(response, (event) => this.apply(event));
  }

  /** Clear the server context and empty the visible transcript. */
  async clearContext(): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    await this.api.clearContext(this.sessionId);
    this.chat = initialChatState();
    this.notify();
  }

  /** Re-fetch events missed after a dropped stream (resume-from-last-id). */
  async resume(): Promise<void> {
    if (!this.sessionId) {
      return;
    }
    const missed = await this.api.replayEvents(this.sessionId, this.chat.lastEventId);
    for (const event of missed) {
      this.chat = reduceEvent(this.chat, event);
    }
    if (missed.length > 0) {
      this.notify();
    }
  }
}
