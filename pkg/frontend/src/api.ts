/** Typed REST client for the fhirlit service. Configuration is the base URL. */

import type {
  CatalogRow,
  PatientHandle,
  ResourceInterpretation,
  ResourceSummary,
  SessionEvent,
  SessionHandle,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function raise(response: Response): Promise<never> {
  let code = "error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body === "object") {
      code = body.code ?? code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the status-line message
  }
  throw new ApiError(response.status, code, message);
}

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    await raise(response);
  }
  return (await response.json()) as T;
}

export class FhirlitApi {
  constructor(public baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  /** Upload a FHIR bundle document (raw JSON text). */
  async uploadBundle(body: string): Promise<PatientHandle> {
    const response = await fetch(this.url("/patients"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    return expectJson<PatientHandle>(response);
  }

  async listPatients(): Promise<PatientHandle[]> {
    return expectJson(await fetch(this.url("/patients")));
  }

  async listResources(patientId: string): Promise<CatalogRow[]> {
    return expectJson(await fetch(this.url(`/patients/${patientId}/resources`)));
  }

  async fetchSummary(
    patientId: string,
    resourceId: string,
    locale: string,
  ): Promise<ResourceSummary> {
    const query = new URLSearchParams({ locale });
    return expectJson(
      await fetch(this.url(`/patients/${patientId}/resources/${resourceId}/summary?${query}`)),
    );
  }

  async fetchInterpretation(
    patientId: string,
    resourceId: string,
    locale: string,
  ): Promise<ResourceInterpretation> {
    const query = new URLSearchParams({ locale });
    return expectJson(
      await fetch(
        this.url(`/patients/${patientId}/resources/${resourceId}/interpretation?${query}`),
      ),
    );
  }

  async createSession(patientId: string, locale: string): Promise<SessionHandle> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ patient_id: patientId, locale }),
    });
    return expectJson<SessionHandle>(response);
  }

  async clearContext(sessionId: string): Promise<void> {
    const response = await fetch(this.url(`/sessions/${sessionId}/context`), { method: "DELETE" });
    if (!response.ok) {
      await raise(response);
    }
  }

  /** Replay events after a sequence number (reconnect support). */
  async replayEvents(sessionId: string, after: number): Promise<SessionEvent[]> {
    const query = new URLSearchParams({ after: String(after) });
    return expectJson(await fetch(this.url(`/sessions/${sessionId}/events?${query}`)));
  }

  /** POST a chat message; the response body is an SSE stream. */
  async openMessageStream(sessionId: string, text: string): Promise<Response> {
    const response = await fetch(this.url(`/sessions/${sessionId}/messages`), {
      method: "POST",
      headers: { "Content-Type": "application/json", Accept: "text/event-stream" },
      body: JSON.stringify({ text }),
    });
    if (!response.ok) {
      await raise(response);
    }
    return response;
  }
}
