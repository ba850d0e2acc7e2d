import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, FhirlitApi } from "../src/api.js";

const api = new FhirlitApi("http://service.test");

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("FhirlitApi", () => {
  it("uploads bundles and returns the handle", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ patient_id: "p1", demographics: {}, catalog_size: 3 }),
    );
    vi.stubGlobal("fetch", fetchMock);
    const handle = await api.uploadBundle('{"resourceType":"Bundle","entry":[]}');
    expect(handle.patient_id).toBe("p1");
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("http://service.test/patients");
    expect(init.method).toBe("POST");
  });

  it("surfaces the server's ApiError code and message", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(
        jsonResponse({ code: "malformed_document", message: "not JSON" }, 400),
      ),
    );
    try {
      await api.uploadBundle("not-json");
      expect.unreachable("upload should have thrown");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(400);
      expect((error as ApiError).code).toBe("malformed_document");
      expect((error as ApiError).message).toBe("not JSON");
    }
  });

  it("falls back to the status line for non-JSON error bodies", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(new Response("<html>boom</html>", { status: 500 })),
    );
    await expect(api.listPatients()).rejects.toMatchObject({ status: 500, code: "error" });
  });

  it("passes the locale through to summary requests", async () => {
    const fetchMock = vi.fn().mockResolvedValue(
      jsonResponse({ rendered: "r", summary_text: "s", word_count: 1, locale: "de" }),
    );
    vi.stubGlobal("fetch", fetchMock);
    await api.fetchSummary("p1", "r1", "de");
    expect(fetchMock.mock.calls[0][0]).toBe(
      "http://service.test/patients/p1/resources/r1/summary?locale=de",
    );
  });

  it("requests replay events after a sequence number", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse([]));
    vi.stubGlobal("fetch", fetchMock);
    await api.replayEvents("s1", 17);
    expect(fetchMock.mock.calls[0][0]).toBe("http://service.test/sessions/s1/events?after=17");
  });
});
