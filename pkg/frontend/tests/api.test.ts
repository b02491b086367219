import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { labelMutation } from "../src/viewmodels.js";

interface RecordedCall {
  url: string;
  init: RequestInit | undefined;
}

function jsonResponse(data: unknown, status = 200, headers: Record<string, string> = {}): Response {
  return new Response(JSON.stringify(data), {
    status,
    headers: { "content-type": "application/json", ...headers },
  });
}

function stubFetch(
  respond: (url: string, init: RequestInit | undefined) => Response | Promise<Response>,
): RecordedCall[] {
  const calls: RecordedCall[] = [];
  vi.stubGlobal("fetch", (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    calls.push({ url, init });
    return Promise.resolve(respond(url, init));
  });
  return calls;
}

afterEach(() => {
  vi.unstubAllGlobals();
});

const OUTCOME = {
  applied: 3,
  conflicts_raised: [],
  labeled_count: 10,
  conflict_count: 0,
  iteration: 2,
};

describe("label mutations on the wire", () => {
  it("sends one POST /labels whose body carries exactly the selected ids", async () => {
    const calls = stubFetch(() => jsonResponse(OUTCOME));
    const client = new ApiClient();
    const selection = ["v4", "v9", "v1", "v4", "v7"];
    const outcome = await client.applyLabels(labelMutation(selection, "c1", "template:AB"));

    expect(outcome.applied).toBe(3);
    expect(calls).toHaveLength(1);
    expect(calls[0]!.url).toBe("/labels");
    expect(calls[0]!.init?.method).toBe("POST");
    const body = JSON.parse(String(calls[0]!.init?.body));
    expect(body.ids).toEqual(["v4", "v9", "v1", "v7"]);
    expect(body.class).toBe("c1");
    expect(body.source).toBe("template:AB");
  });

  it("rejects a second mutation while the first is still in flight", async () => {
    let release: (value: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    const calls = stubFetch(() => gate);
    const client = new ApiClient();

    const first = client.applyLabels({ ids: ["v1"], class: "c0", source: "manual" });
    expect(client.busy).toBe(true);
    await expect(client.retrain()).rejects.toMatchObject({
      name: "ApiError",
      status: 0,
      message: "a mutation is already in flight",
    });
    expect(calls).toHaveLength(1);

    release(jsonResponse(OUTCOME));
    await first;
    expect(client.busy).toBe(false);
  });

  it("lets reads overlap an in-flight mutation", async () => {
    let release: (value: Response) => void = () => {};
    const gate = new Promise<Response>((resolve) => {
      release = resolve;
    });
    const calls = stubFetch((url) => (url === "/labels" ? gate : jsonResponse({ templates: [] })));
    const client = new ApiClient();

    const mutation = client.applyLabels({ ids: ["v1"], class: "c0", source: "manual" });
    const read = await client.templates({ sort: "purity" });
    expect(read).toEqual({ templates: [] });

    release(jsonResponse(OUTCOME));
    await mutation;
    expect(calls.map((c) => c.url)).toEqual(["/labels", "/templates?sort=purity"]);
  });

  it("surfaces a busy service as an error without retrying", async () => {
    const calls = stubFetch(() =>
      jsonResponse(
        { error: "another mutation is in progress; retry shortly" },
        503,
        { "Retry-After": "1" },
      ),
    );
    const client = new ApiClient();

    let caught: unknown;
    try {
      await client.retrain(true);
    } catch (error) {
      caught = error;
    }
    expect(caught).toBeInstanceOf(ApiError);
    const apiError = caught as ApiError;
    expect(apiError.status).toBe(503);
    expect(apiError.retryAfter).toBe(1);
    expect(apiError.message).toBe("another mutation is in progress; retry shortly");
    expect(calls).toHaveLength(1);
    expect(client.busy).toBe(false);
  });

  it("recovers after a failed mutation instead of staying locked", async () => {
    let status = 409;
    const calls = stubFetch(() => {
      if (status === 409) {
        status = 200;
        return jsonResponse({ error: "threshold not reached" }, 409);
      }
      return jsonResponse(OUTCOME);
    });
    const client = new ApiClient();

    await expect(client.retrain()).rejects.toMatchObject({ status: 409 });
    const outcome = await client.applyLabels({ ids: ["v2"], class: "c1", source: "manual" });
    expect(outcome.iteration).toBe(2);
    expect(calls).toHaveLength(2);
  });
});

describe("request construction", () => {
  it("drops undefined query parameters and encodes the rest", async () => {
    const calls = stubFetch(() => jsonResponse({ templates: [] }));
    const client = new ApiClient("http://svc:8700/");
    await client.templates({ sort: "purity", order: "desc", min_support: 4, search: undefined });
    expect(calls[0]!.url).toBe("http://svc:8700/templates?sort=purity&order=desc&min_support=4");
  });

  it("escapes template symbols in cluster paths", async () => {
    const calls = stubFetch(() =>
      jsonResponse({ seed_template: "A B", alpha: 0.8, lam: 2, total_dl: 1, clusters: [] }),
    );
    const client = new ApiClient();
    await client.clusters("A B", { alpha: 0.8 });
    expect(calls[0]!.url).toBe("/templates/A%20B/clusters?alpha=0.8");
  });

  it("prefers the detail field from FastAPI error bodies", async () => {
    stubFetch(() => jsonResponse({ detail: "template not found" }, 404));
    const client = new ApiClient();
    await expect(client.clusters("ZZZ")).rejects.toMatchObject({
      status: 404,
      message: "template not found",
    });
  });
});
