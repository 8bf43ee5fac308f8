/**
 * Thin fetch client for the session service. All methods throw ApiError
 * on non-2xx responses, carrying the service's detail message.
 */

import type { RemapSpec, SessionPayload } from "./state.js";

export class ApiError extends Error {
  status: number;
  detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.status = status;
    this.detail = detail;
  }
}

export interface Client {
  baseUrl: string;
  fetchImpl?: typeof fetch;
}

function doFetch(client: Client): typeof fetch {
  return client.fetchImpl ?? fetch;
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail: unknown = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: unknown };
      if (body && body.detail !== undefined) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export interface SessionConfig {
  stride?: number;
  initial_classes?: number;
  reduced_k?: number;
  tau?: number;
  seed?: number;
  fill?: "neutral" | "propagate";
}

export async function createSession(
  client: Client,
  target: Blob,
  reference: Blob,
  config?: SessionConfig,
): Promise<SessionPayload> {
  const form = new FormData();
  form.append("target", target, "target.png");
  form.append("reference", reference, "reference.png");
  if (config) form.append("config", JSON.stringify(config));
  const resp = await doFetch(client)(`${client.baseUrl}/api/session`, {
    method: "POST",
    body: form,
  });
  return asJson<SessionPayload>(resp);
}

export async function postRemap(
  client: Client,
  sessionId: string,
  spec: RemapSpec,
): Promise<SessionPayload> {
  const resp = await doFetch(client)(
    `${client.baseUrl}/api/session/${sessionId}/remap`,
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(spec),
    },
  );
  return asJson<SessionPayload>(resp);
}

export function artifactUrl(
  client: Client,
  sessionId: string,
  name: string,
): string {
  return `${client.baseUrl}/api/session/${sessionId}/artifact/${name}`;
}

export async function fetchArtifact(
  client: Client,
  sessionId: string,
  name: string,
): Promise<ArrayBuffer> {
  const resp = await doFetch(client)(artifactUrl(client, sessionId, name));
  if (!resp.ok) {
    throw new ApiError(resp.status, await resp.text());
  }
  return resp.arrayBuffer();
}

export async function deleteSession(
  client: Client,
  sessionId: string,
): Promise<void> {
  const resp = await doFetch(client)(
    `${client.baseUrl}/api/session/${sessionId}`,
    { method: "DELETE" },
  );
  await asJson<{ deleted: string }>(resp);
}
