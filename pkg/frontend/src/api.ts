/** Typed client for the annotation service; the UI's only network access. */
import type {
  DocPayload,
  DocSummary,
  PretagResponse,
  SaveBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function check(response: Response): Promise<Response> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return response;
}

export class Api {
  constructor(
    private base = "",
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await check(
      await this.fetchImpl(`${this.base}${path}`, init),
    );
    return (await response.json()) as T;
  }

  async listDocs(annotator: string): Promise<DocSummary[]> {
    const body = await this.json<{ docs: DocSummary[] }>(
      `/api/docs?annotator=${encodeURIComponent(annotator)}`,
    );
    return body.docs;
  }

  getDoc(docId: string, annotator: string): Promise<DocPayload> {
    return this.json(
      `/api/docs/${encodeURIComponent(docId)}` +
        `?annotator=${encodeURIComponent(annotator)}`,
    );
  }

  async saveSpans(
    docId: string,
    body: SaveBody,
  ): Promise<{ revision: number }> {
    return this.json(`/api/docs/${encodeURIComponent(docId)}/spans`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  pretag(
    docId: string,
    ensembleId: string,
    annotator: string,
  ): Promise<PretagResponse> {
    return this.json(`/api/docs/${encodeURIComponent(docId)}/pretag`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ensemble_id: ensembleId, annotator }),
    });
  }

  async exportBio(setName = "default", annotator?: string): Promise<string> {
    let path = `/api/export/bio?set=${encodeURIComponent(setName)}`;
    if (annotator) path += `&annotator=${encodeURIComponent(annotator)}`;
    const response = await check(await this.fetchImpl(`${this.base}${path}`));
    return response.text();
  }
}
