import type { DistrictResponse, GenerateResponse, LayoutCollection } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public error: string,
    public detail: string,
  ) {
    super(`${error}: ${detail}`);
  }
}

async function raise(res: Response): Promise<never> {
  let error = "http_error";
  let detail = res.statusText;
  try {
    const body = await res.json();
    error = body.error ?? error;
    detail = body.detail ?? detail;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiError(res.status, error, String(detail));
}

/** Typed client over the what-if service; every UI change round-trips here. */
export class ApiClient {
  constructor(private baseUrl: string = "") {}

  async createDistrict(blocksGeojson: string): Promise<DistrictResponse> {
    const res = await fetch(`${this.baseUrl}/districts`, {
      method: "POST",
      headers: { "Content-Type": "application/geo+json" },
      body: blocksGeojson,
    });
    if (res.status !== 201) await raise(res);
    return res.json();
  }

  async getBlocks(districtId: string): Promise<DistrictResponse> {
    const res = await fetch(`${this.baseUrl}/districts/${districtId}/blocks`);
    if (!res.ok) await raise(res);
    return res.json();
  }

  async patchLandUse(districtId: string, blockId: string, landUse: number) {
    const res = await fetch(
      `${this.baseUrl}/districts/${districtId}/blocks/${encodeURIComponent(blockId)}`,
      {
        method: "PATCH",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ land_use: landUse }),
      },
    );
    if (!res.ok) await raise(res);
    return res.json();
  }

  async generate(
    districtId: string,
    blockIds?: string[],
    seed?: number,
  ): Promise<GenerateResponse> {
    const body: { block_ids?: string[]; seed?: number } = {};
    if (blockIds !== undefined) body.block_ids = blockIds;
    if (seed !== undefined) body.seed = seed;
    const res = await fetch(`${this.baseUrl}/districts/${districtId}/generate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) await raise(res);
    return res.json();
  }

  async getLayout(
    districtId: string,
  ): Promise<{ layout: LayoutCollection; etag: string }> {
    const res = await fetch(`${this.baseUrl}/districts/${districtId}/layout`);
    if (!res.ok) await raise(res);
    const etag = res.headers.get("ETag") ?? "";
    return { layout: await res.json(), etag };
  }
}
