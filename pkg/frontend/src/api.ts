// Gateway API client: request building, bounds checking, response parsing.

export const DEFAULT_ALPHA = 0.8;
export const DEFAULT_TOPN = 3;
export const DEFAULT_REPOSITORY = "handbook";

export type MedicRequest = {
  query: string;
  alpha: number;
  topn: number;
  repository?: string;
  sentences?: string;
};

export type ResultItem = {
  sentence: string;
  score: number;
  context_before: string;
  context_after: string;
  source: { repository: string | null; index: number };
};

export type MedicResponse = {
  query: string;
  alpha: number;
  topn: number;
  source: { kind: string; repository: string | null };
  items: ResultItem[];
  scorers: Record<string, string>;
};

export type ApiError = { error: { code: string; message: string } };

export function validateRequest(req: MedicRequest): string | null {
  if (!req.query.trim()) return "query must be non-empty";
  if (!(req.alpha >= 0 && req.alpha <= 1)) return "alpha must be in [0, 1]";
  if (!Number.isInteger(req.topn) || req.topn < 1) return "topn must be a positive integer";
  if (req.sentences !== undefined && !req.sentences.trim()) {
    return "pasted text must be non-empty";
  }
  return null;
}

export function buildRequestUrl(base: string, req: MedicRequest): string {
  const invalid = validateRequest(req);
  if (invalid) throw new Error(invalid);
  const params = new URLSearchParams();
  params.set("query", req.query);
  params.set("alpha", String(req.alpha));
  params.set("topn", String(req.topn));
  if (req.sentences !== undefined) {
    params.set("sentences", req.sentences);
  } else if (req.repository) {
    params.set("repository", req.repository);
  }
  return `${base}/bert-ir?${params.toString()}`;
}

function isItem(value: unknown): value is ResultItem {
  if (typeof value !== "object" || value === null) return false;
  const item = value as Record<string, unknown>;
  return (
    typeof item.sentence === "string" &&
    typeof item.score === "number" &&
    typeof item.context_before === "string" &&
    typeof item.context_after === "string"
  );
}

export function parseResponse(payload: unknown): MedicResponse {
  if (typeof payload !== "object" || payload === null) {
    throw new Error("response is not an object");
  }
  const body = payload as Record<string, unknown>;
  if (!Array.isArray(body.items) || !body.items.every(isItem)) {
    throw new Error("response items are malformed");
  }
  if (typeof body.query !== "string") throw new Error("response query missing");
  return body as MedicResponse;
}

export function parseError(payload: unknown, status: number): string {
  if (typeof payload === "object" && payload !== null) {
    const err = (payload as ApiError).error;
    if (err && typeof err.message === "string") return err.message;
  }
  return `request failed with status ${status}`;
}

export async function fetchRanking(base: string, req: MedicRequest): Promise<MedicResponse> {
  const response = await fetch(buildRequestUrl(base, req));
  const payload = await response.json().catch(() => null);
  if (!response.ok) throw new Error(parseError(payload, response.status));
  return parseResponse(payload);
}

export type HealthInfo = { repositories: string[] };

export async function fetchHealth(base: string): Promise<HealthInfo> {
  const response = await fetch(`${base}/health`);
  const payload = (await response.json()) as { repositories?: unknown };
  const repositories = Array.isArray(payload.repositories)
    ? payload.repositories.filter((r): r is string => typeof r === "string")
    : [];
  return { repositories };
}
