/** Typed client for the judgment-session API (`/api/v1/`). */

export interface RegisterPayload {
  connection: { email: string; password: string };
  personal: { name: string; country: string; language: string };
  interests: { domains: string; specialty: string };
  competence: { profession: string; study_level: string };
}

export interface ResultItem {
  rank: number;
  title: string;
  url: string;
  snippet: string;
  excerpt: string;
  my_vote: number | null;
}

export interface Progress {
  judged: number;
  total: number;
  fraction: number;
}

export interface GroupPayload {
  complete: boolean;
  group_token: string | null;
  topic_label: string | null;
  query_text: string | null;
  engine_id?: string | null;
  results: ResultItem[];
  progress: Progress | null;
  overall: { groups_done: number; groups_total: number };
}

export interface TablePayload {
  title: string;
  corner: string;
  rows: string[];
  columns: string[];
  cells: Record<string, Record<string, number | null>>;
  flags: string[];
}

export interface ReportsPayload {
  performance: TablePayload | null;
  user_relevance: TablePayload | null;
  query_relevance: TablePayload | null;
  coupled: TablePayload | null;
  flags: string[];
}

export class ApiError extends Error {
  status: number;
  code: string;
  field: string | null;

  constructor(status: number, code: string, message: string, field: string | null) {
    super(message);
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown";
  let message = `request failed with status ${response.status}`;
  let field: string | null = null;
  try {
    const body = await response.json();
    code = body.code ?? code;
    message = body.message ?? message;
    field = body.field ?? null;
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiError(response.status, code, message, field);
}

export class Api {
  baseUrl: string;
  token: string | null = null;

  constructor(baseUrl = "") {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async register(payload: RegisterPayload): Promise<{ user_id: string }> {
    return this.request("POST", "/api/v1/register", payload);
  }

  async login(email: string, password: string): Promise<string> {
    const body = await this.request<{ token: string }>("POST", "/api/v1/login", {
      email,
      password,
    });
    this.token = body.token;
    return body.token;
  }

  async next(runId: string): Promise<GroupPayload> {
    return this.request("GET", `/api/v1/runs/${encodeURIComponent(runId)}/next`);
  }

  async vote(
    runId: string,
    groupToken: string,
    rank: number,
    vote: number,
  ): Promise<{ ok: boolean; progress: Progress }> {
    return this.request("POST", `/api/v1/runs/${encodeURIComponent(runId)}/votes`, {
      group_token: groupToken,
      rank,
      vote,
    });
  }

  async reports(runId: string): Promise<ReportsPayload> {
    return this.request("GET", `/api/v1/runs/${encodeURIComponent(runId)}/reports`);
  }
}
