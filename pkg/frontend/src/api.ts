// Typed REST client. The UI talks to the service through this surface only.

import type {
  Board,
  HealthzResponse,
  MatchResponse,
  PinsResponse,
  PresetsResponse,
  RenderReport,
  SceneQueryBody,
  ScriptResponse,
  SessionResponse,
  SettingsBody,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly locus: string | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ReshotBody {
  settings?: SettingsBody;
  user_prompt?: string;
  seed_lock?: boolean;
}

export class PrevizApi {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: { "content-type": "application/json" } };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError("backend_error", String(err), 0);
    }
    if (!response.ok) {
      let code = "backend_error";
      let message = `http ${response.status}`;
      let locus: string | null = null;
      try {
        const data = (await response.json()) as Record<string, unknown>;
        if (typeof data.code === "string") code = data.code;
        if (typeof data.message === "string") message = data.message;
        if (typeof data.locus === "string") locus = data.locus;
      } catch {
        // non-JSON error body; keep the http fallback
      }
      throw new ApiError(code, message, response.status, locus);
    }
    return (await response.json()) as T;
  }

  healthz(): Promise<HealthzResponse> {
    return this.request("GET", "/healthz");
  }

  presets(): Promise<PresetsResponse> {
    return this.request("GET", "/presets");
  }

  submitScript(text: string): Promise<ScriptResponse> {
    return this.request("POST", "/scripts", { text });
  }

  match(scriptId: string, query: SceneQueryBody, k: number): Promise<MatchResponse> {
    return this.request("POST", "/match", { script_id: scriptId, query, k });
  }

  createSession(
    scriptId: string,
    groupId: string,
    settings: SettingsBody,
    seed?: number,
  ): Promise<SessionResponse> {
    const body: Record<string, unknown> = {
      script_id: scriptId,
      group_id: groupId,
      settings,
    };
    if (seed !== undefined) {
      body.seed = seed;
    }
    return this.request("POST", "/sessions", body);
  }

  render(sessionId: string, userPrompt?: string, force = false): Promise<RenderReport> {
    const body: Record<string, unknown> = { force };
    if (userPrompt !== undefined) {
      body.user_prompt = userPrompt;
    }
    return this.request("POST", `/sessions/${sessionId}/render`, body);
  }

  setPins(sessionId: string, frameIds: string[], pinned: boolean): Promise<PinsResponse> {
    return this.request("POST", `/sessions/${sessionId}/pins`, {
      frame_ids: frameIds,
      pinned,
    });
  }

  reshot(sessionId: string, body: ReshotBody): Promise<RenderReport> {
    return this.request("POST", `/sessions/${sessionId}/reshot`, body);
  }

  board(sessionId: string): Promise<Board> {
    return this.request("GET", `/sessions/${sessionId}/board`);
  }

  manifest(sessionId: string): Promise<unknown> {
    return this.request("GET", `/sessions/${sessionId}/manifest`);
  }

  imageUrl(digest: string): string {
    return `${this.baseUrl}/images/${digest}.png`;
  }
}

// Structural surface so tests can substitute a scripted fake.
export type ApiSurface = Pick<
  PrevizApi,
  | "presets"
  | "submitScript"
  | "match"
  | "createSession"
  | "render"
  | "setPins"
  | "reshot"
  | "board"
  | "imageUrl"
>;
