import type {
  ChatPayload,
  ChatRequest,
  CompareNextPayload,
  CompareResultsPayload,
  ConfigsPayload,
  VoteChoice,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

// Thin typed wrapper over the service's JSON endpoints. Injectable fetch
// keeps the client testable without touching globals.
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText || `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getConfigs(): Promise<ConfigsPayload> {
    return this.request<ConfigsPayload>("/configs");
  }

  chat(request: ChatRequest): Promise<ChatPayload> {
    return this.post<ChatPayload>("/chat", request);
  }

  compareNext(graderId: string): Promise<CompareNextPayload> {
    return this.request<CompareNextPayload>(
      `/compare/next?grader_id=${encodeURIComponent(graderId)}`,
    );
  }

  compareVote(
    taskId: string,
    graderId: string,
    choice: VoteChoice,
  ): Promise<{ status: string }> {
    return this.post<{ status: string }>("/compare/vote", {
      task_id: taskId,
      grader_id: graderId,
      choice,
    });
  }

  compareResults(): Promise<CompareResultsPayload> {
    return this.request<CompareResultsPayload>("/compare/results");
  }
}
