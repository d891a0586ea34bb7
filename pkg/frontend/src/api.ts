/** Typed client for the planning service. The console talks to the backend
 * exclusively through this module. */

export interface SessionSummary {
  session_id: string;
  instruction: string;
  status: string;
  turn_count: number;
  pending_questions: number;
  created_at: number;
  updated_at: number;
}

export interface PendingQuestion {
  label: string;
  text: string;
  agent_analyses: Record<string, string>;
}

export interface AnswerItem {
  label: string;
  text: string;
}

export interface ExecutionRequest {
  session_id?: string;
  tree_xml?: string;
  bindings: Record<string, { kind: string; policy_id?: string; wait_s?: number }>;
  profile: Record<string, number>;
  seed?: number;
  runs?: number;
  max_ticks?: number;
  conditions?: Record<string, boolean>;
}

export interface ExecutionStarted {
  execution_id: string;
  status: string;
  statistics: Record<string, unknown>;
}

export interface ExecutionEvent {
  index: number;
  kind: string;
  tick?: number;
  path?: string;
  payload?: string;
  status?: string;
  statistics?: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
      else if (body && body.detail !== undefined) detail = JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

/** Parse a server-sent-event body into its data payloads. */
export function parseSse(text: string): ExecutionEvent[] {
  const events: ExecutionEvent[] = [];
  for (const block of text.split("\n\n")) {
    for (const line of block.split("\n")) {
      if (line.startsWith("data: ")) {
        events.push(JSON.parse(line.slice("data: ".length)) as ExecutionEvent);
      }
    }
  }
  return events;
}

export class ApiClient {
  constructor(private baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async listSessions(): Promise<SessionSummary[]> {
    return expectJson(await fetch(this.url("/sessions")));
  }

  async createSession(instruction: string): Promise<SessionSummary> {
    return expectJson(
      await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ instruction }),
      }),
    );
  }

  async getSession(sessionId: string): Promise<SessionSummary> {
    return expectJson(await fetch(this.url(`/sessions/${sessionId}`)));
  }

  async advance(sessionId: string): Promise<SessionSummary> {
    return expectJson(
      await fetch(this.url(`/sessions/${sessionId}/advance`), { method: "POST" }),
    );
  }

  async pendingQuestions(sessionId: string): Promise<PendingQuestion[]> {
    return expectJson(await fetch(this.url(`/sessions/${sessionId}/questions`)));
  }

  async postAnswers(sessionId: string, answers: AnswerItem[]): Promise<SessionSummary> {
    return expectJson(
      await fetch(this.url(`/sessions/${sessionId}/answers`), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ answers }),
      }),
    );
  }

  async currentTree(sessionId: string): Promise<string> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/tree`));
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.text();
  }

  async finalize(sessionId: string): Promise<string> {
    const resp = await fetch(this.url(`/sessions/${sessionId}/finalize`), {
      method: "POST",
    });
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.text();
  }

  async startExecution(request: ExecutionRequest): Promise<ExecutionStarted> {
    return expectJson(
      await fetch(this.url("/executions"), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      }),
    );
  }

  async fetchEvents(executionId: string, fromIndex = 0): Promise<ExecutionEvent[]> {
    const resp = await fetch(
      this.url(`/executions/${executionId}/events?from_index=${fromIndex}`),
    );
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return parseSse(await resp.text());
  }

  /**
   * Deliver execution events in order until a Terminal event arrives.
   * Primary path is the event stream; if the stream request fails, fall back
   * to polling every `pollIntervalMs`, resuming from the last seen index.
   */
  async subscribeExecution(
    executionId: string,
    onEvent: (event: ExecutionEvent) => void,
    pollIntervalMs = 2000,
  ): Promise<void> {
    let nextIndex = 0;

    const deliver = (events: ExecutionEvent[]): boolean => {
      let terminal = false;
      for (const event of events) {
        if (event.index < nextIndex) continue;
        nextIndex = event.index + 1;
        onEvent(event);
        if (event.kind === "Terminal") terminal = true;
      }
      return terminal;
    };

    try {
      if (deliver(await this.fetchEvents(executionId, nextIndex))) return;
    } catch {
      /* stream unavailable: fall through to polling */
    }
    // polling fallback, resuming from the last delivered index
    for (;;) {
      await new Promise((resolve) => setTimeout(resolve, pollIntervalMs));
      try {
        if (deliver(await this.fetchEvents(executionId, nextIndex))) return;
      } catch {
        /* keep polling */
      }
    }
  }
}
