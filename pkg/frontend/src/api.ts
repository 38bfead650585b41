/**
 * Typed client for the annotation service. Every mutation the UI performs
 * goes through this class, and every request is recorded in `log`, so tests
 * can prove that nothing touches annotations except the documented endpoints.
 */

export type Box = [number, number, number, number]; // x, y, w, h normalized

export type TaskStatus = "pending" | "proposed" | "accepted";

export interface Polygon {
  points: [number, number][];
}

export interface Task {
  id: string;
  width: number;
  height: number;
  status: TaskStatus;
  box: Box | null;
  proposal: Polygon | null;
  reviewer: string | null;
}

export interface QueueCounts {
  pending: number;
  proposed: number;
  accepted: number;
}

export interface TaskList {
  tasks: Task[];
  counts: QueueCounts;
}

export interface AcceptedTask extends Task {
  label_path: string;
}

export interface RequestLogEntry {
  method: string;
  path: string;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class AnnotatorClient {
  readonly log: RequestLogEntry[] = [];
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    // bind so a bare global fetch keeps its expected receiver
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.log.push({ method, path });
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let code = "HTTPError";
      let message = `request failed with status ${resp.status}`;
      try {
        const payload = (await resp.json()) as { code?: string; message?: string };
        if (payload.code) code = payload.code;
        if (payload.message) message = payload.message;
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(code, message, resp.status);
    }
    return (await resp.json()) as T;
  }

  listTasks(): Promise<TaskList> {
    return this.request<TaskList>("GET", "/tasks");
  }

  getTask(id: string): Promise<Task> {
    return this.request<Task>("GET", `/tasks/${id}`);
  }

  setBox(id: string, box: Box): Promise<Task> {
    return this.request<Task>("POST", `/tasks/${id}/box`, { box });
  }

  propose(id: string): Promise<Task> {
    return this.request<Task>("POST", `/tasks/${id}/propose`);
  }

  accept(id: string, reviewer?: string): Promise<AcceptedTask> {
    const body = reviewer === undefined ? undefined : { reviewer };
    return this.request<AcceptedTask>("POST", `/tasks/${id}/accept`, body);
  }

  reject(id: string): Promise<Task> {
    return this.request<Task>("POST", `/tasks/${id}/reject`);
  }

  /** URL of a channel image; the browser's <img> does the fetching. */
  imageUrl(id: string, channel: string): string {
    return `${this.baseUrl}/images/${id}/${channel}`;
  }
}
