/**
 * Review-session controller: all UI state and transitions, no DOM.
 *
 * The rules it keeps:
 *  - the current task always mirrors the server's last response for it;
 *  - counters come from the server on every sync, never from local math;
 *  - a failed proposal keeps the box so the reviewer can redraw;
 *  - a refused transition resyncs instead of guessing;
 *  - a network failure leaves local state exactly as it was.
 */

import { AnnotatorClient, ApiError, Box, Task } from "./api.js";

export type Channel = "brightfield" | "cd61" | "cd45";

export interface Banner {
  kind: "info" | "error" | "retry";
  text: string;
}

const EMPTY_COUNTS = { pending: 0, proposed: 0, accepted: 0 };

export class ReviewSession {
  tasks: Task[] = [];
  counts = { ...EMPTY_COUNTS };
  currentId: string | null = null;
  channel: Channel = "brightfield";
  overlayOpacity = 0.45;
  banner: Banner | null = null;

  constructor(
    private readonly client: AnnotatorClient,
    private readonly reviewer?: string,
  ) {}

  get current(): Task | null {
    return this.tasks.find((t) => t.id === this.currentId) ?? null;
  }

  /** Pull the whole queue; adopt the first pending task if nothing is selected. */
  async sync(): Promise<void> {
    const list = await this.client.listTasks();
    this.tasks = list.tasks;
    this.counts = { ...EMPTY_COUNTS, ...list.counts };
    if (this.current === null) {
      this.currentId = this.firstPendingId();
    }
  }

  private firstPendingId(): string | null {
    return this.tasks.find((t) => t.status === "pending")?.id ?? null;
  }

  private replaceTask(task: Task): void {
    const at = this.tasks.findIndex((t) => t.id === task.id);
    if (at >= 0) this.tasks[at] = task;
    else this.tasks.push(task);
  }

  select(id: string): void {
    if (this.tasks.some((t) => t.id === id)) {
      this.currentId = id;
      this.banner = null;
    }
  }

  next(): void {
    this.step(+1);
  }

  prev(): void {
    this.step(-1);
  }

  private step(direction: 1 | -1): void {
    if (this.tasks.length === 0) return;
    const at = this.tasks.findIndex((t) => t.id === this.currentId);
    const n = this.tasks.length;
    const to = at < 0 ? 0 : (at + direction + n) % n;
    this.currentId = this.tasks[to]!.id;
    this.banner = null;
  }

  setChannel(channel: Channel): void {
    this.channel = channel;
  }

  setOpacity(value: number): void {
    this.overlayOpacity = Math.min(1, Math.max(0, value));
  }

  /**
   * The drag gesture's outcome: post the normalized box, then ask for a
   * proposal. An empty proposal is routine — banner up, box kept, reviewer
   * redraws. Anything the state machine refuses triggers a resync.
   */
  async drawBox(box: Box): Promise<void> {
    const task = this.current;
    if (task === null) return;
    this.banner = null;
    try {
      this.replaceTask(await this.client.setBox(task.id, box));
      this.replaceTask(await this.client.propose(task.id));
    } catch (err) {
      await this.handleFailure(err, task.id);
    }
  }

  /** Accept the visible proposal and move on to the next pending task. */
  async accept(): Promise<void> {
    const task = this.current;
    if (task === null) return;
    this.banner = null;
    try {
      this.replaceTask(await this.client.accept(task.id, this.reviewer));
      await this.sync();
      this.currentId = this.firstPendingId() ?? this.currentId;
    } catch (err) {
      await this.handleFailure(err, task.id);
    }
  }

  /** Send the proposal back; stay on the task so the box can be redrawn. */
  async reject(): Promise<void> {
    const task = this.current;
    if (task === null) return;
    this.banner = null;
    try {
      this.replaceTask(await this.client.reject(task.id));
    } catch (err) {
      await this.handleFailure(err, task.id);
    }
  }

  /** Keyboard-first loop: A accepts, R rejects, arrows walk the queue. */
  async handleKey(key: string): Promise<void> {
    switch (key.toLowerCase()) {
      case "a":
        await this.accept();
        break;
      case "r":
        await this.reject();
        break;
      case "arrowright":
        this.next();
        break;
      case "arrowleft":
        this.prev();
        break;
    }
  }

  private async handleFailure(err: unknown, taskId: string): Promise<void> {
    if (err instanceof ApiError) {
      if (err.code === "EmptyProposal") {
        this.banner = { kind: "info", text: "no object found — redraw the box" };
        this.replaceTask(await this.client.getTask(taskId)); // box survives
        return;
      }
      this.banner = { kind: "error", text: `${err.code}: ${err.message}` };
      await this.sync(); // the server knows best; fall back in line
      return;
    }
    // fetch itself failed: server unreachable. Keep everything as it was.
    this.banner = { kind: "retry", text: "server unreachable — try again" };
  }
}
