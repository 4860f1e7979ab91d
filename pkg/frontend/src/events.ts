/** Fire-and-forget interaction reporting.
 *
 * Hover events are debounced: a curve_hover is emitted only after the
 * pointer has dwelt on a point for at least the debounce window, so a
 * sweep across the curve produces no event storm.  Posting failures go
 * into a local retry queue with exponential backoff; an event is dropped
 * after a fixed number of attempts.  The queue is the only mutable
 * shared state and is owned by this class alone.
 */

import type { EventKind, EventRecord } from './types.js';

export interface ReporterOptions {
  sessionId: string;
  post: (event: EventRecord) => Promise<unknown>;
  hoverDebounceMs?: number;
  retryBaseMs?: number;
  maxAttempts?: number;
  now?: () => number;
}

interface QueuedEvent {
  event: EventRecord;
  attempts: number;
}

export class InteractionReporter {
  private readonly sessionId: string;
  private readonly post: (event: EventRecord) => Promise<unknown>;
  private readonly hoverDebounceMs: number;
  private readonly retryBaseMs: number;
  private readonly maxAttempts: number;
  private readonly now: () => number;

  private hoverTimer: ReturnType<typeof setTimeout> | null = null;
  private queue: QueuedEvent[] = [];
  private sending = false;
  private droppedCount = 0;
  private sentCount = 0;

  constructor(options: ReporterOptions) {
    this.sessionId = options.sessionId;
    this.post = options.post;
    this.hoverDebounceMs = options.hoverDebounceMs ?? 200;
    this.retryBaseMs = options.retryBaseMs ?? 500;
    this.maxAttempts = options.maxAttempts ?? 10;
    this.now = options.now ?? (() => Date.now());
  }

  get pending(): number {
    return this.queue.length;
  }

  get dropped(): number {
    return this.droppedCount;
  }

  get sent(): number {
    return this.sentCount;
  }

  /** Queue an event immediately (paging, selection, cross-view jumps). */
  emit(kind: EventKind, payload: Record<string, unknown> = {}): void {
    this.enqueue({
      session_id: this.sessionId,
      timestamp: this.now() / 1000,
      kind,
      payload,
    });
  }

  /** Pointer entered or moved on a trajectory point.  Emits a single
   * curve_hover once the dwell reaches the debounce window; moving to a
   * new point restarts the window. */
  hoverStart(payload: Record<string, unknown> = {}): void {
    this.cancelHover();
    this.hoverTimer = setTimeout(() => {
      this.hoverTimer = null;
      this.emit('curve_hover', payload);
    }, this.hoverDebounceMs);
  }

  /** Pointer left before the dwell completed: no event. */
  hoverEnd(): void {
    this.cancelHover();
  }

  private cancelHover(): void {
    if (this.hoverTimer !== null) {
      clearTimeout(this.hoverTimer);
      this.hoverTimer = null;
    }
  }

  private enqueue(event: EventRecord): void {
    this.queue.push({ event, attempts: 0 });
    void this.drain();
  }

  private async drain(): Promise<void> {
    if (this.sending) return;
    this.sending = true;
    try {
      while (this.queue.length > 0) {
        const item = this.queue[0];
        try {
          await this.post(item.event);
          this.queue.shift();
          this.sentCount += 1;
        } catch {
          item.attempts += 1;
          if (item.attempts >= this.maxAttempts) {
            this.queue.shift();
            this.droppedCount += 1;
            continue;
          }
          const delay = this.retryBaseMs * 2 ** (item.attempts - 1);
          setTimeout(() => void this.drain(), delay);
          return;
        }
      }
    } finally {
      this.sending = false;
    }
  }
}
