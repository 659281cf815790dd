// One logical poll loop per open session page. Events are deduplicated
// by sequence number so rendering stays idempotent across re-polls and
// resumed connections.

import type { ApiClient } from "./api";
import type { SessionEvent } from "./types";

export class EventLog {
  private readonly seen = new Set<number>();
  private readonly ordered: SessionEvent[] = [];

  /** Merge a batch; returns only the events not seen before, in order. */
  add(batch: SessionEvent[]): SessionEvent[] {
    const fresh = batch
      .filter((e) => !this.seen.has(e.seq))
      .sort((a, b) => a.seq - b.seq);
    for (const e of fresh) {
      this.seen.add(e.seq);
      this.ordered.push(e);
    }
    this.ordered.sort((a, b) => a.seq - b.seq);
    return fresh;
  }

  /** Highest sequence number received; the `after` cursor for the next poll. */
  get cursor(): number {
    return this.ordered.length
      ? this.ordered[this.ordered.length - 1].seq
      : 0;
  }

  all(): readonly SessionEvent[] {
    return this.ordered;
  }
}

export function isTerminalEvent(e: SessionEvent): boolean {
  return (
    e.kind === "transition" &&
    (e.payload["to"] === "delivered" || e.payload["to"] === "failed")
  );
}

export interface PollOptions {
  /** Pause before retrying after a network failure (ms). */
  retryDelayMs?: number;
  /** Abort signal; resolves the loop promptly when fired. */
  signal?: AbortSignal;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

/**
 * Drives the long-poll loop until the session reaches a terminal state.
 * Network blips pause and resume; deduplication keeps handlers exactly-once.
 */
export async function pollEvents(
  client: ApiClient,
  sessionId: string,
  log: EventLog,
  onEvent: (e: SessionEvent) => void,
  opts: PollOptions = {},
): Promise<void> {
  const retryDelayMs = opts.retryDelayMs ?? 1000;
  let terminal = log.all().some(isTerminalEvent);
  while (!terminal && !opts.signal?.aborted) {
    let batch: SessionEvent[];
    try {
      batch = await client.getEvents(sessionId, log.cursor);
    } catch (err) {
      if (err instanceof Error && err.name === "AbortError") return;
      await sleep(retryDelayMs);
      continue;
    }
    for (const e of log.add(batch)) {
      onEvent(e);
      if (isTerminalEvent(e)) terminal = true;
    }
  }
}
