/** Talk to the ingestion service; queue exports locally until the
 * server acknowledges them so a flaky network never loses a session. */

import { ManifestDoc, ScheduleDoc, SessionDocument, serializeSession } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** localStorage-compatible subset, injectable for tests. */
export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const QUEUE_KEY = 'memschema-pending-sessions';

export async function fetchManifest(baseUrl: string, fetchImpl: FetchLike): Promise<ManifestDoc> {
  const res = await fetchImpl(`${baseUrl}/api/v1/manifest`);
  if (!res.ok) throw new Error(`manifest fetch failed: ${res.status}`);
  return (await res.json()) as ManifestDoc;
}

export async function fetchSchedule(
  baseUrl: string,
  seed: number,
  fetchImpl: FetchLike,
): Promise<ScheduleDoc> {
  const res = await fetchImpl(`${baseUrl}/api/v1/schedule?seed=${seed}`);
  if (!res.ok) throw new Error(`schedule fetch failed: ${res.status}`);
  return (await res.json()) as ScheduleDoc;
}

export interface SubmitResult {
  status: 'accepted' | 'queued' | 'rejected';
  httpStatus?: number;
  detail?: string;
}

export class SessionUploader {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike,
    private store: KeyValueStore,
  ) {}

  private queued(): string[] {
    const raw = this.store.getItem(QUEUE_KEY);
    return raw ? (JSON.parse(raw) as string[]) : [];
  }

  private setQueue(bodies: string[]): void {
    if (bodies.length === 0) this.store.removeItem(QUEUE_KEY);
    else this.store.setItem(QUEUE_KEY, JSON.stringify(bodies));
  }

  pendingCount(): number {
    return this.queued().length;
  }

  /** POST one session; on network failure persist it for a later flush.
   * A 4xx means the document itself is bad and retrying cannot help. */
  async submit(doc: SessionDocument): Promise<SubmitResult> {
    const body = serializeSession(doc);
    try {
      const res = await this.fetchImpl(`${this.baseUrl}/api/v1/sessions`, {
        method: 'POST',
        body,
      });
      if (res.status === 201 || res.status === 409) {
        return { status: 'accepted', httpStatus: res.status };
      }
      const detail = await res.text();
      return { status: 'rejected', httpStatus: res.status, detail };
    } catch {
      this.setQueue([...this.queued(), body]);
      return { status: 'queued' };
    }
  }

  /** Re-post everything queued; stops at the first network failure. */
  async flush(): Promise<number> {
    const pending = this.queued();
    let sent = 0;
    while (sent < pending.length) {
      try {
        const res = await this.fetchImpl(`${this.baseUrl}/api/v1/sessions`, {
          method: 'POST',
          body: pending[sent],
        });
        if (res.status !== 201 && res.status !== 409 && res.status >= 500) break;
        sent += 1;
      } catch {
        break;
      }
    }
    this.setQueue(pending.slice(sent));
    return sent;
  }
}
