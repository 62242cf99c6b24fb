/** Monotonic clock abstraction so trial timing is testable. */

export interface Clock {
  now(): number;
  wait(ms: number): Promise<void>;
}

export class RealClock implements Clock {
  now(): number {
    return performance.now();
  }

  wait(ms: number): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, ms));
  }
}

/** Deterministic clock for scripted sessions: wait() advances time
 * immediately, so a scripted study phase records exact durations. */
export class ManualClock implements Clock {
  private t = 0;

  now(): number {
    return this.t;
  }

  advance(ms: number): void {
    this.t += ms;
  }

  async wait(ms: number): Promise<void> {
    this.t += ms;
  }
}
