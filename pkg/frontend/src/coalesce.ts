/**
 * Latest-wins pose coalescing: at most one message per interval, at most one
 * pending; a newer pose replaces the queued one. Idle input sends nothing.
 */

export type Clock = () => number

export class PoseCoalescer<T> {
  private lastSendTime = -Infinity
  private pending: T | null = null
  private timerArmed = false

  constructor(
    private readonly send: (item: T) => void,
    private readonly minIntervalMs: number,
    private readonly now: Clock = () => performance.now(),
    private readonly schedule: (fn: () => void, delayMs: number) => void = (fn, d) =>
      void setTimeout(fn, d),
  ) {}

  push(item: T): void {
    const t = this.now()
    if (t - this.lastSendTime >= this.minIntervalMs) {
      this.lastSendTime = t
      this.send(item)
      return
    }
    this.pending = item // newest replaces queued
    if (!this.timerArmed) {
      this.timerArmed = true
      this.schedule(() => this.flush(), this.lastSendTime + this.minIntervalMs - t)
    }
  }

  private flush(): void {
    this.timerArmed = false
    if (this.pending === null) return
    this.lastSendTime = this.now()
    const item = this.pending
    this.pending = null
    this.send(item)
  }
}

/** Exponential backoff schedule for reconnect attempts, capped. */
export function backoffDelayMs(attempt: number, baseMs = 250, capMs = 10_000): number {
  return Math.min(capMs, baseMs * 2 ** Math.max(0, attempt))
}
