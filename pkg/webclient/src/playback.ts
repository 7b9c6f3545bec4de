/**
 * Strictly sequential play-on-arrival queue.
 *
 * Chunks of one reply arrive with 1-based sequence numbers and may land
 * out of order; playback must follow sequence order with no chunk skipped
 * or overlapped. A chunk that arrives while its predecessor is still
 * playing waits; a chunk whose predecessor already finished starts
 * immediately, and the silence in between is recorded as a gap.
 *
 * The clock and timers are injectable so tests can drive playback with
 * fake time; real deployments use setTimeout/Date.now.
 */

export interface PlayableChunk {
  seq: number;
  durationMs: number;
  text?: string;
}

export interface PlaybackEvents {
  onStart?: (chunk: PlayableChunk, atMs: number) => void;
  onEnd?: (chunk: PlayableChunk, atMs: number) => void;
  /**
   * Fired when a chunk ends with nothing further buffered. The turn may be
   * over, or the next chunk may simply not have arrived yet — the caller
   * knows which from the turn_end message.
   */
  onDrain?: (atMs: number) => void;
}

export interface TimerDriver {
  now(): number;
  schedule(callback: () => void, ms: number): unknown;
  cancel(handle: unknown): void;
}

export const realTimers: TimerDriver = {
  now: () => Date.now(),
  schedule: (callback, ms) => setTimeout(callback, ms),
  cancel: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export interface PlaybackReport {
  /** Start offset of the first chunk, relative to the last reset. */
  firstAudioMs: number | null;
  /** Silence between consecutive chunks, one entry per boundary. */
  gapsMs: number[];
  playedSeqs: number[];
}

export class PlaybackQueue {
  private readonly events: PlaybackEvents;
  private readonly driver: TimerDriver;
  private readonly buffered = new Map<number, PlayableChunk>();
  private nextSeq = 1;
  private playing: PlayableChunk | null = null;
  private endTimer: unknown = null;
  private epochMs: number;
  private previousEndMs: number | null = null;
  private firstStartMs: number | null = null;
  private readonly gaps: number[] = [];
  private readonly played: number[] = [];

  constructor(events: PlaybackEvents = {}, driver: TimerDriver = realTimers) {
    this.events = events;
    this.driver = driver;
    this.epochMs = driver.now();
  }

  /** Forget buffered chunks and stats and expect seq 1 again (new turn). */
  reset(): void {
    if (this.endTimer !== null) {
      this.driver.cancel(this.endTimer);
      this.endTimer = null;
    }
    this.buffered.clear();
    this.nextSeq = 1;
    this.playing = null;
    this.previousEndMs = null;
    this.firstStartMs = null;
    this.gaps.length = 0;
    this.played.length = 0;
    this.epochMs = this.driver.now();
  }

  get isPlaying(): boolean {
    return this.playing !== null;
  }

  enqueue(chunk: PlayableChunk): void {
    if (chunk.seq < this.nextSeq || (this.playing !== null && chunk.seq === this.playing.seq)) {
      throw new Error(`chunk seq ${chunk.seq} already played`);
    }
    if (this.buffered.has(chunk.seq)) {
      throw new Error(`duplicate chunk seq ${chunk.seq}`);
    }
    this.buffered.set(chunk.seq, chunk);
    if (this.playing === null) {
      this.startNextIfReady();
    }
  }

  report(): PlaybackReport {
    return {
      firstAudioMs: this.firstStartMs,
      gapsMs: [...this.gaps],
      playedSeqs: [...this.played],
    };
  }

  /** True when every gap so far is within tolerance (0 = perfectly seamless). */
  seamlessSoFar(toleranceMs = 0): boolean {
    return this.gaps.every((gap) => gap <= toleranceMs);
  }

  private startNextIfReady(): void {
    const chunk = this.buffered.get(this.nextSeq);
    if (chunk === undefined) {
      if (this.buffered.size === 0 && this.previousEndMs !== null) {
        this.events.onDrain?.(this.previousEndMs - this.epochMs);
      }
      return;
    }
    this.buffered.delete(chunk.seq);
    this.nextSeq = chunk.seq + 1;
    this.playing = chunk;
    const startMs = this.driver.now() - this.epochMs;
    if (this.firstStartMs === null) {
      this.firstStartMs = startMs;
    } else if (this.previousEndMs !== null) {
      this.gaps.push(startMs - (this.previousEndMs - this.epochMs));
    }
    this.played.push(chunk.seq);
    this.events.onStart?.(chunk, startMs);
    this.endTimer = this.driver.schedule(() => this.finishCurrent(), chunk.durationMs);
  }

  private finishCurrent(): void {
    const chunk = this.playing;
    if (chunk === null) {
      return;
    }
    this.endTimer = null;
    this.playing = null;
    this.previousEndMs = this.driver.now();
    this.events.onEnd?.(chunk, this.previousEndMs - this.epochMs);
    this.startNextIfReady();
  }
}
