/**
 * Turn timeline reconstruction.
 *
 * A turn_end report carries stage latencies, per-chunk synthesis times and
 * durations, first-audio offset, and inter-chunk gaps. Those fields pin
 * down the whole playback schedule: the first chunk starts at
 * first_audio_ms, each later chunk starts gap_ms after the previous chunk
 * ends, and each chunk plays for its duration. This module turns a report
 * back into absolute per-chunk bars for display.
 */

import { ProtocolError, type TurnReport } from "./protocol.js";

export interface ChunkBar {
  seq: number;
  startMs: number;
  endMs: number;
  durationMs: number;
  synthesisMs: number;
  /** Silence before this chunk; 0 for the first chunk and for masked turns. */
  gapBeforeMs: number;
}

export interface Timeline {
  bars: ChunkBar[];
  sttMs: number;
  agentMs: number;
  firstAudioMs: number;
  /** When the last chunk finishes playing, from utterance end. */
  finishMs: number;
  /** Total audible speech across chunks. */
  speechMs: number;
  totalGapMs: number;
  maxGapMs: number;
  masked: boolean;
  thresholdMs: number;
  thresholdExceeded: boolean;
}

export function buildTimeline(report: TurnReport): Timeline {
  const n = report.chunk_durations_ms.length;
  const expectedGaps = Math.max(0, n - 1);
  if (report.gaps_ms.length !== expectedGaps) {
    throw new ProtocolError(
      `report has ${report.gaps_ms.length} gaps for ${n} chunks, expected ${expectedGaps}`,
    );
  }
  if (report.tts_ms_per_chunk.length !== n) {
    throw new ProtocolError(
      `report has ${report.tts_ms_per_chunk.length} synthesis times for ${n} chunks`,
    );
  }
  const bars: ChunkBar[] = [];
  let cursor = report.first_audio_ms;
  for (let i = 0; i < n; i += 1) {
    const gapBefore = i === 0 ? 0 : (report.gaps_ms[i - 1] as number);
    const start = cursor + gapBefore;
    const duration = report.chunk_durations_ms[i] as number;
    bars.push({
      seq: i + 1,
      startMs: start,
      endMs: start + duration,
      durationMs: duration,
      synthesisMs: report.tts_ms_per_chunk[i] as number,
      gapBeforeMs: gapBefore,
    });
    cursor = start + duration;
  }
  const last = bars[bars.length - 1];
  return {
    bars,
    sttMs: report.stt_ms,
    agentMs: report.agent_ms,
    firstAudioMs: report.first_audio_ms,
    finishMs: last === undefined ? report.first_audio_ms : last.endMs,
    speechMs: report.chunk_durations_ms.reduce((a, b) => a + b, 0),
    totalGapMs: report.gaps_ms.reduce((a, b) => a + b, 0),
    maxGapMs: report.gaps_ms.reduce((a, b) => Math.max(a, b), 0),
    masked: report.masked,
    thresholdMs: report.threshold_ms,
    thresholdExceeded: report.threshold_exceeded,
  };
}

/** Compact text rendering, one line per stage and chunk. */
export function describeTimeline(timeline: Timeline): string[] {
  const lines = [
    `listen+think ${timeline.sttMs + timeline.agentMs} ms, ` +
      `first audio at ${timeline.firstAudioMs} ms` +
      (timeline.thresholdExceeded ? ` (over ${timeline.thresholdMs} ms threshold)` : ""),
  ];
  for (const bar of timeline.bars) {
    if (bar.gapBeforeMs > 0) {
      lines.push(`  …gap ${bar.gapBeforeMs} ms`);
    }
    lines.push(
      `  chunk ${bar.seq}: ${bar.startMs}..${bar.endMs} ms ` +
        `(plays ${bar.durationMs} ms, synthesized in ${bar.synthesisMs} ms)`,
    );
  }
  lines.push(
    timeline.masked
      ? `seamless playback, ${timeline.speechMs} ms of speech`
      : `audible gaps total ${timeline.totalGapMs} ms (worst ${timeline.maxGapMs} ms)`,
  );
  return lines;
}
