/**
 * Replays a gateway session stream recorded with:
 *
 *   voxhub simulate triage_red --record tests/fixtures/golden_session.bin
 *
 * Every server-message kind appears in the stream, so this pins the
 * client's framing, codec, report parsing, and timeline math to real
 * gateway output rather than to self-produced bytes.
 */

import { readFileSync } from "node:fs";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  type AnyMessage,
  type ChunkAudioMessage,
  type ErrorMessage,
  type SessionAckMessage,
  type TranscriptMessage,
  type TurnEndMessage,
  type TurnReport,
  asTurnReport,
  decodeSimAudio,
  iterFrames,
} from "../src/protocol.js";
import { PlaybackQueue } from "../src/playback.js";
import { buildTimeline } from "../src/timeline.js";

const fixture = readFileSync(new URL("./fixtures/golden_session.bin", import.meta.url));
const messages: AnyMessage[] = [...iterFrames(new Uint8Array(fixture))];

interface Turn {
  transcript: TranscriptMessage;
  chunks: ChunkAudioMessage[];
  end: TurnEndMessage;
  report: TurnReport;
}

function groupTurns(stream: AnyMessage[]): Turn[] {
  const turns: Turn[] = [];
  let transcript: TranscriptMessage | null = null;
  let chunks: ChunkAudioMessage[] = [];
  for (const msg of stream) {
    if (msg.kind === "transcript") {
      expect(transcript).toBeNull();
      transcript = msg;
    } else if (msg.kind === "chunk_audio") {
      expect(transcript).not.toBeNull();
      chunks.push(msg);
    } else if (msg.kind === "turn_end") {
      expect(transcript).not.toBeNull();
      expect(msg.report).toBeDefined();
      turns.push({
        transcript: transcript as TranscriptMessage,
        chunks,
        end: msg,
        report: asTurnReport(msg.report),
      });
      transcript = null;
      chunks = [];
    }
  }
  expect(transcript).toBeNull();
  return turns;
}

const turns = groupTurns(messages);

describe("golden session stream", () => {
  it("contains every server kind in a valid session shape", () => {
    const counts = new Map<string, number>();
    for (const msg of messages) {
      counts.set(msg.kind, (counts.get(msg.kind) ?? 0) + 1);
    }
    expect(Object.fromEntries(counts)).toEqual({
      session_ack: 1,
      catalog: 1,
      transcript: 5,
      chunk_audio: 7,
      turn_end: 5,
      error: 1,
    });
    expect(messages[0]?.kind).toBe("session_ack");
    expect(messages[1]?.kind).toBe("catalog");
  });

  it("acknowledges the session and lists the catalog", () => {
    const ack = messages[0] as SessionAckMessage;
    expect(ack.session_id).toBe("s1");
    expect(ack.voice_id).toBe("f1");

    const cat = messages[1];
    if (cat?.kind !== "catalog") throw new Error("second message is not the catalog");
    expect(cat.agents.map((a) => a.agent_id)).toContain("triage");
    expect(cat.voices.map((v) => v.voice_id)).toEqual(["f1", "m1"]);
    expect(cat.voices[0]?.display_name).toBe("Female 1");
  });

  it("carries the five scripted utterances in order", () => {
    expect(turns.map((t) => t.transcript.text)).toEqual([
      "hello",
      "chest pain",
      "seven",
      "two hours",
      "yes",
    ]);
    for (const turn of turns) {
      expect(turn.transcript.stt_ms).toBe(800);
    }
  });

  it("numbers chunks sequentially and echoes the turn nonce", () => {
    turns.forEach((turn, index) => {
      expect(turn.transcript.turn).toBe(index);
      expect(turn.end.turn).toBe(index);
      turn.chunks.forEach((chunk, i) => {
        expect(chunk.seq).toBe(i + 1);
        expect(chunk.turn).toBe(index);
        expect(chunk.session_id).toBe("s1");
      });
    });
    expect(turns.map((t) => t.chunks.length)).toEqual([2, 1, 1, 1, 2]);
  });

  it("every chunk's audio decodes to its advertised text and duration", () => {
    for (const turn of turns) {
      for (const chunk of turn.chunks) {
        expect(chunk.audio.formatTag).toBe("SIMA1");
        const sim = decodeSimAudio(chunk.audio.payload);
        expect(sim.text).toBe(chunk.text);
        expect(sim.durationMs).toBe(chunk.duration_ms);
        expect(sim.voiceId).toBe("f1");
      }
    }
  });

  it("reports are internally consistent with their chunks", () => {
    for (const turn of turns) {
      const report = turn.report;
      expect(report.chunk_durations_ms).toEqual(turn.chunks.map((c) => c.duration_ms));
      expect(report.stt_ms).toBe(turn.transcript.stt_ms);
      expect(report.masked).toBe(report.gaps_ms.every((gap) => gap === 0));
      const timeline = buildTimeline(report);
      expect(timeline.bars[0]?.startMs ?? report.first_audio_ms).toBe(report.first_audio_ms);
    }
  });

  it("first turn shows the gap, later turns are seamless", () => {
    const first = turns[0]?.report as TurnReport;
    expect(first.first_audio_ms).toBe(2022);
    expect(first.tts_ms_per_chunk).toEqual([1122, 2142]);
    expect(first.gaps_ms).toEqual([822]);
    expect(first.masked).toBe(false);
    expect(buildTimeline(first).bars[1]?.startMs).toBe(4164);

    for (const turn of turns.slice(1)) {
      expect(turn.report.masked).toBe(true);
    }
    const last = turns[4]?.report as TurnReport;
    expect(last.first_audio_ms).toBe(3382);
    expect(last.chunk_durations_ms).toEqual([2920, 2520]);
    expect(last.gaps_ms).toEqual([0]);
  });

  it("the conversation ends in a red triage code", () => {
    const reply = turns[4]?.chunks.map((c) => c.text).join(" ") ?? "";
    expect(reply).toContain("Your triage code is red.");
  });

  it("parses the error message at the stream tail", () => {
    const error = messages.at(-1) as ErrorMessage;
    expect(error.kind).toBe("error");
    expect(error.code).toBe("unknown-voice");
    expect(error.detail).toContain("not in the catalog");
    expect(error.session_id).toBe("s1");
  });
});

describe("playback replay of the golden reports", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("a sequential player reproduces each report's first audio and gaps", () => {
    // Chunk i becomes available once transcription, the agent, and every
    // synthesis up to i have finished; replaying those arrival times
    // through the playback queue must land on the reported schedule.
    for (const turn of turns) {
      const report = turn.report;
      const queue = new PlaybackQueue();
      let ready = report.stt_ms + report.agent_ms;
      turn.chunks.forEach((chunk, i) => {
        ready += report.tts_ms_per_chunk[i] as number;
        const atMs = ready;
        setTimeout(() => queue.enqueue({ seq: chunk.seq, durationMs: chunk.duration_ms }), atMs);
      });
      vi.runAllTimers();
      const replay = queue.report();
      expect(replay.firstAudioMs).toBe(report.first_audio_ms);
      expect(replay.gapsMs).toEqual(report.gaps_ms);
      expect(queue.seamlessSoFar()).toBe(report.masked);
      expect(replay.playedSeqs).toEqual(turn.chunks.map((c) => c.seq));
      queue.reset();
    }
  });
});
