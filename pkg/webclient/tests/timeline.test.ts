import { describe, expect, it } from "vitest";

import type { TurnReport } from "../src/protocol.js";
import { buildTimeline, describeTimeline } from "../src/timeline.js";

const maskedReport: TurnReport = {
  stt_ms: 800,
  agent_ms: 100,
  tts_ms_per_chunk: [1700, 1700, 1700],
  chunk_durations_ms: [2000, 2000, 2000],
  first_audio_ms: 2600,
  gaps_ms: [0, 0],
  masked: true,
  threshold_ms: 500,
  threshold_exceeded: true,
};

const gappyReport: TurnReport = {
  stt_ms: 800,
  agent_ms: 100,
  tts_ms_per_chunk: [1122, 2142],
  chunk_durations_ms: [1320, 2520],
  first_audio_ms: 2022,
  gaps_ms: [822],
  masked: false,
  threshold_ms: 500,
  threshold_exceeded: true,
};

describe("timeline reconstruction", () => {
  it("lays seamless chunks end to end from first audio", () => {
    const timeline = buildTimeline(maskedReport);
    expect(timeline.bars.map((b) => [b.startMs, b.endMs])).toEqual([
      [2600, 4600],
      [4600, 6600],
      [6600, 8600],
    ]);
    expect(timeline.firstAudioMs).toBe(2600);
    expect(timeline.finishMs).toBe(8600);
    expect(timeline.speechMs).toBe(6000);
    expect(timeline.totalGapMs).toBe(0);
    expect(timeline.maxGapMs).toBe(0);
    expect(timeline.masked).toBe(true);
    expect(timeline.bars.every((b) => b.gapBeforeMs === 0)).toBe(true);
  });

  it("inserts gap offsets between unmasked chunks", () => {
    const timeline = buildTimeline(gappyReport);
    expect(timeline.bars.map((b) => [b.startMs, b.endMs])).toEqual([
      [2022, 3342],
      [4164, 6684],
    ]);
    expect(timeline.bars[1]?.gapBeforeMs).toBe(822);
    expect(timeline.bars[1]?.synthesisMs).toBe(2142);
    expect(timeline.totalGapMs).toBe(822);
    expect(timeline.maxGapMs).toBe(822);
    expect(timeline.finishMs).toBe(6684);
  });

  it("handles a single chunk and an empty report", () => {
    const single = buildTimeline({
      ...maskedReport,
      tts_ms_per_chunk: [1700],
      chunk_durations_ms: [2000],
      gaps_ms: [],
    });
    expect(single.bars).toHaveLength(1);
    expect(single.finishMs).toBe(4600);

    const empty = buildTimeline({
      ...maskedReport,
      tts_ms_per_chunk: [],
      chunk_durations_ms: [],
      gaps_ms: [],
      first_audio_ms: 0,
    });
    expect(empty.bars).toEqual([]);
    expect(empty.finishMs).toBe(0);
    expect(empty.speechMs).toBe(0);
  });

  it("rejects reports whose list lengths disagree", () => {
    expect(() => buildTimeline({ ...maskedReport, gaps_ms: [0] })).toThrow(/gaps/);
    expect(() => buildTimeline({ ...maskedReport, tts_ms_per_chunk: [1700] })).toThrow(
      /synthesis times/,
    );
  });

  it("describes both seamless and gappy turns", () => {
    const seamless = describeTimeline(buildTimeline(maskedReport));
    expect(seamless[0]).toContain("first audio at 2600 ms");
    expect(seamless[0]).toContain("over 500 ms threshold");
    expect(seamless.at(-1)).toContain("seamless playback, 6000 ms of speech");

    const gappy = describeTimeline(buildTimeline(gappyReport));
    expect(gappy).toContain("  …gap 822 ms");
    expect(gappy.at(-1)).toContain("audible gaps total 822 ms (worst 822 ms)");
    expect(gappy).toContain("  chunk 2: 4164..6684 ms (plays 2520 ms, synthesized in 2142 ms)");
  });
});
