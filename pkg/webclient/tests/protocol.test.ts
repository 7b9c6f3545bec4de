import { describe, expect, it } from "vitest";

import {
  PROTOCOL_VERSION,
  ProtocolError,
  type AnyMessage,
  type ChunkAudioMessage,
  type UtteranceAudioMessage,
  asTurnReport,
  byeMessage,
  decodeSimAudio,
  dumpControl,
  encodeSilence,
  encodeSimAudio,
  estimateDurationMs,
  frameMessage,
  hello,
  iterFrames,
  parseControl,
  selectAgent,
  selectVoice,
  stableStringify,
  tokenCount,
  unframeMessage,
  utteranceAudio,
  utteranceText,
  validateMessage,
} from "../src/protocol.js";

function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i += 1) {
    out[i] = parseInt(hex.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

function bytesToHex(bytes: Uint8Array): string {
  return [...bytes].map((b) => b.toString(16).padStart(2, "0")).join("");
}

// "hi there" spoken by voice f1: 920 ms at the default 16 kHz nominal rate.
const GOLDEN_SIMA_HEX =
  "53494d41" + // magic
  "01" + // version
  "0002" +
  "6631" + // voice id "f1"
  "00000398" + // duration 920 ms
  "00003e80" + // sample rate 16000
  "00000008" +
  "6869207468657265"; // "hi there"

describe("sima codec", () => {
  it("matches the golden byte layout", () => {
    const payload = encodeSimAudio("hi there", "f1", 920);
    expect(bytesToHex(payload)).toBe(GOLDEN_SIMA_HEX);
  });

  it("decodes the golden payload", () => {
    const sim = decodeSimAudio(hexToBytes(GOLDEN_SIMA_HEX));
    expect(sim).toEqual({ voiceId: "f1", text: "hi there", durationMs: 920, sampleRate: 16000 });
  });

  it("duration model matches the golden duration", () => {
    expect(estimateDurationMs("hi there")).toBe(920);
    expect(tokenCount("  one   two\tthree\n")).toBe(3);
  });

  it("round-trips unicode text and voice ids", () => {
    const payload = encodeSimAudio("héllo wörld ✓", "vóz-1", 1234, 8000);
    const sim = decodeSimAudio(payload);
    expect(sim.text).toBe("héllo wörld ✓");
    expect(sim.voiceId).toBe("vóz-1");
    expect(sim.durationMs).toBe(1234);
    expect(sim.sampleRate).toBe(8000);
  });

  it("rejects blank text but encodes explicit silence", () => {
    expect(() => encodeSimAudio("   ", "f1", 100)).toThrow(ProtocolError);
    expect(() => encodeSilence("f1", 0)).toThrow(ProtocolError);
    const sim = decodeSimAudio(encodeSilence("f1", 600));
    expect(sim.text).toBe("");
    expect(sim.durationMs).toBe(600);
  });

  it("rejects bad magic and bad version", () => {
    const good = hexToBytes(GOLDEN_SIMA_HEX);
    const badMagic = good.slice();
    badMagic[0] = 0x58;
    expect(() => decodeSimAudio(badMagic)).toThrow(/magic/);
    const badVersion = good.slice();
    badVersion[4] = 0x02;
    expect(() => decodeSimAudio(badVersion)).toThrow(/version/);
  });

  it("rejects every truncation and trailing bytes", () => {
    const good = hexToBytes(GOLDEN_SIMA_HEX);
    for (let cut = 0; cut < good.length; cut += 1) {
      expect(() => decodeSimAudio(good.slice(0, cut))).toThrow(ProtocolError);
    }
    const extended = new Uint8Array(good.length + 1);
    extended.set(good, 0);
    expect(() => decodeSimAudio(extended)).toThrow(/trailing/);
  });
});

describe("control frames", () => {
  it("serializes hello exactly as the gateway expects", () => {
    expect(dumpControl(hello("voxhub-webclient"))).toBe(
      '{"client":"voxhub-webclient","kind":"hello","protocol_version":1}',
    );
    expect(PROTOCOL_VERSION).toBe(1);
  });

  it("serializes an utterance with sorted keys", () => {
    expect(dumpControl(utteranceText("s1", 0, "hi"))).toBe(
      '{"kind":"utterance_text","session_id":"s1","text":"hi","turn":0}',
    );
  });

  it("round-trips every audio-free client message", () => {
    const messages: AnyMessage[] = [
      hello("x"),
      selectAgent("s1", "triage"),
      selectVoice("s1", "m1"),
      utteranceText("s1", 3, "hello there"),
      byeMessage("s1"),
    ];
    for (const msg of messages) {
      expect(parseControl(dumpControl(msg))).toEqual(msg);
    }
  });

  it("rejects audio-bearing kinds on the text path", () => {
    const audioMsg = utteranceAudio("s1", 0, {
      formatTag: "SIMA1",
      payload: encodeSimAudio("hi", "f1", 520),
    });
    expect(() => dumpControl(audioMsg)).toThrow(/binary frame/);
    expect(() => parseControl('{"kind":"chunk_audio","turn":0}')).toThrow(/binary frame/);
  });

  it("rejects junk and missing fields", () => {
    expect(() => parseControl("not json")).toThrow(/JSON/);
    expect(() => parseControl("[1,2]")).toThrow(/object/);
    expect(() => parseControl('{"turn":0}')).toThrow(/kind/);
    expect(() => parseControl('{"kind":"select_agent","agent_id":"a"}')).toThrow(/session_id/);
    expect(() => parseControl('{"kind":"hello"}')).toThrow(/protocol_version/);
  });

  it("stableStringify sorts keys recursively and skips undefined", () => {
    expect(stableStringify({ b: [{ z: 1, a: 2 }], a: "x" })).toBe('{"a":"x","b":[{"a":2,"z":1}]}');
    const withUndefined = { kind: "turn_end", report: undefined } as unknown as {
      [key: string]: never;
    };
    expect(stableStringify(withUndefined)).toBe('{"kind":"turn_end"}');
  });
});

describe("binary framing", () => {
  const envelope = { formatTag: "SIMA1" as const, payload: encodeSimAudio("go on", "f1", 920) };
  const audioMsg = utteranceAudio("s1", 2, envelope);

  it("round-trips an audio message", () => {
    const back = unframeMessage(frameMessage(audioMsg)) as UtteranceAudioMessage;
    expect(back.kind).toBe("utterance_audio");
    expect(back.session_id).toBe("s1");
    expect(back.turn).toBe(2);
    expect(back.audio.formatTag).toBe("SIMA1");
    expect(bytesToHex(back.audio.payload)).toBe(bytesToHex(envelope.payload));
  });

  it("lays out length-prefixed json and binary sections", () => {
    const frame = frameMessage(audioMsg);
    const view = new DataView(frame.buffer, frame.byteOffset, frame.byteLength);
    const jsonLen = view.getUint32(0, false);
    const header = JSON.parse(new TextDecoder().decode(frame.subarray(4, 4 + jsonLen)));
    expect(header).toEqual({
      kind: "utterance_audio",
      session_id: "s1",
      turn: 2,
      audio_format: "SIMA1",
    });
    const binLen = view.getUint32(4 + jsonLen, false);
    expect(binLen).toBe(envelope.payload.length);
    expect(frame.length).toBe(8 + jsonLen + binLen);
  });

  it("frames audio-free messages with an empty binary section", () => {
    const frame = frameMessage(byeMessage("s1"));
    const view = new DataView(frame.buffer, frame.byteOffset, frame.byteLength);
    const jsonLen = view.getUint32(0, false);
    expect(view.getUint32(4 + jsonLen, false)).toBe(0);
    expect(unframeMessage(frame)).toEqual(byeMessage("s1"));
  });

  it("enforces the frame size limit both ways", () => {
    expect(() => frameMessage(audioMsg, 16)).toThrow(/exceeds limit/);
    expect(() => unframeMessage(frameMessage(audioMsg), 16)).toThrow(/exceeds limit/);
  });

  it("rejects structural corruption", () => {
    const frame = frameMessage(audioMsg);
    expect(() => unframeMessage(frame.slice(0, 6))).toThrow(/shorter/);
    expect(() => unframeMessage(frame.slice(0, frame.length - 1))).toThrow(/mismatch/);
    const oversizedJson = frame.slice();
    new DataView(oversizedJson.buffer).setUint32(0, 1 << 20, false);
    expect(() => unframeMessage(oversizedJson)).toThrow(/overruns/);
  });

  it("rejects a binary section without audio_format and unknown formats", () => {
    const textBytes = new TextEncoder().encode('{"kind":"bye","session_id":"s1"}');
    const bad = new Uint8Array(8 + textBytes.length + 3);
    const view = new DataView(bad.buffer);
    view.setUint32(0, textBytes.length, false);
    bad.set(textBytes, 4);
    view.setUint32(4 + textBytes.length, 3, false);
    expect(() => unframeMessage(bad)).toThrow(/without audio_format/);

    const unknownFormat = new TextEncoder().encode(
      '{"audio_format":"MP3","kind":"utterance_audio","session_id":"s1","turn":0}',
    );
    const frame2 = new Uint8Array(8 + unknownFormat.length);
    const view2 = new DataView(frame2.buffer);
    view2.setUint32(0, unknownFormat.length, false);
    frame2.set(unknownFormat, 4);
    view2.setUint32(4 + unknownFormat.length, 0, false);
    expect(() => unframeMessage(frame2)).toThrow(/unknown audio format/);
  });

  it("iterates a stream of concatenated frames in order", () => {
    const parts = [
      frameMessage(utteranceAudio("s1", 0, envelope)),
      frameMessage(byeMessage("s1")),
      frameMessage(utteranceText("s1", 1, "again")),
    ];
    const stream = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
    let pos = 0;
    for (const part of parts) {
      stream.set(part, pos);
      pos += part.length;
    }
    const kinds = [...iterFrames(stream)].map((m) => m.kind);
    expect(kinds).toEqual(["utterance_audio", "bye", "utterance_text"]);

    const truncated = stream.slice(0, stream.length - 2);
    expect(() => [...iterFrames(truncated)]).toThrow(ProtocolError);
  });
});

describe("message validation", () => {
  it("requires an audio envelope on audio kinds", () => {
    const chunk = {
      kind: "chunk_audio",
      session_id: "s1",
      turn: 0,
      seq: 1,
      text: "x",
      duration_ms: 520,
    } as unknown as ChunkAudioMessage;
    expect(() => validateMessage(chunk)).toThrow(/audio envelope/);
  });

  it("rejects unknown kinds", () => {
    expect(() => validateMessage({ kind: "nope" } as unknown as AnyMessage)).toThrow(
      /unknown message kind/,
    );
  });
});

describe("turn report parsing", () => {
  const wire = {
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

  it("accepts a well-formed report", () => {
    expect(asTurnReport(wire)).toEqual(wire);
  });

  it("rejects missing and mistyped fields", () => {
    expect(() => asTurnReport(null)).toThrow(/not an object/);
    expect(() => asTurnReport({ ...wire, stt_ms: "800" })).toThrow(/stt_ms/);
    expect(() => asTurnReport({ ...wire, gaps_ms: [822, "x"] })).toThrow(/gaps_ms/);
    const { masked: _m, ...withoutMasked } = wire;
    expect(() => asTurnReport(withoutMasked)).toThrow(/masked/);
  });
});
