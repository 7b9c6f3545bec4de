/**
 * Wire protocol for the voxhub gateway, mirrored from the server contract.
 *
 * Field names are snake_case because they are the literal JSON keys on the
 * wire. Audio-free messages travel as flat JSON text frames; audio-bearing
 * messages travel as one binary frame:
 *
 *   u32 json_len | json utf-8 | u32 bin_len | bin        (big-endian)
 *
 * where the JSON header is the message fields plus "kind" and, when audio
 * is present, "audio_format"; the binary section is the raw audio payload.
 *
 * SIMA1 is the gateway's deterministic mock-audio format (big-endian):
 *
 *   "SIMA" | 0x01 | u16 voice_id_len | voice_id utf-8
 *   | u32 duration_ms | u32 sample_rate | u32 text_len | text utf-8
 */

export const PROTOCOL_VERSION = 1;
export const DEFAULT_SAMPLE_RATE = 16000;
export const DEFAULT_MAX_FRAME_BYTES = 4 * 1024 * 1024;

/** Upper bound on natural turn-taking delay; reports flag slower first audio. */
export const HUMAN_RESPONSE_THRESHOLD_MS = 500;

export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

export type JsonValue =
  | string
  | number
  | boolean
  | null
  | JsonValue[]
  | { [key: string]: JsonValue };

export type AudioFormatTag = "SIMA1" | "OPAQUE";

export interface AudioEnvelope {
  formatTag: AudioFormatTag;
  payload: Uint8Array;
}

// --------------------------------------------------------------------------
// SIMA1 codec
// --------------------------------------------------------------------------

const SIMA_MAGIC = [0x53, 0x49, 0x4d, 0x41]; // "SIMA"
const SIMA_VERSION = 0x01;

const utf8Encoder = new TextEncoder();
const utf8Decoder = new TextDecoder("utf-8", { fatal: true });

export interface SimAudio {
  voiceId: string;
  text: string;
  durationMs: number;
  sampleRate: number;
}

/** Whitespace token count; the unit of the linear duration model. */
export function tokenCount(text: string): number {
  return text.split(/\s+/).filter((w) => w.length > 0).length;
}

/** Nominal utterance duration for client-side envelopes: base + per-token. */
export function estimateDurationMs(text: string, msPerToken = 400, baseMs = 120): number {
  return baseMs + msPerToken * tokenCount(text);
}

export function encodeSimAudio(
  text: string,
  voiceId: string,
  durationMs: number,
  sampleRate = DEFAULT_SAMPLE_RATE,
): Uint8Array {
  if (tokenCount(text) === 0) {
    throw new ProtocolError("cannot encode blank text; use encodeSilence for silence");
  }
  return encodeSimaPayload(text, voiceId, durationMs, sampleRate);
}

/** A silent envelope: empty text, explicit positive duration. */
export function encodeSilence(
  voiceId: string,
  durationMs: number,
  sampleRate = DEFAULT_SAMPLE_RATE,
): Uint8Array {
  if (durationMs <= 0) {
    throw new ProtocolError("silence needs a positive duration");
  }
  return encodeSimaPayload("", voiceId, durationMs, sampleRate);
}

function encodeSimaPayload(
  text: string,
  voiceId: string,
  durationMs: number,
  sampleRate: number,
): Uint8Array {
  const voiceBytes = utf8Encoder.encode(voiceId);
  const textBytes = utf8Encoder.encode(text);
  const out = new Uint8Array(4 + 1 + 2 + voiceBytes.length + 12 + textBytes.length);
  const view = new DataView(out.buffer);
  out.set(SIMA_MAGIC, 0);
  out[4] = SIMA_VERSION;
  view.setUint16(5, voiceBytes.length, false);
  out.set(voiceBytes, 7);
  let pos = 7 + voiceBytes.length;
  view.setUint32(pos, durationMs, false);
  view.setUint32(pos + 4, sampleRate, false);
  view.setUint32(pos + 8, textBytes.length, false);
  pos += 12;
  out.set(textBytes, pos);
  return out;
}

export function decodeSimAudio(payload: Uint8Array): SimAudio {
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  if (payload.length < 7 || !SIMA_MAGIC.every((b, i) => payload[i] === b)) {
    throw new ProtocolError("bad SIMA magic");
  }
  if (payload[4] !== SIMA_VERSION) {
    throw new ProtocolError(`unsupported SIMA version ${payload[4]}`);
  }
  const voiceLen = view.getUint16(5, false);
  let pos = 7;
  if (pos + voiceLen + 12 > payload.length) {
    throw new ProtocolError("truncated SIMA payload");
  }
  const voiceId = decodeUtf8(payload.subarray(pos, pos + voiceLen));
  pos += voiceLen;
  const durationMs = view.getUint32(pos, false);
  const sampleRate = view.getUint32(pos + 4, false);
  const textLen = view.getUint32(pos + 8, false);
  pos += 12;
  if (pos + textLen > payload.length) {
    throw new ProtocolError("truncated SIMA text");
  }
  const text = decodeUtf8(payload.subarray(pos, pos + textLen));
  pos += textLen;
  if (pos !== payload.length) {
    throw new ProtocolError(`${payload.length - pos} trailing bytes`);
  }
  return { voiceId, text, durationMs, sampleRate };
}

function decodeUtf8(bytes: Uint8Array): string {
  try {
    return utf8Decoder.decode(bytes);
  } catch {
    throw new ProtocolError("invalid utf-8");
  }
}

// --------------------------------------------------------------------------
// Messages
// --------------------------------------------------------------------------

export interface CatalogAgent {
  agent_id: string;
  display_name: string;
}

export interface CatalogVoice {
  voice_id: string;
  display_name: string;
}

/** Per-turn latency report carried by turn_end, keys as on the wire. */
export interface TurnReport {
  stt_ms: number;
  agent_ms: number;
  tts_ms_per_chunk: number[];
  chunk_durations_ms: number[];
  first_audio_ms: number;
  gaps_ms: number[];
  masked: boolean;
  threshold_ms: number;
  threshold_exceeded: boolean;
}

export interface HelloMessage {
  kind: "hello";
  protocol_version: number;
  client: string;
}

export interface SelectAgentMessage {
  kind: "select_agent";
  session_id: string;
  agent_id: string;
}

export interface SelectVoiceMessage {
  kind: "select_voice";
  session_id: string;
  voice_id: string;
}

export interface UtteranceTextMessage {
  kind: "utterance_text";
  session_id: string;
  turn: number;
  text: string;
}

export interface UtteranceAudioMessage {
  kind: "utterance_audio";
  session_id: string;
  turn: number;
  audio: AudioEnvelope;
}

export interface ByeMessage {
  kind: "bye";
  session_id: string;
}

export interface SessionAckMessage {
  kind: "session_ack";
  session_id: string;
  agent_id: string;
  voice_id: string;
}

export interface CatalogMessage {
  kind: "catalog";
  session_id: string;
  agents: CatalogAgent[];
  voices: CatalogVoice[];
}

export interface TranscriptMessage {
  kind: "transcript";
  session_id: string;
  turn: number;
  text: string;
  stt_ms: number;
}

export interface ChunkAudioMessage {
  kind: "chunk_audio";
  session_id: string;
  turn: number;
  seq: number;
  text: string;
  duration_ms: number;
  audio: AudioEnvelope;
}

export interface TurnEndMessage {
  kind: "turn_end";
  session_id: string;
  turn: number;
  report?: TurnReport;
  error?: string;
}

export interface ErrorMessage {
  kind: "error";
  code: string;
  detail: string;
  session_id?: string;
}

export type ClientMessage =
  | HelloMessage
  | SelectAgentMessage
  | SelectVoiceMessage
  | UtteranceTextMessage
  | UtteranceAudioMessage
  | ByeMessage;

export type ServerMessage =
  | SessionAckMessage
  | CatalogMessage
  | TranscriptMessage
  | ChunkAudioMessage
  | TurnEndMessage
  | ErrorMessage;

export type AnyMessage = ClientMessage | ServerMessage;

const REQUIRED_FIELDS: Record<string, string[]> = {
  hello: ["protocol_version"],
  select_agent: ["agent_id"],
  select_voice: ["voice_id"],
  utterance_audio: ["turn"],
  utterance_text: ["turn", "text"],
  bye: [],
  session_ack: ["agent_id", "voice_id"],
  catalog: ["agents", "voices"],
  transcript: ["turn", "text", "stt_ms"],
  chunk_audio: ["turn", "seq", "text", "duration_ms"],
  turn_end: ["turn"],
  error: ["code", "detail"],
};

const AUDIO_KINDS = new Set(["utterance_audio", "chunk_audio"]);
const NO_SESSION_KINDS = new Set(["hello", "error"]);

export function validateMessage(msg: AnyMessage): void {
  const required = REQUIRED_FIELDS[msg.kind];
  if (required === undefined) {
    throw new ProtocolError(`unknown message kind '${(msg as { kind: string }).kind}'`);
  }
  const record = msg as unknown as Record<string, unknown>;
  for (const name of required) {
    if (record[name] === undefined) {
      throw new ProtocolError(`${msg.kind} message missing field '${name}'`);
    }
  }
  if (!NO_SESSION_KINDS.has(msg.kind) && record["session_id"] === undefined) {
    throw new ProtocolError(`${msg.kind} message missing session_id`);
  }
  if (AUDIO_KINDS.has(msg.kind) && record["audio"] === undefined) {
    throw new ProtocolError(`${msg.kind} message carries no audio envelope`);
  }
}

// Client-side constructors.

export function hello(clientName = "voxhub-webclient"): HelloMessage {
  return { kind: "hello", protocol_version: PROTOCOL_VERSION, client: clientName };
}

export function selectAgent(sessionId: string, agentId: string): SelectAgentMessage {
  return { kind: "select_agent", session_id: sessionId, agent_id: agentId };
}

export function selectVoice(sessionId: string, voiceId: string): SelectVoiceMessage {
  return { kind: "select_voice", session_id: sessionId, voice_id: voiceId };
}

export function utteranceText(sessionId: string, turn: number, text: string): UtteranceTextMessage {
  return { kind: "utterance_text", session_id: sessionId, turn, text };
}

export function utteranceAudio(
  sessionId: string,
  turn: number,
  audio: AudioEnvelope,
): UtteranceAudioMessage {
  return { kind: "utterance_audio", session_id: sessionId, turn, audio };
}

export function byeMessage(sessionId: string): ByeMessage {
  return { kind: "bye", session_id: sessionId };
}

// --------------------------------------------------------------------------
// Framing
// --------------------------------------------------------------------------

/** JSON with sorted keys and no whitespace, matching the gateway's output. */
export function stableStringify(value: JsonValue): string {
  if (value === null || typeof value !== "object") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(stableStringify).join(",")}]`;
  }
  const parts = Object.keys(value)
    .sort()
    .filter((key) => value[key] !== undefined)
    .map((key) => `${JSON.stringify(key)}:${stableStringify(value[key] as JsonValue)}`);
  return `{${parts.join(",")}}`;
}

function headerObject(msg: AnyMessage): Record<string, JsonValue> {
  const { audio: _audio, ...rest } = msg as unknown as { audio?: AudioEnvelope } & Record<
    string,
    JsonValue
  >;
  return rest;
}

/** Serialize an audio-free message for a WebSocket text frame. */
export function dumpControl(msg: AnyMessage): string {
  if (AUDIO_KINDS.has(msg.kind)) {
    throw new ProtocolError(`${msg.kind} carries audio and needs a binary frame`);
  }
  validateMessage(msg);
  return stableStringify(headerObject(msg));
}

/** Parse a WebSocket text frame back into a message. */
export function parseControl(text: string): AnyMessage {
  let header: unknown;
  try {
    header = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`control frame is not valid JSON: ${String(exc)}`);
  }
  if (header === null || typeof header !== "object" || Array.isArray(header)) {
    throw new ProtocolError("control frame is not a JSON object");
  }
  const record = header as Record<string, unknown>;
  if (typeof record["kind"] !== "string") {
    throw new ProtocolError("control frame missing kind");
  }
  if (AUDIO_KINDS.has(record["kind"])) {
    throw new ProtocolError(`${record["kind"]} carries audio and needs a binary frame`);
  }
  const msg = record as unknown as AnyMessage;
  validateMessage(msg);
  return msg;
}

/** Serialize one message as a self-delimiting binary frame. */
export function frameMessage(msg: AnyMessage, maxBytes = DEFAULT_MAX_FRAME_BYTES): Uint8Array {
  validateMessage(msg);
  const header = headerObject(msg);
  const audio = (msg as { audio?: AudioEnvelope }).audio;
  let binPart: Uint8Array = new Uint8Array(0);
  if (audio !== undefined) {
    header["audio_format"] = audio.formatTag;
    binPart = audio.payload;
  }
  const jsonPart = utf8Encoder.encode(stableStringify(header));
  const total = 8 + jsonPart.length + binPart.length;
  if (total > maxBytes) {
    throw new ProtocolError(`frame of ${total} bytes exceeds limit ${maxBytes}`);
  }
  const out = new Uint8Array(total);
  const view = new DataView(out.buffer);
  view.setUint32(0, jsonPart.length, false);
  out.set(jsonPart, 4);
  view.setUint32(4 + jsonPart.length, binPart.length, false);
  out.set(binPart, 8 + jsonPart.length);
  return out;
}

/** Parse one binary frame back into a message; inverse of frameMessage. */
export function unframeMessage(data: Uint8Array, maxBytes = DEFAULT_MAX_FRAME_BYTES): AnyMessage {
  if (data.length > maxBytes) {
    throw new ProtocolError(`frame of ${data.length} bytes exceeds limit ${maxBytes}`);
  }
  if (data.length < 8) {
    throw new ProtocolError("frame shorter than headers");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  const jsonLen = view.getUint32(0, false);
  if (4 + jsonLen + 4 > data.length) {
    throw new ProtocolError("frame json section overruns frame");
  }
  const binLen = view.getUint32(4 + jsonLen, false);
  const binStart = 8 + jsonLen;
  if (binStart + binLen !== data.length) {
    throw new ProtocolError("frame binary section length mismatch");
  }
  let header: unknown;
  try {
    header = JSON.parse(decodeUtf8(data.subarray(4, 4 + jsonLen)));
  } catch (exc) {
    if (exc instanceof ProtocolError) throw exc;
    throw new ProtocolError(`frame header is not valid JSON: ${String(exc)}`);
  }
  if (header === null || typeof header !== "object" || Array.isArray(header)) {
    throw new ProtocolError("frame header is not a JSON object");
  }
  const record = header as Record<string, unknown>;
  if (typeof record["kind"] !== "string") {
    throw new ProtocolError("frame header missing kind");
  }
  const audioFormat = record["audio_format"];
  delete record["audio_format"];
  if (audioFormat !== undefined) {
    if (audioFormat !== "SIMA1" && audioFormat !== "OPAQUE") {
      throw new ProtocolError(`unknown audio format '${String(audioFormat)}'`);
    }
    record["audio"] = { formatTag: audioFormat, payload: data.subarray(binStart) };
  } else if (binLen > 0) {
    throw new ProtocolError("binary section present without audio_format");
  }
  const msg = record as unknown as AnyMessage;
  validateMessage(msg);
  return msg;
}

/** Parse a byte stream of concatenated frames, in order. */
export function* iterFrames(
  data: Uint8Array,
  maxBytes = DEFAULT_MAX_FRAME_BYTES,
): Generator<AnyMessage> {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  let pos = 0;
  while (pos < data.length) {
    if (pos + 8 > data.length) {
      throw new ProtocolError("trailing bytes shorter than frame headers");
    }
    const jsonLen = view.getUint32(pos, false);
    if (pos + 8 + jsonLen > data.length) {
      throw new ProtocolError("frame json section overruns stream");
    }
    const binLen = view.getUint32(pos + 4 + jsonLen, false);
    const end = pos + 8 + jsonLen + binLen;
    if (end > data.length) {
      throw new ProtocolError("frame binary section overruns stream");
    }
    yield unframeMessage(data.subarray(pos, end), maxBytes);
    pos = end;
  }
}

/** Narrow an unknown wire value to a TurnReport, checking every field. */
export function asTurnReport(value: unknown): TurnReport {
  if (value === null || typeof value !== "object") {
    throw new ProtocolError("turn report is not an object");
  }
  const record = value as Record<string, unknown>;
  const num = (name: string): number => {
    const v = record[name];
    if (typeof v !== "number") throw new ProtocolError(`turn report field '${name}' not a number`);
    return v;
  };
  const bool = (name: string): boolean => {
    const v = record[name];
    if (typeof v !== "boolean") {
      throw new ProtocolError(`turn report field '${name}' not a boolean`);
    }
    return v;
  };
  const nums = (name: string): number[] => {
    const v = record[name];
    if (!Array.isArray(v) || v.some((x) => typeof x !== "number")) {
      throw new ProtocolError(`turn report field '${name}' not a number list`);
    }
    return v as number[];
  };
  return {
    stt_ms: num("stt_ms"),
    agent_ms: num("agent_ms"),
    tts_ms_per_chunk: nums("tts_ms_per_chunk"),
    chunk_durations_ms: nums("chunk_durations_ms"),
    first_audio_ms: num("first_audio_ms"),
    gaps_ms: nums("gaps_ms"),
    masked: bool("masked"),
    threshold_ms: num("threshold_ms"),
    threshold_exceeded: bool("threshold_exceeded"),
  };
}
