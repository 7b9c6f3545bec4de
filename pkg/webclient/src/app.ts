/**
 * Browser UI: connect to a gateway, hold spoken turns, show the reply
 * chunks as they stream, and draw each turn's playback timeline.
 *
 * Loaded as a native ES module by app/index.html after `npm run build`.
 */

import { decodeSimAudio, type ChunkAudioMessage, type TurnEndMessage } from "./protocol.js";
import { PlaybackQueue } from "./playback.js";
import { buildTimeline, describeTimeline, type Timeline } from "./timeline.js";
import { SessionClient } from "./session.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const urlInput = element<HTMLInputElement>("url");
const connectButton = element<HTMLButtonElement>("connect");
const agentSelect = element<HTMLSelectElement>("agent");
const voiceSelect = element<HTMLSelectElement>("voice");
const textInput = element<HTMLInputElement>("text");
const sayButton = element<HTMLButtonElement>("say");
const logPane = element<HTMLDivElement>("log");
const timelinePane = element<HTMLDivElement>("timeline");

let client: SessionClient | null = null;
let replyLine: HTMLDivElement | null = null;
const chunkSpans = new Map<number, HTMLSpanElement>();

const playback = new PlaybackQueue({
  onStart: (chunk) => chunkSpans.get(chunk.seq)?.classList.add("playing"),
  onEnd: (chunk) => {
    const span = chunkSpans.get(chunk.seq);
    span?.classList.remove("playing");
    span?.classList.add("played");
  },
});

function logLine(className: string, text: string): HTMLDivElement {
  const line = document.createElement("div");
  line.className = className;
  line.textContent = text;
  logPane.appendChild(line);
  logPane.scrollTop = logPane.scrollHeight;
  return line;
}

function fillSelect(select: HTMLSelectElement, ids: string[], labels: string[]): void {
  select.replaceChildren();
  ids.forEach((id, i) => {
    const option = document.createElement("option");
    option.value = id;
    option.textContent = labels[i] ?? id;
    select.appendChild(option);
  });
}

function onChunk(msg: ChunkAudioMessage): void {
  if (replyLine === null) {
    replyLine = logLine("agent", "");
  }
  const span = document.createElement("span");
  span.className = "chunk";
  span.textContent =
    (replyLine.childNodes.length > 0 ? " " : "") +
    (msg.audio.formatTag === "SIMA1" ? decodeSimAudio(msg.audio.payload).text : msg.text);
  replyLine.appendChild(span);
  chunkSpans.set(msg.seq, span);
  playback.enqueue({ seq: msg.seq, durationMs: msg.duration_ms, text: msg.text });
}

function drawTimeline(timeline: Timeline): void {
  timelinePane.replaceChildren();
  const track = document.createElement("div");
  track.className = "track";
  const scale = 100 / Math.max(timeline.finishMs, 1);
  let cursor = 0;
  const segment = (widthMs: number, className: string, title: string): void => {
    if (widthMs <= 0) return;
    const div = document.createElement("div");
    div.className = `segment ${className}`;
    div.style.left = `${cursor * scale}%`;
    div.style.width = `${widthMs * scale}%`;
    div.title = title;
    track.appendChild(div);
    cursor += widthMs;
  };
  segment(timeline.firstAudioMs, "wait", `waiting ${timeline.firstAudioMs} ms`);
  for (const bar of timeline.bars) {
    segment(bar.gapBeforeMs, "gap", `gap ${bar.gapBeforeMs} ms`);
    segment(bar.durationMs, "speech", `chunk ${bar.seq}: ${bar.durationMs} ms`);
  }
  timelinePane.appendChild(track);
  const caption = document.createElement("pre");
  caption.textContent = describeTimeline(timeline).join("\n");
  timelinePane.appendChild(caption);
}

function onTurnEnd(msg: TurnEndMessage): void {
  replyLine = null;
  chunkSpans.clear();
  if (msg.error !== undefined) {
    logLine("error", `turn failed: ${msg.error}`);
    return;
  }
  if (msg.report !== undefined) {
    drawTimeline(buildTimeline(msg.report));
  }
}

async function connect(): Promise<void> {
  connectButton.disabled = true;
  client = new SessionClient(urlInput.value, {
    onCatalog: (msg) => {
      fillSelect(
        agentSelect,
        msg.agents.map((a) => a.agent_id),
        msg.agents.map((a) => a.display_name),
      );
      fillSelect(
        voiceSelect,
        msg.voices.map((v) => v.voice_id),
        msg.voices.map((v) => v.display_name),
      );
      agentSelect.value = client?.agentId ?? agentSelect.value;
      voiceSelect.value = client?.voiceId ?? voiceSelect.value;
    },
    onTranscript: (msg) => logLine("you", `you> ${msg.text}`),
    onChunkAudio: onChunk,
    onTurnEnd: onTurnEnd,
    onError: (msg) => logLine("error", `${msg.code}: ${msg.detail}`),
    onClose: () => {
      connectButton.disabled = false;
      logLine("meta", "disconnected");
    },
  });
  try {
    const ack = await client.connect();
    logLine("meta", `connected: session ${ack.session_id}`);
    sayButton.disabled = false;
  } catch (exc) {
    logLine("error", `connect failed: ${exc instanceof Error ? exc.message : String(exc)}`);
    connectButton.disabled = false;
  }
}

function say(): void {
  if (client === null || textInput.value.trim() === "") {
    return;
  }
  playback.reset();
  client.sendUtterance(textInput.value);
  textInput.value = "";
}

connectButton.addEventListener("click", () => void connect());
agentSelect.addEventListener("change", () => client?.selectAgent(agentSelect.value));
voiceSelect.addEventListener("change", () => client?.selectVoice(voiceSelect.value));
sayButton.addEventListener("click", say);
textInput.addEventListener("keydown", (event) => {
  if (event.key === "Enter") say();
});
