/**
 * WebSocket session client for the voxhub gateway.
 *
 * One socket per conversation. The client opens with a hello handshake and
 * waits for session_ack plus the agent/voice catalog; afterwards each
 * utterance is one turn that streams back transcript, chunk_audio frames
 * in sequence order, and a turn_end report. Control messages are text
 * frames; audio-bearing messages are binary frames.
 *
 * The socket is injectable so tests can run without a network.
 */

import {
  type AnyMessage,
  type CatalogMessage,
  type ChunkAudioMessage,
  type ErrorMessage,
  type ServerMessage,
  type SessionAckMessage,
  type TranscriptMessage,
  type TurnEndMessage,
  ProtocolError,
  byeMessage,
  dumpControl,
  encodeSimAudio,
  estimateDurationMs,
  frameMessage,
  hello,
  parseControl,
  selectAgent,
  selectVoice,
  unframeMessage,
  utteranceAudio,
  utteranceText,
} from "./protocol.js";

/** The subset of the WebSocket API the client needs; real sockets conform. */
export interface SocketLike {
  send(data: string | ArrayBufferLike | Uint8Array): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string | ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const browserSocketFactory: SocketFactory = (url) => {
  const socket = new WebSocket(url);
  socket.binaryType = "arraybuffer";
  return socket as unknown as SocketLike;
};

export interface SessionEvents {
  onAck?: (msg: SessionAckMessage) => void;
  onCatalog?: (msg: CatalogMessage) => void;
  onTranscript?: (msg: TranscriptMessage) => void;
  onChunkAudio?: (msg: ChunkAudioMessage) => void;
  onTurnEnd?: (msg: TurnEndMessage) => void;
  onError?: (msg: ErrorMessage) => void;
  onClose?: () => void;
}

export interface SessionOptions {
  clientName?: string;
  socketFactory?: SocketFactory;
}

export class SessionClient {
  readonly url: string;
  private readonly events: SessionEvents;
  private readonly clientName: string;
  private readonly socketFactory: SocketFactory;
  private socket: SocketLike | null = null;
  private ackResolve: ((msg: SessionAckMessage) => void) | null = null;
  private ackReject: ((err: Error) => void) | null = null;

  sessionId: string | null = null;
  agentId: string | null = null;
  voiceId: string | null = null;
  /** Nonce for the next utterance; the gateway echoes it on every reply. */
  nextTurn = 0;

  constructor(url: string, events: SessionEvents = {}, options: SessionOptions = {}) {
    this.url = url;
    this.events = events;
    this.clientName = options.clientName ?? "voxhub-webclient";
    this.socketFactory = options.socketFactory ?? browserSocketFactory;
  }

  /** Open the socket and complete the hello handshake. */
  connect(): Promise<SessionAckMessage> {
    if (this.socket !== null) {
      return Promise.reject(new Error("already connected"));
    }
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    return new Promise<SessionAckMessage>((resolve, reject) => {
      this.ackResolve = resolve;
      this.ackReject = reject;
      socket.onopen = () => {
        socket.send(dumpControl(hello(this.clientName)));
      };
      socket.onmessage = (event) => this.dispatch(event.data);
      socket.onerror = () => this.failHandshake(new Error("socket error"));
      socket.onclose = () => {
        this.failHandshake(new Error("socket closed during handshake"));
        this.socket = null;
        this.events.onClose?.();
      };
    });
  }

  selectAgent(agentId: string): void {
    this.sendControl(selectAgent(this.requireSession(), agentId));
    this.agentId = agentId;
  }

  selectVoice(voiceId: string): void {
    this.sendControl(selectVoice(this.requireSession(), voiceId));
    this.voiceId = voiceId;
  }

  /** Send one spoken-turn utterance as text; returns the turn nonce used. */
  sendText(text: string): number {
    const turn = this.nextTurn;
    this.nextTurn += 1;
    this.sendControl(utteranceText(this.requireSession(), turn, text));
    return turn;
  }

  /** Send one utterance as a mock-audio envelope; returns the turn nonce. */
  sendUtterance(text: string): number {
    const turn = this.nextTurn;
    this.nextTurn += 1;
    const payload = encodeSimAudio(text, this.voiceId ?? "user", estimateDurationMs(text));
    const msg = utteranceAudio(this.requireSession(), turn, {
      formatTag: "SIMA1",
      payload,
    });
    this.requireSocket().send(frameMessage(msg));
    return turn;
  }

  /** Say goodbye and close the socket. */
  bye(): void {
    if (this.socket !== null && this.sessionId !== null) {
      this.sendControl(byeMessage(this.sessionId));
    }
    this.close();
  }

  close(): void {
    const socket = this.socket;
    this.socket = null;
    socket?.close();
  }

  private requireSession(): string {
    if (this.sessionId === null) {
      throw new Error("not connected: no session yet");
    }
    return this.sessionId;
  }

  private requireSocket(): SocketLike {
    if (this.socket === null) {
      throw new Error("not connected");
    }
    return this.socket;
  }

  private sendControl(msg: AnyMessage): void {
    this.requireSocket().send(dumpControl(msg));
  }

  private failHandshake(err: Error): void {
    const reject = this.ackReject;
    this.ackResolve = null;
    this.ackReject = null;
    reject?.(err);
  }

  private dispatch(data: string | ArrayBuffer): void {
    let msg: AnyMessage;
    try {
      msg = typeof data === "string" ? parseControl(data) : unframeMessage(new Uint8Array(data));
    } catch (exc) {
      if (exc instanceof ProtocolError) {
        this.events.onError?.({ kind: "error", code: "protocol", detail: exc.message });
        return;
      }
      throw exc;
    }
    this.handle(msg as ServerMessage);
  }

  private handle(msg: ServerMessage): void {
    switch (msg.kind) {
      case "session_ack": {
        this.sessionId = msg.session_id;
        this.agentId = msg.agent_id;
        this.voiceId = msg.voice_id;
        const resolve = this.ackResolve;
        this.ackResolve = null;
        this.ackReject = null;
        resolve?.(msg);
        this.events.onAck?.(msg);
        return;
      }
      case "catalog":
        this.events.onCatalog?.(msg);
        return;
      case "transcript":
        this.events.onTranscript?.(msg);
        return;
      case "chunk_audio":
        this.events.onChunkAudio?.(msg);
        return;
      case "turn_end":
        this.events.onTurnEnd?.(msg);
        return;
      case "error":
        this.failHandshake(new Error(`${msg.code}: ${msg.detail}`));
        this.events.onError?.(msg);
        return;
    }
  }
}
