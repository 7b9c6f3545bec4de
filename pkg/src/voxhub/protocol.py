"""Client/gateway message envelopes, the SIMA1 mock-audio codec, framing.

SIMA1 is a deterministic stand-in for real audio: it carries the utterance
text, the voice id, and a duration computed from a linear token model, so
transcription/synthesis round-trips and playback timing are exact. Real
audio rides through untouched under the OPAQUE tag.

SIMA1 byte layout (big-endian throughout)::

    "SIMA" | version 0x01 | u16 voice_id_len | voice_id utf-8
    | u32 duration_ms | u32 sample_rate | u32 text_len | text utf-8

Frames wrap one message as a JSON header plus a raw binary section for
audio, so payload bytes are never text-escaped::

    u32 json_len | json utf-8 | u32 bin_len | bin
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

from .chunker import token_count
from .errors import (
    FrameTooLarge,
    InvalidInput,
    MalformedPayload,
    ProtocolError,
    UnsupportedFormat,
)

if TYPE_CHECKING:
    from .backends import VoiceDescriptor

PROTOCOL_VERSION = 1
SIMA_MAGIC = b"SIMA"
SIMA_VERSION = 0x01
DEFAULT_SAMPLE_RATE = 16000
DEFAULT_MAX_FRAME_BYTES = 4 * 1024 * 1024

# Upper bound on acceptable turn-taking delay in natural conversation,
# used to flag slow first audio in turn reports.
HUMAN_RESPONSE_THRESHOLD_MS = 500


class AudioFormat(str, Enum):
    SIMA1 = "SIMA1"
    OPAQUE = "OPAQUE"


def compute_duration(text: str, voice: "VoiceDescriptor") -> int:
    """Deterministic audio duration: ``base_ms + ms_per_token * tokens``."""
    return voice.base_ms + voice.ms_per_token * token_count(text)


@dataclass(frozen=True)
class SimAudio:
    """Decoded mock audio: what was said, by which voice, for how long."""

    voice_id: str
    text: str
    duration_ms: int
    sample_rate_nominal: int = DEFAULT_SAMPLE_RATE

    @property
    def is_silence(self) -> bool:
        return self.text == ""


@dataclass(frozen=True)
class AudioEnvelope:
    """Tagged audio payload; OPAQUE bytes pass through untouched."""

    format_tag: AudioFormat
    payload: bytes


def _encode_sima_payload(sim: SimAudio) -> bytes:
    voice_bytes = sim.voice_id.encode("utf-8")
    text_bytes = sim.text.encode("utf-8")
    return b"".join(
        [
            SIMA_MAGIC,
            bytes([SIMA_VERSION]),
            struct.pack(">H", len(voice_bytes)),
            voice_bytes,
            struct.pack(">I", sim.duration_ms),
            struct.pack(">I", sim.sample_rate_nominal),
            struct.pack(">I", len(text_bytes)),
            text_bytes,
        ]
    )


def encode_sim_audio(text: str, voice: "VoiceDescriptor") -> AudioEnvelope:
    """Encode an utterance as a SIMA1 envelope with its modeled duration."""
    if not text.split():
        raise InvalidInput("cannot encode empty text; use encode_silence for silence")
    sim = SimAudio(
        voice_id=voice.voice_id,
        text=text,
        duration_ms=compute_duration(text, voice),
    )
    return AudioEnvelope(AudioFormat.SIMA1, _encode_sima_payload(sim))


def encode_silence(voice: "VoiceDescriptor", duration_ms: int) -> AudioEnvelope:
    """A silent SIMA1 envelope: empty text, explicit positive duration."""
    if duration_ms <= 0:
        raise InvalidInput("silence needs a positive duration")
    sim = SimAudio(voice_id=voice.voice_id, text="", duration_ms=duration_ms)
    return AudioEnvelope(AudioFormat.SIMA1, _encode_sima_payload(sim))


def decode_sim_audio(env: AudioEnvelope) -> SimAudio:
    """Lossless inverse of :func:`encode_sim_audio`."""
    if env.format_tag is not AudioFormat.SIMA1:
        raise UnsupportedFormat(f"cannot decode {env.format_tag.value} payloads")
    data = env.payload
    try:
        if data[:4] != SIMA_MAGIC:
            raise MalformedPayload("bad magic")
        if data[4] != SIMA_VERSION:
            raise MalformedPayload(f"unsupported SIMA version {data[4]}")
        pos = 5
        (voice_len,) = struct.unpack_from(">H", data, pos)
        pos += 2
        voice_id = data[pos : pos + voice_len].decode("utf-8")
        if len(data[pos : pos + voice_len]) != voice_len:
            raise MalformedPayload("truncated voice id")
        pos += voice_len
        duration_ms, sample_rate, text_len = struct.unpack_from(">III", data, pos)
        pos += 12
        text_bytes = data[pos : pos + text_len]
        if len(text_bytes) != text_len:
            raise MalformedPayload("truncated text")
        pos += text_len
        if pos != len(data):
            raise MalformedPayload(f"{len(data) - pos} trailing bytes")
        return SimAudio(
            voice_id=voice_id,
            text=text_bytes.decode("utf-8"),
            duration_ms=duration_ms,
            sample_rate_nominal=sample_rate,
        )
    except (struct.error, IndexError, UnicodeDecodeError) as exc:
        raise MalformedPayload(str(exc)) from exc


# --------------------------------------------------------------------------
# Messages
# --------------------------------------------------------------------------

CLIENT_KINDS = frozenset(
    {"hello", "select_agent", "select_voice", "utterance_audio", "utterance_text", "bye"}
)
SERVER_KINDS = frozenset(
    {"session_ack", "catalog", "transcript", "chunk_audio", "turn_end", "error"}
)
ALL_KINDS = CLIENT_KINDS | SERVER_KINDS

# Required JSON fields per kind, beyond "kind" itself. session_id is
# required everywhere except hello and error.
_REQUIRED_FIELDS = {
    "hello": ("protocol_version",),
    "select_agent": ("agent_id",),
    "select_voice": ("voice_id",),
    "utterance_audio": ("turn",),
    "utterance_text": ("turn", "text"),
    "bye": (),
    "session_ack": ("agent_id", "voice_id"),
    "catalog": ("agents", "voices"),
    "transcript": ("turn", "text", "stt_ms"),
    "chunk_audio": ("turn", "seq", "text", "duration_ms"),
    "turn_end": ("turn",),
    "error": ("code", "detail"),
}
_AUDIO_KINDS = frozenset({"utterance_audio", "chunk_audio"})
_NO_SESSION_KINDS = frozenset({"hello", "error"})


@dataclass(frozen=True)
class Message:
    """One protocol message: a kind, JSON-able fields, optional audio."""

    kind: str
    fields: dict = field(default_factory=dict)
    audio: AudioEnvelope | None = None

    def get(self, key: str, default: Any = None) -> Any:
        return self.fields.get(key, default)


def validate_message(msg: Message) -> None:
    """Check kind-specific invariants; raises ProtocolError on violation."""
    if msg.kind not in ALL_KINDS:
        raise ProtocolError(f"unknown message kind {msg.kind!r}")
    for name in _REQUIRED_FIELDS[msg.kind]:
        if name not in msg.fields:
            raise ProtocolError(f"{msg.kind} message missing field {name!r}")
    if msg.kind not in _NO_SESSION_KINDS and "session_id" not in msg.fields:
        raise ProtocolError(f"{msg.kind} message missing session_id")
    if msg.kind in _AUDIO_KINDS and msg.audio is None:
        raise ProtocolError(f"{msg.kind} message carries no audio envelope")


# Client-side constructors.


def hello(client_name: str = "voxhub-client", protocol_version: int = PROTOCOL_VERSION) -> Message:
    return Message("hello", {"protocol_version": protocol_version, "client": client_name})


def select_agent(session_id: str, agent_id: str) -> Message:
    return Message("select_agent", {"session_id": session_id, "agent_id": agent_id})


def select_voice(session_id: str, voice_id: str) -> Message:
    return Message("select_voice", {"session_id": session_id, "voice_id": voice_id})


def utterance_text(session_id: str, turn: int, text: str) -> Message:
    return Message("utterance_text", {"session_id": session_id, "turn": turn, "text": text})


def utterance_audio(session_id: str, turn: int, env: AudioEnvelope) -> Message:
    return Message("utterance_audio", {"session_id": session_id, "turn": turn}, audio=env)


def bye(session_id: str) -> Message:
    return Message("bye", {"session_id": session_id})


# Server-side constructors.


def session_ack(session_id: str, agent_id: str, voice_id: str) -> Message:
    return Message(
        "session_ack",
        {"session_id": session_id, "agent_id": agent_id, "voice_id": voice_id},
    )


def catalog_message(session_id: str, agents: list, voices: list) -> Message:
    return Message("catalog", {"session_id": session_id, "agents": agents, "voices": voices})


def transcript_message(session_id: str, turn: int, text: str, stt_ms: int) -> Message:
    return Message(
        "transcript",
        {"session_id": session_id, "turn": turn, "text": text, "stt_ms": stt_ms},
    )


def chunk_audio_message(
    session_id: str, turn: int, seq: int, text: str, duration_ms: int, env: AudioEnvelope
) -> Message:
    return Message(
        "chunk_audio",
        {
            "session_id": session_id,
            "turn": turn,
            "seq": seq,
            "text": text,
            "duration_ms": duration_ms,
        },
        audio=env,
    )


def turn_end_message(
    session_id: str, turn: int, report: "TurnReport | None", error: str | None = None
) -> Message:
    fields: dict = {"session_id": session_id, "turn": turn}
    if report is not None:
        fields["report"] = report.to_dict()
    if error is not None:
        fields["error"] = error
    return Message("turn_end", fields)


def error_message(code: str, detail: str, session_id: str | None = None) -> Message:
    fields: dict = {"code": code, "detail": detail}
    if session_id is not None:
        fields["session_id"] = session_id
    return Message("error", fields)


# --------------------------------------------------------------------------
# Framing
# --------------------------------------------------------------------------


def frame_message(msg: Message, max_bytes: int = DEFAULT_MAX_FRAME_BYTES) -> bytes:
    """Serialize a message to one self-delimiting frame."""
    validate_message(msg)
    header = dict(msg.fields)
    header["kind"] = msg.kind
    if msg.audio is not None:
        header["audio_format"] = msg.audio.format_tag.value
        bin_part = msg.audio.payload
    else:
        bin_part = b""
    json_part = json.dumps(header, separators=(",", ":"), sort_keys=True).encode("utf-8")
    total = 8 + len(json_part) + len(bin_part)
    if total > max_bytes:
        raise FrameTooLarge(f"frame of {total} bytes exceeds limit {max_bytes}")
    return struct.pack(">I", len(json_part)) + json_part + struct.pack(">I", len(bin_part)) + bin_part


def unframe_message(data: bytes, max_bytes: int = DEFAULT_MAX_FRAME_BYTES) -> Message:
    """Parse one frame back into a message; inverse of :func:`frame_message`."""
    if len(data) > max_bytes:
        raise FrameTooLarge(f"frame of {len(data)} bytes exceeds limit {max_bytes}")
    if len(data) < 8:
        raise ProtocolError("frame shorter than headers")
    (json_len,) = struct.unpack_from(">I", data, 0)
    if 4 + json_len + 4 > len(data):
        raise ProtocolError("frame json section overruns frame")
    json_part = data[4 : 4 + json_len]
    (bin_len,) = struct.unpack_from(">I", data, 4 + json_len)
    bin_start = 8 + json_len
    if bin_start + bin_len != len(data):
        raise ProtocolError("frame binary section length mismatch")
    bin_part = data[bin_start : bin_start + bin_len]
    try:
        header = json.loads(json_part.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"frame header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "kind" not in header:
        raise ProtocolError("frame header missing kind")
    kind = header.pop("kind")
    audio_format = header.pop("audio_format", None)
    audio = None
    if audio_format is not None:
        try:
            tag = AudioFormat(audio_format)
        except ValueError:
            raise ProtocolError(f"unknown audio format {audio_format!r}") from None
        audio = AudioEnvelope(tag, bin_part)
    elif bin_len:
        raise ProtocolError("binary section present without audio_format")
    msg = Message(kind, header, audio)
    validate_message(msg)
    return msg


def dump_control(msg: Message) -> str:
    """Serialize an audio-free message for a text frame.

    Same flat JSON object as the frame header, so both frame types parse
    with one shape.
    """
    if msg.audio is not None:
        raise ProtocolError(f"{msg.kind} carries audio and needs a binary frame")
    validate_message(msg)
    header = dict(msg.fields)
    header["kind"] = msg.kind
    return json.dumps(header, separators=(",", ":"), sort_keys=True)


def parse_control(text: str) -> Message:
    """Parse a text-frame JSON object back into a message."""
    try:
        header = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"control frame is not valid JSON: {exc}") from None
    if not isinstance(header, dict) or "kind" not in header:
        raise ProtocolError("control frame missing kind")
    kind = header.pop("kind")
    if kind in _AUDIO_KINDS:
        raise ProtocolError(f"{kind} carries audio and needs a binary frame")
    msg = Message(kind, header)
    validate_message(msg)
    return msg


def iter_frames(data: bytes, max_bytes: int = DEFAULT_MAX_FRAME_BYTES):
    """Yield messages from a byte stream of concatenated frames."""
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise ProtocolError("trailing bytes shorter than frame headers")
        (json_len,) = struct.unpack_from(">I", data, pos)
        if pos + 8 + json_len > len(data):
            raise ProtocolError("frame json section overruns stream")
        (bin_len,) = struct.unpack_from(">I", data, pos + 4 + json_len)
        end = pos + 8 + json_len + bin_len
        if end > len(data):
            raise ProtocolError("frame binary section overruns stream")
        yield unframe_message(data[pos:end], max_bytes=max_bytes)
        pos = end


# --------------------------------------------------------------------------
# Per-turn latency report and session bookkeeping
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TurnReport:
    """Latency instrumentation for one turn.

    ``masked`` means playback of consecutive chunks had no audible gap;
    ``threshold_exceeded`` flags first audio slower than the natural
    turn-taking threshold.
    """

    stt_ms: int
    agent_ms: int
    tts_ms_per_chunk: tuple
    chunk_durations_ms: tuple
    first_audio_ms: int
    gaps_ms: tuple
    masked: bool
    threshold_ms: int = HUMAN_RESPONSE_THRESHOLD_MS
    threshold_exceeded: bool = False

    def to_dict(self) -> dict:
        return {
            "stt_ms": self.stt_ms,
            "agent_ms": self.agent_ms,
            "tts_ms_per_chunk": list(self.tts_ms_per_chunk),
            "chunk_durations_ms": list(self.chunk_durations_ms),
            "first_audio_ms": self.first_audio_ms,
            "gaps_ms": list(self.gaps_ms),
            "masked": self.masked,
            "threshold_ms": self.threshold_ms,
            "threshold_exceeded": self.threshold_exceeded,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TurnReport":
        return cls(
            stt_ms=data["stt_ms"],
            agent_ms=data["agent_ms"],
            tts_ms_per_chunk=tuple(data["tts_ms_per_chunk"]),
            chunk_durations_ms=tuple(data["chunk_durations_ms"]),
            first_audio_ms=data["first_audio_ms"],
            gaps_ms=tuple(data["gaps_ms"]),
            masked=data["masked"],
            threshold_ms=data["threshold_ms"],
            threshold_exceeded=data["threshold_exceeded"],
        )


class SessionStatus(str, Enum):
    IDLE = "idle"
    IN_TURN = "in_turn"
    CLOSED = "closed"


@dataclass
class SessionState:
    """Per-client conversation state tracked by the gateway."""

    session_id: str
    agent_id: str
    voice_id: str
    turn_index: int = 0
    status: SessionStatus = SessionStatus.IDLE
