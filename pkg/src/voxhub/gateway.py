"""The connection hub: sessions, turn execution, and latency accounting.

Each utterance runs transcription, the selected dialogue agent, reply
chunking, then strictly sequential synthesis, streaming every chunk the
moment it is ready. Turn timing is observed at every stage boundary and
folded into a TurnReport through the same arithmetic the planner uses, so
simulated-time runs reproduce the model exactly.

In simulated time, stage clocks advance by the backends' reported
processing times instead of sleeping, which makes runs instant and
bit-reproducible; wall-clock mode measures real elapsed time around the
same calls.
"""

from __future__ import annotations

import itertools
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import protocol
from .agents import REPROMPT_INSTRUCTION
from .backends import (
    DEFAULT_AGENT_MODEL,
    DEFAULT_AGENTS,
    DEFAULT_STT_MODEL,
    DEFAULT_TTS_MODEL,
    DEFAULT_VOICES,
    AgentDescriptor,
    BuiltinAgentClient,
    Catalog,
    LatencyModel,
    MockSttClient,
    MockTtsClient,
    RemoteAgentClient,
    RemoteSttClient,
    RemoteTtsClient,
    VoiceDescriptor,
)
from .chunker import ChunkingConfig, chunk_response
from .errors import (
    BackendUnavailable,
    BadAudio,
    ConfigError,
    FrameTooLarge,
    ProtocolError,
    SessionBusy,
    TranscriptionFailed,
    TurnInProgress,
    UnknownSession,
    UnsupportedFormat,
    VoxhubError,
)
from .pipeline import build_turn_report
from .protocol import (
    DEFAULT_MAX_FRAME_BYTES,
    PROTOCOL_VERSION,
    Message,
    SessionState,
    SessionStatus,
)

STT_URL_ENV = "VOXHUB_STT_URL"
TTS_URL_ENV = "VOXHUB_TTS_URL"

TIME_MODES = ("wallclock", "simulated")


@dataclass(frozen=True)
class GatewayConfig:
    """Everything the gateway needs to start serving."""

    listen: str = "127.0.0.1:8700"
    time_mode: str = "simulated"
    max_sessions: int = 100
    max_frame_bytes: int = DEFAULT_MAX_FRAME_BYTES
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    stt_endpoint: str = "builtin"
    tts_endpoint: str = "builtin"
    stt_model: LatencyModel = DEFAULT_STT_MODEL
    tts_model: LatencyModel = DEFAULT_TTS_MODEL
    agent_model: LatencyModel = DEFAULT_AGENT_MODEL
    agents: tuple = DEFAULT_AGENTS
    voices: tuple = DEFAULT_VOICES

    def __post_init__(self):
        if self.time_mode not in TIME_MODES:
            raise ConfigError(f"time_mode must be one of {TIME_MODES}")
        if self.max_sessions < 1:
            raise ConfigError("max_sessions must be >= 1")
        if self.time_mode == "simulated":
            remote = [
                name
                for name, endpoint in (("stt", self.stt_endpoint), ("tts", self.tts_endpoint))
                if endpoint != "builtin"
            ] + [a.agent_id for a in self.agents if not a.is_builtin]
            if remote:
                raise ConfigError(
                    f"simulated time requires builtin backends; remote: {remote}"
                )
        Catalog.build(self.agents, self.voices)  # id uniqueness

    @property
    def wallclock(self) -> bool:
        return self.time_mode == "wallclock"

    @classmethod
    def from_dict(cls, data: dict, apply_env: bool = True) -> "GatewayConfig":
        chunking_data = data.get("chunking", {})
        chunking = ChunkingConfig(
            terminators=frozenset(chunking_data.get("terminators", ".!?;:")),
            soft_breaks=frozenset(chunking_data.get("soft_breaks", ",")),
            max_tokens=chunking_data.get("max_tokens", 12),
            min_tokens=chunking_data.get("min_tokens", 3),
            insert_mark=chunking_data.get("insert_mark", ","),
            merge_short=chunking_data.get("merge_short", True),
        )
        agents = tuple(
            AgentDescriptor(a["agent_id"], a.get("display_name", a["agent_id"]), a["endpoint"])
            for a in data.get("agents", [])
        ) or DEFAULT_AGENTS
        voices = tuple(
            VoiceDescriptor(
                v["voice_id"],
                v.get("display_name", v["voice_id"]),
                ms_per_token=v.get("ms_per_token", 400),
                base_ms=v.get("base_ms", 120),
            )
            for v in data.get("voices", [])
        ) or DEFAULT_VOICES
        stt_endpoint = data.get("stt", {}).get("endpoint", "builtin")
        tts_endpoint = data.get("tts", {}).get("endpoint", "builtin")
        if apply_env:
            stt_endpoint = os.environ.get(STT_URL_ENV, stt_endpoint)
            tts_endpoint = os.environ.get(TTS_URL_ENV, tts_endpoint)

        def model(section: str, fallback: LatencyModel) -> LatencyModel:
            raw = data.get(section, {}).get("model")
            return LatencyModel.from_dict(raw) if raw else fallback

        return cls(
            listen=data.get("listen", "127.0.0.1:8700"),
            time_mode=data.get("time_mode", "simulated"),
            max_sessions=data.get("max_sessions", 100),
            max_frame_bytes=data.get("max_frame_bytes", DEFAULT_MAX_FRAME_BYTES),
            chunking=chunking,
            stt_endpoint=stt_endpoint,
            tts_endpoint=tts_endpoint,
            stt_model=model("stt", DEFAULT_STT_MODEL),
            tts_model=model("tts", DEFAULT_TTS_MODEL),
            agent_model=LatencyModel.from_dict(data["agent_model"])
            if "agent_model" in data
            else DEFAULT_AGENT_MODEL,
            agents=agents,
            voices=voices,
        )

    @classmethod
    def from_file(cls, path: str | Path, apply_env: bool = True) -> "GatewayConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        return cls.from_dict(data, apply_env=apply_env)


class _StageClock:
    """Stage-boundary timestamps: real monotonic ms, or modeled ms."""

    def __init__(self, wallclock: bool):
        self.wallclock = wallclock
        self._virtual = 0

    def now(self) -> float:
        if self.wallclock:
            return time.monotonic() * 1000.0
        return self._virtual

    def advance(self, ms: int) -> None:
        if not self.wallclock:
            self._virtual += ms


@dataclass
class TurnContext:
    """Measured stage boundaries for one turn, all ms since receipt."""

    turn: int
    stt_ms: int = 0
    agent_ms: int = 0
    tts_ms: list = field(default_factory=list)
    durations_ms: list = field(default_factory=list)
    chunk_texts: list = field(default_factory=list)


@dataclass
class _SessionRecord:
    state: SessionState
    turns: list = field(default_factory=list)


class Gateway:
    """Routes each session's utterances through STT, agent, and TTS."""

    def __init__(self, config: GatewayConfig | None = None):
        self.config = config or GatewayConfig()
        self.catalog = Catalog.build(self.config.agents, self.config.voices)
        wall = self.config.wallclock
        if self.config.stt_endpoint == "builtin":
            self.stt = MockSttClient(model=self.config.stt_model, wallclock=wall)
        else:
            self.stt = RemoteSttClient(self.config.stt_endpoint)
        if self.config.tts_endpoint == "builtin":
            self.tts = MockTtsClient(self.catalog, model=self.config.tts_model, wallclock=wall)
        else:
            self.tts = RemoteTtsClient(self.config.tts_endpoint)
        self.builtin_agents = BuiltinAgentClient(
            self.catalog, model=self.config.agent_model, wallclock=wall
        )
        self.remote_agents = RemoteAgentClient()
        self._sessions: dict = {}
        self._session_ids = itertools.count(1)

    # -- session lifecycle --------------------------------------------------

    def open_session(self, msg: Message) -> tuple:
        """Returns ``(session_id, [session_ack, catalog])``."""
        if msg.kind != "hello":
            raise ProtocolError(f"expected hello, got {msg.kind!r}")
        if msg.get("protocol_version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"unsupported protocol version {msg.get('protocol_version')!r}"
            )
        active = sum(
            1 for rec in self._sessions.values() if rec.state.status is not SessionStatus.CLOSED
        )
        if active >= self.config.max_sessions:
            raise SessionBusy(f"gateway is at capacity ({self.config.max_sessions} sessions)")
        listing = self.catalog.list_catalog()
        if not listing["agents"] or not listing["voices"]:
            raise ConfigError("catalog has no agents or no voices")
        session_id = f"s{next(self._session_ids)}"
        state = SessionState(
            session_id=session_id,
            agent_id=listing["agents"][0].agent_id,
            voice_id=listing["voices"][0].voice_id,
        )
        self._sessions[session_id] = _SessionRecord(state=state)
        return session_id, [
            protocol.session_ack(session_id, state.agent_id, state.voice_id),
            protocol.catalog_message(
                session_id,
                agents=[
                    {"agent_id": a.agent_id, "display_name": a.display_name}
                    for a in listing["agents"]
                ],
                voices=[
                    {"voice_id": v.voice_id, "display_name": v.display_name}
                    for v in listing["voices"]
                ],
            ),
        ]

    def _record(self, session_id: str) -> _SessionRecord:
        rec = self._sessions.get(session_id)
        if rec is None or rec.state.status is SessionStatus.CLOSED:
            raise UnknownSession(f"no open session {session_id!r}")
        return rec

    def handle_control(self, session_id: str, msg: Message) -> Message:
        """select_agent / select_voice; takes effect from the next turn."""
        rec = self._record(session_id)
        if rec.state.status is SessionStatus.IN_TURN:
            raise TurnInProgress("cannot change settings while a turn is running")
        if msg.kind == "select_agent":
            agent = self.catalog.agent(msg.get("agent_id"))
            rec.state.agent_id = agent.agent_id
        elif msg.kind == "select_voice":
            voice = self.catalog.voice(msg.get("voice_id"))
            rec.state.voice_id = voice.voice_id
        else:
            raise ProtocolError(f"{msg.kind!r} is not a control message")
        return protocol.session_ack(session_id, rec.state.agent_id, rec.state.voice_id)

    def close_session(self, session_id: str) -> None:
        rec = self._sessions.get(session_id)
        if rec is not None:
            rec.state.status = SessionStatus.CLOSED
            self.builtin_agents.drop_sender(session_id)

    # -- turn execution -----------------------------------------------------

    async def _agent_respond(self, agent_id: str, session_id: str, text: str):
        agent = self.catalog.agent(agent_id)
        if agent.is_builtin:
            return await self.builtin_agents.respond(agent, session_id, text)
        return await self.remote_agents.respond(agent, session_id, text)

    async def run_turn(self, session_id: str, msg: Message):
        """Async stream of transcript, chunk_audio x n, turn_end.

        Backend unavailability fails the turn fast: no apology audio is
        synthesized, the turn_end carries the error code instead.
        """
        rec = self._record(session_id)
        if rec.state.status is SessionStatus.IN_TURN:
            raise TurnInProgress("a turn is already in flight for this session")
        if msg.kind not in ("utterance_text", "utterance_audio"):
            raise ProtocolError(f"{msg.kind!r} is not an utterance")
        if msg.audio is not None and len(msg.audio.payload) > self.config.max_frame_bytes:
            raise FrameTooLarge(
                f"audio payload of {len(msg.audio.payload)} bytes exceeds frame limit"
            )
        turn = msg.get("turn", rec.state.turn_index)
        rec.state.status = SessionStatus.IN_TURN
        clock = _StageClock(self.config.wallclock)
        ctx = TurnContext(turn=turn)
        try:
            t0 = clock.now()
            # Transcription; the text path skips it entirely.
            try:
                if msg.kind == "utterance_audio":
                    stt_result = await self.stt.transcribe(msg.audio)
                    clock.advance(stt_result.processing_ms)
                    text = stt_result.text
                else:
                    text = msg.get("text", "")
            except (TranscriptionFailed, UnsupportedFormat) as exc:
                raise BadAudio(exc.detail) from exc
            except BackendUnavailable as exc:
                yield protocol.turn_end_message(session_id, turn, None, error=exc.code)
                return
            ctx.stt_ms = round(clock.now() - t0)
            yield protocol.transcript_message(session_id, turn, text, ctx.stt_ms)

            try:
                agent_input = text if text.strip() else REPROMPT_INSTRUCTION
                t_agent = clock.now()
                agent_result = await self._agent_respond(
                    rec.state.agent_id, session_id, agent_input
                )
                clock.advance(agent_result.processing_ms)
                ctx.agent_ms = round(clock.now() - t_agent)

                reply_text = " ".join(agent_result.replies)
                chunks = chunk_response(reply_text, self.config.chunking)
                voice_id = rec.state.voice_id
                for seq, chunk in enumerate(chunks, start=1):
                    t_synth = clock.now()
                    synth = await self.tts.synthesize(chunk.text, voice_id)
                    clock.advance(synth.processing_ms)
                    ctx.tts_ms.append(round(clock.now() - t_synth))
                    ctx.durations_ms.append(synth.duration_ms)
                    ctx.chunk_texts.append(chunk.text)
                    yield protocol.chunk_audio_message(
                        session_id, turn, seq, chunk.text, synth.duration_ms, synth.env
                    )
            except BackendUnavailable as exc:
                yield protocol.turn_end_message(session_id, turn, None, error=exc.code)
                return

            report = build_turn_report(
                ctx.stt_ms, ctx.agent_ms, ctx.tts_ms, ctx.durations_ms
            )
            rec.turns.append(report)
            yield protocol.turn_end_message(session_id, turn, report)
        finally:
            if rec.state.status is SessionStatus.IN_TURN:
                rec.state.status = SessionStatus.IDLE
            rec.state.turn_index += 1

    # -- metrics --------------------------------------------------------------

    def metrics_snapshot(self) -> dict:
        """Aggregate first-audio and masking stats, global and per session."""

        def stats(reports: list) -> dict:
            if not reports:
                return {
                    "turns": 0,
                    "first_audio_mean_ms": 0,
                    "first_audio_p95_ms": 0,
                    "masked_fraction": 0.0,
                    "threshold_exceeded_fraction": 0.0,
                }
            firsts = sorted(r.first_audio_ms for r in reports)
            n = len(firsts)
            rank = max(0, -(-95 * n // 100) - 1)  # nearest-rank p95
            return {
                "turns": n,
                "first_audio_mean_ms": sum(firsts) / n,
                "first_audio_p95_ms": firsts[rank],
                "masked_fraction": sum(1 for r in reports if r.masked) / n,
                "threshold_exceeded_fraction": sum(
                    1 for r in reports if r.threshold_exceeded
                )
                / n,
            }

        all_reports = [r for rec in self._sessions.values() for r in rec.turns]
        return {
            "global": {"sessions": len(self._sessions), **stats(all_reports)},
            "sessions": {
                sid: stats(rec.turns) for sid, rec in sorted(self._sessions.items())
            },
        }

    def session_state(self, session_id: str) -> SessionState:
        return replace(self._record(session_id).state)


def error_for_exception(exc: VoxhubError, session_id: str | None = None) -> Message:
    """Map an internal error onto a wire error message."""
    return protocol.error_message(exc.code, exc.detail, session_id=session_id)
