"""Model-agnostic speech and dialogue backends.

Every backend is reachable two ways: an in-process deterministic mock, or
a remote HTTP service speaking a small fixed protocol (see
``backend_server`` for the serving side):

    POST /v1/transcribe   envelope bytes in, {"text", "processing_ms"} out
    POST /v1/synthesize   {"text", "voice_id"} in, envelope bytes out
                          (X-Processing-Ms / X-Duration-Ms / X-Audio-Format headers)
    GET  /v1/voices       {"voices": [{"voice_id", "display_name"}]}
    POST /v1/respond      {"sender_id", "message"} in, [{"text"}] out

Mock latencies come from injectable models so timing behaviour is
reproducible: in wall-clock mode a mock really sleeps for its modeled
processing time, in simulated mode it only reports it.
"""

from __future__ import annotations

import asyncio
import random
from dataclasses import dataclass, field

import httpx

from . import agents as agents_mod
from .chunker import token_count
from .errors import (
    BackendUnavailable,
    ConfigError,
    InvalidInput,
    ProtocolError,
    TranscriptionFailed,
    UnknownAgent,
    UnknownVoice,
    VoxhubError,
)
from .protocol import (
    AudioEnvelope,
    AudioFormat,
    compute_duration,
    decode_sim_audio,
    encode_sim_audio,
)

DEFAULT_BACKEND_TIMEOUT_S = 10.0

LATENCY_KINDS = ("fixed", "per_token", "proportional")


@dataclass(frozen=True)
class LatencyModel:
    """Deterministic processing-time generator for a mock backend.

    ``fixed`` returns ``base_ms``; ``per_token`` returns
    ``base_ms + ms_per_token * tokens``; ``proportional`` returns
    ``round(rtf * duration_ms)``, rtf being processing time per unit of
    produced audio. Optional seeded jitter adds reproducible uniform noise.
    """

    kind: str
    base_ms: int = 0
    ms_per_token: int = 0
    rtf: float = 0.0
    jitter_ms: int = 0
    seed: int = 0
    _rng: random.Random = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind not in LATENCY_KINDS:
            raise ConfigError(f"unknown latency model kind {self.kind!r}")
        if self.base_ms < 0 or self.ms_per_token < 0 or self.rtf < 0 or self.jitter_ms < 0:
            raise ConfigError("latency model parameters must be non-negative")
        irrelevant = {
            "fixed": (self.ms_per_token, self.rtf),
            "per_token": (self.rtf,),
            "proportional": (self.base_ms, self.ms_per_token),
        }[self.kind]
        if any(v for v in irrelevant):
            raise ConfigError(f"latency model fields irrelevant to {self.kind!r} must be zero")
        object.__setattr__(self, "_rng", random.Random(self.seed))

    @classmethod
    def fixed(cls, base_ms: int, **kw) -> "LatencyModel":
        return cls(kind="fixed", base_ms=base_ms, **kw)

    @classmethod
    def per_token(cls, ms_per_token: int, base_ms: int = 0, **kw) -> "LatencyModel":
        return cls(kind="per_token", ms_per_token=ms_per_token, base_ms=base_ms, **kw)

    @classmethod
    def proportional(cls, rtf: float, **kw) -> "LatencyModel":
        return cls(kind="proportional", rtf=rtf, **kw)

    def evaluate(self, tokens: int = 0, duration_ms: int = 0) -> int:
        if self.kind == "fixed":
            value = self.base_ms
        elif self.kind == "per_token":
            value = self.base_ms + self.ms_per_token * tokens
        else:
            value = round(self.rtf * duration_ms)
        if self.jitter_ms:
            value += self._rng.randint(0, self.jitter_ms)
        return value

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "base_ms": self.base_ms,
            "ms_per_token": self.ms_per_token,
            "rtf": self.rtf,
            "jitter_ms": self.jitter_ms,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LatencyModel":
        return cls(
            kind=data["kind"],
            base_ms=data.get("base_ms", 0),
            ms_per_token=data.get("ms_per_token", 0),
            rtf=data.get("rtf", 0.0),
            jitter_ms=data.get("jitter_ms", 0),
            seed=data.get("seed", 0),
        )


# Default mock profiles. STT and the fixed TTS alternative mirror the CPU
# processing times the shipped defaults are calibrated against; the default
# TTS is proportional so chunk synthesis stays under chunk playback.
DEFAULT_STT_MODEL = LatencyModel.fixed(800)
DEFAULT_TTS_MODEL = LatencyModel.proportional(0.85)
FIXED_TTS_CPU_MODEL = LatencyModel.fixed(1700)
DEFAULT_AGENT_MODEL = LatencyModel.fixed(100)


@dataclass(frozen=True)
class VoiceDescriptor:
    """A synthesizer voice plus its deterministic duration model."""

    voice_id: str
    display_name: str
    ms_per_token: int = 400
    base_ms: int = 120


@dataclass(frozen=True)
class AgentDescriptor:
    """A dialogue agent: builtin tag (``builtin:<name>``) or webhook URL."""

    agent_id: str
    display_name: str
    endpoint: str

    @property
    def is_builtin(self) -> bool:
        return self.endpoint.startswith("builtin:")

    @property
    def builtin_name(self) -> str:
        return self.endpoint.split(":", 1)[1]


DEFAULT_VOICES = (
    VoiceDescriptor("f1", "Female 1", ms_per_token=400, base_ms=120),
    VoiceDescriptor("m1", "Male 1", ms_per_token=420, base_ms=140),
)
DEFAULT_AGENTS = (
    AgentDescriptor("anamnesis", "Anamnesis", "builtin:anamnesis"),
    AgentDescriptor("triage", "Triage", "builtin:triage"),
)


@dataclass(frozen=True)
class Catalog:
    """Configured agents and voices, unique by id, listed sorted by id."""

    agents: dict
    voices: dict

    @classmethod
    def build(cls, agents=DEFAULT_AGENTS, voices=DEFAULT_VOICES) -> "Catalog":
        agent_map: dict = {}
        for a in agents:
            if a.agent_id in agent_map:
                raise ConfigError(f"duplicate agent id {a.agent_id!r}")
            agent_map[a.agent_id] = a
        voice_map: dict = {}
        for v in voices:
            if v.voice_id in voice_map:
                raise ConfigError(f"duplicate voice id {v.voice_id!r}")
            voice_map[v.voice_id] = v
        return cls(agents=agent_map, voices=voice_map)

    def list_catalog(self) -> dict:
        return {
            "agents": [self.agents[k] for k in sorted(self.agents)],
            "voices": [self.voices[k] for k in sorted(self.voices)],
        }

    def voice(self, voice_id: str) -> VoiceDescriptor:
        try:
            return self.voices[voice_id]
        except KeyError:
            raise UnknownVoice(f"voice {voice_id!r} is not in the catalog") from None

    def agent(self, agent_id: str) -> AgentDescriptor:
        try:
            return self.agents[agent_id]
        except KeyError:
            raise UnknownAgent(f"agent {agent_id!r} is not in the catalog") from None


# --------------------------------------------------------------------------
# Call results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptionResult:
    text: str
    processing_ms: int
    empty: bool = False


@dataclass(frozen=True)
class SynthesisResult:
    env: AudioEnvelope
    processing_ms: int
    duration_ms: int


@dataclass(frozen=True)
class AgentReplies:
    replies: tuple
    processing_ms: int


async def _maybe_sleep(wallclock: bool, ms: int) -> None:
    if wallclock and ms > 0:
        await asyncio.sleep(ms / 1000.0)


# --------------------------------------------------------------------------
# Mock backends
# --------------------------------------------------------------------------


class MockSttClient:
    """Transcribes SIMA1 envelopes by decoding them; latency is modeled."""

    def __init__(self, model: LatencyModel = DEFAULT_STT_MODEL, wallclock: bool = False):
        self.model = model
        self.wallclock = wallclock

    async def transcribe(self, env: AudioEnvelope) -> TranscriptionResult:
        if env.format_tag is not AudioFormat.SIMA1:
            raise TranscriptionFailed("mock STT only understands SIMA1 audio")
        try:
            sim = decode_sim_audio(env)
        except VoxhubError as exc:
            raise TranscriptionFailed(f"undecodable audio: {exc.detail}") from exc
        processing = self.model.evaluate(
            tokens=token_count(sim.text), duration_ms=sim.duration_ms
        )
        await _maybe_sleep(self.wallclock, processing)
        text = sim.text.strip()
        return TranscriptionResult(text=text, processing_ms=processing, empty=not text)


class MockTtsClient:
    """Synthesizes SIMA1 envelopes; latency modeled, capacity optional."""

    def __init__(
        self,
        catalog: Catalog,
        model: LatencyModel = DEFAULT_TTS_MODEL,
        wallclock: bool = False,
        max_concurrent: int | None = None,
    ):
        self.catalog = catalog
        self.model = model
        self.wallclock = wallclock
        self._capacity = asyncio.Semaphore(max_concurrent) if max_concurrent else None

    async def synthesize(self, text: str, voice_id: str) -> SynthesisResult:
        if not text.split():
            raise InvalidInput("cannot synthesize empty text")
        voice = self.catalog.voice(voice_id)
        duration = compute_duration(text, voice)
        processing = self.model.evaluate(tokens=token_count(text), duration_ms=duration)
        if self._capacity is not None:
            async with self._capacity:
                await _maybe_sleep(self.wallclock, processing)
        else:
            await _maybe_sleep(self.wallclock, processing)
        env = encode_sim_audio(text, voice)
        return SynthesisResult(env=env, processing_ms=processing, duration_ms=duration)

    def list_voices(self) -> list:
        return self.catalog.list_catalog()["voices"]


class BuiltinAgentClient:
    """Runs the scripted in-process agents, one state machine per sender.

    Blank messages (or the explicit re-prompt instruction the gateway
    substitutes for an empty transcript) produce a fixed apology without
    advancing the conversation.
    """

    def __init__(
        self,
        catalog: Catalog,
        model: LatencyModel = DEFAULT_AGENT_MODEL,
        wallclock: bool = False,
    ):
        self.catalog = catalog
        self.model = model
        self.wallclock = wallclock
        self._conversations: dict = {}

    def _conversation(self, agent: AgentDescriptor, sender_id: str):
        key = (agent.agent_id, sender_id)
        if key not in self._conversations:
            self._conversations[key] = agents_mod.create_builtin_agent(agent.builtin_name)
        return self._conversations[key]

    async def respond(self, agent: AgentDescriptor, sender_id: str, message: str) -> AgentReplies:
        if not agent.is_builtin:
            raise UnknownAgent(f"{agent.agent_id!r} is not a builtin agent")
        processing = self.model.evaluate(tokens=token_count(message))
        await _maybe_sleep(self.wallclock, processing)
        if message == agents_mod.REPROMPT_INSTRUCTION or not message.strip():
            return AgentReplies(replies=(agents_mod.REPROMPT_REPLY,), processing_ms=processing)
        conversation = self._conversation(agent, sender_id)
        replies = conversation.respond(message)
        return AgentReplies(replies=tuple(replies), processing_ms=processing)

    def drop_sender(self, sender_id: str) -> None:
        for key in [k for k in self._conversations if k[1] == sender_id]:
            del self._conversations[key]


# --------------------------------------------------------------------------
# Remote backends (HTTP protocol clients)
# --------------------------------------------------------------------------


def _raise_unavailable(exc: Exception) -> None:
    raise BackendUnavailable(f"backend request failed: {exc}") from exc


class RemoteSttClient:
    def __init__(
        self,
        base_url: str,
        client: httpx.AsyncClient | None = None,
        timeout_s: float = DEFAULT_BACKEND_TIMEOUT_S,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.AsyncClient()
        self.timeout_s = timeout_s

    async def transcribe(self, env: AudioEnvelope) -> TranscriptionResult:
        try:
            resp = await self._client.post(
                f"{self.base_url}/v1/transcribe",
                content=env.payload,
                headers={"X-Audio-Format": env.format_tag.value},
                timeout=self.timeout_s,
            )
        except httpx.HTTPError as exc:
            _raise_unavailable(exc)
        if resp.status_code != 200:
            raise TranscriptionFailed(f"STT backend returned {resp.status_code}")
        try:
            body = resp.json()
            text = body["text"]
            processing = int(body["processing_ms"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed STT response: {exc}") from exc
        return TranscriptionResult(text=text, processing_ms=processing, empty=not text.strip())


class RemoteTtsClient:
    def __init__(
        self,
        base_url: str,
        client: httpx.AsyncClient | None = None,
        timeout_s: float = DEFAULT_BACKEND_TIMEOUT_S,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.AsyncClient()
        self.timeout_s = timeout_s

    async def synthesize(self, text: str, voice_id: str) -> SynthesisResult:
        try:
            resp = await self._client.post(
                f"{self.base_url}/v1/synthesize",
                json={"text": text, "voice_id": voice_id},
                timeout=self.timeout_s,
            )
        except httpx.HTTPError as exc:
            _raise_unavailable(exc)
        if resp.status_code == 404:
            raise UnknownVoice(f"voice {voice_id!r} rejected by TTS backend")
        if resp.status_code == 400:
            raise InvalidInput("TTS backend rejected the request")
        if resp.status_code != 200:
            raise BackendUnavailable(f"TTS backend returned {resp.status_code}")
        try:
            fmt = AudioFormat(resp.headers["X-Audio-Format"])
            processing = int(resp.headers["X-Processing-Ms"])
            duration = int(resp.headers["X-Duration-Ms"])
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"malformed TTS response headers: {exc}") from exc
        return SynthesisResult(
            env=AudioEnvelope(fmt, resp.content),
            processing_ms=processing,
            duration_ms=duration,
        )

    async def list_voices(self) -> list:
        try:
            resp = await self._client.get(f"{self.base_url}/v1/voices", timeout=self.timeout_s)
        except httpx.HTTPError as exc:
            _raise_unavailable(exc)
        try:
            return resp.json()["voices"]
        except (ValueError, KeyError) as exc:
            raise ProtocolError(f"malformed voices response: {exc}") from exc


class RemoteAgentClient:
    """Talks to a reply-webhook agent: sender and message in, texts out."""

    def __init__(
        self,
        client: httpx.AsyncClient | None = None,
        timeout_s: float = DEFAULT_BACKEND_TIMEOUT_S,
    ):
        self._client = client or httpx.AsyncClient()
        self.timeout_s = timeout_s

    async def respond(self, agent: AgentDescriptor, sender_id: str, message: str) -> AgentReplies:
        url = agent.endpoint.rstrip("/")
        if not url.endswith("/v1/respond"):
            url = f"{url}/v1/respond"
        try:
            resp = await self._client.post(
                url,
                json={"sender_id": sender_id, "message": message},
                timeout=self.timeout_s,
            )
        except httpx.HTTPError as exc:
            _raise_unavailable(exc)
        if resp.status_code != 200:
            raise BackendUnavailable(f"agent backend returned {resp.status_code}")
        try:
            body = resp.json()
            replies = tuple(item["text"] for item in body)
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed agent response: {exc}") from exc
        return AgentReplies(replies=replies, processing_ms=0)
