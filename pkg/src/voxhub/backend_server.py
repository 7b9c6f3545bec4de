"""HTTP serving side of the mock speech and dialogue backends.

Exposes the deterministic mocks over the same protocol real backends
would speak, so a gateway can be pointed at this process instead of its
in-process mocks:

    POST /v1/transcribe                 raw envelope bytes + X-Audio-Format
    POST /v1/synthesize                 {"text", "voice_id"}
    GET  /v1/voices
    POST /v1/respond                    default agent (echo)
    POST /agents/{name}/v1/respond      any builtin agent, keyed by path

Agent routes are only mounted when agents are being served. Unlike the
in-process mocks, the server always sleeps for modeled processing time
unless built with ``wallclock=False`` (handy in tests).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .agents import BUILTIN_AGENTS
from .backends import (
    DEFAULT_AGENT_MODEL,
    DEFAULT_STT_MODEL,
    DEFAULT_TTS_MODEL,
    DEFAULT_VOICES,
    AgentDescriptor,
    BuiltinAgentClient,
    Catalog,
    LatencyModel,
    MockSttClient,
    MockTtsClient,
)
from .errors import (
    InvalidInput,
    TranscriptionFailed,
    UnknownAgent,
    UnknownVoice,
    UnsupportedFormat,
)
from .protocol import AudioEnvelope, AudioFormat

DEFAULT_AGENT = "echo"


@dataclass(frozen=True)
class BackendServerConfig:
    voices: tuple = DEFAULT_VOICES
    stt_model: LatencyModel = DEFAULT_STT_MODEL
    tts_model: LatencyModel = DEFAULT_TTS_MODEL
    agent_model: LatencyModel = field(default_factory=lambda: DEFAULT_AGENT_MODEL)
    serve_agents: bool = False
    wallclock: bool = True


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def create_backend_app(config: BackendServerConfig | None = None) -> FastAPI:
    config = config or BackendServerConfig()
    catalog = Catalog.build(agents=(), voices=config.voices)
    stt = MockSttClient(model=config.stt_model, wallclock=config.wallclock)
    tts = MockTtsClient(catalog, model=config.tts_model, wallclock=config.wallclock)
    agents = BuiltinAgentClient(catalog, model=config.agent_model, wallclock=config.wallclock)

    app = FastAPI(title="voxhub-backends")

    @app.post("/v1/transcribe")
    async def transcribe(request: Request):
        fmt_header = request.headers.get("X-Audio-Format", AudioFormat.SIMA1.value)
        try:
            fmt = AudioFormat(fmt_header)
        except ValueError:
            return _error(400, "unsupported-format", f"unknown audio format {fmt_header!r}")
        payload = await request.body()
        try:
            result = await stt.transcribe(AudioEnvelope(fmt, payload))
        except (TranscriptionFailed, UnsupportedFormat) as exc:
            return _error(400, exc.code, exc.detail)
        return {"text": result.text, "processing_ms": result.processing_ms}

    @app.post("/v1/synthesize")
    async def synthesize(request: Request):
        body = await request.json()
        text = body.get("text", "")
        voice_id = body.get("voice_id", "")
        try:
            result = await tts.synthesize(text, voice_id)
        except UnknownVoice as exc:
            return _error(404, exc.code, exc.detail)
        except InvalidInput as exc:
            return _error(400, exc.code, exc.detail)
        return Response(
            content=result.env.payload,
            media_type="application/octet-stream",
            headers={
                "X-Audio-Format": result.env.format_tag.value,
                "X-Processing-Ms": str(result.processing_ms),
                "X-Duration-Ms": str(result.duration_ms),
            },
        )

    @app.get("/v1/voices")
    async def voices():
        return {
            "voices": [
                {
                    "voice_id": v.voice_id,
                    "display_name": v.display_name,
                    "ms_per_token": v.ms_per_token,
                    "base_ms": v.base_ms,
                }
                for v in tts.list_voices()
            ]
        }

    if config.serve_agents:

        async def respond_with(agent_name: str, request: Request):
            if agent_name not in BUILTIN_AGENTS:
                return _error(404, "unknown-agent", f"no builtin agent {agent_name!r}")
            body = await request.json()
            descriptor = AgentDescriptor(agent_name, agent_name, f"builtin:{agent_name}")
            try:
                result = await agents.respond(
                    descriptor, body.get("sender_id", ""), body.get("message", "")
                )
            except UnknownAgent as exc:
                return _error(404, exc.code, exc.detail)
            return [{"text": text} for text in result.replies]

        @app.post("/v1/respond")
        async def respond_default(request: Request):
            return await respond_with(DEFAULT_AGENT, request)

        @app.post("/agents/{agent_name}/v1/respond")
        async def respond_named(agent_name: str, request: Request):
            return await respond_with(agent_name, request)

    return app
