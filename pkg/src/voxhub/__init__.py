"""voxhub: a voice conversation gateway with masked sequential synthesis.

Clients hold spoken turns with a dialogue agent over one WebSocket
session. Each utterance is transcribed, answered by the selected agent,
split at punctuation into chunks, and synthesized chunk by chunk — every
chunk is streamed the moment it is ready, so later synthesis hides under
earlier playback and the reply sounds continuous.
"""

from .backends import (
    DEFAULT_AGENTS,
    DEFAULT_STT_MODEL,
    DEFAULT_TTS_MODEL,
    DEFAULT_VOICES,
    AgentDescriptor,
    Catalog,
    LatencyModel,
    VoiceDescriptor,
)
from .chunker import Chunk, ChunkingConfig, chunk_response, token_count
from .errors import VoxhubError
from .gateway import Gateway, GatewayConfig
from .pipeline import (
    Timeline,
    TurnSpec,
    compare_monolithic,
    is_masked,
    masking_condition,
    schedule,
)
from .protocol import (
    PROTOCOL_VERSION,
    AudioEnvelope,
    AudioFormat,
    Message,
    TurnReport,
    compute_duration,
    decode_sim_audio,
    encode_sim_audio,
    frame_message,
    unframe_message,
)

__version__ = "0.1.0"

__all__ = [
    "AgentDescriptor",
    "AudioEnvelope",
    "AudioFormat",
    "Catalog",
    "Chunk",
    "ChunkingConfig",
    "DEFAULT_AGENTS",
    "DEFAULT_STT_MODEL",
    "DEFAULT_TTS_MODEL",
    "DEFAULT_VOICES",
    "Gateway",
    "GatewayConfig",
    "LatencyModel",
    "Message",
    "PROTOCOL_VERSION",
    "Timeline",
    "TurnReport",
    "TurnSpec",
    "VoiceDescriptor",
    "VoxhubError",
    "__version__",
    "chunk_response",
    "compare_monolithic",
    "compute_duration",
    "decode_sim_audio",
    "encode_sim_audio",
    "frame_message",
    "is_masked",
    "masking_condition",
    "schedule",
    "token_count",
    "unframe_message",
]
