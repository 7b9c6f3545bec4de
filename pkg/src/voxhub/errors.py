"""Error types shared across the gateway, backends, and protocol layers.

Every error carries a stable machine-readable ``code`` so transports can
map exceptions onto wire-level error messages without string matching.
"""


class VoxhubError(Exception):
    """Base class for all voxhub errors."""

    code = "internal"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail or self.code


class InvalidInput(VoxhubError):
    code = "invalid-input"


class UnsupportedFormat(VoxhubError):
    code = "unsupported-format"


class MalformedPayload(VoxhubError):
    code = "malformed-payload"


class FrameTooLarge(VoxhubError):
    code = "frame-too-large"


class ProtocolError(VoxhubError):
    code = "protocol"


class TranscriptionFailed(VoxhubError):
    code = "transcription-failed"


class BackendUnavailable(VoxhubError):
    code = "backend-unavailable"


class UnknownVoice(VoxhubError):
    code = "unknown-voice"


class UnknownAgent(VoxhubError):
    code = "unknown-agent"


class EmptyTurn(VoxhubError):
    code = "empty-turn"


class CannotCompare(VoxhubError):
    code = "cannot-compare"


class IncompleteTriage(VoxhubError):
    code = "incomplete-triage"


class SessionBusy(VoxhubError):
    code = "busy"


class TurnInProgress(VoxhubError):
    code = "turn-in-progress"


class UnknownSession(VoxhubError):
    code = "unknown-session"


class BadAudio(VoxhubError):
    code = "bad-audio"


class ConfigError(VoxhubError):
    code = "config"
