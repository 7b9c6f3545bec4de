"""Discrete-event model of one voice turn.

A turn runs transcription, the dialogue agent, then synthesizes reply
chunks strictly one after another while the client plays each chunk as
soon as it arrives and the previous one has finished. With integer
millisecond inputs the model is exact:

    ready[i] = stt + agent + sum(tts[0..i]) + transport
    start[0] = ready[0]
    start[i] = max(start[i-1] + duration[i-1], ready[i])
    end[i]   = start[i] + duration[i]
    gap[i]   = start[i] - end[i-1]          (i >= 1)

The turn is *masked* when every gap is zero: all synthesis time after the
first chunk is hidden under playback of earlier chunks. A sufficient
condition is that each chunk's synthesis takes no longer than the previous
chunk's audio. The same arithmetic serves both prediction (planning a
turn) and description (a report computed from measured stage times).
"""

from __future__ import annotations

from dataclasses import dataclass

from .backends import LatencyModel
from .errors import CannotCompare, ConfigError, EmptyTurn
from .protocol import HUMAN_RESPONSE_THRESHOLD_MS, TurnReport


@dataclass(frozen=True)
class TurnSpec:
    """Inputs to the turn model, all integer milliseconds.

    Per-chunk synthesis times come either from ``tts_ms`` directly or from
    a latency model evaluated on each chunk's audio duration.
    """

    stt_ms: int
    agent_ms: int
    durations_ms: tuple
    tts_ms: tuple | None = None
    tts_model: LatencyModel | None = None
    transport_ms: int = 0

    def __post_init__(self):
        object.__setattr__(self, "durations_ms", tuple(self.durations_ms))
        if self.tts_ms is not None:
            object.__setattr__(self, "tts_ms", tuple(self.tts_ms))
        if self.stt_ms < 0 or self.agent_ms < 0 or self.transport_ms < 0:
            raise ConfigError("stage times must be non-negative")
        if any(d < 0 for d in self.durations_ms):
            raise ConfigError("chunk durations must be non-negative")
        if self.tts_ms is None and self.tts_model is None:
            raise ConfigError("provide tts_ms or tts_model")
        if self.tts_ms is not None:
            if len(self.tts_ms) != len(self.durations_ms):
                raise ConfigError("tts_ms and durations_ms must have equal length")
            if any(p < 0 for p in self.tts_ms):
                raise ConfigError("tts times must be non-negative")

    @property
    def n_chunks(self) -> int:
        return len(self.durations_ms)

    def resolved_tts_ms(self) -> tuple:
        if self.tts_ms is not None:
            return self.tts_ms
        return tuple(self.tts_model.evaluate(duration_ms=d) for d in self.durations_ms)


@dataclass(frozen=True)
class Timeline:
    """Computed per-chunk event times for one turn."""

    ready_ms: tuple
    start_ms: tuple
    end_ms: tuple
    first_audio_ms: int
    gaps_ms: tuple
    masked: bool


def schedule(spec: TurnSpec) -> Timeline:
    """Run the recurrences and return the full timeline."""
    if spec.n_chunks == 0:
        raise EmptyTurn("turn has no chunks to schedule")
    tts = spec.resolved_tts_ms()
    base = spec.stt_ms + spec.agent_ms
    ready = []
    acc = base
    for p in tts:
        acc += p
        ready.append(acc + spec.transport_ms)
    start = [ready[0]]
    for i in range(1, spec.n_chunks):
        start.append(max(start[i - 1] + spec.durations_ms[i - 1], ready[i]))
    end = [s + d for s, d in zip(start, spec.durations_ms)]
    gaps = tuple(start[i] - end[i - 1] for i in range(1, spec.n_chunks))
    return Timeline(
        ready_ms=tuple(ready),
        start_ms=tuple(start),
        end_ms=tuple(end),
        first_audio_ms=start[0],
        gaps_ms=gaps,
        masked=all(g == 0 for g in gaps),
    )


def is_masked(timeline: Timeline, tolerance_ms: int = 0) -> bool:
    """True iff every inter-chunk gap is within ``tolerance_ms``."""
    return all(g <= tolerance_ms for g in timeline.gaps_ms)


def masking_condition(spec: TurnSpec) -> bool:
    """Sufficient condition for a gapless turn.

    True iff each chunk's synthesis time is at most the previous chunk's
    audio duration. Implies ``schedule(spec).masked``; the converse does
    not hold, because slack accumulated early can absorb one slow chunk.
    """
    tts = spec.resolved_tts_ms()
    return all(tts[i] <= spec.durations_ms[i - 1] for i in range(1, spec.n_chunks))


@dataclass(frozen=True)
class MonolithicComparison:
    first_audio_chunked_ms: int
    first_audio_mono_ms: int
    saving_ms: int


def compare_monolithic(spec: TurnSpec) -> MonolithicComparison:
    """First-audio latency of chunked synthesis vs one whole-reply call.

    Needs a latency model (not explicit per-chunk times) so the monolithic
    call's processing time can be evaluated on the summed audio duration.
    """
    if spec.tts_model is None:
        raise CannotCompare("monolithic comparison needs a tts latency model")
    chunked = schedule(spec).first_audio_ms
    mono_processing = spec.tts_model.evaluate(duration_ms=sum(spec.durations_ms))
    mono = spec.stt_ms + spec.agent_ms + mono_processing + spec.transport_ms
    return MonolithicComparison(
        first_audio_chunked_ms=chunked,
        first_audio_mono_ms=mono,
        saving_ms=mono - chunked,
    )


def build_turn_report(
    stt_ms: int,
    agent_ms: int,
    tts_ms: list,
    durations_ms: list,
    transport_ms: int = 0,
    threshold_ms: int = HUMAN_RESPONSE_THRESHOLD_MS,
) -> TurnReport:
    """Descriptive path: fold measured stage times into a TurnReport.

    A turn that produced no chunks (agent had nothing to say) reports
    zeros and counts as vacuously masked.
    """
    if not durations_ms:
        return TurnReport(
            stt_ms=stt_ms,
            agent_ms=agent_ms,
            tts_ms_per_chunk=(),
            chunk_durations_ms=(),
            first_audio_ms=0,
            gaps_ms=(),
            masked=True,
            threshold_ms=threshold_ms,
            threshold_exceeded=False,
        )
    timeline = schedule(
        TurnSpec(
            stt_ms=stt_ms,
            agent_ms=agent_ms,
            durations_ms=tuple(durations_ms),
            tts_ms=tuple(tts_ms),
            transport_ms=transport_ms,
        )
    )
    return TurnReport(
        stt_ms=stt_ms,
        agent_ms=agent_ms,
        tts_ms_per_chunk=tuple(tts_ms),
        chunk_durations_ms=tuple(durations_ms),
        first_audio_ms=timeline.first_audio_ms,
        gaps_ms=timeline.gaps_ms,
        masked=timeline.masked,
        threshold_ms=threshold_ms,
        threshold_exceeded=timeline.first_audio_ms > threshold_ms,
    )


# --------------------------------------------------------------------------
# Parameter sweeps
# --------------------------------------------------------------------------

SWEEP_CSV_HEADER = "rtf,stt_ms,agent_ms,n_chunks,chunk_ms,first_audio_ms,max_gap_ms,masked"


@dataclass(frozen=True)
class SweepRow:
    rtf: float
    stt_ms: int
    agent_ms: int
    n_chunks: int
    chunk_ms: int
    first_audio_ms: int
    max_gap_ms: int
    masked: bool


def sweep(
    rtfs: list,
    n_chunks_options: list = (3,),
    chunk_ms_options: list = (2000,),
    stt_ms: int = 800,
    agent_ms: int = 100,
) -> list:
    """Schedule one equal-chunk turn per grid point.

    Grid order is rtf-major, then chunk count, then chunk duration; an
    empty dimension yields an empty table.
    """
    rows = []
    for rtf in rtfs:
        model = LatencyModel.proportional(rtf)
        for n in n_chunks_options:
            for chunk_ms in chunk_ms_options:
                timeline = schedule(
                    TurnSpec(
                        stt_ms=stt_ms,
                        agent_ms=agent_ms,
                        durations_ms=(chunk_ms,) * n,
                        tts_model=model,
                    )
                )
                rows.append(
                    SweepRow(
                        rtf=rtf,
                        stt_ms=stt_ms,
                        agent_ms=agent_ms,
                        n_chunks=n,
                        chunk_ms=chunk_ms,
                        first_audio_ms=timeline.first_audio_ms,
                        max_gap_ms=max(timeline.gaps_ms, default=0),
                        masked=timeline.masked,
                    )
                )
    return rows


def sweep_csv(rows: list) -> str:
    """Render sweep rows as CSV text with the canonical header."""
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.rtf:g},{r.stt_ms},{r.agent_ms},{r.n_chunks},{r.chunk_ms},"
            f"{r.first_audio_ms},{r.max_gap_ms},{str(r.masked).lower()}"
        )
    return "\n".join(lines) + "\n"
