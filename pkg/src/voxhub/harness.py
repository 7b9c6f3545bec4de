"""Scripted conversations and load runs against an in-process gateway.

Two entry points back the CLI: :func:`simulate` replays a scenario script
(utterances plus expectations about the outcome) and reports pass/fail;
:func:`bench` drives many concurrent sessions and aggregates per-turn
latency, per-turn gateway overhead, message-ordering checks, and
cross-session leakage checks.

Everything here consumes only the public gateway surface, so these runs
exercise the same paths a remote client would.
"""

from __future__ import annotations

import asyncio
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import protocol
from .backends import AgentDescriptor, VoiceDescriptor
from .errors import ConfigError, InvalidInput
from .gateway import Gateway, GatewayConfig
from .protocol import Message, TurnReport, encode_sim_audio, frame_message

_COLOUR_RE = re.compile(r"triage code is (\w+)")


# --------------------------------------------------------------------------
# Scenario scripts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioExpectation:
    """What must hold after the script has been replayed."""

    final_colour: str | None = None
    summary_contains: tuple = ()
    masked: tuple | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioExpectation":
        return cls(
            final_colour=data.get("final_colour"),
            summary_contains=tuple(data.get("summary_contains", ())),
            masked=tuple(data["masked"]) if "masked" in data else None,
        )


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    agent_id: str
    utterances: tuple
    voice_id: str | None = None
    expect: ScenarioExpectation = field(default_factory=ScenarioExpectation)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioScript":
        try:
            return cls(
                name=data["name"],
                agent_id=data["agent_id"],
                utterances=tuple(data["utterances"]),
                voice_id=data.get("voice_id"),
                expect=ScenarioExpectation.from_dict(data.get("expect", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario script missing key {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioScript":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"scenario file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from None
        return cls.from_dict(data)


@dataclass
class TurnRecord:
    """Everything observed for one utterance."""

    utterance: str
    transcript: str = ""
    chunk_texts: list = field(default_factory=list)
    chunk_durations_ms: list = field(default_factory=list)
    report: TurnReport | None = None
    error: str | None = None

    @property
    def reply_text(self) -> str:
        return " ".join(self.chunk_texts)


@dataclass
class ScriptRun:
    session_id: str
    agent_id: str
    voice_id: str
    turns: list = field(default_factory=list)
    messages: list = field(default_factory=list)


def find_ordering_violation(turn_messages: list) -> str | None:
    """Check transcript, chunk_audio 1..n, turn_end — in that order."""
    if not turn_messages:
        return "no messages for turn"
    if turn_messages[0].kind != "transcript":
        return f"turn starts with {turn_messages[0].kind!r}, not transcript"
    if turn_messages[-1].kind != "turn_end":
        return f"turn ends with {turn_messages[-1].kind!r}, not turn_end"
    expected_seq = 1
    for msg in turn_messages[1:-1]:
        if msg.kind != "chunk_audio":
            return f"unexpected {msg.kind!r} between transcript and turn_end"
        if msg.get("seq") != expected_seq:
            return f"chunk seq {msg.get('seq')} where {expected_seq} was expected"
        expected_seq += 1
    return None


async def run_script(gateway: Gateway, script: ScenarioScript, use_audio: bool = True) -> ScriptRun:
    """Replay a script over the in-process gateway, collecting every turn."""
    session_id, greetings = gateway.open_session(protocol.hello())
    if script.agent_id:
        gateway.handle_control(session_id, protocol.select_agent(session_id, script.agent_id))
    if script.voice_id:
        gateway.handle_control(session_id, protocol.select_voice(session_id, script.voice_id))
    state = gateway.session_state(session_id)
    run = ScriptRun(
        session_id=session_id,
        agent_id=state.agent_id,
        voice_id=state.voice_id,
        messages=list(greetings),
    )
    voice = gateway.catalog.voice(state.voice_id)
    for turn_index, utterance in enumerate(script.utterances):
        if use_audio:
            msg = protocol.utterance_audio(
                session_id, turn_index, encode_sim_audio(utterance, voice)
            )
        else:
            msg = protocol.utterance_text(session_id, turn_index, utterance)
        record = TurnRecord(utterance=utterance)
        async for out in gateway.run_turn(session_id, msg):
            run.messages.append(out)
            if out.kind == "transcript":
                record.transcript = out.get("text")
            elif out.kind == "chunk_audio":
                record.chunk_texts.append(out.get("text"))
                record.chunk_durations_ms.append(out.get("duration_ms"))
            elif out.kind == "turn_end":
                record.error = out.get("error")
                if out.get("report") is not None:
                    record.report = TurnReport.from_dict(out.get("report"))
        run.turns.append(record)
    gateway.close_session(session_id)
    return run


def check_expectations(run: ScriptRun, expect: ScenarioExpectation) -> list:
    """Returns a list of human-readable failures; empty means pass."""
    failures = []
    for i, record in enumerate(run.turns):
        if record.error:
            failures.append(f"turn {i} failed with error {record.error!r}")
    final_reply = run.turns[-1].reply_text if run.turns else ""
    if expect.final_colour is not None:
        match = _COLOUR_RE.search(final_reply)
        got = match.group(1) if match else None
        if got != expect.final_colour:
            failures.append(
                f"final colour: expected {expect.final_colour!r}, got {got!r} "
                f"in reply {final_reply!r}"
            )
    for needle in expect.summary_contains:
        if needle.lower() not in final_reply.lower():
            failures.append(f"final reply does not mention {needle!r}: {final_reply!r}")
    if expect.masked is not None:
        got_masked = tuple(r.report.masked if r.report else None for r in run.turns)
        if got_masked != tuple(expect.masked):
            failures.append(f"masked flags: expected {tuple(expect.masked)}, got {got_masked}")
    return failures


def _format_gaps(gaps: tuple) -> str:
    return "[" + ", ".join(str(g) for g in gaps) + "]"


def simulate(
    script: ScenarioScript,
    config: GatewayConfig | None = None,
    use_audio: bool = True,
    printer=print,
) -> int:
    """Replay a scenario and print the conversation; 0 if expectations hold."""
    gateway = Gateway(config)
    run = asyncio.run(run_script(gateway, script, use_audio=use_audio))
    printer(
        f"scenario {script.name}: session {run.session_id}, "
        f"agent {run.agent_id}, voice {run.voice_id}, "
        f"{gateway.config.time_mode} time"
    )
    for i, record in enumerate(run.turns):
        printer(f"you> {record.utterance}")
        if record.transcript != record.utterance:
            printer(f"     (heard: {record.transcript!r})")
        for seq, (text, duration) in enumerate(
            zip(record.chunk_texts, record.chunk_durations_ms), start=1
        ):
            printer(f"agent[{seq}]> {text}  ({duration} ms audio)")
        if record.error:
            printer(f"turn {i}: failed with error {record.error!r}")
        elif record.report:
            r = record.report
            printer(
                f"turn {i}: first_audio={r.first_audio_ms} ms, "
                f"gaps={_format_gaps(r.gaps_ms)}, "
                f"masked={'yes' if r.masked else 'no'}"
            )
    failures = check_expectations(run, script.expect)
    for failure in failures:
        printer(f"FAIL: {failure}")
    printer(f"scenario {script.name}: {'FAIL' if failures else 'PASS'}")
    return 1 if failures else 0


# --------------------------------------------------------------------------
# Load runs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencyStats:
    count: int
    mean: float
    p50: float
    p95: float
    max: float

    @classmethod
    def from_values(cls, values: list) -> "LatencyStats":
        if not values:
            return cls(0, 0.0, 0.0, 0.0, 0.0)
        ordered = sorted(values)
        n = len(ordered)

        def rank(p: int) -> float:  # nearest-rank percentile
            return ordered[max(0, -(-p * n // 100) - 1)]

        return cls(
            count=n,
            mean=sum(ordered) / n,
            p50=rank(50),
            p95=rank(95),
            max=ordered[-1],
        )


@dataclass
class BenchTurnRecord:
    session_id: str
    turn: int
    first_audio_ms: int
    max_gap_ms: int
    masked: bool
    overhead_ms: float
    ordering_violation: str | None
    leaked: bool


@dataclass
class BenchReport:
    sessions: int
    turns_per_session: int
    records: list
    first_audio: LatencyStats
    max_gap: LatencyStats
    overhead: LatencyStats
    ordering_violations: list
    leakage_count: int

    def to_text(self) -> str:
        lines = [
            f"sessions={self.sessions} turns_per_session={self.turns_per_session} "
            f"turns={len(self.records)}",
            f"first_audio_ms: mean={self.first_audio.mean:.1f} p50={self.first_audio.p50:.0f} "
            f"p95={self.first_audio.p95:.0f} max={self.first_audio.max:.0f}",
            f"max_gap_ms: mean={self.max_gap.mean:.1f} p50={self.max_gap.p50:.0f} "
            f"p95={self.max_gap.p95:.0f} max={self.max_gap.max:.0f}",
            f"overhead_ms: mean={self.overhead.mean:.2f} p50={self.overhead.p50:.2f} "
            f"p95={self.overhead.p95:.2f} max={self.overhead.max:.2f}",
            f"ordering_violations={len(self.ordering_violations)} "
            f"leaked_turns={self.leakage_count}",
        ]
        lines.extend(f"  ordering: {v}" for v in self.ordering_violations[:5])
        return "\n".join(lines)


def bench_config(time_mode: str = "simulated", max_sessions: int = 256) -> GatewayConfig:
    """A gateway profile for load runs: echo agent, one plain voice."""
    return GatewayConfig(
        time_mode=time_mode,
        max_sessions=max_sessions,
        agents=(AgentDescriptor("echo", "Echo", "builtin:echo"),),
        voices=(VoiceDescriptor("f1", "Female 1"),),
    )


async def _bench_session(
    gateway: Gateway, session_index: int, turns: int, records: list
) -> None:
    session_id, _ = gateway.open_session(protocol.hello())
    voice = gateway.catalog.voice(gateway.session_state(session_id).voice_id)
    for turn in range(turns):
        # One chunk, no punctuation: the echoed reply must come back verbatim,
        # so any cross-session bleed is detectable.
        text = f"session {session_index} turn {turn} marker x{session_index}y{turn}z"
        msg = protocol.utterance_audio(session_id, turn, encode_sim_audio(text, voice))
        started = time.perf_counter()
        outputs = []
        async for out in gateway.run_turn(session_id, msg):
            outputs.append(out)
        overhead_ms = (time.perf_counter() - started) * 1000.0
        violation = find_ordering_violation(outputs)
        transcript = outputs[0].get("text") if outputs else None
        chunk_texts = [m.get("text") for m in outputs if m.kind == "chunk_audio"]
        leaked = transcript != text or chunk_texts != [text]
        report_data = outputs[-1].get("report") if outputs else None
        report = TurnReport.from_dict(report_data) if report_data else None
        records.append(
            BenchTurnRecord(
                session_id=session_id,
                turn=turn,
                first_audio_ms=report.first_audio_ms if report else -1,
                max_gap_ms=max(report.gaps_ms) if report and report.gaps_ms else 0,
                masked=report.masked if report else False,
                overhead_ms=overhead_ms,
                ordering_violation=violation,
                leaked=leaked,
            )
        )
        await asyncio.sleep(0)  # interleave sessions
    gateway.close_session(session_id)


def bench(
    sessions: int = 50,
    turns: int = 5,
    config: GatewayConfig | None = None,
) -> BenchReport:
    """Run concurrent scripted sessions and aggregate the results."""
    if sessions < 1 or turns < 1:
        raise InvalidInput("bench needs at least one session and one turn")
    gateway = Gateway(config or bench_config(max_sessions=max(256, sessions + 8)))
    records: list = []

    async def runner():
        await asyncio.gather(
            *(_bench_session(gateway, i, turns, records) for i in range(sessions))
        )

    asyncio.run(runner())
    records.sort(key=lambda r: (r.session_id, r.turn))
    return BenchReport(
        sessions=sessions,
        turns_per_session=turns,
        records=records,
        first_audio=LatencyStats.from_values([r.first_audio_ms for r in records]),
        max_gap=LatencyStats.from_values([r.max_gap_ms for r in records]),
        overhead=LatencyStats.from_values([r.overhead_ms for r in records]),
        ordering_violations=[r.ordering_violation for r in records if r.ordering_violation],
        leakage_count=sum(1 for r in records if r.leaked),
    )


# --------------------------------------------------------------------------
# Golden stream recording
# --------------------------------------------------------------------------


def record_stream(script: ScenarioScript, config: GatewayConfig | None = None) -> bytes:
    """Frame every server message from a script replay into one byte stream.

    Appends one error message (an out-of-catalog voice selection) so the
    stream exercises every server message kind.
    """
    gateway = Gateway(config)
    run = asyncio.run(run_script(gateway, script, use_audio=True))
    messages: list = list(run.messages)
    messages.append(
        protocol.error_message(
            "unknown-voice", "voice 'missing' is not in the catalog", session_id=run.session_id
        )
    )
    return b"".join(frame_message(m) for m in messages)
