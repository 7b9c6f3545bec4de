"""WebSocket front door for the gateway.

One socket per session on ``/session``. Text frames carry audio-free JSON
messages; binary frames carry length-prefixed frames for audio-bearing
messages (client utterance audio in, synthesized chunks out). The first
client message must be ``hello``; while a turn is streaming, any further
client message is answered with a ``turn-in-progress`` error rather than
queued.

Also serves ``/healthz`` and a plain-text ``/metrics``.
"""

from __future__ import annotations

import asyncio

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .errors import VoxhubError
from .gateway import Gateway, GatewayConfig, error_for_exception
from .protocol import (
    PROTOCOL_VERSION,
    Message,
    dump_control,
    error_message,
    frame_message,
    parse_control,
    unframe_message,
)

_SENDER_DONE = object()


async def _receive_message(ws: WebSocket, max_bytes: int) -> Message:
    event = await ws.receive()
    if event["type"] == "websocket.disconnect":
        raise WebSocketDisconnect(event.get("code") or 1000)
    if event.get("bytes") is not None:
        return unframe_message(event["bytes"], max_bytes=max_bytes)
    return parse_control(event.get("text") or "")


def create_app(config: GatewayConfig | None = None, gateway: Gateway | None = None) -> FastAPI:
    gateway = gateway or Gateway(config)
    app = FastAPI(title="voxhub")
    app.state.gateway = gateway

    @app.get("/healthz")
    async def healthz():
        from . import __version__

        return {
            "status": "ok",
            "version": __version__,
            "protocol_version": PROTOCOL_VERSION,
        }

    @app.get("/metrics")
    async def metrics() -> PlainTextResponse:
        snap = gateway.metrics_snapshot()
        lines = [f"voxhub_sessions {snap['global']['sessions']}"]
        for key in (
            "turns",
            "first_audio_mean_ms",
            "first_audio_p95_ms",
            "masked_fraction",
            "threshold_exceeded_fraction",
        ):
            lines.append(f"voxhub_{key} {snap['global'][key]}")
        for sid, stats in snap["sessions"].items():
            for key, value in stats.items():
                lines.append(f'voxhub_session_{key}{{session="{sid}"}} {value}')
        return PlainTextResponse("\n".join(lines) + "\n")

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        max_bytes = gateway.config.max_frame_bytes
        outgoing: asyncio.Queue = asyncio.Queue()

        async def send_loop():
            while True:
                item = await outgoing.get()
                if item is _SENDER_DONE:
                    return
                if item.audio is not None:
                    await ws.send_bytes(frame_message(item, max_bytes=max_bytes))
                else:
                    await ws.send_text(dump_control(item))

        sender = asyncio.create_task(send_loop())
        session_id: str | None = None
        turn_task: asyncio.Task | None = None

        async def stream_turn(msg: Message):
            try:
                async for out in gateway.run_turn(session_id, msg):
                    outgoing.put_nowait(out)
            except VoxhubError as exc:
                outgoing.put_nowait(error_for_exception(exc, session_id))

        try:
            try:
                hello_msg = await _receive_message(ws, max_bytes)
                session_id, greetings = gateway.open_session(hello_msg)
            except VoxhubError as exc:
                outgoing.put_nowait(error_for_exception(exc))
                return
            for greeting in greetings:
                outgoing.put_nowait(greeting)

            while True:
                try:
                    msg = await _receive_message(ws, max_bytes)
                except VoxhubError as exc:
                    outgoing.put_nowait(error_for_exception(exc, session_id))
                    continue
                if turn_task is not None and not turn_task.done():
                    outgoing.put_nowait(
                        error_message(
                            "turn-in-progress",
                            "a turn is still streaming; wait for turn_end",
                            session_id=session_id,
                        )
                    )
                    continue
                if msg.kind == "bye":
                    return
                if msg.kind in ("select_agent", "select_voice"):
                    try:
                        outgoing.put_nowait(gateway.handle_control(session_id, msg))
                    except VoxhubError as exc:
                        outgoing.put_nowait(error_for_exception(exc, session_id))
                elif msg.kind in ("utterance_text", "utterance_audio"):
                    turn_task = asyncio.create_task(stream_turn(msg))
                else:
                    outgoing.put_nowait(
                        error_message(
                            "protocol",
                            f"unexpected client message {msg.kind!r}",
                            session_id=session_id,
                        )
                    )
        except WebSocketDisconnect:
            pass
        finally:
            if turn_task is not None and not turn_task.done():
                turn_task.cancel()
                try:
                    await turn_task
                except asyncio.CancelledError:
                    pass
            if session_id is not None:
                gateway.close_session(session_id)
            outgoing.put_nowait(_SENDER_DONE)
            try:
                await sender
            except Exception:  # client may already be gone mid-send
                pass
            try:
                await ws.close()
            except Exception:
                pass

    return app
