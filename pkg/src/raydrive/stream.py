"""Websocket streaming for the browser viewer and human play.

One server, three session kinds:

* play   -- server-authoritative simulation at a fixed tick; each tick
            consumes the latest client input (missing input = NOOP).
* live   -- broadcasts the latest training frame at the tick rate while a
            training loop publishes frames from another thread.
* replay -- streams a recorded trace file at the tick rate.

All frames are JSON text messages; see the protocol builders below. The
server owns an asyncio loop on a background thread so simulations and tests
can drive it synchronously.
"""

from __future__ import annotations

import asyncio
import errno
import json
import threading

from websockets.asyncio.server import serve
from websockets.exceptions import ConnectionClosed

from .env import Action, CarEnv, EnvConfig
from .trackmap import parse_trk


class PortInUse(OSError):
    """Requested port is already bound."""


class ProtocolViolation(ValueError):
    """Client sent a message the protocol does not allow."""


def hello_message(trk_text: str, tick_hz: float) -> dict:
    return {
        "type": "hello",
        "trk": trk_text,
        "tick_hz": tick_hz,
        "actions": [a.name for a in Action],
    }


def frame_message(t, x, y, theta, sensors, action, reward, score, terminal) -> dict:
    return {
        "type": "frame",
        "t": t,
        "x": x,
        "y": y,
        "theta": theta,
        "sensors": [float(v) for v in sensors],
        "action": int(action),
        "reward": reward,
        "score": score,
        "terminal": bool(terminal),
    }


def end_message(score, steps) -> dict:
    return {"type": "end", "score": score, "steps": steps}


def error_message(msg: str) -> dict:
    return {"type": "error", "msg": msg}


def read_trace(path) -> tuple[dict, list[dict]]:
    """Trace file -> (header, events). The header embeds the TRK1 text."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().split("\n") if line]
    if not lines:
        raise ValueError(f"trace file {path} is empty")
    header = json.loads(lines[0])
    if header.get("format") != "TRACEv1":
        raise ValueError(f"trace file {path} has unsupported format "
                         f"{header.get('format')!r}")
    events = [json.loads(line) for line in lines[1:]]
    return header, events


class StreamServer:
    """Websocket broadcaster with a per-mode driver task.

    start() binds the socket (raising PortInUse when taken) and returns once
    the server accepts connections; stop() tears everything down. With
    port=0 the OS picks a free port, exposed via .port after start().
    """

    def __init__(self, trk_text: str, mode: str, port: int = 8765,
                 host: str = "127.0.0.1", tick_hz: float = 30.0,
                 env_config: EnvConfig | None = None,
                 trace_events: list[dict] | None = None):
        if mode not in ("play", "live", "replay"):
            raise ValueError(f"mode must be play, live or replay, got {mode!r}")
        if tick_hz <= 0:
            raise ValueError(f"tick_hz must be > 0, got {tick_hz}")
        self.trk_text = trk_text
        self.mode = mode
        self.requested_port = port
        self.host = host
        self.tick_hz = tick_hz
        self.env_config = env_config if env_config is not None else EnvConfig()
        self.trace_events = trace_events if trace_events is not None else []
        self.port: int | None = None
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._clients: set = set()
        self._stopped = threading.Event()
        self._started = threading.Event()
        self._start_error: BaseException | None = None
        self._stop_async: asyncio.Event | None = None
        # play state
        self._latest_input: int | None = None
        self._paused = False
        self._play_reset = False
        # live state
        self._live_frame: dict | None = None
        self._live_seq = 0
        self._live_sent = 0
        self._live_end: dict | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run_loop, daemon=True)
        self._thread.start()
        self._started.wait()
        if self._start_error is not None:
            raise self._start_error

    def stop(self) -> None:
        if self._loop is not None and not self._stopped.is_set():
            try:
                self._loop.call_soon_threadsafe(self._stop_async.set)
            except RuntimeError:
                pass  # loop already closed
        if self._thread is not None:
            self._thread.join(timeout=10)
        self._stopped.set()

    def wait_forever(self) -> None:
        """Block the calling thread until stop() (useful for CLI serving)."""
        try:
            self._stopped.wait()
        except KeyboardInterrupt:
            self.stop()

    def _run_loop(self) -> None:
        try:
            asyncio.run(self._main())
        except BaseException as exc:  # surfaced via start() or swallowed at stop
            if not self._started.is_set():
                self._start_error = exc
        finally:
            self._started.set()
            self._stopped.set()

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop_async = asyncio.Event()
        try:
            server = await serve(self._handler, self.host, self.requested_port)
        except OSError as exc:
            if exc.errno == errno.EADDRINUSE:
                self._start_error = PortInUse(
                    f"port {self.requested_port} is already in use")
                return
            raise
        sockets = list(server.sockets or [])
        self.port = sockets[0].getsockname()[1] if sockets else self.requested_port
        driver = asyncio.create_task(self._drive())
        self._started.set()
        try:
            await self._stop_async.wait()
        finally:
            driver.cancel()
            server.close()
            await server.wait_closed()

    # -- broadcasting ------------------------------------------------------

    async def _send_json(self, websocket, obj: dict) -> None:
        try:
            await websocket.send(json.dumps(obj, separators=(",", ":")))
        except ConnectionClosed:
            self._clients.discard(websocket)

    async def _broadcast(self, obj: dict) -> None:
        if self._clients:
            await asyncio.gather(
                *(self._send_json(ws, obj) for ws in tuple(self._clients)))

    # -- client handling ---------------------------------------------------

    async def _handler(self, websocket) -> None:
        await self._send_json(websocket, hello_message(self.trk_text, self.tick_hz))
        self._clients.add(websocket)
        try:
            async for raw in websocket:
                try:
                    self._handle_client_message(raw)
                except ProtocolViolation as exc:
                    await self._send_json(websocket, error_message(str(exc)))
                    await websocket.close()
                    break
        except ConnectionClosed:
            pass
        finally:
            self._clients.discard(websocket)

    def _handle_client_message(self, raw) -> None:
        try:
            msg = json.loads(raw)
        except ValueError:
            raise ProtocolViolation("message is not valid JSON") from None
        if not isinstance(msg, dict) or not isinstance(msg.get("type"), str):
            raise ProtocolViolation("message must be an object with a 'type' string")
        if self.mode != "play":
            return  # inputs are ignored outside play mode
        kind = msg["type"]
        if kind == "input":
            action = msg.get("action")
            if action not in (0, 1, 2):
                raise ProtocolViolation(f"input.action must be 0, 1 or 2, got {action!r}")
            self._latest_input = action
        elif kind == "control":
            cmd = msg.get("cmd")
            if cmd == "pause":
                self._paused = True
            elif cmd == "resume":
                self._paused = False
            elif cmd == "reset":
                self._latest_input = None
                self._paused = False
                self._play_reset = True
            else:
                raise ProtocolViolation(
                    f"control.cmd must be reset, pause or resume, got {cmd!r}")
        # other well-formed types are ignored for forward compatibility

    # -- live publishing (called from the training thread) -----------------

    def publish_frame(self, frame: dict) -> None:
        if self._loop is None or self._stopped.is_set():
            return
        self._loop.call_soon_threadsafe(self._set_live_frame, dict(frame))

    def finish(self, score=None, steps=None) -> None:
        """Signal end-of-session to live clients."""
        if self._loop is None or self._stopped.is_set():
            return
        if score is None and self._live_frame is not None:
            score = self._live_frame.get("score")
            steps = self._live_frame.get("t")
        end = end_message(score, steps)
        self._loop.call_soon_threadsafe(self._set_live_end, end)

    def _set_live_frame(self, frame: dict) -> None:
        self._live_frame = frame
        self._live_seq += 1

    def _set_live_end(self, end: dict) -> None:
        self._live_end = end

    # -- per-mode drivers ----------------------------------------------------

    async def _drive(self) -> None:
        tick = 1.0 / self.tick_hz
        if self.mode == "play":
            await self._drive_play(tick)
        elif self.mode == "replay":
            await self._drive_replay(tick)
        else:
            await self._drive_live(tick)

    async def _drive_play(self, tick: float) -> None:
        track = parse_trk(self.trk_text)
        env = CarEnv(track, self.env_config)
        env.reset()
        self._play_reset = False
        ended = False
        while True:
            await asyncio.sleep(tick)
            if self._play_reset:
                env.reset()
                ended = False
                self._play_reset = False
            if self._paused or ended:
                continue
            action = Action.NOOP if self._latest_input is None else Action(self._latest_input)
            self._latest_input = None  # consumed; missing next tick = NOOP
            result = env.step(action)
            await self._broadcast(frame_message(
                result.steps, env.state.pose.x, env.state.pose.y,
                env.state.pose.theta, result.observation, action,
                result.reward, result.score, result.terminal))
            if result.terminal:
                ended = True
                await self._broadcast(end_message(result.score, result.steps))

    async def _drive_replay(self, tick: float) -> None:
        score = 0
        total = len(self.trace_events)
        for i, event in enumerate(self.trace_events):
            await asyncio.sleep(tick)
            score += event["reward"]
            await self._broadcast(frame_message(
                event["t"], event["x"], event["y"], event["theta"],
                event["sensors"], event["action"], event["reward"], score,
                i == total - 1))
        last_t = self.trace_events[-1]["t"] if self.trace_events else 0
        await self._broadcast(end_message(score, last_t))

    async def _drive_live(self, tick: float) -> None:
        while True:
            await asyncio.sleep(tick)
            if self._live_seq != self._live_sent:
                self._live_sent = self._live_seq
                await self._broadcast(self._live_frame)
            if self._live_end is not None:
                await self._broadcast(self._live_end)
                self._live_end = None


def serve_play(trk_text: str, port: int = 8765, host: str = "127.0.0.1",
               tick_hz: float = 30.0, env_config: EnvConfig | None = None) -> None:
    """Blocking human-play server (Ctrl+C to stop)."""
    server = StreamServer(trk_text, "play", port=port, host=host, tick_hz=tick_hz,
                          env_config=env_config)
    server.start()
    try:
        server.wait_forever()
    finally:
        server.stop()


def serve_replay(trace_path, port: int = 8765, host: str = "127.0.0.1",
                 tick_hz: float = 30.0) -> None:
    """Blocking trace-replay server (Ctrl+C to stop)."""
    header, events = read_trace(trace_path)
    trk_text = header.get("trk")
    if not trk_text:
        raise ValueError(f"trace {trace_path} has no embedded track text")
    server = StreamServer(trk_text, "replay", port=port, host=host, tick_hz=tick_hz,
                          trace_events=events)
    server.start()
    try:
        server.wait_forever()
    finally:
        server.stop()
