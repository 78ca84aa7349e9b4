"""Live session service: one WebSocket connection drives one session.

Wire protocol, one text frame per message.

Client to server::

    hello version=1 dataset=health rulebook=default
    sample pose t=0.0 cube=A p=0.1,0.2,0.0165 q=1.0,0.0,0.0,0.0
    snapshot_request
    record on | record off

Server to client::

    welcome version=1 dataset=... rulebook=... map=... interaction=...
        anchor=... unit=... bins=... palette=... slots=...
    report t=... items=<line>;<line>;...
    snapshot data=<base64 of the canonical snapshot text>
    error code=... message="..."

The first client message must be ``hello``.  Samples must be time-ordered;
a rejected sample produces an ``error`` frame but leaves the session
usable.  Anything else that violates the protocol closes the connection.
Recording appends every accepted sample to a trace file; a recording that
spans the connection from its first sample replays in the CLI to the same
snapshot the live session reached.
"""

from __future__ import annotations

import asyncio
import base64
import os
import urllib.parse
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import CubedeckError, ResolutionError, RulebookError, SchemaError
from .model import InputSample, fmt_float, sample_from_line, sample_to_line
from .session import PALETTE, Session, SessionLayout
from .trace import TRACE_HEADER, resolve_dataset, resolve_rulebook

WIRE_VERSION = "1"


@dataclass
class _Recorder:
    path: str
    handle: object

    def write_sample(self, sample: InputSample) -> None:
        self.handle.write(sample_to_line(sample) + "\n")
        self.handle.flush()

    def close(self) -> None:
        self.handle.close()


@dataclass
class _Connection:
    conn_id: int
    record_dir: str
    catalog_dir: Optional[str]
    session: Optional[Session] = None
    dataset_ref: str = ""
    rulebook_ref: str = ""
    recorder: Optional[_Recorder] = None
    record_seq: int = 0

    def close_recorder(self) -> None:
        if self.recorder is not None:
            self.recorder.close()
            self.recorder = None


def _welcome_line(conn: _Connection) -> str:
    session = conn.session
    layout = session.layout
    dataset = session.dataset
    slots = ";".join(
        ":".join(
            (
                r.region_id,
                fmt_float(r.anchor[0]),
                fmt_float(r.anchor[1]),
                urllib.parse.quote(r.label),
            )
        )
        for r in dataset.regions
    )
    bins = ",".join(b.label for b in dataset.bins)
    return (
        f"welcome version={WIRE_VERSION} dataset={conn.dataset_ref} rulebook={conn.rulebook_ref}"
        f" map={layout.map_region.token()} interaction={layout.interaction_region.token()}"
        f" anchor={','.join(fmt_float(c) for c in layout.anchored_anchor)}"
        f" unit={urllib.parse.quote(dataset.unit)} bins={bins}"
        f" palette={','.join(PALETTE)} slots={slots}"
    )


def _error_line(code: str, message: str) -> str:
    return f'error code={code} message="{message}"'


def handle_message(conn: _Connection, message: str) -> tuple[List[str], bool]:
    """Process one frame; returns (replies, keep_connection)."""
    head, _, body = message.partition(" ")

    if head == "hello":
        if conn.session is not None:
            return [_error_line("protocol", "duplicate hello")], False
        fields = dict(tok.partition("=")[::2] for tok in body.split())
        if fields.get("version") != WIRE_VERSION:
            return [
                _error_line("version", f"unsupported format version {fields.get('version')!r}")
            ], False
        dataset_ref = fields.get("dataset", "health")
        rulebook_ref = fields.get("rulebook", "default")
        try:
            dataset = resolve_dataset(dataset_ref, conn.catalog_dir)
            rulebook = resolve_rulebook(rulebook_ref, conn.catalog_dir)
        except (ResolutionError, SchemaError, RulebookError) as exc:
            return [_error_line("resolve", str(exc))], False
        conn.session = Session(dataset, rulebook, SessionLayout(), dataset_name=dataset_ref)
        conn.dataset_ref = dataset_ref
        conn.rulebook_ref = rulebook_ref
        return [_welcome_line(conn)], True

    if conn.session is None:
        return [_error_line("protocol", f"first message must be hello, got {head!r}")], False

    if head == "sample":
        try:
            sample = sample_from_line(body)
            report = conn.session.step(sample)
        except CubedeckError as exc:
            return [_error_line("sample", str(exc))], True
        if conn.recorder is not None:
            try:
                conn.recorder.write_sample(sample)
            except OSError as exc:
                conn.close_recorder()
                return [
                    _error_line("record", f"recording stopped: {exc}"),
                    _report_line(report),
                ], True
        return [_report_line(report)], True

    if head == "snapshot_request":
        data = base64.b64encode(conn.session.snapshot().encode()).decode()
        return [f"snapshot data={data}"], True

    if head == "record":
        mode = body.strip()
        if mode == "on":
            if conn.recorder is None:
                try:
                    conn.recorder = _open_recorder(conn)
                except OSError as exc:
                    return [_error_line("record", f"cannot record: {exc}")], True
            return [], True
        if mode == "off":
            conn.close_recorder()
            return [], True
        return [_error_line("protocol", f"record takes on|off, got {mode!r}")], False

    return [_error_line("protocol", f"unknown message {head!r}")], False


def _report_line(report) -> str:
    items = ";".join(report.lines())
    return f"report t={fmt_float(report.t)} items={items}"


def _open_recorder(conn: _Connection) -> _Recorder:
    conn.record_seq += 1
    path = os.path.join(
        conn.record_dir, f"session-{conn.conn_id:04d}-{conn.record_seq:02d}.trace"
    )
    handle = open(path, "w")
    handle.write(TRACE_HEADER + "\n")
    handle.write(f"#! dataset {conn.dataset_ref}\n")
    handle.write(f"#! rulebook {conn.rulebook_ref}\n")
    handle.flush()
    return _Recorder(path, handle)


class BridgeServer:
    """Session-per-connection WebSocket service."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        catalog_dir: Optional[str] = None,
        record_dir: str = ".",
    ):
        self.host = host
        self.port = port
        self.catalog_dir = catalog_dir
        self.record_dir = record_dir
        self._server = None
        self._conn_counter = 0
        self._connections: Dict[int, _Connection] = {}

    async def _handler(self, websocket) -> None:
        self._conn_counter += 1
        conn = _Connection(self._conn_counter, self.record_dir, self.catalog_dir)
        self._connections[conn.conn_id] = conn
        try:
            async for message in websocket:
                if isinstance(message, bytes):
                    message = message.decode()
                replies, keep = handle_message(conn, message)
                for reply in replies:
                    await websocket.send(reply)
                if not keep:
                    await websocket.close()
                    break
        finally:
            conn.close_recorder()
            del self._connections[conn.conn_id]

    async def start(self) -> None:
        from websockets.asyncio.server import serve

        self._server = await serve(self._handler, self.host, self.port)
        sock = next(iter(self._server.sockets))
        self.port = sock.getsockname()[1]

    async def stop(self) -> None:
        for conn in list(self._connections.values()):
            conn.close_recorder()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None


def serve_forever(
    host: str = "127.0.0.1",
    port: int = 8765,
    catalog_dir: Optional[str] = None,
    record_dir: str = ".",
) -> None:
    async def run() -> None:
        server = BridgeServer(host, port, catalog_dir, record_dir)
        await server.start()
        print(f"cubedeck bridge listening on ws://{server.host}:{server.port}")
        try:
            await asyncio.Future()
        finally:
            await server.stop()

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
