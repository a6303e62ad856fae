"""Loopback mock of the smart plug so protocol code runs hardware-free.

Speaks the exact wire format of `plugnet` over 127.0.0.1. Fault injection
covers the failure paths a real device or flaky network produces.
"""

from __future__ import annotations

import json
import socketserver
import struct
import threading
from typing import Optional

from .plugnet import PlugEndpoint, autokey_decrypt, autokey_encrypt, frame_message

# Fault modes:
#   None        healthy device
#   "hang"      accept the request, never reply (client should time out)
#   "garbage"   reply frame decodes to non-JSON bytes
#   "truncate"  reply frame cut off mid-payload, then connection closed
#   "err_code"  well-formed reply carrying a nonzero device error
#   "close"     connection closed before any reply bytes
FAULT_MODES = (None, "hang", "garbage", "truncate", "err_code", "close")


class _PlugHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: MockPlugServer = self.server.owner  # type: ignore[attr-defined]
        header = self._read_exact(4)
        if header is None:
            return
        (length,) = struct.unpack(">I", header)
        body = self._read_exact(length)
        if body is None:
            return
        request = json.loads(autokey_decrypt(body).decode("utf-8"))

        fault = server.fault
        if fault == "hang":
            server.hung.wait(timeout=30.0)
            return
        if fault == "close":
            return
        if fault == "garbage":
            self.request.sendall(frame_message(b"\xff\xfe not json"))
            return

        reply = server.dispatch(request)
        wire = frame_message(json.dumps(reply).encode("utf-8"))
        if fault == "truncate":
            self.request.sendall(wire[: max(5, len(wire) // 2)])
            return
        self.request.sendall(wire)

    def _read_exact(self, n: int) -> Optional[bytes]:
        chunks = []
        remaining = n
        while remaining:
            chunk = self.request.recv(remaining)
            if not chunk:
                return None
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)


class MockPlugServer:
    """In-process plug with a relay bit and switchable fault injection."""

    def __init__(self, host: str = "127.0.0.1"):
        self._server = socketserver.ThreadingTCPServer((host, 0), _PlugHandler)
        self._server.daemon_threads = True
        self._server.owner = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._state_lock = threading.Lock()
        self.relay_state = 0
        self.fault: Optional[str] = None
        self.request_count = 0
        self.hung = threading.Event()

    @property
    def endpoint(self) -> PlugEndpoint:
        host, port = self._server.server_address[:2]
        return PlugEndpoint(host=host, port=port, identity="mock")

    def start(self) -> "MockPlugServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self.hung.set()
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockPlugServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def set_fault(self, mode: Optional[str]) -> None:
        if mode not in FAULT_MODES:
            raise ValueError(f"unknown fault mode {mode!r}")
        self.fault = mode

    def dispatch(self, request: dict) -> dict:
        with self._state_lock:
            self.request_count += 1
            system = request.get("system", {})
            if "set_relay_state" in system:
                if self.fault == "err_code":
                    return {"system": {"set_relay_state": {"err_code": -3}}}
                state = int(system["set_relay_state"]["state"])
                if state not in (0, 1):
                    return {"system": {"set_relay_state": {"err_code": -1}}}
                self.relay_state = state
                return {"system": {"set_relay_state": {"err_code": 0}}}
            if "get_sysinfo" in system:
                if self.fault == "err_code":
                    return {"system": {"get_sysinfo": {"err_code": -3}}}
                return {
                    "system": {
                        "get_sysinfo": {
                            "err_code": 0,
                            "alias": "mock plug",
                            "relay_state": self.relay_state,
                        }
                    }
                }
            return {"system": {"err_code": -2, "err_msg": "unknown command"}}
