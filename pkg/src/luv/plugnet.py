"""TCP client for the smart plugs that switch the capture lights.

The plugs speak a JSON protocol over port 9999: each message is a 4-byte
big-endian payload length followed by the payload run through an autokey
XOR cipher seeded with 171. Replies use the same framing.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

INITIAL_KEY = 171
DEFAULT_PORT = 9999
DEFAULT_TIMEOUT_MS = 3000

CMD_RELAY_ON = {"system": {"set_relay_state": {"state": 1}}}
CMD_RELAY_OFF = {"system": {"set_relay_state": {"state": 0}}}
CMD_SYSINFO = {"system": {"get_sysinfo": {}}}


class PlugError(Exception):
    """Base class for plug communication failures."""


class TransportError(PlugError):
    """Connection refused, reset, or timed out."""


class DeviceError(PlugError):
    """The device replied with a nonzero error code."""


class ProtocolError(PlugError):
    """The reply could not be framed, decrypted, or parsed."""


class RelayCommand(Enum):
    ON = 1
    OFF = 0


@dataclass(frozen=True)
class PlugEndpoint:
    host: str
    port: int = DEFAULT_PORT
    identity: Optional[str] = None

    def __post_init__(self):
        if not (1 <= self.port <= 65535):
            raise ValueError(f"port out of range: {self.port}")


def autokey_encrypt(plaintext: bytes) -> bytes:
    """XOR each byte with a running key that follows the ciphertext."""
    key = INITIAL_KEY
    out = bytearray(len(plaintext))
    for i, byte in enumerate(plaintext):
        key = out[i] = byte ^ key
    return bytes(out)


def autokey_decrypt(ciphertext: bytes) -> bytes:
    key = INITIAL_KEY
    out = bytearray(len(ciphertext))
    for i, byte in enumerate(ciphertext):
        out[i] = byte ^ key
        key = byte
    return bytes(out)


def frame_message(payload: bytes) -> bytes:
    """Length-prefix and encrypt one payload for the wire."""
    encrypted = autokey_encrypt(payload)
    return struct.pack(">I", len(encrypted)) + encrypted


def _read_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ProtocolError(f"connection closed with {remaining} bytes outstanding")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(sock: socket.socket) -> bytes:
    header = _read_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    return autokey_decrypt(_read_exact(sock, length))


# Commands to the same endpoint are serialized; the devices mishandle
# pipelined requests.
_endpoint_locks: Dict[Tuple[str, int], threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(endpoint: PlugEndpoint) -> threading.Lock:
    key = (endpoint.host, endpoint.port)
    with _locks_guard:
        return _endpoint_locks.setdefault(key, threading.Lock())


def send_command(endpoint: PlugEndpoint, command: dict, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> dict:
    """Send one JSON command and return the parsed JSON reply."""
    payload = json.dumps(command).encode("utf-8")
    with _lock_for(endpoint):
        try:
            with socket.create_connection(
                (endpoint.host, endpoint.port), timeout=timeout_ms / 1000.0
            ) as sock:
                sock.sendall(frame_message(payload))
                reply = read_frame(sock)
        except ProtocolError:
            raise
        except (OSError, socket.timeout) as exc:
            raise TransportError(f"{endpoint.host}:{endpoint.port}: {exc}") from exc
    try:
        parsed = json.loads(reply.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"unparseable reply from {endpoint.host}: {exc}") from exc
    if not isinstance(parsed, dict):
        raise ProtocolError(f"reply is not a JSON object: {parsed!r}")
    return parsed


def _check_err_code(section: dict, context: str) -> None:
    code = section.get("err_code", 0)
    if code != 0:
        raise DeviceError(f"{context}: device error code {code}")


def set_relay(
    endpoint: PlugEndpoint, cmd: RelayCommand, timeout_ms: int = DEFAULT_TIMEOUT_MS
) -> dict:
    """Switch the relay; returns the device acknowledgment."""
    command = CMD_RELAY_ON if cmd is RelayCommand.ON else CMD_RELAY_OFF
    reply = send_command(endpoint, command, timeout_ms)
    try:
        section = reply["system"]["set_relay_state"]
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"reply missing set_relay_state section: {reply!r}") from exc
    _check_err_code(section, "set_relay")
    return section


def query_state(endpoint: PlugEndpoint, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> RelayCommand:
    """Read back the current relay state."""
    reply = send_command(endpoint, CMD_SYSINFO, timeout_ms)
    try:
        info = reply["system"]["get_sysinfo"]
    except (KeyError, TypeError) as exc:
        raise ProtocolError(f"reply missing sysinfo section: {reply!r}") from exc
    _check_err_code(info, "query_state")
    try:
        state = int(info["relay_state"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"sysinfo missing relay_state: {info!r}") from exc
    if state not in (0, 1):
        raise ProtocolError(f"relay_state out of range: {state}")
    return RelayCommand(state)
