"""HTTP control service for the live calibration workflow.

Read endpoints (frame, preview, profile GET) run concurrently; anything
touching the camera, lights, dataset, or the active profile is serialized
behind one mutation lock because those are exclusive physical resources.

    GET  /api/frame?light=std|uv&exposure=E   -> PNG
    POST /api/preview   body=profile JSON     -> {mask_png_base64, per_class_pixel_counts, keypoints}
    GET  /api/profile/{name}                  -> profile JSON
    PUT  /api/profile/{name}  body=profile    -> saved profile JSON, becomes active
    POST /api/sweep     {exposures: [...]}    -> {best, scores}
    POST /api/plug/{channel} {state: on|off}  -> {state}
    POST /api/capture                         -> {sample_id}
"""

from __future__ import annotations

import base64
import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from . import capture, datastore, plugnet, synthscene
from .config import AppConfig
from .maskgen import extract_labels
from .model import CalibrationProfile

MAX_BODY_BYTES = 16 * 1024 * 1024
_PROFILE_NAME = re.compile(r"^[A-Za-z0-9_-]+$")


class ServiceContext:
    """Owns the camera, rig, dataset, and active profile for one service."""

    def __init__(self, config: AppConfig):
        from .cli import _build_camera, _build_rig, _build_scene, _load_profile

        self.config = config
        self.scene = _build_scene(config)
        self.rig = _build_rig(config)
        self.camera = _build_camera(config, self.scene, self.rig)
        self.profile = _load_profile(config, self.scene)
        self.dataset_root = Path(config.dataset_root)
        self.writer = datastore.DatasetWriter(self.dataset_root)
        self.mutation_lock = threading.Lock()

    def render_frame(self, light: str, exposure: Optional[float]):
        if light == "std":
            return synthscene.render_standard(
                self.scene, self.profile.std_exposure if exposure is None else exposure
            )
        return synthscene.render_uv(
            self.scene, self.profile.uv_exposure if exposure is None else exposure
        )

    def preview(self, profile: CalibrationProfile) -> dict:
        frame = self.render_frame("uv", profile.uv_exposure)
        mask, keypoints = extract_labels([(profile.uv_exposure, frame)], profile)
        counts = {
            str(spec.class_id): int((mask.classes == spec.class_id).sum())
            for spec in profile.classes
        }
        return {
            "mask_png_base64": base64.b64encode(datastore.mask_png_bytes(mask)).decode("ascii"),
            "per_class_pixel_counts": counts,
            "keypoints": [kp.to_dict() for kp in keypoints],
        }

    def profile_path(self, name: str) -> Path:
        return self.dataset_root / "profiles" / f"{name}.json"

    def save_profile(self, profile: CalibrationProfile) -> None:
        payload = json.dumps(profile.to_dict(), indent=2).encode("utf-8")
        path = self.profile_path(profile.name)
        path.parent.mkdir(parents=True, exist_ok=True)
        datastore._atomic_write_bytes(path, payload)
        self.profile = profile

    def capture_sample(self) -> str:
        sample = capture.capture_pair(self.camera, self.rig, self.profile)
        labels = extract_labels(sample.uv_images, self.profile)
        from .model import PairedSample

        labeled = PairedSample(
            sample_id=sample.sample_id,
            std_image=sample.std_image,
            uv_images=sample.uv_images,
            labels=labels,
            timing=sample.timing,
        )
        self.writer.write_sample(labeled, self.profile)
        return sample.sample_id

    def set_plug(self, channel: str, on: bool) -> None:
        target = {"uv": self.rig.uv, "ambient": self.rig.ambient}.get(channel)
        if target is None:
            raise KeyError(channel)
        target.set_state(on)


class _ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


class _Handler(BaseHTTPRequestHandler):
    server_version = "luv-calib/1"

    @property
    def ctx(self) -> ServiceContext:
        return self.server.context  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):
        pass

    # ------------------------------------------------------------------
    # plumbing

    def _send(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, doc) -> None:
        self._send(status, "application/json", json.dumps(doc).encode("utf-8"))

    def _fail(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    def _read_body_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            raise _ApiError(413, "body too large")
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _ApiError(400, f"invalid JSON body: {exc}") from exc

    def _parse_profile(self, data) -> CalibrationProfile:
        try:
            return CalibrationProfile.from_dict(data)
        except (KeyError, TypeError, ValueError) as exc:
            raise _ApiError(400, f"invalid profile: {exc}") from exc

    def _dispatch(self, method: str) -> None:
        url = urlparse(self.path)
        try:
            handler = self._route(method, url.path)
            if handler is None:
                raise _ApiError(404, f"no such endpoint: {method} {url.path}")
            handler(url)
        except _ApiError as exc:
            self._fail(exc.status, str(exc))
        except plugnet.PlugError as exc:
            self._fail(502, str(exc))
        except (capture.CameraError, capture.SessionError, datastore.DatasetError) as exc:
            self._fail(500, str(exc))
        except Exception as exc:  # noqa: BLE001 - last-resort service guard
            self._fail(500, f"internal error: {exc}")

    def _route(self, method: str, path: str):
        if path == "/api/frame" and method == "GET":
            return self._handle_frame
        if path == "/api/preview" and method == "POST":
            return self._handle_preview
        if path.startswith("/api/profile/"):
            if method == "GET":
                return self._handle_profile_get
            if method == "PUT":
                return self._handle_profile_put
        if path == "/api/sweep" and method == "POST":
            return self._handle_sweep
        if path.startswith("/api/plug/") and method == "POST":
            return self._handle_plug
        if path == "/api/capture" and method == "POST":
            return self._handle_capture
        return None

    def do_GET(self):  # noqa: N802 - stdlib naming
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    def do_PUT(self):  # noqa: N802
        self._dispatch("PUT")

    # ------------------------------------------------------------------
    # endpoints

    def _handle_frame(self, url) -> None:
        query = parse_qs(url.query)
        light = query.get("light", ["std"])[0]
        if light not in ("std", "uv"):
            raise _ApiError(400, f"light must be std or uv, got {light!r}")
        exposure = None
        if "exposure" in query:
            try:
                exposure = float(query["exposure"][0])
            except ValueError as exc:
                raise _ApiError(400, f"bad exposure: {query['exposure'][0]!r}") from exc
            if exposure < 0:
                raise _ApiError(400, "exposure must be nonnegative")
        frame = self.ctx.render_frame(light, exposure)
        self._send(200, "image/png", datastore.image_png_bytes(frame))

    def _handle_preview(self, url) -> None:
        profile = self._parse_profile(self._read_body_json())
        self._send_json(200, self.ctx.preview(profile))

    def _profile_name(self, url) -> str:
        name = url.path[len("/api/profile/"):]
        if not _PROFILE_NAME.match(name):
            raise _ApiError(400, f"invalid profile name: {name!r}")
        return name

    def _handle_profile_get(self, url) -> None:
        path = self.ctx.profile_path(self._profile_name(url))
        if not path.exists():
            raise _ApiError(404, f"profile not found: {path.name}")
        self._send(200, "application/json", path.read_bytes())

    def _handle_profile_put(self, url) -> None:
        name = self._profile_name(url)
        data = self._read_body_json()
        if data.get("name") != name:
            raise _ApiError(400, "profile name in body must match the URL")
        profile = self._parse_profile(data)
        with self.ctx.mutation_lock:
            self.ctx.save_profile(profile)
        self._send(200, "application/json", self.ctx.profile_path(name).read_bytes())

    def _handle_sweep(self, url) -> None:
        body = self._read_body_json()
        exposures = body.get("exposures")
        if not isinstance(exposures, list) or not exposures:
            raise _ApiError(400, "body must contain a non-empty exposures list")
        try:
            candidates = [float(e) for e in exposures]
        except (TypeError, ValueError) as exc:
            raise _ApiError(400, f"exposures must be numbers: {exc}") from exc
        profile = (
            self._parse_profile(body["profile"]) if "profile" in body else self.ctx.profile
        )
        with self.ctx.mutation_lock:
            best, scores = capture.sweep_exposures(
                self.ctx.camera, self.ctx.rig, profile, candidates
            )
        self._send_json(
            200, {"best": best, "scores": {str(e): s for e, s in sorted(scores.items())}}
        )

    def _handle_plug(self, url) -> None:
        channel = url.path[len("/api/plug/"):]
        state = self._read_body_json().get("state")
        if state not in ("on", "off"):
            raise _ApiError(400, f"state must be 'on' or 'off', got {state!r}")
        try:
            with self.ctx.mutation_lock:
                self.ctx.set_plug(channel, state == "on")
        except KeyError as exc:
            raise _ApiError(404, f"no such channel: {channel!r}") from exc
        self._send_json(200, {"state": state})

    def _handle_capture(self, url) -> None:
        with self.ctx.mutation_lock:
            sample_id = self.ctx.capture_sample()
        self._send_json(200, {"sample_id": sample_id})


def build_server(config: AppConfig, port: Optional[int] = None, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bound, unstarted server; callers run serve_forever and server_close.

    `port` overrides the configured one; pass 0 for an ephemeral port.
    """
    context = ServiceContext(config)
    bind_port = config.service_port if port is None else port
    server = ThreadingHTTPServer((host, bind_port), _Handler)
    server.context = context  # type: ignore[attr-defined]
    server.daemon_threads = True
    return server
