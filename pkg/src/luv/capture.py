"""Paired-capture orchestration: light switching, exposure control, bracket
and sweep logic, and full collection sessions.

The rest state between operations is ambient on, UV off; every operation
restores it on both success and failure.
"""

from __future__ import annotations

import time
import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import plugnet
from .colorops import image_to_hsv, band_mask
from .maskgen import extract_labels
from .model import CalibrationProfile, ImageRGB, PairedSample, TimingRecord


class CameraError(Exception):
    """Camera refused a setting or failed to produce a frame."""


class SessionError(Exception):
    """A collection session failed as a whole."""


class LightChannel(ABC):
    """One switchable light circuit."""

    @abstractmethod
    def set_state(self, on: bool) -> None: ...

    @abstractmethod
    def is_on(self) -> bool: ...


class SimulatedChannel(LightChannel):
    """In-memory channel; optionally fails after a set number of switches."""

    def __init__(self, name: str = "sim", on: bool = False, fail_after: Optional[int] = None):
        self.name = name
        self._on = on
        self.fail_after = fail_after
        self.switch_count = 0
        self.history: List[bool] = []

    def set_state(self, on: bool) -> None:
        self.switch_count += 1
        if self.fail_after is not None and self.switch_count > self.fail_after:
            raise plugnet.TransportError(f"simulated channel {self.name!r} unreachable")
        self._on = on
        self.history.append(on)

    def is_on(self) -> bool:
        return self._on


class PlugChannel(LightChannel):
    """Channel backed by a network smart plug."""

    def __init__(self, endpoint: plugnet.PlugEndpoint, timeout_ms: int = plugnet.DEFAULT_TIMEOUT_MS):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms

    def set_state(self, on: bool) -> None:
        cmd = plugnet.RelayCommand.ON if on else plugnet.RelayCommand.OFF
        plugnet.set_relay(self.endpoint, cmd, self.timeout_ms)

    def is_on(self) -> bool:
        return plugnet.query_state(self.endpoint, self.timeout_ms) is plugnet.RelayCommand.ON


@dataclass
class LightRig:
    """UV channel plus an optional controllable ambient channel."""

    uv: LightChannel
    ambient: Optional[LightChannel] = None
    settle_delay_ms: int = 250

    def __post_init__(self):
        if self.settle_delay_ms < 0:
            raise ValueError("settle_delay_ms must be nonnegative")

    def settle(self) -> None:
        if self.settle_delay_ms:
            time.sleep(self.settle_delay_ms / 1000.0)

    def set_standard(self) -> None:
        if self.ambient is not None:
            self.ambient.set_state(True)
        self.uv.set_state(False)

    def set_uv(self) -> None:
        if self.ambient is not None:
            self.ambient.set_state(False)
        self.uv.set_state(True)

    def restore_rest(self) -> None:
        """Best-effort return to ambient on, UV off; never raises."""
        for action in (lambda: self.uv.set_state(False),
                       lambda: self.ambient.set_state(True) if self.ambient else None):
            try:
                action()
            except Exception:
                pass


class CameraPort(ABC):
    """Minimal programmable camera: exposure, white balance, frame grab."""

    @abstractmethod
    def set_exposure(self, value: float) -> None: ...

    @abstractmethod
    def set_white_balance(self, value: float) -> None: ...

    @abstractmethod
    def grab(self) -> ImageRGB: ...


# Ambient lamps off leaves a little stray light in the simulated room.
_AMBIENT_OFF_FACTOR = 0.08


class SimulatedCamera(CameraPort):
    """Renders the attached synthetic scene according to the rig state."""

    def __init__(self, scene, rig: LightRig):
        self.scene = scene
        self.rig = rig
        self.exposure = 1.0
        self.white_balance = 4600.0
        self.grab_count = 0

    def set_exposure(self, value: float) -> None:
        if value <= 0:
            raise CameraError(f"exposure must be positive, got {value}")
        self.exposure = float(value)

    def set_white_balance(self, value: float) -> None:
        self.white_balance = float(value)

    def grab(self) -> ImageRGB:
        from .synthscene import render_standard, render_uv

        self.grab_count += 1
        if self.rig.uv.is_on():
            return render_uv(self.scene, self.exposure)
        scale = 1.0
        if self.rig.ambient is not None and not self.rig.ambient.is_on():
            scale = _AMBIENT_OFF_FACTOR
        return render_standard(self.scene, self.exposure * scale)


class FileReplayCamera(CameraPort):
    """Plays back a fixed sequence of image files, one per grab."""

    def __init__(self, paths: Sequence):
        self.paths = [Path(p) for p in paths]
        if not self.paths:
            raise ValueError("need at least one image path")
        self.index = 0
        self.exposure = 1.0
        self.white_balance = 4600.0

    def set_exposure(self, value: float) -> None:
        self.exposure = float(value)

    def set_white_balance(self, value: float) -> None:
        self.white_balance = float(value)

    def grab(self) -> ImageRGB:
        if self.index >= len(self.paths):
            raise CameraError("replay sequence exhausted")
        from PIL import Image

        path = self.paths[self.index]
        self.index += 1
        try:
            with Image.open(path) as img:
                return ImageRGB(np.asarray(img.convert("RGB")))
        except OSError as exc:
            raise CameraError(f"cannot read {path}: {exc}") from exc


def capture_pair(
    camera: CameraPort,
    rig: LightRig,
    profile: CalibrationProfile,
    bracket: Optional[Sequence[float]] = None,
) -> PairedSample:
    """Grab one standard frame and one or more UV frames of the same scene.

    The UV frames use the profile exposure, or each bracket exposure in
    ascending order. The rig is returned to rest even when a grab or plug
    command fails mid-sequence.
    """
    if bracket is None:
        exposures = [profile.uv_exposure]
    else:
        exposures = sorted(bracket)
        if not exposures:
            raise ValueError("bracket must contain at least one exposure")
    start = time.perf_counter()
    phases: List[Tuple[str, float]] = []
    try:
        camera.set_white_balance(profile.white_balance)
        rig.set_standard()
        rig.settle()
        camera.set_exposure(profile.std_exposure)
        std_image = camera.grab()
        phases.append(("standard", time.perf_counter() - start))

        rig.set_uv()
        rig.settle()
        uv_images = []
        for exposure in exposures:
            camera.set_exposure(exposure)
            uv_images.append((exposure, camera.grab()))
        phases.append(("uv", time.perf_counter() - start))
    finally:
        rig.restore_rest()
    timing = TimingRecord(capture_seconds=time.perf_counter() - start, phases=phases)
    return PairedSample(
        sample_id=uuid.uuid4().hex,
        std_image=std_image,
        uv_images=uv_images,
        timing=timing,
    )


def sweep_score(img: ImageRGB, profile: CalibrationProfile) -> int:
    """Pixels that are in some class band and neither crushed nor blown out."""
    hsv = image_to_hsv(img)
    usable = (hsv[:, :, 2] >= 0.2) & (hsv[:, :, 2] <= 0.98)
    total = 0
    for spec in profile.classes:
        total += int((band_mask(hsv, spec.band) & usable).sum())
    return total


def sweep_exposures(
    camera: CameraPort,
    rig: LightRig,
    profile: CalibrationProfile,
    candidates: Sequence[float],
) -> Tuple[float, Dict[float, int]]:
    """Try each UV exposure and pick the one with the most usable label pixels.

    Ties go to the lower exposure. A sweep where every candidate scores zero
    still returns the lowest exposure; callers can see the zeros in the score
    map.
    """
    if not candidates:
        raise ValueError("need at least one candidate exposure")
    scores: Dict[float, int] = {}
    try:
        rig.set_uv()
        rig.settle()
        for exposure in sorted(candidates):
            camera.set_exposure(exposure)
            scores[exposure] = sweep_score(camera.grab(), profile)
    finally:
        rig.restore_rest()
    best = min(scores, key=lambda e: (-scores[e], e))
    return best, scores


@dataclass
class SessionSummary:
    requested: int
    completed: int
    failed: int
    sample_ids: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    mean_capture_seconds: float = 0.0
    mean_label_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "completed": self.completed,
            "failed": self.failed,
            "sample_ids": list(self.sample_ids),
            "errors": list(self.errors),
            "mean_capture_seconds": self.mean_capture_seconds,
            "mean_label_seconds": self.mean_label_seconds,
        }


def collect_session(
    camera: CameraPort,
    rig: LightRig,
    profile: CalibrationProfile,
    n: int,
    randomizer: Optional[Callable[[int], None]] = None,
    sink=None,
    bracket: Optional[Sequence[float]] = None,
) -> SessionSummary:
    """Capture, label, and persist n samples.

    Per-sample failures are recorded and skipped; the session raises if more
    than half the samples fail. `sink` is a datastore writer with a
    write_sample(sample, profile) method.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    summary = SessionSummary(requested=n, completed=0, failed=0)
    capture_times: List[float] = []
    label_times: List[float] = []
    for i in range(n):
        try:
            if randomizer is not None:
                randomizer(i)
            sample = capture_pair(camera, rig, profile, bracket=bracket)
            t0 = time.perf_counter()
            labels = extract_labels(sample.uv_images, profile)
            label_seconds = time.perf_counter() - t0
            sample = PairedSample(
                sample_id=sample.sample_id,
                std_image=sample.std_image,
                uv_images=sample.uv_images,
                labels=labels,
                timing=sample.timing.with_label_seconds(label_seconds),
            )
            if sink is not None:
                sink.write_sample(sample, profile)
            summary.sample_ids.append(sample.sample_id)
            capture_times.append(sample.timing.capture_seconds)
            label_times.append(label_seconds)
            summary.completed += 1
        except Exception as exc:  # noqa: BLE001 - per-sample fault isolation
            summary.failed += 1
            summary.errors.append(f"sample {i}: {exc}")
    if capture_times:
        summary.mean_capture_seconds = float(np.mean(capture_times))
        summary.mean_label_seconds = float(np.mean(label_times))
    if summary.failed * 2 > n:
        raise SessionError(
            f"{summary.failed}/{n} samples failed: {summary.errors[:3]}"
        )
    return summary
