"""Shared domain types: images, labels, calibration profiles, dataset records.

All types validate their invariants at construction and are immutable
afterwards, so instances can be shared freely across threads. Out-of-range
values are rejected with ValueError, never clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

# Validity envelope for exposure settings (device units). Individual camera
# backends may impose a narrower range.
EXPOSURE_MIN = 1e-4
EXPOSURE_MAX = 1e4


def _check_exposure(value: float, what: str) -> float:
    value = float(value)
    if not (EXPOSURE_MIN <= value <= EXPOSURE_MAX):
        raise ValueError(
            f"{what} {value} outside supported range [{EXPOSURE_MIN}, {EXPOSURE_MAX}]"
        )
    return value


class ImageRGB:
    """An H x W x 3 raster, stored as 8-bit channels.

    Storage is fixed at uint8; computation happens on normalized floats via
    :meth:`to_float` / :meth:`from_float`, so precision is pinned at the I/O
    boundary only.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixel array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(
                    "pixel array must be integer typed; use ImageRGB.from_float "
                    "for normalized data"
                )
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("integer channel values must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.pixels.shape[0], self.pixels.shape[1])

    @classmethod
    def from_float(cls, arr: np.ndarray) -> "ImageRGB":
        """Quantize a normalized float array in [0, 1] to 8-bit storage."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) float array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("float channels must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("float channels must lie in [0, 1]")
        return cls(np.rint(arr * 255.0).astype(np.uint8))

    def to_float(self) -> np.ndarray:
        """Normalized float64 view of the pixels, each channel in [0, 1]."""
        return self.pixels.astype(np.float64) / 255.0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageRGB):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ImageRGB({self.width}x{self.height})"


class Mask:
    """Per-pixel class indices labeling an image of the same dimensions.

    Index 0 is background; 1..K are semantic classes.
    """

    __slots__ = ("classes",)

    def __init__(self, classes: np.ndarray):
        arr = np.asarray(classes)
        if arr.ndim != 2:
            raise ValueError(f"expected (H, W) class array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask must be at least 1x1")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError("class indices must be integers")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("class indices must lie in [0, 255]")
        arr = np.array(arr, dtype=np.uint8, copy=True)
        arr.setflags(write=False)
        self.classes = arr

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.classes.shape

    def validate_against(self, profile: "CalibrationProfile") -> None:
        """Check every index is either background or a class of `profile`."""
        k = len(profile.classes)
        if int(self.classes.max(initial=0)) > k:
            raise ValueError(
                f"mask contains class index > {k} for profile {profile.name!r}"
            )

    def binary(self, class_id: int) -> np.ndarray:
        return self.classes == class_id

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mask):
            return NotImplemented
        return np.array_equal(self.classes, other.classes)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Mask({self.width}x{self.height})"


@dataclass(frozen=True)
class Keypoint:
    """A blob reduced to its centroid: subpixel (u, v) plus source blob area."""

    class_id: int
    u: float
    v: float
    area: int

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError("class_id must be nonnegative")
        if self.u < 0 or self.v < 0:
            raise ValueError("keypoint coordinates must be nonnegative")
        if self.area < 1:
            raise ValueError("keypoint area must be at least 1 pixel")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Keypoint":
        return cls(
            class_id=int(data["class_id"]),
            u=float(data["u"]),
            v=float(data["v"]),
            area=int(data["area"]),
        )


@dataclass(frozen=True)
class HSVBand:
    """Closed HSV interval constraints defining class membership.

    Hue is in degrees [0, 360); saturation and value in [0, 1]. A band with
    hue_min > hue_max wraps through 0 degrees, i.e. it matches
    h >= hue_min OR h <= hue_max.
    """

    hue_min: float
    hue_max: float
    sat_min: float
    sat_max: float
    val_min: float
    val_max: float

    def __post_init__(self):
        for name in ("hue_min", "hue_max"):
            h = getattr(self, name)
            if not (0.0 <= h < 360.0) or not math.isfinite(h):
                raise ValueError(f"{name} must lie in [0, 360), got {h}")
        for name in ("sat_min", "sat_max", "val_min", "val_max"):
            x = getattr(self, name)
            if not (0.0 <= x <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {x}")
        if self.sat_min > self.sat_max:
            raise ValueError("sat_min must not exceed sat_max")
        if self.val_min > self.val_max:
            raise ValueError("val_min must not exceed val_max")

    @property
    def wraps(self) -> bool:
        return self.hue_min > self.hue_max

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "HSVBand":
        return cls(**{k: float(data[k]) for k in (
            "hue_min", "hue_max", "sat_min", "sat_max", "val_min", "val_max")})


class PaintType(Enum):
    LACQUER = "lacquer"
    DYE = "dye"
    WATER_BASED = "water_based"
    NATURAL_FLUORESCENCE = "natural_fluorescence"


@dataclass(frozen=True)
class ClassSpec:
    """Extraction parameters for one semantic class.

    Classes with keypoint_mode=True contribute blob centroids as keypoints
    instead of writing pixels into the segmentation mask.
    """

    class_id: int
    name: str
    band: HSVBand
    min_area: int = 10
    morphology_open_radius: int = 1
    morphology_close_radius: int = 1
    paint_type: PaintType = PaintType.LACQUER
    keypoint_mode: bool = False

    def __post_init__(self):
        if self.class_id < 1:
            raise ValueError("class_id must be >= 1 (0 is background)")
        if self.min_area < 0:
            raise ValueError("min_area must be nonnegative")
        if self.morphology_open_radius < 0 or self.morphology_close_radius < 0:
            raise ValueError("morphology radii must be nonnegative")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "class_id": self.class_id,
            "name": self.name,
            "band": self.band.to_dict(),
            "min_area": self.min_area,
            "morphology_open_radius": self.morphology_open_radius,
            "morphology_close_radius": self.morphology_close_radius,
            "paint_type": self.paint_type.value,
            "keypoint_mode": self.keypoint_mode,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ClassSpec":
        return cls(
            class_id=int(data["class_id"]),
            name=str(data["name"]),
            band=HSVBand.from_dict(data["band"]),
            min_area=int(data.get("min_area", 10)),
            morphology_open_radius=int(data.get("morphology_open_radius", 1)),
            morphology_close_radius=int(data.get("morphology_close_radius", 1)),
            paint_type=PaintType(data.get("paint_type", "lacquer")),
            keypoint_mode=bool(data.get("keypoint_mode", False)),
        )


@dataclass(frozen=True)
class CalibrationProfile:
    """Persisted per-class bands plus camera and lighting settings.

    The hand-tuned artifact of a calibration session: everything needed to
    reproduce label extraction for one scene setup.
    """

    name: str
    classes: Tuple[ClassSpec, ...]
    uv_exposure: float
    std_exposure: float
    white_balance: float = 4600.0
    settle_delay_ms: int = 250

    def __init__(
        self,
        name: str,
        classes: Sequence[ClassSpec],
        uv_exposure: float,
        std_exposure: float,
        white_balance: float = 4600.0,
        settle_delay_ms: int = 250,
    ):
        classes = tuple(classes)
        if not classes:
            raise ValueError("profile needs at least one class")
        ids = [c.class_id for c in classes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class ids in profile: {ids}")
        if settle_delay_ms < 0:
            raise ValueError("settle_delay_ms must be nonnegative")
        object.__setattr__(self, "name", str(name))
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "uv_exposure", _check_exposure(uv_exposure, "uv_exposure"))
        object.__setattr__(self, "std_exposure", _check_exposure(std_exposure, "std_exposure"))
        object.__setattr__(self, "white_balance", float(white_balance))
        object.__setattr__(self, "settle_delay_ms", int(settle_delay_ms))

    def class_by_id(self, class_id: int) -> ClassSpec:
        for c in self.classes:
            if c.class_id == class_id:
                return c
        raise KeyError(f"no class {class_id} in profile {self.name!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "classes": [c.to_dict() for c in self.classes],
            "uv_exposure": self.uv_exposure,
            "std_exposure": self.std_exposure,
            "white_balance": self.white_balance,
            "settle_delay_ms": self.settle_delay_ms,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CalibrationProfile":
        return cls(
            name=str(data["name"]),
            classes=[ClassSpec.from_dict(c) for c in data["classes"]],
            uv_exposure=float(data["uv_exposure"]),
            std_exposure=float(data["std_exposure"]),
            white_balance=float(data.get("white_balance", 4600.0)),
            settle_delay_ms=int(data.get("settle_delay_ms", 250)),
        )


@dataclass(frozen=True)
class TimingRecord:
    """Wall-clock accounting for one sample: capture and label extraction."""

    capture_seconds: float = 0.0
    label_seconds: float = 0.0
    phases: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.capture_seconds < 0 or self.label_seconds < 0:
            raise ValueError("durations must be nonnegative")
        object.__setattr__(self, "phases", tuple((str(k), float(v)) for k, v in self.phases))

    def with_label_seconds(self, seconds: float) -> "TimingRecord":
        return TimingRecord(self.capture_seconds, seconds, self.phases)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "capture_seconds": self.capture_seconds,
            "label_seconds": self.label_seconds,
            "phases": [[k, v] for k, v in self.phases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimingRecord":
        return cls(
            capture_seconds=float(data.get("capture_seconds", 0.0)),
            label_seconds=float(data.get("label_seconds", 0.0)),
            phases=tuple((k, v) for k, v in data.get("phases", [])),
        )


class PairedSample:
    """One captured datapoint: a standard image plus one or more UV exposures.

    Labels, when present, are a (Mask, keypoints) pair extracted from the UV
    image(s). All images, and the mask, share dimensions.
    """

    __slots__ = ("sample_id", "std_image", "uv_images", "labels", "timing")

    def __init__(
        self,
        sample_id: str,
        std_image: ImageRGB,
        uv_images: Sequence[Tuple[float, ImageRGB]],
        labels: Optional[Tuple[Mask, List[Keypoint]]] = None,
        timing: Optional[TimingRecord] = None,
    ):
        uv_images = tuple((_check_exposure(e, "uv exposure"), img) for e, img in uv_images)
        if not uv_images:
            raise ValueError("at least one UV image is required")
        shape = std_image.shape
        for _, img in uv_images:
            if img.shape != shape:
                raise ValueError(
                    f"UV image shape {img.shape} does not match standard image {shape}"
                )
        if labels is not None:
            mask, keypoints = labels
            if mask.shape != shape:
                raise ValueError(f"mask shape {mask.shape} does not match image {shape}")
            labels = (mask, list(keypoints))
        self.sample_id = str(sample_id)
        self.std_image = std_image
        self.uv_images = uv_images
        self.labels = labels
        self.timing = timing if timing is not None else TimingRecord()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PairedSample):
            return NotImplemented
        if (self.sample_id, self.timing) != (other.sample_id, other.timing):
            return False
        if self.std_image != other.std_image or len(self.uv_images) != len(other.uv_images):
            return False
        for (ea, ia), (eb, ib) in zip(self.uv_images, other.uv_images):
            if ea != eb or ia != ib:
                return False
        if (self.labels is None) != (other.labels is None):
            return False
        if self.labels is not None:
            assert other.labels is not None
            if self.labels[0] != other.labels[0] or self.labels[1] != other.labels[1]:
                return False
        return True

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"PairedSample({self.sample_id!r}, {self.std_image.width}x"
            f"{self.std_image.height}, uv={len(self.uv_images)}, "
            f"labeled={self.labels is not None})"
        )


@dataclass(frozen=True)
class ManifestRecord:
    """One manifest line: sample id plus relative file paths and timings."""

    id: str
    std: str
    uv: Tuple[Tuple[float, str], ...]
    profile: str
    t_capture: float
    t_label: float
    created_at: str

    def __post_init__(self):
        object.__setattr__(
            self, "uv", tuple((float(e), str(p)) for e, p in self.uv)
        )
        if not self.uv:
            raise ValueError("manifest record needs at least one uv entry")

    def exposures(self) -> List[float]:
        return [e for e, _ in self.uv]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "std": self.std,
            "uv": [{"exposure": e, "path": p} for e, p in self.uv],
            "profile": self.profile,
            "t_capture": self.t_capture,
            "t_label": self.t_label,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ManifestRecord":
        return cls(
            id=str(data["id"]),
            std=str(data["std"]),
            uv=tuple((float(u["exposure"]), str(u["path"])) for u in data["uv"]),
            profile=str(data["profile"]),
            t_capture=float(data["t_capture"]),
            t_label=float(data["t_label"]),
            created_at=str(data["created_at"]),
        )


@dataclass
class DatasetManifest:
    """Ordered sample records plus the registry of profiles they reference."""

    records: List[ManifestRecord] = field(default_factory=list)
    profiles: Dict[str, CalibrationProfile] = field(default_factory=dict)

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate sample ids in manifest")

    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def __len__(self) -> int:
        return len(self.records)
