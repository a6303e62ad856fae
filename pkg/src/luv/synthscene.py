"""Synthetic paired-scene generator with exact ground truth.

Scenes contain a handful of desk-scale objects (towel, cable, needle,
distractors) rasterized without anti-aliasing, so the ground-truth mask is
exact down to the pixel. Standard and UV renders share geometry; paint is
invisible under standard light and fluoresces under UV, mirroring the
capture rig this stands in for.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .colorops import hsv_to_rgb, rgb_to_hsv
from .model import (
    CalibrationProfile,
    ClassSpec,
    HSVBand,
    ImageRGB,
    Keypoint,
    Mask,
    PaintType,
)

ARCHETYPES = ("towel", "cable", "needle", "distractor")

# UV response constants. The dim factor and noise model are free parameters
# of the simulator; noise is truncated at 3 sigma so band margins of 6 sigma
# can never be crossed by a single sample.
DIM_FACTOR = 0.15
NATURAL_BLUE_GAIN = 0.25

_FLUOR_BY_KIND = {
    "cable": (1.0, 0.08, 0.08),
    "needle": (0.10, 1.0, 0.12),
    "towel": (1.0, 0.10, 0.90),
}
_BASE_BY_KIND = {
    "cable": (0.15, 0.20, 0.70),
    "needle": (0.75, 0.78, 0.80),
    "towel": (0.92, 0.92, 0.88),
}

Color = Tuple[float, float, float]


@dataclass(frozen=True)
class SceneObject:
    """One object in a scene.

    `points` is the kind-specific geometry: quadrilateral corners for a
    towel, polyline vertices for a cable, arc samples for a needle, polygon
    vertices for a distractor. A painted towel carries paint dabs on its
    corners (a keypoint class); painted cables and needles fluoresce over
    their whole body (a mask class).
    """

    kind: str
    points: Tuple[Tuple[float, float], ...]
    thickness: float = 0.0
    painted: bool = False
    class_id: int = 0
    base_color: Color = (0.5, 0.5, 0.5)
    fluor_color: Color = (1.0, 0.1, 0.1)
    natural_fluorescence: bool = False

    def __post_init__(self):
        if self.kind not in ARCHETYPES:
            raise ValueError(f"unknown archetype {self.kind!r}")
        if self.kind == "towel" and len(self.points) != 4:
            raise ValueError("towel needs exactly 4 corners")
        if self.kind in ("cable", "needle"):
            if len(self.points) < 2:
                raise ValueError(f"{self.kind} needs at least 2 points")
            if self.thickness <= 0:
                raise ValueError(f"{self.kind} needs positive thickness")
        if self.kind == "distractor" and len(self.points) < 3:
            raise ValueError("distractor polygon needs at least 3 vertices")
        if self.painted and self.class_id < 1:
            raise ValueError("painted object needs a class_id >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "points": [list(p) for p in self.points],
            "thickness": self.thickness,
            "painted": self.painted,
            "class_id": self.class_id,
            "base_color": list(self.base_color),
            "fluor_color": list(self.fluor_color),
            "natural_fluorescence": self.natural_fluorescence,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneObject":
        return cls(
            kind=data["kind"],
            points=tuple((float(u), float(v)) for u, v in data["points"]),
            thickness=float(data.get("thickness", 0.0)),
            painted=bool(data.get("painted", False)),
            class_id=int(data.get("class_id", 0)),
            base_color=tuple(float(c) for c in data["base_color"]),
            fluor_color=tuple(float(c) for c in data["fluor_color"]),
            natural_fluorescence=bool(data.get("natural_fluorescence", False)),
        )


@dataclass(frozen=True)
class SceneSpec:
    """Full description of one synthetic scene; rendering is pure in this."""

    width: int
    height: int
    seed: int
    objects: Tuple[SceneObject, ...] = ()
    noise_sigma: float = 0.0
    bg_color: Color = (0.55, 0.50, 0.45)
    bg_texture_amp: float = 0.04
    corner_mark_radius: float = 4.0

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError("canvas must be at least 8x8")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if self.corner_mark_radius <= 0:
            raise ValueError("corner_mark_radius must be positive")
        object.__setattr__(self, "objects", tuple(self.objects))

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "seed": self.seed,
            "objects": [o.to_dict() for o in self.objects],
            "noise_sigma": self.noise_sigma,
            "bg_color": list(self.bg_color),
            "bg_texture_amp": self.bg_texture_amp,
            "corner_mark_radius": self.corner_mark_radius,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        return cls(
            width=int(data["width"]),
            height=int(data["height"]),
            seed=int(data["seed"]),
            objects=tuple(SceneObject.from_dict(o) for o in data["objects"]),
            noise_sigma=float(data.get("noise_sigma", 0.0)),
            bg_color=tuple(float(c) for c in data.get("bg_color", (0.55, 0.50, 0.45))),
            bg_texture_amp=float(data.get("bg_texture_amp", 0.04)),
            corner_mark_radius=float(data.get("corner_mark_radius", 4.0)),
        )


# --------------------------------------------------------------------------
# rasterization (hard edges, pixel sample at integer (u, v))


def fill_polygon(height: int, width: int, points: Sequence[Tuple[float, float]]) -> np.ndarray:
    """Even-odd polygon fill; edges shared between rows use a half-open rule."""
    pts = np.asarray(points, dtype=np.float64)
    vv = np.arange(height, dtype=np.float64)[:, None]
    uu = np.arange(width, dtype=np.float64)[None, :]
    inside = np.zeros((height, width), dtype=bool)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        crosses = (y1 <= vv) != (y2 <= vv)
        if not crosses.any():
            continue
        denom = y2 - y1 if y2 != y1 else 1.0
        xi = x1 + (vv - y1) * (x2 - x1) / denom
        inside ^= crosses & (uu < xi)
    return inside


def stroke_polyline(
    height: int, width: int, points: Sequence[Tuple[float, float]], radius: float
) -> np.ndarray:
    """Union of capsules around consecutive segments."""
    pts = np.asarray(points, dtype=np.float64)
    out = np.zeros((height, width), dtype=bool)
    r2 = radius * radius
    for a, b in zip(pts, pts[1:]):
        u0 = max(0, int(math.floor(min(a[0], b[0]) - radius - 1)))
        u1 = min(width, int(math.ceil(max(a[0], b[0]) + radius + 2)))
        v0 = max(0, int(math.floor(min(a[1], b[1]) - radius - 1)))
        v1 = min(height, int(math.ceil(max(a[1], b[1]) + radius + 2)))
        if u0 >= u1 or v0 >= v1:
            continue
        uu = np.arange(u0, u1, dtype=np.float64)[None, :]
        vv = np.arange(v0, v1, dtype=np.float64)[:, None]
        d = b - a
        len2 = d[0] * d[0] + d[1] * d[1]
        if len2 == 0:
            du = uu - a[0]
            dv = vv - a[1]
        else:
            t = np.clip(((uu - a[0]) * d[0] + (vv - a[1]) * d[1]) / len2, 0.0, 1.0)
            du = uu - (a[0] + t * d[0])
            dv = vv - (a[1] + t * d[1])
        out[v0:v1, u0:u1] |= du * du + dv * dv <= r2
    return out


def fill_disk(height: int, width: int, center: Tuple[float, float], radius: float) -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    cu, cv = center
    u0 = max(0, int(math.floor(cu - radius - 1)))
    u1 = min(width, int(math.ceil(cu + radius + 2)))
    v0 = max(0, int(math.floor(cv - radius - 1)))
    v1 = min(height, int(math.ceil(cv + radius + 2)))
    if u0 >= u1 or v0 >= v1:
        return out
    uu = np.arange(u0, u1, dtype=np.float64)[None, :]
    vv = np.arange(v0, v1, dtype=np.float64)[:, None]
    out[v0:v1, u0:u1] = (uu - cu) ** 2 + (vv - cv) ** 2 <= radius * radius
    return out


# --------------------------------------------------------------------------
# scene flattening


@dataclass(frozen=True)
class _Part:
    mask: np.ndarray
    painted: bool
    paint_only: bool  # paint dabs are invisible under standard light
    class_id: int
    base_color: Color
    fluor_color: Color
    natural: bool
    keypoint: Optional[Tuple[float, float]] = None


def _parts(spec: SceneSpec) -> List[_Part]:
    parts: List[_Part] = []
    h, w = spec.height, spec.width
    for obj in spec.objects:
        if obj.kind in ("towel", "distractor"):
            body = fill_polygon(h, w, obj.points)
        else:
            body = stroke_polyline(h, w, obj.points, obj.thickness)
        body_painted = obj.painted and obj.kind in ("cable", "needle", "distractor")
        parts.append(
            _Part(
                mask=body,
                painted=body_painted,
                paint_only=False,
                class_id=obj.class_id if body_painted else 0,
                base_color=obj.base_color,
                fluor_color=obj.fluor_color,
                natural=obj.natural_fluorescence,
                keypoint=None,
            )
        )
        if obj.kind == "towel" and obj.painted:
            for corner in obj.points:
                parts.append(
                    _Part(
                        mask=fill_disk(h, w, corner, spec.corner_mark_radius),
                        painted=True,
                        paint_only=True,
                        class_id=obj.class_id,
                        base_color=obj.base_color,
                        fluor_color=obj.fluor_color,
                        natural=False,
                        keypoint=corner,
                    )
                )
    return parts


def _owner_map(spec: SceneSpec, parts: Sequence[_Part], include_paint: bool) -> np.ndarray:
    owner = np.full((spec.height, spec.width), -1, dtype=np.int32)
    for i, part in enumerate(parts):
        if part.paint_only and not include_paint:
            continue
        owner[part.mask] = i
    return owner


# --------------------------------------------------------------------------
# rendering


def _seed_for(seed: int, tag: str, exposure: float) -> np.random.Generator:
    (bits,) = struct.unpack("<Q", struct.pack("<d", float(exposure)))
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(tag.encode()), bits]))


def _texture(spec: SceneSpec) -> np.ndarray:
    """Low-frequency value noise, fixed per scene seed."""
    h, w = spec.height, spec.width
    rng = _seed_for(spec.seed, "bg", 0.0)
    gh, gw = h // 32 + 2, w // 32 + 2
    grid = rng.uniform(-1.0, 1.0, size=(gh, gw))
    yy = np.linspace(0.0, gh - 1.0001, h)
    xx = np.linspace(0.0, gw - 1.0001, w)
    y0 = yy.astype(int)
    x0 = xx.astype(int)
    fy = (yy - y0)[:, None]
    fx = (xx - x0)[None, :]
    tex = (
        grid[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + grid[np.ix_(y0 + 1, x0)] * fy * (1 - fx)
        + grid[np.ix_(y0, x0 + 1)] * (1 - fy) * fx
        + grid[np.ix_(y0 + 1, x0 + 1)] * fy * fx
    )
    return spec.bg_texture_amp * tex


def _finish(spec: SceneSpec, plane: np.ndarray, exposure: float, tag: str) -> ImageRGB:
    out = exposure * plane
    if spec.noise_sigma > 0:
        rng = _seed_for(spec.seed, tag, exposure)
        noise = rng.normal(0.0, spec.noise_sigma, size=out.shape)
        np.clip(noise, -3 * spec.noise_sigma, 3 * spec.noise_sigma, out=noise)
        out += noise
    return ImageRGB.from_float(np.clip(out, 0.0, 1.0))


def _background_plane(spec: SceneSpec) -> np.ndarray:
    plane = np.empty((spec.height, spec.width, 3), dtype=np.float64)
    plane[:] = spec.bg_color
    plane += _texture(spec)[:, :, None]
    return np.clip(plane, 0.0, 1.0)


def render_standard(spec: SceneSpec, exposure: float) -> ImageRGB:
    """Scene under workspace lighting. Paint does not show."""
    if exposure < 0:
        raise ValueError("exposure must be nonnegative")
    parts = _parts(spec)
    owner = _owner_map(spec, parts, include_paint=False)
    plane = _background_plane(spec)
    for i, part in enumerate(parts):
        if part.paint_only:
            continue
        plane[owner == i] = part.base_color
    return _finish(spec, plane, exposure, "std")


def render_uv(spec: SceneSpec, exposure: float) -> ImageRGB:
    """Scene under UV: everything dim except fluorescent paint."""
    if exposure < 0:
        raise ValueError("exposure must be nonnegative")
    parts = _parts(spec)
    owner = _owner_map(spec, parts, include_paint=True)
    plane = DIM_FACTOR * _background_plane(spec)
    for i, part in enumerate(parts):
        sel = owner == i
        if part.painted:
            plane[sel] = part.fluor_color
        else:
            color = DIM_FACTOR * np.asarray(part.base_color)
            if part.natural:
                color = color + (0.0, 0.0, NATURAL_BLUE_GAIN)
            plane[sel] = color
    return _finish(spec, plane, exposure, "uv")


def ground_truth(spec: SceneSpec) -> Tuple[Mask, List[Keypoint]]:
    """Exact labels from the rasterized geometry, no thresholds involved."""
    parts = _parts(spec)
    owner = _owner_map(spec, parts, include_paint=True)
    mask = np.zeros((spec.height, spec.width), dtype=np.uint8)
    keypoints: List[Keypoint] = []
    for i, part in enumerate(parts):
        if not part.painted:
            continue
        sel = owner == i
        if part.keypoint is not None:
            area = int(sel.sum())
            if area >= 1:
                keypoints.append(
                    Keypoint(class_id=part.class_id, u=part.keypoint[0], v=part.keypoint[1], area=area)
                )
        else:
            mask[sel] = part.class_id
    return Mask(mask), keypoints


def strip_paint(spec: SceneSpec) -> SceneSpec:
    """The same scene with every painted flag cleared (execution phase)."""
    return replace(spec, objects=tuple(replace(o, painted=False) for o in spec.objects))


# --------------------------------------------------------------------------
# randomized generation


def _margin(spec: SceneSpec) -> float:
    return spec.corner_mark_radius + 8.0


def _towel_corners(rng: np.random.Generator, w: int, h: int, margin: float, min_sep: float):
    scale = min(w, h)
    for _ in range(30):
        cx = rng.uniform(0.32, 0.68) * w
        cy = rng.uniform(0.32, 0.68) * h
        ang = rng.uniform(0.0, 2 * math.pi)
        sw = rng.uniform(0.16, 0.26) * scale
        sh = rng.uniform(0.16, 0.26) * scale
        ca, sa = math.cos(ang), math.sin(ang)
        base = [(-sw, -sh), (sw, -sh), (sw, sh), (-sw, sh)]
        jitter = rng.uniform(-0.12, 0.12, size=(4, 2)) * min(sw, sh)
        pts = []
        for (bx, by), (jx, jy) in zip(base, jitter):
            x = bx + jx
            y = by + jy
            pts.append((cx + ca * x - sa * y, cy + sa * x + ca * y))
        ok = all(margin <= u <= w - 1 - margin and margin <= v <= h - 1 - margin for u, v in pts)
        if ok:
            for i in range(4):
                for j in range(i + 1, 4):
                    d = math.dist(pts[i], pts[j])
                    if d < min_sep:
                        ok = False
        if ok:
            return tuple(pts)
    # deterministic fallback: centered axis-aligned rectangle
    sw = 0.2 * scale
    sh = 0.16 * scale
    cx, cy = w / 2.0, h / 2.0
    return ((cx - sw, cy - sh), (cx + sw, cy - sh), (cx + sw, cy + sh), (cx - sw, cy + sh))


def _cable_points(rng: np.random.Generator, w: int, h: int, margin: float):
    scale = min(w, h)
    step = 0.035 * scale
    n = int(rng.integers(25, 45))
    x = rng.uniform(margin + step, w - 1 - margin - step)
    y = rng.uniform(margin + step, h - 1 - margin - step)
    heading = rng.uniform(0.0, 2 * math.pi)
    pts = [(x, y)]
    for _ in range(n):
        heading += rng.uniform(-0.4, 0.4)
        nx = x + step * math.cos(heading)
        ny = y + step * math.sin(heading)
        if not (margin <= nx <= w - 1 - margin):
            heading = math.pi - heading
            nx = x + step * math.cos(heading)
        if not (margin <= ny <= h - 1 - margin):
            heading = -heading
            ny = y + step * math.sin(heading)
        x = float(np.clip(nx, margin, w - 1 - margin))
        y = float(np.clip(ny, margin, h - 1 - margin))
        pts.append((x, y))
    return tuple(pts), float(rng.uniform(2.5, 4.0))


def _needle_points(rng: np.random.Generator, w: int, h: int, margin: float):
    scale = min(w, h)
    radius = rng.uniform(0.10, 0.18) * scale
    cx = rng.uniform(margin + radius, w - 1 - margin - radius)
    cy = rng.uniform(margin + radius, h - 1 - margin - radius)
    start = rng.uniform(0.0, 2 * math.pi)
    span = rng.uniform(0.85, 1.05) * math.pi
    n = max(10, int(radius * span / 2.0))
    angles = start + np.linspace(0.0, span, n + 1)
    pts = tuple((cx + radius * math.cos(a), cy + radius * math.sin(a)) for a in angles)
    return pts, float(rng.uniform(1.4, 2.2))


def _distractor(rng: np.random.Generator, w: int, h: int, margin: float) -> SceneObject:
    scale = min(w, h)
    k = int(rng.integers(3, 8))
    cx = rng.uniform(margin, w - 1 - margin)
    cy = rng.uniform(margin, h - 1 - margin)
    angles = np.sort(rng.uniform(0.0, 2 * math.pi, size=k))
    radii = rng.uniform(0.04, 0.11, size=k) * scale
    pts = tuple(
        (
            float(np.clip(cx + r * math.cos(a), 2.0, w - 3.0)),
            float(np.clip(cy + r * math.sin(a), 2.0, h - 3.0)),
        )
        for a, r in zip(angles, radii)
    )
    hval = rng.uniform(20.0, 180.0)
    sval = rng.uniform(0.4, 0.85)
    vval = rng.uniform(0.35, 0.80)
    return SceneObject(kind="distractor", points=pts, base_color=hsv_to_rgb(hval, sval, vval))


def _generate_geometry(rng: np.random.Generator, obj: SceneObject, w: int, h: int, margin: float) -> SceneObject:
    """New geometry for an existing object, keeping class and colors."""
    if obj.kind == "towel":
        # corners must stay far enough apart that their paint disks
        # (radius = margin - 8) never merge into one blob
        pts = _towel_corners(rng, w, h, margin, min_sep=4.0 * (margin - 8.0) + 6.0)
        return replace(obj, points=pts)
    if obj.kind == "cable":
        pts, thickness = _cable_points(rng, w, h, margin)
        return replace(obj, points=pts, thickness=thickness)
    if obj.kind == "needle":
        pts, thickness = _needle_points(rng, w, h, margin)
        return replace(obj, points=pts, thickness=thickness)
    fresh = _distractor(rng, w, h, margin)
    return replace(obj, points=fresh.points, base_color=fresh.base_color)


def randomize(spec: SceneSpec, seed: int) -> SceneSpec:
    """Same object vocabulary, new poses; deterministic under seed."""
    rng = np.random.default_rng(seed)
    margin = _margin(spec)
    objects = tuple(
        _generate_geometry(rng, obj, spec.width, spec.height, margin) for obj in spec.objects
    )
    return replace(spec, seed=seed, objects=objects)


def make_scene(
    kind: str,
    seed: int,
    width: int = 640,
    height: int = 360,
    noise_sigma: float = 0.0,
    n_distractors: int = 2,
) -> SceneSpec:
    """Standard test scene: distractors first, then the target object(s).

    `kind` is one of the archetypes or "multi" (cable + needle + towel, three
    classes). Targets draw last so they are never occluded.
    """
    if kind not in ARCHETYPES + ("multi",):
        raise ValueError(f"unknown scene kind {kind!r}")
    spec = SceneSpec(width=width, height=height, seed=seed, noise_sigma=noise_sigma)
    rng = np.random.default_rng(seed)
    margin = _margin(spec)
    objects: List[SceneObject] = [
        _distractor(rng, width, height, margin) for _ in range(n_distractors)
    ]
    if kind == "multi":
        targets = [("cable", 1), ("needle", 2), ("towel", 3)]
    elif kind == "distractor":
        targets = []
    else:
        targets = [(kind, 1)]
    for target_kind, class_id in targets:
        template = SceneObject(
            kind=target_kind,
            points=((0.0, 0.0),) * (4 if target_kind == "towel" else 2),
            thickness=1.0 if target_kind in ("cable", "needle") else 0.0,
            painted=True,
            class_id=class_id,
            base_color=_BASE_BY_KIND[target_kind],
            fluor_color=_FLUOR_BY_KIND[target_kind],
            natural_fluorescence=target_kind == "towel",
        )
        objects.append(_generate_geometry(rng, template, width, height, margin))
    return replace(spec, objects=tuple(objects))


# --------------------------------------------------------------------------
# matched calibration profile


def _band_for(fluor: Color, uv_exposure: float) -> HSVBand:
    rendered = np.clip(np.asarray(fluor) * uv_exposure, 0.0, 1.0)
    hue, sat, val = rgb_to_hsv(*rendered)
    return HSVBand(
        hue_min=(hue - 25.0) % 360.0,
        hue_max=(hue + 25.0) % 360.0,
        sat_min=max(0.2, sat - 0.3),
        sat_max=1.0,
        val_min=max(0.25, val - 0.3),
        val_max=1.0,
    )


def default_profile(
    spec: SceneSpec, uv_exposure: float = 0.6, std_exposure: float = 1.0
) -> CalibrationProfile:
    """Profile whose bands match the scene's fluorescent colors."""
    by_class: Dict[int, SceneObject] = {}
    for obj in spec.objects:
        if obj.painted:
            by_class.setdefault(obj.class_id, obj)
    if not by_class:
        raise ValueError("scene has no painted objects to calibrate against")
    classes = [
        ClassSpec(
            class_id=cid,
            name=obj.kind,
            band=_band_for(obj.fluor_color, uv_exposure),
            min_area=10,
            morphology_open_radius=0,
            morphology_close_radius=0,
            paint_type=PaintType.LACQUER,
            keypoint_mode=obj.kind == "towel",
        )
        for cid, obj in sorted(by_class.items())
    ]
    return CalibrationProfile(
        name=f"synth-{spec.seed}",
        classes=classes,
        uv_exposure=uv_exposure,
        std_exposure=std_exposure,
    )
