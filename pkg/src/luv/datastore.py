"""On-disk dataset layout and persistence.

Layout under a dataset root:

    manifest.jsonl               one JSON record per sample, append-only
    profiles/<name>.json         calibration profiles referenced by records
    images/<id>_std.png          standard-light capture
    images/<id>_uv_<exposure>.png  one per UV exposure
    labels/<id>_mask.png         class-index mask (single channel), if labeled
    labels/<id>_kp.json          keypoint sidecar, if labeled

The manifest line is the commit point: sample files are fully written and
synced before the line appears, and the manifest itself is replaced through
a temp file, so a writer killed at any point never leaves a record that
points at missing or truncated files.
"""

from __future__ import annotations

import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .model import (
    CalibrationProfile,
    DatasetManifest,
    ImageRGB,
    Keypoint,
    ManifestRecord,
    Mask,
    PairedSample,
    TimingRecord,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


class DatasetError(Exception):
    """Layout, manifest, or integrity failure."""


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def png_bytes(array: np.ndarray, mode: str) -> bytes:
    """One encoder for every PNG the package writes or serves, so the same
    pixels always produce the same bytes."""
    import io

    buf = io.BytesIO()
    Image.fromarray(array, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def mask_png_bytes(mask: Mask) -> bytes:
    return png_bytes(mask.classes, "L")


def image_png_bytes(img: ImageRGB) -> bytes:
    return png_bytes(img.pixels, "RGB")


def _save_png(path: Path, array: np.ndarray, mode: str) -> None:
    _atomic_write_bytes(path, png_bytes(array, mode))


class DatasetWriter:
    """Single writer for one dataset root.

    `checkpoint_hook`, when set, is called with a label at each commit point;
    tests abort there to prove that no partial sample ever reaches the
    manifest.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.checkpoint_hook: Optional[Callable[[str], None]] = None
        try:
            (self.root / "images").mkdir(parents=True, exist_ok=True)
            (self.root / "labels").mkdir(exist_ok=True)
            (self.root / "profiles").mkdir(exist_ok=True)
        except OSError as exc:
            raise DatasetError(f"cannot create dataset layout at {self.root}: {exc}") from exc
        self._known_ids = set()
        manifest = self.root / MANIFEST_NAME
        if manifest.exists():
            for record in _parse_manifest(manifest):
                self._known_ids.add(record.id)

    def _checkpoint(self, label: str) -> None:
        if self.checkpoint_hook is not None:
            self.checkpoint_hook(label)

    def write_profile(self, profile: CalibrationProfile) -> Path:
        path = self.root / "profiles" / f"{profile.name}.json"
        payload = json.dumps(profile.to_dict(), indent=2).encode("utf-8")
        if path.exists():
            if path.read_bytes() != payload:
                raise DatasetError(
                    f"profile {profile.name!r} already stored with different contents"
                )
            return path
        _atomic_write_bytes(path, payload)
        return path

    def write_sample(self, sample: PairedSample, profile: CalibrationProfile) -> ManifestRecord:
        """Persist one sample; the manifest line lands last."""
        if sample.sample_id in self._known_ids:
            raise DatasetError(f"duplicate sample id {sample.sample_id!r}")
        try:
            self.write_profile(profile)
            self._checkpoint("profile_written")

            std_rel = f"images/{sample.sample_id}_std.png"
            _save_png(self.root / std_rel, sample.std_image.pixels, "RGB")
            self._checkpoint("std_written")

            uv_entries: List[Tuple[float, str]] = []
            for exposure, img in sample.uv_images:
                rel = f"images/{sample.sample_id}_uv_{exposure:g}.png"
                _save_png(self.root / rel, img.pixels, "RGB")
                uv_entries.append((exposure, rel))
            self._checkpoint("uv_written")

            if sample.labels is not None:
                mask, keypoints = sample.labels
                _save_png(self.root / f"labels/{sample.sample_id}_mask.png", mask.classes, "L")
                self._checkpoint("mask_written")
                kp_payload = json.dumps([k.to_dict() for k in keypoints], indent=2)
                _atomic_write_bytes(
                    self.root / f"labels/{sample.sample_id}_kp.json",
                    kp_payload.encode("utf-8"),
                )
                self._checkpoint("keypoints_written")

            record = ManifestRecord(
                id=sample.sample_id,
                std=std_rel,
                uv=tuple(uv_entries),
                profile=profile.name,
                t_capture=sample.timing.capture_seconds,
                t_label=sample.timing.label_seconds,
                created_at=datetime.now(timezone.utc).isoformat(),
            )
            self._append_manifest_line(json.dumps(record.to_dict()))
        except DatasetError:
            raise
        except OSError as exc:
            raise DatasetError(f"write failed for sample {sample.sample_id}: {exc}") from exc
        self._known_ids.add(sample.sample_id)
        return record

    def _append_manifest_line(self, line: str) -> None:
        manifest = self.root / MANIFEST_NAME
        existing = manifest.read_bytes() if manifest.exists() else b""
        self._checkpoint("manifest_temp")
        tmp = manifest.with_name(MANIFEST_NAME + ".tmp")
        with open(tmp, "wb") as f:
            f.write(existing + line.encode("utf-8") + b"\n")
            f.flush()
            os.fsync(f.fileno())
        self._checkpoint("manifest_replace")
        os.replace(tmp, manifest)


def write_sample(root, sample: PairedSample, profile: CalibrationProfile) -> ManifestRecord:
    """One-shot convenience wrapper around DatasetWriter."""
    return DatasetWriter(root).write_sample(sample, profile)


def _parse_manifest(path: Path) -> List[ManifestRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(ManifestRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed manifest line: {exc}") from exc
    return records


def _label_paths(root: Path, sample_id: str) -> Tuple[Path, Path]:
    return (
        root / "labels" / f"{sample_id}_mask.png",
        root / "labels" / f"{sample_id}_kp.json",
    )


def read_dataset(root, validate: bool = True) -> DatasetManifest:
    """Load and validate the manifest; sample pixels load lazily via read_sample."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise DatasetError(f"no {MANIFEST_NAME} under {root}")
    records = _parse_manifest(manifest_path)

    profiles: Dict[str, CalibrationProfile] = {}
    profile_dir = root / "profiles"
    if profile_dir.is_dir():
        for path in sorted(profile_dir.glob("*.json")):
            try:
                profiles[path.stem] = CalibrationProfile.from_dict(
                    json.loads(path.read_text(encoding="utf-8"))
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DatasetError(f"bad profile file {path}: {exc}") from exc

    if validate:
        problems = []
        for record in records:
            missing = [
                rel
                for rel in [record.std] + [p for _, p in record.uv]
                if not (root / rel).exists()
            ]
            mask_path, kp_path = _label_paths(root, record.id)
            # labels are optional but must be complete when present
            if mask_path.exists() != kp_path.exists():
                missing.append(f"incomplete labels for {record.id}")
            if record.profile not in profiles:
                missing.append(f"profiles/{record.profile}.json")
            if missing:
                problems.append(f"record {record.id}: missing {', '.join(missing)}")
        if problems:
            raise DatasetError("; ".join(problems))
    return DatasetManifest(records=records, profiles=profiles)


def _load_png(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img)


def read_sample(root, record: ManifestRecord) -> PairedSample:
    """Materialize one record's images and labels from disk."""
    root = Path(root)
    try:
        std = ImageRGB(_load_png(root / record.std))
        uv_images = [(e, ImageRGB(_load_png(root / rel))) for e, rel in record.uv]
    except (OSError, ValueError) as exc:
        raise DatasetError(f"cannot load images for {record.id}: {exc}") from exc
    labels = None
    mask_path, kp_path = _label_paths(root, record.id)
    if mask_path.exists():
        try:
            mask = Mask(_load_png(mask_path))
            keypoints = [
                Keypoint.from_dict(d)
                for d in json.loads(kp_path.read_text(encoding="utf-8"))
            ]
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot load labels for {record.id}: {exc}") from exc
        labels = (mask, keypoints)
    timing = TimingRecord(capture_seconds=record.t_capture, label_seconds=record.t_label)
    return PairedSample(
        sample_id=record.id,
        std_image=std,
        uv_images=uv_images,
        labels=labels,
        timing=timing,
    )


# --------------------------------------------------------------------------
# COCO-like export


def rle_encode(mask: np.ndarray) -> Dict[str, object]:
    """Column-major run lengths, alternating runs starting with zeros."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.reshape(-1, order="F").astype(np.int8)
    if flat.size == 0:
        return {"counts": [], "size": [h, w]}
    changes = np.nonzero(np.diff(flat))[0]
    boundaries = np.concatenate(([0], changes + 1, [flat.size]))
    counts = np.diff(boundaries).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return {"counts": counts, "size": [h, w]}


def rle_decode(rle: Dict[str, object]) -> np.ndarray:
    h, w = rle["size"]
    total = h * w
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for count in rle["counts"]:
        if value:
            flat[pos : pos + count] = True
        pos += count
        value = not value
    if pos != total:
        raise ValueError(f"RLE counts sum to {pos}, expected {total}")
    return flat.reshape((h, w), order="F")


def export_coco_like(root, out_path) -> dict:
    """Write a single-file annotation export; returns the document."""
    root = Path(root)
    dataset = read_dataset(root)
    images = []
    annotations = []
    categories: Dict[int, dict] = {}
    for profile in dataset.profiles.values():
        for spec in profile.classes:
            categories.setdefault(
                spec.class_id,
                {
                    "id": spec.class_id,
                    "name": spec.name,
                    "keypoint_mode": spec.keypoint_mode,
                },
            )

    ann_id = 1
    skipped = 0
    for image_id, record in enumerate(dataset.records, start=1):
        mask_path, _ = _label_paths(root, record.id)
        if not mask_path.exists():
            skipped += 1
            log.warning("skipping unlabeled sample %s", record.id)
            continue
        sample = read_sample(root, record)
        mask, keypoints = sample.labels
        images.append(
            {
                "id": image_id,
                "file_name": record.std,
                "width": sample.std_image.width,
                "height": sample.std_image.height,
                "sample_id": record.id,
            }
        )
        for class_id in sorted(np.unique(mask.classes)):
            if class_id == 0:
                continue
            binary = mask.classes == class_id
            vs, us = np.nonzero(binary)
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": int(class_id),
                    "segmentation": rle_encode(binary),
                    "area": int(binary.sum()),
                    "bbox": [
                        int(us.min()),
                        int(vs.min()),
                        int(us.max() - us.min() + 1),
                        int(vs.max() - vs.min() + 1),
                    ],
                }
            )
            ann_id += 1
        by_class: Dict[int, List[Keypoint]] = {}
        for kp in keypoints:
            by_class.setdefault(kp.class_id, []).append(kp)
        for class_id, kps in sorted(by_class.items()):
            flat = []
            for kp in kps:
                flat.extend([kp.u, kp.v, 2])
            annotations.append(
                {
                    "id": ann_id,
                    "image_id": image_id,
                    "category_id": class_id,
                    "keypoints": flat,
                    "num_keypoints": len(kps),
                }
            )
            ann_id += 1

    doc = {
        "images": images,
        "annotations": annotations,
        "categories": [categories[k] for k in sorted(categories)],
        "skipped_unlabeled": skipped,
    }
    out_path = Path(out_path)
    _atomic_write_bytes(out_path, json.dumps(doc, indent=2).encode("utf-8"))
    return doc
