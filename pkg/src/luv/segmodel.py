"""Baseline per-pixel segmenter: linear softmax over color features.

Trains on standard-light images paired with paint-derived masks, then
predicts masks for unpainted scenes. The model is deliberately convex so
the whole training loop stays checkable: zero init, full-batch gradient
descent, and a step size that only ever shrinks.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .colorops import image_to_hsv
from .model import ImageRGB, Mask

N_FEATURES = 8
MODEL_MAGIC = b"LUVSEG1\x00"
# backtracking stops here; a step that still raises the loss at this scale
# is skipped so the recorded loss trace stays non-increasing
MIN_LEARNING_RATE = 1e-12


class ModelError(ValueError):
    """Invalid training input or a corrupt model file."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2.0
    iterations: int = 500
    l2: float = 1e-5
    seed: int = 0
    pixels_per_class: int = 4000

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if self.pixels_per_class < 1:
            raise ValueError("pixels_per_class must be at least 1")

    def to_dict(self) -> Dict[str, float]:
        return {
            "learning_rate": self.learning_rate,
            "iterations": self.iterations,
            "l2": self.l2,
            "seed": self.seed,
            "pixels_per_class": self.pixels_per_class,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainConfig":
        return cls(
            learning_rate=float(data["learning_rate"]),
            iterations=int(data["iterations"]),
            l2=float(data["l2"]),
            seed=int(data["seed"]),
            pixels_per_class=int(data["pixels_per_class"]),
        )


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Fitted weights, one row per class index, plus the config that made them.

    `loss_trace` is diagnostic only; it is not persisted by `save_model`.
    """

    weights: np.ndarray
    config: TrainConfig
    loss_trace: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2 or w.shape[1] != N_FEATURES:
            raise ValueError(f"weights must be (classes, {N_FEATURES}), got {w.shape}")
        if w.shape[0] < 2:
            raise ValueError("need at least background plus one class")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and self.config == other.config
        )


def featurize(img: ImageRGB) -> np.ndarray:
    """Per-pixel feature rows [r, g, b, sin(h), cos(h), s, v, 1], float64."""
    rgb = img.to_float().reshape(-1, 3)
    hsv = image_to_hsv(img).reshape(-1, 3)
    h_rad = np.deg2rad(hsv[:, 0])
    out = np.empty((rgb.shape[0], N_FEATURES), dtype=np.float64)
    out[:, 0:3] = rgb
    out[:, 3] = np.sin(h_rad)
    out[:, 4] = np.cos(h_rad)
    out[:, 5] = hsv[:, 1]
    out[:, 6] = hsv[:, 2]
    out[:, 7] = 1.0
    return out


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _loss_only(weights, features, labels, l2: float) -> float:
    logp = _log_softmax(features @ weights.T)
    nll = -logp[np.arange(labels.shape[0]), labels].mean()
    return float(nll + l2 * np.sum(weights * weights))


def loss_and_gradient(
    weights: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy plus l2*||W||^2 and its analytic gradient."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[1] != N_FEATURES:
        raise ValueError(f"features must be (n, {N_FEATURES})")
    n = features.shape[0]
    if n == 0:
        raise ValueError("batch must be non-empty")
    if labels.shape != (n,):
        raise ValueError("labels must be one integer per feature row")
    if labels.min() < 0 or labels.max() >= weights.shape[0]:
        raise ValueError("label outside class range")
    logp = _log_softmax(features @ weights.T)
    rows = np.arange(n)
    loss = float(-logp[rows, labels].mean() + l2 * np.sum(weights * weights))
    resid = np.exp(logp)
    resid[rows, labels] -= 1.0
    grad = resid.T @ features / n + 2.0 * l2 * weights
    return loss, grad


def _subsample(img: ImageRGB, mask: Mask, config: TrainConfig):
    """Class-balanced pixel draw, keyed by image content so the same sample
    contributes the same rows no matter where it sits in the dataset."""
    key = zlib.crc32(img.pixels.tobytes())
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, key]))
    features = featurize(img)
    flat = mask.classes.reshape(-1)
    rows: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    for cls in np.unique(flat):
        idx = np.flatnonzero(flat == cls)
        if idx.shape[0] > config.pixels_per_class:
            idx = rng.choice(idx, size=config.pixels_per_class, replace=False)
            idx.sort()
        rows.append(features[idx])
        labels.append(np.full(idx.shape[0], cls, dtype=np.int64))
    return np.concatenate(rows), np.concatenate(labels)


def fit(
    samples: Sequence[Tuple[ImageRGB, Mask]],
    config: TrainConfig = TrainConfig(),
) -> ModelParams:
    """Train on (standard image, mask) pairs.

    Deterministic for a fixed config, and invariant to the order of
    `samples`: per-sample batches are keyed by content and concatenated in
    a canonical order before the full-batch descent starts.
    """
    if not samples:
        raise ModelError("at least one labeled sample is required")
    keyed = []
    n_classes = 2
    for img, mask in samples:
        if mask.shape != (img.height, img.width):
            raise ModelError(
                f"mask {mask.shape} does not match image "
                f"({img.height}, {img.width})"
            )
        n_classes = max(n_classes, int(mask.classes.max()) + 1)
        x, y = _subsample(img, mask, config)
        key = (zlib.crc32(img.pixels.tobytes()), zlib.crc32(mask.classes.tobytes()))
        keyed.append((key, x, y))
    keyed.sort(key=lambda item: item[0])
    features = np.concatenate([x for _, x, _ in keyed])
    labels = np.concatenate([y for _, _, y in keyed])

    weights = np.zeros((n_classes, N_FEATURES), dtype=np.float64)
    lr = config.learning_rate
    trace: List[float] = []
    for _ in range(config.iterations):
        loss, grad = loss_and_gradient(weights, features, labels, config.l2)
        trace.append(loss)
        while lr > MIN_LEARNING_RATE:
            candidate = weights - lr * grad
            if _loss_only(candidate, features, labels, config.l2) <= loss:
                weights = candidate
                break
            lr *= 0.5
        else:
            break
    return ModelParams(weights=weights, config=config, loss_trace=tuple(trace))


def predict(params: ModelParams, img: ImageRGB) -> Mask:
    """Argmax class per pixel; ties resolve to the lower class index."""
    scores = featurize(img) @ params.weights.T
    classes = np.argmax(scores, axis=1).astype(np.uint8)
    return Mask(classes.reshape(img.height, img.width))


def save_model(params: ModelParams, path) -> None:
    header = json.dumps(
        {
            "format": 1,
            "n_classes": params.n_classes,
            "n_features": N_FEATURES,
            "config": params.config.to_dict(),
        },
        sort_keys=True,
    ).encode("utf-8")
    payload = params.weights.astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)


def load_model(path) -> ModelParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MODEL_MAGIC) + 4 or not blob.startswith(MODEL_MAGIC):
        raise ModelError(f"{path}: not a segmenter model file")
    offset = len(MODEL_MAGIC)
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) < offset + header_len:
        raise ModelError(f"{path}: truncated header")
    try:
        header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"{path}: bad header: {exc}") from exc
    offset += header_len
    n_classes = int(header["n_classes"])
    if int(header.get("n_features", -1)) != N_FEATURES:
        raise ModelError(f"{path}: unsupported feature layout")
    expected = n_classes * N_FEATURES * 8
    if len(blob) - offset != expected:
        raise ModelError(
            f"{path}: weight payload is {len(blob) - offset} bytes, expected {expected}"
        )
    weights = np.frombuffer(blob, dtype="<f8", offset=offset).reshape(
        n_classes, N_FEATURES
    )
    if not np.all(np.isfinite(weights)):
        raise ModelError(f"{path}: non-finite weights")
    return ModelParams(
        weights=weights.astype(np.float64),
        config=TrainConfig.from_dict(header["config"]),
    )
