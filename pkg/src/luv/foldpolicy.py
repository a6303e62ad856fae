"""Corner-driven towel smoothing and folding.

Actions are chosen from detected corner count alone: none visible means the
cloth is balled up (random reset), one visible means drag it open, two or
more mean fling the closest pair apart. The terminal test accepts a corner
set whose pairwise distances match the towel's rectangle template, and the
fold plan is two half-folds that bring all four corners together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

Point = Tuple[float, float]

DEFAULT_REGION = (0.0, 0.0, 1.0, 1.0)
MAX_SMOOTH_ACTIONS = 10


@dataclass(frozen=True)
class TowelSpec:
    """Physical towel dimensions in meters, width never exceeding height."""

    width: float
    height: float

    def __post_init__(self) -> None:
        if not (0 < self.width <= self.height):
            raise ValueError(
                f"need 0 < width <= height, got {self.width} x {self.height}"
            )

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


@dataclass(frozen=True)
class PinholeIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class RandomReset:
    grasp: Point


@dataclass(frozen=True)
class DragCorner:
    grasp: Point
    place: Point


@dataclass(frozen=True)
class FlingPair:
    grasp_a: Point
    grasp_b: Point


@dataclass(frozen=True)
class Terminate:
    pass


SmoothAction = Union[RandomReset, DragCorner, FlingPair, Terminate]


def _xy(p) -> Point:
    if hasattr(p, "u"):
        return (float(p.u), float(p.v))
    x, y = p
    return (float(x), float(y))


def pairwise_distances(points: Sequence[Point]) -> List[float]:
    pts = [_xy(p) for p in points]
    out = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            out.append(math.dist(pts[i], pts[j]))
    return out


def is_smoothed(corners: Sequence[Point], towel: TowelSpec) -> bool:
    """Accept four corners whose sorted pairwise distances match the towel's
    {W, W, H, H, D, D} template to within one standard deviation of the six
    measured distances."""
    if len(corners) != 4:
        raise ValueError(f"terminal test needs exactly 4 corners, got {len(corners)}")
    measured = sorted(pairwise_distances(corners))
    template = sorted(
        [towel.width, towel.width, towel.height, towel.height,
         towel.diagonal, towel.diagonal]
    )
    sigma = float(np.std(measured, ddof=1))
    return all(abs(m - e) <= sigma for m, e in zip(measured, template))


def _nearest_pair(points: List[Point]) -> Tuple[Point, Point]:
    best = None
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = math.dist(points[i], points[j])
            if best is None or d < best[0]:
                best = (d, i, j)
    assert best is not None
    return points[best[1]], points[best[2]]


def _unit(vx: float, vy: float) -> Point:
    norm = math.hypot(vx, vy)
    if norm == 0.0:
        return (1.0, 0.0)
    return (vx / norm, vy / norm)


def select_action(
    corners: Sequence[Point],
    towel: TowelSpec,
    rng_seed: int = 0,
    region: Tuple[float, float, float, float] = DEFAULT_REGION,
) -> SmoothAction:
    """Decision table over the number of detected corners.

    `region` bounds the cloth area: random resets grasp uniformly inside it
    and drags pull toward its center by one towel width.
    """
    pts = [_xy(p) for p in corners]
    if not pts:
        rng = np.random.default_rng(rng_seed)
        x0, y0, x1, y1 = region
        return RandomReset(grasp=(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1))))
    if len(pts) == 1:
        cx = (region[0] + region[2]) / 2.0
        cy = (region[1] + region[3]) / 2.0
        ux, uy = _unit(cx - pts[0][0], cy - pts[0][1])
        place = (pts[0][0] + towel.width * ux, pts[0][1] + towel.width * uy)
        return DragCorner(grasp=pts[0], place=place)
    if len(pts) == 4 and is_smoothed(pts, towel):
        return Terminate()
    a, b = _nearest_pair(pts)
    return FlingPair(grasp_a=a, grasp_b=b)


def _split_near_far(pts: List[Point], robot_side: Point):
    ranked = sorted(range(4), key=lambda i: (np.dot(pts[i], robot_side), pts[i]))
    far = [pts[i] for i in ranked[:2]]
    near = [pts[i] for i in ranked[2:]]
    return near, far


def plan_fold(corners: Sequence[Point], robot_side: Point) -> List[Tuple[Point, Point]]:
    """Two half-folds as pick-place pairs.

    The first two pairs are one bimanual motion: each robot-near corner goes
    onto a far corner, matched so the arms do not cross. The third pair folds
    the halved towel across its perpendicular midline, which stacks all four
    corners at one spot.
    """
    pts = [_xy(p) for p in corners]
    if len(pts) != 4:
        raise ValueError(f"fold plan needs exactly 4 corners, got {len(pts)}")
    arr = np.array(pts)
    spread = np.linalg.norm(arr - arr.mean(axis=0), axis=1)
    centered = arr - arr.mean(axis=0)
    if np.max(spread) < 1e-12 or np.linalg.matrix_rank(centered, tol=1e-9) < 2:
        raise ValueError("degenerate corner set, no fold plan")

    near, far = _split_near_far(pts, _xy(robot_side))
    straight = math.dist(near[0], far[0]) + math.dist(near[1], far[1])
    crossed = math.dist(near[0], far[1]) + math.dist(near[1], far[0])
    if crossed < straight:
        far = [far[1], far[0]]

    # after the first fold the towel's corners are far[i] and the crease
    # points midway between each near/far pair
    crease = [((n[0] + f[0]) / 2.0, (n[1] + f[1]) / 2.0) for n, f in zip(near, far)]
    side_mid = [
        ((far[i][0] + crease[i][0]) / 2.0, (far[i][1] + crease[i][1]) / 2.0)
        for i in range(2)
    ]
    rx, ry = _xy(robot_side)
    dx = side_mid[0][0] - side_mid[1][0]
    dy = side_mid[0][1] - side_mid[1][1]
    cross = rx * dy - ry * dx
    if abs(cross) < 1e-12:
        pick, place = sorted(side_mid)
    elif cross > 0:
        pick, place = side_mid[0], side_mid[1]
    else:
        pick, place = side_mid[1], side_mid[0]
    return [(near[0], far[0]), (near[1], far[1]), (pick, place)]


def median_deproject(depth: np.ndarray, mask: np.ndarray, k: PinholeIntrinsics) -> Tuple[float, float, float]:
    """Per-axis median of the masked pixels deprojected through `k`."""
    depth = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask).astype(bool)
    if depth.ndim != 2 or mask.shape != depth.shape:
        raise ValueError("depth and mask must be matching 2-d arrays")
    vs, us = np.nonzero(mask)
    z = depth[vs, us]
    keep = np.isfinite(z)
    if not np.any(keep):
        raise ValueError("no masked pixel has finite depth")
    z = z[keep]
    us = us[keep]
    vs = vs[keep]
    x = (us - k.cx) * z / k.fx
    y = (vs - k.cy) * z / k.fy
    return (float(np.median(x)), float(np.median(y)), float(np.median(z)))


@dataclass
class RolloutRecord:
    """One smoothing episode: the applied actions, how it ended, and the
    fold plan when the terminal test fired."""

    actions: List[SmoothAction]
    outcome: str
    fold_plan: Optional[List[Tuple[Point, Point]]]

    @property
    def smooth_action_count(self) -> int:
        return len(self.actions)

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "smooth_actions": self.smooth_action_count,
            "actions": [_action_to_dict(a) for a in self.actions],
            "fold_plan": None
            if self.fold_plan is None
            else [[list(pick), list(place)] for pick, place in self.fold_plan],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _action_to_dict(action: SmoothAction) -> dict:
    if isinstance(action, RandomReset):
        return {"kind": "random_reset", "grasp": list(action.grasp)}
    if isinstance(action, DragCorner):
        return {"kind": "drag_corner", "grasp": list(action.grasp), "place": list(action.place)}
    if isinstance(action, FlingPair):
        return {"kind": "fling_pair", "grasp_a": list(action.grasp_a), "grasp_b": list(action.grasp_b)}
    return {"kind": "terminate"}


def run_policy(
    detector: Callable[[object], Sequence[Point]],
    scene,
    towel: TowelSpec,
    max_actions: int = MAX_SMOOTH_ACTIONS,
    robot_side: Point = (0.0, -1.0),
    rng_seed: int = 0,
    region: Tuple[float, float, float, float] = DEFAULT_REGION,
) -> RolloutRecord:
    """Detect, act, repeat until the terminal test fires or the smoothing
    budget runs out. `scene` must expose state() and apply(action)."""
    applied: List[SmoothAction] = []
    while True:
        corners = detector(scene.state())
        action = select_action(
            corners, towel, rng_seed=rng_seed + len(applied), region=region
        )
        if isinstance(action, Terminate):
            plan = plan_fold(corners, robot_side)
            return RolloutRecord(actions=applied, outcome="folded", fold_plan=plan)
        if len(applied) >= max_actions:
            return RolloutRecord(actions=applied, outcome="failed", fold_plan=None)
        scene.apply(action)
        applied.append(action)


class JitterCloth:
    """Toy cloth state for rollouts: a posed rectangle plus per-corner
    crumple offsets. Flings and drags shrink the crumple, resets reroll it.
    A corner is detectable once its offset is small."""

    def __init__(self, towel: TowelSpec, seed: int, crumple: float = 0.6):
        self.towel = towel
        self._rng = np.random.default_rng(seed)
        self.crumple = float(crumple)
        self._scale = min(towel.width, towel.height)
        self._new_pose()

    def _new_pose(self) -> None:
        self._center = self._rng.uniform(0.3, 0.7, size=2)
        self._angle = float(self._rng.uniform(0.0, 2 * math.pi))
        self._offsets = self._rng.normal(0.0, 0.25 * self._scale, size=(4, 2))

    def true_corners(self) -> List[Point]:
        w2 = self.towel.width / 2.0
        h2 = self.towel.height / 2.0
        ca, sa = math.cos(self._angle), math.sin(self._angle)
        out = []
        for dx, dy in ((-w2, -h2), (w2, -h2), (w2, h2), (-w2, h2)):
            out.append(
                (
                    float(self._center[0] + ca * dx - sa * dy),
                    float(self._center[1] + sa * dx + ca * dy),
                )
            )
        return out

    def state(self) -> List[Point]:
        visible = []
        for corner, offset in zip(self.true_corners(), self._offsets):
            shift = self.crumple * offset
            if float(np.hypot(*shift)) < 0.18 * self._scale or self.crumple < 0.15:
                visible.append((corner[0] + float(shift[0]), corner[1] + float(shift[1])))
        return visible

    def apply(self, action: SmoothAction) -> None:
        if isinstance(action, RandomReset):
            self.crumple = float(self._rng.uniform(0.4, 0.9))
            self._new_pose()
        elif isinstance(action, DragCorner):
            self.crumple *= 0.65
        elif isinstance(action, FlingPair):
            self.crumple *= 0.35
