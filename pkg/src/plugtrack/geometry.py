"""Bounding-box geometry, tracklets, overlap measures and box regression losses.

Boxes are center-parameterized (cx, cy, w, h) everywhere inside the package;
top-left (MOT file) form is converted at the I/O boundary only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WINDOW_LEN = 5


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: center (cx, cy), width w, height h, in pixels."""

    cx: float
    cy: float
    w: float
    h: float

    def to_xyxy(self):
        return (self.cx - 0.5 * self.w, self.cy - 0.5 * self.h,
                self.cx + 0.5 * self.w, self.cy + 0.5 * self.h)

    def to_tlwh(self):
        return (self.cx - 0.5 * self.w, self.cy - 0.5 * self.h, self.w, self.h)

    @staticmethod
    def from_tlwh(left, top, w, h) -> "BBox":
        return BBox(left + 0.5 * w, top + 0.5 * h, w, h)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "BBox":
        a = np.asarray(a, dtype=np.float64)
        return BBox(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class BoxObservation:
    """A box plus its frame-to-frame first differences (zero on the first frame)."""

    box: BBox
    dx: float = 0.0
    dy: float = 0.0
    dw: float = 0.0
    dh: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.box.cx, self.box.cy, self.box.w, self.box.h,
                         self.dx, self.dy, self.dw, self.dh], dtype=np.float64)


@dataclass
class Tracklet:
    """Ordered fragment of one object's trajectory.

    frame_ids are strictly increasing; after `to_window` the tracklet has
    exactly WINDOW_LEN observations.
    """

    observations: list = field(default_factory=list)
    frame_ids: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.observations) != len(self.frame_ids):
            raise ValueError("observations and frame_ids length mismatch")
        for a, b in zip(self.frame_ids, self.frame_ids[1:]):
            if b <= a:
                raise ValueError("frame_ids must be strictly increasing")

    def __len__(self):
        return len(self.observations)

    @staticmethod
    def from_boxes(boxes, frame_ids) -> "Tracklet":
        """Build a tracklet from contiguous boxes, computing the deltas."""
        obs = []
        for k, b in enumerate(boxes):
            if k == 0:
                obs.append(BoxObservation(b))
            else:
                p = boxes[k - 1]
                obs.append(BoxObservation(b, b.cx - p.cx, b.cy - p.cy,
                                          b.w - p.w, b.h - p.h))
        return Tracklet(obs, list(frame_ids))

    def as_array(self) -> np.ndarray:
        """(T, 8) array of [cx, cy, w, h, dx, dy, dw, dh] rows."""
        return np.stack([o.as_array() for o in self.observations], axis=0)

    def boxes(self):
        return [o.box for o in self.observations]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes. Symmetric, in [0, 1]."""
    _check_dims(a)
    _check_dims(b)
    return float(iou_arrays(a.as_array(), b.as_array()))


def iou_arrays(a, b) -> np.ndarray:
    """IoU for (..., 4) cxcywh arrays, broadcasting over leading dims."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax1, ay1 = a[..., 0] - 0.5 * a[..., 2], a[..., 1] - 0.5 * a[..., 3]
    ax2, ay2 = a[..., 0] + 0.5 * a[..., 2], a[..., 1] + 0.5 * a[..., 3]
    bx1, by1 = b[..., 0] - 0.5 * b[..., 2], b[..., 1] - 0.5 * b[..., 3]
    bx2, by2 = b[..., 0] + 0.5 * b[..., 2], b[..., 1] + 0.5 * b[..., 3]
    iw = np.maximum(0.0, np.minimum(ax2, bx2) - np.maximum(ax1, bx1))
    ih = np.maximum(0.0, np.minimum(ay2, by2) - np.maximum(ay1, by1))
    inter = iw * ih
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    return inter / union


def giou_loss(a: BBox, b: BBox) -> float:
    """GIoU loss 1 - GIoU(a, b); 0 iff identical, approaches 2 for far boxes."""
    _check_dims(a)
    _check_dims(b)
    return float(giou_loss_arrays(a.as_array(), b.as_array()))


def giou_loss_arrays(a, b) -> np.ndarray:
    """1 - GIoU for (..., 4) cxcywh arrays."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax1, ay1 = a[..., 0] - 0.5 * a[..., 2], a[..., 1] - 0.5 * a[..., 3]
    ax2, ay2 = a[..., 0] + 0.5 * a[..., 2], a[..., 1] + 0.5 * a[..., 3]
    bx1, by1 = b[..., 0] - 0.5 * b[..., 2], b[..., 1] - 0.5 * b[..., 3]
    bx2, by2 = b[..., 0] + 0.5 * b[..., 2], b[..., 1] + 0.5 * b[..., 3]
    iw = np.maximum(0.0, np.minimum(ax2, bx2) - np.maximum(ax1, bx1))
    ih = np.maximum(0.0, np.minimum(ay2, by2) - np.maximum(ay1, by1))
    inter = iw * ih
    union = a[..., 2] * a[..., 3] + b[..., 2] * b[..., 3] - inter
    # smallest enclosing box
    ew = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    eh = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    enclose = ew * eh
    giou = inter / union - (enclose - union) / enclose
    return 1.0 - giou


def smooth_l1(pred, target, beta: float = 1.0) -> float:
    """Smooth-L1 (Huber) distance summed over the 4 box coordinates.

    Per coordinate: 0.5*x^2/beta for |x| < beta, |x| - 0.5*beta otherwise.
    Intended for image-normalized coordinates with beta = 1.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    x = np.abs(pred - target)
    per = np.where(x < beta, 0.5 * x * x / beta, x - 0.5 * beta)
    return float(np.sum(per)) if per.ndim == 1 else per.sum(axis=-1)


def to_window(tracklet: Tracklet, length: int = WINDOW_LEN) -> Tracklet:
    """Fix a tracklet to exactly `length` observations.

    Longer tracklets keep the most recent `length` frames. Shorter ones are
    left-padded by repeating the earliest box with zero deltas (padded frame
    ids count down from the earliest so they stay strictly increasing).
    """
    n = len(tracklet)
    if n == 0:
        raise ValueError("cannot window an empty tracklet")
    if n == length:
        return tracklet
    if n > length:
        obs = list(tracklet.observations[-length:])
        frames = list(tracklet.frame_ids[-length:])
        # the window's first entry loses its predecessor, so its deltas reset
        obs[0] = BoxObservation(obs[0].box)
        return Tracklet(obs, frames)
    pad = length - n
    first = tracklet.observations[0]
    obs = [BoxObservation(first.box) for _ in range(pad)] + list(tracklet.observations)
    frames = [tracklet.frame_ids[0] - k for k in range(pad, 0, -1)] + list(tracklet.frame_ids)
    return Tracklet(obs, frames)


def normalize_box(b: BBox, img_w: float, img_h: float) -> np.ndarray:
    """Scale a pixel box into the unit square: (cx/W, cy/H, w/W, h/H)."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    return np.array([b.cx / img_w, b.cy / img_h, b.w / img_w, b.h / img_h],
                    dtype=np.float64)


def denormalize_box(v, img_w: float, img_h: float) -> BBox:
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    v = np.asarray(v, dtype=np.float64)
    return BBox(float(v[0] * img_w), float(v[1] * img_h),
                float(v[2] * img_w), float(v[3] * img_h))


def normalize_window(window: Tracklet, img_w: float, img_h: float) -> np.ndarray:
    """(T, 8) window array with positions/sizes and deltas image-normalized."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError("image dimensions must be positive")
    arr = window.as_array()
    scale = np.array([img_w, img_h, img_w, img_h] * 2, dtype=np.float64)
    return arr / scale


def _check_dims(b: BBox):
    if b.w <= 0 or b.h <= 0:
        raise ValueError(f"box has non-positive dimensions: w={b.w}, h={b.h}")
