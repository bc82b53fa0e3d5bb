"""Birds-eye-view evaluation: confusion counts, PR curve, F-max, AP.

Confidence maps are thresholded in image space, then prediction and
ground truth are rasterized onto the metric BEV grid; counts run over
cells where both grids carry data and the ground truth is not IGNORE.
AP uses PASCAL-style 11-point interpolation.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from freespace.geometry import BevGridSpec, CameraRig, GroundPlane, bev_cell_winners, bev_rasterize
from freespace.imgio import FREE, IGNORE, OBSTACLE, ColorImage, LabelMask


@dataclass
class PRCurve:
    points: List[Tuple[float, float, float, float]]  # (threshold, precision, recall, f)
    f_max: float
    ap: float

    @classmethod
    def from_points(cls, raw: Sequence[Tuple[float, float, float]]) -> "PRCurve":
        """Build from (threshold, precision, recall) triples."""
        pts = []
        for tau, p, r in raw:
            f = 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0
            pts.append((float(tau), float(p), float(r), float(f)))
        f_max = max(f for _, _, _, f in pts)
        return cls(pts, float(f_max), average_precision_points([(p, r) for _, p, r, _ in pts]))


def f_measure(precision: float, recall: float) -> float:
    """Harmonic mean; 0 when precision + recall is 0."""
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def average_precision_points(points: Sequence[Tuple[float, float]]) -> float:
    """11-point interpolated AP over measured (precision, recall) points."""
    total = 0.0
    for r in np.linspace(0.0, 1.0, 11):
        candidates = [p for p, rec in points if rec >= r - 1e-12]
        total += max(candidates) if candidates else 0.0
    return total / 11.0


def average_precision(curve: PRCurve) -> float:
    """11-point interpolated AP of a PR curve."""
    return average_precision_points([(p, r) for _, p, r, _ in curve.points])


def confusion_at_threshold(
    conf,
    gt: LabelMask,
    rig: CameraRig,
    plane: GroundPlane,
    spec: BevGridSpec,
    tau: float,
) -> Tuple[int, int, int, int]:
    """(TP, FP, FN, TN) over BEV cells at confidence threshold tau.

    Prediction: conf >= tau is FREE. Cells where either raster is IGNORE
    are excluded; TP counts cells FREE in both.
    """
    values = np.asarray(conf.values if hasattr(conf, "values") else conf)
    if values.shape != gt.label.shape:
        raise ValueError(f"dimension mismatch: conf {values.shape} vs gt {gt.label.shape}")
    pred = np.where(values >= tau, FREE, OBSTACLE).astype(np.uint8)
    pred_grid = bev_rasterize(pred, rig, plane, spec).labels
    gt_grid = bev_rasterize(gt.label, rig, plane, spec).labels
    care = (gt_grid != IGNORE) & (pred_grid != IGNORE)
    p_free = pred_grid == FREE
    g_free = gt_grid == FREE
    tp = int(np.count_nonzero(care & p_free & g_free))
    fp = int(np.count_nonzero(care & p_free & ~g_free))
    fn = int(np.count_nonzero(care & ~p_free & g_free))
    tn = int(np.count_nonzero(care & ~p_free & ~g_free))
    return tp, fp, fn, tn


def pr_curve(
    frames: Sequence[Tuple[object, LabelMask, GroundPlane]],
    rig: CameraRig,
    spec: BevGridSpec,
    steps: int = 256,
) -> PRCurve:
    """PR curve over uniformly spaced thresholds in [-1, 1].

    Counts are summed over all frames before computing ratios. Which
    pixel wins a BEV cell depends on geometry only, so each frame is
    projected once and thresholds sweep the per-cell confidences, which
    is exactly equivalent to rasterizing the thresholded mask per tau.
    """
    thresholds = np.linspace(-1.0, 1.0, steps)
    n_free_total = 0
    n_obs_total = 0
    tp = np.zeros(steps, np.int64)
    fp = np.zeros(steps, np.int64)
    for conf, gt, plane in frames:
        values = np.asarray(conf.values if hasattr(conf, "values") else conf)
        if values.shape != gt.label.shape:
            raise ValueError("confidence/ground-truth dimension mismatch")
        cell, pv, pu = bev_cell_winners(rig, plane, values.shape, spec)
        gl = gt.label[pv, pu]
        care = gl != IGNORE
        cv = values[pv, pu][care]
        g_free = gl[care] == FREE
        free_sorted = np.sort(cv[g_free])
        obs_sorted = np.sort(cv[~g_free])
        n_free_total += free_sorted.size
        n_obs_total += obs_sorted.size
        tp += free_sorted.size - np.searchsorted(free_sorted, thresholds, side="left")
        fp += obs_sorted.size - np.searchsorted(obs_sorted, thresholds, side="left")
    fn = n_free_total - tp
    pts = []
    for i, tau in enumerate(thresholds):
        denom_p = tp[i] + fp[i]
        p = tp[i] / denom_p if denom_p > 0 else 1.0
        denom_r = tp[i] + fn[i]
        r = tp[i] / denom_r if denom_r > 0 else 0.0
        pts.append((float(tau), float(p), float(r)))
    return PRCurve.from_points(pts)


_GREEN = np.array([0, 255, 0], np.float64)
_BLUE = np.array([0, 0, 255], np.float64)
_RED = np.array([255, 0, 0], np.float64)


def render_overlay(image: ColorImage, conf, gt: LabelMask, tau: float) -> ColorImage:
    """Tint the image with the confusion classes, in image space.

    True positives green, false negatives blue, false positives red (50%
    alpha); true negatives and IGNORE pixels stay untouched.
    """
    values = np.asarray(conf.values if hasattr(conf, "values") else conf)
    if values.shape != gt.label.shape or gt.label.shape != image.data.shape[:2]:
        raise ValueError("overlay inputs must share dimensions")
    out = image.data.astype(np.float64).copy()
    pred_free = values >= tau
    g_free = gt.label == FREE
    g_obs = gt.label == OBSTACLE
    for mask, color in (
        (pred_free & g_free, _GREEN),
        (~pred_free & g_free, _BLUE),
        (pred_free & g_obs, _RED),
    ):
        out[mask] = 0.5 * out[mask] + 0.5 * color
    data = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return ColorImage(image.width, image.height, data)
