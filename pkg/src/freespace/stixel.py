"""Disparity stixel world: per-column MAP ground/obstacle segmentation.

Each image column is split into vertically stacked segments that are
either ground (disparity follows the ground-plane line) or obstacle
(fronto-parallel, constant disparity mu). The per-pixel likelihood is a
truncated quadratic; transitions carry additive log-domain penalties. The
optimum is found by dynamic programming over segment boundaries, O(H^2)
per column, and verified against an exhaustive oracle.
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from freespace._kernels import impl as _impl
from freespace._kernels import _pykernels as _pk
from freespace.geometry import GroundPlane, ground_expect
from freespace.imgio import FREE, IGNORE, OBSTACLE, DisparityImage, LabelMask

GROUND = 0
OBST = 1


@dataclass
class StixelParams:
    sigma: float = 1.0  # disparity noise std
    kappa: float = 4.0  # truncated-cost ceiling
    c_invalid: float = 1.0  # per-invalid-pixel cost, class-independent
    beta_seg: float = 8.0  # new-segment penalty
    beta_base: float = 4.0  # penalty for starting the bottom segment as obstacle
    delta_grav: float = 2.0  # gravity tolerance in disparity units
    stixel_width: int = 1

    def __post_init__(self):
        if min(self.sigma, self.kappa, self.c_invalid, self.beta_seg, self.beta_base, self.delta_grav) <= 0:
            raise ValueError("stixel parameters must be positive")
        if self.kappa <= 1:
            raise ValueError("kappa must exceed 1")
        if self.stixel_width < 1:
            raise ValueError("stixel_width must be >= 1")


@dataclass
class StixelSegment:
    v_bottom: int
    v_top: int
    cls: int  # GROUND or OBST
    mu: float  # model disparity for obstacles, 0 for ground


@dataclass
class StixelColumnLabeling:
    column: int  # first image column covered
    segments: List[StixelSegment]  # ordered bottom-to-top
    total_cost: float
    width: int = 1  # image columns covered
    invalid_column: bool = False  # no valid disparity anywhere; mask emits IGNORE


class ColumnCostTable:
    """O(1) segment costs for one column via prefix sums.

    ground(a, e): sum over rows a..e of min(((d - dhat)/sigma)^2, kappa)
    for valid rows, c_invalid otherwise. obstacle(a, e): same residual
    against the segment mean mu of valid disparities (0 if none).
    """

    def __init__(self, d, valid, dhat, params: StixelParams):
        self.d = np.asarray(d, np.float64)
        self.valid = np.asarray(valid, bool)
        self.dhat = np.asarray(dhat, np.float64)
        self.params = params
        self.gpre, self.cnt, self.sd, self.sd2 = _pk.column_prefixes(
            self.d, self.valid, self.dhat, params.sigma, params.kappa, params.c_invalid
        )

    def ground(self, a: int, e: int) -> float:
        return float(self.gpre[e + 1] - self.gpre[a])

    def obstacle(self, a: int, e: int):
        p = self.params
        return _pk.obstacle_segment(
            self.d, self.valid, self.cnt, self.sd, self.sd2, a, e, p.sigma, p.kappa, p.c_invalid
        )


def column_costs(d, valid, plane: GroundPlane, params: StixelParams) -> ColumnCostTable:
    """Build the cost tables for one column under the given ground plane."""
    d = np.asarray(d, np.float64)
    if d.shape[0] < 2:
        raise ValueError("column height must be at least 2")
    dhat = ground_expect(plane, np.arange(d.shape[0]))
    return ColumnCostTable(d, valid, dhat, params)


def _degenerate_labeling(H: int, params: StixelParams, column: int, width: int) -> StixelColumnLabeling:
    # All-invalid column: defined as a single obstacle with mu = 0,
    # flagged so the mask layer emits IGNORE. Shared by DP and oracle.
    seg = StixelSegment(H - 1, 0, OBST, 0.0)
    total = H * params.c_invalid + params.beta_base
    return StixelColumnLabeling(column, [seg], total, width, invalid_column=True)


def stixel_dp(d, valid, plane: GroundPlane, params: StixelParams, column: int = 0, width: int = 1, dhat=None) -> StixelColumnLabeling:
    """Optimal labeling of one column by dynamic programming."""
    d = np.ascontiguousarray(d, np.float64)
    valid = np.asarray(valid, bool)
    H = d.shape[0]
    if not valid.any():
        return _degenerate_labeling(H, params, column, width)
    if dhat is None:
        dhat = ground_expect(plane, np.arange(H))
    dhat = np.ascontiguousarray(dhat, np.float64)
    total, v_top, v_bottom, cls, mu = _impl.stixel_dp_column(
        d,
        np.ascontiguousarray(valid.astype(np.uint8)),
        dhat,
        params.sigma,
        params.kappa,
        params.c_invalid,
        params.beta_seg,
        params.beta_base,
        params.delta_grav,
    )
    segments = [
        StixelSegment(int(v_bottom[i]), int(v_top[i]), int(cls[i]), float(mu[i]))
        for i in range(len(cls))
    ]
    return StixelColumnLabeling(column, segments, float(total), width)


def stixel_image(disp: DisparityImage, plane: GroundPlane, params: StixelParams) -> List[StixelColumnLabeling]:
    """Segment every stixel of the image, left to right.

    With stixel_width w > 1 each stixel uses the per-row mean of the valid
    disparities across its w image columns (the last stixel may be
    narrower).
    """
    H, W = disp.disparity.shape
    dhat = ground_expect(plane, np.arange(H))
    w = params.stixel_width
    out = []
    d64 = disp.disparity.astype(np.float64)
    for s in range(0, W, w):
        stop = min(s + w, W)
        if stop - s == 1:
            d = d64[:, s]
            v = disp.valid[:, s]
        else:
            block_v = disp.valid[:, s:stop]
            cnt = block_v.sum(axis=1)
            ssum = (d64[:, s:stop] * block_v).sum(axis=1)
            v = cnt > 0
            d = np.where(v, ssum / np.maximum(cnt, 1), 0.0)
        out.append(stixel_dp(d, v, plane, params, column=s, width=stop - s, dhat=dhat))
    return out


def labeling_to_mask(labelings: List[StixelColumnLabeling], dims) -> LabelMask:
    """Paint labelings into a ternary mask: ground->FREE, obstacle->OBSTACLE.

    Columns flagged all-invalid become IGNORE.
    """
    H, W = dims
    label = np.full((H, W), IGNORE, np.uint8)
    for lab in labelings:
        cols = slice(lab.column, lab.column + lab.width)
        if lab.invalid_column:
            label[:, cols] = IGNORE
            continue
        for seg in lab.segments:
            value = FREE if seg.cls == GROUND else OBSTACLE
            label[seg.v_top : seg.v_bottom + 1, cols] = value
    return LabelMask(W, H, label)


def brute_force_segment(d, valid, plane: GroundPlane, params: StixelParams, max_segments: int = 4) -> StixelColumnLabeling:
    """Exhaustive verification oracle for `stixel_dp`.

    Enumerates every boundary placement and class assignment with at most
    `max_segments` segments, evaluates the identical cost model and
    constraints, and selects the optimum under the identical tie-break
    ordering (fewer segments; boundaries low, bottom-up, ground preferred
    above a tied boundary; ground bottom last).
    """
    from itertools import combinations, product

    d = np.asarray(d, np.float64)
    valid = np.asarray(valid, bool)
    H = d.shape[0]
    if H > 14:
        raise ValueError(f"oracle limited to H <= 14, got {H}")
    if not (1 <= max_segments <= 4):
        raise ValueError(f"oracle limited to max_segments in [1, 4], got {max_segments}")
    if not valid.any():
        return _degenerate_labeling(H, params, 0, 1)

    dhat = ground_expect(plane, np.arange(H))
    tables = ColumnCostTable(d, valid, dhat, params)
    best_key = None
    best = None
    for k in range(1, max_segments + 1):
        for cuts in combinations(range(1, H), k - 1):
            bounds = (0,) + cuts + (H,)
            spans = [(bounds[i], bounds[i + 1] - 1) for i in range(k)]  # top-to-bottom
            for classes in product((GROUND, OBST), repeat=k):
                if any(classes[i] == GROUND and classes[i + 1] == GROUND for i in range(k - 1)):
                    continue
                cost = params.beta_seg * (k - 1)
                if classes[-1] == OBST:
                    cost += params.beta_base
                mus = []
                feasible = True
                for i, (a, e) in enumerate(spans):
                    if classes[i] == GROUND:
                        cost += tables.ground(a, e)
                        mus.append(0.0)
                    else:
                        mu, c = tables.obstacle(a, e)
                        grounded = i == k - 1 or classes[i + 1] == GROUND
                        if grounded and mu < dhat[e] - params.delta_grav:
                            feasible = False
                            break
                        cost += c
                        mus.append(mu)
                if not feasible:
                    continue
                key = (cost, k)
                for j in range(k - 1, 0, -1):
                    key += (-spans[j][0], classes[j - 1])
                key += (classes[-1],)
                if best_key is None or key < best_key:
                    best_key = key
                    best = (spans, classes, mus, cost)

    spans, classes, mus, cost = best
    segments = [
        StixelSegment(e, a, classes[i], mus[i]) for i, (a, e) in reversed(list(enumerate(spans)))
    ]
    return StixelColumnLabeling(0, segments, float(cost), 1)
