"""Camera model, v-disparity ground-plane estimation, birds-eye-view mapping.

The ground model is a single line in v-disparity space (planar road, zero
roll): expected disparity dhat(v) = alpha * (v - v_horizon), clamped at 0
above the horizon. Both the stixel segmenter and the BEV evaluator consume
it.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from freespace.errors import FitFailed, ProjectionUndefined
from freespace.imgio import IGNORE, DisparityImage


@dataclass(frozen=True)
class CameraRig:
    focal: float  # pixels
    baseline: float  # meters
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.focal <= 0 or self.baseline <= 0:
            raise ValueError("focal and baseline must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside the image")


@dataclass(frozen=True)
class GroundPlane:
    alpha: float  # disparity per pixel row
    v_horizon: float  # real-valued pixel row

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("ground-plane slope must be positive")


@dataclass
class PlaneFitParams:
    iterations: int = 200
    inlier_thresh: float = 1.0  # disparity units
    min_inliers: int = 50
    blend: float = 0.7  # temporal weight on the previous plane
    seed: int = 0
    rng: Optional[np.random.Generator] = None
    default_plane: Optional[GroundPlane] = None


@dataclass(frozen=True)
class BevGridSpec:
    x_min: float = -10.0
    x_max: float = 10.0
    z_min: float = 5.0
    z_max: float = 45.0
    cell: float = 0.1

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.z_min < self.z_max and self.cell > 0):
            raise ValueError("degenerate BEV grid")

    @property
    def nx(self) -> int:
        return int(np.ceil((self.x_max - self.x_min) / self.cell - 1e-9))

    @property
    def nz(self) -> int:
        return int(np.ceil((self.z_max - self.z_min) / self.cell - 1e-9))


@dataclass
class BevGrid:
    """Rasterized metric grid; labels is (nz, nx) uint8, IGNORE = no data."""

    spec: BevGridSpec
    labels: np.ndarray


def ground_expect(plane: GroundPlane, v):
    """Expected ground disparity at row(s) v; 0 at or above the horizon."""
    return np.maximum(0.0, plane.alpha * (np.asarray(v, np.float64) - plane.v_horizon))


def fit_ground_plane(
    disp: DisparityImage, params: PlaneFitParams, prev: Optional[GroundPlane] = None
) -> GroundPlane:
    """Robust line fit in v-disparity from the lower half of the image.

    Sample-2 RANSAC with a least-squares refit over the best consensus
    set; if `prev` is given the result is blended as
    blend * prev + (1 - blend) * fit, componentwise. Deterministic for a
    given seed. Raises FitFailed below the inlier quorum.
    """
    H = disp.height
    half = H // 2
    sel = disp.valid[half:, :]
    vs, us = np.nonzero(sel)
    v = (vs + half).astype(np.float64)
    dval = disp.disparity[half:, :][sel].astype(np.float64)
    if v.size < max(2, params.min_inliers):
        raise FitFailed(f"only {v.size} valid lower-half pixels")
    rng = params.rng if params.rng is not None else np.random.default_rng(params.seed)
    pairs = rng.integers(0, v.size, size=(params.iterations, 2))
    best_count = 0
    best_inliers = None
    for i, j in pairs:
        if v[i] == v[j]:
            continue
        a = (dval[j] - dval[i]) / (v[j] - v[i])
        if a <= 0:
            continue
        b = dval[i] - a * v[i]
        inl = np.abs(dval - (a * v + b)) <= params.inlier_thresh
        c = int(np.count_nonzero(inl))
        if c > best_count:
            best_count, best_inliers = c, inl
    if best_count < params.min_inliers:
        raise FitFailed(f"consensus {best_count} below quorum {params.min_inliers}")
    A = np.stack([v[best_inliers], np.ones(best_count)], axis=1)
    coef, *_ = np.linalg.lstsq(A, dval[best_inliers], rcond=None)
    a, b = float(coef[0]), float(coef[1])
    if a <= 0:
        raise FitFailed("refit slope not positive")
    v_h = min(max(-b / a, 0.0), np.nextafter(float(H), 0.0))
    fit = GroundPlane(a, v_h)
    if prev is not None:
        lam = params.blend
        fit = GroundPlane(
            lam * prev.alpha + (1.0 - lam) * fit.alpha,
            lam * prev.v_horizon + (1.0 - lam) * fit.v_horizon,
        )
    return fit


def bev_project(rig: CameraRig, plane: GroundPlane, u, v):
    """Flat-ground projection of pixel (u, v) to metric (x, z).

    z = focal * baseline / dhat(v); x = (u - cx) * z / focal. Only defined
    strictly below the horizon.
    """
    dhat = float(ground_expect(plane, v))
    if dhat <= 0.0:
        raise ProjectionUndefined(f"row {v} is at or above the horizon")
    z = rig.focal * rig.baseline / dhat
    x = (u - rig.cx) * z / rig.focal
    return x, z


def bev_cell_winners(rig: CameraRig, plane: GroundPlane, shape, spec: BevGridSpec):
    """Winning image pixel per covered BEV cell.

    Every pixel strictly below the horizon projects through the ground
    plane; a cell takes the pixel landing in it that is lowest in the
    image (the closest observation), ties broken toward the smallest
    column. Returns (cell_flat_index, pix_v, pix_u) arrays; cells not
    listed received no projection.
    """
    H, W = shape
    v = np.arange(H)
    dhat = ground_expect(plane, v)
    z = np.zeros(H)
    below = dhat > 0
    z[below] = rig.focal * rig.baseline / dhat[below]
    rows = np.nonzero(below & (z >= spec.z_min) & (z < spec.z_max))[0]
    empty = (np.empty(0, np.int64),) * 3
    if rows.size == 0:
        return empty
    iz = np.minimum(((z[rows] - spec.z_min) / spec.cell).astype(np.int64), spec.nz - 1)
    u = np.arange(W)
    x = (u[None, :] - rig.cx) * z[rows, None] / rig.focal
    inx = (x >= spec.x_min) & (x < spec.x_max)
    if not inx.any():
        return empty
    ix = np.minimum(np.floor((x - spec.x_min) / spec.cell).astype(np.int64), spec.nx - 1)
    rr, uu = np.nonzero(inx)
    cell = iz[rr] * spec.nx + ix[rr, uu]
    pv = rows[rr]
    pu = uu
    order = np.lexsort((pu, -pv, cell))
    cell, pv, pu = cell[order], pv[order], pu[order]
    first = np.ones(cell.size, bool)
    first[1:] = cell[1:] != cell[:-1]
    return cell[first], pv[first], pu[first]


def bev_rasterize(labels, rig: CameraRig, plane: GroundPlane, spec: BevGridSpec) -> BevGrid:
    """Rasterize an image-space label array onto the BEV grid.

    Cells without any projected pixel stay IGNORE and are excluded from
    all downstream counts.
    """
    labels = np.asarray(labels)
    grid = np.full(spec.nz * spec.nx, IGNORE, np.uint8)
    cell, pv, pu = bev_cell_winners(rig, plane, labels.shape, spec)
    grid[cell] = labels[pv, pu]
    return BevGrid(spec, grid.reshape(spec.nz, spec.nx))
