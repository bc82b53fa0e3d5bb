"""Stand-in dense block matcher for raw stereo pairs.

SAD over grayscale windows with a left-right consistency check and
parabolic subpixel refinement. Deliberately plain: no semi-global
smoothness terms. Texture-free regions are rejected by construction —
ties resolve toward the smallest disparity in the left scan and the
largest in the right scan, so flat cost surfaces fail the consistency
check.
"""

from dataclasses import dataclass

import numpy as np

from freespace._kernels import impl as _impl
from freespace.imgio import ColorImage, DisparityImage


@dataclass
class BlockMatchParams:
    window: int = 9
    max_disparity: int = 64
    lr_tolerance: int = 1

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be an odd size >= 3")
        if self.max_disparity < 1:
            raise ValueError("max_disparity must be >= 1")
        if self.lr_tolerance < 0:
            raise ValueError("lr_tolerance must be >= 0")


def _gray(img: ColorImage) -> np.ndarray:
    # (r+g+b)/3 has fractional part in {0, 1/3, 2/3}: rounding is exact.
    return np.rint(img.data.astype(np.float64).sum(axis=2) / 3.0).astype(np.int64)


def block_match(left: ColorImage, right: ColorImage, params: BlockMatchParams = None) -> DisparityImage:
    """Dense disparity for a rectified pair; invalid pixels carry 0.

    Pixels within max_disparity of the left border, window-bound border
    pixels, and pixels failing the left-right check are invalid.
    """
    if params is None:
        params = BlockMatchParams()
    if (left.width, left.height) != (right.width, right.height):
        raise ValueError(
            f"dimension mismatch: {left.width}x{left.height} vs {right.width}x{right.height}"
        )
    gl = _gray(left)
    gr = _gray(right)
    maxd = params.max_disparity
    dl, cl, cl_m1, cl_p1 = _impl.sad_scan(gl, gr, params.window, maxd, -1, False)
    dr, _, _, _ = _impl.sad_scan(gr, gl, params.window, maxd, 1, True)

    valid = dl >= 0
    ys, xs = np.nonzero(valid)
    if ys.size:
        xr = xs - dl[ys, xs]
        dr_at = dr[ys, xr]
        ok = (dr_at >= 0) & (np.abs(dl[ys, xs] - dr_at) <= params.lr_tolerance)
        valid[ys[~ok], xs[~ok]] = False

    disp = dl.astype(np.float64)
    refine = valid & (cl_m1 >= 0) & (cl_p1 >= 0)
    if refine.any():
        cm = cl_m1[refine].astype(np.float64)
        cp = cl_p1[refine].astype(np.float64)
        c0 = cl[refine].astype(np.float64)
        denom = cm - 2.0 * c0 + cp
        delta = np.where(denom > 0, (cm - cp) / np.maximum(2.0 * denom, 1e-300), 0.0)
        disp[refine] += delta
    disp = np.clip(disp, 0.0, float(maxd))
    disp[~valid] = 0.0
    return DisparityImage(left.width, left.height, disp.astype(np.float32), valid, scale=16)
