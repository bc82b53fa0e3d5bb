"""Small fully convolutional network for free-space confidence maps.

Architecture (fixed): conv 7x7x3->12 valid; maxpool 2x2; ReLU;
conv 5x5x12->6 valid; ReLU; 1x1 conv 6->48; ReLU; 1x1 conv (48+2)->192
where the two extra channels are normalized patch-center coordinates (the
learned spatial prior); ReLU; 1x1 conv 192->1; tanh. Valid convolutions
collapse a 16x16 patch to a single output, so training is patch-based and
inference runs the identical layers over the whole image, followed by
bilinear upsampling of the coarse grid.

Parameters are stored float32; all convolutions and reductions accumulate
in float64, which keeps finite-difference gradient checks tight.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from freespace.errors import BalanceImpossible
from freespace.imgio import FREE, OBSTACLE, ColorImage, LabelMask

PATCH_SIZE = 16

# (name, out_channels, in_channels, kernel)
ARCHITECTURE = (
    ("conv1", 12, 3, 7),
    ("conv2", 6, 12, 5),
    ("full1", 48, 6, 1),
    ("full2", 192, 50, 1),
    ("full3", 1, 192, 1),
)
LAYER_NAMES = tuple(name for name, *_ in ARCHITECTURE)
PARAM_COUNTS = {name: co * ci * k * k + co for name, co, ci, k in ARCHITECTURE}


@dataclass
class FcnModel:
    """Parameter blobs per layer: name -> (weights (co,ci,k,k), bias (co,))."""

    blobs: Dict[str, Tuple[np.ndarray, np.ndarray]]
    seed: int = 0

    def copy(self) -> "FcnModel":
        return FcnModel({n: (w.copy(), b.copy()) for n, (w, b) in self.blobs.items()}, self.seed)

    def flat_blobs(self):
        out = []
        for name in LAYER_NAMES:
            w, b = self.blobs[name]
            out.append((f"{name}.weight", w))
            out.append((f"{name}.bias", b))
        return out


@dataclass
class Patch:
    pixels: np.ndarray  # (16, 16, 3) float32 in [-1, 1]
    pos: Tuple[float, float]  # (u_norm, v_norm) of the patch center
    target: float  # +1 free, -1 obstacle


@dataclass
class TrainConfig:
    lr: float = 1e-3
    momentum: float = 0.9
    batch: int = 48
    iterations: int = 10000
    seed: int = 0
    freeze_first: int = 0  # leading parameter layers held fixed, 0..5

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch < 1:
            raise ValueError("batch size must be >= 1")
        if not (0 <= self.freeze_first <= 5):
            raise ValueError("freeze_first must be in [0, 5]")


@dataclass
class ConfidenceMap:
    """Network output over an image; values (H, W) float32 in [-1, 1]."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def init_model(seed: int) -> FcnModel:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    blobs = {}
    for name, co, ci, k in ARCHITECTURE:
        fan_in = ci * k * k
        fan_out = co * k * k
        a = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-a, a, size=(co, ci, k, k)).astype(np.float32)
        b = np.zeros(co, np.float32)
        blobs[name] = (w, b)
    return FcnModel(blobs, seed)


def _weight_matrix(w: np.ndarray) -> np.ndarray:
    # (co, ci, k, k) -> (k*k*ci, co); row order (dy, dx, c) matches im2col.
    co, ci, k, _ = w.shape
    return w.transpose(2, 3, 1, 0).reshape(k * k * ci, co).astype(np.float64)


def _matrix_to_weight(m: np.ndarray, shape) -> np.ndarray:
    co, ci, k, _ = shape
    return m.reshape(k, k, ci, co).transpose(3, 2, 0, 1)


def _im2col_indices(H: int, W: int, k: int, cin: int) -> np.ndarray:
    # flat index of (y, x, c) in a channels-last image is (y*W + x)*cin + c
    offs = (
        np.arange(k)[:, None, None] * W * cin
        + np.arange(k)[None, :, None] * cin
        + np.arange(cin)[None, None, :]
    ).reshape(-1)
    starts = (np.arange(H - k + 1)[:, None] * W * cin + np.arange(W - k + 1)[None, :] * cin).reshape(-1)
    return starts[:, None] + offs[None, :]


_PATCH_IDX1 = _im2col_indices(PATCH_SIZE, PATCH_SIZE, 7, 3)
_BATCH_IDX_CACHE: Dict[int, np.ndarray] = {}


def _batch_cols(pixels: np.ndarray) -> np.ndarray:
    # Gather im2col patches for the whole batch through one flat index so
    # the result is C-contiguous (a 2D index after a slice would put the
    # batch axis innermost and cripple the GEMM).
    N = pixels.shape[0]
    idx = _BATCH_IDX_CACHE.get(N)
    if idx is None:
        stride = PATCH_SIZE * PATCH_SIZE * 3
        idx = (np.arange(N) * stride)[:, None, None] + _PATCH_IDX1[None]
        _BATCH_IDX_CACHE[N] = idx
    return pixels.reshape(-1)[idx]


def normalize_image(data: np.ndarray) -> np.ndarray:
    """uint8 pixels to float64 in [-1, 1]: x / 127.5 - 1."""
    return data.astype(np.float64) / 127.5 - 1.0


def forward_batch(model: FcnModel, pixels: np.ndarray, pos: np.ndarray):
    """Forward pass over a batch of normalized 16x16x3 patches.

    Returns (scores (N,), cache) where the cache carries every activation
    needed by `backward_batch`.
    """
    N = pixels.shape[0]
    if pixels.shape[1:] != (PATCH_SIZE, PATCH_SIZE, 3):
        raise ValueError(f"patches must be {PATCH_SIZE}x{PATCH_SIZE}x3, got {pixels.shape[1:]}")
    w1, b1 = model.blobs["conv1"]
    w2, b2 = model.blobs["conv2"]
    w3, b3 = model.blobs["full1"]
    w4, b4 = model.blobs["full2"]
    w5, b5 = model.blobs["full3"]

    cols1 = _batch_cols(pixels)  # (N, 100, 147)
    a1 = cols1 @ _weight_matrix(w1) + b1.astype(np.float64)  # (N, 100, 12)
    a1 = a1.reshape(N, 10, 10, 12)

    win = a1.reshape(N, 5, 2, 5, 2, 12).transpose(0, 1, 3, 5, 2, 4).reshape(N, 5, 5, 12, 4)
    amax = win.argmax(axis=4)  # first max in (dy, dx) row-major order
    pooled = np.take_along_axis(win, amax[..., None], axis=4)[..., 0]
    relu1 = np.maximum(pooled, 0.0)

    x2 = relu1.reshape(N, 300)  # (dy, dx, c) order
    pre2 = x2 @ _weight_matrix(w2) + b2.astype(np.float64)  # (N, 6)
    relu2 = np.maximum(pre2, 0.0)

    pre3 = relu2 @ _weight_matrix(w3).reshape(6, 48) + b3.astype(np.float64)
    relu3 = np.maximum(pre3, 0.0)

    x4 = np.concatenate([relu3, np.asarray(pos, np.float64)], axis=1)  # (N, 50)
    pre4 = x4 @ _weight_matrix(w4).reshape(50, 192) + b4.astype(np.float64)
    relu4 = np.maximum(pre4, 0.0)

    pre5 = relu4 @ _weight_matrix(w5).reshape(192, 1) + b5.astype(np.float64)
    score = np.tanh(pre5[:, 0])

    cache = {
        "cols1": cols1,
        "pooled": pooled,
        "amax": amax,
        "x2": x2,
        "pre2": pre2,
        "relu2": relu2,
        "pre3": pre3,
        "relu3": relu3,
        "x4": x4,
        "pre4": pre4,
        "relu4": relu4,
        "score": score,
    }
    return score, cache


def backward_batch(model: FcnModel, cache, targets: np.ndarray):
    """Gradients of the mean squared error against +-1 targets."""
    N = cache["score"].shape[0]
    score = cache["score"]
    dscore = 2.0 * (score - np.asarray(targets, np.float64)) / N
    dpre5 = (dscore * (1.0 - score * score))[:, None]  # (N, 1)

    w2 = model.blobs["conv2"][0]
    w4 = model.blobs["full2"][0]
    w5 = model.blobs["full3"][0]
    w3 = model.blobs["full1"][0]

    g5 = cache["relu4"].T @ dpre5  # (192, 1)
    gb5 = dpre5.sum(axis=0)
    drelu4 = dpre5 @ _weight_matrix(w5).reshape(192, 1).T
    dpre4 = drelu4 * (cache["pre4"] > 0)

    g4 = cache["x4"].T @ dpre4  # (50, 192)
    gb4 = dpre4.sum(axis=0)
    dx4 = dpre4 @ _weight_matrix(w4).reshape(50, 192).T
    dpre3 = dx4[:, :48] * (cache["pre3"] > 0)  # prior channels are inputs

    g3 = cache["relu2"].T @ dpre3  # (6, 48)
    gb3 = dpre3.sum(axis=0)
    drelu2 = dpre3 @ _weight_matrix(w3).reshape(6, 48).T
    dpre2 = drelu2 * (cache["pre2"] > 0)

    g2 = cache["x2"].T @ dpre2  # (300, 6)
    gb2 = dpre2.sum(axis=0)
    dx2 = dpre2 @ _weight_matrix(w2).T  # (N, 300)
    dpooled = dx2.reshape(N, 5, 5, 12) * (cache["pooled"] > 0)

    dwin = np.zeros((N, 5, 5, 12, 4))
    np.put_along_axis(dwin, cache["amax"][..., None], dpooled[..., None], axis=4)
    da1 = (
        dwin.reshape(N, 5, 5, 12, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(N, 100, 12)
    )

    cols1 = cache["cols1"]
    g1 = cols1.reshape(N * 100, 147).T @ da1.reshape(N * 100, 12)  # (147, 12)
    gb1 = da1.sum(axis=(0, 1))

    return {
        "conv1": (_matrix_to_weight(g1, (12, 3, 7, 7)), gb1),
        "conv2": (_matrix_to_weight(g2, (6, 12, 5, 5)), gb2),
        "full1": (_matrix_to_weight(g3, (48, 6, 1, 1)), gb3),
        "full2": (_matrix_to_weight(g4, (192, 50, 1, 1)), gb4),
        "full3": (_matrix_to_weight(g5, (1, 192, 1, 1)), gb5),
    }


def forward_patch(model: FcnModel, patch: Patch):
    """Score one patch; returns (score, cache)."""
    px = np.asarray(patch.pixels, np.float64)[None]
    pos = np.asarray(patch.pos, np.float64)[None]
    score, cache = forward_batch(model, px, pos)
    return float(score[0]), cache


def backward_patch(model: FcnModel, cache, target: float):
    """Gradients of (score - target)^2 for a single cached patch."""
    return backward_batch(model, cache, np.asarray([target], np.float64))


def grad_check(
    model: FcnModel,
    patch: Patch,
    target: float,
    eps: float = 1e-3,
    seed: int = 0,
    samples_per_layer: int = 20,
    gradients=None,
) -> float:
    """Max relative error between backprop and central finite differences.

    Samples at least `samples_per_layer` parameters per layer (fewer only
    if a layer is smaller). Central differences assume local smoothness;
    a parameter whose +-eps interval contains a ReLU or pooling kink has
    no meaningful difference quotient, so a point is accepted only when
    its forward and backward one-sided quotients agree (they split at a
    kink), and resampled otherwise. Pass `gradients` to check externally
    supplied gradients (used by the corrupted-backward detection test).
    """
    score, cache = forward_patch(model, patch)
    if gradients is None:
        gradients = backward_patch(model, cache, target)
    rng = np.random.default_rng(seed)
    work = model.copy()
    px = np.asarray(patch.pixels, np.float64)[None]
    pos = np.asarray(patch.pos, np.float64)[None]

    def loss() -> float:
        s, _ = forward_batch(work, px, pos)
        return float((s[0] - target) ** 2)

    base = loss()
    max_rel = 0.0
    for name in LAYER_NAMES:
        w, b = work.blobs[name]
        gw, gb = gradients[name]
        total = w.size + b.size
        order = rng.permutation(total)
        accepted = 0
        fallback = None
        for t in order:
            if accepted >= min(samples_per_layer, total):
                break
            arr, garr, idx = (w, gw, t) if t < w.size else (b, gb, t - w.size)
            orig = arr.flat[idx]
            hi = np.float32(orig + eps)
            lo = np.float32(orig - eps)
            hi2 = np.float32(orig + eps / 2.0)
            lo2 = np.float32(orig - eps / 2.0)
            arr.flat[idx] = hi
            lp = loss()
            arr.flat[idx] = lo
            lm = loss()
            arr.flat[idx] = hi2
            lp2 = loss()
            arr.flat[idx] = lo2
            lm2 = loss()
            arr.flat[idx] = orig
            g_fd = (lp - lm) / (float(hi) - float(lo))
            g_half = (lp2 - lm2) / (float(hi2) - float(lo2))
            g_bp = float(garr.flat[idx])
            rel = abs(g_bp - g_fd) / max(1e-8, abs(g_bp) + abs(g_fd))
            # Kink screens: one-sided quotients split across a kink at the
            # point itself; the central quotient drifts with the step when
            # a kink sits inside the bracket. Smooth points pass both with
            # O(eps * curvature) to spare.
            q_fwd = (lp - base) / (float(hi) - float(orig))
            q_bwd = (base - lm) / (float(orig) - float(lo))
            one_sided_split = abs(q_fwd - q_bwd) > 5e-3 * max(1e-8, abs(q_fwd) + abs(q_bwd))
            central_drift = abs(g_fd - g_half) > 2.5e-4 * max(1e-8, abs(g_fd) + abs(g_half))
            if one_sided_split or central_drift:
                fallback = rel if fallback is None else min(fallback, rel)
                continue
            accepted += 1
            max_rel = max(max_rel, rel)
        if accepted == 0 and fallback is not None:
            max_rel = max(max_rel, fallback)
    return max_rel


def init_velocity(model: FcnModel):
    return {n: (np.zeros_like(w), np.zeros_like(b)) for n, (w, b) in model.blobs.items()}


def sgd_step(model: FcnModel, gradients, config: TrainConfig, velocity) -> FcnModel:
    """Classical momentum: v <- m*v - lr*g; w <- w + v.

    Layers with index < freeze_first keep parameters and velocity
    untouched. Returns a new model; `velocity` is updated in place.
    """
    blobs = {}
    for i, name in enumerate(LAYER_NAMES):
        w, b = model.blobs[name]
        if i < config.freeze_first:
            blobs[name] = (w.copy(), b.copy())
            continue
        gw, gb = gradients[name]
        vw, vb = velocity[name]
        vw_new = (config.momentum * vw.astype(np.float64) - config.lr * np.asarray(gw, np.float64)).astype(np.float32)
        vb_new = (config.momentum * vb.astype(np.float64) - config.lr * np.asarray(gb, np.float64)).astype(np.float32)
        velocity[name] = (vw_new, vb_new)
        blobs[name] = (
            (w.astype(np.float64) + vw_new).astype(np.float32),
            (b.astype(np.float64) + vb_new).astype(np.float32),
        )
    return FcnModel(blobs, model.seed)


@dataclass
class FramePool:
    """Per-frame sampling pool: image, mask, and eligible patch centers."""

    image: np.ndarray  # (H, W, 3) uint8
    free_centers: np.ndarray  # (k, 2) int rows of (cy, cx)
    obstacle_centers: np.ndarray
    height: int
    width: int
    windows: np.ndarray  # sliding 16x16x3 view into image


def make_pool(image, mask: LabelMask) -> FramePool:
    data = image.data if isinstance(image, ColorImage) else np.asarray(image)
    H, W = data.shape[:2]
    if H < PATCH_SIZE or W < PATCH_SIZE:
        raise ValueError(f"image {W}x{H} smaller than the {PATCH_SIZE}x{PATCH_SIZE} receptive field")
    if (mask.height, mask.width) != (H, W):
        raise ValueError("mask dimensions do not match the image")
    half = PATCH_SIZE // 2
    interior = mask.label[half : H - half + 1, half : W - half + 1]

    def centers(value):
        ys, xs = np.nonzero(interior == value)
        return np.stack([ys + half, xs + half], axis=1) if ys.size else np.empty((0, 2), np.int64)

    windows = np.lib.stride_tricks.sliding_window_view(data, (PATCH_SIZE, PATCH_SIZE, 3))
    return FramePool(data, centers(FREE), centers(OBSTACLE), H, W, windows)


def _draw_batch(pool: FramePool, n: int, rng, allow_single_class: bool = False):
    n_free = (n + 1) // 2
    n_obs = n // 2
    has_free = pool.free_centers.shape[0] > 0
    has_obs = pool.obstacle_centers.shape[0] > 0
    if not (has_free and has_obs):
        if not allow_single_class or not (has_free or has_obs):
            raise BalanceImpossible(
                f"pool has {pool.free_centers.shape[0]} free / "
                f"{pool.obstacle_centers.shape[0]} obstacle centers"
            )
        if has_free:
            n_free, n_obs = n, 0
        else:
            n_free, n_obs = 0, n
    fi = rng.integers(0, max(pool.free_centers.shape[0], 1), size=n_free)
    oi = rng.integers(0, max(pool.obstacle_centers.shape[0], 1), size=n_obs)
    centers = np.concatenate(
        [
            pool.free_centers[fi] if n_free else np.empty((0, 2), np.int64),
            pool.obstacle_centers[oi] if n_obs else np.empty((0, 2), np.int64),
        ]
    )
    targets = np.concatenate([np.ones(n_free), -np.ones(n_obs)])
    half = PATCH_SIZE // 2
    raw = pool.windows[centers[:, 0] - half, centers[:, 1] - half, 0]
    pixels = normalize_image(raw)
    pos = np.stack(
        [
            2.0 * (centers[:, 1] - 0.5) / pool.width - 1.0,
            2.0 * (centers[:, 0] - 0.5) / pool.height - 1.0,
        ],
        axis=1,
    )
    return pixels, pos, targets


def sample_patches(image, mask: LabelMask, n: int, rng, allow_single_class: bool = False) -> List[Patch]:
    """Draw n class-balanced patches: ceil(n/2) free, floor(n/2) obstacle.

    Centers are uniform (with replacement) within each class over pixels
    whose 16x16 patch fits inside the image; IGNORE centers are never
    sampled. Raises BalanceImpossible when a class is empty, unless
    `allow_single_class` permits falling back to the populated one.
    """
    pool = make_pool(image, mask)
    pixels, pos, targets = _draw_batch(pool, n, rng, allow_single_class)
    return [
        Patch(pixels[i].astype(np.float32), (float(pos[i, 0]), float(pos[i, 1])), float(targets[i]))
        for i in range(n)
    ]


@dataclass
class TrainResult:
    model: FcnModel
    trace: List[Tuple[int, float]]  # (iteration, mean batch loss) every 100
    snapshots: Dict[int, FcnModel]


def train(
    model: FcnModel,
    pools: List[FramePool],
    config: TrainConfig,
    checkpoints=None,
    allow_single_class: bool = False,
) -> TrainResult:
    """SGD over batches drawn round-robin from the frame pools.

    Iteration t draws its whole batch from pool t mod len(pools). Fully
    deterministic for a given config seed. `checkpoints` requests model
    snapshots at the given iteration numbers.
    """
    if not pools:
        raise ValueError("at least one non-empty pool is required")
    rng = np.random.default_rng(config.seed)
    velocity = init_velocity(model)
    trace: List[Tuple[int, float]] = []
    snapshots: Dict[int, FcnModel] = {}
    wanted = set(checkpoints or ())
    for it in range(1, config.iterations + 1):
        pool = pools[(it - 1) % len(pools)]
        pixels, pos, targets = _draw_batch(pool, config.batch, rng, allow_single_class)
        scores, cache = forward_batch(model, pixels, pos)
        loss = float(np.mean((scores - targets) ** 2))
        gradients = backward_batch(model, cache, targets)
        model = sgd_step(model, gradients, config, velocity)
        if it % 100 == 0:
            trace.append((it, loss))
        if it in wanted:
            snapshots[it] = model.copy()
    return TrainResult(model, trace, snapshots)


def output_grid_shape(height: int, width: int) -> Tuple[int, int]:
    """Coarse output grid of full-image inference: ((H-6)//2-4, (W-6)//2-4)."""
    return (height - 6) // 2 - 4, (width - 6) // 2 - 4


def infer_grid(model: FcnModel, image) -> np.ndarray:
    """Pre-upsampling confidence grid of full-image inference.

    The spatial-prior channels become coordinate maps: output cell (i, j)
    sees the receptive-field center at image coordinates
    (2i + 7.5, 2j + 7.5), so the value at cell (i, j) equals
    `forward_patch` on the 16x16 patch with top-left corner (2i, 2j).
    """
    data = image.data if isinstance(image, ColorImage) else np.asarray(image)
    H, W = data.shape[:2]
    if H < PATCH_SIZE or W < PATCH_SIZE:
        raise ValueError(f"image {W}x{H} smaller than {PATCH_SIZE}x{PATCH_SIZE}")
    px = normalize_image(data)

    w1, b1 = model.blobs["conv1"]
    w2, b2 = model.blobs["conv2"]
    w3, b3 = model.blobs["full1"]
    w4, b4 = model.blobs["full2"]
    w5, b5 = model.blobs["full3"]

    idx1 = _im2col_indices(H, W, 7, 3)
    ho, wo = H - 6, W - 6
    a1 = (px.reshape(-1)[idx1] @ _weight_matrix(w1) + b1.astype(np.float64)).reshape(ho, wo, 12)
    hp, wp = ho // 2, wo // 2
    a1 = a1[: hp * 2, : wp * 2]
    pooled = a1.reshape(hp, 2, wp, 2, 12).max(axis=(1, 3))
    relu1 = np.maximum(pooled, 0.0)

    idx2 = _im2col_indices(hp, wp, 5, 12)
    gh, gw = hp - 4, wp - 4
    pre2 = (relu1.reshape(-1)[idx2] @ _weight_matrix(w2) + b2.astype(np.float64)).reshape(gh, gw, 6)
    relu2 = np.maximum(pre2, 0.0)

    relu3 = np.maximum(relu2 @ _weight_matrix(w3).reshape(6, 48) + b3.astype(np.float64), 0.0)

    vnorm = 2.0 * (2.0 * np.arange(gh) + 7.5) / H - 1.0
    unorm = 2.0 * (2.0 * np.arange(gw) + 7.5) / W - 1.0
    prior = np.empty((gh, gw, 2))
    prior[:, :, 0] = unorm[None, :]
    prior[:, :, 1] = vnorm[:, None]
    x4 = np.concatenate([relu3, prior], axis=2)

    relu4 = np.maximum(x4 @ _weight_matrix(w4).reshape(50, 192) + b4.astype(np.float64), 0.0)
    return np.tanh(relu4 @ _weight_matrix(w5).reshape(192, 1) + b5.astype(np.float64))[:, :, 0]


def infer_full(model: FcnModel, image) -> ConfidenceMap:
    """Confidence map over a whole image.

    Runs every layer convolutionally (see `infer_grid`), then upsamples
    the coarse grid to the image size by bilinear interpolation with edge
    clamping, which never exceeds the coarse grid's value range.
    """
    data = image.data if isinstance(image, ColorImage) else np.asarray(image)
    H, W = data.shape[:2]
    grid = infer_grid(model, image)
    values = _upsample_bilinear(grid, H, W)
    return ConfidenceMap(values.astype(np.float32))


def _upsample_bilinear(grid: np.ndarray, H: int, W: int) -> np.ndarray:
    gh, gw = grid.shape
    gy = np.clip((np.arange(H) - 7.5) / 2.0, 0.0, gh - 1.0)
    gx = np.clip((np.arange(W) - 7.5) / 2.0, 0.0, gw - 1.0)
    y0 = np.floor(gy).astype(np.int64)
    x0 = np.floor(gx).astype(np.int64)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (gy - y0)[:, None]
    fx = (gx - x0)[None, :]
    return (
        (1 - fy) * (1 - fx) * grid[np.ix_(y0, x0)]
        + (1 - fy) * fx * grid[np.ix_(y0, x1)]
        + fy * (1 - fx) * grid[np.ix_(y1, x0)]
        + fy * fx * grid[np.ix_(y1, x1)]
    )
