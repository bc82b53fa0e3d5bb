"""Synthetic stereo-scene generator with exact ground truth.

Renders a textured planar road seen from a forward-moving camera, with
fronto-parallel boxes standing on the ground and a sky above the horizon.
The disparity channel is exact by construction (then optionally corrupted
with noise and dropouts) while the ground-truth mask stays clean, so the
whole pipeline can be verified at desk scale. Two color styles implement
a color-only domain shift that the disparity channel is immune to.
"""

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from freespace.geometry import CameraRig
from freespace.imgio import (
    FREE,
    OBSTACLE,
    ColorImage,
    DisparityImage,
    LabelMask,
    write_color_image,
    write_disparity,
    write_label_mask,
)


@dataclass
class BoxSpec:
    x: float  # lateral center, meters
    z: float  # depth at frame 0, meters
    width: float
    height: float
    color: Tuple[int, int, int] = (200, 60, 40)


@dataclass
class StyleSpec:
    """Color appearance of a scene; geometry is style-independent."""

    road_color: Tuple[int, int, int] = (120, 120, 124)
    sky_color: Tuple[int, int, int] = (170, 200, 235)
    texture_std: float = 14.0


@dataclass
class SceneSpec:
    rig: CameraRig
    texture_seed: int = 0
    boxes: List[BoxSpec] = field(default_factory=list)
    style: StyleSpec = field(default_factory=StyleSpec)
    brightness_drift: float = 1.5  # additive per-frame illumination drift
    contrast_drift: float = 0.004  # multiplicative per-frame drift
    disp_noise_std: float = 0.0
    invalid_rate: float = 0.0
    frames: int = 11
    cam_height: float = 1.5  # meters above the road
    speed: float = 0.4  # meters of forward motion per frame
    z_near: float = 2.0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        for box in self.boxes:
            if box.z - self.speed * (self.frames - 1) <= self.z_near:
                raise ValueError(
                    f"box at z={box.z} ends up behind the near plane after {self.frames} frames"
                )


def ground_plane_of(spec: SceneSpec):
    """Exact (alpha, v_horizon) of the rendered road."""
    return spec.rig.baseline / spec.cam_height, spec.rig.cy


def gen_sequence(spec: SceneSpec, seed: int):
    """Render the sequence; returns [(ColorImage, DisparityImage, LabelMask)].

    Rendering is deterministic per (seed, frame index). Ground truth:
    FREE on visible road, OBSTACLE on boxes and sky. Sky has no disparity
    measurement; disparity corruption never touches the ground truth.
    """
    rig = spec.rig
    H, W = rig.height, rig.width
    alpha, v_h = ground_plane_of(spec)
    out = []
    for k in range(spec.frames):
        rng = np.random.default_rng(np.random.SeedSequence((seed, spec.texture_seed, k)))
        color = np.zeros((H, W, 3), np.float64)
        disparity = np.zeros((H, W), np.float64)
        valid = np.zeros((H, W), bool)
        gt = np.full((H, W), OBSTACLE, np.uint8)

        v = np.arange(H, dtype=np.float64)
        ground_rows = v > v_h
        d_ground = np.where(ground_rows, alpha * (v - v_h), 0.0)

        color[~ground_rows] = spec.style.sky_color
        # horizontal brightness ramp keeps the road from being featureless
        ramp = 12.0 * np.linspace(-1.0, 1.0, W)[None, :, None]
        color[ground_rows] = spec.style.road_color
        color[ground_rows] += ramp[0][None, :, :]
        disparity[ground_rows] = d_ground[ground_rows][:, None]
        valid[ground_rows] = True
        gt[ground_rows] = FREE

        cam_z = spec.speed * k
        f = rig.focal
        for box in sorted(spec.boxes, key=lambda b: -(b.z - cam_z)):
            zk = box.z - cam_z
            d_box = f * rig.baseline / zk
            v_base = rig.cy + f * spec.cam_height / zk
            v_top = rig.cy + f * (spec.cam_height - box.height) / zk
            u_l = rig.cx + f * (box.x - box.width / 2.0) / zk
            u_r = rig.cx + f * (box.x + box.width / 2.0) / zk
            r0 = max(0, int(np.ceil(v_top)))
            r1 = min(H - 1, int(np.floor(v_base)))
            c0 = max(0, int(np.ceil(u_l)))
            c1 = min(W - 1, int(np.floor(u_r)))
            if r0 > r1 or c0 > c1:
                continue
            color[r0 : r1 + 1, c0 : c1 + 1] = box.color
            disparity[r0 : r1 + 1, c0 : c1 + 1] = d_box
            valid[r0 : r1 + 1, c0 : c1 + 1] = True
            gt[r0 : r1 + 1, c0 : c1 + 1] = OBSTACLE

        gain = 1.0 + spec.contrast_drift * k
        offset = spec.brightness_drift * k
        color = color * gain + offset
        color += rng.normal(0.0, spec.style.texture_std, color.shape)
        color = np.clip(np.rint(color), 0, 255).astype(np.uint8)

        if spec.disp_noise_std > 0:
            noise = rng.normal(0.0, spec.disp_noise_std, disparity.shape)
            disparity = np.where(valid, np.maximum(disparity + noise, 0.0), disparity)
        if spec.invalid_rate > 0:
            drop = rng.random(disparity.shape) < spec.invalid_rate
            valid = valid & ~drop
        disparity = np.where(valid, disparity, 0.0)

        out.append(
            (
                ColorImage(W, H, color),
                DisparityImage(W, H, disparity.astype(np.float32), valid, scale=16),
                LabelMask(W, H, gt),
            )
        )
    return out


STYLE_A = StyleSpec(road_color=(122, 122, 126), sky_color=(172, 200, 232), texture_std=13.0)
STYLE_B = StyleSpec(road_color=(88, 42, 38), sky_color=(120, 112, 130), texture_std=13.0)

# Style A: one learnable road family with dark, desaturated box colors.
# B roads are dark saturated hues: far from A's bright road, near A's dark
# boxes, so an A-trained model scores them mildly negative (suppressed but
# not saturated, which would stall tuning).
_BOX_COLORS_A = ((64, 66, 84), (52, 56, 60), (100, 104, 122), (70, 86, 92), (118, 108, 96))

# Style B: each sequence gets its own dark road hue, and its boxes reuse
# the road hues of *other* B sequences (plus one bright color). A model
# over-tuned on the wrong sequence then labels the road as obstacle,
# which is exactly what the misalignment experiments need to expose.
_ROADS_B = ((112, 44, 38), (36, 52, 118), (62, 96, 40), (96, 42, 108), (118, 88, 34), (30, 96, 96))
_BRIGHT_B = ((198, 198, 206), (214, 186, 96), (160, 206, 224))


def default_rig(width: int = 128, height: int = 96) -> CameraRig:
    return CameraRig(focal=150.0, baseline=0.3, cx=width / 2.0, cy=height * 5.0 / 12.0, width=width, height=height)


def _sequence_spec(
    rig: CameraRig,
    style_b: bool,
    style_index: int,
    rng: np.random.Generator,
    noise_std: float,
    invalid_rate: float,
) -> SceneSpec:
    style = replace(STYLE_B) if style_b else replace(STYLE_A)
    if style_b:
        base = np.array(_ROADS_B[style_index % len(_ROADS_B)], float)
        jitter = rng.uniform(-10.0, 10.0, 3)
        others = [_ROADS_B[(style_index + k) % len(_ROADS_B)] for k in (1, 2, 3)]
        palette = tuple(others) + (_BRIGHT_B[style_index % len(_BRIGHT_B)],)
    else:
        base = np.array(style.road_color, float)
        jitter = rng.uniform(-12.0, 12.0, 3)
        palette = _BOX_COLORS_A
    style.road_color = tuple(int(c) for c in np.clip(base + jitter, 20, 235))
    n_boxes = int(rng.integers(1, 4))
    boxes = []
    travel = 0.4 * 10  # camera advance over the sequence (speed * frames)
    for _ in range(n_boxes):
        c = np.array(palette[int(rng.integers(0, len(palette)))], float)
        c = np.clip(c + rng.uniform(-20, 20, 3), 10, 245)
        z0 = float(rng.uniform(10.0, 26.0))
        z_end = z0 - travel
        # keep the box comfortably visible and at least ~8 px tall/wide on
        # the annotated frame so obstacle patches always exist
        min_size = 8.0 * z_end / rig.focal
        width = float(rng.uniform(max(1.2, min_size), 3.0))
        height = float(rng.uniform(max(0.9, min_size), 2.0))
        x_lim = max(0.2, 0.36 * z_end - width / 2.0)
        boxes.append(
            BoxSpec(
                x=float(rng.uniform(-x_lim, x_lim)),
                z=z0,
                width=width,
                height=height,
                color=tuple(int(v) for v in c),
            )
        )
    return SceneSpec(
        rig=rig,
        texture_seed=int(rng.integers(0, 2**31)),
        boxes=boxes,
        style=style,
        disp_noise_std=noise_std,
        invalid_rate=invalid_rate,
    )


def gen_benchmark(
    root_dir,
    n_sequences: int,
    domain_shift_at: int,
    seed: int,
    width: int = 128,
    height: int = 96,
    noise_std: float = 0.0,
    invalid_rate: float = 0.0,
):
    """Write a discoverable dataset tree plus rig config and manifest.

    Sequences [0, domain_shift_at) render in style A, the rest in style B
    (identical geometry statistics, different colors). Every annotated
    frame gets a manual ground-truth mask. Returns the list of written
    sequence directories.
    """
    if n_sequences < 4:
        raise ValueError("benchmark needs at least 4 sequences")
    root = Path(root_dir)
    root.mkdir(parents=True, exist_ok=True)
    rig = default_rig(width, height)
    manifest = []
    dirs = []
    for s in range(n_sequences):
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1000 + s)))
        style_b = s >= domain_shift_at
        style_index = s - domain_shift_at if style_b else s
        spec = _sequence_spec(rig, style_b, style_index, rng, noise_std, invalid_rate)
        frames = gen_sequence(spec, seed=seed * 100003 + s)
        seq_dir = root / f"seq{s:03d}"
        seq_dir.mkdir(exist_ok=True)
        for k, (img, disp, gt) in enumerate(frames):
            write_color_image(img, seq_dir / f"frame_{k:02d}.ppm")
            write_disparity(disp, seq_dir / f"frame_{k:02d}.dmap.pgm")
        write_label_mask(frames[-1][2], seq_dir / "frame_10.gt.pgm")
        dirs.append(seq_dir)
        manifest.append(
            {
                "sequence": seq_dir.name,
                "style": "B" if style_b else "A",
                "road_color": "/".join(str(c) for c in spec.style.road_color),
                "n_boxes": len(spec.boxes),
                "noise_std": noise_std,
                "invalid_rate": invalid_rate,
            }
        )
    with open(root / "manifest.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(manifest[0].keys()))
        writer.writeheader()
        writer.writerows(manifest)
    alpha, v_h = rig.baseline / 1.5, rig.cy
    with open(root / "rig.cfg", "w") as f:
        f.write(f"focal_px={rig.focal}\nbaseline_m={rig.baseline}\n")
        f.write(f"cx={rig.cx}\ncy={rig.cy}\nwidth_px={rig.width}\nheight_px={rig.height}\n")
        f.write("bev.x_min=-10\nbev.x_max=10\nbev.z_min=5\nbev.z_max=45\nbev.cell=0.1\n")
        f.write(f"plane.alpha={alpha}\nplane.v_horizon={v_h}\n")
    return dirs
