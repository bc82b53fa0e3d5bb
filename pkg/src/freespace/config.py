"""Run configuration: plain key=value text files.

Required keys describe the camera rig (focal_px, baseline_m, cx, cy,
width_px, height_px); everything else has defaults. Unknown keys are
rejected so typos fail loudly.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from freespace.fcn import TrainConfig
from freespace.geometry import BevGridSpec, CameraRig, GroundPlane, PlaneFitParams
from freespace.stixel import StixelParams

_REQUIRED = ("focal_px", "baseline_m", "cx", "cy", "width_px", "height_px")

_DEFAULTS = {
    "bev.x_min": -10.0,
    "bev.x_max": 10.0,
    "bev.z_min": 5.0,
    "bev.z_max": 45.0,
    "bev.cell": 0.1,
    "disparity.scale": 16,
    "fit.iterations": 200,
    "fit.inlier_thresh": 1.0,
    "fit.min_inliers": 50,
    "fit.blend": 0.7,
    "fit.seed": 0,
    "plane.alpha": None,
    "plane.v_horizon": None,
    "stixel.sigma": 1.0,
    "stixel.kappa": 4.0,
    "stixel.c_invalid": 1.0,
    "stixel.beta_seg": 8.0,
    "stixel.beta_base": 4.0,
    "stixel.delta_grav": 2.0,
    "stixel.width": 1,
    "train.lr": 1e-3,
    "train.momentum": 0.9,
    "train.batch": 48,
    "train.offline_iters": 10000,
    "train.scratch_iters": 10000,
    "train.tune_iters": 2000,
    "train.online_lr_mult": 1.0,
    "train.seed": 0,
}

_INT_KEYS = {
    "width_px",
    "height_px",
    "disparity.scale",
    "fit.iterations",
    "fit.min_inliers",
    "fit.seed",
    "stixel.width",
    "train.batch",
    "train.offline_iters",
    "train.scratch_iters",
    "train.tune_iters",
    "train.seed",
}


@dataclass
class RunConfig:
    rig: CameraRig
    grid: BevGridSpec
    fit: PlaneFitParams
    stixel: StixelParams
    disparity_scale: int
    default_plane: Optional[GroundPlane]
    lr: float
    momentum: float
    batch: int
    offline_iters: int
    scratch_iters: int
    tune_iters: int
    online_lr_mult: float
    seed: int

    def train_config(self, iterations: int, seed: int, freeze_first: int = 0, online: bool = False) -> TrainConfig:
        lr = self.lr * (self.online_lr_mult if online else 1.0)
        return TrainConfig(
            lr=lr,
            momentum=self.momentum,
            batch=self.batch,
            iterations=iterations,
            seed=seed,
            freeze_first=freeze_first,
        )


def parse_config(path) -> RunConfig:
    """Parse a key=value config file into a RunConfig."""
    values = dict(_DEFAULTS)
    seen = set()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _DEFAULTS and key not in _REQUIRED:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = int(val) if key in _INT_KEYS else float(val)
        seen.add(key)
    missing = [k for k in _REQUIRED if k not in seen]
    if missing:
        raise ValueError(f"{path}: missing required keys {missing}")

    rig = CameraRig(
        focal=values["focal_px"],
        baseline=values["baseline_m"],
        cx=values["cx"],
        cy=values["cy"],
        width=values["width_px"],
        height=values["height_px"],
    )
    grid = BevGridSpec(
        x_min=values["bev.x_min"],
        x_max=values["bev.x_max"],
        z_min=values["bev.z_min"],
        z_max=values["bev.z_max"],
        cell=values["bev.cell"],
    )
    default_plane = None
    if values["plane.alpha"] is not None and values["plane.v_horizon"] is not None:
        default_plane = GroundPlane(values["plane.alpha"], values["plane.v_horizon"])
    fit = PlaneFitParams(
        iterations=values["fit.iterations"],
        inlier_thresh=values["fit.inlier_thresh"],
        min_inliers=values["fit.min_inliers"],
        blend=values["fit.blend"],
        seed=values["fit.seed"],
        default_plane=default_plane,
    )
    stx = StixelParams(
        sigma=values["stixel.sigma"],
        kappa=values["stixel.kappa"],
        c_invalid=values["stixel.c_invalid"],
        beta_seg=values["stixel.beta_seg"],
        beta_base=values["stixel.beta_base"],
        delta_grav=values["stixel.delta_grav"],
        stixel_width=values["stixel.width"],
    )
    return RunConfig(
        rig=rig,
        grid=grid,
        fit=fit,
        stixel=stx,
        disparity_scale=values["disparity.scale"],
        default_plane=default_plane,
        lr=values["train.lr"],
        momentum=values["train.momentum"],
        batch=values["train.batch"],
        offline_iters=values["train.offline_iters"],
        scratch_iters=values["train.scratch_iters"],
        tune_iters=values["train.tune_iters"],
        online_lr_mult=values["train.online_lr_mult"],
        seed=values["train.seed"],
    )
