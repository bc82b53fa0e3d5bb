"""Experiment orchestration: weak labels, offline and online training.

Offline modes train one network on the annotated frames of the training
split (manual masks, self-supervised weak masks, or weak masks of all
frames). Online modes train or tune one network per test sequence on the
weak labels of its ten preceding frames, optionally misaligned to a
different sequence, delayed, or with leading layers frozen, then score
the annotated frame.
"""

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from freespace import fcn
from freespace.config import RunConfig
from freespace.errors import FitFailed, UnusableSequence
from freespace.evaluation import PRCurve, pr_curve
from freespace.geometry import GroundPlane, PlaneFitParams, fit_ground_plane
from freespace.imgio import (
    LabelMask,
    SequenceSet,
    discover_sequences,
    read_color_image,
    read_disparity,
    read_label_mask,
)
from freespace.stixel import labeling_to_mask, stixel_image


class TrainingMode(enum.Enum):
    OFF_MAN = "off-man"
    OFF_SELF = "off-self"
    OFF_SELF_ALL = "off-self-all"
    ONL_SCRATCH = "scratch"
    ONL_TUNE_MAN = "tune-man"
    ONL_TUNE_SELF = "tune-self"


OFFLINE_MODES = (TrainingMode.OFF_MAN, TrainingMode.OFF_SELF, TrainingMode.OFF_SELF_ALL)
ONLINE_MODES = (TrainingMode.ONL_SCRATCH, TrainingMode.ONL_TUNE_MAN, TrainingMode.ONL_TUNE_SELF)


class Misalignment(enum.Enum):
    ALIGNED = "aligned"
    SHIFT_PLUS_1 = "plus1"
    SHIFT_MINUS_1 = "minus1"
    PERMUTE = "permute"


def assignment_map(mode: Misalignment, n: int, seed: int) -> np.ndarray:
    """Training-sequence index for each test index under the mode.

    Shifts wrap cyclically over the ordered list; PERMUTE draws a seeded
    uniform shuffle, rejecting the identity permutation.
    """
    idx = np.arange(n)
    if mode is Misalignment.ALIGNED:
        return idx
    if mode is Misalignment.SHIFT_PLUS_1:
        return (idx + 1) % n
    if mode is Misalignment.SHIFT_MINUS_1:
        return (idx - 1) % n
    if n < 2:
        raise ValueError("PERMUTE needs at least two sequences")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    while np.array_equal(perm, idx):
        perm = rng.permutation(n)
    return perm


def generate_weak_labels(disparities, fit_params: PlaneFitParams, stixel_params, start_plane=None):
    """Stixel weak labels for a list of disparity frames, planes chained.

    Each frame's plane is the robust fit blended with the previous
    frame's plane; a failed fit falls back to the previous plane (or the
    configured default). Returns (masks, planes); a frame with no usable
    plane yields None entries, and if every frame is unusable the
    sequence is reported as such.
    """
    masks: List[Optional[LabelMask]] = []
    planes: List[Optional[GroundPlane]] = []
    current = start_plane
    any_ok = False
    for disp in disparities:
        try:
            current = fit_ground_plane(disp, fit_params, prev=current)
        except FitFailed:
            if current is None:
                current = fit_params.default_plane
        if current is None:
            masks.append(None)
            planes.append(None)
            continue
        any_ok = True
        labelings = stixel_image(disp, current, stixel_params)
        masks.append(labeling_to_mask(labelings, disp.disparity.shape))
        planes.append(current)
    if not any_ok:
        raise UnusableSequence("no frame produced a usable ground plane")
    return masks, planes


class SequenceDataset:
    """Lazy, cached view of an on-disk dataset tree plus its run config."""

    def __init__(self, root, cfg: RunConfig):
        self.root = root
        self.cfg = cfg
        self.sequences: SequenceSet = discover_sequences(root)
        self._color = {}
        self._disp = {}
        self._gt = {}
        self._weak = {}
        self._planes = {}

    def __len__(self):
        return len(self.sequences)

    def color(self, seq: int, frame: int):
        key = (seq, frame)
        if key not in self._color:
            self._color[key] = read_color_image(self.sequences.sequences[seq].color[frame])
        return self._color[key]

    def disparity(self, seq: int, frame: int):
        key = (seq, frame)
        if key not in self._disp:
            path = self.sequences.sequences[seq].disparity[frame]
            self._disp[key] = read_disparity(path, self.cfg.disparity_scale)
        return self._disp[key]

    def gt(self, seq: int) -> Optional[LabelMask]:
        if seq not in self._gt:
            path = self.sequences.sequences[seq].gt
            self._gt[seq] = read_label_mask(path) if path is not None else None
        return self._gt[seq]

    def weak_chain(self, seq: int):
        """Weak masks and planes over all 11 frames of the sequence."""
        if seq not in self._weak:
            disparities = [self.disparity(seq, k) for k in range(11)]
            masks, planes = generate_weak_labels(disparities, self.cfg.fit, self.cfg.stixel)
            self._weak[seq] = (masks, planes)
        return self._weak[seq]

    def eval_plane(self, seq: int) -> GroundPlane:
        """Plane of the annotated frame (chained through the sequence)."""
        masks, planes = self.weak_chain(seq)
        if planes[10] is None:
            raise UnusableSequence(f"sequence {seq}: no plane on the annotated frame")
        return planes[10]


@dataclass
class PipelineConfig:
    seed: int = 0
    offline_iters: int = 10000
    scratch_iters: int = 10000
    tune_iters: int = 2000
    freeze_first: int = 0
    delay_frames: int = 0

    @classmethod
    def from_run_config(cls, cfg: RunConfig, **overrides) -> "PipelineConfig":
        base = cls(
            seed=cfg.seed,
            offline_iters=cfg.offline_iters,
            scratch_iters=cfg.scratch_iters,
            tune_iters=cfg.tune_iters,
        )
        for k, v in overrides.items():
            setattr(base, k, v)
        return base


def _pool(dataset: SequenceDataset, seq: int, frame: int, mask: LabelMask):
    return fcn.make_pool(dataset.color(seq, frame), mask)


def train_offline(
    dataset: SequenceDataset,
    train_ids,
    mode: TrainingMode,
    config: PipelineConfig,
) -> fcn.FcnModel:
    """One model over the training split's annotated frames (or all frames)."""
    if mode not in OFFLINE_MODES:
        raise ValueError(f"{mode} is not an offline mode")
    pools = []
    for seq in train_ids:
        name = dataset.sequences.sequences[seq].name
        if mode is TrainingMode.OFF_MAN:
            gt = dataset.gt(seq)
            if gt is None:
                raise ValueError(f"{name}: manual mask required for {mode.value}")
            pools.append(_pool(dataset, seq, 10, gt))
        else:
            masks, _ = dataset.weak_chain(seq)
            if mode is TrainingMode.OFF_SELF:
                if masks[10] is None:
                    raise ValueError(f"{name}: weak label unavailable on the annotated frame")
                pools.append(_pool(dataset, seq, 10, masks[10]))
            else:  # OFF_SELF_ALL: preceding frames then the annotated frame
                for k in range(11):
                    if masks[k] is not None:
                        pools.append(_pool(dataset, seq, k, masks[k]))
    model = fcn.init_model(config.seed)
    tc = dataset.cfg.train_config(config.offline_iters, config.seed)
    # frames that carry only one class (e.g. no obstacle in view) still
    # contribute their class; balance holds per two-class frame
    return fcn.train(model, pools, tc, allow_single_class=True).model


def _seq_seed(global_seed: int, stream: int, index: int) -> int:
    ss = np.random.SeedSequence((global_seed, stream, index))
    return int(ss.generate_state(1)[0])


@dataclass
class OnlineRunResult:
    mode: TrainingMode
    misalign: Misalignment
    delay: int
    freeze: int
    # checkpoint iterations -> {test seq id -> ConfidenceMap}
    confidences: Dict[int, Dict[int, fcn.ConfidenceMap]]
    skipped: List[int] = field(default_factory=list)


def run_online(
    dataset: SequenceDataset,
    test_ids,
    mode: TrainingMode,
    config: PipelineConfig,
    init_model: Optional[fcn.FcnModel] = None,
    misalign: Misalignment = Misalignment.ALIGNED,
    checkpoints=None,
) -> OnlineRunResult:
    """Per-sequence online training / tuning and inference.

    Test sequence i trains on the preceding frames of the sequence given
    by the misalignment map (always weak labels), dropping the newest
    `delay_frames` frames, then scores its own annotated frame at every
    checkpoint (final iteration included).
    """
    if mode not in ONLINE_MODES:
        raise ValueError(f"{mode} is not an online mode")
    if mode is not TrainingMode.ONL_SCRATCH and init_model is None:
        raise ValueError(f"{mode.value} requires an initial model")
    if not (0 <= config.delay_frames <= 8):
        raise ValueError("delay_frames must be in [0, 8]")
    test_ids = list(test_ids)
    assign = assignment_map(misalign, len(test_ids), config.seed)
    iters = config.scratch_iters if mode is TrainingMode.ONL_SCRATCH else config.tune_iters
    checkpoints = sorted(set(checkpoints or ()) | {iters})
    result = OnlineRunResult(mode, misalign, config.delay_frames, config.freeze_first, {c: {} for c in checkpoints})

    for i, seq in enumerate(test_ids):
        train_seq = test_ids[assign[i]]
        try:
            masks, _ = dataset.weak_chain(train_seq)
        except UnusableSequence:
            result.skipped.append(seq)
            continue
        keep = 10 - config.delay_frames
        pools = [
            _pool(dataset, train_seq, k, masks[k]) for k in range(keep) if masks[k] is not None
        ]
        if not pools:
            result.skipped.append(seq)
            continue
        if mode is TrainingMode.ONL_SCRATCH:
            model = fcn.init_model(_seq_seed(config.seed, 101, i))
        else:
            model = init_model.copy()
        tc = dataset.cfg.train_config(
            iters, _seq_seed(config.seed, 202, i), freeze_first=config.freeze_first, online=True
        )
        trained = fcn.train(model, pools, tc, checkpoints=checkpoints, allow_single_class=True)
        snaps = dict(trained.snapshots)
        snaps.setdefault(iters, trained.model)
        test_image = dataset.color(seq, 10)
        for c in checkpoints:
            result.confidences[c][seq] = fcn.infer_full(snaps[c], test_image)
    return result


def evaluate_confidences(
    dataset: SequenceDataset, conf_by_seq: Dict[int, fcn.ConfidenceMap], steps: int = 256
) -> PRCurve:
    """Pooled PR curve of confidence maps against the manual masks."""
    frames = []
    for seq, conf in sorted(conf_by_seq.items()):
        gt = dataset.gt(seq)
        if gt is None:
            raise ValueError(f"sequence {seq} has no manual mask to evaluate against")
        frames.append((conf, gt, dataset.eval_plane(seq)))
    return pr_curve(frames, dataset.cfg.rig, dataset.cfg.grid, steps=steps)


def evaluate_model(
    dataset: SequenceDataset, model: fcn.FcnModel, test_ids, steps: int = 256
) -> PRCurve:
    confs = {seq: fcn.infer_full(model, dataset.color(seq, 10)) for seq in test_ids}
    return evaluate_confidences(dataset, confs, steps=steps)


@dataclass
class ExperimentRow:
    mode: TrainingMode
    misalign: Misalignment = Misalignment.ALIGNED
    delay: int = 0
    freeze: int = 0
    checkpoints: Tuple[int, ...] = ()  # empty: only the mode's final iteration


@dataclass
class ReportRow:
    mode: str
    misalign: str
    delay: int
    freeze: int
    iters: int
    fmax: float
    ap: float


def run_experiment_matrix(
    dataset: SequenceDataset,
    rows: List[ExperimentRow],
    train_ids,
    test_ids,
    config: PipelineConfig,
    offline_models: Optional[Dict[TrainingMode, fcn.FcnModel]] = None,
) -> List[ReportRow]:
    """One report row per (mode, misalignment, delay, freeze, checkpoint).

    Offline models are trained once per mode and reused; pass
    `offline_models` to share them across calls.
    """
    cache = dict(offline_models or {})

    def offline(mode: TrainingMode) -> fcn.FcnModel:
        if mode not in cache:
            cache[mode] = train_offline(dataset, train_ids, mode, config)
        return cache[mode]

    report: List[ReportRow] = []
    for row in rows:
        if row.mode in OFFLINE_MODES:
            model = offline(row.mode)
            curve = evaluate_model(dataset, model, test_ids)
            report.append(
                ReportRow(row.mode.value, row.misalign.value, row.delay, row.freeze, config.offline_iters, curve.f_max, curve.ap)
            )
            continue
        init = None
        if row.mode is TrainingMode.ONL_TUNE_MAN:
            init = offline(TrainingMode.OFF_MAN)
        elif row.mode is TrainingMode.ONL_TUNE_SELF:
            init = offline(TrainingMode.OFF_SELF)
        cfg_row = PipelineConfig(
            seed=config.seed,
            offline_iters=config.offline_iters,
            scratch_iters=config.scratch_iters,
            tune_iters=config.tune_iters,
            freeze_first=row.freeze,
            delay_frames=row.delay,
        )
        run = run_online(
            dataset, test_ids, row.mode, cfg_row, init_model=init,
            misalign=row.misalign, checkpoints=row.checkpoints,
        )
        for iters in sorted(run.confidences):
            curve = evaluate_confidences(dataset, run.confidences[iters])
            report.append(
                ReportRow(row.mode.value, row.misalign.value, row.delay, row.freeze, iters, curve.f_max, curve.ap)
            )
    return report


def write_report(rows: List[ReportRow], path, dataset: Optional[SequenceDataset] = None, skipped=None):
    """Write the report CSV; the grid and AP definition go in the header."""
    lines = []
    if dataset is not None:
        g = dataset.cfg.grid
        lines.append(
            f"# bev_grid x=[{g.x_min},{g.x_max}) z=[{g.z_min},{g.z_max}) cell={g.cell}"
        )
    lines.append("# ap=11-point interpolated (PASCAL)")
    for seq in skipped or ():
        lines.append(f"# skipped sequence {seq}: unusable training data")
    lines.append("mode,misalign,delay,freeze,iters,fmax,ap")
    for r in rows:
        lines.append(f"{r.mode},{r.misalign},{r.delay},{r.freeze},{r.iters},{r.fmax:.6f},{r.ap:.6f}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
