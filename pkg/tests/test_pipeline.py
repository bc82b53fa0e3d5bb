import numpy as np
import pytest

from freespace import fcn, pipeline, synth
from freespace.config import parse_config
from freespace.errors import UnusableSequence
from freespace.geometry import GroundPlane, PlaneFitParams
from freespace.imgio import FREE, IGNORE, DisparityImage
from freespace.pipeline import (
    ExperimentRow,
    Misalignment,
    PipelineConfig,
    SequenceDataset,
    TrainingMode,
    assignment_map,
    generate_weak_labels,
    run_experiment_matrix,
    run_online,
    train_offline,
    write_report,
)
from freespace.stixel import StixelParams


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("bench") / "data"
    synth.gen_benchmark(root, 4, 2, seed=13, width=64, height=48, noise_std=0.08, invalid_rate=0.02)
    cfg = parse_config(root / "rig.cfg")
    return SequenceDataset(root, cfg)


def _fit_params():
    return PlaneFitParams(min_inliers=30, seed=0)


def test_weak_labels_flat_sequence():
    rig = synth.default_rig(64, 48)
    spec = synth.SceneSpec(rig=rig)
    frames = synth.gen_sequence(spec, seed=2)
    disparities = [d for _, d, _ in frames[:10]]
    masks, planes = generate_weak_labels(disparities, _fit_params(), StixelParams())
    assert len(masks) == 10
    for mask, disp in zip(masks, disparities):
        sky = ~disp.valid
        assert (mask.label[~sky] == FREE).all()
    alpha = rig.baseline / spec.cam_height
    assert planes[-1].alpha == pytest.approx(alpha, abs=0.01)


def test_weak_labels_box_sequence():
    rig = synth.default_rig(64, 48)
    box = synth.BoxSpec(x=0.0, z=10.0, width=2.0, height=1.0)
    spec = synth.SceneSpec(rig=rig, boxes=[box])
    frames = synth.gen_sequence(spec, seed=2)
    disparities = [d for _, d, _ in frames[:10]]
    masks, planes = generate_weak_labels(disparities, _fit_params(), StixelParams())
    for k, (mask, (_, _, gt)) in enumerate(zip(masks, frames)):
        box_px = gt.label == 0
        box_px &= disparities[k].valid
        assert (mask.label[box_px] == 0).mean() > 0.9


def test_weak_labels_all_invalid_unusable():
    zero = np.zeros((48, 64), np.float32)
    disparities = [DisparityImage(64, 48, zero, np.zeros((48, 64), bool)) for _ in range(10)]
    with pytest.raises(UnusableSequence):
        generate_weak_labels(disparities, _fit_params(), StixelParams())


def test_assignment_maps():
    assert assignment_map(Misalignment.ALIGNED, 3, 0).tolist() == [0, 1, 2]
    assert assignment_map(Misalignment.SHIFT_PLUS_1, 3, 0).tolist() == [1, 2, 0]
    assert assignment_map(Misalignment.SHIFT_MINUS_1, 3, 0).tolist() == [2, 0, 1]
    p1 = assignment_map(Misalignment.PERMUTE, 6, 7)
    p2 = assignment_map(Misalignment.PERMUTE, 6, 7)
    assert p1.tolist() == p2.tolist()
    assert p1.tolist() != list(range(6))
    assert sorted(p1.tolist()) == list(range(6))
    with pytest.raises(ValueError):
        assignment_map(Misalignment.PERMUTE, 1, 0)


def test_train_offline_modes_and_pool_counts(bench, monkeypatch):
    seen = {}
    real_train = fcn.train

    def spy(model, pools, config, **kw):
        seen["pools"] = len(pools)
        return real_train(model, pools, config, **kw)

    monkeypatch.setattr(fcn, "train", spy)
    cfg = PipelineConfig(seed=1, offline_iters=5)
    train_offline(bench, [0, 1], TrainingMode.OFF_MAN, cfg)
    assert seen["pools"] == 2
    train_offline(bench, [0, 1], TrainingMode.OFF_SELF, cfg)
    assert seen["pools"] == 2
    train_offline(bench, [0, 1], TrainingMode.OFF_SELF_ALL, cfg)
    assert seen["pools"] == 22  # 11x more frames per sequence


def test_train_offline_requires_online_mode_guard(bench):
    cfg = PipelineConfig(seed=1, offline_iters=5)
    with pytest.raises(ValueError, match="offline"):
        train_offline(bench, [0], TrainingMode.ONL_SCRATCH, cfg)
    with pytest.raises(ValueError, match="online"):
        run_online(bench, [2, 3], TrainingMode.OFF_MAN, cfg)


def test_run_online_tune_requires_init(bench):
    cfg = PipelineConfig(seed=1, tune_iters=5)
    with pytest.raises(ValueError, match="initial model"):
        run_online(bench, [2, 3], TrainingMode.ONL_TUNE_SELF, cfg)


def test_run_online_shapes_and_checkpoints(bench):
    cfg = PipelineConfig(seed=1, scratch_iters=40)
    run = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, cfg, checkpoints=[20])
    assert sorted(run.confidences) == [20, 40]
    for it, by_seq in run.confidences.items():
        assert sorted(by_seq) == [2, 3]
        for conf in by_seq.values():
            assert conf.values.shape == (48, 64)
    assert run.skipped == []


def test_run_online_delay_uses_older_frames(bench, monkeypatch):
    used = []
    real_pool = pipeline._pool

    def spy(dataset, seq, frame, mask):
        used.append(frame)
        return real_pool(dataset, seq, frame, mask)

    monkeypatch.setattr(pipeline, "_pool", spy)
    cfg = PipelineConfig(seed=1, scratch_iters=4, delay_frames=3)
    run_online(bench, [2], TrainingMode.ONL_SCRATCH, cfg)
    assert used and max(used) == 6  # newest three preceding frames dropped
    with pytest.raises(ValueError, match="delay"):
        run_online(bench, [2], TrainingMode.ONL_SCRATCH, PipelineConfig(seed=1, delay_frames=9))


def test_run_online_deterministic(bench):
    cfg = PipelineConfig(seed=3, scratch_iters=30)
    a = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, cfg)
    b = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, cfg)
    for it in a.confidences:
        for seq in a.confidences[it]:
            assert np.array_equal(a.confidences[it][seq].values, b.confidences[it][seq].values)


def test_delay_zero_freeze_zero_reproduce_base(bench):
    base = PipelineConfig(seed=3, scratch_iters=25)
    explicit = PipelineConfig(seed=3, scratch_iters=25, freeze_first=0, delay_frames=0)
    a = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, base)
    b = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, explicit)
    for it in a.confidences:
        for seq in a.confidences[it]:
            assert np.array_equal(a.confidences[it][seq].values, b.confidences[it][seq].values)


def test_misalignment_changes_training_but_not_eval_frame(bench):
    cfg = PipelineConfig(seed=3, scratch_iters=30)
    aligned = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, cfg)
    shifted = run_online(bench, [2, 3], TrainingMode.ONL_SCRATCH, cfg, misalign=Misalignment.SHIFT_PLUS_1)
    same = all(
        np.array_equal(aligned.confidences[30][s].values, shifted.confidences[30][s].values)
        for s in (2, 3)
    )
    assert not same


def test_experiment_matrix_table_layout(bench):
    cfg = PipelineConfig(seed=1, offline_iters=10, scratch_iters=10, tune_iters=10)
    rows = [
        ExperimentRow(TrainingMode.OFF_MAN),
        ExperimentRow(TrainingMode.ONL_SCRATCH, Misalignment.ALIGNED),
        ExperimentRow(TrainingMode.ONL_SCRATCH, Misalignment.SHIFT_PLUS_1),
        ExperimentRow(TrainingMode.ONL_SCRATCH, Misalignment.PERMUTE),
        ExperimentRow(TrainingMode.ONL_TUNE_SELF, Misalignment.ALIGNED),
        ExperimentRow(TrainingMode.ONL_TUNE_SELF, Misalignment.SHIFT_PLUS_1),
        ExperimentRow(TrainingMode.ONL_TUNE_SELF, Misalignment.PERMUTE),
    ]
    report = run_experiment_matrix(bench, rows, [0, 1], [2, 3], cfg)
    assert len(report) == 7  # Table-1 column layout: offline + 3 scratch + 3 tuned
    assert [r.mode for r in report][:1] == ["off-man"]
    assert all(0.0 <= r.fmax <= 1.0 and 0.0 <= r.ap <= 1.0 for r in report)


def test_experiment_matrix_checkpoints_and_freeze(bench):
    cfg = PipelineConfig(seed=1, offline_iters=10, scratch_iters=200, tune_iters=200)
    rows = [ExperimentRow(TrainingMode.ONL_SCRATCH, checkpoints=(50, 100, 150))]
    report = run_experiment_matrix(bench, rows, [0, 1], [2, 3], cfg)
    assert [r.iters for r in report] == [50, 100, 150, 200]
    rows = [ExperimentRow(TrainingMode.ONL_TUNE_SELF, freeze=f) for f in range(6)]
    report = run_experiment_matrix(bench, rows, [0, 1], [2, 3], cfg)
    assert len(report) == 6
    assert [r.freeze for r in report] == [0, 1, 2, 3, 4, 5]


def test_report_csv_format(bench, tmp_path):
    cfg = PipelineConfig(seed=1, offline_iters=10)
    report = run_experiment_matrix(bench, [ExperimentRow(TrainingMode.OFF_SELF)], [0, 1], [2, 3], cfg)
    out = tmp_path / "report.csv"
    write_report(report, out, dataset=bench, skipped=[9])
    text = out.read_text().splitlines()
    assert text[0].startswith("# bev_grid")
    assert any("11-point" in line for line in text)
    assert any("skipped sequence 9" in line for line in text)
    header = [line for line in text if line.startswith("mode,")][0]
    assert header == "mode,misalign,delay,freeze,iters,fmax,ap"
    data = [line for line in text if line.startswith("off-self")]
    assert len(data) == 1 and len(data[0].split(",")) == 7
