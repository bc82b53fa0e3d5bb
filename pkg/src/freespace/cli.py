"""Command-line interface.

Subcommands: `synth gen`, `stereo match`, `stixel run`, `fcn train`,
`fcn tune`, `fcn infer`, `run-online`, `eval`. Every command is
deterministic for fixed seeds: rerunning with identical arguments
produces byte-identical outputs.
"""

import argparse
import sys
from pathlib import Path

from freespace import fcn, imgio, pipeline, synth
from freespace.config import parse_config
from freespace.errors import FitFailed
from freespace.evaluation import pr_curve, render_overlay
from freespace.geometry import fit_ground_plane
from freespace.stereo import BlockMatchParams, block_match
from freespace.stixel import GROUND, labeling_to_mask, stixel_image


def _parse_ids(spec: str, n: int):
    """Sequence id list: 'a:b' slice or comma-separated indices."""
    if spec == "all":
        return list(range(n))
    if ":" in spec:
        a, _, b = spec.partition(":")
        return list(range(int(a), int(b)))
    return [int(t) for t in spec.split(",") if t]


def _cmd_synth_gen(args):
    synth.gen_benchmark(
        args.out,
        n_sequences=args.sequences,
        domain_shift_at=args.shift_at if args.shift_at is not None else args.sequences,
        seed=args.seed,
        width=args.width,
        height=args.height,
        noise_std=args.noise_std,
        invalid_rate=args.invalid_rate,
    )
    print(f"wrote {args.sequences} sequences under {args.out}")


def _cmd_stereo_match(args):
    left = imgio.read_color_image(args.left)
    right = imgio.read_color_image(args.right)
    params = BlockMatchParams(window=args.window, max_disparity=args.max_disp, lr_tolerance=args.lr_tol)
    disp = block_match(left, right, params)
    imgio.write_disparity(disp, args.out)
    print(f"wrote {args.out} ({int(disp.valid.sum())} valid px)")


def _cmd_stixel_run(args):
    cfg = parse_config(args.config)
    disp = imgio.read_disparity(args.disparity, cfg.disparity_scale)
    try:
        plane = fit_ground_plane(disp, cfg.fit)
    except FitFailed:
        if cfg.default_plane is None:
            raise
        plane = cfg.default_plane
    labelings = stixel_image(disp, plane, cfg.stixel)
    mask = labeling_to_mask(labelings, disp.disparity.shape)
    imgio.write_label_mask(mask, args.out_mask)
    with open(args.out_segments, "w") as f:
        f.write("column,v_bottom,v_top,class,mu,cost\n")
        for lab in labelings:
            tables_cost = lab.total_cost
            for seg in lab.segments:
                cls = "ground" if seg.cls == GROUND else "obstacle"
                f.write(f"{lab.column},{seg.v_bottom},{seg.v_top},{cls},{seg.mu:.4f},{tables_cost:.6f}\n")
    print(f"wrote {args.out_mask} and {args.out_segments}")


def _dataset(args):
    cfg = parse_config(args.config)
    return pipeline.SequenceDataset(args.dataset, cfg)


def _cmd_fcn_train(args):
    ds = _dataset(args)
    mode = {
        "man": pipeline.TrainingMode.OFF_MAN,
        "self": pipeline.TrainingMode.OFF_SELF,
        "self-all": pipeline.TrainingMode.OFF_SELF_ALL,
    }[args.mode]
    config = pipeline.PipelineConfig.from_run_config(ds.cfg)
    if args.iters is not None:
        config.offline_iters = args.iters
    if args.seed is not None:
        config.seed = args.seed
    train_ids = _parse_ids(args.train_seqs, len(ds))
    model = pipeline.train_offline(ds, train_ids, mode, config)
    imgio.serialize_model(model, args.out)
    print(f"wrote {args.out}")


def _cmd_fcn_tune(args):
    ds = _dataset(args)
    model = imgio.deserialize_model(args.init)
    masks, _ = ds.weak_chain(args.seq)
    keep = 10 - args.delay
    pools = [
        fcn.make_pool(ds.color(args.seq, k), masks[k]) for k in range(keep) if masks[k] is not None
    ]
    tc = ds.cfg.train_config(args.iters, args.seed, freeze_first=args.freeze, online=True)
    result = fcn.train(model, pools, tc)
    imgio.serialize_model(result.model, args.out)
    print(f"wrote {args.out}")


def _cmd_fcn_infer(args):
    model = imgio.deserialize_model(args.model)
    image = imgio.read_color_image(args.image)
    conf = fcn.infer_full(model, image)
    imgio.write_confidence(conf, args.out)
    print(f"wrote {args.out}")


def _cmd_run_online(args):
    ds = _dataset(args)
    mode = {
        "scratch": pipeline.TrainingMode.ONL_SCRATCH,
        "tune-man": pipeline.TrainingMode.ONL_TUNE_MAN,
        "tune-self": pipeline.TrainingMode.ONL_TUNE_SELF,
    }[args.mode]
    misalign = {
        "aligned": pipeline.Misalignment.ALIGNED,
        "plus1": pipeline.Misalignment.SHIFT_PLUS_1,
        "minus1": pipeline.Misalignment.SHIFT_MINUS_1,
        "permute": pipeline.Misalignment.PERMUTE,
    }[args.misalign]
    config = pipeline.PipelineConfig.from_run_config(
        ds.cfg, freeze_first=args.freeze, delay_frames=args.delay
    )
    if args.seed is not None:
        config.seed = args.seed
    if args.iters is not None:
        config.scratch_iters = args.iters
        config.tune_iters = args.iters
    init = imgio.deserialize_model(args.init) if args.init else None
    checkpoints = [int(t) for t in args.checkpoints.split(",") if t] if args.checkpoints else None
    test_ids = _parse_ids(args.test_seqs, len(ds))
    run = pipeline.run_online(
        ds, test_ids, mode, config, init_model=init, misalign=misalign, checkpoints=checkpoints
    )
    rows = []
    for iters in sorted(run.confidences):
        curve = pipeline.evaluate_confidences(ds, run.confidences[iters])
        rows.append(
            pipeline.ReportRow(mode.value, misalign.value, args.delay, args.freeze, iters, curve.f_max, curve.ap)
        )
    pipeline.write_report(rows, args.out, dataset=ds, skipped=run.skipped)
    if args.save_conf:
        out_dir = Path(args.save_conf)
        out_dir.mkdir(parents=True, exist_ok=True)
        final = max(run.confidences)
        for seq, conf in sorted(run.confidences[final].items()):
            name = ds.sequences.sequences[seq].name
            imgio.write_confidence(conf, out_dir / f"{name}__frame_10.conf.pgm")
    print(f"wrote {args.out}")


def _cmd_eval(args):
    cfg = parse_config(args.config)
    gt_root = Path(args.gt_dir)
    pred_root = Path(args.pred_dir)
    frames = []
    pairs = []
    for gt_path in sorted(gt_root.rglob("*.gt.pgm")):
        seq_name = gt_path.parent.name
        pred = pred_root / f"{seq_name}__{gt_path.name.replace('.gt.pgm', '.conf.pgm')}"
        if not pred.is_file():
            print(f"warning: no prediction for {gt_path}, skipped", file=sys.stderr)
            continue
        gt = imgio.read_label_mask(gt_path)
        conf = imgio.read_confidence(pred)
        disp_path = gt_path.with_name(gt_path.name.replace(".gt.pgm", ".dmap.pgm"))
        if disp_path.is_file():
            disp = imgio.read_disparity(disp_path, cfg.disparity_scale)
            try:
                plane = fit_ground_plane(disp, cfg.fit)
            except FitFailed:
                plane = cfg.default_plane
        else:
            plane = cfg.default_plane
        if plane is None:
            raise SystemExit(f"{gt_path}: no disparity beside the mask and no plane.* in config")
        frames.append((conf, gt, plane))
        pairs.append((gt_path, conf, gt, plane))
    if not frames:
        raise SystemExit("no evaluable frames found")
    curve = pr_curve(frames, cfg.rig, cfg.grid)
    with open(args.out, "w") as f:
        g = cfg.grid
        f.write(f"# bev_grid x=[{g.x_min},{g.x_max}) z=[{g.z_min},{g.z_max}) cell={g.cell}\n")
        f.write("# ap=11-point interpolated (PASCAL)\n")
        f.write("threshold,precision,recall,f\n")
        for tau, p, r, fv in curve.points:
            f.write(f"{tau:.6f},{p:.6f},{r:.6f},{fv:.6f}\n")
    print(f"fmax={curve.f_max:.6f},ap={curve.ap:.6f}")
    if args.overlay_dir:
        out_dir = Path(args.overlay_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        best_tau = max(curve.points, key=lambda t: t[3])[0]
        for gt_path, conf, gt, plane in pairs:
            image = imgio.read_color_image(gt_path.with_name("frame_10.ppm"))
            overlay = render_overlay(image, conf, gt, best_tau)
            imgio.write_color_image(overlay, out_dir / f"{gt_path.parent.name}__overlay.ppm")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freespace", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthetic benchmark generator")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    g = ssub.add_parser("gen", help="generate a benchmark tree")
    g.add_argument("--out", required=True)
    g.add_argument("--sequences", type=int, default=8)
    g.add_argument("--shift-at", type=int, default=None, help="first style-B sequence (default: none)")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--width", type=int, default=128)
    g.add_argument("--height", type=int, default=96)
    g.add_argument("--noise-std", type=float, default=0.0)
    g.add_argument("--invalid-rate", type=float, default=0.0)
    g.set_defaults(func=_cmd_synth_gen)

    p = sub.add_parser("stereo", help="block-matching disparity")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    m = ssub.add_parser("match", help="match a rectified pair")
    m.add_argument("--left", required=True)
    m.add_argument("--right", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--max-disp", type=int, default=64)
    m.add_argument("--window", type=int, default=9)
    m.add_argument("--lr-tol", type=int, default=1)
    m.set_defaults(func=_cmd_stereo_match)

    p = sub.add_parser("stixel", help="stixel segmentation")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    r = ssub.add_parser("run", help="segment one disparity map")
    r.add_argument("--disparity", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--out-mask", required=True)
    r.add_argument("--out-segments", required=True)
    r.set_defaults(func=_cmd_stixel_run)

    p = sub.add_parser("fcn", help="network training and inference")
    ssub = p.add_subparsers(dest="subcommand", required=True)
    t = ssub.add_parser("train", help="offline training")
    t.add_argument("--dataset", required=True)
    t.add_argument("--config", required=True)
    t.add_argument("--mode", choices=("man", "self", "self-all"), required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--train-seqs", default="all")
    t.add_argument("--iters", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=_cmd_fcn_train)
    u = ssub.add_parser("tune", help="tune a model on one sequence's weak labels")
    u.add_argument("--dataset", required=True)
    u.add_argument("--config", required=True)
    u.add_argument("--init", required=True)
    u.add_argument("--seq", type=int, required=True)
    u.add_argument("--iters", type=int, default=2000)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--freeze", type=int, default=0)
    u.add_argument("--delay", type=int, default=0)
    u.add_argument("--out", required=True)
    u.set_defaults(func=_cmd_fcn_tune)
    i = ssub.add_parser("infer", help="confidence map for one image")
    i.add_argument("--model", required=True)
    i.add_argument("--image", required=True)
    i.add_argument("--out", required=True)
    i.set_defaults(func=_cmd_fcn_infer)

    r = sub.add_parser("run-online", help="online training experiment")
    r.add_argument("--dataset", required=True)
    r.add_argument("--config", required=True)
    r.add_argument("--mode", choices=("scratch", "tune-man", "tune-self"), required=True)
    r.add_argument("--init", default=None)
    r.add_argument("--misalign", choices=("aligned", "plus1", "minus1", "permute"), default="aligned")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--iters", type=int, default=None)
    r.add_argument("--delay", type=int, default=0)
    r.add_argument("--freeze", type=int, default=0)
    r.add_argument("--checkpoints", default=None)
    r.add_argument("--test-seqs", default="all")
    r.add_argument("--save-conf", default=None)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_run_online)

    e = sub.add_parser("eval", help="BEV evaluation of saved confidence maps")
    e.add_argument("--pred-dir", required=True)
    e.add_argument("--gt-dir", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--overlay-dir", default=None)
    e.set_defaults(func=_cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
