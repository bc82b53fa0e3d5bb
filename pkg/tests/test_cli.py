import numpy as np
import pytest

from freespace import imgio, synth
from freespace.cli import main


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    root = tmp_path_factory.mktemp("clibench") / "data"
    synth.gen_benchmark(root, 4, 2, seed=17, width=64, height=48, noise_std=0.05, invalid_rate=0.02)
    return root


def _read(path):
    return path.read_bytes()


def test_synth_gen_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["synth", "gen", "--out", str(out), "--sequences", "4", "--shift-at", "2",
              "--seed", "9", "--width", "48", "--height", "32"])
    for rel in ("seq000/frame_00.ppm", "seq003/frame_10.dmap.pgm", "seq001/frame_10.gt.pgm", "manifest.csv", "rig.cfg"):
        assert _read(a / rel) == _read(b / rel)


def test_stereo_match_cli(tmp_path):
    rng = np.random.default_rng(0)
    left = imgio.ColorImage(90, 40, rng.integers(0, 256, (40, 90, 3)).astype(np.uint8))
    data = np.empty_like(left.data)
    data[:, :-4] = left.data[:, 4:]
    data[:, -4:] = left.data[:, -1:]
    right = imgio.ColorImage(90, 40, data)
    imgio.write_color_image(left, tmp_path / "l.ppm")
    imgio.write_color_image(right, tmp_path / "r.ppm")
    outs = []
    for name in ("d1.pgm", "d2.pgm"):
        main(["stereo", "match", "--left", str(tmp_path / "l.ppm"), "--right", str(tmp_path / "r.ppm"),
              "--out", str(tmp_path / name), "--max-disp", "12"])
        outs.append(_read(tmp_path / name))
    assert outs[0] == outs[1]
    disp = imgio.read_disparity(tmp_path / "d1.pgm")
    good = disp.valid[10:-10, 20:-10]
    vals = disp.disparity[10:-10, 20:-10][good]
    assert np.abs(vals - 4.0).max() <= 0.25


def test_stixel_run_cli(bench, tmp_path):
    args = ["stixel", "run", "--disparity", str(bench / "seq000" / "frame_10.dmap.pgm"),
            "--config", str(bench / "rig.cfg")]
    outs = []
    for tag in ("a", "b"):
        mask = tmp_path / f"m_{tag}.pgm"
        seg = tmp_path / f"s_{tag}.csv"
        main(args + ["--out-mask", str(mask), "--out-segments", str(seg)])
        outs.append((_read(mask), _read(seg)))
    assert outs[0] == outs[1]
    text = (tmp_path / "s_a.csv").read_text().splitlines()
    assert text[0] == "column,v_bottom,v_top,class,mu,cost"
    assert len(text) > 64  # at least one segment per column


def test_fcn_train_infer_tune_cli(bench, tmp_path):
    cfg = str(bench / "rig.cfg")
    models = []
    for tag in ("a", "b"):
        out = tmp_path / f"m_{tag}.fcn"
        main(["fcn", "train", "--dataset", str(bench), "--config", cfg, "--mode", "self",
              "--train-seqs", "0:2", "--iters", "30", "--seed", "3", "--out", str(out)])
        models.append(_read(out))
    assert models[0] == models[1]

    confs = []
    for tag in ("a", "b"):
        out = tmp_path / f"c_{tag}.conf.pgm"
        main(["fcn", "infer", "--model", str(tmp_path / "m_a.fcn"),
              "--image", str(bench / "seq002" / "frame_10.ppm"), "--out", str(out)])
        confs.append(_read(out))
    assert confs[0] == confs[1]

    tuned = []
    for tag in ("a", "b"):
        out = tmp_path / f"t_{tag}.fcn"
        main(["fcn", "tune", "--dataset", str(bench), "--config", cfg, "--init", str(tmp_path / "m_a.fcn"),
              "--seq", "2", "--iters", "20", "--seed", "4", "--out", str(out)])
        tuned.append(_read(out))
    assert tuned[0] == tuned[1]
    assert tuned[0] != models[0]


def test_run_online_and_eval_cli(bench, tmp_path):
    cfg = str(bench / "rig.cfg")
    init = tmp_path / "init.fcn"
    main(["fcn", "train", "--dataset", str(bench), "--config", cfg, "--mode", "self",
          "--train-seqs", "0:2", "--iters", "30", "--seed", "3", "--out", str(init)])
    reports = []
    for tag in ("a", "b"):
        rep = tmp_path / f"rep_{tag}.csv"
        conf_dir = tmp_path / f"conf_{tag}"
        main(["run-online", "--dataset", str(bench), "--config", cfg, "--mode", "tune-self",
              "--init", str(init), "--misalign", "permute", "--seed", "7", "--iters", "25",
              "--checkpoints", "10", "--test-seqs", "2:4", "--save-conf", str(conf_dir),
              "--out", str(rep)])
        reports.append(_read(rep))
    assert reports[0] == reports[1]
    lines = (tmp_path / "rep_a.csv").read_text().splitlines()
    data = [l for l in lines if l.startswith("tune-self")]
    assert len(data) == 2  # checkpoint 10 and final 25
    assert (tmp_path / "conf_a" / "seq002__frame_10.conf.pgm").is_file()

    curves = []
    for tag in ("a", "b"):
        out = tmp_path / f"curve_{tag}.csv"
        main(["eval", "--pred-dir", str(tmp_path / "conf_a"), "--gt-dir", str(bench),
              "--config", cfg, "--out", str(out), "--overlay-dir", str(tmp_path / f"ovl_{tag}")])
        curves.append(_read(out))
    assert curves[0] == curves[1]
    text = (tmp_path / "curve_a.csv").read_text().splitlines()
    assert text[0].startswith("# bev_grid")
    assert text[2] == "threshold,precision,recall,f"
    assert len(text) == 3 + 256
    overlay = imgio.read_color_image(tmp_path / "ovl_a" / "seq002__overlay.ppm")
    assert overlay.width == 64 and overlay.height == 48


def test_cli_unknown_config_key(tmp_path, bench):
    bad = tmp_path / "bad.cfg"
    bad.write_text((bench / "rig.cfg").read_text() + "nonsense_key=1\n")
    with pytest.raises(ValueError, match="unknown key"):
        main(["stixel", "run", "--disparity", str(bench / "seq000" / "frame_10.dmap.pgm"),
              "--config", str(bad), "--out-mask", str(tmp_path / "m.pgm"),
              "--out-segments", str(tmp_path / "s.csv")])
