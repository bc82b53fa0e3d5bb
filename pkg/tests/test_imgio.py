import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freespace import fcn, imgio
from freespace.errors import FormatError
from freespace.imgio import FREE, IGNORE, OBSTACLE


def test_read_color_image_p6(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0]))
    img = imgio.read_color_image(p)
    assert (img.width, img.height) == (2, 1)
    assert img.data.tolist() == [[[255, 0, 0], [0, 255, 0]]]


def test_read_color_image_rejects_p5(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P5\n2 1\n255\n" + bytes([1, 2]))
    with pytest.raises(FormatError, match="P6"):
        imgio.read_color_image(p)


def test_read_color_image_rejects_zero_width(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P6\n0 1\n255\n")
    with pytest.raises(FormatError):
        imgio.read_color_image(p)


def test_read_color_image_rejects_truncated_and_trailing(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P6\n2 1\n255\n" + bytes(5))
    with pytest.raises(FormatError, match="truncated"):
        imgio.read_color_image(p)
    p.write_bytes(b"P6\n2 1\n255\n" + bytes(7))
    with pytest.raises(FormatError, match="trailing"):
        imgio.read_color_image(p)


def test_read_color_image_rejects_wrong_maxval(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P6\n1 1\n254\n" + bytes(3))
    with pytest.raises(FormatError, match="maxval"):
        imgio.read_color_image(p)


def test_color_image_header_comments(tmp_path):
    p = tmp_path / "t.ppm"
    p.write_bytes(b"P6\n# a comment\n2 1\n# another\n255\n" + bytes(6))
    img = imgio.read_color_image(p)
    assert (img.width, img.height) == (2, 1)


def test_disparity_scale_and_validity(tmp_path):
    p = tmp_path / "d.pgm"
    raw = np.array([[160, 0]], dtype=">u2")
    p.write_bytes(b"P5\n2 1\n65535\n" + raw.tobytes())
    d = imgio.read_disparity(p, scale=16)
    assert d.disparity[0, 0] == pytest.approx(10.0)
    assert bool(d.valid[0, 0]) is True
    assert d.disparity[0, 1] == 0.0
    assert bool(d.valid[0, 1]) is False


def test_disparity_rejects_zero_scale(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n1 1\n65535\n" + bytes(2))
    with pytest.raises(ValueError, match="scale"):
        imgio.read_disparity(p, scale=0)


def test_disparity_rejects_8bit_maxval(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n1 1\n255\n" + bytes(1))
    with pytest.raises(FormatError, match="65535"):
        imgio.read_disparity(p)


def test_disparity_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    disp = (rng.integers(0, 1000, (6, 7)) / 16.0).astype(np.float32)
    valid = rng.random((6, 7)) > 0.3
    disp[~valid] = 0.0
    d = imgio.DisparityImage(7, 6, disp, valid, 16)
    imgio.write_disparity(d, tmp_path / "d.pgm")
    back = imgio.read_disparity(tmp_path / "d.pgm", 16)
    # values quantized to 1/16 round-trip exactly; zero raw means invalid
    assert np.array_equal(back.valid, valid & (disp > 0))
    assert np.allclose(back.disparity[back.valid], disp[back.valid])


def test_label_mask_decoding(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\n3 1\n255\n" + bytes([255, 0, 128]))
    m = imgio.read_label_mask(p)
    assert m.label.tolist() == [[FREE, OBSTACLE, IGNORE]]


def test_label_mask_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    lab = rng.choice([FREE, OBSTACLE, IGNORE], size=(8, 8)).astype(np.uint8)
    imgio.write_label_mask(imgio.LabelMask(8, 8, lab), tmp_path / "m.pgm")
    back = imgio.read_label_mask(tmp_path / "m.pgm")
    assert np.array_equal(back.label, lab)


def test_label_mask_rejects_bad_value(tmp_path):
    p = tmp_path / "m.pgm"
    p.write_bytes(b"P5\n3 1\n255\n" + bytes([7, 0, 128]))
    with pytest.raises(FormatError, match="offset 0"):
        imgio.read_label_mask(p)


def test_model_round_trip_bitwise(tmp_path):
    model = fcn.init_model(1)
    imgio.serialize_model(model, tmp_path / "m.fcn")
    back = imgio.deserialize_model(tmp_path / "m.fcn")
    for name in fcn.LAYER_NAMES:
        assert np.array_equal(model.blobs[name][0], back.blobs[name][0])
        assert np.array_equal(model.blobs[name][1], back.blobs[name][1])


def test_model_param_counts():
    # per-layer parameter counts of the fixed architecture
    assert fcn.PARAM_COUNTS == {
        "conv1": 1776,
        "conv2": 1806,
        "full1": 336,
        "full2": 9792,
        "full3": 193,
    }
    assert sum(fcn.PARAM_COUNTS.values()) == 13903


def test_model_truncated_payload(tmp_path):
    model = fcn.init_model(1)
    imgio.serialize_model(model, tmp_path / "m.fcn")
    blob = (tmp_path / "m.fcn").read_bytes()
    (tmp_path / "short.fcn").write_bytes(blob[:-100])
    with pytest.raises(FormatError, match="truncated"):
        imgio.deserialize_model(tmp_path / "short.fcn")


def test_model_bad_magic(tmp_path):
    (tmp_path / "bad.fcn").write_bytes(b"NOPE\nEND\n")
    with pytest.raises(FormatError):
        imgio.deserialize_model(tmp_path / "bad.fcn")


def test_model_header_must_match_architecture(tmp_path):
    model = fcn.init_model(1)
    imgio.serialize_model(model, tmp_path / "m.fcn")
    blob = (tmp_path / "m.fcn").read_bytes()
    (tmp_path / "warp.fcn").write_bytes(blob.replace(b"conv1.weight 12 3 7 7", b"conv1.weight 12 3 7 8", 1))
    with pytest.raises(FormatError, match="architecture"):
        imgio.deserialize_model(tmp_path / "warp.fcn")


def test_confidence_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    values = rng.uniform(-1, 1, (9, 11)).astype(np.float32)
    imgio.write_confidence(fcn.ConfidenceMap(values), tmp_path / "c.pgm")
    back = imgio.read_confidence(tmp_path / "c.pgm")
    assert np.abs(back.values - values).max() < 2.0 / 65535.0


def _write_sequence(seq_dir, frames=range(11), gt=True):
    seq_dir.mkdir()
    for k in frames:
        (seq_dir / f"frame_{k:02d}.ppm").write_bytes(b"P6\n1 1\n255\n" + bytes(3))
        (seq_dir / f"frame_{k:02d}.dmap.pgm").write_bytes(b"P5\n1 1\n65535\n" + bytes(2))
    if gt:
        (seq_dir / "frame_10.gt.pgm").write_bytes(b"P5\n1 1\n255\n" + bytes([255]))


def test_discover_sequences_complete(tmp_path):
    for i in range(3):
        _write_sequence(tmp_path / f"seq{i:03d}")
    ss = imgio.discover_sequences(tmp_path)
    assert [s.name for s in ss.sequences] == ["seq000", "seq001", "seq002"]
    assert not ss.warnings
    assert all(len(s.color) == 11 for s in ss.sequences)


def test_discover_sequences_skips_incomplete(tmp_path):
    _write_sequence(tmp_path / "seq000")
    _write_sequence(tmp_path / "seq001")
    (tmp_path / "seq001" / "frame_03.ppm").unlink()
    _write_sequence(tmp_path / "seq002")
    ss = imgio.discover_sequences(tmp_path)
    assert [s.name for s in ss.sequences] == ["seq000", "seq002"]
    assert len(ss.warnings) == 1 and "frame_03.ppm" in ss.warnings[0]


def test_discover_sequences_empty(tmp_path):
    ss = imgio.discover_sequences(tmp_path)
    assert len(ss) == 0 and not ss.warnings


@settings(max_examples=25, deadline=None)
@given(
    w=st.integers(1, 9),
    h=st.integers(1, 9),
    data=st.data(),
)
def test_ppm_round_trip_property(tmp_path_factory, w, h, data):
    raw = data.draw(st.binary(min_size=w * h * 3, max_size=w * h * 3))
    img = imgio.ColorImage(w, h, np.frombuffer(raw, np.uint8).reshape(h, w, 3).copy())
    p = tmp_path_factory.mktemp("pnm") / "x.ppm"
    imgio.write_color_image(img, p)
    back = imgio.read_color_image(p)
    assert np.array_equal(back.data, img.data)
