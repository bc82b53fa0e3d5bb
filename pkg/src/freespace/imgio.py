"""Deterministic, bit-exact file I/O and dataset discovery.

Only binary PPM/PGM are supported: P6 (8-bit RGB) for color images, P5
16-bit for disparity and confidence maps, P5 8-bit for ternary label
masks. Model parameters live in an ASCII-header container ("FCNFS1").
Multi-byte PGM samples are big-endian per the PGM convention; the model
payload is little-endian IEEE-754 float32.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from freespace.errors import FormatError

# Label mask alphabet (also the on-disk 8-bit encoding).
FREE = 255
OBSTACLE = 0
IGNORE = 128

MODEL_MAGIC = "FCNFS1"

# Blob layout of the network container, in header/payload order.
MODEL_SCHEMA = (
    ("conv1.weight", (12, 3, 7, 7)),
    ("conv1.bias", (12,)),
    ("conv2.weight", (6, 12, 5, 5)),
    ("conv2.bias", (6,)),
    ("full1.weight", (48, 6, 1, 1)),
    ("full1.bias", (48,)),
    ("full2.weight", (192, 50, 1, 1)),
    ("full2.bias", (192,)),
    ("full3.weight", (1, 192, 1, 1)),
    ("full3.bias", (1,)),
)


@dataclass
class ColorImage:
    """8-bit RGB image; data is (height, width, 3) uint8, row-major."""

    width: int
    height: int
    data: np.ndarray


@dataclass
class DisparityImage:
    """Per-pixel disparity with validity; zero raw samples are invalid."""

    width: int
    height: int
    disparity: np.ndarray  # (H, W) float32, pixels of horizontal shift
    valid: np.ndarray  # (H, W) bool
    scale: int = 16


@dataclass
class LabelMask:
    """Ternary mask over {FREE, OBSTACLE, IGNORE} stored as uint8."""

    width: int
    height: int
    label: np.ndarray  # (H, W) uint8 with values in {0, 128, 255}


@dataclass
class Sequence:
    """One annotated frame plus its ten preceding frames."""

    name: str
    color: list  # 11 paths, index 10 is the annotated frame
    disparity: list  # 11 paths
    gt: Optional[Path]  # manual mask of the annotated frame, if present

    N_PRECEDING = 10

    @property
    def preceding(self):
        return list(range(self.N_PRECEDING))

    @property
    def annotated(self):
        return self.N_PRECEDING


@dataclass
class SequenceSet:
    sequences: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.sequences)


def _parse_pnm_header(buf: bytes, magic: bytes, path) -> tuple[int, int, int, int]:
    """Parse a binary PNM header, returning (width, height, maxval, offset)."""
    if buf[:2] != magic:
        raise FormatError(f"{path}: expected {magic.decode()} magic, got {buf[:2]!r}")
    i = 2
    fields = []
    while len(fields) < 3:
        if i >= len(buf):
            raise FormatError(f"{path}: truncated header")
        c = buf[i : i + 1]
        if c in b" \t\r\n":
            i += 1
        elif c == b"#":
            j = buf.find(b"\n", i)
            i = len(buf) if j < 0 else j + 1
        elif c.isdigit():
            j = i
            while j < len(buf) and buf[j : j + 1].isdigit():
                j += 1
            fields.append(int(buf[i:j]))
            i = j
        else:
            raise FormatError(f"{path}: unexpected byte {c!r} in header")
    if i >= len(buf) or buf[i : i + 1] not in b" \t\r\n":
        raise FormatError(f"{path}: missing whitespace after maxval")
    i += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: non-positive dimensions {width}x{height}")
    return width, height, maxval, i


def _payload(buf: bytes, offset: int, nbytes: int, path) -> bytes:
    body = buf[offset:]
    if len(body) < nbytes:
        raise FormatError(f"{path}: truncated payload, expected {nbytes} bytes, got {len(body)}")
    if len(body) > nbytes:
        raise FormatError(f"{path}: {len(body) - nbytes} trailing bytes after payload")
    return body


def read_color_image(path) -> ColorImage:
    """Read a binary P6 PPM with maxval 255; pixels are copied verbatim."""
    buf = Path(path).read_bytes()
    w, h, maxval, off = _parse_pnm_header(buf, b"P6", path)
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    body = _payload(buf, off, w * h * 3, path)
    data = np.frombuffer(body, np.uint8).reshape(h, w, 3).copy()
    return ColorImage(w, h, data)


def write_color_image(img: ColorImage, path) -> None:
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (img.width, img.height))
        f.write(np.ascontiguousarray(img.data, np.uint8).tobytes())


def read_disparity(path, scale: int = 16) -> DisparityImage:
    """Read a 16-bit P5 PGM disparity map; disparity = raw / scale."""
    if scale <= 0:
        raise ValueError(f"disparity scale must be positive, got {scale}")
    buf = Path(path).read_bytes()
    w, h, maxval, off = _parse_pnm_header(buf, b"P5", path)
    if maxval != 65535:
        raise FormatError(f"{path}: maxval must be 65535, got {maxval}")
    body = _payload(buf, off, w * h * 2, path)
    raw = np.frombuffer(body, ">u2").reshape(h, w)
    disparity = (raw.astype(np.float64) / scale).astype(np.float32)
    valid = raw > 0
    disparity[~valid] = 0.0
    return DisparityImage(w, h, disparity, valid, scale)


def write_disparity(disp: DisparityImage, path) -> None:
    raw = np.rint(disp.disparity.astype(np.float64) * disp.scale)
    raw = np.clip(raw, 0, 65535).astype(">u2")
    raw[~disp.valid] = 0
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (disp.width, disp.height))
        f.write(raw.tobytes())


def read_label_mask(path) -> LabelMask:
    """Read an 8-bit P5 PGM mask; 255=FREE, 0=OBSTACLE, 128=IGNORE."""
    buf = Path(path).read_bytes()
    w, h, maxval, off = _parse_pnm_header(buf, b"P5", path)
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    body = _payload(buf, off, w * h, path)
    label = np.frombuffer(body, np.uint8)
    bad = (label != FREE) & (label != OBSTACLE) & (label != IGNORE)
    if bad.any():
        idx = int(np.nonzero(bad)[0][0])
        raise FormatError(f"{path}: invalid label value {label[idx]} at offset {idx}")
    return LabelMask(w, h, label.reshape(h, w).copy())


def write_label_mask(mask: LabelMask, path) -> None:
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (mask.width, mask.height))
        f.write(np.ascontiguousarray(mask.label, np.uint8).tobytes())


def read_confidence(path):
    """Read a confidence map (16-bit P5); samples map linearly to [-1, 1]."""
    buf = Path(path).read_bytes()
    w, h, maxval, off = _parse_pnm_header(buf, b"P5", path)
    if maxval != 65535:
        raise FormatError(f"{path}: maxval must be 65535, got {maxval}")
    body = _payload(buf, off, w * h * 2, path)
    raw = np.frombuffer(body, ">u2").reshape(h, w)
    values = (raw.astype(np.float64) / 65535.0 * 2.0 - 1.0).astype(np.float32)
    from freespace.fcn import ConfidenceMap

    return ConfidenceMap(values)


def write_confidence(conf, path) -> None:
    values = np.asarray(conf.values, np.float64)
    raw = np.rint((np.clip(values, -1.0, 1.0) + 1.0) / 2.0 * 65535.0).astype(">u2")
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n65535\n" % (values.shape[1], values.shape[0]))
        f.write(raw.tobytes())


def serialize_model(model, path) -> None:
    """Write network parameters in the FCNFS1 container (see module doc)."""
    blobs = model.flat_blobs()
    names = [n for n, _ in blobs]
    if names != [n for n, _ in MODEL_SCHEMA]:
        raise ValueError(f"model blobs {names} do not match the fixed architecture")
    lines = [MODEL_MAGIC]
    for (name, arr), (_, shape) in zip(blobs, MODEL_SCHEMA):
        if tuple(arr.shape) != shape:
            raise ValueError(f"{name}: shape {arr.shape} does not match {shape}")
        lines.append(name + " " + " ".join(str(s) for s in shape))
    lines.append("END")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for _, arr in blobs:
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def deserialize_model(path):
    """Read an FCNFS1 container back into a model, validating the layout."""
    buf = Path(path).read_bytes()
    end = buf.find(b"\nEND\n")
    if end < 0:
        raise FormatError(f"{path}: missing END line")
    header = buf[:end].decode("ascii", errors="replace").split("\n")
    offset = end + len(b"\nEND\n")
    if header[0] != MODEL_MAGIC:
        raise FormatError(f"{path}: expected magic {MODEL_MAGIC}, got {header[0]!r}")
    entries = []
    for line in header[1:]:
        parts = line.split()
        if len(parts) < 2:
            raise FormatError(f"{path}: malformed header line {line!r}")
        entries.append((parts[0], tuple(int(p) for p in parts[1:])))
    if entries != list(MODEL_SCHEMA):
        raise FormatError(f"{path}: header does not match the fixed architecture")
    arrays = []
    for name, shape in entries:
        n = int(np.prod(shape))
        chunk = buf[offset : offset + 4 * n]
        if len(chunk) < 4 * n:
            raise FormatError(f"{path}: truncated payload in blob {name}")
        arrays.append(np.frombuffer(chunk, "<f4").reshape(shape).copy())
        offset += 4 * n
    if offset != len(buf):
        raise FormatError(f"{path}: {len(buf) - offset} trailing bytes after payload")
    from freespace.fcn import FcnModel

    blobs = {}
    for (name, _), arr in zip(entries, arrays):
        layer, kind = name.split(".")
        pair = blobs.setdefault(layer, [None, None])
        pair[0 if kind == "weight" else 1] = arr
    out = {layer: (pair[0], pair[1]) for layer, pair in blobs.items()}
    return FcnModel(out, seed=0)


_FRAME_COUNT = 11


def discover_sequences(root_dir) -> SequenceSet:
    """Find `<root>/<seq>/frame_00..frame_10.{ppm,dmap.pgm}` sequences.

    Sequences are sorted by directory name; a sequence missing any
    required frame is skipped with a warning record. frame_10 is the
    annotated/test frame; `frame_10.gt.pgm` is its optional manual mask.
    """
    root = Path(root_dir)
    out = SequenceSet()
    if not root.is_dir():
        return out
    for entry in sorted(p.name for p in root.iterdir() if p.is_dir()):
        seq_dir = root / entry
        color, disp = [], []
        missing = None
        for k in range(_FRAME_COUNT):
            c = seq_dir / f"frame_{k:02d}.ppm"
            d = seq_dir / f"frame_{k:02d}.dmap.pgm"
            if not c.is_file():
                missing = c.name
                break
            if not d.is_file():
                missing = d.name
                break
            color.append(c)
            disp.append(d)
        if missing is not None:
            out.warnings.append(f"{entry}: missing {missing}, sequence skipped")
            continue
        gt = seq_dir / "frame_10.gt.pgm"
        out.sequences.append(Sequence(entry, color, disp, gt if gt.is_file() else None))
    return out
