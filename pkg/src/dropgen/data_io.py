"""Dataset ingestion (IDX), checkpoint persistence, image grids, CSV tables.

The checkpoint container is a single file: magic, a JSON header describing
the architecture and every tensor block, the raw little-endian tensor
payload, and a SHA-256 digest of the payload. Loads are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CHECKPOINT_MAGIC = b"DGCKPT1\n"
CHECKPOINT_VERSION = 1


class IdxFormatError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray               # [N,1,H,W] float32 in [-1, 1]
    labels: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return self.images.shape[0]


def _read_exact(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise IdxFormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def load_idx_images(path) -> np.ndarray:
    """Read an IDX image file (big-endian) into a uint8 array [N,H,W]."""
    path = Path(path)
    with open(path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, "IDX header"))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(f"bad image magic 0x{magic:08x} in {path.name}, "
                                 f"expected 0x{IDX_IMAGES_MAGIC:08x}")
        payload = _read_exact(f, count * rows * cols, "IDX image payload")
        if f.read(1):
            raise IdxFormatError(f"trailing bytes after {count} images in {path.name}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic, count = struct.unpack(">II", _read_exact(f, 8, "IDX header"))
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(f"bad label magic 0x{magic:08x} in {path.name}, "
                                 f"expected 0x{IDX_LABELS_MAGIC:08x}")
        payload = _read_exact(f, count, "IDX label payload")
    return np.frombuffer(payload, dtype=np.uint8).copy()


def load_mnist_idx(images_path, labels_path=None) -> Dataset:
    """Load an IDX image file (plus optional labels) and normalize pixels
    from [0,255] to [-1,1] via x/127.5 - 1."""
    raw = load_idx_images(images_path)
    images = (raw.astype(np.float32) / 127.5 - 1.0)[:, None, :, :]
    labels = None
    provenance = {"images": _file_digest(images_path)}
    if labels_path is not None:
        labels = load_idx_labels(labels_path)
        if labels.shape[0] != images.shape[0]:
            raise IdxFormatError(f"label count {labels.shape[0]} does not match "
                                 f"image count {images.shape[0]}")
        provenance["labels"] = _file_digest(labels_path)
    return Dataset(images, labels, provenance)


def write_idx_images(path, images: np.ndarray):
    """Write uint8 images [N,H,W] as an IDX file."""
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- checkpoints ----------------------------------------------------------


@dataclass
class Checkpoint:
    """Everything needed for exact replay of a trained model."""

    generator_spec: dict
    discriminator_spec: dict
    tensors: dict                     # name -> np.ndarray (params + bn buffers)
    train_config: dict
    seed: int
    log_digest: str = ""
    format_version: int = CHECKPOINT_VERSION


def save_checkpoint(ckpt: Checkpoint, path):
    names = sorted(ckpt.tensors)
    blocks = []
    manifest = []
    for name in names:
        arr = np.ascontiguousarray(ckpt.tensors[name])
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        blocks.append(arr.tobytes())
        manifest.append({"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str})
    payload = b"".join(blocks)
    header = {
        "format_version": ckpt.format_version,
        "generator_spec": ckpt.generator_spec,
        "discriminator_spec": ckpt.discriminator_spec,
        "train_config": ckpt.train_config,
        "seed": ckpt.seed,
        "log_digest": ckpt.log_digest,
        "tensors": manifest,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        f.write(payload)


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    header = json.loads(data[off:off + hlen])
    off += hlen
    if header["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header['format_version']}")
    payload = data[off:]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != header["payload_sha256"]:
        raise CheckpointError("checkpoint payload digest mismatch (corrupted file)")
    tensors = {}
    pos = 0
    for entry in header["tensors"]:
        dt = np.dtype(entry["dtype"])
        nbytes = int(np.prod(entry["shape"]) * dt.itemsize) if entry["shape"] else dt.itemsize
        arr = np.frombuffer(payload[pos:pos + nbytes], dtype=dt).reshape(entry["shape"])
        tensors[entry["name"]] = arr.copy()
        pos += nbytes
    if pos != len(payload):
        raise CheckpointError(f"payload size mismatch: manifest covers {pos} bytes, "
                              f"file has {len(payload)}")
    return Checkpoint(
        generator_spec=header["generator_spec"],
        discriminator_spec=header["discriminator_spec"],
        tensors=tensors,
        train_config=header["train_config"],
        seed=header["seed"],
        log_digest=header["log_digest"],
        format_version=header["format_version"],
    )


# -- image grids ----------------------------------------------------------


def quantize_pixels(images: np.ndarray) -> np.ndarray:
    """Map [-1,1] floats to uint8 [0,255]; monotone by construction."""
    return np.clip(np.rint((images + 1.0) * 127.5), 0, 255).astype(np.uint8)


def _png_chunk(tag: bytes, body: bytes) -> bytes:
    return (struct.pack(">I", len(body)) + tag + body
            + struct.pack(">I", zlib.crc32(tag + body) & 0xFFFFFFFF))


def encode_png_gray(pixels: np.ndarray) -> bytes:
    """Encode a uint8 [H,W] array as an 8-bit grayscale PNG (deterministic)."""
    h, w = pixels.shape
    raw = b"".join(b"\x00" + row.tobytes() for row in pixels)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n"
            + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 6))
            + _png_chunk(b"IEND", b""))


def encode_pgm(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes()


def assemble_grid(images: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Tile [K,1,H,W] images (values in [-1,1]) into a quantized [rows*H, cols*W]
    uint8 canvas; unused cells stay black."""
    k = images.shape[0]
    if k > rows * cols:
        raise ValueError(f"{k} images do not fit a {rows}x{cols} grid")
    h, w = images.shape[2], images.shape[3]
    canvas = np.zeros((rows * h, cols * w), dtype=np.uint8)
    q = quantize_pixels(images[:, 0])
    for i in range(k):
        r, c = divmod(i, cols)
        canvas[r * h:(r + 1) * h, c * w:(c + 1) * w] = q[i]
    return canvas


def save_image_grid(images: np.ndarray, rows: int, cols: int, path):
    """Write a grid of generated images as PNG (or PGM if the path ends .pgm)."""
    canvas = assemble_grid(images, rows, cols)
    path = Path(path)
    data = encode_pgm(canvas) if path.suffix == ".pgm" else encode_png_gray(canvas)
    path.write_bytes(data)


# -- CSV tables -----------------------------------------------------------


def format_cell(v: float) -> str:
    if v == 0:
        return "0"
    return f"{v:.4g}"


def write_csv_table(generation_ps, training_ps, cells, path):
    """Write the variety table: header row = training p values, first column
    = generation p values, one row per generation p."""
    cells = np.asarray(cells, dtype=float)
    if cells.shape != (len(generation_ps), len(training_ps)):
        raise ValueError(f"ragged table: cells {cells.shape}, expected "
                         f"({len(generation_ps)}, {len(training_ps)})")
    lines = ["generation_p," + ",".join(format_cell(p) for p in training_ps)]
    for i, gp in enumerate(generation_ps):
        lines.append(format_cell(gp) + "," + ",".join(format_cell(v) for v in cells[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv_table(path):
    lines = Path(path).read_text().strip().split("\n")
    training_ps = [float(x) for x in lines[0].split(",")[1:]]
    generation_ps = []
    cells = []
    for line in lines[1:]:
        parts = line.split(",")
        generation_ps.append(float(parts[0]))
        cells.append([float(x) for x in parts[1:]])
    return generation_ps, training_ps, np.array(cells)
