"""MNIST ingestion: IDX parsing, 0/1 filtering, 28x28 -> 16x16 resampling, encoding."""
from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .classifier import EncodedSample

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
CACHE_MAGIC = b"QRB1"
SRC, DST = 28, 16

TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RawImage:
    pixels: np.ndarray = field(repr=False)  # (28, 28) uint8
    label: int

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (SRC, SRC):
            raise ValueError(f"expected a {SRC}x{SRC} image, got {px.shape}")
        if not 0 <= self.label < 10:
            raise ValueError(f"label {self.label} out of range")
        object.__setattr__(self, "pixels", px.astype(np.uint8))


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def parse_idx_images(raw: bytes, name: str = "images") -> np.ndarray:
    if len(raw) < 16:
        raise IdxFormatError(f"{name}: header truncated at byte {len(raw)} (need 16)")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGES_MAGIC:
        raise IdxFormatError(f"{name}: bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}")
    need = 16 + count * rows * cols
    if len(raw) < need:
        raise IdxFormatError(f"{name}: pixel data truncated at byte {len(raw)} (need {need})")
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols)


def parse_idx_labels(raw: bytes, name: str = "labels") -> np.ndarray:
    if len(raw) < 8:
        raise IdxFormatError(f"{name}: header truncated at byte {len(raw)} (need 8)")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABELS_MAGIC:
        raise IdxFormatError(f"{name}: bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}")
    if len(raw) < 8 + count:
        raise IdxFormatError(f"{name}: label data truncated at byte {len(raw)} (need {8 + count})")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=8)


def load_idx(images_path, labels_path) -> list[RawImage]:
    images = parse_idx_images(_read_bytes(images_path), str(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path), str(labels_path))
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    return [RawImage(img, int(lab)) for img, lab in zip(images, labels)]


def encode_idx_images(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    count, rows, cols = pixels.shape
    return struct.pack(">IIII", IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()


def encode_idx_labels(labels: Sequence[int]) -> bytes:
    return struct.pack(">II", LABELS_MAGIC, len(labels)) + bytes(int(x) for x in labels)


def write_idx(images: Sequence[RawImage], images_path, labels_path) -> None:
    Path(images_path).write_bytes(encode_idx_images(np.array([im.pixels for im in images]).reshape(-1, SRC, SRC)))
    Path(labels_path).write_bytes(encode_idx_labels([im.label for im in images]))


def _find(directory: Path, name: str) -> Path:
    for cand in (name, name + ".gz", name.replace("-idx", ".idx")):
        p = directory / cand
        if p.exists():
            return p
    raise FileNotFoundError(f"{directory / name}: no such file (also tried .gz)")


def load_mnist_dir(directory, split: str = "train") -> list[RawImage]:
    """Load the standard-named train or t10k IDX pair from ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: data directory does not exist")
    names = {"train": TRAIN_FILES, "test": TEST_FILES}[split]
    return load_idx(_find(directory, names[0]), _find(directory, names[1]))


def default_data_dir() -> Optional[str]:
    return os.environ.get("QROBUST_DATA_DIR")


def filter_binary(images: Iterable[RawImage]) -> list[RawImage]:
    return [im for im in images if im.label in (0, 1)]


def _overlap_weights(src: int = SRC, dst: int = DST) -> np.ndarray:
    # w[o, i] = |[i, i+1] & [o*s, (o+1)*s]| / s with s = src/dst
    s = src / dst
    w = np.zeros((dst, src))
    for o in range(dst):
        lo, hi = o * s, (o + 1) * s
        for i in range(int(lo), min(src, int(np.ceil(hi)))):
            w[o, i] = max(0.0, min(hi, i + 1) - max(lo, i)) / s
    return w


_W = _overlap_weights()


def downscale_16(img) -> np.ndarray:
    """Area-average resampling of a 28x28 grid to 16x16."""
    px = img.pixels if isinstance(img, RawImage) else np.asarray(img)
    if px.shape != (SRC, SRC):
        raise ValueError(f"expected a {SRC}x{SRC} grid, got {px.shape}")
    return _W @ px.astype(float) @ _W.T


def downscale_exact(px) -> list[list[Fraction]]:
    """Rational-arithmetic area resampler; slow, used as a cross-check."""
    s = Fraction(SRC, DST)
    out = []
    for r in range(DST):
        row = []
        for c in range(DST):
            acc = Fraction(0)
            for i in range(SRC):
                hy = min(s * (r + 1), i + 1) - max(s * r, i)
                if hy <= 0:
                    continue
                for j in range(SRC):
                    hx = min(s * (c + 1), j + 1) - max(s * c, j)
                    if hx > 0:
                        acc += hy * hx * int(px[i][j])
            row.append(acc / (s * s))
        out.append(row)
    return out


def to_sample(grid, label: int) -> EncodedSample:
    g = np.asarray(grid, dtype=float)
    if g.shape != (DST, DST):
        raise ValueError(f"expected a {DST}x{DST} grid, got {g.shape}")
    flat = g.ravel()
    norm = np.linalg.norm(flat)
    if norm == 0:
        raise ValueError("all-zero image cannot be normalized")
    return EncodedSample(flat / norm, int(label))


def preprocess(images: Iterable[RawImage]) -> list[EncodedSample]:
    return [to_sample(downscale_16(im), im.label) for im in filter_binary(images)]


def select(samples: Sequence, size: Optional[int], seed: int) -> list:
    """Seeded subset of ``size`` samples (all of them, shuffled, when size is None)."""
    idx = np.random.default_rng(seed).permutation(len(samples))
    if size is not None:
        if size > len(samples):
            raise ValueError(f"requested {size} samples but only {len(samples)} available")
        idx = idx[:size]
    return [samples[i] for i in idx]


def save_cache(path, samples: Sequence[EncodedSample]) -> None:
    dim = DST * DST
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC + struct.pack("<II", len(samples), dim))
        for s in samples:
            fh.write(np.asarray(s.features, dtype="<f8").tobytes())
            fh.write(bytes([s.label]))


def load_cache(path) -> list[EncodedSample]:
    raw = Path(path).read_bytes()
    if raw[:4] != CACHE_MAGIC:
        raise IdxFormatError(f"{path}: not a QRB1 cache")
    count, dim = struct.unpack("<II", raw[4:12])
    rec = dim * 8 + 1
    if len(raw) < 12 + count * rec:
        raise IdxFormatError(f"{path}: cache truncated at byte {len(raw)} (need {12 + count * rec})")
    out = []
    for k in range(count):
        off = 12 + k * rec
        feats = np.frombuffer(raw, dtype="<f8", count=dim, offset=off)
        out.append(EncodedSample(feats.copy(), raw[off + dim * 8]))
    return out
