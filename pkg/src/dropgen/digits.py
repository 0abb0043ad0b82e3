"""Desk-scale handwritten-digit corpus.

This sandbox has no route to the original 28x28 MNIST files, so the
training corpus is synthesized from scikit-learn's bundled handwritten
digits (real 8x8 rasters from the UCI optdigits scans): each source digit
is upscaled to 28x28 and jittered with small random shifts so the corpus
reaches the requested size without exact duplicates. Output goes through
the same IDX writer/loader as real MNIST would.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits

from .data_io import write_idx_images, write_idx_labels

IMAGE_HW = 28


def build_digits_corpus(count: int = 5000, seed: int = 0):
    """Returns (images uint8 [count,28,28], labels uint8 [count])."""
    src = load_digits()
    base = src.images / 16.0          # [1797, 8, 8] in [0,1]
    labels_src = src.target.astype(np.uint8)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD161]))
    order = rng.permutation(base.shape[0])

    images = np.empty((count, IMAGE_HW, IMAGE_HW), dtype=np.uint8)
    labels = np.empty(count, dtype=np.uint8)
    zoom = IMAGE_HW / base.shape[1]
    for i in range(count):
        j = order[i % base.shape[0]]
        img = ndimage.zoom(base[j], zoom, order=1, prefilter=False)
        dy, dx = rng.integers(-2, 3, size=2)
        img = np.roll(img, (dy, dx), axis=(0, 1))
        gain = rng.uniform(0.85, 1.0)
        images[i] = np.clip(img * gain * 255.0, 0, 255).astype(np.uint8)
        labels[i] = labels_src[j]
    return images, labels


def write_digits_corpus(out_dir, count: int = 5000, seed: int = 0):
    """Write the corpus as IDX files; returns (images_path, labels_path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, labels = build_digits_corpus(count, seed)
    images_path = out_dir / "digits-images-idx3-ubyte"
    labels_path = out_dir / "digits-labels-idx1-ubyte"
    write_idx_images(images_path, images)
    write_idx_labels(labels_path, labels)
    return images_path, labels_path
