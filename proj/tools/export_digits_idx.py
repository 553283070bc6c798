#!/usr/bin/env python3
"""Export the scikit-learn digits corpus as IDX train/test file pairs.

The 8x8 grayscale digits (1797 samples, intensities 0..16) stand in for a
full handwritten-digit corpus at desk scale. Pixels are rescaled to 0..255;
every 5th sample of each class goes to the test side, the rest to train, so
the split is deterministic and roughly class-balanced.

Usage: tools/export_digits_idx.py [outdir]   (default tests/fixtures/digits)
"""

import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> None:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("tests/fixtures/digits")
    outdir.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    images = np.clip(np.round(digits.images * (255.0 / 16.0)), 0, 255).astype(np.uint8)
    labels = digits.target.astype(np.uint8)

    test_mask = np.zeros(len(labels), dtype=bool)
    for cls in range(10):
        idx = np.flatnonzero(labels == cls)
        test_mask[idx[::5]] = True

    write_idx_images(outdir / "train-images.idx", images[~test_mask])
    write_idx_labels(outdir / "train-labels.idx", labels[~test_mask])
    write_idx_images(outdir / "test-images.idx", images[test_mask])
    write_idx_labels(outdir / "test-labels.idx", labels[test_mask])

    print(f"wrote {np.sum(~test_mask)} train / {np.sum(test_mask)} test samples to {outdir}")
    for cls in range(10):
        print(f"  digit {cls}: {np.sum(labels[~test_mask] == cls)} train, "
              f"{np.sum(labels[test_mask] == cls)} test")


if __name__ == "__main__":
    main()
