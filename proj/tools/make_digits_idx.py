#!/usr/bin/env python3
"""Convert the scikit-learn 8x8 handwritten digits set into IDX files.

Writes digits-{train,test}-{images,labels}.idx into the given directory.
Every fifth sample of each class goes to the test split, so the split is
deterministic and class-balanced. Pixel intensities 0..16 are rescaled
to 0..255.
"""
import gzip
import os
import struct
import sys

import numpy as np
from sklearn.datasets import _base


def write_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "."
    src = os.path.join(os.path.dirname(_base.__file__), "data", "digits.csv.gz")
    with gzip.open(src, "rt") as f:
        raw = np.loadtxt(f, delimiter=",")
    pixels = np.rint(raw[:, :64] * 255.0 / 16.0).clip(0, 255).reshape(-1, 8, 8)
    labels = raw[:, 64].astype(np.int64)

    test = np.zeros(len(labels), dtype=bool)
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        test[idx[4::5]] = True

    os.makedirs(out, exist_ok=True)
    write_images(os.path.join(out, "digits-train-images.idx"), pixels[~test])
    write_labels(os.path.join(out, "digits-train-labels.idx"), labels[~test])
    write_images(os.path.join(out, "digits-test-images.idx"), pixels[test])
    write_labels(os.path.join(out, "digits-test-labels.idx"), labels[test])
    print(f"train {int((~test).sum())}, test {int(test.sum())}")


if __name__ == "__main__":
    main()
