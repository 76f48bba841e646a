#!/usr/bin/env python3
"""Builds the desk-scale MNIST fixture under data/mnist10k/.

Pulls the `mnist` npm package (which bundles 10,000 MNIST digits as JSON,
pixel values stored as byte/255 rounded to 3 decimals -- exactly invertible),
recovers the original pixel bytes, and writes standard IDX files:

    train-images-idx3-ubyte / train-labels-idx1-ubyte   (700 per class)
    t1k-images-idx3-ubyte   / t1k-labels-idx1-ubyte     (the remainder)

Images are interleaved by class so any prefix of either file is
class-balanced. Requires npm (or pass --package-dir to reuse an already
extracted package).
"""

import argparse
import json
import os
import struct
import subprocess
import sys
import tarfile
import tempfile

TRAIN_PER_CLASS = 700
ROWS = COLS = 28


def fetch_package(workdir: str) -> str:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    tgz = os.path.join(workdir, "mnist-1.1.0.tgz")
    with tarfile.open(tgz) as tf:
        tf.extractall(workdir)
    return os.path.join(workdir, "package")


def load_digits(pkg_dir: str):
    per_class = []
    for c in range(10):
        path = os.path.join(pkg_dir, "src", "digits", f"{c}.json")
        with open(path) as f:
            flat = json.load(f)["data"]
        assert len(flat) % (ROWS * COLS) == 0
        n = len(flat) // (ROWS * COLS)
        images = []
        for i in range(n):
            vals = flat[i * ROWS * COLS:(i + 1) * ROWS * COLS]
            # values are round(byte/255, 3); |v*255 - byte| <= 0.1275 < 0.5
            images.append(bytes(round(v * 255) for v in vals))
        per_class.append(images)
    return per_class


def interleave(per_class_items):
    out = []
    depth = max(len(items) for items in per_class_items)
    for i in range(depth):
        for c, items in enumerate(per_class_items):
            if i < len(items):
                out.append((items[i], c))
    return out


def write_idx(out_dir: str, stem: str, samples):
    img_path = os.path.join(out_dir, f"{stem}-images-idx3-ubyte")
    lbl_path = os.path.join(out_dir, f"{stem}-labels-idx1-ubyte")
    with open(img_path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), ROWS, COLS))
        for img, _ in samples:
            f.write(img)
    with open(lbl_path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(lbl for _, lbl in samples))
    print(f"wrote {img_path} ({len(samples)} images)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
        "data", "mnist10k"))
    ap.add_argument("--package-dir", default=None,
                    help="already-extracted mnist npm package dir")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        pkg = args.package_dir or fetch_package(tmp)
        per_class = load_digits(pkg)
        train = [imgs[:TRAIN_PER_CLASS] for imgs in per_class]
        test = [imgs[TRAIN_PER_CLASS:] for imgs in per_class]
        write_idx(args.out, "train", interleave(train))
        write_idx(args.out, "t1k", interleave(test))


if __name__ == "__main__":
    sys.exit(main())
