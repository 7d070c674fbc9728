#!/usr/bin/env python3
"""Build a small MNIST subset in IDX format from the copy bundled with mlxtend.

The mlxtend wheel ships 5,000 raw MNIST digits (pixel bytes 0..255 plus label).
The rows come sorted by class, so they are shuffled with a fixed seed; then
the first 4,000 are written as the training split, the remaining 1,000 as the
test split, using the standard MNIST file names (gzip-compressed IDX).

Usage: python3 scripts/make_mnist_subset.py [out_dir]
"""
import glob
import gzip
import os
import random
import struct
import subprocess
import sys
import tempfile
import zipfile

TRAIN = 4000


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + bytes(payload))


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data/mnist"
    os.makedirs(out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend==0.24.0"]
        )
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
        raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = [list(map(int, line.split(","))) for line in gzip.decompress(raw).decode().splitlines()]
    assert all(len(r) == 785 for r in rows)
    random.Random(20160101).shuffle(rows)
    splits = {"train": rows[:TRAIN], "t10k": rows[TRAIN:]}
    for prefix, part in splits.items():
        pixels = [p for r in part for p in r[:784]]
        labels = [r[784] for r in part]
        write_idx(os.path.join(out, f"{prefix}-images-idx3-ubyte.gz"), 0x803, [len(part), 28, 28], pixels)
        write_idx(os.path.join(out, f"{prefix}-labels-idx1-ubyte.gz"), 0x801, [len(part)], labels)
        print(f"{prefix}: {len(part)} images")


if __name__ == "__main__":
    main()
