#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Convert the per-class JSON dumps shipped in the `fashion-mnist` npm package
into the four standard Fashion-MNIST IDX files.

Each clothes/<c>.json holds 7000 flattened 28x28 uint8 images of class c.
The first 6000 are written to the train split and the remaining 1000 to the
test split, matching the 60k/10k layout of the original distribution.

    npm pack fashion-mnist && tar xzf fashion-mnist-*.tgz
    python3 tools/fmnist_from_npm.py package/src/clothes /path/to/fashion-mnist
"""
import argparse
import json
import os
import random
import struct

TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000
PIXELS = 28 * 28


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("clothes_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train, test = [], []
    for c in range(10):
        with open(os.path.join(args.clothes_dir, f"{c}.json")) as f:
            rows = [r for r in json.load(f)["data"] if len(r) == PIXELS]
        if len(rows) < TRAIN_PER_CLASS + TEST_PER_CLASS:
            raise SystemExit(f"class {c}: only {len(rows)} images")
        train += [(r, c) for r in rows[:TRAIN_PER_CLASS]]
        test += [(r, c) for r in rows[TRAIN_PER_CLASS:TRAIN_PER_CLASS + TEST_PER_CLASS]]

    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)

    os.makedirs(args.out_dir, exist_ok=True)
    for name, split in (("train", train), ("t10k", test)):
        write_images(os.path.join(args.out_dir, f"{name}-images-idx3-ubyte"), [r for r, _ in split])
        write_labels(os.path.join(args.out_dir, f"{name}-labels-idx1-ubyte"), [c for _, c in split])


if __name__ == "__main__":
    main()
