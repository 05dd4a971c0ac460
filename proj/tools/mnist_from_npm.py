#!/usr/bin/env python3
"""Convert the digit JSON files shipped with the npm `mnist` package into IDX files.

The package carries 10,000 MNIST digits (28x28, intensities in [0,1] quantized to 256
levels). They are split per digit into a train and a test partition and written in the
standard big-endian IDX layout so the C++ reader consumes them like the original corpus.

usage: mnist_from_npm.py <package/src/digits> <out-dir> [--test-fraction 0.2]
"""
import argparse
import json
import random
import struct
from pathlib import Path


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
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--test-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=20201130)
    args = ap.parse_args()

    train, test = [], []
    for digit in range(10):
        raw = json.loads(Path(args.digits_dir, f"{digit}.json").read_text())["data"]
        count = len(raw) // 784
        samples = []
        for k in range(count):
            px = raw[k * 784:(k + 1) * 784]
            samples.append(([int(round(v * 255)) for v in px], digit))
        n_test = int(round(count * args.test_fraction))
        test += samples[:n_test]
        train += samples[n_test:]

    rng = random.Random(args.seed)
    rng.shuffle(train)
    rng.shuffle(test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("t10k", test)):
        write_images(out / f"{name}-images-idx3-ubyte", [s[0] for s in part])
        write_labels(out / f"{name}-labels-idx1-ubyte", [s[1] for s in part])
        print(f"{name}: {len(part)} images")


if __name__ == "__main__":
    main()
