#!/usr/bin/env python3
"""Build a class-balanced MNIST subset in IDX format.

Source: the `mnist` npm package (10,000 grayscale digits stored as JSON,
pixels already scaled to [0, 1] with three decimals). Fetch it with
`npm pack mnist && tar xzf mnist-*.tgz`, then point --package at the
extracted `package/` directory.

Train and test samples are drawn disjointly, per class, with a fixed seed.
"""
import argparse
import json
import pathlib
import random
import struct


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--package", required=True, type=pathlib.Path)
    ap.add_argument("--out", required=True, type=pathlib.Path)
    ap.add_argument("--train-per-class", type=int, default=500)
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=20250101)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    train, test = [], []
    for digit in range(10):
        flat = json.loads((args.package / "src" / "digits" / f"{digit}.json").read_text())["data"]
        count = len(flat) // 784
        samples = [[min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784]]
                   for i in range(count)]
        order = list(range(count))
        rng.shuffle(order)
        need = args.train_per_class + args.test_per_class
        if count < need:
            raise SystemExit(f"digit {digit}: only {count} samples, need {need}")
        train += [(samples[i], digit) for i in order[:args.train_per_class]]
        test += [(samples[i], digit) for i in order[args.train_per_class:need]]
    rng.shuffle(train)
    rng.shuffle(test)

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx_images(args.out / "train-images-idx3-ubyte", [s for s, _ in train])
    write_idx_labels(args.out / "train-labels-idx1-ubyte", [l for _, l in train])
    write_idx_images(args.out / "t10k-images-idx3-ubyte", [s for s, _ in test])
    write_idx_labels(args.out / "t10k-labels-idx1-ubyte", [l for _, l in test])
    print(f"wrote {len(train)} train / {len(test)} test samples to {args.out}")


if __name__ == "__main__":
    main()
