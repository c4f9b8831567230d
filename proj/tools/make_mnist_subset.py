#!/usr/bin/env python3
"""Write a small MNIST subset as IDX files.

Source: the 5,000-digit MNIST sample bundled with the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz; 500 digits per class, label in the last
column). Emits a class-balanced train split and a disjoint test split.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py /tmp/mlx/mlxtend-*.whl tests/data/mnist2k
"""
import gzip
import os
import random
import struct
import sys
import zipfile


def write_idx(prefix, images, labels):
    with open(prefix + "-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(prefix + "-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main():
    wheel, out_dir = sys.argv[1], sys.argv[2]
    n_train = int(sys.argv[3]) if len(sys.argv) > 3 else 200
    n_test = int(sys.argv[4]) if len(sys.argv) > 4 else 100
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = gzip.decompress(raw).decode().strip().split("\n")
    by_class = {c: [] for c in range(10)}
    for row in rows:
        vals = [int(float(v)) for v in row.split(",")]
        by_class[vals[-1]].append(vals[:-1])
    rng = random.Random(20231015)
    train, test = [], []
    for c in range(10):
        rng.shuffle(by_class[c])
        train += [(img, c) for img in by_class[c][:n_train]]
        test += [(img, c) for img in by_class[c][n_train:n_train + n_test]]
    rng.shuffle(train)
    rng.shuffle(test)
    os.makedirs(out_dir, exist_ok=True)
    write_idx(os.path.join(out_dir, "train"), [i for i, _ in train], [l for _, l in train])
    write_idx(os.path.join(out_dir, "test"), [i for i, _ in test], [l for _, l in test])


if __name__ == "__main__":
    main()
