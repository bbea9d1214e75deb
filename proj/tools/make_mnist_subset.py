#!/usr/bin/env python3
"""Write a small MNIST subset in IDX format for the test suites.

The 5000-digit sample shipped inside the ``mlxtend`` wheel (500 per class,
sorted by label) is split per class into a training part and a held-out part,
interleaved round-robin over the classes:

    tests/data/mnist-train-images-idx3-ubyte   (300 digits per class)
    tests/data/mnist-train-labels-idx1-ubyte
    tests/data/mnist-test-images-idx3-ubyte    (100 digits per class)
    tests/data/mnist-test-labels-idx1-ubyte

Usage: make_mnist_subset.py [--wheel path/to/mlxtend.whl] [--out tests/data]
If no wheel is given the installed ``mlxtend`` package is used.
"""

import argparse
import gzip
import pathlib
import struct
import zipfile

TRAIN_PER_CLASS = 300
TEST_PER_CLASS = 100


def read_csv_bytes(wheel):
    if wheel:
        with zipfile.ZipFile(wheel) as z:
            return z.read("mlxtend/data/data/mnist_5k.csv.gz")
    import mlxtend.data

    path = pathlib.Path(mlxtend.data.__file__).parent / "data" / "mnist_5k.csv.gz"
    return path.read_bytes()


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
    ap.add_argument("--wheel")
    ap.add_argument("--out", default="tests/data")
    args = ap.parse_args()

    rows = gzip.decompress(read_csv_bytes(args.wheel)).decode().splitlines()
    images, labels = [], []
    for row in rows:
        vals = [int(float(v)) for v in row.split(",")]
        images.append(vals[:784])
        labels.append(vals[784])

    by_class = {}
    for img, lab in zip(images, labels):
        by_class.setdefault(lab, []).append(img)
    classes = sorted(by_class)

    def interleave(lo, hi):
        imgs, labs = [], []
        for i in range(lo, hi):
            for c in classes:
                imgs.append(by_class[c][i])
                labs.append(c)
        return imgs, labs

    train = interleave(0, TRAIN_PER_CLASS)
    test = interleave(TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_images(out / "mnist-train-images-idx3-ubyte", train[0])
    write_labels(out / "mnist-train-labels-idx1-ubyte", train[1])
    write_images(out / "mnist-test-images-idx3-ubyte", test[0])
    write_labels(out / "mnist-test-labels-idx1-ubyte", test[1])


if __name__ == "__main__":
    main()
