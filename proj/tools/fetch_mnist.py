#!/usr/bin/env python3
"""Build MNIST IDX files from the digits bundled in the npm `mnist` package.

The package ships 10,000 MNIST digits as JSON (pixels rounded to three
decimals). They are rescaled to bytes and written as an IDX image/label pair:

    data/mnist/images-idx3-ubyte
    data/mnist/labels-idx1-ubyte

Usage: tools/fetch_mnist.py [--tarball mnist-1.1.0.tgz] [--out data/mnist]
"""
import argparse
import json
import os
import struct
import subprocess
import tarfile
import tempfile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--tarball", help="pre-downloaded npm tarball")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            tarball = os.path.join(tmp, "mnist-1.1.0.tgz")
        with tarfile.open(tarball) as tf:
            tf.extractall(tmp)
        images, labels = [], []
        for digit in range(10):
            with open(os.path.join(tmp, "package", "src", "digits", f"{digit}.json")) as fh:
                pixels = json.load(fh)["data"]
            assert len(pixels) % 784 == 0
            for i in range(len(pixels) // 784):
                row = pixels[i * 784:(i + 1) * 784]
                images.append(bytes(min(255, max(0, round(v * 255))) for v in row))
                labels.append(digit)

    os.makedirs(args.out, exist_ok=True)
    n = len(labels)
    with open(os.path.join(args.out, "images-idx3-ubyte"), "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, n, 28, 28))
        for img in images:
            fh.write(img)
    with open(os.path.join(args.out, "labels-idx1-ubyte"), "wb") as fh:
        fh.write(struct.pack(">II", 2049, n))
        fh.write(bytes(labels))
    print(f"wrote {n} samples to {args.out}")


if __name__ == "__main__":
    main()
