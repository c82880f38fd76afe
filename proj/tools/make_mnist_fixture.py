"""Builds the gzipped IDX fixture in tests/data from the npm `mnist` package.

usage: python3 tools/make_mnist_fixture.py <package-dir> <count>

Digits are interleaved 0,1,...,9,0,1,... so every prefix is class balanced.
"""
import gzip
import json
import pathlib
import struct
import sys

src = pathlib.Path(sys.argv[1]) / "src" / "digits"
count = int(sys.argv[2])
digits = []
for k in range(10):
    flat = json.loads((src / f"{k}.json").read_text())["data"]
    digits.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

images, labels = bytearray(), bytearray()
for i in range(count):
    k = i % 10
    images += bytes(round(v * 255) for v in digits[k][i // 10])
    labels.append(k)

out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"
with gzip.GzipFile(out / "mnist-images-idx3-ubyte.gz", "wb", mtime=0) as f:
    f.write(struct.pack(">IIII", 0x803, count, 28, 28) + images)
with gzip.GzipFile(out / "mnist-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
    f.write(struct.pack(">II", 0x801, count) + labels)
