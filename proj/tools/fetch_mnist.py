#!/usr/bin/env python3
# Copyright 2026 The FSVAE Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds gzipped MNIST IDX files from the 10,000 digits bundled in the npm
`mnist` package (MIT licensed). Used when the canonical MNIST mirrors are not
reachable. The digits are interleaved by class with a fixed permutation, then
split 8,000 train / 2,000 test.

usage: fetch_mnist.py OUT_DIR [--package mnist-1.1.0.tgz]
"""
import argparse
import gzip
import json
import random
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + payload)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--package", help="pre-downloaded npm tarball")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        tgz = args.package
        if tgz is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           capture_output=True)
            tgz = str(Path(tmp) / "mnist-1.1.0.tgz")
        with tarfile.open(tgz) as tar:
            tar.extractall(tmp)
        samples = []
        for label in range(10):
            raw = json.loads((Path(tmp) / "package/src/digits" / f"{label}.json").read_text())["data"]
            n = len(raw) // 784
            for i in range(n):
                px = bytes(max(0, min(255, round(v * 255))) for v in raw[i * 784:(i + 1) * 784])
                samples.append((px, label))

    random.Random(1729).shuffle(samples)
    splits = {"train": samples[:8000], "t10k": samples[8000:]}
    for name, rows in splits.items():
        write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x00000803, [len(rows), 28, 28],
                  b"".join(p for p, _ in rows))
        write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x00000801, [len(rows)],
                  bytes(l for _, l in rows))
        print(f"{name}: {len(rows)} images")


if __name__ == "__main__":
    main()
