"""Convert locally downloaded Fashion-MNIST IDX files to labeled CSVs.

The image benchmark test consumes train.csv / test.csv in the labeled-CSV
format (header f0,...,f783,label) with pixel intensities scaled to [0, 1].
This script performs that conversion from the four standard IDX files

    train-images-idx3-ubyte[.gz]   train-labels-idx1-ubyte[.gz]
    t10k-images-idx3-ubyte[.gz]    t10k-labels-idx1-ubyte[.gz]

which you must download yourself (the library never touches the network).

Usage:
    python3 demos/prepare_fashion_csv.py --idx-dir ~/fmnist --out-dir ~/fmnist-csv
    CRMLAB_FMNIST_DIR=~/fmnist-csv pytest tests/test_acceptance.py -m slow

Expect roughly a gigabyte of CSV: exact decimal round-tripping of 47 million
pixels is not compact. The acceptance run reads it back once per trial.
"""

import argparse
import gzip
import pathlib
import struct

import numpy as np

from crmlab import LabeledDataset, save_labeled

IMAGE_MAGIC, LABEL_MAGIC = 2051, 2049


def open_idx(directory, stem):
    """Open an IDX file, transparently handling a .gz suffix."""
    plain = directory / stem
    if plain.exists():
        return open(plain, "rb")
    gz = directory / (stem + ".gz")
    if gz.exists():
        return gzip.open(gz, "rb")
    raise FileNotFoundError(f"{plain} (or .gz) not found")


def read_images(directory, stem):
    with open_idx(directory, stem) as fh:
        magic, count, rows, cols = struct.unpack(">4i", fh.read(16))
        if magic != IMAGE_MAGIC:
            raise ValueError(f"{stem}: bad magic {magic}, expected {IMAGE_MAGIC}")
        raw = np.frombuffer(fh.read(count * rows * cols), dtype=np.uint8)
    return raw.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_labels(directory, stem):
    with open_idx(directory, stem) as fh:
        magic, count = struct.unpack(">2i", fh.read(8))
        if magic != LABEL_MAGIC:
            raise ValueError(f"{stem}: bad magic {magic}, expected {LABEL_MAGIC}")
        raw = np.frombuffer(fh.read(count), dtype=np.uint8)
    return raw.astype(np.int64)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--idx-dir", required=True,
                        help="directory holding the four IDX files")
    parser.add_argument("--out-dir", required=True,
                        help="directory to write train.csv and test.csv into")
    args = parser.parse_args()

    idx_dir = pathlib.Path(args.idx_dir).expanduser()
    out_dir = pathlib.Path(args.out_dir).expanduser()
    out_dir.mkdir(parents=True, exist_ok=True)

    for split, image_stem, label_stem in (
        ("train", "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("test", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ):
        images = read_images(idx_dir, image_stem)
        labels = read_labels(idx_dir, label_stem)
        if len(images) != len(labels):
            raise ValueError(f"{split}: {len(images)} images vs {len(labels)} labels")
        out = out_dir / f"{split}.csv"
        save_labeled(out, LabeledDataset(images, labels, 10))
        print(f"wrote {out} ({len(images)} rows, d={images.shape[1]})")


if __name__ == "__main__":
    main()
