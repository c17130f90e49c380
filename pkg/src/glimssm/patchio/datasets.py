"""Labeled-image collections and the two on-disk ingestion formats.

Supported formats: raw CIFAR-10 binary batches (3073-byte records, one
label byte + 3x32x32 pixels) and an image folder, either class-per-subdir
(`root/<class>/<name>.png`) or flat with a `labels.csv` mapping.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

_CIFAR_RECORD = 3073
_CIFAR_CLASSES = 10


class DatasetError(ValueError):
    pass


@dataclass
class LabeledImages:
    images: list                 # (C, H, W) float32 arrays in [0, 1]
    labels: np.ndarray           # int64, values in [0, n_classes)
    n_classes: int
    class_names: list = field(default_factory=list)

    def __len__(self):
        return len(self.images)

    def validate(self):
        if len(self.images) != len(self.labels):
            raise DatasetError("image/label count mismatch")
        bad = np.flatnonzero((self.labels < 0) |
                             (self.labels >= self.n_classes))
        if bad.size:
            raise DatasetError(
                f"label {int(self.labels[bad[0]])} out of range "
                f"[0, {self.n_classes}) at sample {int(bad[0])}")
        return self


def load_cifar10(path):
    """Load raw CIFAR-10 binary batches from a file or directory of .bin files."""
    if os.path.isdir(path):
        files = sorted(
            os.path.join(path, f) for f in os.listdir(path)
            if f.endswith(".bin"))
        if not files:
            raise DatasetError(f"no .bin batch files in {path}")
    else:
        files = [path]
    images, labels = [], []
    for fname in files:
        raw = np.fromfile(fname, dtype=np.uint8)
        if raw.size == 0 or raw.size % _CIFAR_RECORD != 0:
            offset = (raw.size // _CIFAR_RECORD) * _CIFAR_RECORD
            raise DatasetError(
                f"{fname}: malformed record at byte offset {offset} "
                f"(file size {raw.size} not a multiple of {_CIFAR_RECORD})")
        recs = raw.reshape(-1, _CIFAR_RECORD)
        batch_labels = recs[:, 0].astype(np.int64)
        bad = np.flatnonzero(batch_labels >= _CIFAR_CLASSES)
        if bad.size:
            raise DatasetError(
                f"{fname}: label {int(batch_labels[bad[0]])} out of range at "
                f"byte offset {int(bad[0]) * _CIFAR_RECORD}")
        pixels = recs[:, 1:].reshape(-1, 3, 32, 32).astype(np.float32) / 255.0
        images.extend(pixels)
        labels.append(batch_labels)
    return LabeledImages(images, np.concatenate(labels), _CIFAR_CLASSES,
                         class_names=[str(i) for i in range(10)]).validate()


def _load_image(path):
    from PIL import Image
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_image_folder(root):
    """Load `root/<class>/<name>.png`, or flat images plus `labels.csv`."""
    if not os.path.isdir(root):
        raise DatasetError(f"dataset root {root} does not exist")
    exts = (".png", ".jpg", ".jpeg", ".bmp")
    subdirs = sorted(d for d in os.listdir(root)
                     if os.path.isdir(os.path.join(root, d)))
    images, labels = [], []
    if subdirs:
        class_names = subdirs
        for ci, cname in enumerate(class_names):
            cdir = os.path.join(root, cname)
            for fname in sorted(os.listdir(cdir)):
                if fname.lower().endswith(exts):
                    images.append(_load_image(os.path.join(cdir, fname)))
                    labels.append(ci)
    else:
        csv_path = os.path.join(root, "labels.csv")
        if not os.path.exists(csv_path):
            raise DatasetError(
                f"{root}: no class subdirectories and no labels.csv")
        with open(csv_path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if rows and rows[0][0].strip().lower() in ("filename", "file", "name"):
            rows = rows[1:]
        class_names = sorted({r[1].strip() for r in rows})
        name_to_idx = {n: i for i, n in enumerate(class_names)}
        for r in rows:
            images.append(_load_image(os.path.join(root, r[0].strip())))
            labels.append(name_to_idx[r[1].strip()])
    if not images:
        raise DatasetError(f"{root}: no samples found")
    return LabeledImages(images, np.asarray(labels, dtype=np.int64),
                         len(class_names), class_names=class_names).validate()


def dataset_hash(ds):
    """Stable content hash used in run manifests."""
    h = hashlib.sha256()
    h.update(np.int64(len(ds)).tobytes())
    h.update(ds.labels.tobytes())
    for img in ds.images:
        h.update(np.asarray(img.shape, dtype=np.int64).tobytes())
        h.update(img.astype(np.float32).tobytes())
    return h.hexdigest()
