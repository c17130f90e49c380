"""Checkpoint serialization.

A checkpoint is a directory: a text manifest (key = value lines carrying
the format version, config, seed and per-tensor shapes) plus one flat
little-endian fp32 blob per parameter under params/, and optional extra
tensors (optimizer state) under extras/.  Loading validates every shape.
"""

from __future__ import annotations

import os

import numpy as np

from .model import GlimpseClassifier, ModelConfig

FORMAT_VERSION = 1

_CONFIG_FIELDS = ("n_layers", "d_model", "patch", "n_classes", "d_move_emb",
                  "channels", "d_state", "expand", "head_dim", "conv_width",
                  "chunk")


class CheckpointError(ValueError):
    pass


def _blob_name(name):
    return name.replace("/", "_") + ".bin"


def _write_blob(path, arr):
    arr.astype("<f4").tofile(path)


def _read_blob(path, shape):
    arr = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape)) if shape else 1
    if arr.size != expected:
        raise CheckpointError(
            f"{path}: blob holds {arr.size} values, expected {expected}")
    return arr.reshape(shape)


def _fmt_shape(shape):
    return "x".join(str(int(s)) for s in shape) if shape else "scalar"


def _parse_shape(text):
    return () if text == "scalar" else tuple(int(p) for p in text.split("x"))


def save_checkpoint(path, config, params, meta=None, extras=None):
    """params/extras: dicts name -> ndarray; meta: dict of str -> str."""
    os.makedirs(os.path.join(path, "params"), exist_ok=True)
    if extras:
        os.makedirs(os.path.join(path, "extras"), exist_ok=True)
    lines = [f"format_version = {FORMAT_VERSION}"]
    for key in sorted((meta or {})):
        lines.append(f"meta.{key} = {meta[key]}")
    for key in _CONFIG_FIELDS:
        lines.append(f"config.{key} = {getattr(config, key)}")
    for name in sorted(params):
        arr = params[name]
        lines.append(f"param.{name}.shape = {_fmt_shape(arr.shape)}")
        _write_blob(os.path.join(path, "params", _blob_name(name)), arr)
    for name in sorted(extras or {}):
        arr = extras[name]
        lines.append(f"extra.{name}.shape = {_fmt_shape(arr.shape)}")
        _write_blob(os.path.join(path, "extras", _blob_name(name)), arr)
    with open(os.path.join(path, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_manifest(path):
    manifest = os.path.join(path, "manifest.txt")
    if not os.path.exists(manifest):
        raise CheckpointError(f"{path}: no manifest.txt")
    entries = {}
    with open(manifest) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    version = int(entries.get("format_version", "-1"))
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version}")
    return entries


def load_checkpoint(path):
    """Returns (ModelConfig, params dict, meta dict, extras dict)."""
    entries = _parse_manifest(path)
    cfg_kwargs = {}
    for key in _CONFIG_FIELDS:
        raw = entries.get(f"config.{key}")
        if raw is None:
            raise CheckpointError(f"{path}: manifest missing config.{key}")
        cfg_kwargs[key] = int(raw)
    config = ModelConfig(**cfg_kwargs)
    meta, params, extras = {}, {}, {}
    for key, value in entries.items():
        if key.startswith("meta."):
            meta[key[5:]] = value
        elif key.startswith("param.") and key.endswith(".shape"):
            name = key[len("param."):-len(".shape")]
            params[name] = _read_blob(
                os.path.join(path, "params", _blob_name(name)),
                _parse_shape(value))
        elif key.startswith("extra.") and key.endswith(".shape"):
            name = key[len("extra."):-len(".shape")]
            extras[name] = _read_blob(
                os.path.join(path, "extras", _blob_name(name)),
                _parse_shape(value))
    return config, params, meta, extras


def save_model(path, model, meta=None, extras=None):
    params = {k: v.data for k, v in model.parameters().items()}
    save_checkpoint(path, model.cfg, params, meta=meta, extras=extras)


def load_model(path, dtype=np.float32):
    """Rebuild a model from a checkpoint, validating every parameter shape."""
    config, params, meta, extras = load_checkpoint(path)
    model = GlimpseClassifier(config, seed=0, dtype=dtype)
    own = model.parameters()
    missing = sorted(set(own) - set(params))
    surplus = sorted(set(params) - set(own))
    if missing or surplus:
        raise CheckpointError(
            f"{path}: parameter set mismatch; missing {missing}, "
            f"unexpected {surplus}")
    for name, tensor in own.items():
        blob = params[name]
        if blob.shape != tensor.data.shape:
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: checkpoint "
                f"{blob.shape} vs model {tensor.data.shape}")
        tensor.data = blob.astype(model.dtype)
    return model, meta, extras
