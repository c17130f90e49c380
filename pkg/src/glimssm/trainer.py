"""Optimization loop: AdamW with warmup+cosine decay, per-epoch metrics,
resumable checkpoints, and a run manifest sufficient to reproduce a run.

All randomness derives from a single seed: per-(epoch, sample) generators
are spawned from numpy SeedSequences, so a resumed run replays the exact
stream of the uninterrupted one.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import numgrad as ng
from .numgrad import Tape
from .checkpoint import load_checkpoint, save_model
from .evalharness import accuracy_curve
from .losses import LossConfig, sequence_loss
from .model import GlimpseClassifier
from .movemb import encode_deltas
from .patchio import (
    AugmentConfig,
    ScanPolicy,
    augment,
    dataset_hash,
    generate_trajectory,
    make_train_canvas,
)
from .ssm import scan_backend

log = logging.getLogger(__name__)

METRICS_HEADER = "epoch,split,loss,acc@T"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    peak_lr: float = 1e-3
    warmup_epochs: int = 2
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.05
    t_train: int = 256
    seed: int = 0
    phase: str = "pretrain"          # or "finetune" (constant lr)
    policy: str = "random-image"
    canvas_min: int = 32
    canvas_max: int = 64
    grad_accum: int = 1
    eval_every: int = 0              # epochs between val probes; 0 = final only
    eval_t: int = 256
    eval_resolution: int = 64
    eval_samples: int = 256
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if self.phase not in ("pretrain", "finetune"):
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup must not exceed total epochs")
        if self.grad_accum < 1 or self.batch_size % self.grad_accum:
            raise ValueError("grad_accum must divide batch_size")


def lr_at(step, total_steps, warmup_steps, cfg):
    """Linear warmup to the peak, cosine decay to zero at the final step.

    The finetune phase uses the configured rate as a constant.
    """
    if cfg.phase == "finetune":
        return cfg.peak_lr
    if warmup_steps > 0 and step < warmup_steps:
        return cfg.peak_lr * step / warmup_steps
    if total_steps <= warmup_steps:
        return cfg.peak_lr
    frac = (step - warmup_steps) / (total_steps - warmup_steps)
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * min(frac, 1.0)))


class AdamW:
    """Decoupled weight decay Adam with bias correction."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        self.params = dict(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self, grads, lr):
        """Apply one update; returns False (and skips) on non-finite grads."""
        if any(not np.isfinite(g).all() for g in grads.values()):
            log.warning("skipping optimizer step %d: non-finite gradients",
                        self.t + 1)
            return False
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name].astype(p.data.dtype, copy=False)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= (lr * update).astype(p.data.dtype)
        return True

    def state_arrays(self):
        out = {"opt.t": np.array([float(self.t)], dtype=np.float32)}
        for name in self.params:
            out[f"opt.m.{name}"] = self.m[name]
            out[f"opt.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, extras):
        self.t = int(extras["opt.t"][0])
        for name, p in self.params.items():
            self.m[name] = extras[f"opt.m.{name}"].astype(p.data.dtype)
            self.v[name] = extras[f"opt.v.{name}"].astype(p.data.dtype)


def _sample_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=tuple(int(k) for k in key)))


def _assemble_batch(model, ds, indices, cfg, epoch):
    """Augment, paste, scan: per-sample arrays stacked into batch tensors."""
    vs, ms, rs = [], [], []
    for idx in indices:
        rng = _sample_rng(cfg.seed, 1, epoch, idx)
        img = augment(ds.images[idx], cfg.augment, rng)
        canvas = make_train_canvas(img, cfg.canvas_min, cfg.canvas_max, rng)
        steps = generate_trajectory(canvas, ScanPolicy(cfg.policy),
                                    cfg.t_train, model.cfg.patch, rng=rng)
        vs.append(np.stack([g.v for g in steps]))
        ms.append(encode_deltas([g.delta for g in steps], model.move_cfg,
                                dtype=model.dtype))
        rs.append(np.array([g.r for g in steps]))
    labels = ds.labels[list(indices)]
    return (np.stack(vs).astype(model.dtype), np.stack(ms), np.stack(rs),
            labels)


def _batch_gradients(model, loss_cfg, v, m, r, labels, accum):
    """Loss and parameter gradients, optionally via micro-batch accumulation."""
    params = model.parameters()
    names = list(params)
    micro = len(labels) // accum
    total_loss = 0.0
    acc_grads = None
    for k in range(accum):
        sl = slice(k * micro, (k + 1) * micro)
        with Tape() as tape:
            logits = model.forward_batch(v[sl], m[sl])
            loss = sequence_loss(logits, r[sl], labels[sl], loss_cfg)
        grads = tape.gradients(loss, list(params.values()))
        weight = micro / len(labels)
        total_loss += loss.item() * weight
        if acc_grads is None:
            acc_grads = {n: g * weight for n, g in zip(names, grads)}
        else:
            for n, g in zip(names, grads):
                acc_grads[n] += g * weight
    return total_loss, acc_grads


@dataclass
class TrainResult:
    out_dir: str
    metrics: list
    best_acc: float
    final_loss: float

    @property
    def best_checkpoint(self):
        return os.path.join(self.out_dir, "ckpt_best")

    @property
    def last_checkpoint(self):
        return os.path.join(self.out_dir, "ckpt_last")


def _write_metrics(path, rows):
    with open(path, "w") as fh:
        fh.write(METRICS_HEADER + "\n")
        for epoch, split, loss, acc in rows:
            loss_s = "" if loss is None else f"{loss:.8f}"
            acc_s = "" if acc is None else f"{acc:.6f}"
            fh.write(f"{epoch},{split},{loss_s},{acc_s}\n")


def _val_accuracy(model, val_ds, cfg):
    n = min(cfg.eval_samples, len(val_ds))
    subset = type(val_ds)(val_ds.images[:n], val_ds.labels[:n],
                          val_ds.n_classes, val_ds.class_names)
    acc, _, _ = accuracy_curve(model, subset, cfg.eval_resolution,
                               "random-image", cfg.eval_t, [cfg.eval_t],
                               seed=cfg.seed + 7919)
    return float(acc[0])


def train(train_ds, val_ds, model_cfg, train_cfg, out_dir,
          loss_mode="scheduled", resume_from=None, stop_after=None):
    """Run the full loop; writes metrics.csv, run_manifest.json and
    ckpt_best/ckpt_last under out_dir.  `resume_from` restarts
    deterministically from a saved checkpoint directory; `stop_after`
    interrupts after that many epochs (the schedule still spans the full
    configured run, so a later resume replays the uninterrupted stream)."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = train_cfg
    loss_cfg = LossConfig(loss_mode, model_cfg.n_classes)
    model = GlimpseClassifier(model_cfg, seed=cfg.seed)
    opt = AdamW(model.parameters(), beta1=cfg.beta1, beta2=cfg.beta2,
                weight_decay=cfg.weight_decay)
    start_epoch = 0
    metrics = []
    best_acc = -1.0
    if resume_from:
        ck_cfg, params, meta, extras = load_checkpoint(resume_from)
        if ck_cfg != model_cfg:
            raise ValueError(
                f"checkpoint config {ck_cfg} does not match requested "
                f"{model_cfg}")
        if meta.get("train_seed") != str(cfg.seed):
            raise ValueError("checkpoint was produced with a different seed")
        own = model.parameters()
        for name, arr in params.items():
            own[name].data = arr.astype(model.dtype)
        opt.load_state_arrays(extras)
        start_epoch = int(meta["epoch"]) + 1
        best_acc = float(meta.get("best_acc", -1.0))
        metrics = [tuple(row) for row in
                   json.loads(meta.get("metrics_json", "[]"))]

    n = len(train_ds)
    steps_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * steps_per_epoch
    warmup_steps = cfg.warmup_epochs * steps_per_epoch

    manifest = {
        "version": __version__,
        "model_config": model_cfg.to_dict(),
        "train_config": {**asdict(cfg), "augment": asdict(cfg.augment)},
        "loss_mode": loss_mode,
        "dataset_hash": dataset_hash(train_ds),
        "val_dataset_hash": dataset_hash(val_ds) if val_ds else None,
        "move_embedding": {"d_move_emb": model_cfg.d_move_emb,
                           "freq_base": 10000.0,
                           "delta_units": "pixels-unnormalized"},
        "scan_backend": scan_backend(),
    }
    with open(os.path.join(out_dir, "run_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    final_loss = math.nan
    end_epoch = cfg.epochs if stop_after is None else min(cfg.epochs,
                                                          stop_after)
    for epoch in range(start_epoch, end_epoch):
        order = _sample_rng(cfg.seed, 0, epoch).permutation(n)
        losses = []
        for b0 in range(0, n, cfg.batch_size):
            indices = order[b0:b0 + cfg.batch_size]
            if len(indices) % cfg.grad_accum:
                accum = 1                      # ragged tail batch
            else:
                accum = cfg.grad_accum
            v, m, r, labels = _assemble_batch(model, train_ds, indices, cfg,
                                              epoch)
            step_index = epoch * steps_per_epoch + b0 // cfg.batch_size
            lr = lr_at(step_index, total_steps, warmup_steps, cfg)
            loss, grads = _batch_gradients(model, loss_cfg, v, m, r, labels,
                                           accum)
            opt.step(grads, lr)
            losses.append(loss)
        final_loss = float(np.mean(losses))
        metrics.append((epoch, "train", final_loss, None))
        log.info("epoch %d train loss %.4f", epoch, final_loss)

        want_eval = val_ds is not None and (
            epoch == cfg.epochs - 1
            or (cfg.eval_every and (epoch + 1) % cfg.eval_every == 0))
        if want_eval:
            acc = _val_accuracy(model, val_ds, cfg)
            metrics.append((epoch, "val", None, acc))
            log.info("epoch %d val acc@%d %.4f", epoch, cfg.eval_t, acc)
            if acc > best_acc:
                best_acc = acc
                _save_state(os.path.join(out_dir, "ckpt_best"), model, opt,
                            cfg, epoch, best_acc, metrics)
        _save_state(os.path.join(out_dir, "ckpt_last"), model, opt, cfg,
                    epoch, best_acc, metrics)
        _write_metrics(os.path.join(out_dir, "metrics.csv"), metrics)

    if best_acc < 0 and end_epoch > start_epoch:
        _save_state(os.path.join(out_dir, "ckpt_best"), model, opt, cfg,
                    end_epoch - 1, best_acc, metrics)
    _write_metrics(os.path.join(out_dir, "metrics.csv"), metrics)
    return TrainResult(out_dir=out_dir, metrics=metrics, best_acc=best_acc,
                       final_loss=final_loss)


def _save_state(path, model, opt, cfg, epoch, best_acc, metrics):
    meta = {
        "epoch": str(epoch),
        "train_seed": str(cfg.seed),
        "best_acc": f"{best_acc}",
        "metrics_json": json.dumps(metrics),
        "version": __version__,
    }
    save_model(path, model, meta=meta, extras=opt.state_arrays())
