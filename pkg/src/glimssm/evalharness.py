"""Evaluation harness: accuracy-vs-steps curves, scan and loss ablations.

All evaluation runs in recurrent mode: per sample, a canvas at the target
resolution is scanned for t_max steps and the argmax prediction is scored
at each probe step.  Random policies are averaged over evaluation seeds;
deterministic sweeps are seed-free and run once.
"""

from __future__ import annotations

import logging
import tracemalloc
from dataclasses import dataclass, field

import numpy as np

from .movemb import encode_deltas
from .patchio import (
    DETERMINISTIC_KINDS,
    POLICY_KINDS,
    ScanPolicy,
    generate_trajectory,
    iter_trajectory,
    make_eval_canvas,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalJob:
    resolutions: tuple = (32, 64, 128)
    t_max: int = 256
    probes: tuple = (1, 2, 4, 8, 16, 32, 64, 128, 256)
    policies: tuple = ("random-image",)
    seeds: tuple = (0, 1, 2)
    batch_size: int = 64

    def __post_init__(self):
        if not self.probes:
            raise ValueError("probe list must not be empty")
        if max(self.probes) > self.t_max:
            raise ValueError(
                f"probe {max(self.probes)} beyond t_max {self.t_max}")
        for p in self.policies:
            if p not in POLICY_KINDS:
                raise ValueError(f"unknown policy {p!r}")


@dataclass
class CurvePoint:
    resolution: int
    policy: str
    seed: int
    t: int
    top1: float
    mean_r: float


@dataclass
class EvalResult:
    points: list = field(default_factory=list)
    argmax_ties: int = 0

    def top1(self, resolution, policy, t):
        """Mean top-1 over seeds at one grid point."""
        vals = [p.top1 for p in self.points
                if (p.resolution, p.policy, p.t) == (resolution, policy, t)]
        if not vals:
            raise KeyError((resolution, policy, t))
        return float(np.mean(vals))

    def seed_values(self, resolution, policy, t):
        return [p.top1 for p in self.points
                if (p.resolution, p.policy, p.t) == (resolution, policy, t)]


def _sample_rng(seed, index):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _batch_arrays(model, ds, indices, resolution, policy_kind, seed, t_max):
    """Precompute (B, T, d_image) patch vectors, move embeddings, coverage."""
    vs, ms, rs = [], [], []
    for idx in indices:
        canvas = make_eval_canvas(ds.images[idx], resolution)
        policy = ScanPolicy(policy_kind, seed=0)
        steps = generate_trajectory(canvas, policy, t_max, model.cfg.patch,
                                    rng=_sample_rng(seed, idx))
        vs.append(np.stack([g.v for g in steps]))
        ms.append(encode_deltas([g.delta for g in steps], model.move_cfg,
                                dtype=model.dtype))
        rs.append(np.array([g.r for g in steps]))
    return (np.stack(vs).astype(model.dtype), np.stack(ms),
            np.stack(rs))


def accuracy_curve(model, ds, resolution, policy_kind, t_max, probes,
                   seed=0, batch_size=64):
    """Top-1 accuracy and mean coverage at each probe step.

    Returns (acc, mean_r, ties): acc and mean_r are arrays aligned with
    `probes`; ties counts argmax ties encountered (broken toward the lowest
    class index).
    """
    probes = sorted(probes)
    n = len(ds)
    correct = np.zeros(len(probes))
    rsum = np.zeros(len(probes))
    ties = 0
    for lo in range(0, n, batch_size):
        idx = range(lo, min(lo + batch_size, n))
        v, m, r = _batch_arrays(model, ds, idx, resolution, policy_kind,
                                seed, t_max)
        labels = ds.labels[list(idx)]
        states = model.init_state(batch=len(labels))
        probe_i = 0
        for t in range(t_max):
            logits, states = model.step_batch(v[:, t], m[:, t], states)
            if probe_i < len(probes) and t + 1 == probes[probe_i]:
                top = logits.max(axis=1, keepdims=True)
                n_best = (logits == top).sum(axis=1)
                ties += int((n_best > 1).sum())
                pred = logits.argmax(axis=1)
                correct[probe_i] += (pred == labels).sum()
                rsum[probe_i] += r[:, t].sum()
                probe_i += 1
            if probe_i == len(probes):
                break
    if ties:
        log.info("argmax ties at %d sample-probes (lowest index wins)", ties)
    return correct / n, rsum / n, ties


def evaluate(model, ds, job):
    """Full grid of (resolution, policy, seed) accuracy curves."""
    result = EvalResult()
    for resolution in job.resolutions:
        for policy in job.policies:
            seeds = (job.seeds[0],) if policy in DETERMINISTIC_KINDS \
                else job.seeds
            for seed in seeds:
                acc, mean_r, ties = accuracy_curve(
                    model, ds, resolution, policy, job.t_max, job.probes,
                    seed=seed, batch_size=job.batch_size)
                result.argmax_ties += ties
                for p, a, r in zip(sorted(job.probes), acc, mean_r):
                    result.points.append(CurvePoint(
                        resolution=resolution, policy=policy, seed=seed,
                        t=p, top1=float(a), mean_r=float(r)))
    return result


def ablate_scan(model, ds, resolutions, t_max, seeds=(0, 1, 2),
                batch_size=64):
    """Policy x resolution top-1 table at t_max (random, raster, zigzag)."""
    job = EvalJob(resolutions=tuple(resolutions), t_max=t_max,
                  probes=(t_max,),
                  policies=("random-image", "raster-horizontal",
                            "zigzag-horizontal"),
                  seeds=tuple(seeds), batch_size=batch_size)
    return evaluate(model, ds, job)


def ablate_loss(model_a, model_b, ds, resolutions, t_max, probes=None,
                seeds=(0, 1, 2), batch_size=64, labels=("scheduled",
                                                        "standard-ce")):
    """Side-by-side accuracy of two models sharing one config.

    Returns rows (loss_mode, resolution, t, top1) with per-seed points
    available on the underlying results.
    """
    if model_a.cfg != model_b.cfg:
        raise ValueError(
            f"model configs differ: {model_a.cfg} vs {model_b.cfg}")
    probes = tuple(probes) if probes else (t_max,)
    job = EvalJob(resolutions=tuple(resolutions), t_max=t_max, probes=probes,
                  policies=("random-image",), seeds=tuple(seeds),
                  batch_size=batch_size)
    results = {}
    rows = []
    for tag, model in zip(labels, (model_a, model_b)):
        res = evaluate(model, ds, job)
        results[tag] = res
        for resolution in job.resolutions:
            for t in sorted(job.probes):
                rows.append((tag, resolution, t,
                             res.top1(resolution, "random-image", t)))
    return rows, results


def per_step_accuracy(model, ds, resolution, policy_kind, t_max, seed=0,
                      batch_size=64):
    """Dense per-step top-1 trace (used for oscillation analysis)."""
    acc, _, _ = accuracy_curve(model, ds, resolution, policy_kind, t_max,
                               probes=list(range(1, t_max + 1)), seed=seed,
                               batch_size=batch_size)
    return acc


def recurrent_peak_alloc(model, image, resolution, policy_kind, t_steps,
                         seed=0):
    """Peak Python-level allocation while streaming a single trajectory.

    The glimpse stream and the layer states are the only per-step storage,
    so the peak is independent of t_steps.
    """
    canvas = make_eval_canvas(image, resolution)
    policy = ScanPolicy(policy_kind, seed=seed)
    states = model.init_state(batch=1)
    logits = None
    tracemalloc.start()
    tracemalloc.reset_peak()
    for g in iter_trajectory(canvas, policy, t_steps, model.cfg.patch,
                             rng=np.random.default_rng(seed)):
        logits, states = model.step(g, states)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return peak, logits
