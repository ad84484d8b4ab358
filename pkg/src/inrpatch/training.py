"""Stage trainer and the three-stage orchestrator.

The same loop runs all three modes:

* ``multistage``: stage 1 renders the whole H/4 lattice; stages 2 and 3 render
  a random H/4-square window of the H/2 and H lattices and add the patch
  regularizer against a frozen copy of the previous stage.
* ``image_based``: the full H lattice every iteration, one stage.
* ``patch_based``: a random H/4 window of the H lattice from the first
  iteration, adversarial loss only.
"""
from dataclasses import dataclass, asdict
import time

import numpy as np

from . import autodiff as ad
from . import coords
from .data import real_batch
from .discriminator import carry_over, disc_forward, reset
from .generator import generate, init_generator, transfer_weights
from .losses import adv_loss_d, adv_loss_g, d_reg, patch_reg
from .profiler import ActivationCounter
from .rng import Rng


@dataclass
class TrainingMetrics:
    iter: int
    stage: int
    g_loss: float
    d_loss: float
    patch_loss: float
    activations_fwd: int     # per-pixel activations of one generator forward
    fwd_total: int           # all G and D forward activations this iteration
    peak_floats: int
    wall_ms: float
    pfd: float = None

    def to_dict(self):
        return asdict(self)


def _set_trainable(params, flag):
    for p in params.values():
        p.requires_grad = flag


def training_grid(mode, stage, H, crop_side, rng):
    """Coordinates the generator renders this iteration."""
    if mode == "image_based":
        return coords.make_grid(H, H, H)
    if mode == "patch_based":
        return coords.rcrop(coords.make_grid(H, H, H), crop_side, rng)
    N = coords.stage_density(H, stage)
    if stage == 1:
        return coords.make_grid(H, H, N)
    return coords.rcrop(coords.make_grid(H, H, N), crop_side, rng, align=2)


def _to_nchw(img):
    return ad.transpose(img, (0, 3, 1, 2))


def train_stage(cfg, gen, frozen_prev, disc, data, rng, *, mode="multistage", optim=None,
                g_state=None, d_state=None, patch_norm="l2", budget_s=None,
                start_iter=0, on_iter=None):
    """Train one stage. Returns (gen, disc, [TrainingMetrics], g_state, d_state).

    Runs ``cfg.iters`` iterations, or until ``budget_s`` seconds have passed
    when a budget is given. ``on_iter(metrics, gen)`` is called after each one.
    """
    H = gen.H
    stage = cfg.stage
    if mode == "multistage" and (stage == 1) != (frozen_prev is None):
        raise ValueError("stage 1 trains without a previous generator; stages 2-3 need one")
    crop = cfg.crop_side or H // 4
    optim = optim or {}
    g_state = g_state or ad.AdamState(**optim)
    d_state = d_state or ad.AdamState(**optim)
    use_reg = mode == "multistage" and frozen_prev is not None and cfg.lambda_patch > 0
    squared = patch_norm == "squared"
    B = cfg.batch
    log = []
    counter = ActivationCounter()
    t_start = time.perf_counter()
    it = 0
    with counter:
        while True:
            if budget_s is not None:
                if time.perf_counter() - t_start >= budget_s:
                    break
            elif it >= cfg.iters:
                break
            t0 = time.perf_counter()
            counter.reset()
            z = rng.normal((B, gen.cfg.z_dim)).astype(np.float32)
            grid = training_grid(mode, stage, H, crop, rng)
            real = real_batch(data, stage, B, rng, mode=mode)

            # discriminator step
            _set_trainable(gen.params, False)
            _set_trainable(disc.params, True)
            with ad.Tape() as tape_d:
                fake = generate(gen, z, grid)
                loss_d = adv_loss_d(disc_forward(disc, real), disc_forward(disc, _to_nchw(fake)))
                total_d = loss_d
                if cfg.d_reg_weight > 0 and it % cfg.d_reg_every == 0:
                    pen = d_reg(disc, real, cfg.d_reg_eps, rng)
                    total_d = ad.add(loss_d, ad.scale(pen, cfg.d_reg_weight * cfg.d_reg_every))
            gd = ad.backward(tape_d, total_d)
            ad.adam_step(disc.params, ad.grads_by_name(tape_d, gd, disc.params), d_state)

            # generator step
            _set_trainable(gen.params, True)
            _set_trainable(disc.params, False)
            with ad.Tape() as tape_g:
                before = counter.counts["G.synth"]
                fake = generate(gen, z, grid)
                per_forward = counter.counts["G.synth"] - before
                loss_g = adv_loss_g(disc_forward(disc, _to_nchw(fake)))
                total_g = loss_g
                patch_val = 0.0
                if use_reg:
                    pr = patch_reg(fake, frozen_prev, z, grid, squared=squared)
                    patch_val = pr.item()
                    total_g = ad.add(loss_g, ad.scale(pr, cfg.lambda_patch))
            gg = ad.backward(tape_g, total_g)
            ad.adam_step(gen.params, ad.grads_by_name(tape_g, gg, gen.params), g_state)
            _set_trainable(disc.params, True)

            m = TrainingMetrics(
                iter=start_iter + it, stage=stage,
                g_loss=loss_g.item(), d_loss=loss_d.item(), patch_loss=patch_val,
                activations_fwd=per_forward, fwd_total=counter.fwd_count(),
                peak_floats=max(tape_d.peak_live_floats, tape_g.peak_live_floats),
                wall_ms=(time.perf_counter() - t0) * 1000.0)
            log.append(m)
            if on_iter is not None:
                on_iter(m, gen)
            it += 1
    return gen, disc, log, g_state, d_state


def _stage_seed(seed, tag):
    return Rng(seed).spawn(tag).seed


def run_multistage(cfg, data, on_stage_end=None, on_iter=None):
    """Train G1 -> G2 -> G3. Returns {"generators": {1: G1, 2: G2, 3: G3}, "disc", "log"}.

    Before stages 2 and 3 the previous generator is frozen and copied into the
    next via :func:`transfer_weights`; the discriminator is carried over or
    reset per ``cfg.discriminator.policy``.
    """
    if cfg.mode != "multistage":
        raise ValueError("run_multistage needs mode 'multistage'")
    H = cfg.H
    rng = Rng(cfg.seed).spawn("train")
    gen = init_generator(cfg.generator, H, _stage_seed(cfg.seed, "G"), cfg.init_strategy, stage=1)
    disc = reset(cfg.discriminator, H // 4, _stage_seed(cfg.seed, "D1"))
    budget = None if cfg.budget_seconds is None else cfg.budget_seconds / 3.0
    gens, log = {}, []
    frozen = None
    for i, scfg in enumerate(cfg.stages, start=1):
        if i > 1:
            frozen = gens[i - 1].frozen()
            gen = transfer_weights(gens[i - 1], cfg.init_strategy, i,
                                   seed=_stage_seed(cfg.seed, f"const{i}"))
            if cfg.discriminator.policy == "reset":
                disc = reset(cfg.discriminator, H // 4, _stage_seed(cfg.seed, f"D{i}"))
            else:
                disc = carry_over(disc)
            if disc.side != H // 4:
                raise AssertionError("discriminator input side changed across stages")
        gen, disc, stage_log, _, _ = train_stage(
            scfg, gen, frozen, disc, data, rng, optim=vars(cfg.optim),
            patch_norm=cfg.patch_norm, budget_s=budget, start_iter=len(log), on_iter=on_iter)
        log.extend(stage_log)
        gens[i] = gen
        if on_stage_end is not None:
            on_stage_end(i, gen, disc)
    return {"generators": gens, "disc": disc, "log": log}


def run_baseline(cfg, data, on_stage_end=None, on_iter=None):
    """Single-stage image-based or patch-based training at full lattice density."""
    if cfg.mode not in ("image_based", "patch_based"):
        raise ValueError(f"run_baseline needs a baseline mode, got {cfg.mode}")
    H = cfg.H
    rng = Rng(cfg.seed).spawn("train")
    gen = init_generator(cfg.generator, H, _stage_seed(cfg.seed, "G"), cfg.init_strategy, stage=3)
    side = H if cfg.mode == "image_based" else H // 4
    disc = reset(cfg.discriminator, side, _stage_seed(cfg.seed, "D1"))
    gen, disc, log, _, _ = train_stage(
        cfg.stages[0], gen, None, disc, data, rng, mode=cfg.mode, optim=vars(cfg.optim),
        budget_s=cfg.budget_seconds, on_iter=on_iter)
    if on_stage_end is not None:
        on_stage_end(3, gen, disc)
    return {"generators": {3: gen}, "disc": disc, "log": log}


def run(cfg, data, on_stage_end=None, on_iter=None):
    if cfg.mode == "multistage":
        return run_multistage(cfg, data, on_stage_end, on_iter)
    return run_baseline(cfg, data, on_stage_end, on_iter)
