"""Fixed-input-size patch discriminator.

Three stride-2 convolutions (kernel 4, padding 1, so each halves the side
exactly) with leaky ReLU, then a dense layer to one logit per sample. The
input side is fixed at construction; every training stage feeds it arrays of
that side.
"""
from dataclasses import dataclass, asdict, field

import numpy as np

from . import autodiff as ad
from .profiler import scope
from .rng import Rng


@dataclass
class DiscConfig:
    channels: list = field(default_factory=lambda: [32, 64, 128])
    kernel: int = 4
    slope: float = 0.2
    policy: str = "carry"      # "carry" or "reset" at stage transitions

    def to_dict(self):
        return asdict(self)


class DiscParams:
    def __init__(self, cfg, side, params):
        self.cfg = cfg
        self.side = side
        self.params = params

    def clone(self):
        return DiscParams(DiscConfig(**self.cfg.to_dict()), self.side,
                          {k: ad.parameter(v.data.copy()) for k, v in self.params.items()})


def _final_side(side, n_layers):
    s = side
    for _ in range(n_layers):
        if s % 2:
            raise ValueError(f"patch side {side} must be divisible by {2 ** n_layers}")
        s //= 2
    return s


def reset(cfg, side, seed):
    """Fresh seeded discriminator for ``side x side`` RGB inputs."""
    rng = Rng(seed).spawn("discriminator")
    p = {}
    c_in = 3
    for i, c_out in enumerate(cfg.channels):
        fan = c_in * cfg.kernel * cfg.kernel
        p[f"conv.{i}.w"] = (rng.normal((c_out, c_in, cfg.kernel, cfg.kernel))
                            * np.sqrt(2.0 / fan)).astype(np.float32)
        p[f"conv.{i}.b"] = np.zeros((1, c_out, 1, 1), np.float32)
        c_in = c_out
    fs = _final_side(side, len(cfg.channels))
    fan = c_in * fs * fs
    p["fc.w"] = (rng.normal((fan, 1)) / np.sqrt(fan)).astype(np.float32)
    p["fc.b"] = np.zeros(1, np.float32)
    return DiscParams(cfg, side, {k: ad.parameter(v) for k, v in p.items()})


def carry_over(prev):
    """Keep the discriminator across a stage transition (verbatim copy)."""
    return prev.clone()


def disc_forward(disc, batch):
    """Logits (B,) for images (B, 3, side, side) with values in [0, 1]."""
    batch = ad._as_tensor(batch)
    if batch.data.ndim != 4 or batch.shape[1:] != [3, disc.side, disc.side]:
        raise ValueError(f"discriminator expects (B, 3, {disc.side}, {disc.side}), got {batch.shape}")
    p, slope = disc.params, disc.cfg.slope
    B = batch.shape[0]
    with scope("D"):
        h = ad.add(ad.scale(batch, 2.0), -1.0)
        for i in range(len(disc.cfg.channels)):
            h = ad.conv2d(h, p[f"conv.{i}.w"], stride=2, pad=(disc.cfg.kernel - 2) // 2)
            h = ad.leaky_relu(ad.add(h, p[f"conv.{i}.b"]), slope)
        h = ad.reshape(h, (B, -1))
        out = ad.add(ad.matmul(h, p["fc.w"]), p["fc.b"])
        return ad.reshape(out, (B,))
