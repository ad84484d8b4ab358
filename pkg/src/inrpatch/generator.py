"""Coordinate-MLP generator G(x, y; z).

Per-sample path (mapping network and modulation affines) runs once per
latent; per-pixel path (Fourier features, learned constant, modulated MLP,
RGB head) runs once per coordinate. Every op on the per-pixel path has an
output size proportional to the number of coordinates, which is what makes
the activation count scale exactly with the grid size.
"""
from dataclasses import dataclass, asdict
import copy

import numpy as np

from . import autodiff as ad
from .coords import CoordGrid, normalize, stage_density
from .profiler import scope
from .rng import Rng

STRATEGIES = ("random", "nearest", "bilinear", "remove")


@dataclass
class GeneratorConfig:
    z_dim: int = 128
    w_dim: int = 64
    width: int = 128
    depth: int = 6
    embed_pairs: int = 64
    fourier_sigma: float = 10.0
    const_dim: int = 32
    slope: float = 0.2

    def to_dict(self):
        return asdict(self)


class GeneratorParams:
    """All state of one stage's generator.

    ``params`` holds the learnable tensors by name; ``fourier_basis`` is a
    fixed (embed_pairs, 2) matrix shared by every stage.
    """

    def __init__(self, cfg, H, stage, strategy, params, fourier_basis):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown init strategy {strategy!r}; expected one of {STRATEGIES}")
        self.cfg = cfg
        self.H = H
        self.stage = stage
        self.strategy = strategy
        self.params = params
        self.fourier_basis = fourier_basis

    @property
    def N(self):
        return stage_density(self.H, self.stage)

    @property
    def has_const(self):
        return "const" in self.params

    def mlp_names(self):
        return [k for k in self.params if k != "const"]

    def clone(self):
        params = {k: ad.parameter(v.data.copy()) for k, v in self.params.items()}
        return GeneratorParams(copy.copy(self.cfg), self.H, self.stage, self.strategy,
                               params, self.fourier_basis.copy())

    def frozen(self):
        """Copy whose tensors never require grad."""
        g = self.clone()
        for p in g.params.values():
            p.requires_grad = False
        return g


def _dense_init(rng, fan_in, fan_out, gain=np.sqrt(2.0)):
    return (rng.normal((fan_in, fan_out)) * (gain / np.sqrt(fan_in))).astype(np.float32)


def init_generator(cfg, H, seed, strategy="nearest", stage=1):
    rng = Rng(seed).spawn("generator")
    p = {}
    p["map.0.w"] = _dense_init(rng, cfg.z_dim, cfg.w_dim)
    p["map.0.b"] = np.zeros(cfg.w_dim, np.float32)
    p["map.1.w"] = _dense_init(rng, cfg.w_dim, cfg.w_dim)
    p["map.1.b"] = np.zeros(cfg.w_dim, np.float32)
    fan = 2 * cfg.embed_pairs + (0 if strategy == "remove" else cfg.const_dim)
    for i in range(cfg.depth):
        p[f"synth.{i}.w"] = _dense_init(rng, fan, cfg.width)
        p[f"synth.{i}.b"] = np.zeros(cfg.width, np.float32)
        p[f"synth.{i}.mod_w"] = _dense_init(rng, cfg.w_dim, cfg.width, gain=0.1)
        p[f"synth.{i}.mod_b"] = np.ones(cfg.width, np.float32)
        fan = cfg.width
    p["rgb.w"] = _dense_init(rng, cfg.width, 3, gain=1.0)
    p["rgb.b"] = np.zeros(3, np.float32)
    basis = (rng.normal((cfg.embed_pairs, 2)) * cfg.fourier_sigma).astype(np.float32)
    params = {k: ad.parameter(v) for k, v in p.items()}
    if strategy != "remove":
        N = stage_density(H, stage)
        params["const"] = ad.parameter(rng.normal((N * N, cfg.const_dim)).astype(np.float32))
    return GeneratorParams(cfg, H, stage, strategy, params, basis)


# ----------------------------------------------------------------------------
# forward pieces


def mapping_forward(gen, z):
    """Style vectors w (B, w_dim) from latents z (B, z_dim)."""
    p, s = gen.params, gen.cfg.slope
    h = ad.leaky_relu(ad.add(ad.matmul(z, p["map.0.w"]), p["map.0.b"]), s)
    return ad.leaky_relu(ad.add(ad.matmul(h, p["map.1.w"]), p["map.1.b"]), s)


def fourier_embed(gen, coords):
    """[sin(B p), cos(B p)] for normalized coords p, shape (P, 2*embed_pairs)."""
    c = np.asarray(coords, dtype=np.float64)
    b = gen.fourier_basis.astype(np.float64)
    proj = c[:, 0:1] * b[None, :, 0] + c[:, 1:2] * b[None, :, 1]
    proj = ad.const(proj.astype(np.float32))
    return ad.concat([ad.sin(proj), ad.cos(proj)], axis=1)


def const_lookup(gen, grid):
    """Learned-constant vectors at the lattice points of ``grid``; None if removed."""
    if not gen.has_const:
        return None
    if grid.N != gen.N:
        raise ValueError(f"grid density {grid.N} does not match stage lattice {gen.N}")
    r, c = grid.origin
    return ad.window2d(gen.params["const"], gen.N, r, c, grid.side)


def const_at(gen, pixels):
    """Learned constant at arbitrary pixel coordinates (not differentiable).

    Inside the image, [0, H) per axis, values are bilinearly interpolated on
    the stage lattice with edge clamping; lattice points return their stored
    vector exactly. Outside the image the constant is zero.
    """
    if not gen.has_const:
        return None
    N, stride = gen.N, gen.H // gen.N
    table = gen.params["const"].data.reshape(N, N, -1)
    px = np.asarray(pixels, dtype=np.float64)
    u = np.clip(px[:, 0] / stride, 0, N - 1)
    v = np.clip(px[:, 1] / stride, 0, N - 1)
    c0 = np.floor(u).astype(np.int64)
    r0 = np.floor(v).astype(np.int64)
    c1 = np.minimum(c0 + 1, N - 1)
    r1 = np.minimum(r0 + 1, N - 1)
    fu = (u - c0)[:, None]
    fv = (v - r0)[:, None]
    top = table[r0, c0] * (1 - fu) + table[r0, c1] * fu
    bot = table[r1, c0] * (1 - fu) + table[r1, c1] * fu
    out = top * (1 - fv) + bot * fv
    inside = ((px[:, 0] >= 0) & (px[:, 0] < gen.H) & (px[:, 1] >= 0) & (px[:, 1] < gen.H))
    out[~inside] = 0.0
    return ad.const(out.astype(np.float32))


def synthesize(gen, w, feats):
    """Modulated MLP on per-pixel features (P, F) for styles w (B, w_dim) -> (B, P, 3)."""
    p, s = gen.params, gen.cfg.slope
    B = w.shape[0]
    with scope("G.map"):
        scales = [ad.reshape(ad.add(ad.matmul(w, p[f"synth.{i}.mod_w"]), p[f"synth.{i}.mod_b"]),
                             (B, 1, gen.cfg.width))
                  for i in range(gen.cfg.depth)]
    h = feats
    for i in range(gen.cfg.depth):
        pre = ad.matmul(h, p[f"synth.{i}.w"])
        if i == 0:
            pre = ad.reshape(pre, (1,) + tuple(pre.shape))   # shared across the batch
        pre = ad.add(ad.mul(pre, scales[i]), p[f"synth.{i}.b"])
        h = ad.leaky_relu(pre, s)
    return ad.sigmoid(ad.add(ad.matmul(h, p["rgb.w"]), p["rgb.b"]))


def generate(gen, z, grid):
    """Render ``grid`` for each latent: (B, side, side, 3) in (0, 1)."""
    z = ad._as_tensor(z)
    B = z.shape[0]
    with scope("G.map"):
        w = mapping_forward(gen, z)
    with scope("G.synth"):
        coords = normalize(grid.pixels(), gen.H, gen.H)
        feats = fourier_embed(gen, coords)
        const = const_lookup(gen, grid)
        if const is not None:
            feats = ad.concat([feats, const], axis=1)
        rgb = synthesize(gen, w, feats)
        return ad.reshape(rgb, (B, grid.side, grid.side, 3))


def generate_at(gen, z, pixels, side):
    """Render arbitrary (side*side, 2) pixel coordinates; used for inference."""
    z = ad._as_tensor(z)
    B = z.shape[0]
    with scope("G.map"):
        w = mapping_forward(gen, z)
    with scope("G.synth"):
        feats = fourier_embed(gen, normalize(pixels, gen.H, gen.H))
        const = const_at(gen, pixels)
        if const is not None:
            feats = ad.concat([feats, const], axis=1)
        rgb = synthesize(gen, w, feats)
        return ad.reshape(rgb, (B, side, side, 3))


# ----------------------------------------------------------------------------
# stage transition


def upsample_const(table, N, strategy, rng=None):
    """Re-initialise an (N*N, C) constant at (2N)^2 resolution."""
    C = table.shape[-1]
    grid = table.reshape(N, N, C)
    if strategy == "nearest":
        up = np.repeat(np.repeat(grid, 2, axis=0), 2, axis=1)
    elif strategy == "bilinear":
        # new lattice point j sits at old lattice coordinate j/2
        pos = np.arange(2 * N) / 2.0
        i0 = np.floor(pos).astype(np.int64)
        i1 = np.minimum(i0 + 1, N - 1)
        f = (pos - i0).astype(np.float32)
        rows = grid[i0] * (1 - f)[:, None, None] + grid[i1] * f[:, None, None]
        up = rows[:, i0] * (1 - f)[None, :, None] + rows[:, i1] * f[None, :, None]
    elif strategy == "random":
        if rng is None:
            raise ValueError("random re-initialisation needs an rng")
        up = rng.normal((2 * N, 2 * N, C))
    else:
        raise ValueError(f"cannot upsample with strategy {strategy!r}")
    return up.reshape(4 * N * N, C).astype(np.float32)


def transfer_weights(prev, strategy=None, next_stage=None, seed=0):
    """Initialise the next stage's generator from ``prev``.

    Every MLP tensor and the Fourier basis are copied verbatim; the learned
    constant is rebuilt at the new lattice resolution.
    """
    strategy = prev.strategy if strategy is None else strategy
    next_stage = prev.stage + 1 if next_stage is None else next_stage
    if prev.stage >= 3:
        raise ValueError("no stage after stage 3")
    if next_stage != prev.stage + 1:
        raise ValueError(f"next stage must be {prev.stage + 1}, got {next_stage}")
    if (strategy == "remove") != (prev.strategy == "remove"):
        raise ValueError("'remove' must be used for every stage or none")
    params = {k: ad.parameter(v.data.copy()) for k, v in prev.params.items() if k != "const"}
    if strategy != "remove":
        rng = Rng(seed).spawn(f"const-stage{next_stage}")
        params["const"] = ad.parameter(
            upsample_const(prev.params["const"].data, prev.N, strategy, rng))
    return GeneratorParams(copy.copy(prev.cfg), prev.H, next_stage, strategy, params,
                           prev.fourier_basis.copy())
