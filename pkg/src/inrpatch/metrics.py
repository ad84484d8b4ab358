"""Pixel-statistics Frechet distance (pfd), a network-free stand-in for FID.

Feature map (12 dims) for an (S, S, 3) image x with values in [0, 1], per
channel c:

    mean_c   = mean(x_c)
    std_c    = population std of x_c
    grad_c   = mean of 2x2 block means of |grad x_c|, where
               |grad x_c| = sqrt(dx^2 + dy^2) with forward differences on the
               (S-1) x (S-1) interior, block-averaged over its largest even crop
    hf_c     = mean((x_c - up2(avgpool2(x_c)))^2), the energy removed by one
               2x box-downsample/upsample round trip

Features are concatenated as [mean, std, grad, hf], each ordered R, G, B.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class FeatureStats:
    mu: np.ndarray
    cov: np.ndarray

    @classmethod
    def from_features(cls, feats):
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or len(feats) < 2:
            raise ValueError("need at least two feature vectors")
        return cls(feats.mean(axis=0), np.cov(feats, rowvar=False))


def features(img):
    x = np.asarray(img, dtype=np.float64)
    S = x.shape[0]
    if x.ndim != 3 or x.shape[1] != S or x.shape[2] != 3 or S < 3 or S % 2:
        raise ValueError(f"features expects an even-sided (S, S, 3) image, got {x.shape}")
    mean = x.mean(axis=(0, 1))
    std = x.std(axis=(0, 1))
    dx = x[:-1, 1:] - x[:-1, :-1]
    dy = x[1:, :-1] - x[:-1, :-1]
    g = np.sqrt(dx * dx + dy * dy)
    e = ((S - 1) // 2) * 2
    blocks = g[:e, :e].reshape(e // 2, 2, e // 2, 2, 3).mean(axis=(1, 3))
    grad = blocks.mean(axis=(0, 1))
    pooled = x.reshape(S // 2, 2, S // 2, 2, 3).mean(axis=(1, 3))
    up = np.repeat(np.repeat(pooled, 2, axis=0), 2, axis=1)
    hf = ((x - up) ** 2).mean(axis=(0, 1))
    return np.concatenate([mean, std, grad, hf])


def image_stats(images):
    return FeatureStats.from_features([features(im) for im in images])


def _check_symmetric(c, name):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"{name} must be square, got shape {c.shape}")
    tol = 1e-9 * max(1.0, np.abs(c).max())
    if np.abs(c - c.T).max() > tol:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (c + c.T)


def sqrt_psd(c):
    """Symmetric square root via Jacobi eigendecomposition; negative eigenvalues clamp to 0."""
    w, v = kernels.jacobi_eigh(c)
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def pfd(a, b):
    ca = _check_symmetric(a.cov, "stats_a.cov")
    cb = _check_symmetric(b.cov, "stats_b.cov")
    diff = np.asarray(a.mu, np.float64) - np.asarray(b.mu, np.float64)
    ra = sqrt_psd(ca)
    m = ra @ cb @ ra
    w, _ = kernels.jacobi_eigh(0.5 * (m + m.T))
    tr_sqrt = np.sqrt(np.maximum(w, 0.0)).sum()
    val = float(diff @ diff + np.trace(ca) + np.trace(cb) - 2.0 * tr_sqrt)
    return max(val, 0.0)
