"""Pixel-coordinate lattices and the windows cut from them.

A :class:`CoordGrid` is a square lattice of integer pixel coordinates with
spacing ``stride = H // N``. A full grid has ``side == N`` points per axis
starting at the origin; a window (from :func:`rcrop`) is a contiguous
``side x side`` block of that lattice. Coordinates are ``(x, y)`` with x the
column and y the row, listed in row-major order.
"""
from dataclasses import dataclass

import numpy as np

STAGE_DIVISORS = {1: 4, 2: 2, 3: 1}


def stage_density(H, stage):
    """Grid density for a stage: H/4, H/2, H for stages 1, 2, 3."""
    if stage not in STAGE_DIVISORS:
        raise ValueError(f"stage must be 1, 2 or 3, got {stage}")
    if H % 4:
        raise ValueError(f"H must be divisible by 4, got {H}")
    return H // STAGE_DIVISORS[stage]


@dataclass(frozen=True)
class CoordGrid:
    H: int
    W: int
    N: int
    origin: tuple = (0, 0)   # (row, col) in lattice units
    side: int = None

    def __post_init__(self):
        if self.side is None:
            object.__setattr__(self, "side", self.N)
        _validate(self.H, self.W, self.N)
        r, c = self.origin
        if self.side < 1 or r < 0 or c < 0 or r + self.side > self.N or c + self.side > self.N:
            raise ValueError(f"window origin={self.origin} side={self.side} does not fit N={self.N}")

    @property
    def stride(self):
        return self.H // self.N

    @property
    def is_full(self):
        return self.side == self.N and self.origin == (0, 0)

    @property
    def count(self):
        return self.side * self.side

    @property
    def pixel_origin(self):
        """(row, col) pixel coordinate of the first lattice point."""
        return (self.origin[0] * self.stride, self.origin[1] * self.stride)

    def lattice_rows(self):
        return np.arange(self.origin[0], self.origin[0] + self.side)

    def lattice_cols(self):
        return np.arange(self.origin[1], self.origin[1] + self.side)

    def pixels(self):
        """(count, 2) int array of (x, y) pixel coordinates, row-major."""
        ys = self.lattice_rows() * self.stride
        xs = self.lattice_cols() * self.stride
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    def lattice_index(self):
        """Flat index of each point into the full N x N lattice, row-major."""
        rr, cc = np.meshgrid(self.lattice_rows(), self.lattice_cols(), indexing="ij")
        return (rr * self.N + cc).ravel()

    def footprint(self):
        """Pixel extent covered: ((row0, row1), (col0, col1)), half-open."""
        r0, c0 = self.pixel_origin
        ext = self.side * self.stride
        return ((r0, r0 + ext), (c0, c0 + ext))


def _validate(H, W, N):
    if H != W:
        raise ValueError(f"only square images are supported, got {H}x{W}")
    if N < 1 or H % N or W % N:
        raise ValueError(f"N={N} must divide H={H} and W={W}")


def make_grid(H, W, N):
    _validate(H, W, N)
    return CoordGrid(H, W, N)


def crop_origins(side, crop_side, align=1):
    """Admissible window origins along one axis."""
    if crop_side > side or crop_side < 1:
        raise ValueError(f"crop side {crop_side} exceeds grid side {side}")
    return np.arange(0, side - crop_side + 1, align)


def rcrop(grid, crop_side, rng, align=1):
    """Random ``crop_side``-square window of a full grid.

    The origin is uniform over all placements whose lattice indices are
    multiples of ``align``. Training uses ``align=2`` so that the window's
    :func:`parent_window` lands on the half-density lattice.
    """
    if not grid.is_full:
        raise ValueError("rcrop expects a full grid")
    starts = crop_origins(grid.side, crop_side, align)
    r = int(starts[rng.integers(0, len(starts))])
    c = int(starts[rng.integers(0, len(starts))])
    return CoordGrid(grid.H, grid.W, grid.N, (r, c), crop_side)


def parent_window(grid):
    """Same spatial footprint at half the density (the previous stage's lattice).

    The result's points are the even-index subsample of ``grid``'s points.
    """
    if grid.side % 2:
        raise ValueError(f"parent_window needs an even side, got {grid.side}")
    r, c = grid.origin
    if r % 2 or c % 2 or grid.N % 2:
        raise ValueError(f"window origin {grid.origin} is not aligned to the parent lattice")
    return CoordGrid(grid.H, grid.W, grid.N // 2, (r // 2, c // 2), grid.side // 2)


def normalize(pixels, H, W):
    """Affine map of pixel (x, y) onto [-1, 1]^2; extends linearly outside."""
    if H < 2 or W < 2:
        raise ValueError("normalize needs H, W >= 2")
    p = np.asarray(pixels, dtype=np.float64)
    out = np.empty(p.shape, dtype=np.float64)
    out[..., 0] = 2.0 * p[..., 0] / (W - 1) - 1.0
    out[..., 1] = 2.0 * p[..., 1] / (H - 1) - 1.0
    return out


def dense_pixels(H, start, count, step):
    """(count^2, 2) pixel coordinates on a square lattice starting at ``start``.

    Used at inference: ``step < 1`` gives super-resolution grids and a negative
    ``start`` extends past the image boundary.
    """
    axis = start + step * np.arange(count, dtype=np.float64)
    yy, xx = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)
