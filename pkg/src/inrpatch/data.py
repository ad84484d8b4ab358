"""Datasets, PNG I/O and per-stage real-batch preparation."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .coords import crop_origins, stage_density
from .rng import Rng


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray               # (n, H, H, 3) float32 in [0, 1]
    source: str = "procedural"
    _levels: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        imgs = self.images
        if imgs.ndim != 4 or imgs.shape[3] != 3 or imgs.shape[1] != imgs.shape[2]:
            raise DatasetError(f"expected (n, H, H, 3) images, got {imgs.shape}")
        if len(imgs) == 0:
            raise DatasetError("dataset is empty")

    @property
    def H(self):
        return self.images.shape[1]

    def __len__(self):
        return len(self.images)

    def level(self, side):
        """All images box-downsampled to ``side`` (cached)."""
        if side not in self._levels:
            self._levels[side] = box_downsample(self.images, side)
        return self._levels[side]

    def split(self, n_first):
        return (Dataset(self.images[:n_first], self.source),
                Dataset(self.images[n_first:], self.source))


def box_downsample(images, side):
    """Average non-overlapping f x f blocks, f = H / side."""
    n, H, W, C = images.shape
    if H % side:
        raise ValueError(f"side {side} does not divide image size {H}")
    f = H // side
    if f == 1:
        return images
    return images.reshape(n, side, f, side, f, C).mean(axis=(2, 4), dtype=np.float64).astype(np.float32)


# ----------------------------------------------------------------------------
# PNG


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img):
    """Write an (H, W, 3) float image in [0, 1] as 8-bit RGB PNG."""
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def read_png(path):
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.format != "PNG":
                raise DatasetError(f"{path.name}: not a PNG file")
            if im.mode != "RGB":
                raise DatasetError(f"{path.name}: expected 8-bit RGB, got mode {im.mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except DatasetError:
        raise
    except Exception as e:
        raise DatasetError(f"{path.name}: cannot decode ({e})") from None
    return arr.astype(np.float32) / 255.0


def tile(images, cols=None):
    """Arrange (n, h, w, 3) images into one sheet."""
    n, h, w, c = images.shape
    cols = cols or int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    sheet = np.zeros((rows * h, cols * w, c), dtype=images.dtype)
    for i, im in enumerate(images):
        r, q = divmod(i, cols)
        sheet[r * h:(r + 1) * h, q * w:(q + 1) * w] = im
    return sheet


def load_folder(path):
    path = Path(path)
    if not path.is_dir():
        raise DatasetError(f"{path}: not a directory")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
    if not files:
        raise DatasetError(f"{path}: no PNG files")
    imgs = []
    for f in files:
        arr = read_png(f)
        if arr.shape[0] != arr.shape[1]:
            raise DatasetError(f"{f.name}: image is not square ({arr.shape[1]}x{arr.shape[0]})")
        if imgs and arr.shape != imgs[0].shape:
            raise DatasetError(f"{f.name}: size {arr.shape[:2]} differs from {imgs[0].shape[:2]}")
        imgs.append(arr)
    return Dataset(np.stack(imgs), source="folder")


def make_procedural(n, size, seed):
    """Landscape toy images: sky/ground split at a random horizon plus a sun disk.

    The layout is global (sky above, ground below, sun in the upper part), so
    a generator that only ever matches local patches tends to miss it.
    """
    rng = Rng(seed).spawn("procedural")
    t = (np.arange(size, dtype=np.float64) + 0.5) / size
    yy, xx = np.meshgrid(t, t, indexing="ij")
    out = np.empty((n, size, size, 3), dtype=np.float32)
    for k in range(n):
        u = rng.uniform(12)
        horizon = 0.45 + 0.2 * u[0]
        sky_top = np.array([0.10 + 0.15 * u[1], 0.25 + 0.2 * u[1], 0.55 + 0.3 * u[2]])
        sky_low = np.array([0.65, 0.78, 0.90]) * (0.85 + 0.15 * u[3])
        ground_hi = np.array([0.25 + 0.3 * u[4], 0.45 + 0.2 * u[5], 0.12 + 0.1 * u[4]])
        ground_lo = ground_hi * 0.45
        sun_col = np.array([1.0, 0.75 + 0.2 * u[6], 0.25 + 0.2 * u[7]])
        cx, cy = 0.2 + 0.6 * u[8], 0.12 + 0.2 * u[9]
        rad = 0.07 + 0.06 * u[10]

        a = np.clip(yy / horizon, 0, 1)[..., None]
        sky = sky_top * (1 - a) + sky_low * a
        b = np.clip((yy - horizon) / (1 - horizon), 0, 1)[..., None]
        ground = ground_hi * (1 - b) + ground_lo * b
        edge = np.clip((yy - horizon) * size + 0.5, 0, 1)[..., None]
        img = sky * (1 - edge) + ground * edge
        d = np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2)
        disk = np.clip((rad - d) * size + 0.5, 0, 1)[..., None] * (yy < horizon)[..., None]
        img = img * (1 - disk) + sun_col * disk
        out[k] = np.clip(img, 0, 1)
    return Dataset(out, source="procedural")


# ----------------------------------------------------------------------------
# real batches


def real_batch(dataset, stage, batch, rng, mode="multistage", align=2):
    """Real images matched to what the generator produces in ``stage``.

    Returns (B, 3, s, s) with s = H/4, except ``image_based`` which returns
    full-resolution images. Stage 1 is the whole image at H/4; stages 2 and 3
    downsample to the stage density and crop an s-square window whose origin
    follows the generator's rcrop distribution.
    """
    H = dataset.H
    idx = rng.integers(0, len(dataset), batch)
    s = H // 4
    if mode == "image_based":
        out = dataset.level(H)[idx]
    elif mode == "patch_based":
        out = _crop(dataset.level(H), idx, s, crop_origins(H, s, 1), rng)
    elif stage == 1:
        out = dataset.level(s)[idx]
    else:
        N = stage_density(H, stage)
        out = _crop(dataset.level(N), idx, s, crop_origins(N, s, align), rng)
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _crop(level, idx, s, starts, rng):
    rows = starts[rng.integers(0, len(starts), len(idx))]
    cols = starts[rng.integers(0, len(starts), len(idx))]
    return np.stack([level[i, r:r + s, c:c + s] for i, r, c in zip(idx, rows, cols)])
