"""Binary generator checkpoints.

Layout, all little-endian::

    magic        4s   b"INRP"
    version      u16  1
    H            u32
    stage        u8
    strategy     u8   index into generator.STRATEGIES
    seed         u64
    z_dim, w_dim, width, depth, embed_pairs, const_dim   6 x u32
    fourier_sigma, slope                                 2 x f32
    n_blocks     u32
    n_blocks x { name_len u16, name utf-8, ndim u8, dims ndim x u32,
                 payload prod(dims) x f32 }
    checksum     u32  CRC-32 of all payload bytes in block order

Blocks are the generator's parameters in sorted name order plus the fixed
Fourier basis under ``fourier_basis``.
"""
import struct
import zlib

import numpy as np

from . import autodiff as ad
from .generator import GeneratorConfig, GeneratorParams, STRATEGIES

MAGIC = b"INRP"
VERSION = 1
_HEADER = struct.Struct("<4sHIBBQ6I2fI")


class CheckpointError(ValueError):
    pass


def to_bytes(gen, seed=0):
    c = gen.cfg
    blocks = {k: v.data for k, v in gen.params.items()}
    blocks["fourier_basis"] = gen.fourier_basis
    parts = [_HEADER.pack(MAGIC, VERSION, gen.H, gen.stage, STRATEGIES.index(gen.strategy),
                          int(seed), c.z_dim, c.w_dim, c.width, c.depth, c.embed_pairs,
                          c.const_dim, c.fourier_sigma, c.slope, len(blocks))]
    crc = 0
    for name in sorted(blocks):
        arr = np.ascontiguousarray(blocks[name], dtype="<f4")
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        payload = arr.tobytes()
        parts.append(payload)
        crc = zlib.crc32(payload, crc)
    parts.append(struct.pack("<I", crc))
    return b"".join(parts)


def from_bytes(buf):
    """Returns (GeneratorParams, seed)."""
    if len(buf) < _HEADER.size + 4:
        raise CheckpointError("checkpoint truncated")
    (magic, version, H, stage, strat, seed, z_dim, w_dim, width, depth, embed_pairs,
     const_dim, sigma, slope, n_blocks) = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if strat >= len(STRATEGIES) or stage not in (1, 2, 3):
        raise CheckpointError("corrupt header")
    off = _HEADER.size
    blocks = {}
    crc = 0
    try:
        for _ in range(n_blocks):
            (nlen,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = bytes(buf[off:off + nlen]).decode()
            off += nlen
            (ndim,) = struct.unpack_from("<B", buf, off)
            off += 1
            dims = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
            nbytes = 4 * int(np.prod(dims))
            payload = bytes(buf[off:off + nbytes])
            if len(payload) != nbytes:
                raise CheckpointError("checkpoint truncated")
            off += nbytes
            crc = zlib.crc32(payload, crc)
            blocks[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        (stored,) = struct.unpack_from("<I", buf, off)
    except (struct.error, UnicodeDecodeError):
        raise CheckpointError("checkpoint truncated or corrupt") from None
    if off + 4 != len(buf):
        raise CheckpointError("trailing bytes after checksum")
    if stored != crc:
        raise CheckpointError("checksum mismatch")
    cfg = GeneratorConfig(z_dim=z_dim, w_dim=w_dim, width=width, depth=depth,
                          embed_pairs=embed_pairs, fourier_sigma=_f32_value(sigma),
                          const_dim=const_dim, slope=_f32_value(slope))
    basis = blocks.pop("fourier_basis", None)
    if basis is None:
        raise CheckpointError("missing fourier_basis block")
    params = {k: ad.parameter(v) for k, v in blocks.items()}
    return GeneratorParams(cfg, H, stage, STRATEGIES[strat], params, basis), seed


def _f32_value(x):
    # shortest decimal that round-trips through float32, e.g. 0.2 not 0.20000000298
    return float(str(np.float32(x)))


def save(path, gen, seed=0):
    with open(path, "wb") as f:
        f.write(to_bytes(gen, seed))


def load(path):
    with open(path, "rb") as f:
        return from_bytes(f.read())
