"""Counter-based random numbers: SplitMix64 over a (key, counter) stream.

Each draw hashes ``key + GOLDEN * (counter + i)`` through the SplitMix64
finalizer, so a stream is a pure function of its seed and position. Normals
use the Box-Muller transform on pairs of 53-bit uniforms.

Constants (SplitMix64, Steele et al. 2014):
    GOLDEN = 0x9E3779B97F4A7C15
    MIX1   = 0xBF58476D1CE4E5B9
    MIX2   = 0x94D049BB133111EB
"""
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x ^ (x >> np.uint64(30))
        z = z * MIX1
        z = z ^ (z >> np.uint64(27))
        z = z * MIX2
        return z ^ (z >> np.uint64(31))


class Rng:
    """Deterministic random stream.

    ``spawn(tag)`` derives an independent child stream, which keeps unrelated
    consumers (init, data, latents) from shifting each other's draws.
    """

    def __init__(self, seed):
        seed = int(seed) & _MASK64
        self.seed = seed
        self._key = np.uint64(int(splitmix64(np.uint64(seed))))
        self.counter = 0

    def spawn(self, tag):
        h = int(self._key)
        for ch in str(tag).encode():
            h = int(splitmix64(np.uint64((h ^ ch) & _MASK64)))
        return Rng(h)

    def uint64(self, n):
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return splitmix64(self._key + GOLDEN * (idx + np.uint64(1)))

    def uniform(self, n):
        """Float64 uniforms in [0, 1) with 53 random bits."""
        return (self.uint64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def integers(self, low, high, n=None):
        """Integers in [low, high); ``n=None`` returns a Python int."""
        if high <= low:
            raise ValueError(f"empty range [{low}, {high})")
        m = 1 if n is None else n
        out = low + np.floor(self.uniform(m) * (high - low)).astype(np.int64)
        return int(out[0]) if n is None else out

    def normal(self, shape):
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        size = int(np.prod(shape))
        pairs = (size + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:size].reshape(shape)

    def permutation(self, n):
        keys = self.uint64(n)
        return np.argsort(keys, kind="stable")
