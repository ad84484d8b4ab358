"""Activation and wall-time accounting.

Ops report every output array to the autodiff observers. While an
:class:`ActivationCounter` is installed, each output's element count is added
to the bucket named by the innermost :func:`scope` ("G.synth", "G.map", "D",
...). View-only ops (reshape) create no new floats and are not counted.
"""
from contextlib import contextmanager
from collections import defaultdict
import statistics
import time

from . import autodiff as ad

_VIEW_OPS = ad._VIEW_OPS
_scopes = ["other"]


@contextmanager
def scope(name):
    _scopes.append(name)
    try:
        yield
    finally:
        _scopes.pop()


def current_scope():
    return _scopes[-1]


class ActivationCounter:
    """Counts scalar activations per scope while installed (use as a context manager)."""

    def __init__(self):
        self.counts = defaultdict(int)

    def __call__(self, op, out):
        if op not in _VIEW_OPS:
            self.counts[_scopes[-1]] += out.size

    def __enter__(self):
        ad.add_observer(self)
        return self

    def __exit__(self, *exc):
        ad.remove_observer(self)
        return False

    def reset(self):
        self.counts.clear()

    def total(self, prefix=""):
        return sum(v for k, v in self.counts.items() if k.startswith(prefix))

    def fwd_count(self):
        """Generator + discriminator forward activations."""
        return self.total("G") + self.total("D")


class IterationTimer:
    """Per-iteration wall clock (monotonic), summarised by the median."""

    def __init__(self):
        self.samples_ms = []
        self._t0 = None

    def start(self):
        self._t0 = time.perf_counter()

    def stop(self):
        ms = (time.perf_counter() - self._t0) * 1000.0
        self.samples_ms.append(ms)
        return ms

    def median_ms(self, window=None):
        xs = self.samples_ms[-window:] if window else self.samples_ms
        return statistics.median(xs) if xs else 0.0


def fwd_count(counter):
    return counter.fwd_count()


def peak_live_floats(tapes):
    """Largest number of floats simultaneously held by any of ``tapes``."""
    return max((t.peak_live_floats for t in tapes), default=0)


def iter_wall_ms(timer, window=None):
    return timer.median_ms(window)
