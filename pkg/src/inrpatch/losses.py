"""Adversarial losses, the discriminator smoothness penalty and patch regularization."""
import numpy as np

from . import autodiff as ad
from .coords import parent_window
from .discriminator import disc_forward
from .generator import GeneratorParams, generate


def adv_loss_g(fake_logits):
    """Non-saturating generator loss: mean softplus(-D(fake))."""
    return ad.mean(ad.softplus(ad.scale(fake_logits, -1.0)))


def adv_loss_d(real_logits, fake_logits):
    return ad.add(ad.mean(ad.softplus(ad.scale(real_logits, -1.0))),
                  ad.mean(ad.softplus(fake_logits)))


def random_directions(shape, rng):
    """One unit-norm direction per sample (leading axis)."""
    u = rng.normal(shape).reshape(shape[0], -1)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u.reshape(shape).astype(np.float32)


def d_reg(disc, real_batch, eps, rng, forward=None):
    """First-order smoothness penalty on D around real samples.

    mean_b (D(x_b + eps u_b) - D(x_b))^2 / eps^2 with u_b a random unit
    direction; in expectation this is |grad D|^2 / dim, the directional
    analogue of an R1 gradient penalty, without double backprop.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    forward = forward or (lambda x: disc_forward(disc, x))
    x = np.asarray(real_batch, dtype=np.float32)
    u = random_directions(x.shape, rng)
    d = ad.sub(forward(x + np.float32(eps) * u), forward(x))
    return ad.scale(ad.mean(ad.square(d)), 1.0 / (eps * eps))


def patch_reg(fake, frozen_prev, z, window, squared=False):
    """Consistency of the current patch with the previous stage's generator.

    ``fake`` is (B, s, s, 3) generated on ``window``. It is 2x2 average pooled
    and compared with the previous stage evaluated on ``parent_window(window)``
    for the same latents. Returns the batch mean of the per-sample L2 norm of
    the difference (its square when ``squared``).

    ``frozen_prev`` is a frozen :class:`GeneratorParams` or any callable
    ``(z, grid) -> (B, s/2, s/2, 3)`` array.
    """
    fake = ad._as_tensor(fake)
    if fake.shape[1] != window.side or fake.shape[2] != window.side:
        raise ValueError(f"patch {fake.shape} does not match window side {window.side}")
    parent = parent_window(window)
    pooled = ad.avgpool2(fake)
    if parent.footprint() != window.footprint():
        raise ValueError(f"window {window} and parent {parent} footprints differ")
    if isinstance(frozen_prev, GeneratorParams):
        if frozen_prev.N != parent.N:
            raise ValueError(f"previous generator lattice {frozen_prev.N} != parent window density {parent.N}")
        with ad.no_grad():
            target = generate(frozen_prev, z, parent).data
    else:
        target = np.asarray(frozen_prev(z, parent), dtype=np.float32)
    if list(target.shape) != pooled.shape:
        raise ValueError(f"target shape {list(target.shape)} != pooled patch {pooled.shape}")
    diff = ad.sub(pooled, ad.const(target))
    per_sample = ad.sum(ad.square(diff), axis=(1, 2, 3))
    if not squared:
        per_sample = ad.sqrt(per_sample)
    return ad.mean(per_sample)
