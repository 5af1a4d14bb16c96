"""Grayscale image completion on top of the completion solver."""

import numpy as np

from .exceptions import InvalidArgumentError, LowRankError
from .measure import CompletionOperator, sample_mask
from .pgm import GrayImage
from .solver import SolverConfig, solve


def sample_pixels(img, fraction, seed=0):
    """Observe ``floor(fraction * width * height)`` distinct pixels uniformly at random."""
    return sample_mask(img.height, img.width, fraction, seed)


def reconstruct(img, mask, cfg):
    """Real-valued completion of the pixel matrix; returns ``(X, report)``.

    A mask covering every pixel is returned as is without running the solver,
    since the constraint set is then a single point.
    """
    if not isinstance(mask, CompletionOperator):
        raise InvalidArgumentError("mask must be a CompletionOperator")
    if mask.shape != (img.height, img.width):
        raise InvalidArgumentError(f"mask is {mask.shape}, image is {img.height}x{img.width}")
    A = img.pixels.astype(np.float64)
    if mask.m == A.size:
        return A, None
    try:
        report = solve(mask, mask.apply(A), cfg)
    except LowRankError as exc:
        raise type(exc)(f"image completion ({img.height}x{img.width}, K={cfg.K}): {exc}") from exc
    return report.X_final, report


def to_pixels(X):
    """Threshold negatives to 0, round, clamp overshoot to 255."""
    return np.clip(np.rint(np.maximum(X, 0.0)), 0, 255).astype(np.uint8)


def complete_image(img, mask, K, cfg=None):
    """Complete ``img`` from the pixels selected by ``mask`` with rank parameter ``K``."""
    cfg = SolverConfig(K=K) if cfg is None else cfg
    if cfg.K != K:
        raise InvalidArgumentError(f"K={K} disagrees with cfg.K={cfg.K}")
    X, _ = reconstruct(img, mask, cfg)
    return GrayImage(to_pixels(X))
