"""Input validation and seeded random streams."""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError, InvalidInputError


def as_matrix(X, name="X"):
    """Return ``X`` as a 2-D float64 C-ordered array, rejecting non-finite data."""
    try:
        arr = np.array(X, dtype=np.float64, order="C", copy=True)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name} is not convertible to a real matrix") from exc
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name="v", length=None):
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def check_count(value, name, low=0, high=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < low or (high is not None and value > high):
        bound = f"[{low}, {high}]" if high is not None else f">= {low}"
        raise InvalidArgumentError(f"{name}={value} is outside {bound}")
    return value


def check_real(value, name, low=None, high=None, low_open=False):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} must be a real number") from exc
    if not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite")
    if low is not None and (value < low or (low_open and value == low)):
        raise InvalidArgumentError(f"{name}={value} must be {'>' if low_open else '>='} {low}")
    if high is not None and value > high:
        raise InvalidArgumentError(f"{name}={value} must be <= {high}")
    return value


def make_rng(seed, *keys):
    """Seeded PCG64 generator for the stream identified by ``keys``.

    Streams are split with :class:`numpy.random.SeedSequence` entropy
    ``[seed, *keys]``; PCG64 output is identical across platforms, so every
    (seed, keys) pair names one reproducible stream. Callers use keys to
    separate purposes, e.g. ``(seed, 0)`` for factors and ``(seed, 1)`` for masks.
    """
    if seed is None:
        seed = 0
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise InvalidArgumentError("seeds and stream keys must be nonnegative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
