"""Small input-checking helpers shared across the package."""

import numbers

import numpy as np


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")
    return value


def check_count(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidArgumentError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_finite(array, name):
    array = np.asarray(array)
    if array.size and not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains NaN or Inf")
    return array


def check_channels(X, n_features=None):
    """Coerce detected channels into a float (n_samples, n_channels) matrix.

    Accepts a :class:`~slicerx.frontend.DetectedChannels`, a 1-D array
    (single channel) or a 2-D array already laid out sample-major.
    """
    channels = getattr(X, "channels", None)
    if channels is not None:
        X = np.asarray(channels, dtype=float).T
    else:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError(f"expected a non-empty 2-D channel matrix, got shape {X.shape}")
    check_finite(X, "channels")
    if n_features is not None and X.shape[1] != n_features:
        raise InvalidArgumentError(
            f"X has {X.shape[1]} channels, but the equalizer was fitted with {n_features}"
        )
    return X
