"""Shared estimator plumbing for the three equalizers."""

import struct
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .._validation import InvalidArgumentError, check_channels

__all__ = [
    "TrainReport",
    "TrainingDivergedError",
    "EqualizerMixin",
    "symbol_targets",
    "to_bytes",
    "from_bytes",
]

EQLZ_MAGIC = b"EQLZ"
EQLZ_VERSION = 1
_HEADER = struct.Struct("<4sII")


class TrainingDivergedError(RuntimeError):
    """Adaptive training failed to converge."""


@dataclass
class TrainReport:
    train_mse: float
    n_train_samples: int
    converged: bool = True
    iterations: int = 1
    note: str = ""


def symbol_targets(y):
    """OOK symbols {0, 1} -> regression targets {-1, +1}."""
    y = np.asarray(getattr(y, "bits", y), dtype=float)
    if y.ndim != 1 or not np.isin(y, (0.0, 1.0)).all():
        raise InvalidArgumentError("known symbols must be a 1-D 0/1 sequence")
    return 2.0 * y - 1.0


class EqualizerMixin:
    """Common surface: ``fit``/``predict`` plus ``train``/``equalize`` aliases.

    ``fit(X, y)`` takes detected channels (``DetectedChannels`` or an
    ``(n_samples, n_channels)`` array at ``sps`` samples per symbol, symbol
    ``k`` centred on sample ``k * sps``) covering the training prefix, and the
    0/1 symbols sent over that prefix. ``predict(X)`` returns one soft value
    per symbol of ``X``; symbols an equalizer cannot reach are NaN.
    """

    _tag = 0

    def train(self, rx, known_symbols):
        self.fit(rx, known_symbols)
        return self.train_report_

    def equalize(self, rx):
        return self.predict(rx)

    def _fit_scaler(self, X):
        X = check_channels(X)
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        return (X - self.mean_) / self.scale_

    def _transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_channels(X, self.n_features_in_)
        return (X - self.mean_) / self.scale_

    def _n_symbols(self, X):
        return X.shape[0] // self.sps

    def _washout_symbols(self):
        return int(self.washout)

    # serialization hooks: subclasses list their fitted arrays
    def _state_arrays(self):
        raise NotImplementedError

    def _load_state_arrays(self, arrays):
        raise NotImplementedError


def _numeric_params(est):
    out = {}
    for k, v in sorted(est.get_params().items()):
        if isinstance(v, (bool, int, float, np.integer, np.floating)) or v is None:
            out[k] = v
    return out


def to_bytes(est):
    """Serialize a fitted equalizer to a versioned little-endian blob.

    Layout: magic ``EQLZ``, u32 version, u32 equalizer tag, then the numeric
    hyper-parameters as (u32 name length, name, f64 value) records and the
    fitted arrays as (u32 name length, name, u32 ndim, u32 dims..., f64 data).
    ``None`` hyper-parameters are stored as NaN.
    """
    check_is_fitted(est, "scale_")
    params = _numeric_params(est)
    arrays = {"mean_": est.mean_, "scale_": est.scale_, **est._state_arrays()}
    parts = [_HEADER.pack(EQLZ_MAGIC, EQLZ_VERSION, est._tag), struct.pack("<I", len(params))]
    for name, value in params.items():
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<d", np.nan if value is None else float(value)))
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def from_bytes(blob):
    """Rebuild an equalizer written by :func:`to_bytes`."""
    from .esn import EsnEqualizer
    from .ffe import FfeEqualizer
    from .fnn import FnnEqualizer

    classes = {cls._tag: cls for cls in (EsnEqualizer, FfeEqualizer, FnnEqualizer)}
    magic, version, tag = _HEADER.unpack_from(blob, 0)
    if magic != EQLZ_MAGIC:
        raise InvalidArgumentError(f"not an equalizer blob (magic {magic!r})")
    if version != EQLZ_VERSION:
        raise InvalidArgumentError(f"unsupported blob version {version}")
    if tag not in classes:
        raise InvalidArgumentError(f"unknown equalizer tag {tag}")
    pos = _HEADER.size

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, blob, pos)
        pos += struct.calcsize(fmt)
        return vals

    def take_name():
        nonlocal pos
        (n,) = take("<I")
        name = blob[pos : pos + n].decode()
        pos += n
        return name

    cls = classes[tag]
    defaults = cls().get_params()
    params = {}
    (n_params,) = take("<I")
    for _ in range(n_params):
        name = take_name()
        (value,) = take("<d")
        default = defaults.get(name)
        if np.isnan(value):
            value = None
        elif isinstance(default, bool):
            value = bool(value)
        elif isinstance(default, int):
            value = int(value)
        params[name] = value
    arrays = {}
    (n_arrays,) = take("<I")
    for _ in range(n_arrays):
        name = take_name()
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I")
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += 8 * count
    est = cls(**params)
    est.mean_ = arrays.pop("mean_")
    est.scale_ = arrays.pop("scale_")
    est.n_features_in_ = est.mean_.size
    est._load_state_arrays(arrays)
    return est
