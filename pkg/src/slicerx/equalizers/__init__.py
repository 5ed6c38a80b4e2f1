"""Equalizers sharing one sklearn-style interface (``fit``/``predict``)."""

from .base import TrainingDivergedError, TrainReport, from_bytes, to_bytes
from .esn import EsnEqualizer, EsnParams, esn_equalize, esn_init, esn_step, esn_train_readout
from .ffe import FfeEqualizer, FfeState, ffe_train_apply
from .fnn import FnnEqualizer, FnnParams, fnn_infer, fnn_train, fnn_window_features

__all__ = [
    "EsnEqualizer",
    "FfeEqualizer",
    "FnnEqualizer",
    "EsnParams",
    "FfeState",
    "FnnParams",
    "TrainReport",
    "TrainingDivergedError",
    "esn_init",
    "esn_step",
    "esn_train_readout",
    "esn_equalize",
    "ffe_train_apply",
    "fnn_window_features",
    "fnn_train",
    "fnn_infer",
    "to_bytes",
    "from_bytes",
    "make_equalizer",
]


def make_equalizer(kind, **params):
    """Build an equalizer by name: ``"esn"``, ``"ffe"`` or ``"fnn"``."""
    classes = {"esn": EsnEqualizer, "ffe": FfeEqualizer, "fnn": FnnEqualizer}
    try:
        return classes[kind.lower()](**params)
    except KeyError:
        from .._validation import InvalidArgumentError

        raise InvalidArgumentError(f"unknown equalizer {kind!r}; expected one of {sorted(classes)}") from None
