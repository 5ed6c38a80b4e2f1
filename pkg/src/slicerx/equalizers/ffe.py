"""Fractionally spaced feed-forward equalizer adapted by LMS.

The detected channels are decimated to 2 samples per symbol. Symbol ``k`` is
estimated from the T/2-spaced window ``x[2k - 16 .. 2k + 15]`` of every
channel, so tap 16 is the centre tap. Taps adapt once per symbol over the
training prefix and are frozen afterwards.
"""

from dataclasses import dataclass

import numba
import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import InvalidArgumentError, check_count
from .base import EqualizerMixin, TrainingDivergedError, TrainReport, symbol_targets

__all__ = ["FfeState", "lms_train", "ffe_windows", "ffe_train_apply", "FfeEqualizer"]

FFE_SPS = 2
DIVERGENCE_FACTOR = 10.0
MAX_STEP_HALVINGS = 3


@dataclass
class FfeState:
    """Tap matrix (one row of ``n_taps`` per input channel) and LMS step size."""

    taps: np.ndarray
    step_size: float = 1e-3
    sps: int = FFE_SPS

    def __post_init__(self):
        self.taps = np.atleast_2d(np.asarray(self.taps, dtype=float))
        if not self.step_size > 0:
            raise InvalidArgumentError(f"step_size must be > 0, got {self.step_size}")

    @classmethod
    def centre_spike(cls, n_channels, n_taps=32, step_size=1e-3):
        taps = np.zeros((n_channels, n_taps))
        taps[:, n_taps // 2] = 1.0 / n_channels
        return cls(taps, step_size)


@numba.njit(cache=True)
def _lms(windows, targets, w, mu):
    for k in range(targets.size):
        x = windows[k]
        e = targets[k] - np.dot(w, x)
        w += mu * e * x
    return w


def lms_train(windows, targets, taps, step_size):
    """Plain LMS over the rows of ``windows``; returns the adapted taps.

    Parameters
    ----------
    windows : ndarray, shape (n, n_taps)
        Regressor vector per update.
    targets : ndarray, shape (n,)
    taps : ndarray, shape (n_taps,)
        Starting taps (not modified).
    step_size : float
    """
    windows = np.ascontiguousarray(windows, dtype=float)
    targets = np.ascontiguousarray(targets, dtype=float)
    return _lms(windows, targets, np.array(taps, dtype=float), float(step_size))


def ffe_windows(x, n_taps=32, sps=FFE_SPS):
    """Stack the T/2-spaced windows of every channel, zero-padded at the edges.

    Parameters
    ----------
    x : ndarray, shape (n_samples, K)
        Channels at ``sps`` samples per symbol.

    Returns
    -------
    ndarray, shape (n_samples // sps, K * n_taps)
        Row ``k`` holds ``x[sps*k - n_taps//2 + j]`` for ``j`` in ``range(n_taps)``,
        channel-major.
    """
    x = np.asarray(x, dtype=float)
    n_sym = x.shape[0] // sps
    half = n_taps // 2
    padded = np.pad(x, ((half, n_taps), (0, 0)))
    view = np.lib.stride_tricks.sliding_window_view(padded, n_taps, axis=0)
    # view[i] covers padded[i : i + n_taps] = x[i - half : i - half + n_taps]
    rows = view[np.arange(n_sym) * sps]
    return rows.reshape(n_sym, -1)


def ffe_train_apply(rx, targets, s, n_train, start=0):
    """Adapt ``s`` on symbols ``start .. n_train - 1``, then filter every symbol.

    Parameters
    ----------
    rx : ndarray, shape (n_samples, K)
        Channels at 2 samples per symbol.
    targets : ndarray
        Desired outputs for at least the first ``n_train`` symbols.
    s : FfeState
        Initial taps and step size; updated in place with the trained taps.
    n_train : int
    start : int
        First symbol used for adaptation.

    Returns
    -------
    (ndarray, TrainReport)
        Soft outputs per symbol and the training report.

    Raises
    ------
    TrainingDivergedError
        If the training MSE still ends above 10x its starting value after the
        step size has been halved three times.
    """
    X = ffe_windows(rx, s.taps.shape[1], s.sps)
    if X.shape[1] != s.taps.size:
        raise InvalidArgumentError(f"{X.shape[1]} regressors for {s.taps.size} taps")
    targets = np.asarray(targets, dtype=float)
    n_train = check_count(n_train, "n_train")
    if n_train > min(X.shape[0], targets.size):
        raise InvalidArgumentError("training prefix longer than the data")
    if not 0 <= start < n_train:
        raise InvalidArgumentError("adaptation must start inside the training prefix")
    Xt, Tt = X[start:n_train], targets[start:n_train]
    w0 = s.taps.ravel()
    mse0 = float(np.mean((Tt - Xt @ w0) ** 2))
    mu = s.step_size
    for attempt in range(MAX_STEP_HALVINGS + 1):
        w = lms_train(Xt, Tt, w0, mu)
        with np.errstate(over="ignore", invalid="ignore"):  # a diverged attempt is handled below
            mse = float(np.mean((Tt - Xt @ w) ** 2)) if np.all(np.isfinite(w)) else np.inf
        if mse <= DIVERGENCE_FACTOR * mse0:
            break
        mu /= 2
    else:
        raise TrainingDivergedError(f"LMS diverged (training MSE {mse:.3g} vs initial {mse0:.3g})")
    s.taps = w.reshape(s.taps.shape)
    s.step_size = mu
    note = f"step size halved {attempt}x" if attempt else ""
    return X @ w, TrainReport(mse, n_train - start, converged=True, iterations=attempt + 1, note=note)


def _decimate(X, sps):
    if sps == FFE_SPS:
        return X
    if sps % FFE_SPS:
        raise InvalidArgumentError(f"input sps {sps} is not a multiple of {FFE_SPS}")
    return signal.resample_poly(X, 1, sps // FFE_SPS, axis=0)


class FfeEqualizer(EqualizerMixin, RegressorMixin, BaseEstimator):
    """LMS feed-forward equalizer, ``n_taps`` T/2-spaced taps per channel.

    Parameters
    ----------
    n_taps : int
    step_size : float
        LMS step size on standardized inputs.
    n_passes : int
        Passes over the training prefix.
    sps : int
        Samples per symbol of the input; decimated to 2 internally.
    washout : int
        Leading symbols excluded from training.
    """

    _tag = 2

    def __init__(self, n_taps=32, step_size=2e-3, n_passes=1, sps=8, washout=125):
        self.n_taps = n_taps
        self.step_size = step_size
        self.n_passes = n_passes
        self.sps = sps
        self.washout = washout

    def fit(self, X, y):
        U = _decimate(self._fit_scaler(X), self.sps)
        t = symbol_targets(y)
        n_sym = min(U.shape[0] // FFE_SPS, t.size)
        w0 = self._washout_symbols()
        if n_sym - w0 < 2 * self.n_taps:
            raise InvalidArgumentError(f"need at least {2 * self.n_taps} training symbols after washout")
        state = FfeState.centre_spike(self.n_features_in_, self.n_taps, self.step_size)
        for _ in range(check_count(self.n_passes, "n_passes")):
            _, report = ffe_train_apply(U, t, state, n_sym, start=w0)
        self.taps_ = state.taps
        self.step_size_ = state.step_size
        self.train_report_ = report
        return self

    def predict(self, X):
        check_is_fitted(self, "taps_")
        U = _decimate(self._transform(X), self.sps)
        return ffe_windows(U, self.n_taps) @ self.taps_.ravel()

    def _state_arrays(self):
        return {"taps_": self.taps_, "step_size_": np.array([self.step_size_])}

    def _load_state_arrays(self, arrays):
        self.taps_ = arrays["taps_"]
        self.step_size_ = float(arrays["step_size_"][0])
