"""Windowed two-layer neural network trained by Levenberg-Marquardt.

Each output symbol sees a centred window of ``window_symbols`` symbols of
every channel at full rate. The hidden layer is tanh, the output linear.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import InvalidArgumentError, check_count
from .base import EqualizerMixin, TrainingDivergedError, TrainReport, symbol_targets

__all__ = ["FnnParams", "FnnWeights", "fnn_window_features", "fnn_train", "fnn_infer", "FnnEqualizer"]

MU_INIT = 1e-3
MU_MAX = 1e10


@dataclass(frozen=True)
class FnnParams:
    hidden_neurons: int = 32
    window_symbols: int = 5
    sps: int = 8
    max_epochs: int = 100
    min_improvement: float = 1e-6

    def __post_init__(self):
        check_count(self.hidden_neurons, "hidden_neurons")
        check_count(self.window_symbols, "window_symbols")
        if self.window_symbols % 2 == 0:
            raise InvalidArgumentError("window_symbols must be odd so the window is centred")
        check_count(self.sps, "sps")
        check_count(self.max_epochs, "max_epochs")


@dataclass
class FnnWeights:
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H,)
    b2: float

    def flat(self):
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def unflat(cls, theta, n_hidden, n_in):
        H, D = n_hidden, n_in
        i = H * D
        return cls(theta[:i].reshape(H, D), theta[i : i + H], theta[i + H : i + 2 * H], float(theta[-1]))


def fnn_window_features(x, sps=8, window_symbols=5):
    """Sliding windows of ``window_symbols`` symbols, one row per symbol.

    Parameters
    ----------
    x : ndarray, shape (n_samples, K)
        Aligned channels, symbol ``k`` centred on sample ``k * sps``.

    Returns
    -------
    (ndarray, ndarray)
        Features of shape ``(n_rows, K * window_symbols * sps)``, channel-major,
        and the symbol index of each row. Symbols whose window would run past
        either end of ``x`` are dropped.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    half = window_symbols // 2
    width = window_symbols * sps
    # symbol k spans samples [k*sps - sps//2, k*sps - sps//2 + sps)
    n_sym = x.shape[0] // sps
    first = np.arange(n_sym) * sps - half * sps - sps // 2
    keep = (first >= 0) & (first + width <= x.shape[0])
    symbols = np.flatnonzero(keep)
    view = np.lib.stride_tricks.sliding_window_view(x, width, axis=0)  # (n - width + 1, K, width)
    feats = view[first[keep]].reshape(symbols.size, -1)
    return feats, symbols


def _init_weights(n_in, n_hidden, seed):
    rng = np.random.default_rng(seed)
    W1 = rng.standard_normal((n_hidden, n_in)) / np.sqrt(n_in)
    b1 = rng.uniform(-0.5, 0.5, n_hidden)
    w2 = rng.standard_normal(n_hidden) / np.sqrt(n_hidden)
    return FnnWeights(W1, b1, w2, 0.0)


def _forward(w, X):
    h = np.tanh(X @ w.W1.T + w.b1)
    return h, h @ w.w2 + w.b2


def _jacobian(w, X, h):
    # d y / d theta, rows per sample, columns in FnnWeights.flat order
    g = (1.0 - h**2) * w.w2  # (n, H)
    dW1 = (g[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
    return np.hstack([dW1, g, h, np.ones((X.shape[0], 1))])


def _lm_step(J, r, mu, dual):
    """Solve (J'J + mu I) d = J'r, in the dual form when rows < columns."""
    if dual:
        A = J @ J.T
        A[np.diag_indices_from(A)] += mu
        return J.T @ linalg.cho_solve(linalg.cho_factor(A), r)
    A = J.T @ J
    A[np.diag_indices_from(A)] += mu
    return linalg.cho_solve(linalg.cho_factor(A), J.T @ r)


def fnn_train(features, targets, p, seed):
    """Levenberg-Marquardt fit of a tanh hidden layer and linear output.

    Damping starts at 1e-3, grows 10x on a rejected step and shrinks 10x on an
    accepted one. Training stops after ``max_epochs`` accepted epochs or when
    an epoch improves the MSE by less than ``min_improvement``.

    Returns
    -------
    (FnnWeights, TrainReport)

    Raises
    ------
    TrainingDivergedError
        If no step is accepted before the damping exceeds 1e10, or the
        damped normal matrix stays singular.
    """
    X = np.asarray(features, dtype=float)
    t = np.asarray(targets, dtype=float)
    if X.ndim != 2 or t.shape != (X.shape[0],):
        raise InvalidArgumentError("features must be (n, D) with one target per row")
    H = p.hidden_neurons
    w = _init_weights(X.shape[1], H, seed)
    theta = w.flat()
    dual = X.shape[0] < theta.size
    h, y = _forward(w, X)
    mse = float(np.mean((t - y) ** 2))
    mu = MU_INIT
    epochs, stalled = 0, False
    while epochs < p.max_epochs:
        J = _jacobian(w, X, h)
        r = t - y
        while True:
            try:
                step = _lm_step(J, r, mu, dual)
            except linalg.LinAlgError:
                step = None
            if step is not None:
                cand = FnnWeights.unflat(theta + step, H, X.shape[1])
                h_new, y_new = _forward(cand, X)
                mse_new = float(np.mean((t - y_new) ** 2))
                if mse_new < mse:
                    break
            mu *= 10
            if mu > MU_MAX:
                stalled = True
                break
        if stalled:
            break
        epochs += 1
        theta, w, h, y = theta + step, cand, h_new, y_new
        improvement, mse = mse - mse_new, mse_new
        mu = max(mu / 10, 1e-20)
        if improvement < p.min_improvement:
            break
    if stalled and epochs == 0:
        raise TrainingDivergedError("Levenberg-Marquardt could not take a single descent step")
    note = "damping limit reached" if stalled else ""
    return w, TrainReport(mse, X.shape[0], converged=True, iterations=epochs, note=note)


def fnn_infer(w, features):
    return _forward(w, np.asarray(features, dtype=float))[1]


class FnnEqualizer(EqualizerMixin, RegressorMixin, BaseEstimator):
    """Feed-forward network over a centred multi-channel symbol window.

    Parameters
    ----------
    hidden_neurons : int
    window_symbols : int
        Odd window length in symbols, per channel.
    sps : int
    max_epochs : int
    min_improvement : float
        Stop once an epoch lowers the training MSE by less than this.
    washout : int
        Leading symbols excluded from training.
    seed : int
        Weight initialization seed.
    """

    _tag = 3

    def __init__(self, hidden_neurons=32, window_symbols=5, sps=8, max_epochs=100, min_improvement=1e-6,
                 washout=125, seed=0):
        self.hidden_neurons = hidden_neurons
        self.window_symbols = window_symbols
        self.sps = sps
        self.max_epochs = max_epochs
        self.min_improvement = min_improvement
        self.washout = washout
        self.seed = seed

    def _params(self):
        return FnnParams(self.hidden_neurons, self.window_symbols, self.sps, self.max_epochs, self.min_improvement)

    def fit(self, X, y):
        p = self._params()
        U = self._fit_scaler(X)
        t = symbol_targets(y)
        F, idx = fnn_window_features(U, p.sps, p.window_symbols)
        keep = (idx >= self._washout_symbols()) & (idx < t.size)
        if keep.sum() < 2:
            raise InvalidArgumentError("no training windows left after washout")
        self.weights_, self.train_report_ = fnn_train(F[keep], t[idx[keep]], p, self.seed)
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        U = self._transform(X)
        F, idx = fnn_window_features(U, self.sps, self.window_symbols)
        soft = np.full(U.shape[0] // self.sps, np.nan)
        soft[idx] = fnn_infer(self.weights_, F)
        return soft

    def _state_arrays(self):
        return {"theta_": self.weights_.flat()}

    def _load_state_arrays(self, arrays):
        self.weights_ = FnnWeights.unflat(arrays["theta_"], self.hidden_neurons, self.mean_.size * self.window_symbols * self.sps)
