"""Fast oracle checks runnable from the command line (``slicerx selftest``)."""

import math

import numpy as np
import scipy.sparse as sp

from ..channel import FiberParams, fading_notch_ghz, propagate
from ..equalizers.esn import EsnModel, EsnParams, esn_step, esn_train_readout
from ..equalizers.ffe import lms_train
from ..metrics import count_ber
from ..sigkit import Waveform

__all__ = ["CHECKS", "run_selftest"]


def _dispersion_inverse():
    rng = np.random.default_rng(0)
    w = Waveform(rng.standard_normal(4096) + 1j * rng.standard_normal(4096), 256e9)
    there = propagate(w, FiberParams(80.0, loss_db_per_km=0.0))
    back = propagate(there, FiberParams(80.0, dispersion_ps_nm_km=-17.0, loss_db_per_km=0.0))
    rms = math.sqrt(np.mean(np.abs(back.samples - w.samples) ** 2))
    return rms < 1e-9, f"round-trip RMS {rms:.2e}"


def _esn_step():
    m = EsnModel(np.array([[0.0, 0.5]]), sp.csr_matrix((1, 1)), 0.9)
    x = esn_step(m, np.array([1.0, 1.0]))[0]
    want = 0.9 * math.tanh(0.5)
    return abs(x - want) < 1e-12, f"x = {x:.6f}, want {want:.6f}"


def _bypass_readout():
    rng = np.random.default_rng(1)
    u = rng.standard_normal(400)
    m = EsnModel(np.zeros((1, 2)), sp.csr_matrix((1, 1)), 1.0)
    esn_train_readout(m, u[:, None], 3 * u + 2, EsnParams(1, ridge_lambda=0.0), sps=1, washout=0)
    err = max(abs(m.W_out[0] - 2), abs(m.W_out[1] - 3))
    return err < 1e-8, f"bias {m.W_out[0]:.10f}, weight {m.W_out[1]:.10f}"


def _lms_wiener():
    rng = np.random.default_rng(2)
    n, taps, sigma2 = 100_000, 32, 0.01
    s = rng.choice([-1.0, 1.0], n)
    x = s + 0.5 * np.concatenate([[0.0], s[:-1]]) + math.sqrt(sigma2) * rng.standard_normal(n)
    X = np.lib.stride_tricks.sliding_window_view(np.concatenate([np.zeros(taps - 1), x]), taps)[:, ::-1]
    # closed form: autocorrelation of an MA(1) process plus white noise
    r = np.zeros(taps)
    r[0], r[1] = 1.25 + sigma2, 0.5
    R = r[np.abs(np.subtract.outer(np.arange(taps), np.arange(taps)))]
    p = np.zeros(taps)
    p[0] = 1.0
    mmse = 1.0 - p @ np.linalg.solve(R, p)
    w = lms_train(X[: n // 2], s[: n // 2], np.eye(taps)[0], 3e-4)
    mse = np.mean((s[n // 2 :] - X[n // 2 :] @ w) ** 2)
    return abs(mse / mmse - 1) < 0.01, f"LMS MSE {mse:.5f}, Wiener MMSE {mmse:.5f}"


def _ber_count():
    truth = np.zeros(200_000, dtype=np.uint8)
    dec = truth.copy()
    dec[:45] = 1
    res = count_ber(dec, truth)
    return res.ber == 2.25e-4 and not res.below_kp4, f"BER {res.ber!r}"


def _notch():
    f = fading_notch_ghz(FiberParams(80.0))
    return abs(f - 6.8) <= 0.2, f"first notch at 80 km: {f:.3f} GHz"


CHECKS = {
    "dispersion inverse": _dispersion_inverse,
    "esn_step hand value": _esn_step,
    "readout bypass recovers (3, 2)": _bypass_readout,
    "LMS vs Wiener MMSE": _lms_wiener,
    "BER 45/200000": _ber_count,
    "fading notch": _notch,
}


def run_selftest(out):
    ok = True
    for name, check in CHECKS.items():
        passed, detail = check()
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}", file=out)
    return ok
