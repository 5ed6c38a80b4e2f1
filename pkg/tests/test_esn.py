import math

import numpy as np
import pytest
import scipy.sparse as sp

from slicerx._validation import InvalidArgumentError
from slicerx.equalizers import EsnEqualizer, EsnParams, esn_equalize, esn_init, esn_step, esn_train_readout
from slicerx.equalizers.esn import EsnModel, _run, reservoir_states
from slicerx.metrics import count_ber, hard_decide


def model_from(W_in, W_res, alpha, x=None):
    return EsnModel(np.array(W_in, dtype=float), sp.csr_matrix(np.array(W_res, dtype=float)), alpha, x)


def direct_step(W_in, W_res, alpha, x, u):
    """Scalar-loop evaluation of the leaky tanh update, no numpy linear algebra."""
    N = len(x)
    out = []
    for i in range(N):
        s = sum(W_in[i][j] * u[j] for j in range(len(u)))
        s += sum(W_res[i][j] * x[j] for j in range(N))
        out.append(alpha * math.tanh(s) + (1 - alpha) * x[i])
    return out


class TestInit:
    def test_reservoir_nonzeros(self):
        m = esn_init(EsnParams(n_neurons=500, seed=3), 4)
        assert m.W_res.nnz == 5000  # (1 - 0.98) * 500^2

    def test_small_reservoir_rounds_up(self):
        assert esn_init(EsnParams(n_neurons=10, seed=0), 1).W_res.nnz == 2

    def test_input_weights_bounded(self):
        m = esn_init(EsnParams(n_neurons=200, input_scale=0.3, seed=1), 3)
        assert m.W_in.shape == (200, 4)
        assert np.max(np.abs(m.W_in)) <= 0.3
        # and they fill the range rather than collapsing
        assert np.max(np.abs(m.W_in)) > 0.29

    def test_spectral_radius(self):
        m = esn_init(EsnParams(n_neurons=100, spectral_radius=0.8, seed=2), 1)
        assert np.max(np.abs(np.linalg.eigvals(m.W_res.toarray()))) == pytest.approx(0.8, rel=1e-9)

    def test_deterministic(self):
        a = esn_init(EsnParams(n_neurons=60, seed=9), 2)
        b = esn_init(EsnParams(n_neurons=60, seed=9), 2)
        c = esn_init(EsnParams(n_neurons=60, seed=10), 2)
        np.testing.assert_array_equal(a.W_in, b.W_in)
        assert (a.W_res != b.W_res).nnz == 0
        assert not np.array_equal(a.W_in, c.W_in)

    def test_washout_contracts_for_default_params(self):
        for seed in range(10):
            m = esn_init(EsnParams(n_neurons=100, seed=seed), 1)
            assert m.washout_ratio < 1e-3
            assert m.init_attempts == 1

    def test_invalid_params(self):
        with pytest.raises(InvalidArgumentError):
            EsnParams(leak_rate=0.0)
        with pytest.raises(InvalidArgumentError):
            EsnParams(sparsity=1.0)
        with pytest.raises(InvalidArgumentError):
            EsnParams(ridge_lambda=-1.0)


class TestStep:
    def test_hand_value(self):
        # one neuron, bias 0.25 and input weight 0.25, u = 1, x = 0: 0.9 tanh(0.5)
        m = model_from([[0.25, 0.25]], [[0.0]], 0.9)
        assert esn_step(m, [1.0, 1.0])[0] == pytest.approx(0.415905, abs=5e-7)
        assert esn_step(model_from([[0.25, 0.25]], [[0.0]], 0.9), [1.0, 1.0])[0] == 0.9 * math.tanh(0.5)

    def test_matches_direct_arithmetic(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(1000):
            N, K = rng.integers(1, 9), rng.integers(1, 5)
            W_in = rng.uniform(-1, 1, (N, K + 1))
            W_res = rng.standard_normal((N, N)) * (rng.random((N, N)) < 0.5)
            alpha = rng.uniform(0.05, 1.0)
            x = rng.uniform(-1, 1, N)
            u = np.r_[1.0, rng.standard_normal(K)]
            got = esn_step(model_from(W_in, W_res, alpha, x.copy()), u)
            want = direct_step(W_in.tolist(), W_res.tolist(), alpha, x.tolist(), u.tolist())
            worst = max(worst, np.max(np.abs(got - np.array(want))))
        assert worst <= 1e-12

    def test_fixed_point(self):
        # zero weights: the zero state is a fixed point
        m = model_from(np.zeros((3, 2)), np.zeros((3, 3)), 0.5)
        for _ in range(5):
            esn_step(m, [1.0, 2.0])
        assert not np.any(m.x)

    def test_constant_input_converges_to_fixed_point(self):
        # the leak does not move the fixed point: x* = tanh(W_in u + W x*)
        m = esn_init(EsnParams(n_neurons=30, seed=4), 1)
        u = np.array([1.0, 0.7])
        for _ in range(2000):
            esn_step(m, u)
        np.testing.assert_allclose(m.x, np.tanh(m.W_in @ u + m.W_res @ m.x), atol=1e-12)

    def test_wrong_input_size(self):
        m = model_from([[0.1, 0.1]], [[0.0]], 1.0)
        with pytest.raises(InvalidArgumentError):
            esn_step(m, [1.0])

    def test_compiled_run_matches_step_loop(self):
        m = esn_init(EsnParams(n_neurons=40, seed=5), 2)
        U = np.random.default_rng(1).standard_normal((300, 2))
        states, final = _run(m, U, np.zeros(40), np.arange(300))
        m.reset()
        for t in range(300):
            esn_step(m, np.r_[1.0, U[t]])
            np.testing.assert_allclose(states[t], m.x, atol=1e-13)
        np.testing.assert_allclose(final, m.x, atol=1e-13)


class TestReadout:
    def _setup(self, n=1500, N=20, K=2, seed=0):
        rng = np.random.default_rng(seed)
        m = esn_init(EsnParams(n_neurons=N, seed=seed), K)
        U = rng.standard_normal((n, K))
        t = np.tanh(U[:, 0]) - 0.3 * np.roll(U[:, 1], 1) + 0.05 * rng.standard_normal(n)
        return m, U, t

    def test_matches_normal_equations(self):
        m, U, t = self._setup()
        lam = 1e-3
        esn_train_readout(m, U, t, EsnParams(n_neurons=20, ridge_lambda=lam), sps=1, washout=50)
        rows = np.arange(50, t.size)
        X = reservoir_states(m, U, rows)
        A = np.hstack([np.ones((rows.size, 1)), U[rows], X])
        want = np.linalg.solve(A.T @ A + lam * np.eye(A.shape[1]), A.T @ t[rows])
        np.testing.assert_allclose(m.W_out, want, atol=1e-8)

    def test_bypass_recovers_affine_map(self):
        # reservoir disconnected from the input: only the bias and input columns can fit 3 u + 2
        rng = np.random.default_rng(1)
        m = model_from(np.zeros((30, 2)), np.zeros((30, 30)), 0.9)
        u = rng.standard_normal((800, 1))
        esn_train_readout(m, u, 3 * u[:, 0] + 2, EsnParams(n_neurons=30, ridge_lambda=0.0), sps=1, washout=10)
        np.testing.assert_allclose(m.W_out[:2], [2.0, 3.0], atol=1e-8)
        assert not np.any(m.W_out[2:])

    def test_bypass_through_live_reservoir(self):
        # a driven reservoir makes the coefficients non-unique, but the fit is still exact
        rng = np.random.default_rng(1)
        m = esn_init(EsnParams(n_neurons=30, seed=1), 1)
        u = rng.standard_normal((800, 1))
        esn_train_readout(m, u, 3 * u[:, 0] + 2, EsnParams(n_neurons=30, ridge_lambda=0.0), sps=1, washout=10)
        np.testing.assert_allclose(esn_equalize(m, u, 1)[10:], 3 * u[10:, 0] + 2, atol=1e-6)

    def test_zero_targets(self):
        m, U, _ = self._setup()
        rep, _ = esn_train_readout(m, U, np.zeros(U.shape[0]), EsnParams(n_neurons=20), sps=1, washout=50)
        assert not np.any(m.W_out) and rep.train_mse == 0.0

    def test_beats_random_readouts(self):
        m, U, t = self._setup(seed=2)
        rep, _ = esn_train_readout(m, U, t, EsnParams(n_neurons=20, ridge_lambda=0.0), sps=1, washout=50)
        rows = np.arange(50, t.size)
        A = np.hstack([np.ones((rows.size, 1)), U[rows], reservoir_states(m, U, rows)])
        rng = np.random.default_rng(3)
        for _ in range(100):
            w = m.W_out + 0.01 * rng.standard_normal(m.W_out.size)
            assert np.mean((A @ w - t[rows]) ** 2) > rep.train_mse

    def test_delay_selection(self):
        m, U, t = self._setup(seed=3)
        # symbol k reaches the input at step k + 2, so delay 2 reads it out instantaneously
        delayed = np.r_[np.tanh(U[2:, 0]), np.zeros(2)]
        _, d = esn_train_readout(m, U, delayed, EsnParams(n_neurons=20), sps=1, washout=50, delays=(0, 1, 2, 3))
        assert d == 2

    def test_too_few_rows(self):
        m, U, t = self._setup(n=60)
        with pytest.raises(InvalidArgumentError):
            esn_train_readout(m, U, t, EsnParams(n_neurons=20), sps=1, washout=50)

    def test_equalize_needs_readout(self):
        m, U, _ = self._setup()
        with pytest.raises(RuntimeError):
            esn_equalize(m, U, 1)


def isi_channel(n_sym, sps=8, noise=0.02, seed=0):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, n_sym)
    x = np.repeat(2.0 * bits - 1, sps)
    h = np.exp(-np.arange(3 * sps) / sps)  # one-sided smear over a few symbols
    y = np.convolve(x, h / h.sum())[: x.size]
    y = np.roll(y, -(sps // 2))
    return y + noise * rng.standard_normal(y.size), bits


class TestEsnEqualizer:
    def test_isi_channel_error_free(self):
        rx, bits = isi_channel(6000)
        eq = EsnEqualizer(n_neurons=100, seed=1).fit(rx[: 1500 * 8], bits[:1500])
        soft = eq.predict(rx)
        d = hard_decide(soft[1500:-16], soft[125:1500], bits[125:1500])
        assert count_ber(d, bits[1500:-16]).errors == 0

    def test_symbol_delay_is_found(self):
        rx, bits = isi_channel(4000, noise=0.0)
        late = np.roll(rx, 3 * 8)  # symbols arrive 3 periods late
        eq = EsnEqualizer(n_neurons=60, seed=0).fit(late[: 2000 * 8], bits[:2000])
        assert eq.delay_ == 3
        soft = eq.predict(late)
        assert np.isnan(soft[-3:]).all()

    def test_deterministic(self):
        rx, bits = isi_channel(2000)
        a = EsnEqualizer(n_neurons=50, seed=7).fit(rx, bits).predict(rx)
        b = EsnEqualizer(n_neurons=50, seed=7).fit(rx, bits).predict(rx)
        np.testing.assert_array_equal(a, b)

    def test_rejects_non_binary_targets(self):
        rx, bits = isi_channel(1000)
        with pytest.raises(InvalidArgumentError):
            EsnEqualizer(n_neurons=20).fit(rx, bits * 2)
