import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nnsort.core import ConfigError, OpCounters
from nnsort.model import (LAYER_DIMS, MAGIC, Constant, MlpModel, ModelFileError, OracleRank,
                          RandomPredictor, TrainConfig, TrainingError, forward, huber_grad,
                          huber_loss, init_params, load_model, loss_and_grad, param_count,
                          predict_many, rank_labels, save_model, train)


def _random_model(seed=0):
    rng = np.random.default_rng(seed)
    return MlpModel(init_params(rng), -2.0, 3.0)


class TestHuber:
    @pytest.mark.parametrize("pred,label,delta,loss,grad", [
        (1.0, 1.0, 1.0, 0.0, 0.0),
        (1.5, 1.0, 1.0, 0.125, 0.5),
        (3.0, 1.0, 1.0, 1.5, 1.0),
        (-1.0, 1.0, 1.0, 1.5, -1.0),
    ])
    def test_examples(self, pred, label, delta, loss, grad):
        assert huber_loss(pred, label, delta) == pytest.approx(loss, abs=1e-15)
        assert huber_grad(pred, label, delta) == pytest.approx(grad, abs=1e-15)

    @pytest.mark.parametrize("delta", [0.1, 1.0, 2.5])
    @pytest.mark.parametrize("side", [-1.0, 1.0])
    def test_continuity_at_threshold(self, delta, side):
        label, eta = 0.3, 1e-9
        edge = label + side * delta
        assert abs(huber_loss(edge + eta, label, delta) - huber_loss(edge - eta, label, delta)) < 1e-8
        assert abs(huber_grad(edge + eta, label, delta) - huber_grad(edge - eta, label, delta)) < 1e-8

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(1e-3, 1e3))
    def test_grad_bounded_and_loss_nonnegative(self, pred, label, delta):
        assert abs(huber_grad(pred, label, delta)) <= delta
        assert huber_loss(pred, label, delta) >= 0.0

    def test_grad_matches_finite_difference(self):
        for pred in np.linspace(-3, 3, 61):
            if abs(abs(pred - 0.2) - 1.0) < 1e-3:
                continue
            fd = (huber_loss(pred + 1e-6, 0.2) - huber_loss(pred - 1e-6, 0.2)) / 2e-6
            assert huber_grad(pred, 0.2) == pytest.approx(fd, abs=1e-6)


class TestPredictors:
    def test_constant(self):
        assert forward(Constant(0.5), 123.0) == 0.5
        assert forward(Constant(0.5), -1e300) == 0.5

    def test_constant_range(self):
        with pytest.raises(ConfigError):
            Constant(1.5)

    def test_oracle_min_is_zero(self):
        p = OracleRank.from_keys([10, 20, 30, 40])
        assert forward(p, 10.0) == 0.0
        assert forward(p, 40.0) == 1.0
        assert forward(p, 20.0) == pytest.approx(1 / 3)

    def test_oracle_duplicates_share_first_rank(self):
        p = OracleRank.from_keys([5, 5, 5, 7, 9])
        assert forward(p, 5.0) == 0.0
        assert forward(p, 7.0) == pytest.approx(3 / 4)

    def test_random_predictor_is_a_function_of_the_key(self):
        p = RandomPredictor(seed=9)
        keys = np.array([1.0, 2.0, 1.0, 3.5])
        out = p.predict(keys)
        assert out[0] == out[2]
        assert np.all((out >= 0) & (out < 1))
        assert not np.array_equal(out, RandomPredictor(seed=10).predict(keys))

    def test_invocation_counter(self):
        c = OpCounters()
        forward(Constant(), 1.0, c)
        predict_many(Constant(), np.arange(5.0), c)
        assert c.model_invocations == 6

    def test_mlp_output_clamped(self):
        m = _random_model(1)
        out = m.predict(np.linspace(-100, 100, 1001))
        assert np.all((out >= 0) & (out <= 1))

    def test_forward_deterministic(self):
        m = _random_model(2)
        assert forward(m, 0.7) == forward(m, 0.7)


class TestNetworkShape:
    def test_param_count(self):
        assert LAYER_DIMS == (1, 32, 8, 4, 1)
        assert param_count() == 369

    def test_views_share_buffer(self):
        m = _random_model()
        m.weights[1][0, 0] = 42.0
        assert 42.0 in m.params

    def test_non_finite_params_rejected(self):
        params = np.zeros(369)
        params[5] = np.nan
        with pytest.raises(ConfigError):
            MlpModel(params, 0.0, 1.0)


class TestGradientCheck:
    """Backprop gradient vs central differences, step 1e-6, rel. error 1e-4."""

    @pytest.mark.parametrize("seed,delta", [(0, 1.0), (1, 0.05), (2, 0.3)])
    def test_all_layers(self, seed, delta):
        rng = np.random.default_rng(seed)
        model = _random_model(seed)
        u = rng.uniform(0, 1, size=16)
        y = rng.uniform(-0.5, 1.5, size=16)
        grad = np.zeros(model.n_params)
        loss_and_grad(model, u, y, delta, grad)
        scratch = np.zeros(model.n_params)
        h = 1e-6
        checked = set()
        bounds = np.cumsum([a * b + b for a, b in zip(LAYER_DIMS[:-1], LAYER_DIMS[1:])])
        for k in range(model.n_params):
            orig = model.params[k]
            model.params[k] = orig + h
            lp = loss_and_grad(model, u, y, delta, scratch)
            model.params[k] = orig - h
            lm = loss_and_grad(model, u, y, delta, scratch)
            model.params[k] = orig
            fd = (lp - lm) / (2 * h)
            scale = max(abs(fd), abs(grad[k]))
            if scale < 1e-7:
                assert abs(fd - grad[k]) < 1e-9
                continue
            assert abs(fd - grad[k]) / scale < 1e-4, f"param {k}"
            checked.add(int(np.searchsorted(bounds, k, side="right")))
        # every layer contributed live (non-zero) gradients to the check
        assert checked == {0, 1, 2, 3}


class TestTraining:
    def test_labels(self):
        np.testing.assert_allclose(rank_labels(np.array([30.0, 10.0, 20.0, 10.0])),
                                   [1.0, 0.0, 2 / 3, 0.0])

    def test_all_equal_rejected(self):
        with pytest.raises(TrainingError):
            train(np.full(100, 4.0), TrainConfig(epochs=1, batch_size=10))

    def test_batch_larger_than_data(self):
        with pytest.raises(ConfigError):
            train(np.arange(10.0), TrainConfig(epochs=1, batch_size=11))

    def test_deterministic(self):
        keys = np.random.default_rng(0).uniform(size=2000)
        cfg = TrainConfig(epochs=3, batch_size=64, rng_seed=5)
        a, b = train(keys, cfg), train(keys, cfg)
        assert a.model == b.model
        assert np.array_equal(a.model.params, b.model.params)
        assert a.loss_history == b.loss_history
        c = train(keys, TrainConfig(epochs=3, batch_size=64, rng_seed=6))
        assert not np.array_equal(a.model.params, c.model.params)

    def test_median_matches_empirical_cdf(self, quick_uniform_model):
        model, keys = quick_uniform_model
        med = float(np.median(keys))
        ecdf = np.count_nonzero(keys <= med) / keys.size  # brute-force oracle
        out = forward(model, med)
        assert 0.45 <= out <= 0.55
        assert abs(out - ecdf) < 0.05

    @pytest.mark.slow
    def test_convergence_200_epochs(self):
        from nnsort.datagen import generate
        keys = generate("uniform", 100_000, seed=11)
        res = train(keys, TrainConfig(delta=1.0, epochs=200))
        assert res.loss_history[-1] <= 0.1 * res.loss_history[0]


class TestPersistence:
    def test_round_trip(self, tmp_path):
        m = _random_model(4)
        save_model(m, tmp_path / "m.nns")
        back = load_model(tmp_path / "m.nns")
        assert back == m
        assert back.params.tobytes() == m.params.tobytes()
        raw = (tmp_path / "m.nns").read_bytes()
        assert raw[:4] == MAGIC and len(raw) == 4 + 4 + 20 + 369 * 8 + 16

    def test_truncated(self, tmp_path):
        save_model(_random_model(), tmp_path / "m.nns")
        raw = (tmp_path / "m.nns").read_bytes()
        (tmp_path / "t.nns").write_bytes(raw[:-9])
        with pytest.raises(ModelFileError, match="expected"):
            load_model(tmp_path / "t.nns")
        (tmp_path / "t2.nns").write_bytes(raw[:6])
        with pytest.raises(ModelFileError, match="truncated"):
            load_model(tmp_path / "t2.nns")

    def test_wrong_magic(self, tmp_path):
        save_model(_random_model(), tmp_path / "m.nns")
        raw = (tmp_path / "m.nns").read_bytes()
        (tmp_path / "x.nns").write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(ModelFileError, match="magic"):
            load_model(tmp_path / "x.nns")
        (tmp_path / "v.nns").write_bytes(b"NNS2" + raw[4:])
        with pytest.raises(ModelFileError, match="version"):
            load_model(tmp_path / "v.nns")

    def test_pickle_keeps_views(self):
        import pickle
        m = pickle.loads(pickle.dumps(_random_model(3)))
        m.weights[0][0, 0] = 7.0
        assert m.params[0] == 7.0
