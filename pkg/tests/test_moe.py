import json

import numpy as np
import pytest

from mgtd import hashing
from mgtd.detectors import TrainConfig
from mgtd.moe import (
    MoEError,
    MoEModel,
    aux_load_balance_loss,
    embed,
    embed_many,
    init_moe,
    loss_and_gradients,
    mlp_forward,
    mlp_train,
    moe_forward,
    moe_predict_proba,
    moe_train,
)
from test_detectors import assert_close_gradients, numeric_gradient


def small_model(mode, experts=3, seed=0, dropout=0.0, aux=0.01, classes=("a", "b", "c")):
    return init_moe(mode, classes, num_experts=experts, embed_dim=6, hidden=4,
                    seed=seed, dropout_rate=dropout, aux_weight=aux)


class TestEmbed:
    def test_empty_text_is_zero_vector(self):
        assert np.array_equal(embed("", 16), np.zeros(16))

    def test_deterministic(self):
        assert np.array_equal(embed("same text twice", 64), embed("same text twice", 64))

    def test_single_token_hash_evaluation(self):
        dim = 32
        vec = embed("Token", dim)
        idx = hashing.bucket("token", dim)
        expected = np.zeros(dim)
        expected[idx] = hashing.sign("token")
        np.testing.assert_array_equal(vec, expected)

    def test_unit_norm(self):
        assert np.linalg.norm(embed("a few more words here", 64)) == pytest.approx(1.0)


class TestForward:
    def test_single_expert_hard_equals_soft_equals_mlp(self):
        x = embed("some document text", 6)
        hard = small_model("Hard", experts=1, seed=4)
        soft = MoEModel.from_record(hard.to_record())
        soft.mode = "Soft"
        out_h, gate_h = moe_forward(hard, x)
        out_s, gate_s = moe_forward(soft, x)
        out_m = mlp_forward(hard.experts[0], x[None, :])[0]
        assert np.array_equal(out_h, out_s)
        assert np.array_equal(out_h, out_m)
        assert np.array_equal(gate_h, gate_s)

    def test_uniform_gate_soft_output_is_mean_of_experts(self):
        model = small_model("Soft", experts=4, seed=1)
        model.gate_w[:] = 0.0
        model.gate_b[:] = 0.0
        x = embed("words to classify", 6)
        out, _ = moe_forward(model, x)
        mean = np.mean([mlp_forward(e, x[None, :])[0] for e in model.experts], axis=0)
        np.testing.assert_allclose(out, mean, atol=1e-12)

    def test_hard_output_is_selected_expert_exactly(self):
        model = small_model("Hard", experts=3, seed=2)
        model.gate_w[:] = 0.0
        model.gate_b[:] = np.array([5.0, -1.0, -1.0])
        x = embed("route me", 6)
        out, gate = moe_forward(model, x)
        assert int(np.argmax(gate)) == 0
        assert np.array_equal(out, mlp_forward(model.experts[0], x[None, :])[0])

    def test_gate_weights_sum_to_one(self):
        model = small_model("Soft", experts=5, seed=3)
        X = embed_many(["one text", "another text", "third"], 6)
        _, gates = moe_predict_proba(model, X)
        np.testing.assert_allclose(gates.sum(axis=1), 1.0, atol=1e-9)

    def test_expert_permutation_invariance(self):
        model = small_model("Hard", experts=4, seed=5)
        x = embed("permute the experts", 6)
        perm = [2, 0, 3, 1]
        permuted = MoEModel.from_record(model.to_record())
        permuted.gate_w = model.gate_w[perm].copy()
        permuted.gate_b = model.gate_b[perm].copy()
        permuted.experts = [model.experts[i] for i in perm]
        out_a, _ = moe_forward(model, x)
        out_b, _ = moe_forward(permuted, x)
        assert np.array_equal(out_a, out_b)
        soft = MoEModel.from_record(model.to_record())
        soft.mode = "Soft"
        soft_perm = MoEModel.from_record(permuted.to_record())
        soft_perm.mode = "Soft"
        np.testing.assert_allclose(moe_forward(soft, x)[0], moe_forward(soft_perm, x)[0],
                                   atol=1e-12)

    def test_soft_output_is_coordinatewise_convex(self):
        model = small_model("Soft", experts=4, seed=6)
        x = embed("convexity check", 6)
        out, _ = moe_forward(model, x)
        per_expert = np.stack([mlp_forward(e, x[None, :])[0] for e in model.experts])
        assert np.all(out >= per_expert.min(axis=0) - 1e-12)
        assert np.all(out <= per_expert.max(axis=0) + 1e-12)

    def test_dropout_reproducible_with_fixed_seed(self):
        model = small_model("Soft", experts=2, seed=7, dropout=0.5)
        x = embed("dropout draws", 6)
        a = moe_forward(model, x, training=True, rng=np.random.default_rng(3))
        b = moe_forward(model, x, training=True, rng=np.random.default_rng(3))
        assert np.array_equal(a[0], b[0])

    def test_dimension_mismatch_rejected(self):
        model = small_model("Soft")
        with pytest.raises(MoEError, match="dimension"):
            moe_forward(model, np.zeros(7))


class TestAuxLoss:
    def test_uniform_logits_balance_perfectly(self):
        assert aux_load_balance_loss(np.zeros((8, 3))) == 0.0

    def test_all_mass_on_one_expert(self):
        value = aux_load_balance_loss(np.array([[60.0, -60.0]]))
        assert value == pytest.approx(2 * ((1 - 0.5) ** 2 + (0 - 0.5) ** 2), abs=1e-12)
        assert value == pytest.approx(1.0, abs=1e-12)

    def test_single_expert_is_always_zero(self):
        assert aux_load_balance_loss(np.random.default_rng(0).normal(size=(5, 1))) == 0.0


class TestGradients:
    def test_soft_mode_matches_central_differences(self):
        rng = np.random.default_rng(23)
        checked = 0
        attempt = 0
        while checked < 20:
            attempt += 1
            assert attempt < 200
            experts = int(rng.integers(1, 4))
            model = init_moe("Soft", ("a", "b", "c"), experts, embed_dim=5, hidden=4,
                             seed=int(rng.integers(1 << 30)), dropout_rate=0.0,
                             aux_weight=float(rng.uniform(0, 0.1)))
            n = int(rng.integers(2, 8))
            X = rng.normal(size=(n, 5))
            y = rng.integers(0, 3, size=n)
            pre = [X @ e.w1.T + e.b1 for e in model.experts]
            if min(np.min(np.abs(p)) for p in pre) < 1e-3:
                continue  # keep clear of the ReLU kink for finite differences
            l2 = float(rng.uniform(0, 0.1))
            params = model.params()
            _, grads = loss_and_gradients(model, X, y, l2, training=False, rng=None)

            def f():
                return loss_and_gradients(model, X, y, l2, training=False, rng=None)[0]

            assert_close_gradients(grads, numeric_gradient(f, params))
            checked += 1

    def test_hard_mode_expert_gradients_match_central_differences(self):
        rng = np.random.default_rng(29)
        checked = 0
        attempt = 0
        while checked < 8:
            attempt += 1
            assert attempt < 100
            model = init_moe("Hard", ("a", "b"), 3, embed_dim=5, hidden=4,
                             seed=int(rng.integers(1 << 30)), dropout_rate=0.0,
                             aux_weight=0.0)
            n = int(rng.integers(2, 6))
            X = rng.normal(size=(n, 5))
            y = rng.integers(0, 2, size=n)
            gate = X @ model.gate_w.T + model.gate_b
            top2 = np.sort(gate, axis=1)[:, -2:]
            if np.min(top2[:, 1] - top2[:, 0]) < 1e-2:
                continue  # routing must not flip inside the finite-difference step
            pre = [X @ e.w1.T + e.b1 for e in model.experts]
            if min(np.min(np.abs(p)) for p in pre) < 1e-3:
                continue
            _, grads = loss_and_gradients(model, X, y, 0.0, training=False, rng=None)
            expert_params = [p for e in model.experts for p in e.params()]
            expert_grads = grads[2:]

            def f():
                return loss_and_gradients(model, X, y, 0.0, training=False, rng=None)[0]

            assert_close_gradients(expert_grads, numeric_gradient(f, expert_params))
            checked += 1


class TestTraining:
    @staticmethod
    def data(seed=0, n=80, dim=16):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, dim))
        y = ["a" if x[0] + 0.3 * x[1] > 0 else "b" for x in X]
        return X, y

    def test_single_expert_trajectory_matches_plain_mlp(self):
        X, y = self.data()
        config = TrainConfig(learning_rate=0.01, epochs=4, batch_size=16, seed=11)
        for mode in ("Hard", "Soft"):
            model = init_moe(mode, ("a", "b"), 1, embed_dim=16, hidden=8, seed=2,
                             dropout_rate=0.0, aux_weight=0.0)
            mlp = mlp_train(model.experts[0], ("a", "b"), X, y, config)
            trained = moe_train(model, X, y, config)
            for p, q in zip(trained.experts[0].params(), mlp.params()):
                assert np.array_equal(p, q)
            # the gate receives exactly zero gradient, so it must not move
            assert np.array_equal(trained.gate_w, model.gate_w)

    def test_training_is_bit_deterministic(self):
        X, y = self.data(seed=5)
        config = TrainConfig(learning_rate=0.01, epochs=3, batch_size=16, seed=3)
        model = init_moe("Soft", ("a", "b"), 3, embed_dim=16, hidden=8, seed=9,
                         dropout_rate=0.2)
        a = moe_train(model, X, y, config)
        b = moe_train(model, X, y, config)
        assert json.dumps(a.to_record(), sort_keys=True) == json.dumps(b.to_record(),
                                                                       sort_keys=True)

    def test_training_improves_separable_data(self):
        X, y = self.data(seed=8, n=200)
        config = TrainConfig(learning_rate=0.01, epochs=20, batch_size=32, seed=1)
        for mode in ("Hard", "Soft"):
            model = init_moe(mode, ("a", "b"), 3, embed_dim=16, hidden=8, seed=4,
                             dropout_rate=0.1)
            trained = moe_train(model, X, y, config)
            probs, _ = moe_predict_proba(trained, X)
            acc = np.mean([trained.classes[i] == t for i, t in zip(np.argmax(probs, 1), y)])
            assert acc >= 0.95

    def test_unknown_label_rejected(self):
        model = small_model("Soft", classes=("a", "b"))
        with pytest.raises(MoEError, match="label"):
            moe_train(model, np.zeros((2, 6)), ["a", "z"], TrainConfig())

    def test_single_class_rejected(self):
        model = small_model("Soft", classes=("a", "b"))
        with pytest.raises(MoEError, match="distinct"):
            moe_train(model, np.zeros((2, 6)), ["a", "a"], TrainConfig())

    def test_record_roundtrip_is_exact(self):
        model = small_model("Hard", experts=2, seed=12)
        clone = MoEModel.from_record(json.loads(json.dumps(model.to_record())))
        for p, q in zip(model.params(), clone.params()):
            assert np.array_equal(p, q)
        assert clone.mode == model.mode and clone.classes == model.classes
