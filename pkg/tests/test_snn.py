"""CUBA neuron dynamics, the training loop, and checkpoint persistence."""

import numpy as np
import pytest

from spikecodec import (
    CubaNetwork,
    CubaParams,
    EncodingConfig,
    LossSpec,
    Rng,
    Scheme,
    SpikeTensor,
    TrainConfig,
    classify,
    classify_detailed,
    cuba_step,
    derive_seed,
    encode,
    forward,
    gradient_check,
    load_checkpoint,
    save_checkpoint,
    spike_rate_loss,
    synth_dataset,
    train,
)
from spikecodec.errors import (
    BadMagicError,
    ConfigError,
    ShapeError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from spikecodec.snn import _simulate


def encode_windows(dataset, config, base_seed=0):
    return [(encode(sig, config, Rng(derive_seed(base_seed, i))), int(label))
            for i, (sig, label) in enumerate(dataset)]


def small_task(n_per_class=4, seconds=1.0, steps=10, seed=1):
    ds = synth_dataset(3, n_per_class, seed=seed, seconds=seconds)
    cfg = EncodingConfig(Scheme.RATE_UNIFORM, steps_per_sample=steps, seed=seed)
    return encode_windows(ds, cfg, base_seed=seed)


class TestCubaStep:
    def test_zero_weights_stay_silent(self):
        p = CubaParams()
        w = np.zeros((4, 3))
        state = None
        for _ in range(20):
            s, state = cuba_step(state, np.ones(3), w, p)
            assert (s == 0).all()
        u, v = state
        assert (u == 0).all() and (v == 0).all()

    def test_single_suprathreshold_drive_spikes_and_resets(self):
        # drive 1.5 * threshold from fresh state: u = v = 1.5, spike, reset
        p = CubaParams(threshold=1.0, current_decay=0.5, voltage_decay=0.3)
        s, (u, v) = cuba_step(None, np.array([1.0]), np.array([[1.5]]), p)
        assert s[0] == 1.0
        assert u[0] == pytest.approx(1.5)
        assert v[0] == 0.0

    def test_subthreshold_drive_converges_below_threshold(self):
        # constant drive c: u -> c / a_u, v -> u / a_v (geometric series
        # limits); with the limit below threshold the neuron never fires
        p = CubaParams(threshold=1.0, current_decay=0.5, voltage_decay=0.5)
        c = 0.2
        limit = (c / 0.5) / 0.5
        assert limit < p.threshold
        state = None
        for _ in range(1000):
            s, state = cuba_step(state, np.array([1.0]), np.array([[c]]), p)
            assert s[0] == 0.0
        _, v = state
        assert v[0] == pytest.approx(limit, rel=1e-6)

    def test_identity_relay_special_case(self):
        # full decays and threshold 0.5 relay a {0,1} train unchanged
        p = CubaParams(threshold=0.5, current_decay=1.0, voltage_decay=1.0)
        w = np.array([[1.0]])
        state = None
        pattern = [1, 0, 1, 1, 0, 0, 1]
        out = []
        for bit in pattern:
            s, state = cuba_step(state, np.array([float(bit)]), w, p)
            out.append(int(s[0]))
        assert out == pattern

    def test_dimension_checks(self):
        p = CubaParams()
        with pytest.raises(ShapeError):
            cuba_step(None, np.ones(3), np.zeros((4, 2)), p)
        with pytest.raises(ShapeError):
            cuba_step((np.zeros(3), np.zeros(3)), np.ones(2), np.zeros((4, 2)), p)


class TestForward:
    def test_zero_input_zero_rates(self):
        net = CubaNetwork((7, 8, 3), dropout_p=0.0, seed=1)
        silent = SpikeTensor(np.zeros((1, 7, 40), dtype=np.int8), 1.0)
        result = forward(net, silent)
        assert (result.rates == 0).all()
        assert (result.spikes == 0).all()

    def test_saturating_drive_rates_near_one(self):
        # strong positive weights and a dense input saturate the output
        sizes = (4, 6, 3)
        weights = [np.full((6, 4), 2.0), np.full((3, 6), 2.0)]
        net = CubaNetwork(sizes, params=CubaParams(threshold=1.0, current_decay=1.0,
                                                   voltage_decay=1.0),
                          dropout_p=0.0, weights=weights)
        dense = SpikeTensor(np.ones((1, 4, 30), dtype=np.int8), 1.0)
        result = forward(net, dense)
        assert result.rates.min() >= 0.9

    def test_forward_is_deterministic(self):
        net = CubaNetwork((7, 16, 3), dropout_p=0.0, seed=3)
        tensor, _ = small_task()[0]
        a = forward(net, tensor)
        b = forward(net, tensor)
        assert np.array_equal(a.spikes, b.spikes)

    def test_potential_never_ends_step_at_or_above_threshold(self):
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=5)
        for tensor, _ in small_task()[:4]:
            result = forward(net, tensor, record_potentials=True)
            for layer_v, p in zip(result.potentials, net.params):
                assert (layer_v < p.threshold).all()

    def test_doubling_weights_and_threshold_preserves_raster(self):
        rng = np.random.default_rng(17)
        for trial in range(5):
            seed = int(rng.integers(0, 10_000))
            net = CubaNetwork((7, 12, 3), dropout_p=0.0, seed=seed)
            doubled = CubaNetwork(
                (7, 12, 3),
                params=[CubaParams(p.threshold * 2, p.current_decay, p.voltage_decay)
                        for p in net.params],
                dropout_p=0.0,
                weights=[w * 2 for w in net.weights],
            )
            tensor, _ = small_task(seed=trial)[0]
            assert np.array_equal(forward(net, tensor).spikes,
                                  forward(doubled, tensor).spikes)


class TestSpikeRateLoss:
    def test_exact_target_is_zero(self):
        spec = LossSpec(0.9, 0.1)
        assert spike_rate_loss([0.9, 0.1, 0.1], 0, spec) == 0.0

    def test_single_deviation_scales_by_class_count(self):
        spec = LossSpec(0.9, 0.1)
        delta = 0.05
        loss = spike_rate_loss([0.9 - delta, 0.1, 0.1, 0.1], 0, spec)
        assert loss == pytest.approx(delta ** 2 / 4)

    def test_non_negative_and_zero_iff_target(self):
        spec = LossSpec(0.8, 0.2)
        rng = np.random.default_rng(2)
        for _ in range(50):
            rates = rng.uniform(0, 1, size=5)
            loss = spike_rate_loss(rates, 2, spec)
            target = np.full(5, 0.2)
            target[2] = 0.8
            assert loss >= 0
            assert (loss == 0) == bool(np.allclose(rates, target))

    def test_bad_label(self):
        with pytest.raises(IndexError):
            spike_rate_loss([0.5, 0.5], 2, LossSpec())

    def test_rate_ordering_validated(self):
        with pytest.raises(ConfigError):
            LossSpec(true_rate=0.5, false_rate=0.5)


class TestClassify:
    def test_tie_breaks_toward_lowest_index(self):
        # an all-tie rate vector (silent input) must yield class 0
        net = CubaNetwork((7, 8, 3), dropout_p=0.0, seed=1)
        silent = SpikeTensor(np.zeros((1, 7, 40), dtype=np.int8), 1.0)
        assert classify(net, silent) == 0
        # the documented rule on plain rate vectors
        assert int(np.argmax(np.array([0.8, 0.1, 0.1]))) == 0
        assert int(np.argmax(np.array([0.5, 0.5, 0.1]))) == 0

    def test_no_spike_flag(self):
        net = CubaNetwork((7, 8, 3), dropout_p=0.0, seed=1)
        silent = SpikeTensor(np.zeros((1, 7, 40), dtype=np.int8), 1.0)
        result = classify_detailed(net, silent)
        assert result.label == 0
        assert result.no_spikes

    def test_classify_matches_forward(self):
        net = CubaNetwork((7, 16, 3), dropout_p=0.0, seed=3)
        tensor, _ = small_task()[0]
        assert classify(net, tensor) == int(np.argmax(forward(net, tensor).rates))


class TestTraining:
    def test_memorizes_single_sample(self):
        data = small_task()
        sample = [data[0]]
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=2)
        cfg = TrainConfig(epochs=30, learning_rate=5e-3, batch_size=1, seed=4)
        result = train(net, sample, cfg)
        assert result.best_test_accuracy == 1.0

    def test_equal_seeds_give_identical_loss_sequences(self):
        data = small_task()
        runs = []
        for _ in range(2):
            net = CubaNetwork((7, 16, 8, 3), dropout_p=0.1, seed=2)
            cfg = TrainConfig(epochs=5, learning_rate=1e-3, batch_size=4, seed=4)
            result = train(net, data, cfg)
            runs.append([h.loss for h in result.history])
        assert runs[0] == runs[1]

    def test_best_epoch_weights_are_restored(self):
        data = small_task()
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=2)
        cfg = TrainConfig(epochs=6, learning_rate=2e-3, batch_size=4, seed=4)
        result = train(net, data, cfg)
        accs = [h.test_accuracy for h in result.history]
        assert result.best_epoch == int(np.argmax(accs))
        assert result.best_test_accuracy == max(accs)

    def test_mixed_shapes_rejected(self):
        a = SpikeTensor(np.zeros((1, 7, 10), dtype=np.int8), 1.0)
        b = SpikeTensor(np.zeros((1, 7, 20), dtype=np.int8), 1.0)
        net = CubaNetwork((7, 8, 2), dropout_p=0.0)
        with pytest.raises(ShapeError):
            train(net, [(a, 0), (b, 1)], TrainConfig(epochs=1))


class TestGradientCheck:
    def test_soft_mode_matches_finite_differences(self):
        data = small_task()
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=7)
        cfg = TrainConfig(soft_mode=True, seed=11)
        result = gradient_check(net, data[0], cfg)
        assert result.ok
        assert result.n_checked >= 100
        assert result.max_rel_error <= 1e-4

    def test_zero_input_gives_zero_gradients_in_hard_mode(self):
        from spikecodec.snn import _loss_and_grads

        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=3)
        x = np.zeros((1, 7, 100))
        _, grads = _loss_and_grads(net, x, np.array([0]), LossSpec(), 10.0,
                                   soft=False)
        assert all((g == 0).all() for g in grads)

    def test_hard_mode_is_skipped(self):
        data = small_task()
        net = CubaNetwork((7, 8, 3), dropout_p=0.0, seed=3)
        result = gradient_check(net, data[0], TrainConfig(soft_mode=False))
        assert not result.ok
        assert "non-differentiable" in result.status
        assert result.n_checked == 0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.2, seed=5,
                          params=CubaParams(1.25, 0.4, 0.15))
        path = tmp_path / "model.cuba"
        cfg = TrainConfig(epochs=3, seed=9)
        save_checkpoint(net, path, train_config=cfg, sidecar_extra={"note": "x"})
        loaded, sidecar = load_checkpoint(path)
        assert loaded.layer_sizes == net.layer_sizes
        assert loaded.dropout_p == net.dropout_p
        assert loaded.params[0] == net.params[0]
        for a, b in zip(loaded.weights, net.weights):
            np.testing.assert_array_equal(a, b.astype(np.float32).astype(np.float64))
        assert sidecar["train_config"]["seed"] == 9
        assert sidecar["note"] == "x"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.cuba"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        net = CubaNetwork((2, 3), dropout_p=0.0, seed=1)
        path = tmp_path / "model.cuba"
        save_checkpoint(net, path)
        blob = bytearray(path.read_bytes())
        blob[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatchError):
            load_checkpoint(path)

    def test_truncated_payload(self, tmp_path):
        net = CubaNetwork((4, 8, 3), dropout_p=0.0, seed=1)
        path = tmp_path / "model.cuba"
        save_checkpoint(net, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-40])
        with pytest.raises(TruncatedPayloadError):
            load_checkpoint(path)

    def test_inference_identical_after_reload(self, tmp_path):
        data = small_task()
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=5)
        # float32 storage quantizes the weights, so compare the reloaded
        # net against a float32-rounded twin
        path = tmp_path / "model.cuba"
        save_checkpoint(net, path)
        loaded, _ = load_checkpoint(path)
        rounded = CubaNetwork(net.layer_sizes, params=net.params, dropout_p=0.0,
                              weights=[w.astype(np.float32).astype(np.float64)
                                       for w in net.weights])
        for tensor, _ in data[:3]:
            assert classify(loaded, tensor) == classify(rounded, tensor)


class TestSimulateInternals:
    def test_simulate_agrees_with_cuba_step_composition(self):
        net = CubaNetwork((5, 9, 4), dropout_p=0.0, seed=21)
        rng = np.random.default_rng(3)
        x = (rng.uniform(size=(1, 5, 30)) < 0.4).astype(np.float64)
        out, _ = _simulate(net, x)

        state = [None, None]
        manual = np.empty((30, 1, 4))
        for t in range(30):
            s = x[0, :, t][None, :]
            for li in range(2):
                s, state[li] = cuba_step(state[li], s, net.weights[li],
                                         net.params[li])
            manual[t] = s
        np.testing.assert_array_equal(out, manual)
