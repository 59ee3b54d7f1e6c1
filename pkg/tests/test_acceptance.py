"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines.  The slow entries are the end-to-end training run (criterion 8,
budget 5 minutes) and the eight-scheme robustness protocol (criterion 9,
budget 15 minutes); everything else finishes in seconds.
"""

import time

import numpy as np

import oracles
from spikecodec import (
    CubaNetwork,
    EncodingConfig,
    MappingKind,
    NoiseMode,
    NoiseSpec,
    RateMapping,
    Rng,
    Scheme,
    Signal,
    SpikeTensor,
    TrainConfig,
    TtfsCurve,
    afr,
    encode,
    encode_binary,
    encode_rate,
    encode_ttfs,
    decode_binary,
    decode_ttfs,
    gradient_check,
    inject_noise,
    map_value_to_rate,
    rate_ppf,
    synth_dataset,
    train,
)
from spikecodec.evaluation import (
    encode_dataset,
    evaluate_scheme,
    reconstruction_snr_db,
    variant_config,
    VARIANT_NAMES,
)


def report(criterion, detail):
    print(f"\nACCEPTANCE {criterion}: PASS  {detail}")


class TestCriterion1AfrExactness:
    def test_ttfs_linear_afr_is_exactly_two_percent(self):
        start = time.monotonic()
        rng = np.random.default_rng(0)
        for channels, samples in ((7, 40), (1, 1), (3, 111)):
            sig = Signal(rng.uniform(0, 1, size=(channels, samples)), 20.0)
            tensor = encode_ttfs(sig, TtfsCurve.LINEAR, 50)
            assert afr(tensor) == 0.02
        elapsed = time.monotonic() - start
        assert elapsed < 1.0
        report(1, f"TTFS-linear AFR == 2.000% exactly on 3 signals ({elapsed:.2f}s)")


class TestCriterion2RateStatistics:
    def test_binomial_four_sigma_bound_over_twenty_seeds(self):
        start = time.monotonic()
        uniform = RateMapping(MappingKind.UNIFORM)
        sig = Signal([[0.5]], 20.0)
        passes = 0
        counts = []
        for seed in range(20):
            tensor = encode_rate(sig, uniform, 10_000, Rng(seed))
            count = int(tensor.data.sum())
            counts.append(count)
            if 4800 <= count <= 5200:
                passes += 1
        elapsed = time.monotonic() - start
        assert passes >= 19
        assert elapsed < 1.0
        report(2, f"{passes}/20 seeds inside [4800, 5200] "
                  f"(min {min(counts)}, max {max(counts)}; {elapsed:.2f}s)")


class TestCriterion3MappingOracles:
    def test_cdf_and_ppf_match_independent_oracles_on_grid(self):
        grid = np.linspace(0.0, 1.0, 1001)
        normal = RateMapping(MappingKind.NORMAL)
        beta = RateMapping(MappingKind.COMBINED_BETA)

        # oracle values first (untimed: the budget gates the library)
        oracle_cdf_n = np.array([oracles.normal_cdf(float(v)) for v in grid])
        oracle_cdf_b = np.array([oracles.combined_beta_cdf(float(v)) for v in grid])
        oracle_ppf_n = np.array([oracles.normal_ppf(float(p)) for p in grid])
        oracle_ppf_b = np.array([oracles.combined_beta_ppf(float(p)) for p in grid])

        start = time.monotonic()
        lib_cdf_n = map_value_to_rate(grid, normal)
        lib_cdf_b = map_value_to_rate(grid, beta)
        lib_ppf_n = rate_ppf(grid, normal)
        lib_ppf_b = rate_ppf(grid, beta)
        elapsed = time.monotonic() - start

        worst = max(np.abs(lib_cdf_n - oracle_cdf_n).max(),
                    np.abs(lib_cdf_b - oracle_cdf_b).max())
        worst_inv = max(np.abs(lib_ppf_n - oracle_ppf_n).max(),
                        np.abs(lib_ppf_b - oracle_ppf_b).max())
        assert worst <= 1e-4
        assert worst_inv <= 1e-4
        assert elapsed < 1.0
        report(3, f"1001-point grid: CDF err {worst:.2e}, PPF err {worst_inv:.2e} "
                  f"(library eval {elapsed:.3f}s)")


class TestCriterion4DeterministicRoundTrips:
    def test_binary10_and_ttfs_linear_bounds(self):
        start = time.monotonic()
        grid = np.linspace(0.0, 1.0, 10_000)
        sig = Signal(grid[None, :], 20.0)
        decoded = decode_binary(encode_binary(sig, 10)).data[0]
        binary_err = np.abs(decoded - grid).max()
        assert binary_err <= 10 * 2.0 ** -10

        grid_pos = np.linspace(1e-9, 1.0, 10_000)
        sig_pos = Signal(grid_pos[None, :], 20.0)
        decoded = decode_ttfs(encode_ttfs(sig_pos, TtfsCurve.LINEAR, 50),
                              TtfsCurve.LINEAR, 50).data[0]
        ttfs_err = np.abs(decoded - grid_pos).max()
        assert ttfs_err <= 1.0 / 50.0
        elapsed = time.monotonic() - start
        assert elapsed < 1.0
        report(4, f"binary-10 err {binary_err:.5f} <= {10 * 2**-10:.5f}, "
                  f"TTFS-linear err {ttfs_err:.5f} <= 0.02 ({elapsed:.2f}s)")


class TestCriterion5SnrOrdering:
    def test_qualitative_snr_ordering_on_midpoint_heavy_data(self):
        start = time.monotonic()
        ds = synth_dataset(3, 40, seed=42, seconds=2.0)
        snr = {
            name: reconstruction_snr_db(ds, variant_config(name,
                                                           steps_per_sample=50,
                                                           seed=7))
            for name in ("rate-uniform", "rate-beta", "ttfs-linear",
                         "binary6", "binary10")
        }
        assert snr["binary10"] > snr["binary6"]
        assert snr["binary10"] > snr["ttfs-linear"]
        assert snr["rate-beta"] >= snr["rate-uniform"]
        elapsed = time.monotonic() - start
        assert elapsed < 60.0
        pretty = ", ".join(f"{k}={v:.1f}dB" for k, v in snr.items())
        report(5, f"{pretty} ({elapsed:.1f}s)")


class TestCriterion6NoiseStatistics:
    def test_change_counts_and_zero_probability_identity(self):
        start = time.monotonic()
        data = np.zeros((1, 1, 100_000), dtype=np.int8)
        tensor = SpikeTensor(data, 1.0)
        noisy = inject_noise(tensor, NoiseSpec(0.1, seed=3,
                                               mode=NoiseMode.FLIP_BINARY))
        changed = int((noisy.data != data).sum())
        sigma = np.sqrt(100_000 * 0.1 * 0.9)
        assert abs(changed - 10_000) <= 3 * sigma

        rng = np.random.default_rng(1)
        ternary = rng.integers(-1, 2, size=(2, 7, 500)).astype(np.int8)
        source = SpikeTensor(ternary, 1.0)
        clean = inject_noise(source, NoiseSpec(0.0, seed=3,
                                               mode=NoiseMode.SIGNED_PERTURB))
        assert clean.data.tobytes() == source.data.tobytes()
        elapsed = time.monotonic() - start
        assert elapsed < 1.0
        report(6, f"changed {changed} of 1e5 at p=0.1 (3 sigma = {3*sigma:.0f}); "
                  f"p=0 byte-identical ({elapsed:.2f}s)")


class TestCriterion7GradientCheck:
    def test_soft_mode_gradients_match_finite_differences(self):
        start = time.monotonic()
        ds = synth_dataset(3, 4, seed=1, seconds=1.0)
        cfg = EncodingConfig(Scheme.RATE_UNIFORM, steps_per_sample=10, seed=5)
        sample = (encode(ds.signals[0], cfg, Rng(5)), int(ds.labels[0]))
        net = CubaNetwork((7, 16, 8, 3), dropout_p=0.0, seed=7)
        result = gradient_check(net, sample, TrainConfig(soft_mode=True, seed=11),
                                n_weights=120)
        elapsed = time.monotonic() - start
        assert result.ok
        assert result.n_checked >= 100
        assert result.max_rel_error <= 1e-4
        assert elapsed < 30.0
        report(7, f"max relative error {result.max_rel_error:.2e} over "
                  f"{result.n_checked} weights ({elapsed:.1f}s)")


class TestCriterion8EndToEndTraining:
    def test_reaches_ninety_percent_within_epoch_budget(self):
        # 30 epochs used of the 100-epoch budget; the criterion gates on
        # reaching 90% within 100
        start = time.monotonic()
        ds = synth_dataset(3, 40, seed=42, seconds=2.0)
        train_ds, test_ds = ds.split_leave_one_user_out("user0")
        cfg = variant_config("rate-beta", steps_per_sample=10, seed=0)
        encoded_train = encode_dataset(train_ds, cfg, 1)
        encoded_test = encode_dataset(test_ds, cfg, 2)
        net = CubaNetwork((7, 256, 64, 3), dropout_p=0.1, seed=5)
        train_cfg = TrainConfig(epochs=30, learning_rate=2e-3, batch_size=16,
                                seed=3)
        result = train(net, encoded_train, train_cfg, test_set=encoded_test)
        elapsed = time.monotonic() - start
        assert result.best_test_accuracy >= 0.9
        assert len(result.history) <= 100
        assert elapsed < 300.0
        report(8, f"test accuracy {result.best_test_accuracy:.3f} at epoch "
                  f"{result.best_epoch} of {len(result.history)} ({elapsed:.0f}s)")


class TestCriterion9RobustnessTrend:
    def test_monotone_drops_and_delta_beats_ttfs(self):
        start = time.monotonic()
        ds = synth_dataset(3, 60, seed=42, seconds=1.0)
        train_ds, test_ds = ds.split_leave_one_user_out("user0")
        train_cfg = TrainConfig(epochs=30, learning_rate=2e-3, batch_size=16,
                                seed=3)
        p_list = (0.001, 0.01, 0.1)
        rows = {}
        for name in VARIANT_NAMES:
            cfg = variant_config(name, steps_per_sample=20, seed=0)
            rows[name] = evaluate_scheme(name, cfg, train_ds, test_ds, train_cfg,
                                         p_list=p_list, noise_seeds=16,
                                         noise_seed_base=0)
        elapsed = time.monotonic() - start

        for name, row in rows.items():
            drops = [row.drops[p] for p in p_list]
            assert drops[0] <= drops[1] <= drops[2], \
                f"{name} drops not monotone: {drops}"
        delta_drop = rows["delta-mod"].drops[0.1]
        ttfs_drop = rows["ttfs-linear"].drops[0.1]
        assert delta_drop < ttfs_drop
        assert elapsed < 900.0
        summary = "; ".join(
            f"{name}: {[round(rows[name].drops[p], 4) for p in p_list]}"
            for name in VARIANT_NAMES)
        report(9, f"16 noise seeds; delta@0.1 {delta_drop:.4f} < ttfs@0.1 "
                  f"{ttfs_drop:.4f}; drops {summary} ({elapsed:.0f}s)")


class TestCriterion10ScopeStatement:
    def test_out_of_scope_quantities_are_not_asserted(self):
        # The published absolute accuracies (e.g. 91.7% for the beta-mapped
        # rate scheme), on-chip dynamic energy, and execution time depend on
        # the proprietary recordings and the neuromorphic deployment; they
        # are out of scope here and no test asserts them.  Reports carry an
        # explicit "not measured" marker for the deployment columns.
        from spikecodec.evaluation import SchemeEvaluation

        row = SchemeEvaluation(scheme="x", tensor_shape=(1, 1, 1),
                               time_step_ms=1.0, afr_pct=0.0, snr_db=0.0,
                               accuracy=0.0)
        assert row.dynamic_energy == "not measured"
        assert row.execution_time == "not measured"
        report(10, "absolute accuracy / energy / latency are explicitly "
                   "out of scope; deployment columns report 'not measured'")
