"""Tests for the classifier, its optimizer and the k-fold evaluation."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src import vqc
from src.circuit import Circuit, TrivialFeatureMap, ZZFeatureMap, template
from src.data_manager import gen_synthetic
from src.qsim import Gate, GateKind, run_statevector_batch, uniform_noise
from src.seeding import INIT, SAMPLE, derive_seed
from src.vqc import (Execution, TrainConfig, TrainingError, VqcModel, accuracy, cobyla_minimize, cohens_d,
                     cross_entropy, effect_size_label, kfold_evaluate, loss, predict_proba, predict_proba_batch,
                     train)


def small_ansatz():
    return Circuit(4, (Gate.parameterized(GateKind.RY, (0,), 0), Gate(GateKind.CX, (0, 1)),
                       Gate.parameterized(GateKind.RY, (3,), 1)), 2)


class TestModel:
    def test_class_of_outcome_is_index_mod_classes(self):
        model = VqcModel(TrivialFeatureMap(2), Circuit(2, (), 0), 3)
        probs = model.class_probabilities(np.array([10, 20, 30, 40]))
        # indices 0 and 3 are class 0
        assert_allclose(probs, [0.5, 0.2, 0.3])

    def test_qubit_mismatch(self):
        with pytest.raises(TrainingError):
            VqcModel(ZZFeatureMap(3), small_ansatz(), 2)

    def test_theta_length(self):
        with pytest.raises(TrainingError):
            VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.1])

    def test_bound_params_put_features_first(self):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.5, 0.7])
        params = model.bound_params(np.zeros((3, 4)))
        assert params.shape == (3, 12)
        assert_allclose(params[:, 10:], [[0.5, 0.7]] * 3)


class TestPrediction:
    def test_probabilities_are_normalized_and_seeded(self):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 3, theta=[0.3, 1.1])
        x = [0.4, 1.0, 2.0, 3.0]
        probs = predict_proba(model, x, 1024, seed=5)
        assert probs.shape == (3,)
        assert probs.sum() == pytest.approx(1.0)
        assert_allclose(probs, predict_proba(model, x, 1024, seed=5))

    def test_batch_rows_use_derived_seeds(self):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.3, 1.1])
        features = np.array([[0.4, 1.0, 2.0, 3.0], [1.0, 0.1, 0.2, 2.5]])
        batch = predict_proba_batch(model, features, 256, seed=9)
        assert_allclose(batch[1], predict_proba(model, features[1], 256, derive_seed(9, SAMPLE, 1)))

    def test_zero_noise_matches_ideal_distribution(self, manila):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.3, 1.1])
        x = np.array([[0.4, 1.0, 2.0, 3.0]])
        exact_states = run_statevector_batch(model.composed, model.bound_params(x))
        exact = model.class_probabilities(np.abs(exact_states[0]) ** 2)
        silent = Execution.noisy(manila, uniform_noise(0.0, 0.0, 5))
        estimated = predict_proba(model, x[0], 20000, seed=4, execution=silent)
        assert_allclose(estimated, exact, atol=0.02)

    def test_noise_pushes_towards_uniform(self, manila):
        # Every outcome lands in class 0 without noise
        model = VqcModel(TrivialFeatureMap(4), Circuit(4, (), 0), 2)
        noisy = Execution.noisy(manila, uniform_noise(0.0, 0.2, 5))
        probs = predict_proba(model, [0, 0, 0, 0], 4096, seed=1, execution=noisy)
        assert 0.6 < probs[0] < 0.95

    def test_cross_entropy_floor(self):
        probs = np.array([[1.0, 0.0], [0.5, 0.5]])
        assert cross_entropy(probs, np.array([1, 0]), floor=1e-10) == pytest.approx(
            (-math.log(1e-10) - math.log(0.5)) / 2)

    def test_uniform_prediction_costs_ln2(self):
        labels = np.array([0, 1, 1, 0, 1])
        assert cross_entropy(np.full((5, 2), 0.5), labels) == pytest.approx(math.log(2))

    def test_confident_correct_prediction_costs_nothing(self):
        labels = np.array([0, 1, 2])
        assert cross_entropy(np.eye(3)[labels], labels) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_two_qubit_output(self):
        hadamards = Circuit(2, (Gate(GateKind.H, (0,)), Gate(GateKind.H, (1,))), 0)
        model = VqcModel(TrivialFeatureMap(2), hadamards, 2)
        probs = predict_proba(model, [0.0, 0.0], 100_000, seed=8)
        assert_allclose(probs, [0.5, 0.5], atol=0.01)

    def test_empty_ansatz_predicts_class_zero(self):
        model = VqcModel(TrivialFeatureMap(1), Circuit(1, (), 0), 2)
        assert_allclose(predict_proba(model, [0.3], 64, seed=1), [1.0, 0.0])

    def test_labels_out_of_range(self):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.0, 0.0])
        with pytest.raises(TrainingError):
            loss(model, np.zeros((1, 4)), np.array([2]), 64, seed=1)


class TestCobyla:
    def test_shifted_quadratic(self):
        x, value, evals = cobyla_minimize(lambda v: (v[0] - 1) ** 2 + (v[1] - 2) ** 2, [0.0, 0.0], 100)
        assert_allclose(x, [1.0, 2.0], atol=1e-3)
        assert evals <= 100

    def test_rosenbrock(self):
        def rosenbrock(v):
            return (1 - v[0]) ** 2 + 100 * (v[1] - v[0] ** 2) ** 2
        _, value, evals = cobyla_minimize(rosenbrock, [-1.2, 1.0], 500, rhobeg=2.0)
        assert value <= 0.5
        assert evals <= 500

    def test_budget_is_never_exceeded(self):
        calls = []

        def f(v):
            calls.append(v)
            return float(np.sum(np.cos(3 * v)))
        _, _, evals = cobyla_minimize(f, np.zeros(3), 7)
        assert len(calls) == evals <= 7

    def test_minimal_budget_is_used_in_full(self):
        calls = []

        def f(v):
            calls.append(v)
            return float(np.sum(np.cos(3 * v)))
        _, _, evals = cobyla_minimize(f, np.ones(2), 4)
        assert len(calls) == evals == 4

    def test_budget_too_small(self):
        with pytest.raises(TrainingError):
            cobyla_minimize(lambda v: 0.0, np.zeros(4), 5)

    def test_non_finite_objective(self):
        with pytest.raises(TrainingError):
            cobyla_minimize(lambda v: float('nan'), np.zeros(1), 10)


class TestTraining:
    def test_training_never_worsens_the_start(self, tiny_dataset):
        cfg = TrainConfig(max_evals=20, shots=128)
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2)
        seed = 17
        start = np.random.default_rng(derive_seed(seed, INIT)).uniform(0.0, 2 * np.pi, 2)
        sample_seed = derive_seed(seed, SAMPLE)
        x, y = tiny_dataset.features, tiny_dataset.labels
        trained = train(model, x, y, cfg, seed)
        assert loss(trained, x, y, 128, sample_seed) <= loss(model.with_theta(start), x, y, 128, sample_seed)

    def test_training_is_deterministic(self, tiny_dataset):
        cfg = TrainConfig(max_evals=10, shots=64)
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2)
        a = train(model, tiny_dataset.features, tiny_dataset.labels, cfg, seed=3)
        b = train(model, tiny_dataset.features, tiny_dataset.labels, cfg, seed=3)
        assert_allclose(a.theta, b.theta)

    def test_parameter_free_ansatz(self, tiny_dataset):
        model = VqcModel(ZZFeatureMap(4), Circuit(4, (), 0), 2)
        trained = train(model, tiny_dataset.features, tiny_dataset.labels, TrainConfig(), seed=1)
        assert trained.theta.shape == (0,)

    def test_separable_pair_is_learned(self):
        # x0 near 0 or pi/2 encodes |+> or |-> on qubit 0; x1 = pi silences the ZZ term
        rng = np.random.default_rng(5)
        x0 = np.concatenate([rng.uniform(0.0, 0.3, 10), rng.uniform(np.pi / 2 - 0.15, np.pi / 2 + 0.15, 10)])
        features = np.column_stack([x0, np.full(20, np.pi)])
        labels = np.repeat([0, 1], 10)
        model = VqcModel(ZZFeatureMap(2), template("RealAmplitudes", 1, "linear", n_qubits=2), 2)
        trained = train(model, features, labels, TrainConfig(max_evals=100, shots=256), seed=2)
        assert accuracy(trained, features, labels, 256, seed=3) >= 0.9

    def test_accuracy_in_unit_interval(self, tiny_dataset):
        model = VqcModel(ZZFeatureMap(4), small_ansatz(), 2, theta=[0.2, 0.9])
        value = accuracy(model, tiny_dataset.features, tiny_dataset.labels, 64, seed=2)
        assert 0.0 <= value <= 1.0


class TestKFold:
    def evaluate(self, dataset, **kwargs):
        cfg = TrainConfig(max_evals=6, shots=64)
        return kfold_evaluate(small_ansatz(), dataset, k=2, train_fraction=0.5, n_seeds=2, cfg=cfg,
                              master_seed=11, split_seed=7, ansatz_id="small", **kwargs)

    def test_report_shape(self, tiny_dataset):
        report = self.evaluate(tiny_dataset)
        assert report.k == 2 and report.n_seeds == 2
        assert len(report.accuracies) == 4
        assert report.mean == pytest.approx(np.mean(report.accuracies))
        assert report.std == pytest.approx(np.std(report.accuracies))
        assert report.stats["params"] == 2

    def test_reproducible_and_parallel_safe(self, tiny_dataset):
        serial = self.evaluate(tiny_dataset)
        parallel = self.evaluate(tiny_dataset, parallelism=3)
        assert serial.per_seed == self.evaluate(tiny_dataset).per_seed
        assert serial.per_seed == parallel.per_seed

    def test_feature_count_must_match(self, tiny_dataset):
        narrow = tiny_dataset.with_features(tiny_dataset.features[:, :3])
        with pytest.raises(TrainingError):
            self.evaluate(narrow)

    def test_majority_class_classifier(self):
        # Every outcome of the empty circuit is class 0, the 65% class
        synthetic = gen_synthetic(42)
        report = kfold_evaluate(Circuit(4, (), 0), synthetic, k=3, n_seeds=2, feature_map=TrivialFeatureMap(4),
                                cfg=TrainConfig(shots=64), ansatz_id="majority")
        assert report.mean == pytest.approx(0.65, abs=0.01)
        assert report.std <= 0.01

    def test_single_split_has_no_spread(self, tiny_dataset):
        report = kfold_evaluate(small_ansatz(), tiny_dataset, k=1, n_seeds=1, cfg=TrainConfig(max_evals=6, shots=64))
        assert report.std == 0.0

    def test_parallel_noisy_run_transpiles_once(self, tiny_dataset, manila, monkeypatch):
        calls = []
        original = vqc.transpile

        def counting_transpile(circuit, snapshot):
            calls.append(snapshot.name)
            return original(circuit, snapshot)
        monkeypatch.setattr(vqc, "transpile", counting_transpile)
        report = kfold_evaluate(small_ansatz(), tiny_dataset, k=2, train_fraction=0.5, n_seeds=2,
                                execution=Execution.noisy(manila), cfg=TrainConfig(max_evals=4, shots=16), parallelism=4)
        assert len(report.accuracies) == 4
        assert calls == [manila.name]

    def test_template_on_iris(self, iris):
        report = kfold_evaluate(template("RealAmplitudes", 1, "linear"), iris, k=1, n_seeds=1,
                                cfg=TrainConfig(max_evals=10, shots=64), ansatz_id="ra")
        assert report.dataset == "iris"
        assert 0.0 <= report.mean <= 1.0


class TestEffectSize:
    def test_cohens_d(self):
        assert cohens_d([1, 2, 3], [2, 3, 4]) == pytest.approx(-1.0)

    def test_cohens_d_reference_value(self):
        assert cohens_d([1, 1, 2, 2], [0, 0, 1, 1]) == pytest.approx(1.7321, abs=1e-4)

    def test_cohens_d_shift_scale_and_swap(self):
        a, b = np.array([0.8, 0.9, 0.85, 0.7]), np.array([0.6, 0.75, 0.7, 0.65])
        d = cohens_d(a, b)
        assert cohens_d(3 * a + 1, 3 * b + 1) == pytest.approx(d)
        assert cohens_d(b, a) == pytest.approx(-d)

    def test_identical_samples(self):
        assert cohens_d([0.1, 0.3, 0.2], [0.1, 0.3, 0.2]) == 0.0

    def test_zero_spread(self):
        with pytest.raises(TrainingError):
            cohens_d([0.5, 0.5], [0.5, 0.5])

    @pytest.mark.parametrize("d,label", [(0.1, "negligible"), (-0.3, "small"), (0.6, "medium"), (1.2, "large")])
    def test_labels(self, d, label):
        assert effect_size_label(d) == label
