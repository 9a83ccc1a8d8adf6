import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from distillstream.evaluation import (
    EMOTIONS6_REMAP,
    EMOTIONS8_REMAP,
    EvalSchemaError,
    EvalSpec,
    LabeledSample,
    accuracy,
    evaluate,
    kfold_splits,
    load_benchmark,
    load_eval_spec,
    masked_predict,
    random_splits_80_5_15,
    remap_label,
)
from distillstream.student import StudentModel
from distillstream.synthetic import gen_synthetic_benchmark, write_benchmark
from distillstream.teacher import NEUTRAL
from distillstream.training import TrainConfig


def binary_spec(name="bench", protocol="kfold5", seed=0, n_repeats=5):
    return EvalSpec(
        name=name, label_space="binary_polarity",
        split_protocol=protocol, n_repeats=n_repeats, seed=seed,
    )


class TestRemap:
    def test_emotions8_table_word_for_word(self):
        positives = {"Awe", "Amusement", "Excitement", "Contentment"}
        negatives = {"Fear", "Disgust", "Sadness", "Anger"}
        assert {k for k, v in EMOTIONS8_REMAP.items() if v == "positive"} == positives
        assert {k for k, v in EMOTIONS8_REMAP.items() if v == "negative"} == negatives

    def test_emotions6_table_word_for_word(self):
        positives = {"Joy", "Surprise"}
        negatives = {"Anger", "Disgust", "Fear", "Sadness"}
        assert {k for k, v in EMOTIONS6_REMAP.items() if v == "positive"} == positives
        assert {k for k, v in EMOTIONS6_REMAP.items() if v == "negative"} == negatives

    def test_awe_maps_positive(self):
        spec = EvalSpec(name="fi", label_space="emotions8")
        assert remap_label("Awe", spec) == "positive"

    def test_surprise_maps_positive(self):
        spec = EvalSpec(name="roi", label_space="emotions6")
        assert remap_label("Surprise", spec) == "positive"

    def test_binary_identity(self):
        spec = binary_spec()
        assert remap_label("negative", spec) == "negative"
        assert remap_label("positive", spec) == "positive"

    def test_unknown_label_schema_error(self):
        spec = binary_spec()
        with pytest.raises(EvalSchemaError, match="label space"):
            remap_label("Joy", spec)

    def test_binary_non_identity_rejected(self):
        with pytest.raises(EvalSchemaError, match="identity"):
            EvalSpec(
                name="x", label_space="binary_polarity",
                remap={"positive": "negative", "negative": "positive"},
            )

    def test_partial_remap_rejected(self):
        with pytest.raises(EvalSchemaError, match="cover"):
            EvalSpec(name="x", label_space="emotions6", remap={"Joy": "positive"})


class TestMaskedPredict:
    def _model_with_output(self, probs):
        model = StudentModel.create("linear", 2)
        model.params["b2"][:] = np.log(np.asarray(probs))
        return model

    def test_neutral_heavy_output_goes_negative(self):
        model = self._model_with_output([0.2, 0.5, 0.3])
        assert masked_predict(model, np.zeros(2)) == "negative"

    def test_neutral_heavy_output_goes_positive(self):
        model = self._model_with_output([0.4, 0.5, 0.1])
        assert masked_predict(model, np.zeros(2)) == "positive"

    def test_tie_goes_positive(self):
        model = self._model_with_output([0.25, 0.5, 0.25])
        assert masked_predict(model, np.zeros(2)) == "positive"

    @given(seed=st.integers(0, 500))
    @settings(max_examples=60, deadline=None)
    def test_never_neutral(self, seed):
        rng = np.random.default_rng(seed)
        model = StudentModel.create("linear", 3, seed=seed)
        model.params["W2"] += rng.standard_normal((3, 3))
        model.params["b2"][NEUTRAL] = 10.0  # neutral dominates the softmax
        assert masked_predict(model, rng.standard_normal(3)) in ("positive", "negative")


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(["positive"] * 10, ["positive"] * 10) == 1.0

    def test_all_flipped(self):
        assert accuracy(["positive"] * 4, ["negative"] * 4) == 0.0

    def test_three_of_four(self):
        preds = ["positive", "positive", "negative", "negative"]
        labels = ["positive", "positive", "negative", "positive"]
        assert accuracy(preds, labels) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            accuracy(["positive"], [])

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            accuracy([], [])


class TestKfold:
    def test_ten_ids_five_disjoint_covering_folds(self):
        ids = [f"s{k}" for k in range(10)]
        splits = kfold_splits(ids, 5, seed=0)
        tests = [set(test) for _, test in splits]
        assert all(len(t) == 2 for t in tests)
        assert set().union(*tests) == set(ids)
        for i in range(5):
            for j in range(i + 1, 5):
                assert not tests[i] & tests[j]

    def test_eleven_ids_fold_sizes_largest_first(self):
        splits = kfold_splits(list(range(11)), 5, seed=1)
        sizes = [len(test) for _, test in splits]
        assert sizes == [3, 2, 2, 2, 2]

    def test_same_seed_identical(self):
        ids = list(range(23))
        assert kfold_splits(ids, 5, seed=7) == kfold_splits(ids, 5, seed=7)

    def test_train_test_partition(self):
        ids = list(range(17))
        for train, test in kfold_splits(ids, 5, seed=2):
            assert sorted(train + test) == ids

    def test_too_few_ids(self):
        with pytest.raises(ValueError, match="at least"):
            kfold_splits([1, 2, 3], 5, seed=0)

    @given(n=st.integers(5, 60), seed=st.integers(0, 50))
    @settings(max_examples=50, deadline=None)
    def test_coverage_property(self, n, seed):
        ids = list(range(n))
        splits = kfold_splits(ids, 5, seed=seed)
        tests = [set(t) for _, t in splits]
        assert set().union(*tests) == set(ids)
        assert sum(len(t) for t in tests) == n


class TestRandomSplits:
    def test_exact_proportions_100(self):
        splits = random_splits_80_5_15(list(range(100)), 5, seed=0)
        assert len(splits) == 5
        for train, val, test in splits:
            assert (len(train), len(val), len(test)) == (80, 5, 15)

    def test_floor_arithmetic_20(self):
        splits = random_splits_80_5_15(list(range(20)), 2, seed=0)
        for train, val, test in splits:
            assert (len(train), len(val), len(test)) == (16, 1, 3)

    def test_disjoint_and_covering(self):
        ids = [f"x{k}" for k in range(37)]
        for train, val, test in random_splits_80_5_15(ids, 3, seed=5):
            assert sorted(train + val + test) == sorted(ids)
            assert not set(train) & set(val)
            assert not set(train) & set(test)
            assert not set(val) & set(test)

    def test_too_few_ids(self):
        with pytest.raises(ValueError, match="at least 20"):
            random_splits_80_5_15(list(range(19)), 5, seed=0)

    def test_same_seed_identical(self):
        ids = list(range(40))
        assert random_splits_80_5_15(ids, 5, seed=3) == random_splits_80_5_15(ids, 5, seed=3)


def constant_model(dim=4):
    """Always predicts positive after masking (zero weights -> uniform)."""
    return StudentModel.create("linear", dim)


def balanced_binary_data(n=40, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    data = []
    for k in range(n):
        label = "positive" if k % 2 == 0 else "negative"
        data.append(
            LabeledSample(id=f"b{k}", embedding=rng.standard_normal(dim), label=label)
        )
    return data


class TestEvaluate:
    def test_constant_model_on_balanced_benchmark(self):
        # Build labels so every test fold is itself 50/50: a constant
        # predictor must then score exactly the 0.5 base rate per split.
        rng = np.random.default_rng(0)
        ids = [f"b{k}" for k in range(40)]
        labels = {}
        for _, test in kfold_splits(ids, 5, seed=0):
            for j, sid in enumerate(test):
                labels[sid] = "positive" if j % 2 == 0 else "negative"
        data = [
            LabeledSample(id=sid, embedding=rng.standard_normal(4), label=labels[sid])
            for sid in ids
        ]
        result = evaluate(constant_model(), binary_spec(), data, fine_tune=False)
        for split in result.per_split:
            assert split.accuracy == pytest.approx(0.5)
        assert result.mean == pytest.approx(0.5)

    def test_zero_shot_never_mutates_model(self):
        samples, spec = gen_synthetic_benchmark(60, "binary_polarity", seed=1, dim=8)
        model = StudentModel.create("mlp1", 8, hidden=6, seed=2)
        before = model.params_hash()
        evaluate(model, spec, samples, fine_tune=False)
        assert model.params_hash() == before

    def test_fine_tune_on_separable_benchmark(self):
        samples, spec = gen_synthetic_benchmark(
            100, "binary_polarity", seed=3, dim=48, name="sep"
        )
        model = StudentModel.create("linear", 48)
        config = TrainConfig(lr=5e-3, max_epochs=300, patience=50, batch_size=16)
        result = evaluate(model, spec, samples, fine_tune=True, train_config=config)
        assert result.mean >= 0.95

    def test_fine_tune_does_not_touch_input_model(self):
        samples, spec = gen_synthetic_benchmark(40, "binary_polarity", seed=4, dim=6)
        model = StudentModel.create("linear", 6)
        before = model.params_hash()
        evaluate(model, spec, samples, fine_tune=True,
                 train_config=TrainConfig(max_epochs=2))
        assert model.params_hash() == before

    def test_fine_tune_keeps_neutral_column_frozen(self):
        from distillstream.evaluation import _fine_tune

        samples, spec = gen_synthetic_benchmark(40, "binary_polarity", seed=5, dim=6)
        model = StudentModel.create("linear", 6, seed=5)
        rng = np.random.default_rng(0)
        model.params["W2"] += rng.standard_normal((6, 3))
        neutral_col = model.params["W2"][:, NEUTRAL].copy()
        neutral_bias = model.params["b2"][NEUTRAL]
        tuned = _fine_tune(
            model.copy(), samples, None, spec, TrainConfig(max_epochs=5), seed=0
        )
        np.testing.assert_array_equal(tuned.params["W2"][:, NEUTRAL], neutral_col)
        assert tuned.params["b2"][NEUTRAL] == neutral_bias
        # Other columns did move.
        assert not np.array_equal(tuned.params["W2"][:, 0], model.params["W2"][:, 0])

    def test_same_seed_identical_per_split(self):
        samples, spec = gen_synthetic_benchmark(
            50, "emotions8", seed=6, dim=8, split_protocol="random_80_5_15"
        )
        model = StudentModel.create("linear", 8)
        r1 = evaluate(model, spec, samples, fine_tune=True,
                      train_config=TrainConfig(max_epochs=3))
        r2 = evaluate(model, spec, samples, fine_tune=True,
                      train_config=TrainConfig(max_epochs=3))
        assert r1.to_json_dict() == r2.to_json_dict()

    def test_std_is_population_std(self):
        data = balanced_binary_data(25)
        result = evaluate(constant_model(), binary_spec(seed=9), data)
        accs = [s.accuracy for s in result.per_split]
        assert result.std == pytest.approx(float(np.std(accs)))  # ddof=0

    def test_mean_std_table_format(self):
        data = balanced_binary_data(40)
        result = evaluate(constant_model(), binary_spec(), data)
        result.mean, result.std = 0.924, 0.020
        assert result.format_mean_std() == "92.4±2.0"

    def test_emotion_benchmark_remapped_through_protocol(self):
        samples, spec = gen_synthetic_benchmark(60, "emotions6", seed=7, dim=8)
        labels = {s.label for s in samples}
        assert labels <= {"Joy", "Surprise", "Anger", "Disgust", "Fear", "Sadness"}
        result = evaluate(constant_model(8), spec, samples)
        assert 0.0 <= result.mean <= 1.0

    def test_duplicate_ids_rejected(self):
        data = balanced_binary_data(10)
        data.append(data[0])
        with pytest.raises(EvalSchemaError, match="unique"):
            evaluate(constant_model(), binary_spec(), data)


class TestBenchmarkFiles:
    def test_write_load_round_trip(self, tmp_path):
        samples, spec = gen_synthetic_benchmark(
            30, "emotions8", seed=8, dim=6, name="rt",
            split_protocol="random_80_5_15", n_repeats=3,
        )
        write_benchmark(samples, spec, tmp_path / "rt.jsonl", tmp_path / "rt.spec.json")
        loaded_spec, data_path = load_eval_spec(tmp_path / "rt.spec.json")
        assert loaded_spec == spec
        loaded = load_benchmark(data_path, expected_dim=6)
        assert [s.id for s in loaded] == [s.id for s in samples]
        np.testing.assert_allclose(loaded[0].embedding, samples[0].embedding)

    def test_dimension_validation(self, tmp_path):
        samples, spec = gen_synthetic_benchmark(10, "binary_polarity", seed=9, dim=4)
        write_benchmark(samples, spec, tmp_path / "b.jsonl", tmp_path / "b.spec.json")
        with pytest.raises(EvalSchemaError, match="dimension"):
            load_benchmark(tmp_path / "b.jsonl", expected_dim=5)

    def test_missing_data_field(self, tmp_path):
        (tmp_path / "s.json").write_text('{"name": "x", "label_space": "binary_polarity", "split_protocol": "kfold5"}')
        with pytest.raises(EvalSchemaError, match="data"):
            load_eval_spec(tmp_path / "s.json")
