import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qbpm.exceptions import NumericalError, StructuralError, UsageError
from qbpm.head import (
    AdamState,
    ModelSpec,
    adam_step,
    compute_metrics,
    cross_entropy,
    default_selection,
    fuse_logits,
    softmax,
)


class TestFusion:
    def test_default_selection_alternates(self):
        assert default_selection(15, 3) == [0, 15, 1]
        assert default_selection(4, 5) == [0, 4, 1, 5, 2]

    def test_fuse(self):
        out = fuse_logits([0.1, 0.2], [0.3, 0.4], [3, 0], [1.0, -1.0])
        np.testing.assert_allclose(out, [1.4, -0.9])

    def test_fuse_batched(self):
        a = np.arange(6.0).reshape(3, 2)
        b = -a
        out = fuse_logits(a, b, [0, 2], [0, 0])
        np.testing.assert_array_equal(out, np.stack([a[:, 0], b[:, 0]], axis=1))

    def test_out_of_bounds(self):
        with pytest.raises(StructuralError):
            fuse_logits([0.1], [0.2], [2], [0])

    def test_model_spec_validation(self):
        assert ModelSpec(15, 20, 3).n_trainable == 1803
        with pytest.raises(StructuralError):
            ModelSpec(3, 1, 3, logit_selection=(0, 0, 1))
        with pytest.raises(StructuralError):
            ModelSpec(3, 1, 3, logit_selection=(0, 1, 6))
        with pytest.raises(StructuralError):
            ModelSpec(3, 1, 3, logit_selection=(0, 1))
        with pytest.raises(StructuralError):
            ModelSpec(3, 1, 1)


class TestSoftmaxAndLoss:
    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(2, 6), elements=st.floats(-50, 50)))
    def test_softmax_is_distribution(self, z):
        p = softmax(z)
        assert abs(p.sum() - 1) < 1e-12
        assert np.all(p >= 0)

    def test_softmax_shift_invariant(self):
        z = np.array([0.3, -1.0, 2.0])
        np.testing.assert_allclose(softmax(z), softmax(z + 100.0), atol=1e-15)

    def test_cross_entropy_value(self):
        assert abs(cross_entropy([0.25, 0.75], [0, 1]) + np.log(0.75)) < 1e-15

    def test_floor(self):
        assert cross_entropy([1.0, 0.0], [0, 1]) == pytest.approx(-np.log(1e-12))

    def test_regulariser_excludes_bias(self):
        theta = np.array([1.0, 2.0])
        assert cross_entropy([0.5, 0.5], [1, 0], theta, 0.1) == pytest.approx(np.log(2) + 0.5)


class TestAdam:
    def test_first_step_is_learning_rate_sized(self):
        state = AdamState(3, learning_rate=0.1)
        new, state = adam_step(state, np.array([0.5, -2.0, 0.1]), np.zeros(3))
        np.testing.assert_allclose(new, [-0.1, 0.1, -0.1], rtol=1e-4)
        assert state.t == 1

    def test_matches_textbook_bias_correction(self):
        rng = np.random.default_rng(0)
        state = AdamState(4, learning_rate=0.05)
        x = rng.standard_normal(4)
        m = v = np.zeros(4)
        ref = x.copy()
        for t in range(1, 6):
            g = rng.standard_normal(4)
            x, state = adam_step(state, g, x)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mhat, vhat = m / (1 - 0.9**t), v / (1 - 0.999**t)
            ref = ref - 0.05 * mhat / (np.sqrt(vhat) + 1e-8 / np.sqrt(1 - 0.999**t))
        np.testing.assert_allclose(x, ref, atol=1e-12)

    def test_non_finite(self):
        state = AdamState(2)
        with pytest.raises(NumericalError):
            adam_step(state, np.array([np.nan, 0.0]), np.zeros(2))
        assert state.t == 0

    def test_shape(self):
        with pytest.raises(UsageError):
            adam_step(AdamState(2), np.zeros(3), np.zeros(3))


class TestMetrics:
    def test_hand_example(self):
        m = compute_metrics([0, 1, 1, 2, 2], [0, 0, 1, 2, 2], 3)
        np.testing.assert_allclose(m.precision, [1, 0.5, 1])
        np.testing.assert_allclose(m.recall, [0.5, 1, 1])
        assert m.accuracy == pytest.approx(0.8)
        np.testing.assert_array_equal(m.confusion, [[1, 1, 0], [0, 1, 0], [0, 0, 2]])

    def test_absent_class_scores_zero(self):
        m = compute_metrics([0, 0], [0, 0], 2)
        np.testing.assert_array_equal(m.precision, [1, 0])
        np.testing.assert_array_equal(m.f1, [1, 0])

    def test_json(self):
        m = compute_metrics([0, 1], [0, 1], 2, loss=0.3, class_names=["a", "b"])
        d = json.loads(m.to_json())
        assert d["accuracy"] == 1.0
        assert [c["class"] for c in d["per_class"]] == ["a", "b"]
        assert d["confusion_matrix"] == [[1, 0], [0, 1]]

    def test_agrees_with_sklearn(self):
        from sklearn.metrics import precision_recall_fscore_support

        rng = np.random.default_rng(3)
        y, p = rng.integers(4, size=200), rng.integers(4, size=200)
        m = compute_metrics(p, y, 4)
        ref = precision_recall_fscore_support(y, p, labels=range(4), zero_division=0)
        for mine, theirs in zip((m.precision, m.recall, m.f1), ref[:3]):
            np.testing.assert_allclose(mine, theirs)

    def test_errors(self):
        with pytest.raises(UsageError):
            compute_metrics([], [], 2)
        with pytest.raises(UsageError):
            compute_metrics([0, 3], [0, 1], 2)
