import math

import numpy as np
import pytest

from errors import LabelRangeError, ShapeMismatchError
from tensorcore import ArrayProbe, grad_check
from training.losses import compute_objective, cross_entropy, loss_base, loss_new, loss_wloss


def test_cross_entropy_examples():
    assert cross_entropy(np.zeros((1, 2)), [0])[0] == pytest.approx(0.693147, abs=1e-6)
    assert cross_entropy(np.array([[1.0, 0.0]]), [0])[0] == pytest.approx(0.313262, abs=1e-6)


@pytest.mark.parametrize("classes", [2, 10, 30, 77])
def test_cross_entropy_uniform_is_log_k(classes):
    value, grad = cross_entropy(np.zeros((4, classes)), [0, 1, 1, classes - 1])
    assert abs(value - math.log(classes)) < 1e-9
    np.testing.assert_allclose(grad.sum(axis=1), 0.0, atol=1e-12)


def test_cross_entropy_gradient_is_scaled_residual():
    logits = np.array([[2.0, 0.0], [0.0, 0.0]])
    _, grad = cross_entropy(logits, [0, 1])
    p = np.exp(2.0) / (np.exp(2.0) + 1.0)
    np.testing.assert_allclose(grad, [[(p - 1) / 2, (1 - p) / 2], [0.25, -0.25]])


def test_cross_entropy_rejects_bad_targets():
    with pytest.raises(LabelRangeError):
        cross_entropy(np.zeros((1, 3)), [3])
    with pytest.raises(ShapeMismatchError):
        cross_entropy(np.zeros((2, 3)), [0])


def test_loss_base_uniform():
    bundle = loss_base(np.zeros((8, 30)), np.arange(8))
    assert bundle.total == pytest.approx(math.log(30))
    assert set(bundle.components) == {"main"}
    assert bundle.factor is None


def test_wloss_with_zero_weights_equals_base():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        labels = rng.integers(0, 30, size=8)
        main = rng.standard_normal((8, 30))
        wl = loss_wloss(main, rng.standard_normal((8, 10)), rng.standard_normal((8, 3)), labels, 10, 0.0, 0.0)
        base = loss_base(main, labels)
        assert abs(wl.total - base.total) < 1e-9
        assert not wl.grads["digit"].any() and not wl.grads["script"].any()


def test_wloss_weighted_sum():
    rng = np.random.default_rng(1)
    labels = np.array([23, 5, 17])
    digit_logits = rng.standard_normal((3, 10))
    bundle = loss_wloss(rng.standard_normal((3, 30)), digit_logits,
                        rng.standard_normal((3, 3)), labels, 10, 0.2, 0.3)
    c = bundle.components
    assert bundle.total == pytest.approx(c["main"] + 0.2 * c["digit"] + 0.3 * c["script"])
    _, digit_grad = cross_entropy(digit_logits, labels % 10)
    np.testing.assert_allclose(bundle.grads["digit"], 0.2 * digit_grad)


def test_wloss_targets_are_decomposed_labels():
    digit_logits = np.full((2, 10), -5.0)
    script_logits = np.full((2, 3), -5.0)
    digit_logits[[0, 1], [3, 5]] = 5.0
    script_logits[[0, 1], [2, 0]] = 5.0
    bundle = loss_wloss(np.zeros((2, 30)), digit_logits, script_logits, [23, 5], 10, 1.0, 1.0)
    assert bundle.components["digit"] < 1e-3
    assert bundle.components["script"] < 1e-3


def test_wloss_rejects_negative_weights():
    with pytest.raises(ValueError):
        loss_wloss(np.zeros((1, 30)), np.zeros((1, 10)), np.zeros((1, 3)), [0], 10, -0.1, 0.3)


def test_loss_new_all_wrong_has_unit_factor():
    labels = np.array([23, 17])
    main = np.zeros((2, 30))
    main[:, 0] = 5.0  # predicts label 0: wrong script and wrong digit for both
    aux = np.zeros((2, 4))
    bundle = loss_new(main, aux, labels, 10)
    assert bundle.factor == 1.0
    np.testing.assert_array_equal(bundle.aux_targets, [0, 0])
    assert bundle.total == pytest.approx(bundle.components["main"] + bundle.components["aux"])


def test_loss_new_all_correct_saturates_factor():
    labels = np.arange(0, 30, 3)
    main = np.zeros((len(labels), 30))
    main[np.arange(len(labels)), labels] = 4.0
    bundle = loss_new(main, np.zeros((len(labels), 4)), labels, 10)
    assert bundle.factor == 2.0
    assert bundle.total == pytest.approx(2.0 * bundle.components["main"] + bundle.components["aux"])
    _, plain = cross_entropy(main, labels)
    np.testing.assert_allclose(bundle.grads["main"], 2.0 * plain)


def test_loss_new_factor_modes():
    labels = np.array([23, 5])
    main = np.zeros((2, 30))
    main[[0, 1], [23, 15]] = 3.0  # one fully right, one digit-only
    raw = loss_new(main, np.zeros((2, 4)), labels, 10, factor_mode="raw_sum")
    mean = loss_new(main, np.zeros((2, 4)), labels, 10, factor_mode="mean")
    assert raw.factor == 4.0
    assert mean.factor == pytest.approx(4.0 / 6.0)


def _objective_check(objective, rng):
    batch = int(rng.integers(1, 6))
    labels = rng.integers(0, 30, size=batch)
    logits = {"main": rng.standard_normal((batch, 30)), "digit": rng.standard_normal((batch, 10)),
              "script": rng.standard_normal((batch, 3)), "aux": rng.standard_normal((batch, 4))}
    sigma1, sigma2 = rng.uniform(0, 1, size=2)

    def loss_fn(network, _input):
        bundle = compute_objective(objective, network.parameters(), labels, 10, sigma1, sigma2)
        grads = {name: bundle.grads.get(name, np.zeros_like(value))
                 for name, value in network.parameters().items()}
        return bundle.total, grads

    return grad_check(ArrayProbe(logits), None, loss_fn)


@pytest.mark.parametrize("objective", ["base", "wloss", "new"])
@pytest.mark.parametrize("seed", range(12))
def test_objective_gradients_match_finite_differences(objective, seed):
    report = _objective_check(objective, np.random.default_rng(seed))
    assert report.passed, report.failures()


def test_unknown_objective_rejected():
    with pytest.raises(ValueError):
        compute_objective("focal", {"main": np.zeros((1, 30))}, [0], 10)
