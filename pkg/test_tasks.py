import itertools

import numpy as np
import pytest

from errors import ConfigError, LabelRangeError
from tasks import (
    AMHARIC,
    MULTISCRIPT,
    GridTaskSpec,
    batch_aux_labels,
    compose_label,
    compute_factor,
    decompose_label,
    derive_aux_label,
    derive_aux_labels,
    parse_spec,
)


def test_decompose_examples():
    assert decompose_label(23, 10) == (2, 3)
    assert decompose_label(0, 10) == (0, 0)
    assert decompose_label(76, 7) == (10, 6)


def test_compose_examples():
    assert compose_label(1, 7, 10) == 17
    assert compose_label(10, 6, 7) == 76


@pytest.mark.parametrize("spec", [MULTISCRIPT, AMHARIC], ids=["3x10", "11x7"])
def test_compose_inverts_decompose(spec):
    for label in range(spec.num_classes):
        row, col = decompose_label(label, spec.cols, spec.rows)
        assert 0 <= row < spec.rows and 0 <= col < spec.cols
        assert compose_label(row, col, spec.cols, spec.rows) == label


def test_out_of_range_labels_rejected():
    with pytest.raises(LabelRangeError):
        decompose_label(-1, 10)
    with pytest.raises(LabelRangeError):
        decompose_label(30, 10, rows=3)
    with pytest.raises(LabelRangeError):
        compose_label(0, 10, 10)
    with pytest.raises(LabelRangeError):
        compose_label(3, 0, 10, rows=3)


def test_derive_aux_examples():
    assert derive_aux_label(23, 23, 10) == 3
    assert derive_aux_label(5, 15, 10) == 1
    assert derive_aux_label(14, 23, 10) == 0
    assert derive_aux_label(21, 23, 10) == 2


def _oracle(pred: int, true: int, cols: int) -> int:
    same_row = (pred // cols) == (true // cols)
    same_col = (pred % cols) == (true % cols)
    if same_row and same_col:
        return 3
    if same_row:
        return 2
    if same_col:
        return 1
    return 0


@pytest.mark.parametrize("spec,pairs", [(MULTISCRIPT, 900), (AMHARIC, 5929)], ids=["3x10", "11x7"])
def test_derive_aux_matches_oracle_exhaustively(spec, pairs):
    grid = list(itertools.product(range(spec.num_classes), repeat=2))
    assert len(grid) == pairs
    preds = np.array([p for p, _ in grid])
    trues = np.array([t for _, t in grid])
    expected = np.array([_oracle(p, t, spec.cols) for p, t in grid])
    np.testing.assert_array_equal(derive_aux_labels(preds, trues, spec.cols), expected)
    for p, t in grid[:: max(1, pairs // 300)]:
        assert derive_aux_label(p, t, spec.cols, spec.rows) == _oracle(p, t, spec.cols)


def test_derive_aux_diagonal_is_three():
    for x in range(AMHARIC.num_classes):
        assert derive_aux_label(x, x, AMHARIC.cols) == 3


def test_batch_aux_unique_max():
    logits = np.zeros((1, 30))
    logits[0, 12] = 5.0
    np.testing.assert_array_equal(batch_aux_labels(logits, [12], 10), [3])


def test_batch_aux_ties_break_to_lowest_index():
    # argmax 0 vs true 5: same script row, different digit
    np.testing.assert_array_equal(batch_aux_labels(np.zeros((1, 30)), [5], 10), [2])


def test_batch_aux_mixed_cases():
    true = np.array([23, 15, 23, 23])
    predicted = np.array([14, 5, 21, 23])
    logits = np.full((4, 30), -1.0)
    logits[np.arange(4), predicted] = 1.0
    np.testing.assert_array_equal(batch_aux_labels(logits, true, 10), [0, 1, 2, 3])


def test_factor_examples():
    saturated = compute_factor([3] * 32)
    assert saturated.raw_sum == 96
    assert saturated.factor == 2.0
    assert compute_factor([0] * 32).factor == 1.0
    stat = compute_factor([3, 0, 1, 2])
    assert (stat.raw_sum, stat.batch_size, stat.factor) == (6, 4, 1.5)


def test_factor_alternate_modes():
    assert compute_factor([3, 0, 1, 2], mode="mean").factor == 0.5
    assert compute_factor([3, 0, 1, 2], mode="raw_sum").factor == 6.0


def test_factor_rejects_bad_input():
    with pytest.raises(ValueError):
        compute_factor([])
    with pytest.raises(LabelRangeError):
        compute_factor([0, 4])
    with pytest.raises(ConfigError):
        compute_factor([1], mode="softmax")


def test_factor_properties_over_random_batches():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        batch = rng.integers(0, 4, size=int(rng.integers(1, 65)))
        factor = compute_factor(batch).factor
        assert 1.0 <= factor <= 2.0
        assert compute_factor(rng.permutation(batch)).factor == factor
        i = int(rng.integers(0, batch.size))
        if batch[i] < 3:
            bumped = batch.copy()
            bumped[i] += 1
            assert compute_factor(bumped).factor > factor


def test_parse_spec():
    assert parse_spec("3x10") is MULTISCRIPT
    assert parse_spec("11X7") is AMHARIC
    assert parse_spec("1x10").script_names == ("Latin",)
    custom = parse_spec(" 2 x 5 ")
    assert (custom.rows, custom.cols, custom.num_classes) == (2, 5, 10)
    assert custom.script_names == ("row_0", "row_1")
    for bad in ("3by10", "", "0x10"):
        with pytest.raises(ConfigError):
            parse_spec(bad)


def test_grid_spec_validates_names():
    with pytest.raises(ConfigError):
        GridTaskSpec(2, 3, ("only-one",))
    assert MULTISCRIPT.head_widths() == {"main": 30, "digit": 10, "script": 3, "aux": 4}
