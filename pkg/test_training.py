import os
import struct

import numpy as np
import pytest

from conftest import write_script_corpus
from errors import (
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    NonFiniteLossError,
    ShapeMismatchError,
)
from ingestion.datasets import Dataset
from ingestion.ingestion_service import IngestionService
from tasks.grid import AMHARIC, MULTISCRIPT, GridTaskSpec
from training.checkpoint import load_checkpoint, save_checkpoint
from training.model import build_model
from training.optimizer import Adam, AdamState, adam_step
from training.run_config import RunConfig
from training.trainer import evaluate, train_epoch
from training.training_service import TrainingService, run_experiment


# =============================================================================
# Adam
# =============================================================================

def test_adam_first_step_moves_by_lr():
    p = {"w": np.array([1.0])}
    adam_step(p, {"w": np.array([0.5])}, AdamState(lr=1e-3))
    assert p["w"][0] == pytest.approx(0.999, abs=1e-6)


def test_adam_first_step_magnitude_is_lr_for_any_gradient():
    p = {"w": np.zeros(5)}
    adam_step(p, {"w": np.array([1e-3, -2.0, 40.0, -0.7, 3e2])}, AdamState(lr=1e-3))
    np.testing.assert_allclose(np.abs(p["w"]), 1e-3, atol=1e-6)


def test_adam_zero_gradient_leaves_parameters_unchanged():
    p = {"w": np.array([0.3, -1.2])}
    before = p["w"].copy()
    state = AdamState()
    for _ in range(10):
        adam_step(p, {"w": np.zeros(2)}, state)
    assert p["w"].tobytes() == before.tobytes()
    assert state.step == 10


def test_adam_symmetric_parameters_move_identically():
    p = {"a": np.array([2.0]), "b": np.array([2.0])}
    opt = Adam(p, lr=0.01)
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = rng.standard_normal(1)
        opt.step({"a": g, "b": g.copy()})
    assert p["a"][0] == p["b"][0]


def test_adam_step_size_bound():
    p = {"w": np.zeros(3)}
    state = AdamState(lr=1e-3)
    rng = np.random.default_rng(1)
    for _ in range(50):
        before = p["w"].copy()
        adam_step(p, {"w": rng.standard_normal(3) * 100}, state)
        assert np.all(np.abs(p["w"] - before) <= state.lr / (1 - state.beta1))


def test_adam_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        adam_step({"w": np.zeros(3)}, {"w": np.zeros(4)}, AdamState())


# =============================================================================
# Checkpoints
# =============================================================================

@pytest.mark.parametrize("spec,objective", [(MULTISCRIPT, "new"), (MULTISCRIPT, "wloss"), (AMHARIC, "base")])
def test_checkpoint_round_trip_is_bitwise(tmp_path, spec, objective):
    model = build_model(spec, objective, seed=4)
    path = str(tmp_path / "model.mtlg")
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert loaded.objective == objective
    assert (loaded.spec.rows, loaded.spec.cols) == (spec.rows, spec.cols)
    for name, value in model.parameters().items():
        assert loaded.parameters()[name].tobytes() == value.tobytes()


def test_checkpoint_header_layout(tmp_path):
    path = str(tmp_path / "model.mtlg")
    save_checkpoint(build_model(MULTISCRIPT, "single"), path)
    with open(path, "rb") as f:
        raw = f.read()
    assert raw[:4] == b"MTLG"
    assert struct.unpack("<IIIB", raw[4:17]) == (1, 1, 10, 3)
    # first tensor: conv weight of rank 4
    assert struct.unpack("<5I", raw[17:37]) == (4, 16, 1, 3, 3)


def _corrupt(path, offset, payload):
    with open(path, "r+b") as f:
        f.seek(offset)
        f.write(payload)


def test_checkpoint_errors(tmp_path):
    path = str(tmp_path / "model.mtlg")
    save_checkpoint(build_model(MULTISCRIPT, "base"), path)
    with open(path, "rb") as f:
        raw = f.read()

    truncated = str(tmp_path / "truncated.mtlg")
    with open(truncated, "wb") as f:
        f.write(raw[:-100])
    with pytest.raises(CheckpointTruncatedError):
        load_checkpoint(truncated)

    for name, offset, payload, error in [
        ("magic", 0, b"GLTM", CheckpointMagicError),
        ("version", 4, struct.pack("<I", 2), CheckpointVersionError),
        ("shape", 21, struct.pack("<I", 15), CheckpointShapeError),
    ]:
        bad = str(tmp_path / f"{name}.mtlg")
        with open(bad, "wb") as f:
            f.write(raw)
        _corrupt(bad, offset, payload)
        with pytest.raises(error):
            load_checkpoint(bad)


# =============================================================================
# Epoch loop
# =============================================================================

def _separable_dataset(n=64, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    images = rng.uniform(0.0, 0.2, size=(n, 1, 28, 28)).astype(np.float32)
    images[labels == 1, :, 8:20, 8:20] += 0.7
    return Dataset(images, labels.astype(np.int64), GridTaskSpec(1, 2))


def test_base_loss_decreases_on_separable_toy_set():
    dataset = _separable_dataset()
    model = build_model(dataset.spec, "base", seed=0)
    optimizer = Adam(model.parameters())
    config = RunConfig(model="base", batch_size=8)
    losses = [train_epoch(model, optimizer, dataset, np.arange(64), config, epoch, seed=0).loss_total
              for epoch in range(1, 6)]
    assert all(b < a for a, b in zip(losses, losses[1:])), losses


def _tiny_multiscript(root):
    dirs = write_script_corpus(root, train_per_digit=4, test_per_digit=1)
    return IngestionService(dirs).load_experiment_data("multiscript", MULTISCRIPT)


def test_new_objective_factor_within_bounds(tmp_path):
    data = _tiny_multiscript(str(tmp_path))
    model = build_model(MULTISCRIPT, "new", seed=0)
    optimizer = Adam(model.parameters())
    config = RunConfig(model="new")
    for epoch in (1, 2):
        metrics = train_epoch(model, optimizer, data.train, np.arange(len(data.train)), config, epoch, 0)
        assert 1.0 <= metrics.factor_mean <= 2.0
        assert set(metrics.losses) == {"main", "aux"}


def test_wloss_with_zero_weights_tracks_base(tmp_path):
    data = _tiny_multiscript(str(tmp_path))
    indices = np.arange(len(data.train))
    trajectories = {}
    for name, config in (("base", RunConfig(model="base")),
                         ("wloss", RunConfig(model="wloss", sigma1=0.0, sigma2=0.0))):
        model = build_model(MULTISCRIPT, name, seed=3)
        optimizer = Adam(model.parameters())
        trajectories[name] = [train_epoch(model, optimizer, data.train, indices, config, epoch, 3).losses["main"]
                              for epoch in (1, 2, 3)]
    np.testing.assert_allclose(trajectories["wloss"], trajectories["base"], rtol=0, atol=1e-9)


def test_non_finite_loss_aborts_with_location(tmp_path):
    data = _tiny_multiscript(str(tmp_path))
    model = build_model(MULTISCRIPT, "base")
    model.heads["main"].params["bias"][:] = np.nan
    with pytest.raises(NonFiniteLossError) as info:
        train_epoch(model, Adam(model.parameters()), data.train, np.arange(len(data.train)),
                    RunConfig(model="base"), epoch=2, seed=0)
    assert (info.value.epoch, info.value.batch, info.value.component) == (2, 0, "main")


def test_evaluate_does_not_update_parameters(tmp_path):
    data = _tiny_multiscript(str(tmp_path))
    model = build_model(MULTISCRIPT, "wloss")
    before = model.copy_parameters()
    metrics = evaluate(model, data.test, RunConfig(model="wloss"))
    assert metrics.samples == len(data.test)
    assert 0.0 <= metrics.acc_overall <= 100.0
    for name, value in model.parameters().items():
        assert value.tobytes() == before[name].tobytes()


# =============================================================================
# Experiment protocol
# =============================================================================

def test_minimal_run_has_one_row_per_split(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    config = RunConfig(model="base", epochs=1, repeats=1, out=str(tmp_path / "runs"))
    record = run_experiment(config, data)
    assert [(r.repeat, r.epoch, r.split) for r in record.ordered_rows()] == [
        (1, 1, "train"), (1, 1, "val"), (1, 1, "test")]
    assert len(record.checkpoints) == 1 and os.path.exists(record.checkpoints[0])


def test_three_repeats_and_best_validation_epoch(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    config = RunConfig(model="new", epochs=3, repeats=3, seed=1, out=str(tmp_path / "runs"))
    record = run_experiment(config, data)
    tests = record.test_rows()
    assert len(tests) == 3 and len(record.checkpoints) == 3
    for repeat in (1, 2, 3):
        val = [r for r in record.rows if r.repeat == repeat and r.split == "val"]
        best = max(val, key=lambda r: (r.metrics.acc_overall, -r.epoch))
        assert record.best_epochs[repeat] == best.epoch
        assert [t.epoch for t in tests if t.repeat == repeat] == [best.epoch]
    assert record.aux_confusion.sum() == 3 * len(data.test)
    run_dir = os.path.join(config.out, config.run_id)
    for name in ("metrics.csv", "run.json", "aux_confusion.csv"):
        assert os.path.exists(os.path.join(run_dir, name))


def test_checkpoint_holds_best_epoch_weights(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    config = RunConfig(model="base", epochs=2, repeats=1, out=str(tmp_path / "runs"))
    record = run_experiment(config, data)
    model = load_checkpoint(record.checkpoints[0], MULTISCRIPT)
    metrics = evaluate(model, data.test, config)
    assert metrics.acc_overall == pytest.approx(record.test_rows()[0].metrics.acc_overall)


def test_identical_configs_give_identical_metrics(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    outputs = []
    for name in ("a", "b"):
        config = RunConfig(model="wloss", epochs=2, repeats=2, seed=7, out=str(tmp_path / name))
        run_experiment(config, data)
        with open(os.path.join(config.out, config.run_id, "metrics.csv"), "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]


def test_single_script_run_fills_its_column(tmp_path):
    dirs = write_script_corpus(str(tmp_path / "data"), train_per_digit=4, test_per_digit=1)
    config = RunConfig(model="kan", epochs=1, repeats=1, out=str(tmp_path / "runs"), **{
        f"{k}_dir": v for k, v in dirs.items()})
    assert config.objective == "single" and config.run_id == "kan-1x10-s0"
    record = run_experiment(config)
    columns = record.test_rows()[0].acc_columns
    assert columns[0] is None and columns[1] is None and columns[2] is not None


def test_service_reports_missing_data_as_config_error(tmp_path):
    config = RunConfig(model="base", latin_dir=str(tmp_path / "nowhere"), out=str(tmp_path / "runs"))
    result = TrainingService(config).train()
    assert result["status"] == "error"
    assert result["error_category"] == "config"
    assert "nowhere" in result["message"]


def test_service_writes_log_and_artifacts(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    config = RunConfig(model="base", epochs=1, repeats=1, out=str(tmp_path / "runs"))
    result = TrainingService(config).train(data)
    assert result["status"] == "success"
    assert os.path.exists(os.path.join(result["run_dir"], "train.log"))
    assert os.path.exists(result["metrics"])


def test_rerun_with_fewer_repeats_drops_old_checkpoints(tmp_path):
    data = _tiny_multiscript(str(tmp_path / "data"))
    out = str(tmp_path / "runs")
    TrainingService(RunConfig(model="base", epochs=1, repeats=2, out=out)).train(data)
    result = TrainingService(RunConfig(model="base", epochs=1, repeats=1, out=out)).train(data)
    assert result["status"] == "success"
    assert sorted(os.listdir(os.path.join(result["run_dir"], "checkpoints"))) == ["repeat1.mtlg"]
