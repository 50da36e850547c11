from dataclasses import replace

import numpy as np
import pytest

from quartfuse.base.config import RunConfig
from quartfuse.base.run_dir import CheckpointWriteSession, RunDirectory
from quartfuse.commands.gradcheck import objective_grad_check
from quartfuse.misc.exceptions import ConfigError, ContractError, FormatError, IntegrityError, OptimizerError
from quartfuse.numcore import Workspace
from quartfuse.pipeline import (GROUPS, AdamW, Checkpoint, FusionModel, StageConfig, adamw_update, checkpoint_load, checkpoint_save,
                                group_hashes, run_pipeline, run_stage, stage_name)
from quartfuse.streams import StreamSettings
from quartfuse.streams.dataset import Dataset

def test_stage_names():
    assert [stage_name(s) for s in ("1", "2", "3", "II")] == ["I", "II", "III", "II"]
    with pytest.raises(ContractError):
        stage_name("4")

@pytest.mark.parametrize("stage, trainable, lam", [
    ("I", {"projections"}, 0.0),
    ("II", {"quart", "lora"}, 0.0),
    ("III", {"quart", "lora"}, 0.001),
])
def test_stage_config_from_config(tiny_config, stage, trainable, lam):
    config = StageConfig.from_config(tiny_config, stage)
    assert config.trainable == trainable
    assert config.trainable | config.frozen == set(GROUPS)
    assert config.lam == lam
    assert (config.perturb is not None) == (stage == "III")
    assert config.steps == 2

@pytest.mark.parametrize("changes", [
    {"lam": 0.1},
    {"trainable": frozenset({"quart", "lora", "decoder"}), "frozen": frozenset({"encoders", "projections"})},
    {"trainable": frozenset({"quart", "lora"}), "frozen": frozenset({"encoders", "projections"})},
    {"lrs": {"quart": 1e-3}},
])
def test_stage_config_contract(tiny_config, changes):
    with pytest.raises(ContractError):
        replace(StageConfig.from_config(tiny_config, "II"), **changes)

def test_perturbation_only_in_stage_three(tiny_config):
    stage3 = StageConfig.from_config(tiny_config, "III")
    with pytest.raises(ContractError):
        replace(stage3, stage="II", lam=0.0)
    assert stage3.to_dict()["perturb"]["ops"]["sensor"] == ["add-jitter", "replace-with-irrelevant", "no-perturbation"]

def test_adamw_first_step():
    theta, g = np.array([1.0, -2.0]), np.array([0.5, 0.25])
    new, m, v = adamw_update(theta, g, np.zeros(2), np.zeros(2), t=1, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.03)
    expected = theta * (1 - 0.1 * 0.03) - 0.1 * g / (np.abs(g) + 1e-8)
    np.testing.assert_allclose(new, expected, rtol=1e-12)
    np.testing.assert_allclose(m, 0.1 * g)
    np.testing.assert_allclose(v, 0.001 * g * g)

def test_adamw_groups_and_errors():
    ws = Workspace("f64")
    a = ws.tensor([1.0, 1.0], requires_grad=True)
    b = ws.tensor([1.0], requires_grad=True)
    optimizer = AdamW({"quart": {"a": a}, "lora": {"b": b}}, {"quart": 0.1, "lora": 0.01}, weight_decay=0.0)
    a.grad = np.array([1.0, -1.0])
    optimizer.step()
    np.testing.assert_allclose(a.data, [0.9, 1.1])
    np.testing.assert_allclose(b.data, [1.0])
    assert optimizer.steps() == {"quart": 1, "lora": 1}
    a.grad = np.array([np.nan, 0.0])
    with pytest.raises(OptimizerError):
        optimizer.step()
    with pytest.raises(OptimizerError):
        AdamW({"quart": {"a": a}}, {})

def test_model_groups_and_trainable_flags(model):
    groups = model.groups()
    assert set(groups) == set(GROUPS)
    model.set_trainable({"quart", "lora"})
    assert all(t.requires_grad == (name.split(".", 1)[0] in ("quart", "lora")) for name, t in model.named_parameters().items())
    with pytest.raises(ConfigError):
        model.set_trainable({"everything"})

def test_model_checks_datasets(model, tiny_config):
    other = RunConfig.from_dict({**tiny_config.to_dict(), "audio_tokens": 5})
    with pytest.raises(ConfigError) as error:
        model.check_dataset(StreamSettings.from_config(other))
    assert error.value.field == "audio_tokens"

def test_answer_loss_variants(model, dataset):
    sample = dataset[0]
    on_c = model.answer_loss(sample, "on_C", lam=0.0)
    assert on_c.total is on_c.quart
    assert on_c.output.context.shape == [1, 8]
    on_z = model.answer_loss(sample, "on_Z", lam=0.0)
    assert on_z.output is None
    regularised = model.answer_loss(sample, "on_Z", lam=0.1)
    assert regularised.reg is not None
    assert regularised.total.item() == pytest.approx(regularised.quart.item() + 0.1 * regularised.reg.item())
    caption = model.caption_loss(sample, "sensor")
    assert caption.total.item() > 0

def test_checkpoint_file(tmp_path, tiny_config, model):
    checkpoint = Checkpoint(stage="I", step=3, complete=False, config=tiny_config.to_dict(),
                            params={k: t.data.copy() for k, t in model.named_parameters().items()})
    path = tmp_path / "stageI.ckpt"
    checkpoint_save(checkpoint, path)
    loaded = checkpoint_load(path)
    assert (loaded.stage, loaded.step, loaded.complete) == ("I", 3, False)
    assert loaded.checkpoint_id == checkpoint.checkpoint_id
    for name, array in checkpoint.params.items():
        assert loaded.params[name].tobytes() == array.tobytes()

    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        checkpoint_load(path)
    path.write_bytes(b"NOPE" + bytes(data[4:]))
    with pytest.raises(FormatError):
        checkpoint_load(path)
    path.write_bytes(bytes(data[:40]))
    with pytest.raises(IntegrityError):
        checkpoint_load(path)
    with pytest.raises(FormatError):
        checkpoint_load(tmp_path / "missing.ckpt")

def test_checkpoint_compatibility(tiny_config):
    checkpoint = Checkpoint(stage="I", step=0, complete=True, config=tiny_config.to_dict(), params={})
    checkpoint.check_compatible({**tiny_config.to_dict(), "stage2_steps": 100})
    with pytest.raises(ConfigError) as error:
        checkpoint.check_compatible({**tiny_config.to_dict(), "lora_rank": 4})
    assert error.value.field == "lora_rank"
    checkpoint.check_compatible({**tiny_config.to_dict(), "lora_rank": 4}, ignore=("lora_rank",))

def test_failed_write_keeps_the_previous_checkpoint(tmp_path):
    path = tmp_path / "stageII.ckpt"
    path.write_bytes(b"previous")
    with pytest.raises(RuntimeError):
        with CheckpointWriteSession(path) as f:
            f.write(b"half")
            raise RuntimeError("interrupted")
    assert path.read_bytes() == b"previous"
    assert not (tmp_path / "stageII.ckpt.partial").exists()

def test_stages_train_only_their_groups(tiny_config, dataset):
    stage1 = run_stage(StageConfig.from_config(tiny_config, "I"), dataset, None, tiny_config)
    assert stage1.complete and stage1.step == 2
    assert stage1.metrics["last"]["stage"] == "I"

    fresh = FusionModel.from_config(tiny_config)
    trained = FusionModel.from_config(tiny_config)
    trained.load_arrays(stage1.params)
    before, after = group_hashes(fresh, GROUPS), group_hashes(trained, GROUPS)
    assert before["projections"] != after["projections"]
    for group in ("encoders", "quart", "decoder", "lora"):
        assert before[group] == after[group]

    stage2 = run_stage(StageConfig.from_config(tiny_config, "II"), dataset, stage1, tiny_config)
    last = stage2.metrics["last"]
    assert last["loss_total"] == pytest.approx(last["loss_quart"])
    assert last["alpha_entropy"] is not None
    assert sum(last["modality_mass"]) == pytest.approx(1.0)
    for name, array in stage1.params.items():
        if name.split(".", 1)[0] in ("encoders", "projections", "decoder"):
            assert stage2.params[name].tobytes() == array.tobytes()

    stage3 = run_stage(StageConfig.from_config(tiny_config, "III"), dataset, stage2, tiny_config)
    assert stage3.stage_config["lam"] == 0.001
    assert stage3.stage_config["perturb"] is not None

def test_stage_order_is_enforced(tiny_config, dataset):
    with pytest.raises(ContractError):
        run_stage(StageConfig.from_config(tiny_config, "II"), dataset, None, tiny_config)
    cold = run_stage(StageConfig.from_config(tiny_config, "II"), dataset, None, tiny_config, cold_start=True)
    assert cold.complete

    stage1 = run_stage(StageConfig.from_config(tiny_config, "I"), dataset, None, tiny_config)
    stage1.complete = False
    with pytest.raises(ContractError):
        run_stage(StageConfig.from_config(tiny_config, "II"), dataset, stage1, tiny_config)
    with pytest.raises(ContractError):
        run_stage(StageConfig.from_config(tiny_config, "III"), dataset, stage1, tiny_config)

def test_stage_two_may_change_gating_and_adapter_shapes(tiny_config, dataset):
    stage1 = run_stage(StageConfig.from_config(tiny_config, "I"), dataset, None, tiny_config)
    wider = RunConfig.from_dict({**tiny_config.to_dict(), "lora_rank": 1, "quart_heads": 1, "quart_head_dim": 8})
    stage2 = run_stage(StageConfig.from_config(wider, "II"), dataset, stage1, wider)
    assert stage2.params["lora.layer0.w_q.A"].shape == (8, 1)

def test_resume_continues_bit_for_bit(tiny_config, dataset):
    long_config = RunConfig.from_dict({**tiny_config.to_dict(), "stage1_steps": 4})
    straight = run_stage(StageConfig.from_config(long_config, "I"), dataset, None, long_config)

    halfway = run_stage(StageConfig.from_config(tiny_config, "I"), dataset, None, tiny_config)
    resumed = run_stage(StageConfig.from_config(long_config, "I"), dataset, halfway, long_config)
    assert resumed.step == 4
    for name, array in straight.params.items():
        assert resumed.params[name].tobytes() == array.tobytes()

def test_pipeline_writes_the_run_directory(tmp_path, tiny_config, dataset):
    run_dir = RunDirectory.create_new(tmp_path / "run", tiny_config.to_dict(), {"seed": 0})
    result = run_pipeline(tiny_config, dataset, run_dir=run_dir)
    assert list(result.checkpoints) == ["I", "II", "III"]
    assert result.final is result.checkpoints["III"]
    for stage in ("I", "II", "III"):
        assert checkpoint_load(run_dir.checkpoint_path(stage)).complete
    records = run_dir.read_metrics()
    assert [(r["stage"], r["step"]) for r in records] == [(s, i) for s in ("I", "II", "III") for i in range(2)]
    assert run_dir.read_config() == tiny_config.to_dict()

def test_mid_stage_checkpoints(tmp_path, tiny_config, dataset):
    config = RunConfig.from_dict({**tiny_config.to_dict(), "stage1_steps": 3, "checkpoint_every": 1})
    run_dir = RunDirectory.create_new(tmp_path / "run", config.to_dict(), {})
    run_stage(StageConfig.from_config(config, "I"), dataset, None, config, run_dir)
    assert checkpoint_load(run_dir.checkpoint_path("I")).complete
    assert len(run_dir.read_metrics()) == 3

def test_full_objective_gradients(tiny_config):
    assert objective_grad_check(tiny_config, eps=1e-6, entries=4) < 1e-4

def test_dataset_must_fit_the_model(tiny_config, settings):
    config = RunConfig.from_dict({**tiny_config.to_dict(), "sensor_dim": 8})
    other = Dataset.generate(4, 0, StreamSettings.from_config(config), tiny_config.scenarios)
    with pytest.raises(ConfigError):
        run_stage(StageConfig.from_config(tiny_config, "I"), other, None, tiny_config)

def test_adamw_zero_gradient_without_decay():
    theta = np.array([0.3, -1.2, 4.0])
    new, m, v = adamw_update(theta, np.zeros(3), np.zeros(3), np.zeros(3), t=1, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0)
    np.testing.assert_array_equal(new, theta)

def test_adamw_scalar_trajectory():
    grads = [0.5, -0.2, 0.1, 0.4, -0.3]
    theta, m, v = np.array([1.0]), np.zeros(1), np.zeros(1)
    x, mx, vx = 1.0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        theta, m, v = adamw_update(theta, np.array([g]), m, v, t=t, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.03)
        mx = 0.9 * mx + 0.1 * g
        vx = 0.999 * vx + 0.001 * g * g
        x = x * (1 - 0.01 * 0.03) - 0.01 * (mx / (1 - 0.9 ** t)) / ((vx / (1 - 0.999 ** t)) ** 0.5 + 1e-8)
    assert abs(theta[0] - x) < 1e-10
