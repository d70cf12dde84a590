import dataclasses
import json

import numpy as np
import pytest
import torch

from frepdet.checkpoint import load_checkpoint, states_equal
from frepdet.data import SyntheticArtifactSpec as Spec, synthesize_toy_dataset
from frepdet.errors import ConfigError, InvalidDatasetError, TrainingDivergenceError
from frepdet.trainer import (TrainConfig, build_state, compute_losses, epoch_order, stack_items, steps_per_epoch,
                             train, train_step)


def small_config(**kw):
    base = dict(image_size=16, channels=1, batch_size=4, epochs=1, seed=3, lr_discriminator=1e-4,
                generator_preset="tiny", discriminator_preset="tiny", classifier_preset="tiny")
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def items():
    return synthesize_toy_dataset(Spec(), Spec("checkerboard", 0.25), 10, 16, seed=0, channels=1)


def _batch(items, n=6):
    return stack_items(items[:3] + items[-3:][:n - 3])


def _snapshot(net):
    return [p.detach().clone() for p in net.parameters()]


def _same(a, b):
    return all(torch.equal(x, y) for x, y in zip(a, b))


def test_config_defaults_follow_published_values():
    cfg = TrainConfig()
    assert (cfg.lam, cfg.lr_generator, cfg.lr_discriminator, cfg.lr_classifier) == (0.5, 1e-4, 1e-1, 1e-4)
    assert (cfg.batch_size, cfg.epochs, cfg.image_size) == (16, 20, 256)
    assert (cfg.beta1, cfg.beta2, cfg.adam_eps) == (0.9, 0.999, 1e-8)


def test_config_file_keys_roundtrip():
    cfg = small_config(lam=0.25)
    d = cfg.to_dict()
    assert d["lambda"] == 0.25 and "lam" not in d
    assert TrainConfig.from_dict(d) == cfg
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"lambda": 2.0})
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"learning_rate": 1.0})
    with pytest.raises(ConfigError):
        small_config(batch_size=0).validate()


def test_zero_learning_rates_are_a_no_op(items):
    state = build_state(small_config(lr_generator=0.0, lr_discriminator=0.0, lr_classifier=0.0))
    before = {n: _snapshot(state.net(n)) for n in ("generator", "discriminator", "classifier")}
    x, y = _batch(items)
    _, bd = train_step(state, x, y)
    assert all(_same(before[n], _snapshot(state.net(n))) for n in before)
    assert np.isfinite(list(bd.as_dict().values())).all()
    assert state.step == 1


@pytest.mark.parametrize("which", ["generator", "discriminator", "classifier"])
def test_update_isolation(items, which):
    lrs = {"lr_generator": 0.0, "lr_discriminator": 0.0, "lr_classifier": 0.0}
    lrs["lr_" + which] = 1e-2
    # tiny generator starts with a zero output layer; one step still moves it
    state = build_state(small_config(**lrs))
    before = {n: _snapshot(state.net(n)) for n in ("generator", "discriminator", "classifier")}
    train_step(state, *_batch(items))
    for n, snap in before.items():
        assert _same(snap, _snapshot(state.net(n))) == (n != which)


def test_reported_losses_are_pre_update(items):
    state = build_state(small_config(lr_generator=1e-2, lr_discriminator=1e-2, lr_classifier=1e-2))
    x, y = _batch(items)
    expected = {k: v.item() for k, v in compute_losses(state, x, y).items()}
    _, bd = train_step(state, x, y)
    assert bd.as_dict() == pytest.approx(expected, abs=0, rel=0)
    after = {k: v.item() for k, v in compute_losses(state, x, y).items()}
    assert after != expected


def test_all_gradients_use_pre_update_parameters(items):
    # the D gradient after a step with lr_g > 0 equals the one with lr_g = 0
    cfg_a = small_config(lr_generator=0.5, lr_discriminator=1e-3, lr_classifier=0.0)
    cfg_b = dataclasses.replace(cfg_a, lr_generator=0.0)
    a, b = build_state(cfg_a), build_state(cfg_b)
    x, y = _batch(items)
    train_step(a, x, y)
    train_step(b, x, y)
    assert _same(_snapshot(a.discriminator), _snapshot(b.discriminator))
    assert not _same(_snapshot(a.generator), _snapshot(b.generator))


def test_determinism_over_ten_steps(items):
    def run():
        state = build_state(small_config(lr_generator=1e-3))
        for k in range(10):
            order = epoch_order(3, k, len(items))[:4]
            train_step(state, *stack_items([items[i] for i in order]))
        return state

    assert states_equal(run(), run())


def test_divergence_raises_with_step(items):
    state = build_state(small_config())
    x, y = _batch(items)
    train_step(state, x, y)
    with torch.no_grad():
        next(state.discriminator.parameters()).fill_(float("nan"))
    with pytest.raises(TrainingDivergenceError) as info:
        train_step(state, x, y)
    assert info.value.step == 1


def test_epoch_order_is_a_pure_permutation():
    a = epoch_order(5, 2, 30)
    assert sorted(a) == list(range(30))
    assert np.array_equal(a, epoch_order(5, 2, 30))
    assert not np.array_equal(a, epoch_order(5, 3, 30))
    assert steps_per_epoch(30, 16) == 2


def test_epochs_zero_returns_initial_state(items):
    cfg = small_config(epochs=0)
    state, log = train(cfg, items)
    assert log == [] and state.step == 0
    assert states_equal(state, build_state(cfg))


def test_single_class_dataset_rejected(items):
    with pytest.raises(InvalidDatasetError):
        train(small_config(), [it for it in items if it.label == 0])


def test_train_runs_epochs_and_writes_logs(items, tmp_path):
    cfg = small_config(epochs=2)
    state, log = train(cfg, items, eval_dataset=items[:4] + items[-4:], checkpoint_dir=tmp_path / "ck",
                       log_path=tmp_path / "log.jsonl")
    spe = steps_per_epoch(len(items), cfg.batch_size)
    assert state.step == 2 * spe and state.epoch == 2 and len(state.history) == 2 * spe
    lines = [json.loads(l) for l in (tmp_path / "log.jsonl").read_text().splitlines()]
    assert [l["epoch"] for l in lines] == [1, 2]
    assert set(lines[0]) == {"epoch", "step", "l_adv", "l_com", "l_g", "l_d", "l_c", "eval_acc", "eval_ap"}
    assert sorted(p.name for p in (tmp_path / "ck").iterdir()) == ["epoch_001.ckpt", "epoch_002.ckpt", "last.ckpt"]
    assert states_equal(load_checkpoint(tmp_path / "ck" / "last.ckpt"), state)


def test_resume_matches_uninterrupted_run(items, tmp_path):
    from frepdet.checkpoint import save_checkpoint

    cfg = small_config(epochs=3, lr_generator=1e-3)
    full, _ = train(cfg, items, eval_dataset=items)
    half, _ = train(cfg, items, eval_dataset=items, stop_after_step=7)
    save_checkpoint(half, tmp_path / "mid.ckpt")
    resumed, _ = train(cfg, items, eval_dataset=items, state=load_checkpoint(tmp_path / "mid.ckpt"))
    assert states_equal(full, resumed)
