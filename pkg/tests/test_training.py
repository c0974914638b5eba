import json
import math

import numpy as np
import pytest

import teyolof.training as training
from conftest import tiny_config
from teyolof.autograd import Tensor, ops
from teyolof.data import synth_generate
from teyolof.detection import LossConfig
from teyolof.detection.losses import LossOutput
from teyolof.errors import ConfigError, TrainingError
from teyolof.inference import evaluate
from teyolof.model import TEYOLOF
from teyolof.nn import BatchNorm2d
from teyolof.training import (
    RunLog,
    SGDState,
    TrainConfig,
    build_model,
    decay_mask,
    load_checkpoint,
    lr_at,
    sgd_step,
    train,
)


def _quick(**kw):
    base = dict(epochs=1, warmup_iters=2, eval_every=1, lr_drop_epochs=(), resolution=64)
    base.update(kw)
    return TrainConfig(**base)


# -- schedule --------------------------------------------------------------

def test_lr_examples():
    cfg = TrainConfig()
    assert abs(lr_at(0, cfg, 100) - 0.000015) < 1e-18
    assert lr_at(1500, cfg, 1000) == 0.015
    assert abs(lr_at(8 * 200, cfg, 200) - 0.0015) < 1e-15
    assert abs(lr_at(11 * 200, cfg, 200) - 0.00015) < 1e-15


def test_lr_continuous_and_non_increasing_after_warmup():
    cfg = TrainConfig(warmup_iters=50)
    assert abs(lr_at(49, cfg, 10) - lr_at(50, cfg, 10)) < 0.015 / 50 + 1e-12
    lrs = [lr_at(i, cfg, 10) for i in range(50, 130)]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    warm = [lr_at(i, cfg, 10) for i in range(51)]
    assert all(b > a for a, b in zip(warm, warm[1:]))


def test_lr_negative_iteration():
    with pytest.raises(ValueError):
        lr_at(-1, TrainConfig(), 10)


@pytest.mark.parametrize("kw", [dict(batch_size=0), dict(warmup_iters=-1), dict(lr_drop_epochs=(13,)),
                                dict(dtype="float16")])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw).validate()


# -- SGD -------------------------------------------------------------------

def test_sgd_vanilla():
    w = np.array([1.0, 2.0])
    sgd_step([w], [np.array([0.5, -1.0])], SGDState(), lr=0.1, momentum=0.0, weight_decay=0.0)
    np.testing.assert_allclose(w, [0.95, 2.1])


def test_sgd_momentum_two_steps():
    w = np.zeros(3)
    g = np.array([1.0, -2.0, 0.5])
    state = SGDState()
    for _ in range(2):
        sgd_step([w], [g], state, lr=1.0, momentum=0.9, weight_decay=0.0)
    np.testing.assert_allclose(w, -2.9 * g, rtol=1e-15)


def test_sgd_weight_decay_is_geometric():
    w = np.array([3.0])
    for _ in range(5):
        sgd_step([w], [np.zeros(1)], SGDState(), lr=0.1, momentum=0.0, weight_decay=0.01)
    assert abs(w[0] - 3.0 * (1 - 0.1 * 0.01) ** 5) < 1e-15


def test_sgd_decay_mask_exempts():
    a, b = np.ones(1), np.ones(1)
    sgd_step([a, b], [np.zeros(1), np.zeros(1)], SGDState(), 0.1, 0.0, 0.5, decay_mask=[True, False])
    assert a[0] == 0.95 and b[0] == 1.0


def test_bn_params_exempt_from_decay():
    m = TEYOLOF(tiny_config())
    mask = decay_mask(m)
    bn_ids = {id(p) for _, mod in m.named_modules() if isinstance(mod, BatchNorm2d) for p in mod.parameters()}
    for p, decays in zip(m.parameters(), mask):
        assert decays == (id(p) not in bn_ids)
    assert 0 < sum(mask) < len(mask)


# -- training loop ---------------------------------------------------------

@pytest.fixture(scope="module")
def eight():
    return synth_generate(8, seed=0, size=64)


def test_one_epoch_is_two_iterations(eight, tmp_path):
    model, log = train(_quick(), eight, model_cfg=tiny_config(), out_dir=tmp_path)
    assert [r["iter"] for r in log.iterations] == [0, 1]
    first = log.iterations[0]["loss"]
    assert math.isfinite(first) and first > 0
    assert len(log.evaluations) == 1
    for name in ("log.jsonl", "model.cfg", "train.json", "best.tylf", "last.tylf"):
        assert (tmp_path / name).exists()
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert [json.loads(x)["kind"] for x in lines] == ["iter", "iter", "eval"]


def test_max_iters_stops_early(eight):
    _, log = train(_quick(epochs=3), eight, model_cfg=tiny_config(), max_iters=3)
    assert len(log.iterations) == 3


def test_empty_dataset_rejected():
    with pytest.raises(ConfigError):
        train(_quick(), [], model_cfg=tiny_config())


def test_training_is_bitwise_deterministic(eight, tmp_path):
    cfg = _quick(epochs=2, augment=True, seed=5)
    train(cfg, eight, model_cfg=tiny_config(), out_dir=tmp_path / "a")
    train(cfg, eight, model_cfg=tiny_config(), out_dir=tmp_path / "b")
    for name in ("last.tylf", "best.tylf"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    la = (tmp_path / "a" / "log.jsonl").read_text().splitlines()
    lb = (tmp_path / "b" / "log.jsonl").read_text().splitlines()
    strip = [{k: v for k, v in json.loads(x).items() if k != "time"} for x in la]
    assert strip == [{k: v for k, v in json.loads(x).items() if k != "time"} for x in lb]


def test_checkpoint_reload_reproduces_eval(eight, tmp_path):
    cfg = _quick(epochs=2)
    model, _ = train(cfg, eight, model_cfg=tiny_config(), out_dir=tmp_path)
    from teyolof.data import prepare

    data = prepare(eight, 64)
    before, map_before, _ = evaluate(model, data)
    fresh = build_model(cfg, tiny_config())
    load_checkpoint(tmp_path / "last.tylf", fresh)
    after, map_after, _ = evaluate(fresh, data)
    assert before == after and map_before == map_after


def test_non_finite_loss_aborts_with_dump(eight, tmp_path, monkeypatch):
    real = training.detection_loss
    calls = []

    def poisoned(*args, **kwargs):
        out = real(*args, **kwargs)
        calls.append(1)
        if len(calls) == 2:
            bad = ops.mul(out.total, Tensor(np.array(np.nan)))
            return LossOutput(bad, out.cls, out.reg, out.num_positive)
        return out

    monkeypatch.setattr(training, "detection_loss", poisoned)
    with pytest.raises(TrainingError, match="iteration 1") as info:
        train(_quick(), eight, model_cfg=tiny_config(), out_dir=tmp_path)
    assert "image ids" in str(info.value)
    dump = json.loads((tmp_path / "nonfinite_batch.json").read_text())
    assert dump["iter"] == 1 and len(dump["image_ids"]) == 4


def test_float32_training_runs(eight):
    _, log = train(_quick(dtype="float32"), eight, model_cfg=tiny_config())
    assert all(math.isfinite(r["loss"]) for r in log.iterations)


def test_runlog_final_loss():
    log = RunLog()
    for i, v in enumerate([3.0, 2.0, 1.0]):
        log.append({"kind": "iter", "iter": i, "loss": v})
    log.append({"kind": "eval", "epoch": 0})
    assert log.final_loss() == 1.0 and log.final_loss(2) == 1.5
    assert len(log.evaluations) == 1


def test_loss_config_is_used(eight):
    _, a = train(_quick(), eight, model_cfg=tiny_config(), loss_cfg=LossConfig(reg_weight=0.0), max_iters=1)
    _, b = train(_quick(), eight, model_cfg=tiny_config(), max_iters=1)
    assert a.iterations[0]["cls"] == b.iterations[0]["cls"]
    assert a.iterations[0]["loss"] < b.iterations[0]["loss"]
