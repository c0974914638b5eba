"""SGD with warmup and step decay, and the training loop."""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .autograd import Tensor, backward, checkpoint, default_dtype, set_default_dtype
from .config import TEYOLOFConfig, save_config
from .data.loader import epoch_batches, num_batches, prepare
from .data.records import Sample
from .data.transforms import AugmentationConfig
from .detection import LossConfig, PostprocessConfig, detection_loss
from .errors import ConfigError, TrainingError
from .inference import evaluate, model_anchors
from .model import TEYOLOF
from .nn import BatchNorm2d

WARMUP_FACTOR = 1e-3


@dataclass
class TrainConfig:
    batch_size: int = 4
    base_lr: float = 0.015
    warmup_iters: int = 1500
    epochs: int = 12
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_drop_epochs: tuple[int, ...] = (8, 11)
    lr_drop_factor: float = 0.1
    seed: int = 0
    phi: float = 0.0
    activation: str = "mish"
    resolution: int | None = None  # None: the model config's resolution
    augment: bool = False
    eval_every: int = 1  # epochs; 0 evaluates only after the last epoch
    dtype: str = "float64"

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.warmup_iters < 0:
            raise ConfigError("warmup_iters must be >= 0")
        if any(not 0 < e <= self.epochs for e in self.lr_drop_epochs):
            raise ConfigError(f"lr drop epochs {self.lr_drop_epochs} must lie in (0, {self.epochs}]")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError(f"dtype must be float64 or float32, got {self.dtype!r}")


def lr_at(it: int, cfg: TrainConfig, iters_per_epoch: int) -> float:
    """Linear warmup from base/1000 over ``warmup_iters``, then x``lr_drop_factor`` per drop epoch passed."""
    if it < 0:
        raise ValueError("iteration must be >= 0")
    lr = cfg.base_lr
    if it < cfg.warmup_iters:
        frac = it / cfg.warmup_iters
        lr *= WARMUP_FACTOR + (1.0 - WARMUP_FACTOR) * frac
    drops = sum(1 for e in cfg.lr_drop_epochs if it >= e * iters_per_epoch)
    return lr * cfg.lr_drop_factor ** drops


@dataclass
class SGDState:
    velocity: dict[int, np.ndarray] = field(default_factory=dict)


def sgd_step(params, grads, state: SGDState, lr: float, momentum: float, weight_decay: float,
             decay_mask=None) -> None:
    """``v <- m v + g + wd w``, ``w <- w - lr v``, in place. ``decay_mask[i]`` False exempts param i."""
    for i, (p, g) in enumerate(zip(params, grads)):
        w = p.data if isinstance(p, Tensor) else p
        g = np.zeros_like(w) if g is None else g
        step = g + weight_decay * w if decay_mask is None or decay_mask[i] else g.copy()
        v = state.velocity.get(i)
        v = step if v is None else momentum * v + step
        state.velocity[i] = v
        w -= lr * v


def decay_mask(model) -> list[bool]:
    """False for batch-norm scale/shift, True for everything else."""
    exempt = set()
    for _, mod in model.named_modules():
        if isinstance(mod, BatchNorm2d):
            exempt.update(id(p) for p in mod._params.values())
    return [id(p) not in exempt for p in model.parameters()]


@dataclass
class RunLog:
    records: list[dict] = field(default_factory=list)
    path: Path | None = None

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")

    @property
    def iterations(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "iter"]

    @property
    def evaluations(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "eval"]

    def final_loss(self, window: int = 1) -> float:
        """Mean total loss over the last ``window`` iterations."""
        its = self.iterations[-window:]
        return float(np.mean([r["loss"] for r in its]))


def build_model(cfg: TrainConfig, model_cfg: TEYOLOFConfig | None = None) -> TEYOLOF:
    model_cfg = copy.deepcopy(model_cfg or TEYOLOFConfig())
    model_cfg.scaling = replace(model_cfg.scaling, phi=cfg.phi)
    model_cfg.activation = cfg.activation
    if cfg.resolution is not None:
        model_cfg.input_resolution = cfg.resolution
    prev = default_dtype()
    set_default_dtype(cfg.dtype)
    try:
        return TEYOLOF(model_cfg, seed=cfg.seed)
    finally:
        set_default_dtype(prev)


def save_checkpoint(path, model) -> None:
    checkpoint.save(path, model.state_dict())


def load_checkpoint(path, model) -> None:
    model.load_state_dict(checkpoint.load(path))


def train(cfg: TrainConfig, train_samples: list[Sample], val_samples: list[Sample] | None = None,
          model_cfg: TEYOLOFConfig | None = None, out_dir=None, loss_cfg: LossConfig | None = None,
          post_cfg: PostprocessConfig | None = None, max_iters: int | None = None, verbose: bool = False):
    """Train a fresh model; returns ``(model, RunLog)``.

    Runs ``epochs * ceil(n / batch_size)`` iterations (or stops at
    ``max_iters``), evaluates on ``val_samples`` (train samples if None) every
    ``eval_every`` epochs, and with ``out_dir`` writes ``log.jsonl``,
    ``model.cfg``, ``best.tylf`` (highest AP50) and ``last.tylf``.
    """
    cfg.validate()
    if not train_samples:
        raise ConfigError("training set is empty")
    model = build_model(cfg, model_cfg)
    resolution = model.cfg.resolution
    train_set = prepare(train_samples, resolution)
    val_set = prepare(val_samples, resolution) if val_samples else train_set
    anchors = model_anchors(model, resolution)
    loss_cfg = loss_cfg or LossConfig()
    aug = AugmentationConfig(seed=cfg.seed) if cfg.augment else None
    params = model.parameters()
    mask = decay_mask(model)
    state = SGDState()
    dtype = params[0].dtype

    out = Path(out_dir) if out_dir is not None else None
    log = RunLog()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        log.path = out / "log.jsonl"
        log.path.write_text("", encoding="utf-8")
        save_config(out / "model.cfg", model.cfg)
        (out / "train.json").write_text(json.dumps(asdict(cfg), indent=2) + "\n", encoding="utf-8")

    ipe = num_batches(len(train_set), cfg.batch_size)
    total = cfg.epochs * ipe if max_iters is None else min(max_iters, cfg.epochs * ipe)
    best_ap50 = -math.inf
    it = 0
    start = time.time()
    model.train()
    for epoch in range(cfg.epochs):
        if it >= total:
            break
        for bi, batch in enumerate(epoch_batches(train_set, cfg.batch_size, cfg.seed, epoch, aug)):
            if it >= total:
                break
            lr = lr_at(it, cfg, ipe)
            output = model(Tensor(batch.images, dtype=dtype))
            loss = detection_loss(output, anchors, batch.targets, model.cfg.num_classes, loss_cfg)
            value = loss.total.item()
            if not math.isfinite(value):
                _dump_bad_batch(out, epoch, it, bi, batch, loss)
                raise TrainingError(f"non-finite loss {value} at iteration {it} (epoch {epoch}, batch {bi}, "
                                    f"image ids {batch.image_ids})")
            model.zero_grad()
            backward(loss.total)
            sgd_step(params, [p.grad for p in params], state, lr, cfg.momentum, cfg.weight_decay, mask)
            log.append({"kind": "iter", "iter": it, "epoch": epoch, "batch": bi, "lr": lr, "loss": value,
                        "cls": loss.cls.item(), "reg": loss.reg.item(), "num_pos": loss.num_positive,
                        "time": round(time.time() - start, 3)})
            if verbose and it % 50 == 0:
                print(f"iter {it:5d}  lr {lr:.6f}  loss {value:.4f}  cls {loss.cls.item():.4f}  "
                      f"reg {loss.reg.item():.4f}", flush=True)
            it += 1
        last_epoch = epoch == cfg.epochs - 1 or it >= total
        if (cfg.eval_every and (epoch + 1) % cfg.eval_every == 0) or last_epoch:
            result, map40, _ = evaluate(model, val_set, cfg.batch_size, post_cfg)
            log.append({"kind": "eval", "epoch": epoch, "iter": it, "result": result.to_dict(), "map40": map40})
            if verbose:
                print(f"epoch {epoch}: AP50 {result.ap50}  mAP@0.4 {map40}", flush=True)
            ap50 = -1.0 if result.ap50 is None else result.ap50
            if out is not None and ap50 > best_ap50:
                save_checkpoint(out / "best.tylf", model)
            best_ap50 = max(best_ap50, ap50)
    if out is not None:
        save_checkpoint(out / "last.tylf", model)
    return model, log


def _dump_bad_batch(out, epoch, it, bi, batch, loss) -> None:
    if out is None:
        return
    info = {"epoch": epoch, "iter": it, "batch": bi, "image_ids": batch.image_ids,
            "loss_cls": loss.cls.item(), "loss_reg": loss.reg.item(), "num_pos": loss.num_positive,
            "targets": [{"boxes": b.tolist(), "labels": lab.tolist()} for b, lab in batch.targets]}
    (out / "nonfinite_batch.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
