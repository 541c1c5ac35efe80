"""Optimization loop: AdamW, learning-rate schedules, periodic dev
evaluation and best-UAR checkpointing.

Batches are gradient-accumulation groups of whole utterances (one forward
and backward per utterance), so variable frame counts never meet padding and
an utterance's logits do not depend on its batch neighbours.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tz
from .errors import EmptyDataset, ShapeMismatch, SingleClassTrainSet, StepOutOfRange
from .metrics import Confusion, uar
from .model import model_state_bytes, predicted_label, zero_grads


@dataclass
class TrainConfig:
    total_steps: int = 10000
    eval_every: int = 200
    batch_size: int = 8
    base_lr: float = 4e-4          # feature-head models, constant
    cnn_lr_peak: float = 2e-4      # CNN warm-up peak
    cnn_warmup_steps: int = 1400
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    seed: int = 0
    balanced_sampling: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.total_steps % self.eval_every != 0:
            raise ValueError("eval_every must divide total_steps")


def lr_at(step: int, cfg: TrainConfig, family: str) -> float:
    """Head: constant base_lr. CNN: linear warm-up to the peak, then linear
    decay to zero at total_steps."""
    if not 0 <= step <= cfg.total_steps:
        raise StepOutOfRange(f"step {step} outside [0, {cfg.total_steps}]")
    if family == "head":
        return cfg.base_lr
    if family == "cnn":
        if step <= cfg.cnn_warmup_steps:
            return cfg.cnn_lr_peak * step / cfg.cnn_warmup_steps
        return cfg.cnn_lr_peak * (cfg.total_steps - step) / (cfg.total_steps - cfg.cnn_warmup_steps)
    raise ValueError(f"unknown model family {family!r}")


@dataclass
class OptimState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01


def init_optim_state(params: list[np.ndarray], cfg: TrainConfig) -> OptimState:
    return OptimState(
        m=[np.zeros_like(p, dtype=np.float64) for p in params],
        v=[np.zeros_like(p, dtype=np.float64) for p in params],
        betas=cfg.betas,
        eps=cfg.eps,
        weight_decay=cfg.weight_decay,
    )


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray],
               state: OptimState, lr: float) -> None:
    """One decoupled-weight-decay Adam update, in place.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
    with bias-corrected moments. Moments are kept at float64.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must align")
    b1, b2 = state.betas
    state.t += 1
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatch(f"parameter {p.shape} vs gradient {g.shape}")
        g64 = g.astype(np.float64)
        m *= b1
        m += (1.0 - b1) * g64
        v *= b2
        v += (1.0 - b2) * g64 * g64
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps) + state.weight_decay * p
        p -= (lr * update).astype(p.dtype)


@dataclass
class HistoryPoint:
    step: int
    loss: float
    dev_uar: float


@dataclass
class TrainResult:
    history: list[HistoryPoint]
    best_step: int
    best_uar: float
    best_state: bytes
    first_batch_loss: float


def _batch_order(n_items: int, labels: list[int], cfg: TrainConfig):
    """Yield index arrays, one batch at a time, forever.

    Plain mode reshuffles every pass; balanced mode draws each batch with
    inverse class-frequency weights.
    """
    if cfg.balanced_sampling:
        counts = np.bincount(labels, minlength=2)
        weights = np.array([1.0 / (2.0 * counts[l]) for l in labels])
        weights /= weights.sum()
        step = 0
        while True:
            rng = np.random.default_rng([cfg.seed, 1, step])
            yield rng.choice(n_items, size=cfg.batch_size, replace=True, p=weights)
            step += 1
    else:
        pass_index = 0
        while True:
            order = np.random.default_rng([cfg.seed, pass_index]).permutation(n_items)
            for i in range(0, n_items, cfg.batch_size):
                yield order[i : i + cfg.batch_size]
            pass_index += 1


def evaluate(model, items) -> tuple[float, Confusion]:
    """Deterministic eval-mode UAR over (features, label) pairs."""
    if not items:
        raise EmptyDataset("nothing to evaluate")
    y_true, y_pred = [], []
    for feats, label in items:
        logits, _ = model.forward(feats, training=False)
        y_true.append(label)
        y_pred.append(predicted_label(logits.data))
    confusion = Confusion.from_pairs(y_true, y_pred)
    return uar(confusion), confusion


def train(model, train_items, dev_items, cfg: TrainConfig,
          ckpt_extra: dict | None = None) -> TrainResult:
    """Run the full schedule; keep the checkpoint with the best dev UAR
    (earliest step wins ties). ckpt_extra is merged into the checkpoint
    descriptor (e.g. the feature tag)."""
    if not train_items:
        raise EmptyDataset("empty train set")
    labels = [label for _, label in train_items]
    if len(set(labels)) < 2:
        raise SingleClassTrainSet("training needs both classes")

    named_params = model.parameters()
    param_arrays = [t.data for _, t in named_params]
    state = init_optim_state(param_arrays, cfg)
    dropout_rng = np.random.default_rng([cfg.seed, 0xD0])
    batch_iter = _batch_order(len(train_items), labels, cfg)

    history: list[HistoryPoint] = []
    window: list[float] = []
    best_step, best_uar, best_state = -1, -np.inf, b""
    first_batch_loss = None

    for step in range(1, cfg.total_steps + 1):
        batch = next(batch_iter)
        zero_grads(model)
        batch_loss = 0.0
        for i in batch:
            feats, label = train_items[int(i)]
            logits, _ = model.forward(feats, training=True, rng=dropout_rng)
            loss = tz.cross_entropy(logits, label)
            tz.backward(loss)
            batch_loss += float(loss.data)
        batch_loss /= len(batch)
        if first_batch_loss is None:
            first_batch_loss = batch_loss
        grads = []
        for _, t in named_params:
            g = t.grad if t.grad is not None else np.zeros_like(t.data)
            grads.append(g / len(batch))
        adamw_step(param_arrays, grads, state, lr_at(step, cfg, model.family))
        window.append(batch_loss)

        if step % cfg.eval_every == 0:
            dev_uar, _ = evaluate(model, dev_items)
            history.append(HistoryPoint(step, float(np.mean(window)), dev_uar))
            window = []
            if dev_uar > best_uar:
                best_step, best_uar = step, dev_uar
                best_state = model_state_bytes(model, extra={**(ckpt_extra or {}), "step": step})

    return TrainResult(history, best_step, best_uar, best_state, first_batch_loss)


def write_history_csv(history: list[HistoryPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "dev_uar"])
        for h in history:
            writer.writerow([h.step, repr(h.loss), repr(h.dev_uar)])
