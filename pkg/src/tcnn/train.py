"""Optimizers, learning-rate schedules, the epoch loop, and checkpoints.

Everything is deterministic given (seed, config, dataset): shuffles derive
from PCG64 seeded with (seed, epoch), and parameter updates run in a fixed
order. Checkpoints are length-prefixed binary sections behind a "TCNN1"
magic; saving, loading and saving again is byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DomainError, FormatError
from .metrics import MetricsReport, report
from .nn import Model, softmax_cross_entropy
from .tensor import Tensor
from .zoo import ModelConfig, build

CHECKPOINT_MAGIC = b"TCNN1"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    optimizer: str = "adam"          # "adam" or "sgd"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    weight_decay: float = 0.0
    schedule: str = "none"           # "none", "exponential" or "multistep"
    gamma: float = 0.9
    milestones: tuple = ()
    factor: float = 0.1
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in ("none", "exponential", "multistep"):
            raise DomainError(f"unknown schedule {self.schedule!r}")
        if self.lr <= 0:
            raise DomainError("lr must be positive")
        if not 0 < self.gamma <= 1:
            raise DomainError("gamma must lie in (0, 1]")
        if self.batch_size < 1 or self.epochs < 0:
            raise DomainError("batch_size must be >= 1 and epochs >= 0")
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))

    def to_json_dict(self) -> dict:
        return {
            "optimizer": self.optimizer, "lr": self.lr, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps, "momentum": self.momentum,
            "weight_decay": self.weight_decay, "schedule": self.schedule,
            "gamma": self.gamma, "milestones": list(self.milestones),
            "factor": self.factor, "batch_size": self.batch_size,
            "epochs": self.epochs, "seed": self.seed,
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "TrainConfig":
        doc = dict(doc)
        doc["milestones"] = tuple(doc.get("milestones", ()))
        return TrainConfig(**doc)


def exponential_lr(base_lr: float, gamma: float, epoch: int) -> float:
    return base_lr * gamma ** epoch


def multistep_lr(base_lr: float, milestones, factor: float, epoch: int) -> float:
    passed = sum(1 for m in milestones if epoch >= m)
    return base_lr * factor ** passed


def lr_for_epoch(config: TrainConfig, epoch: int) -> float:
    if config.schedule == "exponential":
        return exponential_lr(config.lr, config.gamma, epoch)
    if config.schedule == "multistep":
        return multistep_lr(config.lr, config.milestones, config.factor, epoch)
    return config.lr


class AdamState:
    def __init__(self, params: list[Tensor], beta1: float, beta2: float, eps: float):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params: list[Tensor], grads: list[Tensor], state: AdamState,
              lr: float) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        gd = g.data
        m += (1.0 - state.beta1) * (gd - m)
        v += (1.0 - state.beta2) * (gd * gd - v)
        p.data -= (lr / c1) * m / (np.sqrt(v / c2) + state.eps)


class SGDState:
    def __init__(self, params: list[Tensor], momentum: float, weight_decay: float):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in params]


def sgd_step(params: list[Tensor], grads: list[Tensor], state: SGDState,
             lr: float) -> None:
    for p, g, vel in zip(params, grads, state.velocity):
        gd = g.data + state.weight_decay * p.data
        vel *= state.momentum
        vel += gd
        p.data -= lr * vel


def make_optimizer_state(config: TrainConfig, params: list[Tensor]):
    if config.optimizer == "adam":
        return AdamState(params, config.beta1, config.beta2, config.eps)
    return SGDState(params, config.momentum, config.weight_decay)


def optimizer_step(config: TrainConfig, params, grads, state, lr: float) -> None:
    if isinstance(state, AdamState):
        adam_step(params, grads, state, lr)
    else:
        sgd_step(params, grads, state, lr)


def _epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))
    return rng.permutation(n)


def _flat_grads(model: Model, layer_grads) -> list[Tensor]:
    out = []
    for i, name, tensor in model.parameters():
        grad = layer_grads[i].get(name)
        if grad is None:
            grad = Tensor(np.zeros_like(tensor.data))
        out.append(grad)
    return out


def train_epoch(model: Model, dataset: Dataset, config: TrainConfig, epoch: int,
                state=None) -> float:
    """One pass over the shuffled dataset; returns the mean training loss."""
    n = len(dataset)
    if n < 1:
        raise DomainError("cannot train on an empty dataset")
    params = [t for _, _, t in model.parameters()]
    if state is None:
        state = make_optimizer_state(config, params)
    lr = lr_for_epoch(config, epoch)
    perm = _epoch_permutation(config.seed, epoch, n)

    total_loss = 0.0
    for start in range(0, n, config.batch_size):
        idx = perm[start:start + config.batch_size]
        x = Tensor(dataset.inputs.data[idx])
        y = dataset.labels[idx]
        logits, tape = model.forward(x)
        loss, grad_logits = softmax_cross_entropy(logits, y)
        layer_grads, _ = model.backward(tape, grad_logits)
        optimizer_step(config, params, _flat_grads(model, layer_grads), state, lr)
        total_loss += loss * len(idx)
    return total_loss / n


def evaluate(model: Model, dataset: Dataset, batch_size: int = 256) -> MetricsReport:
    """Forward the test set and compute the metric report from softmax scores."""
    n = len(dataset)
    scores = np.empty((n, model.num_classes), dtype=np.float64)
    for start in range(0, n, batch_size):
        x = Tensor(dataset.inputs.data[start:start + batch_size])
        logits, _ = model.forward(x)
        z = logits.data.astype(np.float64)
        z -= z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        scores[start:start + batch_size] = ez / ez.sum(axis=1, keepdims=True)
    preds = scores.argmax(axis=1)
    return report(scores, preds, dataset.labels, model.num_classes)


def fit(model: Model, train_set: Dataset, test_set: Dataset | None,
        config: TrainConfig, log_path=None, progress=None):
    """Run config.epochs epochs; returns history rows
    (epoch, lr, train_loss, test_acc)."""
    params = [t for _, _, t in model.parameters()]
    state = make_optimizer_state(config, params)
    history = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        if log_fh:
            log_fh.write("epoch,lr,train_loss,test_acc\n")
        for epoch in range(config.epochs):
            loss = train_epoch(model, train_set, config, epoch, state)
            acc = evaluate(model, test_set).accuracy if test_set is not None else float("nan")
            lr = lr_for_epoch(config, epoch)
            history.append({"epoch": epoch, "lr": lr, "train_loss": loss, "test_acc": acc})
            if log_fh:
                log_fh.write(f"{epoch},{lr!r},{loss!r},{acc!r}\n")
                log_fh.flush()
            if progress is not None:
                progress(history[-1])
    finally:
        if log_fh:
            log_fh.close()
    return history, state


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _pack_sections(sections: list[tuple[str, bytes]]) -> bytes:
    blob = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(sections))]
    for name, payload in sections:
        encoded = name.encode("utf-8")
        blob.append(struct.pack("<I", len(encoded)))
        blob.append(encoded)
        blob.append(struct.pack("<Q", len(payload)))
        blob.append(payload)
    return b"".join(blob)


def _unpack_sections(raw: bytes, path) -> dict[str, bytes]:
    if raw[:5] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", raw, 5)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    offset = 13
    sections = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        name = raw[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (payload_len,) = struct.unpack_from("<Q", raw, offset)
        offset += 8
        sections[name] = raw[offset:offset + payload_len]
        offset += payload_len
    if offset != len(raw):
        raise FormatError(f"{path}: trailing bytes after last section")
    return sections


def _canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_checkpoint(path, model: Model, model_config: ModelConfig,
                    train_config: TrainConfig, state, epoch: int) -> None:
    params = model.parameters()
    meta = {
        "epoch": epoch,
        "model_config": json.loads(model_config.to_json()),
        "train_config": train_config.to_json_dict(),
        "params": [{"layer": i, "name": name, "shape": list(t.shape)}
                   for i, name, t in params],
        "rng": {"seed": train_config.seed, "next_epoch": epoch},
    }
    sections = []
    if isinstance(state, AdamState):
        meta["optimizer_state"] = {"kind": "adam", "t": state.t}
        sections.append(("opt_m", b"".join(m.tobytes() for m in state.m)))
        sections.append(("opt_v", b"".join(v.tobytes() for v in state.v)))
    elif isinstance(state, SGDState):
        meta["optimizer_state"] = {"kind": "sgd"}
        sections.append(("opt_vel", b"".join(v.tobytes() for v in state.velocity)))
    else:
        meta["optimizer_state"] = {"kind": "none"}
    sections.insert(0, ("meta", _canonical_json(meta)))
    sections.insert(1, ("params", b"".join(t.data.tobytes() for _, _, t in params)))
    with open(path, "wb") as fh:
        fh.write(_pack_sections(sections))


def _split_arrays(blob: bytes, shapes: list[tuple[int, ...]]) -> list[np.ndarray]:
    arrays = []
    offset = 0
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(blob, dtype=np.float32, count=count,
                                    offset=offset).reshape(shape).copy())
        offset += count * 4
    if offset != len(blob):
        raise FormatError("parameter payload length mismatch")
    return arrays


def load_checkpoint(path):
    """Returns (model with restored params, model_config, train_config,
    optimizer state, epoch)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    sections = _unpack_sections(raw, path)
    meta = json.loads(sections["meta"].decode("utf-8"))
    model_config = ModelConfig.from_json(json.dumps(meta["model_config"]))
    train_config = TrainConfig.from_json_dict(meta["train_config"])
    model = build(model_config)

    params = model.parameters()
    recorded = [(p["layer"], p["name"], tuple(p["shape"])) for p in meta["params"]]
    actual = [(i, name, t.shape) for i, name, t in params]
    if recorded != actual:
        raise FormatError(f"{path}: checkpoint parameters do not match the model")
    arrays = _split_arrays(sections["params"], [shape for _, _, shape in recorded])
    for (_, _, tensor), arr in zip(params, arrays):
        tensor.data[...] = arr

    opt_meta = meta["optimizer_state"]
    tensors = [t for _, _, t in params]
    state = None
    if opt_meta["kind"] == "adam":
        state = AdamState(tensors, train_config.beta1, train_config.beta2, train_config.eps)
        state.t = opt_meta["t"]
        shapes = [t.shape for t in tensors]
        state.m = _split_arrays(sections["opt_m"], shapes)
        state.v = _split_arrays(sections["opt_v"], shapes)
    elif opt_meta["kind"] == "sgd":
        state = SGDState(tensors, train_config.momentum, train_config.weight_decay)
        state.velocity = _split_arrays(sections["opt_vel"], [t.shape for t in tensors])
    return model, model_config, train_config, state, meta["epoch"]
