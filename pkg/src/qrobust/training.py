"""QCNN training: softmax cross-entropy on (p0, p1), parameter-shift gradients, Adam."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classifier import (
    ClassificationPolicy,
    EncodedSample,
    QcnnArchitecture,
    classify_batch,
    forward_angles,
    forward_batch,
)
from .quantum import apply_gate_array, marginal_probs_array

log = logging.getLogger(__name__)

SHIFT = math.pi / 2
# four-term rule for generators with spectrum {0, 0, +-1/2} (controlled rotations)
_C1 = (math.sqrt(2) + 1) / (4 * math.sqrt(2))
_C2 = (math.sqrt(2) - 1) / (4 * math.sqrt(2))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.adam_epsilon <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("adam_epsilon > 0, epochs >= 0 and batch_size >= 1 required")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def loss(p0: float, p1: float, label: int) -> float:
    """Softmax cross-entropy with (p0, p1) used as the two logits."""
    hi = max(p0, p1)
    lse = hi + math.log(math.exp(p0 - hi) + math.exp(p1 - hi))
    return lse - (p0 if label == 0 else p1)


def batch_loss(p0: np.ndarray, labels: np.ndarray) -> np.ndarray:
    p0 = np.asarray(p0, dtype=float)
    p1 = 1.0 - p0
    z = np.where(np.asarray(labels) == 0, p0, p1)
    return np.logaddexp(p0, p1) - z


def _dloss_dp0(p0: np.ndarray, labels: np.ndarray) -> np.ndarray:
    # p1 = 1 - p0, so dL/dp0 = (s0 - y0) - (s1 - y1) = 2 (s0 - y0)
    s0 = 1.0 / (1.0 + np.exp((1.0 - p0) - p0))
    return 2.0 * (s0 - (np.asarray(labels) == 0))


def p0_jacobian(arch: QcnnArchitecture, theta, amplitudes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (p0, dp0/dtheta) for a batch of inputs.

    Every occurrence of a shared parameter is shifted on its own and the
    contributions are summed.  States before each gate are cached so only the
    suffix of the circuit is replayed for a shift.
    """
    n = arch.n
    angles = arch.gate_angles(theta)
    gates = arch.gates(angles)
    psi = np.asarray(amplitudes, dtype=complex)
    prefix = [psi]
    for g in gates:
        prefix.append(apply_gate_array(prefix[-1], g, n))
    p0 = 1.0 - marginal_probs_array(prefix[-1], arch.measured_qubit, n)

    def shifted(k: int, s: float) -> np.ndarray:
        g = gates[k]
        out = apply_gate_array(prefix[k], type(g)(g.kind, g.target, g.control, g.angle + s), n)
        for later in gates[k + 1:]:
            out = apply_gate_array(out, later, n)
        return 1.0 - marginal_probs_array(out, arch.measured_qubit, n)

    jac = np.zeros(psi.shape[:-1] + (arch.num_params,))
    for k in arch.rotation_gates:
        g = gates[k]
        if g.control is None:
            d = (shifted(k, SHIFT) - shifted(k, -SHIFT)) / 2
        else:
            d = _C1 * (shifted(k, SHIFT) - shifted(k, -SHIFT)) - _C2 * (shifted(k, 3 * SHIFT) - shifted(k, -3 * SHIFT))
        jac[..., arch.template[k].param] += d
    return p0, jac


def gradient(arch: QcnnArchitecture, theta, amplitudes: np.ndarray, labels) -> np.ndarray:
    """Mean loss gradient over a batch."""
    amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=complex))
    labels = np.atleast_1d(np.asarray(labels))
    p0, jac = p0_jacobian(arch, theta, amplitudes)
    return (_dloss_dp0(p0, labels)[:, None] * jac).mean(axis=0)


def adam_step(state: AdamState, grad, config: TrainConfig) -> tuple[np.ndarray, AdamState]:
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient shape {grad.shape} does not match optimizer state {state.m.shape}")
    step = state.step + 1
    m = config.beta1 * state.m + (1 - config.beta1) * grad
    v = config.beta2 * state.v + (1 - config.beta2) * grad**2
    m_hat = m / (1 - config.beta1**step)
    v_hat = v / (1 - config.beta2**step)
    delta = -config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    return delta, AdamState(m, v, step)


@dataclass(frozen=True)
class Evaluation:
    total: int
    correct: int
    wrong: int
    unknown: int
    confusion: dict = field(default_factory=dict)  # (true, predicted) -> count; predicted -1 is Unknown

    @property
    def coverage(self) -> float:
        return (self.total - self.unknown) / self.total

    @property
    def accuracy(self) -> float:
        """Correct over all samples; Unknown counts as an error."""
        return self.correct / self.total

    @property
    def classified_accuracy(self) -> Optional[float]:
        classified = self.correct + self.wrong
        return self.correct / classified if classified else None


def score(predicted, labels) -> Evaluation:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.size == 0:
        raise ValueError("cannot score an empty dataset")
    known = predicted != -1
    correct = int(np.sum(known & (predicted == labels)))
    unknown = int(np.sum(~known))
    confusion: dict = {}
    for t, p in zip(labels.tolist(), predicted.tolist()):
        confusion[(t, p)] = confusion.get((t, p), 0) + 1
    return Evaluation(int(predicted.size), correct, int(predicted.size) - correct - unknown, unknown, confusion)


def _arrays(samples: Sequence[EncodedSample]) -> tuple[np.ndarray, np.ndarray]:
    amps = np.array([s.features for s in samples], dtype=complex)
    labels = np.array([s.label for s in samples])
    return amps, labels


def evaluate(
    arch: QcnnArchitecture, theta, samples: Sequence[EncodedSample], policy: ClassificationPolicy = ClassificationPolicy()
) -> Evaluation:
    amps, labels = _arrays(samples)
    if len(labels) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    return score(classify_batch(forward_batch(arch, theta, amps), policy), labels)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    train_acc: float
    test_acc: Optional[float]


@dataclass
class TrainResult:
    theta: np.ndarray
    history: list[EpochStats]
    initial_loss: float


def init_theta(arch: QcnnArchitecture, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-math.pi, math.pi, size=arch.num_params)


def train(
    arch: QcnnArchitecture,
    samples: Sequence[EncodedSample],
    config: TrainConfig = TrainConfig(),
    test: Optional[Sequence[EncodedSample]] = None,
    theta0=None,
) -> TrainResult:
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    amps, labels = _arrays(samples)
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("training labels must be 0 or 1")
    test_arrays = _arrays(test) if test else None
    rng = np.random.default_rng(config.seed)
    theta = init_theta(arch, rng) if theta0 is None else arch.check_theta(theta0).copy()
    state = AdamState.zeros(arch.num_params)
    angles = arch.gate_angles(theta)
    initial_loss = float(batch_loss(forward_angles(arch, angles, amps), labels).mean())

    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(labels))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            grad = gradient(arch, theta, amps[idx], labels[idx])
            delta, state = adam_step(state, grad, config)
            theta = theta + delta
        p0 = forward_batch(arch, theta, amps)
        ep_loss = float(batch_loss(p0, labels).mean())
        train_acc = score(classify_batch(p0), labels).accuracy
        test_acc = None
        if test_arrays is not None:
            test_acc = score(classify_batch(forward_batch(arch, theta, test_arrays[0])), test_arrays[1]).accuracy
        history.append(EpochStats(epoch, ep_loss, train_acc, test_acc))
        log.info("epoch %d loss=%.6f train_acc=%.4f test_acc=%s", epoch, ep_loss, train_acc, test_acc)
    return TrainResult(theta, history, initial_loss)


def write_history(path, history: Sequence[EpochStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "train_acc", "test_acc"])
        for h in history:
            w.writerow([h.epoch, f"{h.loss:.10g}", f"{h.train_acc:.6g}", "" if h.test_acc is None else f"{h.test_acc:.6g}"])
