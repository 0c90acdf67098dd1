"""QCNN binary classifier: amplitude encoding, ansatz template, forward pass, policy.

The ansatz is stored as a template of gates whose angles index into a shared
parameter vector.  Convolution layers share their two angles across every
adjacent pair of active qubits; pooling layers share their two angles across
every pooled pair.  Pooling keeps the measurement-controlled gate coherent
(deferred measurement) and never touches the pooled-away qubit again.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .quantum import (
    Circuit,
    DensityOperator,
    GateOp,
    PureState,
    QuantumError,
    apply_gates_array,
    evolve_density_array,
    marginal_probs_array,
    measure_probs,
)

MODEL_FORMAT = "qrobust-qcnn"
MODEL_VERSION = 1
PROB_TOL = 1e-6


class Label(enum.Enum):
    ZERO = 0
    ONE = 1
    UNKNOWN = -1

    def __str__(self) -> str:
        return "unknown" if self is Label.UNKNOWN else str(self.value)


class ConvBlock(str, enum.Enum):
    """Two-qubit convolution block, applied to (q_i, q_j)."""

    RY_CNOT = "ry_cnot"  # RY(a) q_i, RY(b) q_j, CNOT q_i -> q_j


@dataclass(frozen=True)
class ClassificationPolicy:
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class EncodedSample:
    features: np.ndarray
    label: int

    def __post_init__(self):
        f = np.array(self.features, dtype=float)
        if abs(np.linalg.norm(f) - 1) > 1e-9:
            raise ValueError("encoded features must have unit norm")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)


@dataclass(frozen=True)
class TemplateGate:
    kind: str
    target: int
    control: Optional[int] = None
    param: Optional[int] = None  # index into theta for rotation kinds


@dataclass(frozen=True)
class Stage:
    active: tuple[int, ...]
    conv_pairs: tuple[tuple[int, int], ...]
    pool_pairs: tuple[tuple[int, int], ...]  # (pooled-away control, kept target)


@dataclass(frozen=True)
class QcnnArchitecture:
    n: int
    stages: tuple[Stage, ...]
    block: ConvBlock
    measured_qubit: int
    template: tuple[TemplateGate, ...]
    num_params: int

    @property
    def rotation_gates(self) -> list[int]:
        return [i for i, g in enumerate(self.template) if g.param is not None]

    def gate_angles(self, theta) -> np.ndarray:
        """Per-template-gate angles (NaN for fixed gates)."""
        theta = self.check_theta(theta)
        out = np.full(len(self.template), np.nan)
        for i, g in enumerate(self.template):
            if g.param is not None:
                out[i] = theta[g.param]
        return out

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValueError(f"expected {self.num_params} parameters, got shape {theta.shape}")
        return theta

    def gates(self, angles: np.ndarray) -> list[GateOp]:
        return [
            GateOp(g.kind, g.target, g.control, None if g.param is None else float(angles[i]))
            for i, g in enumerate(self.template)
        ]

    def circuit(self, theta) -> Circuit:
        return Circuit(self.n, self.gates(self.gate_angles(theta)))


def _conv_pairs(active: Sequence[int]) -> list[tuple[int, int]]:
    m = len(active)
    pairs = [(active[i], active[i + 1]) for i in range(m - 1)]
    if m >= 3:
        pairs.append((active[-1], active[0]))
    return pairs


def build_qcnn(n: int, stages: Optional[int] = None, block: ConvBlock = ConvBlock.RY_CNOT) -> QcnnArchitecture:
    if n < 2 or n & (n - 1):
        raise ValueError(f"QCNN needs a power-of-two qubit count >= 2, got {n}")
    depth = n.bit_length() - 1
    if stages is None:
        stages = depth
    if stages != depth:
        raise ValueError(f"{n} qubits reduce to one after {depth} stages, not {stages}")
    block = ConvBlock(block)

    template: list[TemplateGate] = []
    specs: list[Stage] = []
    active = list(range(n))
    p = 0
    for _ in range(stages):
        conv = _conv_pairs(active)
        a, b = p, p + 1
        for qi, qj in conv:
            template += [
                TemplateGate("RY", qi, param=a),
                TemplateGate("RY", qj, param=b),
                TemplateGate("CNOT", qj, control=qi),
            ]
        pool = [(active[i], active[i + 1]) for i in range(0, len(active), 2)]
        rz, rx = p + 2, p + 3
        for ctrl, tgt in pool:
            template += [
                TemplateGate("CRZ", tgt, control=ctrl, param=rz),
                TemplateGate("CRX", tgt, control=ctrl, param=rx),
            ]
        specs.append(Stage(tuple(active), tuple(conv), tuple(pool)))
        active = [t for _, t in pool]
        p += 4

    return QcnnArchitecture(n, tuple(specs), block, active[0], tuple(template), p)


def amplitude_encode(features) -> PureState:
    f = np.asarray(features, dtype=float).ravel()
    n = f.size.bit_length() - 1
    if f.size != 2**n or n < 1:
        raise ValueError(f"feature length {f.size} is not a power of two >= 2")
    norm = np.linalg.norm(f)
    if norm == 0:
        raise ValueError("cannot amplitude-encode an all-zero vector")
    return PureState(n, f / norm)


def forward_angles(arch: QcnnArchitecture, angles: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """p0 for each amplitude vector in ``amplitudes`` (shape (..., 2**n))."""
    psi = apply_gates_array(amplitudes, arch.gates(angles), arch.n)
    return 1.0 - marginal_probs_array(psi, arch.measured_qubit, arch.n)


def forward_batch(arch: QcnnArchitecture, theta, amplitudes: np.ndarray) -> np.ndarray:
    return forward_angles(arch, arch.gate_angles(theta), np.asarray(amplitudes, dtype=complex))


def forward(arch: QcnnArchitecture, theta, state: PureState) -> tuple[float, float]:
    if state.n != arch.n:
        raise QuantumError(f"classifier acts on {arch.n} qubits, state has {state.n}")
    p0 = float(forward_batch(arch, theta, state.amplitudes))
    return p0, 1.0 - p0


def forward_density(arch: QcnnArchitecture, theta, rho: DensityOperator) -> tuple[float, float]:
    """Same coherent circuit as :func:`forward`, applied to a density operator."""
    out = evolve_density_array(rho.matrix, arch.circuit(theta).gates, arch.n)
    return measure_probs(DensityOperator(arch.n, out), arch.measured_qubit)


def _embed(u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**qubit), u), np.eye(2 ** (n - qubit - 1)))


def forward_measured(arch: QcnnArchitecture, theta, rho: DensityOperator) -> tuple[float, float]:
    """Reference forward pass with explicit mid-circuit measurement.

    Each pooled qubit is measured projectively the first time it controls a
    gate; the branch ensemble is tracked as unnormalized density matrices and
    the controlled gate fires only in branches whose outcome was 1.  Every gate
    is applied as an explicit full-space matrix.
    """
    n = arch.n
    proj = [np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)]
    branches: list[tuple[dict[int, int], np.ndarray]] = [({}, np.array(rho.matrix))]
    for gate in arch.circuit(theta).gates:
        c = gate.control
        if gate.kind == "CNOT" or c is None:
            if c is None:
                u = _embed(gate.matrix(), gate.target, n)
            else:
                u = _embed(proj[0], c, n) + _embed(proj[1], c, n) @ _embed(gate.matrix(), gate.target, n)
            branches = [(o, u @ r @ u.conj().T) for o, r in branches]
            continue
        if c not in branches[0][0]:
            split = []
            for o, r in branches:
                for k in (0, 1):
                    pk = _embed(proj[k], c, n)
                    split.append(({**o, c: k}, pk @ r @ pk))
            branches = split
        u = _embed(gate.matrix(), gate.target, n)
        branches = [(o, u @ r @ u.conj().T if o[c] else r) for o, r in branches]
    total = sum(r for _, r in branches)
    return measure_probs(DensityOperator(n, (total + total.conj().T) / 2), arch.measured_qubit)


def classify(p0: float, p1: float, policy: ClassificationPolicy = ClassificationPolicy()) -> Label:
    if not (-PROB_TOL <= p0 <= 1 + PROB_TOL and -PROB_TOL <= p1 <= 1 + PROB_TOL):
        raise ValueError(f"probabilities out of range: ({p0}, {p1})")
    if abs(p0 + p1 - 1) > PROB_TOL:
        raise ValueError(f"probabilities do not sum to 1: ({p0}, {p1})")
    eps = policy.epsilon
    if p0 > p1 + eps:
        return Label.ZERO
    if p1 > p0 + eps:
        return Label.ONE
    return Label.UNKNOWN


def classify_batch(p0: np.ndarray, policy: ClassificationPolicy = ClassificationPolicy()) -> np.ndarray:
    """Vectorized policy on p0 values; returns 0, 1 or -1 (Unknown)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = 1.0 - p0
    eps = policy.epsilon
    return np.where(p0 > p1 + eps, 0, np.where(p1 > p0 + eps, 1, -1))


def shot_estimate(
    arch: QcnnArchitecture, theta, state: PureState, shots: int, seed: int
) -> tuple[float, float]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p0, _ = forward(arch, theta, state)
    rng = np.random.default_rng(seed)
    zeros = int(rng.binomial(shots, min(max(p0, 0.0), 1.0)))
    return zeros / shots, (shots - zeros) / shots


def save_model(path, arch: QcnnArchitecture, theta) -> None:
    theta = arch.check_theta(theta)
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "n": arch.n,
        "stages": len(arch.stages),
        "block": arch.block.value,
        "measured_qubit": arch.measured_qubit,
        # repr-based float formatting round-trips every double exactly
        "theta": [float(t) for t in theta],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path) -> tuple[QcnnArchitecture, np.ndarray]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a model file ({exc})") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unknown model format {doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')!r}")
    arch = build_qcnn(int(doc["n"]), int(doc["stages"]), ConvBlock(doc["block"]))
    if int(doc["measured_qubit"]) != arch.measured_qubit:
        raise ValueError(f"{path}: measured_qubit {doc['measured_qubit']} does not match the architecture")
    return arch, arch.check_theta(doc["theta"])
