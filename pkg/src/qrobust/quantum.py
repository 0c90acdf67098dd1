"""Dense state-vector and density-matrix simulation for small qubit registers.

Qubit 0 is the most significant bit of a basis index, so ``|q0 q1 ... q_{n-1}>``
maps to ``sum_k q_k 2**(n-1-k)``.  Rotations follow ``R_P(t) = exp(-i t P / 2)``.

Gate kernels act on arrays of shape ``(..., 2**n)`` so the same code evolves a
single amplitude vector, a batch of them, or the columns of a density matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin
from typing import Optional, Sequence

import numpy as np

TOL = 1e-9
PSD_TOL = 1e-6

SINGLE_KINDS = ("H", "X", "Y", "Z", "RX", "RY", "RZ")
CONTROLLED_KINDS = ("CNOT", "CRX", "CRZ")
ROTATION_KINDS = ("RX", "RY", "RZ", "CRX", "CRZ")
GATE_KINDS = SINGLE_KINDS + CONTROLLED_KINDS

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class QuantumError(ValueError):
    """Invalid state, gate or dimension."""


def rotation(axis: str, theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    if axis == "X":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if axis == "Y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "Z":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise QuantumError(f"unknown rotation axis {axis!r}")


@dataclass(frozen=True)
class GateOp:
    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise QuantumError(f"unknown gate kind {self.kind!r}")
        if self.kind in CONTROLLED_KINDS:
            if self.control is None:
                raise QuantumError(f"{self.kind} needs a control qubit")
            if self.control == self.target:
                raise QuantumError("control and target must differ")
        elif self.control is not None:
            raise QuantumError(f"{self.kind} takes no control qubit")
        if self.kind in ROTATION_KINDS and self.angle is None:
            raise QuantumError(f"{self.kind} requires an angle")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target,) if self.control is None else (self.control, self.target)

    def matrix(self) -> np.ndarray:
        """2x2 matrix applied to the target (conditioned on the control if any)."""
        k = self.kind
        if k == "H":
            return _H
        if k in ("X", "Y", "Z"):
            return PAULI[k]
        if k == "CNOT":
            return PAULI["X"]
        return rotation(k[-1], self.angle)


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[GateOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            _check_indices(g, self.n)

    def unitary(self) -> np.ndarray:
        u = np.eye(2**self.n, dtype=complex)
        for g in self.gates:
            u = apply_gate_array(u.T, g, self.n).T
        return u


@dataclass(frozen=True)
class PureState:
    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if self.n < 1 or amp.shape != (2**self.n,):
            raise QuantumError(f"expected {2**self.n} amplitudes, got shape {amp.shape}")
        norm = np.linalg.norm(amp)
        if abs(norm - 1) > TOL:
            raise QuantumError(f"state is not normalized (norm={norm})")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def basis(cls, n: int, index: int = 0) -> "PureState":
        amp = np.zeros(2**n, dtype=complex)
        amp[index] = 1
        return cls(n, amp)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.n, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityOperator:
    n: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = 2**self.n
        if self.n < 1 or m.shape != (d, d):
            raise QuantumError(f"expected a {d}x{d} matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > TOL:
            raise QuantumError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TOL:
            raise QuantumError(f"density matrix trace is {np.trace(m).real}, not 1")
        if np.linalg.eigvalsh(m).min() < -TOL:
            raise QuantumError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityOperator":
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)


def _check_indices(gate: GateOp, n: int) -> None:
    for q in gate.qubits:
        if not 0 <= q < n:
            raise QuantumError(f"qubit index {q} out of range for {n} qubits")




def apply_gate_array(psi: np.ndarray, gate: GateOp, n: int) -> np.ndarray:
    """Return ``U psi`` for amplitudes stored along the last axis of ``psi``."""
    _check_indices(gate, n)
    lead = psi.shape[:-1]
    out = np.array(psi, dtype=complex).reshape(lead + (2,) * n)
    off = len(lead)
    u = gate.matrix()

    sel0 = [slice(None)] * out.ndim
    if gate.control is not None:
        sel0[off + gate.control] = 1
    sel1 = list(sel0)
    sel0[off + gate.target] = 0
    sel1[off + gate.target] = 1
    sel0, sel1 = tuple(sel0), tuple(sel1)

    a0 = out[sel0].copy()
    a1 = out[sel1]
    out[sel0] = u[0, 0] * a0 + u[0, 1] * a1
    out[sel1] = u[1, 0] * a0 + u[1, 1] * a1
    return out.reshape(psi.shape)


def apply_gates_array(psi: np.ndarray, gates: Sequence[GateOp], n: int) -> np.ndarray:
    for g in gates:
        psi = apply_gate_array(psi, g, n)
    return psi


def evolve_density_array(rho: np.ndarray, gates: Sequence[GateOp], n: int) -> np.ndarray:
    """``U rho U^dagger`` without materializing U."""
    a = apply_gates_array(rho.T, gates, n).T  # U rho
    # (U a^dagger)^T comes back from the kernel; its conjugate is a U^dagger
    return apply_gates_array(a.conj(), gates, n).conj()


def apply_gate(state: PureState, gate: GateOp) -> PureState:
    return PureState(state.n, apply_gate_array(state.amplitudes, gate, state.n))


def apply_circuit(rho: DensityOperator, circuit: Circuit) -> DensityOperator:
    if rho.n != circuit.n:
        raise QuantumError(f"circuit acts on {circuit.n} qubits, state has {rho.n}")
    return DensityOperator(rho.n, evolve_density_array(rho.matrix, circuit.gates, rho.n))


def marginal_probs_array(psi: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Probability of outcome 1 on ``qubit`` for each amplitude vector in ``psi``."""
    lead = psi.shape[:-1]
    t = np.abs(psi.reshape(lead + (2**qubit, 2, 2 ** (n - qubit - 1)))) ** 2
    return t[..., 1, :].sum(axis=(-1, -2))


def _diag_probs(rho: np.ndarray, qubit: int, n: int) -> tuple[float, float]:
    diag = np.real(np.diagonal(rho)).reshape(2**qubit, 2, 2 ** (n - qubit - 1))
    p = diag.sum(axis=(0, 2))
    return float(p[0]), float(p[1])


def measure_probs(rho: DensityOperator, qubit: int) -> tuple[float, float]:
    if not 0 <= qubit < rho.n:
        raise QuantumError(f"qubit index {qubit} out of range for {rho.n} qubits")
    return _diag_probs(rho.matrix, qubit, rho.n)


def partial_trace(rho: DensityOperator, keep: int) -> DensityOperator:
    n = rho.n
    if not 0 <= keep < n:
        raise QuantumError(f"qubit index {keep} out of range for {n} qubits")
    t = rho.matrix.reshape(2**keep, 2, 2 ** (n - keep - 1), 2**keep, 2, 2 ** (n - keep - 1))
    return DensityOperator(1, np.einsum("aibajb->ij", t))


def _rank_clip(w: np.ndarray) -> np.ndarray:
    # eigenvalues below the numerical-rank tolerance are rounding noise; their
    # square roots (~1e-8) would otherwise leak into the fidelity
    cut = max(w.max(), 0.0) * w.size * np.finfo(float).eps
    return np.where(w > cut, w, 0.0)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    if w.min() < -PSD_TOL:
        raise QuantumError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    return (v * np.sqrt(_rank_clip(w))) @ v.conj().T


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Uhlmann fidelity via eigendecomposition; slow but fully general."""
    if rho.n != sigma.n:
        raise QuantumError("fidelity of states with different qubit counts")
    s = _psd_sqrt(rho.matrix)
    inner = s @ sigma.matrix @ s
    inner = (inner + inner.conj().T) / 2
    w = _rank_clip(np.linalg.eigvalsh(inner))
    return float(min(1.0, np.sum(np.sqrt(w)) ** 2))


def fidelity_pure(psi: PureState, sigma: DensityOperator) -> float:
    if psi.n != sigma.n:
        raise QuantumError("fidelity of states with different qubit counts")
    a = psi.amplitudes
    return float(np.real(a.conj() @ sigma.matrix @ a))


def purity(rho: DensityOperator) -> float:
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(rho.matrix) ** 2))


def distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    return 1.0 - fidelity(rho, sigma)


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(n, a / np.linalg.norm(a))


def random_density(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    """Random mixed state from a Ginibre matrix of the given rank (full rank by default)."""
    d = 2**n
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    m = g @ g.conj().T
    return DensityOperator(n, m / np.trace(m).real)


def random_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    gates = []
    for _ in range(depth):
        kind = GATE_KINDS[rng.integers(len(GATE_KINDS))]
        if kind in CONTROLLED_KINDS and n < 2:
            kind = "RY"
        angle = float(rng.uniform(-np.pi, np.pi)) if kind in ROTATION_KINDS else None
        if kind in CONTROLLED_KINDS:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(GateOp(kind, int(t), int(c), angle))
        else:
            gates.append(GateOp(kind, int(rng.integers(n)), None, angle))
    return Circuit(n, gates)
