"""Generalized Bloch vectors in the scaled tensor-Pauli basis.

A state on n qubits is written ``rho = (I + v . sigma) / 2**n`` where each
``sigma_j = sqrt(2**n - 1) * P_j`` and ``P_j`` ranges over the non-identity
Pauli strings.  With this scaling pure states have ``|v| = 1``.

Strings are ordered lexicographically with ``I < X < Y < Z`` and qubit 0 as the
leftmost factor, so for one qubit the order is (X, Y, Z).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quantum import PAULI, DensityOperator, QuantumError

MAX_BASIS_QUBITS = 4
IMAG_TOL = 1e-9
PHYSICAL_TOL = 1e-8


class NonPhysicalError(QuantumError):
    """A Bloch vector that does not describe a positive semidefinite state."""


def pauli_labels(n: int) -> list[str]:
    return ["".join(s) for s in itertools.product("IXYZ", repeat=n)][1:]


def pauli_index(label: str) -> int:
    """Position of a Pauli string in the basis ordering."""
    idx = 0
    for ch in label:
        idx = 4 * idx + "IXYZ".index(ch)
    if idx == 0:
        raise ValueError("the identity string is not a basis element")
    return idx - 1


def z_index(n: int, qubit: int) -> int:
    """Basis position of Z acting on ``qubit`` (identity elsewhere)."""
    return pauli_index("".join("Z" if k == qubit else "I" for k in range(n)))


@lru_cache(maxsize=None)
def _basis_elements(n: int) -> np.ndarray:
    scale = np.sqrt(2**n - 1)
    mats = []
    for label in pauli_labels(n):
        m = np.ones((1, 1), dtype=complex)
        for ch in label:
            m = np.kron(m, PAULI[ch])
        mats.append(scale * m)
    out = np.array(mats)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PauliBasis:
    n: int
    elements: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_BASIS_QUBITS:
            raise QuantumError(
                f"Pauli basis is materialized for 1..{MAX_BASIS_QUBITS} qubits, not {self.n}"
            )
        object.__setattr__(self, "elements", _basis_elements(self.n))

    @property
    def labels(self) -> list[str]:
        return pauli_labels(self.n)

    def __len__(self) -> int:
        return 4**self.n - 1


@dataclass(frozen=True)
class BlochVector:
    n: int
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.shape != (4**self.n - 1,):
            raise QuantumError(f"Bloch vector for {self.n} qubits needs {4**self.n - 1} entries")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.v))


def density_to_bloch(rho: DensityOperator, basis: PauliBasis | None = None) -> BlochVector:
    basis = basis or PauliBasis(rho.n)
    if basis.n != rho.n:
        raise QuantumError(f"basis has {basis.n} qubits, state has {rho.n}")
    # tr(rho sigma_j) for every j at once
    traces = np.einsum("kij,ji->k", basis.elements, rho.matrix)
    if np.max(np.abs(traces.imag)) > IMAG_TOL:
        raise QuantumError("Bloch coefficients have a non-negligible imaginary part")
    return BlochVector(rho.n, traces.real / (2**rho.n - 1))


def bloch_to_density(v: BlochVector, basis: PauliBasis | None = None) -> DensityOperator:
    basis = basis or PauliBasis(v.n)
    if basis.n != v.n:
        raise QuantumError(f"basis has {basis.n} qubits, vector has {v.n}")
    d = 2**v.n
    m = (np.eye(d, dtype=complex) + np.tensordot(v.v, basis.elements, axes=1)) / d
    lowest = np.linalg.eigvalsh(m).min()
    if lowest < -PHYSICAL_TOL:
        raise NonPhysicalError(f"Bloch vector gives eigenvalue {lowest:.3g}")
    if lowest < 0:
        # tiny negative drift is projected away so the operator validates
        w, u = np.linalg.eigh(m)
        m = (u * np.clip(w, 0, None)) @ u.conj().T
        m /= np.trace(m).real
    return DensityOperator(v.n, m)


def purity_from_bloch(v: BlochVector) -> float:
    d = 2**v.n
    return (1 + (d - 1) * float(v.v @ v.v)) / d


def pure_fidelity_bloch(v1: BlochVector, v2: BlochVector) -> float:
    """Fidelity of two states when at least one of them is pure.

    Reduces to ``tr(rho sigma)``, which is affine in the Bloch inner product.
    """
    if v1.n != v2.n:
        raise QuantumError("Bloch vectors of different qubit counts")
    d = 2**v1.n
    return (1 + (d - 1) * float(v1.v @ v2.v)) / d


def neighborhood_threshold(delta: float, n: int) -> float:
    """Smallest Bloch inner product with a pure center that keeps distance <= delta."""
    if not 0 <= delta <= 1:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    d = 2**n
    return (d * (1 - delta) - 1) / (d - 1)
