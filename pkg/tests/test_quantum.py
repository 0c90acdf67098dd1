import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrobust.quantum import (
    Circuit,
    DensityOperator,
    GateOp,
    PureState,
    QuantumError,
    apply_circuit,
    apply_gate,
    distance,
    fidelity,
    fidelity_pure,
    measure_probs,
    partial_trace,
    purity,
    random_circuit,
    random_density,
    random_pure,
)

SQ = 1 / math.sqrt(2)
ket0 = PureState.basis(1, 0)
ket1 = PureState.basis(1, 1)
plus = PureState(1, [SQ, SQ])
bell = PureState(2, [SQ, 0, 0, SQ])

seeds = st.integers(0, 2**32 - 1)


def full_matrix(gate: GateOp, n: int) -> np.ndarray:
    """Embed a gate by brute force over basis states."""
    d = 2**n
    u = np.zeros((d, d), dtype=complex)
    m = gate.matrix()
    for col in range(d):
        bits = [(col >> (n - 1 - k)) & 1 for k in range(n)]
        if gate.control is not None and bits[gate.control] == 0:
            u[col, col] = 1
            continue
        for out_bit in (0, 1):
            b = list(bits)
            b[gate.target] = out_bit
            row = sum(bit << (n - 1 - k) for k, bit in enumerate(b))
            u[row, col] += m[out_bit, bits[gate.target]]
    return u


class TestGates:
    def test_hadamard_on_zero(self):
        out = apply_gate(ket0, GateOp("H", 0))
        np.testing.assert_allclose(out.amplitudes, [SQ, SQ], atol=1e-15)

    def test_rx_pi_on_zero(self):
        out = apply_gate(ket0, GateOp("RX", 0, angle=math.pi))
        np.testing.assert_allclose(out.amplitudes, [0, -1j], atol=1e-15)

    def test_cnot_truth_table(self):
        out = apply_gate(PureState.basis(2, 0b10), GateOp("CNOT", 1, control=0))
        np.testing.assert_allclose(out.amplitudes, [0, 0, 0, 1])

    def test_qubit_zero_is_most_significant(self):
        out = apply_gate(PureState.basis(3, 0), GateOp("X", 0))
        assert np.argmax(np.abs(out.amplitudes)) == 0b100

    def test_index_out_of_range(self):
        with pytest.raises(QuantumError):
            apply_gate(ket0, GateOp("X", 1))

    def test_missing_angle(self):
        with pytest.raises(QuantumError):
            GateOp("RY", 0)

    def test_control_equals_target(self):
        with pytest.raises(QuantumError):
            GateOp("CRX", 1, control=1, angle=0.3)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_unitarity_and_kernel_matches_embedding(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 4))
        circ = random_circuit(n, 1, rng)
        u = circ.unitary()
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2**n), atol=1e-12)
        np.testing.assert_allclose(u, full_matrix(circ.gates[0], n), atol=1e-14)


class TestCircuitEvolution:
    def test_empty_circuit_is_identity(self, rng):
        rho = random_density(2, rng)
        np.testing.assert_array_equal(apply_circuit(rho, Circuit(2)).matrix, rho.matrix)

    def test_bit_flip(self):
        out = apply_circuit(ket0.density(), Circuit(1, [GateOp("X", 0)]))
        np.testing.assert_allclose(out.matrix, ket1.density().matrix)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(QuantumError):
            apply_circuit(random_density(2, rng), Circuit(3))

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_purity_and_trace_preserved(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        rho = random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        circ = random_circuit(n, 8, rng)
        out = apply_circuit(rho, circ)
        assert abs(np.trace(out.matrix).real - 1) < 1e-9
        direct = np.trace(out.matrix @ out.matrix).real
        assert abs(direct - np.trace(rho.matrix @ rho.matrix).real) < 1e-9
        u = circ.unitary()
        np.testing.assert_allclose(out.matrix, u @ rho.matrix @ u.conj().T, atol=1e-12)


class TestMeasurement:
    def test_basis_state(self):
        assert measure_probs(ket0.density(), 0) == pytest.approx((1, 0))

    def test_equal_superposition(self):
        assert measure_probs(plus.density(), 0) == pytest.approx((0.5, 0.5))

    def test_bell_marginal(self):
        assert measure_probs(bell.density(), 1) == pytest.approx((0.5, 0.5))

    def test_out_of_range(self):
        with pytest.raises(QuantumError):
            measure_probs(bell.density(), 2)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_completeness_and_marginal_consistency(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 5))
        rho = random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        q = int(rng.integers(n))
        p0, p1 = measure_probs(rho, q)
        assert 0 <= p0 <= 1 and 0 <= p1 <= 1
        assert abs(p0 + p1 - 1) < 1e-9
        assert abs(partial_trace(rho, q).matrix[0, 0].real - p0) < 1e-10


class TestPartialTrace:
    def test_product_state(self):
        prod = PureState(2, np.kron(ket0.amplitudes, plus.amplitudes))
        np.testing.assert_allclose(partial_trace(prod.density(), 1).matrix, plus.density().matrix, atol=1e-15)

    @pytest.mark.parametrize("keep", [0, 1])
    def test_bell_marginal_is_maximally_mixed(self, keep):
        np.testing.assert_allclose(partial_trace(bell.density(), keep).matrix, np.eye(2) / 2, atol=1e-15)

    def test_matches_direct_summation(self, rng):
        rho = random_density(3, rng)
        for keep in range(3):
            direct = np.zeros((2, 2), dtype=complex)
            for i in range(8):
                for j in range(8):
                    bi = [(i >> (2 - k)) & 1 for k in range(3)]
                    bj = [(j >> (2 - k)) & 1 for k in range(3)]
                    if all(bi[k] == bj[k] for k in range(3) if k != keep):
                        direct[bi[keep], bj[keep]] += rho.matrix[i, j]
            out = partial_trace(rho, keep)
            np.testing.assert_allclose(out.matrix, direct, atol=1e-14)
            assert abs(np.trace(out.matrix) - 1) < 1e-10


class TestFidelity:
    def test_self_fidelity(self, rng):
        rho = random_density(2, rng)
        assert fidelity(rho, rho) == pytest.approx(1, abs=1e-9)

    def test_orthogonal(self):
        assert fidelity(ket0.density(), ket1.density()) == pytest.approx(0, abs=1e-12)

    def test_plus_vs_zero(self):
        assert fidelity(plus.density(), ket0.density()) == pytest.approx(0.5, abs=1e-12)

    def test_pure_examples(self):
        assert fidelity_pure(ket0, ket0.density()) == pytest.approx(1)
        assert fidelity_pure(ket0, DensityOperator.maximally_mixed(1)) == pytest.approx(0.5)

    def test_non_psd_rejected(self):
        bad = DensityOperator.__new__(DensityOperator)
        object.__setattr__(bad, "n", 1)
        object.__setattr__(bad, "matrix", np.diag([1.1, -0.1]).astype(complex))
        with pytest.raises(QuantumError):
            fidelity(bad, ket0.density())

    def test_dimension_mismatch(self):
        with pytest.raises(QuantumError):
            fidelity_pure(ket0, bell.density())

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_pure_shortcut_matches_general(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        psi = random_pure(n, rng)
        sigma = random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        f = fidelity_pure(psi, sigma)
        assert -1e-9 <= f <= 1 + 1e-9
        assert abs(f - fidelity(psi.density(), sigma)) < 1e-8

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(seeds)
    def test_symmetric(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_density(2, rng), random_density(2, rng, rank=2)
        assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-8


class TestPurityDistance:
    def test_pure(self, rng):
        assert purity(random_pure(3, rng).density()) == pytest.approx(1, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_maximally_mixed(self, n):
        assert purity(DensityOperator.maximally_mixed(n)) == pytest.approx(1 / 2**n)

    def test_diagonal_mixture(self):
        assert purity(DensityOperator(1, np.diag([0.5, 0.5]))) == pytest.approx(0.5)

    def test_distance_examples(self, rng):
        rho = random_density(2, rng)
        assert distance(rho, rho) == pytest.approx(0, abs=1e-9)
        assert distance(ket0.density(), ket1.density()) == pytest.approx(1)
        assert distance(plus.density(), ket0.density()) == pytest.approx(0.5)


class TestTypes:
    def test_unnormalized_state_rejected(self):
        with pytest.raises(QuantumError):
            PureState(1, [1, 1])

    def test_wrong_length_rejected(self):
        with pytest.raises(QuantumError):
            PureState(2, [1, 0])

    def test_density_trace_checked(self):
        with pytest.raises(QuantumError):
            DensityOperator(1, np.eye(2))

    def test_density_must_be_psd(self):
        with pytest.raises(QuantumError):
            DensityOperator(1, np.diag([1.5, -0.5]))
