import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qrobust.bloch import (
    BlochVector,
    NonPhysicalError,
    PauliBasis,
    bloch_to_density,
    density_to_bloch,
    neighborhood_threshold,
    pauli_labels,
    pure_fidelity_bloch,
    purity_from_bloch,
    z_index,
)
from qrobust.quantum import (
    PAULI,
    DensityOperator,
    PureState,
    QuantumError,
    apply_circuit,
    fidelity,
    purity,
    random_circuit,
    random_density,
    random_pure,
)
from qrobust.reference import TABLE_EPS_0

seeds = st.integers(0, 2**32 - 1)
ket0 = PureState.basis(1, 0)


def test_two_qubit_ordering():
    assert pauli_labels(2) == [
        "IX", "IY", "IZ", "XI", "XX", "XY", "XZ", "YI", "YX", "YY", "YZ", "ZI", "ZX", "ZY", "ZZ",
    ]
    assert pauli_labels(1) == ["X", "Y", "Z"]


def test_z_index_of_last_qubit_is_two():
    # the measured (last) qubit's Z coefficient is the third basis element for every n
    for n in range(1, 9):
        assert z_index(n, n - 1) == 2


@pytest.mark.parametrize("n", [1, 2, 3])
def test_basis_traceless_and_orthogonal(n):
    el = PauliBasis(n).elements
    assert len(el) == 4**n - 1
    assert np.all(np.einsum("kii->k", el) == 0)
    gram = np.einsum("aij,bji->ab", el, el)
    np.testing.assert_allclose(gram, (4**n - 2**n) * np.eye(len(el)), atol=1e-9)


def test_basis_size_limit():
    with pytest.raises(QuantumError):
        PauliBasis(5)


class TestConversions:
    def test_ket0(self):
        np.testing.assert_allclose(density_to_bloch(ket0.density()).v, [0, 0, 1], atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_maximally_mixed(self, n):
        v = density_to_bloch(DensityOperator.maximally_mixed(n))
        np.testing.assert_allclose(v.v, 0, atol=1e-15)
        np.testing.assert_allclose(bloch_to_density(BlochVector(n, np.zeros(4**n - 1))).matrix, np.eye(2**n) / 2**n)

    def test_bell_state_against_direct_traces(self):
        s = 1 / math.sqrt(2)
        rho = PureState(2, [s, 0, 0, s]).density()
        v = density_to_bloch(rho)
        assert v.norm == pytest.approx(1, abs=1e-12)
        for j, label in enumerate(pauli_labels(2)):
            a, b = PAULI[label[0]], PAULI[label[1]]
            # tr(rho (a (x) b)) summed entry by entry
            tr = sum(
                rho.matrix[2 * i1 + i2, 2 * j1 + j2] * a[j1, i1] * b[j2, i2]
                for i1 in range(2) for i2 in range(2) for j1 in range(2) for j2 in range(2)
            )
            assert v.v[j] == pytest.approx(tr.real / math.sqrt(3), abs=1e-12)

    def test_pole_to_density(self):
        np.testing.assert_allclose(bloch_to_density(BlochVector(1, [0, 0, 1])).matrix, ket0.density().matrix)

    def test_unit_ball_is_larger_than_state_set(self):
        # a unit vector along ZI has eigenvalues (1 +- sqrt(3)) / 4
        v = np.zeros(15)
        v[pauli_labels(2).index("ZI")] = 1
        with pytest.raises(NonPhysicalError):
            bloch_to_density(BlochVector(2, v))
        v[pauli_labels(2).index("ZI")] = 1 / math.sqrt(3)
        assert bloch_to_density(BlochVector(2, v)).matrix[0, 0].real == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(QuantumError):
            density_to_bloch(ket0.density(), PauliBasis(2))

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        rho = random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        back = bloch_to_density(density_to_bloch(rho))
        np.testing.assert_allclose(back.matrix, rho.matrix, atol=1e-10)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_norm_law(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        rank = int(rng.integers(1, 2**n + 1))
        rho = random_density(n, rng, rank=rank)
        norm = density_to_bloch(rho).norm
        assert norm <= 1 + 1e-9
        assert (abs(norm - 1) < 1e-8) == (abs(purity(rho) - 1) < 1e-8)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds, st.floats(0, 1))
    def test_affine_in_mixtures(self, seed, p):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        a, b = random_density(n, rng), random_pure(n, rng).density()
        mix = DensityOperator(n, p * a.matrix + (1 - p) * b.matrix)
        expect = p * density_to_bloch(a).v + (1 - p) * density_to_bloch(b).v
        np.testing.assert_allclose(density_to_bloch(mix).v, expect, atol=1e-10)

    @settings(max_examples=50, deadline=None, derandomize=True)
    @given(seeds)
    def test_unitaries_act_linearly_and_isometrically(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        circ = random_circuit(n, 6, rng)
        a, b = random_density(n, rng), random_density(n, rng, rank=1)
        va, vb = density_to_bloch(a).v, density_to_bloch(b).v
        ua, ub = density_to_bloch(apply_circuit(a, circ)).v, density_to_bloch(apply_circuit(b, circ)).v
        assert abs(np.linalg.norm(ua) - np.linalg.norm(va)) < 1e-9
        p = float(rng.uniform())
        mix = DensityOperator(n, p * a.matrix + (1 - p) * b.matrix)
        np.testing.assert_allclose(density_to_bloch(apply_circuit(mix, circ)).v, p * ua + (1 - p) * ub, atol=1e-10)
        # inner products are preserved, so the induced map is orthogonal
        assert abs(ua @ ub - va @ vb) < 1e-9


class TestPurityAndFidelity:
    def test_pure_single_qubit(self):
        assert purity_from_bloch(BlochVector(1, [0, 0.6, 0.8])) == pytest.approx(1)

    def test_center_three_qubits(self):
        assert purity_from_bloch(BlochVector(3, np.zeros(63))) == pytest.approx(1 / 8)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_purity_matches_matrix(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        rho = random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        direct = np.trace(rho.matrix @ rho.matrix).real
        assert abs(purity_from_bloch(density_to_bloch(rho)) - direct) < 1e-9

    def test_pole_fidelities(self):
        up, down = BlochVector(1, [0, 0, 1]), BlochVector(1, [0, 0, -1])
        assert pure_fidelity_bloch(up, up) == pytest.approx(1)
        assert pure_fidelity_bloch(up, down) == pytest.approx(0)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds)
    def test_bloch_fidelity_matches_eigendecomposition(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 3))
        a = random_pure(n, rng).density()
        b = random_pure(n, rng).density() if seed % 2 else random_density(n, rng)
        f = pure_fidelity_bloch(density_to_bloch(a), density_to_bloch(b))
        assert abs(f - fidelity(a, b)) < 1e-8


class TestNeighborhood:
    def test_extremes(self):
        assert neighborhood_threshold(0, 1) == pytest.approx(1)
        assert neighborhood_threshold(1, 1) == pytest.approx(-1)

    def test_table_row(self):
        # delta printed in the first row of the epsilon = 0 table maps back to its cosine
        row = TABLE_EPS_0[0]
        assert neighborhood_threshold(row[4], 8) == pytest.approx(row[3], abs=1e-5)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            neighborhood_threshold(1.5, 2)

    @settings(max_examples=100, deadline=None, derandomize=True)
    @given(seeds, st.floats(0, 1))
    def test_distance_equivalence_for_pure_center(self, seed, delta):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 3))
        center = random_pure(n, rng).density()
        other = random_pure(n, rng).density() if seed % 2 else random_density(n, rng)
        dist = 1 - fidelity(center, other)
        dot = density_to_bloch(center).v @ density_to_bloch(other).v
        thr = neighborhood_threshold(delta, n)
        # skip points within rounding of the shell itself
        if abs(dist - delta) > 1e-9:
            assert (dist <= delta) == (dot >= thr)
