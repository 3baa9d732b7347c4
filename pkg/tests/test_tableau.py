import numpy as np
import pytest
from scipy.stats import chisquare

from crosstalksim import tableau as tb


def embed_unitary(mat, qubits, n):
    """Kron-free embedding used as an independent dense oracle."""
    dim = 2**n
    out = np.zeros((dim, dim), complex)
    k = len(qubits)
    for col in range(dim):
        loc = sum(((col >> q) & 1) << j for j, q in enumerate(qubits))
        rest = col
        for q in qubits:
            rest &= ~(1 << q)
        for row_loc in range(2**k):
            amp = mat[row_loc, loc]
            if amp:
                row = rest
                for j, q in enumerate(qubits):
                    row |= ((row_loc >> j) & 1) << q
                out[row, col] += amp
    return out


def unitary_of_gates(gates, n):
    out = np.eye(2**n, dtype=complex)
    for kind, qubits in gates:
        out = embed_unitary(tb._GATE_MATS[kind], qubits, n) @ out
    return out


class TestPauliTerm:
    def test_y_is_ixz(self):
        y = tb.PauliTerm.single(1, "Y", 0)
        assert np.allclose(y.to_matrix(), np.array([[0, -1j], [1j, 0]]))

    def test_multiplication_matches_matrices(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            a = tb.PauliTerm(
                tuple(rng.integers(0, 2, n)), tuple(rng.integers(0, 2, n)), int(rng.integers(4))
            )
            b = tb.PauliTerm(
                tuple(rng.integers(0, 2, n)), tuple(rng.integers(0, 2, n)), int(rng.integers(4))
            )
            assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)


class TestGroupSizes:
    def test_single_qubit_group(self):
        assert tb.num_cliffords(1) == 24

    def test_two_qubit_group(self):
        assert tb.num_cliffords(2) == 11520

    def test_max_three_cx(self):
        words = tb._word_table(2)
        assert max(sum(1 for k, _ in w if k == "CX") for w in words.values()) == 3

    def test_average_cx_per_clifford(self):
        assert tb.average_cx_per_clifford(2) == pytest.approx(1.5)


class TestComposeInverse:
    def test_h_self_inverse(self):
        h = tb.gate_tableau(1, "H", (0,))
        assert h.inverse() == h
        assert h.then(h).is_identity()

    def test_s_inverse_is_sdg(self):
        s = tb.gate_tableau(1, "S", (0,))
        assert s.inverse() == tb.gate_tableau(1, "SDG", (0,))

    def test_rz_clifford_angles(self):
        assert tb.gate_tableau(1, "RZ", (0,), theta=np.pi / 2) == tb.gate_tableau(1, "S", (0,))
        with pytest.raises(ValueError, match="Clifford"):
            tb.gate_tableau(1, "RZ", (0,), theta=0.3)

    @pytest.mark.parametrize("n", [1, 2])
    def test_random_sequence_inverse_closes(self, n):
        rng = np.random.default_rng(5)
        for _ in range(200):
            seq = [tb.random_clifford(n, rng) for _ in range(int(rng.integers(1, 21)))]
            inv = tb.clifford_inverse(seq)
            assert tb.sequence_product(seq + [inv]).is_identity()

    def test_twenty_element_single_qubit_sequence(self):
        rng = np.random.default_rng(11)
        seq = [tb.random_clifford(1, rng) for _ in range(20)]
        inv = tb.clifford_inverse(seq)
        assert tb.sequence_product(seq + [inv]).is_identity()

    def test_symplectic_condition_preserved(self):
        rng = np.random.default_rng(7)
        lam = np.zeros((4, 4), dtype=np.uint8)
        lam[:2, 2:] = np.eye(2, dtype=np.uint8)
        lam[2:, :2] = np.eye(2, dtype=np.uint8)
        for _ in range(100):
            a = tb.random_clifford(2, rng)
            b = tb.random_clifford(2, rng)
            s = a.then(b).symplectic()
            assert ((s @ lam @ s.T) % 2 == lam).all()


class TestDecompose:
    @pytest.mark.parametrize("n", [1, 2])
    def test_roundtrip_tableau(self, n):
        rng = np.random.default_rng(3)
        for _ in range(300):
            t = tb.random_clifford(n, rng)
            rebuilt = tb.CliffordTableau.identity(n)
            for kind, qubits in tb.decompose(t):
                rebuilt = rebuilt.then(tb.gate_tableau(n, kind, qubits))
            assert rebuilt == t

    def test_dense_conjugation_matches(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            t = tb.random_clifford(2, rng)
            u = unitary_of_gates(tb.decompose(t), 2)
            for i, row in enumerate(t.rows):
                gen = tb.PauliTerm.single(2, "X" if i < 2 else "Z", i % 2)
                assert np.allclose(
                    u @ gen.to_matrix() @ u.conj().T, row.to_matrix(), atol=1e-9
                )


class TestSampling:
    def test_single_qubit_uniformity_chi_square(self):
        rng = np.random.default_rng(42)
        draws = 100_000
        counts = {}
        for _ in range(draws):
            key = tb.random_clifford(1, rng).key()
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 24
        stat, pvalue = chisquare(list(counts.values()))
        assert pvalue > 1e-4

    def test_two_qubit_closure(self):
        rng = np.random.default_rng(9)
        lam = np.zeros((4, 4), dtype=np.uint8)
        lam[:2, 2:] = np.eye(2, dtype=np.uint8)
        lam[2:, :2] = np.eye(2, dtype=np.uint8)
        for _ in range(50):
            prod = tb.random_clifford(2, rng).then(tb.random_clifford(2, rng))
            s = prod.symplectic()
            assert ((s @ lam @ s.T) % 2 == lam).all()

    def test_seeded_determinism(self):
        a = tb.random_clifford(1, np.random.default_rng(123))
        b = tb.random_clifford(1, np.random.default_rng(123))
        assert a == b

    def test_sampling_needs_small_n(self):
        with pytest.raises(ValueError):
            tb.random_clifford(3, np.random.default_rng(0))
