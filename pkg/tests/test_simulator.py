import numpy as np
import pytest

from crosstalksim import tableau as tb
from crosstalksim.circuit import Circuit, Gate
from crosstalksim.noise import depolarizing, thermal_relaxation
from crosstalksim.simulator import (
    Counts,
    DensityMatrix,
    apply_channel,
    apply_gate,
    apply_readout_to_distribution,
    apply_unitary,
    exact_distribution,
    gate_matrix,
    kraus_sum,
    sample_counts,
)


def random_density(n, rng):
    dim = 2**n
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return DensityMatrix(n, rho / np.trace(rho))


class TestApplyGate:
    def test_x_flips(self):
        state = DensityMatrix.zero_state(1)
        out = apply_gate(state, Gate("X", (0,)))
        assert out.data[1, 1] == pytest.approx(1.0)

    def test_h_uniform(self):
        out = apply_gate(DensityMatrix.zero_state(1), Gate("H", (0,)))
        assert np.allclose(out.data, 0.5 * np.ones((2, 2)))

    def test_cx_control_first(self):
        # |10> in (first qubit = control = 1, second qubit = 0)
        state = DensityMatrix.zero_state(2)
        state = apply_gate(state, Gate("X", (0,)))
        out = apply_gate(state, Gate("CX", (0, 1)))
        assert out.data[3, 3] == pytest.approx(1.0)  # both qubits excited

    def test_non_unitary_rejected(self):
        for kind in ("MEASURE", "BARRIER", "DELAY"):
            with pytest.raises(ValueError):
                gate_matrix(kind)

    def test_invariants_preserved(self):
        rng = np.random.default_rng(0)
        state = random_density(3, rng)
        for kind, qubits in (("H", (0,)), ("SX", (2,)), ("CX", (1, 2)), ("RZ", (0,))):
            theta = 0.7 if kind == "RZ" else None
            out = apply_unitary(state, gate_matrix(kind, theta), qubits)
            out.validate()
            state = out


class TestApplyChannel:
    def test_identity_channel(self):
        rng = np.random.default_rng(1)
        state = random_density(2, rng)
        out = apply_channel(state, depolarizing(1, 0.0), (0,))
        assert np.allclose(out.data, state.data, atol=1e-14)

    def test_full_depolarizing_quarter(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            state = random_density(1, rng)
            out = apply_channel(state, depolarizing(1, 0.25), (0,))
            assert np.allclose(out.data, np.eye(2) / 2, atol=1e-12)

    def test_complete_amplitude_damping(self):
        state = apply_gate(DensityMatrix.zero_state(1), Gate("X", (0,)))
        channel = thermal_relaxation(1.0, 2.0, 1e9)  # duration >> t1
        out = apply_channel(state, channel, (0,))
        assert out.data[0, 0] == pytest.approx(1.0, abs=1e-9)

    def test_arity_mismatch(self):
        with pytest.raises(ValueError, match="arity"):
            apply_channel(DensityMatrix.zero_state(2), depolarizing(2, 0.01), (0,))

    def test_fast_paths_match_kraus_sum(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(1, 5))
            arity = int(rng.integers(1, min(n, 3) + 1))
            qubits = tuple(rng.choice(n, size=arity, replace=False).tolist())
            if arity == 1 and rng.random() < 0.5:
                channel = thermal_relaxation(100.0, 120.0, float(rng.uniform(0, 400)))
            else:
                channel = depolarizing(arity, float(rng.uniform(0, 0.9 / 4**arity)))
            state = random_density(n, rng)
            fast = apply_channel(state, channel, qubits)
            slow = kraus_sum(state, channel, qubits)
            assert np.allclose(fast.data, slow.data, atol=1e-12)

    def test_trace_and_hermiticity_preserved(self):
        rng = np.random.default_rng(4)
        state = random_density(2, rng)
        for channel, qubits in (
            (thermal_relaxation(80.0, 100.0, 200.0), (0,)),
            (depolarizing(2, 0.01), (0, 1)),
        ):
            state = apply_channel(state, channel, qubits)
            state.validate()


class TestExactDistribution:
    def test_h_single_qubit(self):
        assert np.allclose(exact_distribution(Circuit(1).h(0)), [0.5, 0.5])

    def test_bell_state(self):
        dist = exact_distribution(Circuit(2).h(0).cx(0, 1))
        assert np.allclose(dist, [0.5, 0, 0, 0.5])

    def test_empty_circuit(self):
        dist = exact_distribution(Circuit(3))
        assert dist[0] == pytest.approx(1.0) and np.allclose(dist[1:], 0)

    def test_normalization(self):
        rng = np.random.default_rng(5)
        c = Circuit(4)
        for _ in range(30):
            if rng.random() < 0.3:
                a = int(rng.integers(3))
                c.cx(a, a + 1)
            else:
                c.rz(float(rng.uniform(0, 6)), int(rng.integers(4)))
                c.sx(int(rng.integers(4)))
        assert abs(exact_distribution(c).sum() - 1.0) < 1e-12

    def test_measured_bit_order(self):
        c = Circuit(2).x(1)
        c.measure(1)
        c.measure(0)
        # clbit 0 reads qubit 1 (excited): outcome string "01"
        dist = exact_distribution(c)
        assert dist[1] == pytest.approx(1.0)

    def test_size_limit(self):
        with pytest.raises(ValueError, match="dense limit"):
            exact_distribution(Circuit(15))


class TestSampleCounts:
    def test_perfect_readout_all_zero(self):
        counts = sample_counts(DensityMatrix.zero_state(1), 500, readout=[(0.0, 0.0)], seed=1)
        assert counts.counts == {"0": 500}

    def test_always_flipped(self):
        counts = sample_counts(DensityMatrix.zero_state(1), 300, readout=[(0.0, 1.0)], seed=2)
        assert counts.counts == {"1": 300}

    def test_binomial_concentration(self):
        counts = sample_counts(DensityMatrix.zero_state(1), 100_000, readout=[(0.0, 0.1)], seed=3)
        frac = counts.counts.get("1", 0) / counts.shots
        assert abs(frac - 0.1) < 0.01

    def test_deterministic_per_seed(self):
        state = apply_gate(DensityMatrix.zero_state(1), Gate("H", (0,)))
        a = sample_counts(state, 1000, seed=7)
        b = sample_counts(state, 1000, seed=7)
        assert a == b

    def test_shots_positive(self):
        with pytest.raises(ValueError):
            sample_counts(DensityMatrix.zero_state(1), 0)


class TestCounts:
    def test_marginal(self):
        counts = Counts(10, {"011": 6, "101": 4})
        assert counts.marginal([0]).counts == {"1": 10}
        assert counts.marginal([2, 1]).counts == {"10": 6, "01": 4}

    def test_probability_vector(self):
        counts = Counts(4, {"00": 1, "11": 3})
        assert np.allclose(counts.probability_vector(), [0.25, 0, 0, 0.75])

    def test_combine(self):
        a = Counts(2, {"0": 2})
        b = Counts(3, {"0": 1, "1": 2})
        assert a.combine(b) == Counts(5, {"0": 3, "1": 2})

    def test_shot_consistency_checked(self):
        with pytest.raises(ValueError):
            Counts(5, {"0": 1})

    def test_json_roundtrip(self):
        c = Counts(7, {"01": 3, "10": 4})
        assert Counts.from_json(c.to_json()) == c


class TestReadoutOnDistribution:
    def test_single_bit(self):
        out = apply_readout_to_distribution(np.array([1.0, 0.0]), [(0.0, 0.1)])
        assert np.allclose(out, [0.9, 0.1])

    def test_matches_sampling_statistics(self):
        rng = np.random.default_rng(6)
        probs = rng.dirichlet(np.ones(4))
        readout = [(0.03, 0.01), (0.05, 0.02)]
        analytic = apply_readout_to_distribution(probs, readout)
        state = DensityMatrix(2, np.diag(probs).astype(complex))
        counts = sample_counts(state, 400_000, readout=readout, seed=8)
        assert np.abs(counts.probability_vector() - analytic).max() < 5e-3


class TestTableauDenseCrossValidation:
    def test_clifford_action_matches_density_evolution(self):
        rng = np.random.default_rng(10)
        for n in (1, 2, 3):
            state = DensityMatrix.zero_state(n)
            tab = tb.CliffordTableau.identity(n)
            for _ in range(6):
                small = tb.random_clifford(min(n, 2), rng)
                if n > small.n:
                    qubits = tuple(
                        int(q) for q in rng.choice(n, size=small.n, replace=False)
                    )
                else:
                    qubits = tuple(range(small.n))
                for kind, local in tb.decompose(small):
                    mapped = tuple(qubits[j] for j in local)
                    state = apply_gate(state, Gate(kind, mapped))
                    tab = tab.apply_gate(kind, mapped)
            # stabilizer expectation values from the tableau match the dense state
            for i, row in enumerate(tab.rows):
                gen = tb.PauliTerm.single(n, "Z" if i >= n else "X", i % n)
                image = row.to_matrix()
                start = gen.to_matrix()
                dense_start = DensityMatrix.zero_state(n).data
                lhs = np.trace(image @ state.data)
                rhs = np.trace(start @ dense_start)
                assert lhs == pytest.approx(rhs, abs=1e-9)
