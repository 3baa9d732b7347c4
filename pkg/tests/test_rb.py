import numpy as np
import pytest

from crosstalksim import rb
from crosstalksim import tableau as tb
from crosstalksim.backend import PerCliffordDepolarizing, VirtualBackend
from crosstalksim.device import Batch, DeviceSnapshot, Triplet
from crosstalksim.noise import CrosstalkInjection

from conftest import chain_snapshot, make_edge, make_qubit


@pytest.fixture(scope="module")
def pair_snapshot():
    return chain_snapshot(2)


@pytest.fixture(scope="module")
def triplet_snapshot():
    qubits = tuple(make_qubit(i) for i in range(3))
    edges = (make_edge(1, 0), make_edge(1, 2))
    return DeviceSnapshot(qubits=qubits, edges=edges)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            rb.RBConfig(lengths=(3, 1), repetitions=1, shots=10)
        with pytest.raises(ValueError):
            rb.RBConfig(lengths=(1, 3), repetitions=0, shots=10)

    def test_paper_defaults(self):
        assert rb.PAPER_CONFIG.lengths == (1, 3, 10, 20, 40, 65, 95, 130, 175)
        assert rb.PAPER_CONFIG.repetitions == 5
        assert rb.PAPER_CONFIG.shots == 10_000


class TestSampleClifford:
    def test_decomposition_attached(self):
        s = rb.sample_clifford(2, np.random.default_rng(0))
        rebuilt = tb.CliffordTableau.identity(2)
        for kind, qubits in s.gates:
            rebuilt = rebuilt.then(tb.gate_tableau(2, kind, qubits))
        assert rebuilt == s.tableau


class TestBuildRBCircuits:
    def test_counts_per_target(self, pair_snapshot):
        cfg = rb.RBConfig(lengths=(1, 3, 10, 20, 40, 65, 95, 130, 175), repetitions=5, shots=1)
        circuits = rb.build_rb_circuits((0, 1), cfg)
        assert len(circuits) == 45

    def test_noiseless_survival_one(self, pair_snapshot):
        backend = VirtualBackend(pair_snapshot)
        cfg = rb.RBConfig(lengths=(1, 4, 9), repetitions=2, shots=64, seed=3)
        for m, rep, circuit in rb.build_rb_circuits((0, 1), cfg):
            counts = backend.run(circuit, 64, seed_key=(m, rep))
            assert counts.counts == {"00": 64}

    def test_length_one_is_clifford_plus_inverse(self, pair_snapshot):
        cfg = rb.RBConfig(lengths=(1,), repetitions=1, shots=1, seed=5)
        (m, rep, circuit), = rb.build_rb_circuits((0,), cfg)
        barriers = [g for g in circuit.instructions if g.kind == "BARRIER"]
        assert len(barriers) == 2  # one sampled Clifford, one inverse


class TestBuildSimultaneousRB:
    def test_noiseless_survival_one(self, triplet_snapshot):
        backend = VirtualBackend(triplet_snapshot)
        cfg = rb.RBConfig(lengths=(1, 3), repetitions=2, shots=32, seed=1)
        for m, rep, circuit in rb.build_simultaneous_rb(Triplet(1, 0, 2), cfg):
            counts = backend.run(circuit, 32, seed_key=(m, rep))
            assert counts.counts == {"000": 32}

    def test_barrier_count(self, triplet_snapshot):
        cfg = rb.RBConfig(lengths=(4,), repetitions=1, shots=1, seed=2)
        (m, rep, circuit), = rb.build_simultaneous_rb(Triplet(1, 0, 2), cfg)
        barriers = [g for g in circuit.instructions if g.kind == "BARRIER"]
        assert len(barriers) == m + 1
        assert all(set(b.qubits) == {0, 1, 2} for b in barriers)

    def test_spectator_stretched(self, triplet_snapshot):
        from crosstalksim.circuit import schedule

        cfg = rb.RBConfig(lengths=(8,), repetitions=1, shots=1, seed=4)
        (_, _, circuit), = rb.build_simultaneous_rb(Triplet(1, 0, 2), cfg)
        sched = schedule(circuit, triplet_snapshot)
        spectator_idle = sum(e - s for s, e in sched.idle_intervals[2])
        assert spectator_idle > 0


class TestFitDecay:
    def test_exact_recovery(self):
        m = np.array([1, 3, 10, 20, 40, 65, 95, 130, 175])
        a, b, alpha = 0.5, 0.5, 0.99
        points = [rb.RBPoint(int(x), a * alpha**x + b, 0.0) for x in m]
        fit = rb.fit_decay(points, d=2)
        assert fit.alpha == pytest.approx(alpha, abs=1e-6)
        assert fit.r == pytest.approx(0.5 * (1 - alpha), abs=1e-6)

    def test_constant_survival(self):
        points = [rb.RBPoint(x, 1.0, 0.0) for x in (1, 5, 20)]
        fit = rb.fit_decay(points, d=2)
        assert fit.alpha == 1.0 and fit.r == 0.0

    def test_needs_three_lengths(self):
        with pytest.raises(ValueError):
            rb.fit_decay([rb.RBPoint(1, 0.9, 0.0), rb.RBPoint(5, 0.8, 0.0)], d=2)

    def test_monte_carlo_calibration(self):
        # alpha recovered within 0.005 in at least 95 of 100 noisy trials
        rng = np.random.default_rng(17)
        m = np.array([1, 3, 10, 20, 40, 65, 95, 130, 175])
        a, b, alpha = 0.5, 0.5, 0.95
        shots = 10_000
        hits = 0
        for _ in range(100):
            points = []
            for x in m:
                s = a * alpha**x + b
                sample = rng.binomial(shots, s) / shots
                points.append(rb.RBPoint(int(x), sample, np.sqrt(s * (1 - s) / shots)))
            fit = rb.fit_decay(points, d=2)
            hits += abs(fit.alpha - alpha) < 0.005
        assert hits >= 95

    def test_residual_reported(self):
        points = [rb.RBPoint(x, 0.5 * 0.97**x + 0.5, 0.0) for x in (1, 5, 20, 60)]
        fit = rb.fit_decay(points, d=4)
        assert fit.residual < 1e-8


class TestRunRB:
    def test_desk_roundtrip_two_qubit(self, pair_snapshot):
        r = 0.05
        backend = VirtualBackend(
            pair_snapshot, noise=PerCliffordDepolarizing.for_target((0, 1), r), seed=0
        )
        cfg = rb.DESK_CONFIG.replace(seed=0)
        points, fit = rb.run_rb(backend, (0, 1), cfg)
        assert fit.r == pytest.approx(r, rel=0.10)

    def test_desk_roundtrip_single_qubit(self, pair_snapshot):
        r = 0.05
        backend = VirtualBackend(
            pair_snapshot, noise=PerCliffordDepolarizing.for_target((0,), r), seed=0
        )
        points, fit = rb.run_rb(backend, (0,), rb.DESK_CONFIG.replace(seed=0))
        assert fit.r == pytest.approx(r, rel=0.10)


class TestCharacterize:
    def test_zero_noise_rates_small(self, triplet_snapshot):
        backend = VirtualBackend(triplet_snapshot)
        cfg = rb.RBConfig(lengths=(1, 5, 20), repetitions=2, shots=400, seed=6)
        batch = Batch(frozenset({Triplet(1, 0, 2)}))
        result = rb.characterize(backend, [batch], cfg)
        cx_rate, sq_rate = result.table.rates[Triplet(1, 0, 2)]
        assert cx_rate < 1e-3 and sq_rate < 1e-3

    def test_recovers_uniform_rates(self, triplet_snapshot):
        r2, r1 = 0.02, 0.004
        trip = Triplet(1, 0, 2)
        backend = VirtualBackend(
            triplet_snapshot,
            noise=PerCliffordDepolarizing.for_triplets([trip], r2, r1),
            seed=2,
        )
        cfg = rb.RBConfig(lengths=(1, 5, 20, 60), repetitions=3, shots=4000, seed=2)
        result = rb.characterize(backend, [Batch(frozenset({trip}))], cfg)
        cx_rate, sq_rate = result.table.rates[trip]
        assert cx_rate == pytest.approx(r2, rel=0.15)
        assert sq_rate == pytest.approx(r1, rel=0.15)

    def test_injection_elevates_pair_error(self, triplet_snapshot):
        # spec example device: injected triplet fits a higher pair error
        r2, r1 = 0.01, 0.001
        trip = Triplet(1, 0, 2)
        noise = PerCliffordDepolarizing.for_triplets([trip], r2, r1)
        cfg = rb.RBConfig(lengths=(1, 5, 20, 60), repetitions=3, shots=4000, seed=3)
        plain = rb.characterize(
            VirtualBackend(triplet_snapshot, noise=noise, seed=4),
            [Batch(frozenset({trip}))],
            cfg,
        )
        injected = rb.characterize(
            VirtualBackend(
                triplet_snapshot,
                noise=noise,
                injection=CrosstalkInjection({trip: 0.1}),
                seed=4,
            ),
            [Batch(frozenset({trip}))],
            cfg,
        )
        assert injected.table.rates[trip][0] > plain.table.rates[trip][0] * 2

    def test_simultaneous_vs_isolated_null(self, triplet_snapshot):
        # without injection or idle decoherence the simultaneous pair rate
        # matches the isolated rate within statistical error
        r2 = 0.02
        trip = Triplet(1, 0, 2)
        noise = PerCliffordDepolarizing.for_triplets([trip], r2, 0.001)
        cfg = rb.RBConfig(lengths=(1, 5, 20, 60), repetitions=3, shots=4000, seed=9)
        result = rb.characterize(
            VirtualBackend(triplet_snapshot, noise=noise, seed=9), [Batch(frozenset({trip}))], cfg
        )
        fit = result.results[trip].pair_fit
        assert abs(fit.r - r2) < max(3 * fit.stderr_r, 0.15 * r2)

    def test_spectator_idle_excess(self, triplet_snapshot):
        r2, r1 = 0.01, 0.001
        trip = Triplet(1, 0, 2)
        noise = PerCliffordDepolarizing.for_triplets([trip], r2, r1, idle_relaxation=True)
        cfg = rb.RBConfig(lengths=(1, 5, 20, 60), repetitions=3, shots=4000, seed=5)
        result = rb.characterize(
            VirtualBackend(triplet_snapshot, noise=noise, seed=5), [Batch(frozenset({trip}))], cfg
        )
        assert result.table.rates[trip][1] > r1

    def test_diagnostics_serializable(self, triplet_snapshot):
        import json

        backend = VirtualBackend(triplet_snapshot)
        cfg = rb.RBConfig(lengths=(1, 3, 8), repetitions=2, shots=100, seed=1)
        result = rb.characterize(backend, [Batch(frozenset({Triplet(1, 0, 2)}))], cfg)
        payload = json.dumps(result.to_json())
        assert "survivals" in payload
