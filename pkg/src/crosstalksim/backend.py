"""Virtual backend: noisy circuit execution against a bound noise model.

The executor walks the ASAP schedule in instruction order, applying gate
unitaries, the bound per-instruction channels, and (when enabled) thermal
relaxation over the idle gaps preceding each instruction on its qubits.
Qubit sets that never interact through a gate, barrier, or channel are
simulated as independent tensor factors, so batched characterization
circuits over many disjoint triplets stay cheap while injected channels
that genuinely couple subsets merge their factors automatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .circuit import Circuit, schedule as make_schedule
from .device import DeviceSnapshot
from .noise import (
    BoundNoiseModel,
    CrosstalkInjection,
    NoiseModel,
    bind_model,
    depolarizing,
    inject_crosstalk,
    thermal_relaxation,
)
from .rng import stream
from .simulator import (
    Counts,
    DensityMatrix,
    apply_channel,
    apply_readout_to_distribution,
    apply_unitary,
    gate_matrix,
    outcomes_to_counts,
)

__all__ = [
    "PerCliffordDepolarizing",
    "VirtualBackend",
    "exact_measured_probabilities",
    "run_counts",
]


@dataclass(frozen=True)
class PerCliffordDepolarizing:
    """Noise applied once per Clifford layer of a benchmarking circuit.

    Sequence builders close every Clifford layer with a barrier whose qubit
    order encodes the layer's roles; `layers` maps that ordered barrier
    signature to the (subsystem, rate) pairs to depolarize there.  Exact
    signature matching keeps pair and spectator roles apart even when the
    same qubits appear in several triplets.
    """

    layers: dict[tuple[int, ...], tuple[tuple[tuple[int, ...], float], ...]]
    idle_relaxation: bool = False
    readout: dict[int, tuple[float, float]] = field(default_factory=dict)

    @classmethod
    def for_target(cls, qubits: tuple[int, ...], rate: float, **kwargs) -> "PerCliffordDepolarizing":
        """Uniform per-Clifford depolarizing for isolated benchmarking of one target."""
        key = tuple(qubits)
        return cls(layers={key: ((key, rate),)}, **kwargs)

    @classmethod
    def for_triplets(cls, triplets, pair_rate: float, spectator_rate: float, **kwargs) -> "PerCliffordDepolarizing":
        """Pair and spectator rates for simultaneous benchmarking circuits."""
        layers = {}
        for t in triplets:
            signature = (t.drive, t.target, t.spectator)
            layers[signature] = (
                ((t.drive, t.target), pair_rate),
                ((t.spectator,), spectator_rate),
            )
        return cls(layers=layers, **kwargs)

    def bind(self, circuit: Circuit, snapshot: DeviceSnapshot) -> BoundNoiseModel:
        sched = make_schedule(circuit, snapshot)
        prepared: dict[tuple[int, ...], tuple] = {}
        for signature, entries in self.layers.items():
            out = []
            for subsystem, rate in entries:
                d = 2 ** len(subsystem)
                lam = rate * d / (d - 1)
                out.append((tuple(subsystem), depolarizing(len(subsystem), lam / 4 ** len(subsystem))))
            prepared[tuple(signature)] = tuple(out)
        channels: dict[int, tuple] = {}
        for index, item in enumerate(sched.items):
            if item.gate.kind != "BARRIER":
                continue
            hit = prepared.get(item.gate.qubits)
            if hit:
                channels[index] = hit
        return BoundNoiseModel(
            snapshot=snapshot,
            schedule=sched,
            instruction_channels=channels,
            readout=dict(self.readout),
            idle_relaxation=self.idle_relaxation,
        )


def _components(circuit: Circuit, bound: BoundNoiseModel | None) -> list[set[int]]:
    parent: dict[int, int] = {}

    def find(a: int) -> int:
        parent.setdefault(a, a)
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    for gate in circuit.instructions:
        qs = gate.qubits
        for q in qs:
            find(q)
        for a, b in zip(qs, qs[1:]):
            union(a, b)
    if bound is not None:
        for entries in bound.instruction_channels.values():
            for qs, _channel in entries:
                for q in qs:
                    find(q)
                for a, b in zip(qs, qs[1:]):
                    union(a, b)
    groups: dict[int, set[int]] = {}
    for q in parent:
        groups.setdefault(find(q), set()).add(q)
    return [groups[r] for r in sorted(groups, key=lambda r: min(groups[r]))]


@dataclass
class _ComponentState:
    qubits: list[int]  # ascending physical ids
    local: dict[int, int]
    state: DensityMatrix
    last_end: dict[int, float]
    relax_cache: dict


def _relax_channel(cache: dict, snapshot: DeviceSnapshot, qubit: int, duration: float):
    key = (qubit, round(duration, 9))
    if key not in cache:
        q = snapshot.qubit(qubit)
        cache[key] = thermal_relaxation(q.t1, q.t2, duration)
    return cache[key]


class _LocalGate:
    __slots__ = ("kind", "qubits", "theta")

    def __init__(self, kind, qubits, theta):
        self.kind = kind
        self.qubits = qubits
        self.theta = theta


def _simulate(circuit: Circuit, snapshot: DeviceSnapshot, bound: BoundNoiseModel | None):
    """Evolve each independent qubit component; returns per-clbit parts.

    Output: list of (clbits, distribution) where `distribution` runs over
    the listed classical bits (bit j of the outcome is clbits[j]).
    """
    circuit.validate()
    sched = bound.schedule if bound is not None else make_schedule(circuit, snapshot)
    comps = _components(circuit, bound)
    states: dict[int, _ComponentState] = {}
    comp_of: dict[int, int] = {}
    for ci, qubits in enumerate(comps):
        ordered = sorted(qubits)
        states[ci] = _ComponentState(
            qubits=ordered,
            local={q: i for i, q in enumerate(ordered)},
            state=DensityMatrix.zero_state(len(ordered)),
            last_end={q: 0.0 for q in ordered},
            relax_cache={},
        )
        for q in ordered:
            comp_of[q] = ci

    idle = bound.idle_relaxation if bound is not None else False
    measures: list[tuple[int, int]] = []  # (clbit, physical qubit)

    for index, item in enumerate(sched.items):
        gate = item.gate
        comp = states[comp_of[gate.qubits[0]]]

        if idle:
            for q in gate.qubits:
                gap = item.start - comp.last_end[q]
                if gap > 1e-12:
                    channel = _relax_channel(comp.relax_cache, snapshot, q, gap)
                    comp.state = apply_channel(comp.state, channel, (comp.local[q],))
                    comp.last_end[q] = item.start

        if gate.kind == "MEASURE":
            measures.append((len(measures), gate.qubits[0]))
        elif gate.kind == "BARRIER":
            pass
        elif gate.kind == "DELAY":
            if idle and item.end > item.start:
                q = gate.qubits[0]
                channel = _relax_channel(comp.relax_cache, snapshot, q, item.end - item.start)
                comp.state = apply_channel(comp.state, channel, (comp.local[q],))
        else:
            op = gate_matrix(gate.kind, gate.theta)
            comp.state = apply_unitary(comp.state, op, tuple(comp.local[q] for q in gate.qubits))

        for q in gate.qubits:
            comp.last_end[q] = max(comp.last_end[q], item.end)

        if bound is not None:
            for qs, channel in bound.instruction_channels.get(index, ()):
                target_comp = states[comp_of[qs[0]]]
                local = tuple(target_comp.local[q] for q in qs)
                target_comp.state = apply_channel(target_comp.state, channel, local)
                # channel windows coincide with the instruction window

    if not measures:
        raise ValueError("circuit has no MEASURE instructions")

    parts = []
    by_comp: dict[int, list[tuple[int, int]]] = {}
    for clbit, q in measures:
        by_comp.setdefault(comp_of[q], []).append((clbit, q))
    for ci in sorted(by_comp):
        comp = states[ci]
        pairs = by_comp[ci]
        clbits = [c for c, _ in pairs]
        local_qubits = [comp.local[q] for _, q in pairs]
        dist = comp.state.marginal_probabilities(local_qubits)
        parts.append((clbits, dist))
    return parts, measures


def _assemble_distribution(parts, num_bits: int) -> np.ndarray:
    full = reduce(np.kron, [dist for _, dist in reversed(parts)], np.array([1.0]))
    order = [clbit for clbits, _ in parts for clbit in clbits]
    size = 2**num_bits
    idx = np.arange(size)
    dst = np.zeros(size, dtype=np.int64)
    for pos, clbit in enumerate(order):
        dst |= ((idx >> pos) & 1) << clbit
    out = np.zeros(size)
    out[dst] = full
    return out


def exact_measured_probabilities(
    circuit: Circuit,
    snapshot: DeviceSnapshot,
    bound: BoundNoiseModel | None,
    *,
    apply_readout: bool = True,
) -> np.ndarray:
    """Exact outcome distribution over the measured classical bits."""
    parts, measures = _simulate(circuit, snapshot, bound)
    probs = _assemble_distribution(parts, len(measures))
    if apply_readout and bound is not None and bound.readout:
        readout = [bound.readout.get(q, (0.0, 0.0)) for _, q in measures]
        probs = apply_readout_to_distribution(probs, readout)
    return probs


def _sample_from_parts(parts, measures, readout, shots: int, rng) -> Counts:
    m = len(measures)
    outcomes = np.zeros(shots, dtype=np.int64)
    for clbits, dist in parts:
        p = np.clip(dist, 0, None)
        p = p / p.sum()
        draws = rng.choice(dist.size, size=shots, p=p)
        for pos, clbit in enumerate(clbits):
            outcomes |= ((draws >> pos) & 1) << clbit
    if readout:
        bits = ((outcomes[:, None] >> np.arange(m)[None, :]) & 1).astype(np.int8)
        for j, (_, q) in enumerate(measures):
            p0_given_1, p1_given_0 = readout.get(q, (0.0, 0.0))
            if p0_given_1 == 0 and p1_given_0 == 0:
                continue
            u = rng.random(shots)
            flip = np.where(bits[:, j] == 1, u < p0_given_1, u < p1_given_0)
            bits[:, j] ^= flip.astype(np.int8)
        outcomes = (bits.astype(np.int64) * (1 << np.arange(m))[None, :]).sum(axis=1)
    return outcomes_to_counts(outcomes, m)


def run_counts(
    circuit: Circuit,
    snapshot: DeviceSnapshot,
    bound: BoundNoiseModel | None,
    shots: int,
    seed: int,
    seed_key: tuple = (),
) -> Counts:
    """Sample measurement outcomes; deterministic per (seed, seed_key)."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    parts, measures = _simulate(circuit, snapshot, bound)
    rng = stream(seed, "run", *seed_key)
    readout = bound.readout if bound is not None else {}
    return _sample_from_parts(parts, measures, readout, shots, rng)


class VirtualBackend:
    """Snapshot + noise truth + optional injected crosstalk, runnable end to end."""

    def __init__(
        self,
        snapshot: DeviceSnapshot,
        noise: NoiseModel | PerCliffordDepolarizing | None = None,
        injection: CrosstalkInjection | None = None,
        seed: int = 0,
    ):
        self.snapshot = snapshot
        self.noise = noise
        self.injection = injection
        self.seed = seed

    def bind(self, circuit: Circuit) -> BoundNoiseModel | None:
        if self.noise is None:
            bound = None
        elif isinstance(self.noise, PerCliffordDepolarizing):
            bound = self.noise.bind(circuit, self.snapshot)
        else:
            bound = bind_model(self.noise, circuit)
        if self.injection is not None and self.injection.weights:
            if bound is None:
                empty = NoiseModel(
                    snapshot=self.snapshot,
                    sq_channels={q.id: () for q in self.snapshot.qubits},
                    cx_channels={(e.drive, e.target): () for e in self.snapshot.edges},
                    readout={},
                    idle_relaxation=False,
                )
                bound = bind_model(empty, circuit)
            bound = inject_crosstalk(bound, self.injection, circuit)
        return bound

    def run(self, circuit: Circuit, shots: int, seed_key: tuple = ()) -> Counts:
        return run_counts(circuit, self.snapshot, self.bind(circuit), shots, self.seed, seed_key)

    def run_batch(self, circuit: Circuit, shot_specs: list[tuple[int, tuple]]) -> list[Counts]:
        """Sample several shot batches from one simulation of the circuit."""
        bound = self.bind(circuit)
        parts, measures = _simulate(circuit, self.snapshot, bound)
        readout = bound.readout if bound is not None else {}
        out = []
        for shots, seed_key in shot_specs:
            rng = stream(self.seed, "run", *seed_key)
            out.append(_sample_from_parts(parts, measures, readout, shots, rng))
        return out

    def exact_probabilities(self, circuit: Circuit, *, apply_readout: bool = True) -> np.ndarray:
        return exact_measured_probabilities(
            circuit, self.snapshot, self.bind(circuit), apply_readout=apply_readout
        )
