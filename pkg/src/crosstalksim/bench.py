"""Benchmark circuit, layout sweeps, Hellinger fidelity, and run comparison.

The benchmark template is a chain circuit with nearest-neighbor CX gates
only, so any simple path of the coupling graph supports it.  Per layout the
template is placed on the physical chain, mapped to native CX directions,
optionally randomized-compiled, executed, and scored by Hellinger fidelity
against the template's exact distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import VirtualBackend, exact_measured_probabilities
from .circuit import Circuit, Gate, map_to_native, randomized_compile
from .device import DeviceSnapshot, Triplet, extract_triplets
from .noise import CrosstalkTable, bind_model, build_crosstalk_model, build_standard_model
from .parallel import pmap
from .rng import stream
from .simulator import Counts, exact_distribution

__all__ = [
    "FidelityRecord",
    "ComparisonResult",
    "TwirlSpec",
    "hadamard_ladder",
    "hellinger_fidelity",
    "sweep",
    "compare",
    "filter_outliers",
    "SOURCES",
]

SOURCES = ("measured-run-1", "measured-run-2", "model-standard", "model-crosstalk")


def hadamard_ladder(n: int) -> Circuit:
    """Chain benchmark circuit: H on the first qubit, CX down the chain.

    All two-qubit gates act on nearest neighbors of the chain, and the
    output distribution is structured (half weight on each of the all-zeros
    and all-ones strings), so both decohering and depolarizing noise are
    visible in the measured fidelity.
    """
    if n < 1:
        raise ValueError("ladder needs at least one qubit")
    circuit = Circuit(n)
    circuit.h(0)
    for i in range(n - 1):
        circuit.cx(i, i + 1)
    circuit.barrier(*range(n))
    circuit.measure_all()
    return circuit


def _as_vector(dist, num_bits: int | None = None) -> np.ndarray:
    if isinstance(dist, Counts):
        return dist.probability_vector(num_bits)
    if isinstance(dist, dict):
        m = num_bits if num_bits is not None else len(next(iter(dist)))
        out = np.zeros(2**m)
        total = sum(dist.values())
        for key, value in dist.items():
            out[int(key, 2)] += value / total
        return out
    return np.asarray(dist, dtype=float)


def hellinger_fidelity(p, q) -> float:
    """(sum_i sqrt(p_i q_i))^2 between two discrete distributions."""
    pv = _as_vector(p)
    qv = _as_vector(q)
    if pv.shape != qv.shape:
        raise ValueError(f"distributions have different sizes: {pv.size} vs {qv.size}")
    for name, v in (("p", pv), ("q", qv)):
        if abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"distribution {name} is not normalized (sum {v.sum()})")
    return float(np.sum(np.sqrt(np.clip(pv, 0, None) * np.clip(qv, 0, None))) ** 2)


@dataclass(frozen=True)
class FidelityRecord:
    layout: tuple[int, ...]
    source: str
    fidelity: float

    def to_json(self) -> dict:
        return {"layout": list(self.layout), "source": self.source, "fidelity": self.fidelity}


@dataclass(frozen=True)
class ComparisonResult:
    rms: float
    rms_reduced: float
    flagged_layouts: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "rms": self.rms,
            "rms_reduced": self.rms_reduced,
            "flagged_layouts": [list(l) for l in self.flagged_layouts],
        }


@dataclass(frozen=True)
class TwirlSpec:
    """Randomized-compiling schedule: combine `randomizations` x `shots_each`."""

    randomizations: int
    shots_each: int

    @classmethod
    def parse(cls, text: str) -> "TwirlSpec":
        parts = text.lower().split("x")
        if len(parts) != 2:
            raise ValueError(f"twirl spec must look like '100x100', got {text!r}")
        return cls(randomizations=int(parts[0]), shots_each=int(parts[1]))


def place_on_layout(template: Circuit, layout: tuple[int, ...], num_qubits: int) -> Circuit:
    """Map a chain template onto physical qubits; clbit order is logical order."""
    if len(layout) != template.num_qubits:
        raise ValueError(
            f"layout has {len(layout)} qubits, template needs {template.num_qubits}"
        )
    out = Circuit(num_qubits)
    for gate in template.instructions:
        out.append(
            Gate(
                gate.kind,
                tuple(layout[q] for q in gate.qubits),
                theta=gate.theta,
                duration=gate.duration,
                virtual=gate.virtual,
            )
        )
    return out


def _measured_fidelity(
    native: Circuit,
    backend: VirtualBackend,
    target: np.ndarray,
    *,
    shots: int,
    twirl: TwirlSpec | None,
    triplets: list[Triplet],
    seed: int,
    key: tuple,
) -> float:
    if twirl is None:
        counts = backend.run(native, shots, seed_key=key)
        return hellinger_fidelity(counts.probability_vector(), target)
    combined: Counts | None = None
    for k in range(twirl.randomizations):
        twirl_seed = int(stream(seed, "twirl-seed", *key, k).integers(2**63))
        compiled, _record = randomized_compile(native, backend.snapshot, triplets, twirl_seed)
        counts = backend.run(compiled, twirl.shots_each, seed_key=(*key, "tw", k))
        combined = counts if combined is None else combined.combine(counts)
    return hellinger_fidelity(combined.probability_vector(), target)


def sweep(
    template: Circuit,
    layouts: list[tuple[int, ...]],
    backend: VirtualBackend,
    sources: tuple[str, ...] = SOURCES,
    *,
    table: CrosstalkTable | None = None,
    shots: int = 10_000,
    twirl: TwirlSpec | None = None,
    seed: int = 0,
) -> list[FidelityRecord]:
    """Fidelity of every (layout, source) against the template's exact output.

    Measured sources sample the virtual backend (with its injected ground
    truth); model sources are exact density-matrix simulations under the
    standard or crosstalk-aware noise model with analytic readout.
    """
    unknown = set(sources) - set(SOURCES)
    if unknown:
        raise ValueError(f"unknown sweep sources: {sorted(unknown)}")
    if "model-crosstalk" in sources and table is None:
        raise ValueError("the crosstalk model source needs a characterization table")
    snapshot = backend.snapshot
    target = exact_distribution(template)
    triplets = extract_triplets(snapshot)
    need_models = {"model-standard", "model-crosstalk"} & set(sources)
    standard = build_standard_model(snapshot) if need_models else None
    measured_sources = [s for s in sources if s.startswith("measured-run-")]

    def one_layout(item):
        layout_index, layout = item
        for a, b in zip(layout, layout[1:]):
            if not snapshot.has_edge(a, b):
                raise ValueError(f"layout {layout} is not a chain: ({a},{b}) not coupled")
        physical = place_on_layout(template, layout, snapshot.num_qubits)
        native = map_to_native(physical, snapshot)
        fidelities: dict[str, float] = {}
        if measured_sources and twirl is None:
            specs = [
                (shots, ("sweep", int(s.rsplit("-", 1)[1]), layout_index))
                for s in measured_sources
            ]
            for s, counts in zip(measured_sources, backend.run_batch(native, specs)):
                fidelities[s] = hellinger_fidelity(counts.probability_vector(), target)
        elif measured_sources:
            for s in measured_sources:
                run_id = int(s.rsplit("-", 1)[1])
                fidelities[s] = _measured_fidelity(
                    native,
                    backend,
                    target,
                    shots=shots,
                    twirl=twirl,
                    triplets=triplets,
                    seed=seed,
                    key=("sweep", run_id, layout_index),
                )
        if "model-standard" in sources:
            bound = bind_model(standard, native)
            probs = exact_measured_probabilities(native, snapshot, bound)
            fidelities["model-standard"] = hellinger_fidelity(probs, target)
        if "model-crosstalk" in sources:
            bound = build_crosstalk_model(
                snapshot, table, native, triplets=triplets, standard=standard
            )
            probs = exact_measured_probabilities(native, snapshot, bound)
            fidelities["model-crosstalk"] = hellinger_fidelity(probs, target)
        return [
            FidelityRecord(layout=tuple(layout), source=s, fidelity=fidelities[s])
            for s in sources
        ]

    nested = pmap(one_layout, list(enumerate(layouts)))
    return [record for group in nested for record in group]


def records_by_source(records: list[FidelityRecord]) -> dict[str, list[FidelityRecord]]:
    out: dict[str, list[FidelityRecord]] = {}
    for r in records:
        out.setdefault(r.source, []).append(r)
    return out


def _aligned(measured: list[FidelityRecord], simulated: list[FidelityRecord]):
    ms = {r.layout: r.fidelity for r in measured}
    ss = {r.layout: r.fidelity for r in simulated}
    if set(ms) != set(ss):
        raise ValueError("record sets cover different layouts")
    layouts = sorted(ms)
    return layouts, np.array([ms[l] for l in layouts]), np.array([ss[l] for l in layouts])


def compare(
    measured: list[FidelityRecord],
    simulated: list[FidelityRecord],
    flagged: list[tuple[int, ...]] | None = None,
) -> ComparisonResult:
    """Root-mean-square deviation, plus the value over unflagged layouts."""
    layouts, m, s = _aligned(measured, simulated)
    rms = float(np.sqrt(np.mean((m - s) ** 2)))
    flagged = [tuple(f) for f in (flagged or [])]
    keep = [i for i, l in enumerate(layouts) if l not in set(flagged)]
    rms_reduced = float(np.sqrt(np.mean((m[keep] - s[keep]) ** 2))) if keep else 0.0
    return ComparisonResult(rms=rms, rms_reduced=rms_reduced, flagged_layouts=tuple(flagged))


def filter_outliers(
    run1: list[FidelityRecord],
    run2: list[FidelityRecord],
    threshold: float = 0.02,
) -> list[tuple[int, ...]]:
    """Layouts whose fidelity differs strictly more than `threshold` between runs."""
    layouts, a, b = _aligned(run1, run2)
    return [l for l, x, y in zip(layouts, a, b) if abs(x - y) > threshold]
