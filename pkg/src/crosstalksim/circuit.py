"""Gate-level circuit IR, deterministic ASAP scheduling, native-direction
CNOT mapping, activity analysis, and randomized compiling.

Circuits are value objects over physical qubit indices.  Scheduling uses
the calibrated durations from a device snapshot: single-qubit pulses take
the qubit's sq duration, CX takes the edge's duration, RZ is a virtual
frame change with zero duration, and barriers only synchronize.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

from . import tableau as _tableau
from .device import DeviceSnapshot, Triplet
from .rng import stream

__all__ = [
    "Gate",
    "Circuit",
    "Schedule",
    "ScheduledItem",
    "TwirlRecord",
    "schedule",
    "map_to_native",
    "active_qubits",
    "randomized_compile",
    "PAULI_LABELS",
]

SINGLE_QUBIT_KINDS = frozenset({"I", "X", "Y", "Z", "H", "S", "SDG", "SX", "RZ"})
PAULI_LABELS = ("I", "X", "Y", "Z")
_ZERO_DURATION_KINDS = frozenset({"RZ", "BARRIER", "MEASURE"})


@dataclass(frozen=True)
class Gate:
    """One instruction; CX qubits are ordered (control, target).

    `virtual` marks zero-duration frame-style insertions (used by the
    randomized compiler) that must not perturb scheduling or activity.
    """

    kind: str
    qubits: tuple[int, ...]
    theta: float | None = None
    duration: float | None = None
    virtual: bool = False

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in SINGLE_QUBIT_KINDS or self.kind in ("MEASURE", "DELAY"):
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} expects one qubit, got {self.qubits}")
        elif self.kind == "CX":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"CX expects two distinct qubits, got {self.qubits}")
        elif self.kind == "BARRIER":
            if not self.qubits:
                raise ValueError("BARRIER needs at least one qubit")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "RZ":
            if self.theta is None or not -1e12 < float(self.theta) < 1e12:
                raise ValueError("RZ needs a finite angle")
        elif self.theta is not None:
            raise ValueError(f"{self.kind} takes no angle")
        if self.kind == "DELAY":
            if self.duration is None or self.duration < 0:
                raise ValueError("DELAY needs a non-negative duration")
        elif self.duration is not None:
            raise ValueError(f"{self.kind} takes no duration")

    @property
    def is_physical(self) -> bool:
        """True for pulse-backed gates that occupy time and mark activity."""
        if self.virtual:
            return False
        return self.kind == "CX" or (self.kind in SINGLE_QUBIT_KINDS and self.kind != "RZ")

    def to_json(self) -> dict:
        out: dict = {"gate": self.kind, "qubits": list(self.qubits)}
        if self.theta is not None:
            out["theta_rad"] = self.theta
        if self.duration is not None:
            out["duration_ns"] = self.duration
        if self.virtual:
            out["virtual"] = True
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Gate":
        return cls(
            kind=obj["gate"],
            qubits=tuple(obj["qubits"]),
            theta=obj.get("theta_rad"),
            duration=obj.get("duration_ns"),
            virtual=bool(obj.get("virtual", False)),
        )


class Circuit:
    """Ordered gate list on a fixed-size qubit register."""

    def __init__(self, num_qubits: int, instructions: Iterable[Gate] = ()):
        if num_qubits < 1:
            raise ValueError("circuit needs at least one qubit")
        self.num_qubits = int(num_qubits)
        self.instructions: list[Gate] = []
        for gate in instructions:
            self.append(gate)

    def append(self, gate: Gate) -> "Circuit":
        if any(q < 0 or q >= self.num_qubits for q in gate.qubits):
            raise ValueError(f"gate {gate.kind} on {gate.qubits} exceeds register size {self.num_qubits}")
        self.instructions.append(gate)
        return self

    # fluent builders
    def h(self, q):
        return self.append(Gate("H", (q,)))

    def x(self, q):
        return self.append(Gate("X", (q,)))

    def y(self, q):
        return self.append(Gate("Y", (q,)))

    def z(self, q):
        return self.append(Gate("Z", (q,)))

    def s(self, q):
        return self.append(Gate("S", (q,)))

    def sdg(self, q):
        return self.append(Gate("SDG", (q,)))

    def sx(self, q):
        return self.append(Gate("SX", (q,)))

    def rz(self, theta, q):
        return self.append(Gate("RZ", (q,), theta=theta))

    def cx(self, control, target):
        return self.append(Gate("CX", (control, target)))

    def barrier(self, *qubits):
        return self.append(Gate("BARRIER", tuple(qubits) if qubits else tuple(range(self.num_qubits))))

    def delay(self, duration, q):
        return self.append(Gate("DELAY", (q,), duration=duration))

    def measure(self, q):
        return self.append(Gate("MEASURE", (q,)))

    def measure_all(self):
        for q in range(self.num_qubits):
            self.measure(q)
        return self

    def measured_qubits(self) -> list[int]:
        """Qubits in classical-bit order (bit i = i-th MEASURE instruction)."""
        return [g.qubits[0] for g in self.instructions if g.kind == "MEASURE"]

    def active_qubit_set(self) -> set[int]:
        out = set()
        for g in self.instructions:
            out.update(g.qubits)
        return out

    def validate(self) -> None:
        measured: set[int] = set()
        for gate in self.instructions:
            if gate.kind == "MEASURE":
                q = gate.qubits[0]
                if q in measured:
                    raise ValueError(f"qubit {q} measured twice")
                measured.add(q)
            elif gate.kind != "BARRIER":
                for q in gate.qubits:
                    if q in measured:
                        raise ValueError(f"gate {gate.kind} on qubit {q} after its measurement")

    def copy(self) -> "Circuit":
        return Circuit(self.num_qubits, self.instructions)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.instructions)

    def __len__(self) -> int:
        return len(self.instructions)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Circuit)
            and self.num_qubits == other.num_qubits
            and self.instructions == other.instructions
        )

    def __repr__(self) -> str:
        return f"Circuit(num_qubits={self.num_qubits}, gates={len(self.instructions)})"

    def to_json(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "instructions": [g.to_json() for g in self.instructions],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj) -> "Circuit":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        return cls(obj["num_qubits"], (Gate.from_json(g) for g in obj["instructions"]))


@dataclass(frozen=True)
class ScheduledItem:
    gate: Gate
    start: float
    end: float


@dataclass(frozen=True)
class Schedule:
    """ASAP placement of a circuit plus per-qubit idle gaps."""

    items: tuple[ScheduledItem, ...]
    idle_intervals: dict[int, tuple[tuple[float, float], ...]] = field(compare=False)
    duration: float = 0.0

    def item(self, index: int) -> ScheduledItem:
        return self.items[index]


def gate_duration(gate: Gate, snapshot: DeviceSnapshot) -> float:
    """Wall-clock duration of one instruction in nanoseconds."""
    if gate.virtual or gate.kind in _ZERO_DURATION_KINDS:
        return 0.0
    if gate.kind == "DELAY":
        return float(gate.duration)
    if gate.kind == "CX":
        return snapshot.edge(*gate.qubits).cx_duration
    return snapshot.qubit(gate.qubits[0]).sq_duration


def schedule(circuit: Circuit, snapshot: DeviceSnapshot) -> Schedule:
    """Deterministic ASAP schedule with barrier synchronization.

    Each instruction starts at the max end-time over its qubits; a barrier
    aligns all its qubits to a common time.  Idle intervals are the per-qubit
    gaps not covered by any instruction, from t = 0 up to the end of the
    circuit.
    """
    circuit.validate()
    avail: dict[int, float] = {q: 0.0 for q in range(circuit.num_qubits)}
    busy: dict[int, list[tuple[float, float]]] = {q: [] for q in range(circuit.num_qubits)}
    items = []
    for gate in circuit.instructions:
        dur = gate_duration(gate, snapshot)
        start = max(avail[q] for q in gate.qubits)
        end = start + dur
        for q in gate.qubits:
            avail[q] = end
            if dur > 0:
                busy[q].append((start, end))
        items.append(ScheduledItem(gate, start, end))
    total = max((it.end for it in items), default=0.0)
    idle: dict[int, tuple[tuple[float, float], ...]] = {}
    for q in range(circuit.num_qubits):
        gaps = []
        cursor = 0.0
        for start, end in busy[q]:
            if start > cursor:
                gaps.append((cursor, start))
            cursor = end
        if total > cursor:
            gaps.append((cursor, total))
        idle[q] = tuple(gaps)
    return Schedule(items=tuple(items), idle_intervals=idle, duration=total)


def map_to_native(circuit: Circuit, snapshot: DeviceSnapshot) -> Circuit:
    """Rewrite CX gates opposing the calibrated drive direction.

    A CX whose (control, target) is the reverse of the calibrated
    (drive, target) becomes H(c) H(t) CX(drive, target) H(c) H(t); other
    gates pass through unchanged.  CX on a non-edge raises ValueError.
    """
    out = Circuit(circuit.num_qubits)
    for gate in circuit.instructions:
        if gate.kind != "CX":
            out.append(gate)
            continue
        control, target = gate.qubits
        try:
            edge = snapshot.edge(control, target)
        except KeyError as exc:
            raise ValueError(f"CX on ({control},{target}) is not a coupled pair") from exc
        if (edge.drive, edge.target) == (control, target):
            out.append(gate)
        else:
            out.h(edge.drive).h(edge.target)
            out.append(Gate("CX", (edge.drive, edge.target), virtual=gate.virtual))
            out.h(edge.drive).h(edge.target)
    return out


def active_qubits(sched: Schedule, at: float) -> set[int]:
    """Qubits that have undergone a physical gate operation by time `at`.

    An instruction counts if it ended at or before `at` or started strictly
    before `at`; barriers, delays, measurements, virtual insertions, and RZ
    frame changes never mark a qubit active.
    """
    if at < 0:
        raise ValueError("query time must be non-negative")
    out: set[int] = set()
    for item in sched.items:
        if not item.gate.is_physical:
            continue
        if item.end <= at or item.start < at:
            out.update(item.gate.qubits)
    return out


def _cx_conjugated_pauli(prefix: tuple[str, str]) -> tuple[str, str]:
    """Image of prefix (control, target) Paulis under CX conjugation."""
    n = 2
    term = _tableau.PauliTerm.identity(n)
    for local, label in enumerate(prefix):
        if label != "I":
            term = term * _tableau.PauliTerm.single(n, label, local)
    image = _tableau.gate_tableau(n, "CX", (0, 1)).evaluate(term)
    labels = []
    for local in range(n):
        x, z = image.x[local], image.z[local]
        labels.append({(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}[(x, z)])
    return tuple(labels)


CX_TWIRL_SUFFIX: dict[tuple[str, str], tuple[str, str]] = {
    (pc, pt): _cx_conjugated_pauli((pc, pt)) for pc in PAULI_LABELS for pt in PAULI_LABELS
}


@dataclass(frozen=True)
class TwirlInsertion:
    """Sampled Pauli frame around one CX instruction."""

    instruction_index: int
    control: int
    target: int
    prefix: tuple[str, str]
    suffix: tuple[str, str]
    spectators: dict[int, str]

    def to_json(self) -> dict:
        return {
            "instruction_index": self.instruction_index,
            "control": self.control,
            "target": self.target,
            "prefix": list(self.prefix),
            "suffix": list(self.suffix),
            "spectators": {str(q): p for q, p in sorted(self.spectators.items())},
        }


@dataclass(frozen=True)
class TwirlRecord:
    """Audit record of one randomized compilation."""

    seed: int
    insertions: tuple[TwirlInsertion, ...]

    def to_json(self) -> dict:
        return {"seed": self.seed, "insertions": [i.to_json() for i in self.insertions]}


def _pauli_gate(label: str, qubit: int) -> Gate:
    return Gate(label, (qubit,), virtual=True)


def randomized_compile(
    circuit: Circuit,
    snapshot: DeviceSnapshot,
    triplets: list[Triplet],
    seed: int,
) -> tuple[Circuit, TwirlRecord]:
    """Insert random Pauli frames around each CX and its active spectators.

    Per CX a uniform prefix pair is drawn and the unique suffix pair
    restoring the bare CX is appended; each active spectator from the CX's
    triplets receives the same random Pauli before and after.  Insertions
    are virtual (zero duration), so the schedule and activity pattern of
    the compiled circuit equal the original's, and the noiseless output
    distribution is unchanged for every seed.
    """
    sched = schedule(circuit, snapshot)
    spectators_of: dict[tuple[int, int], list[int]] = {}
    for t in triplets:
        spectators_of.setdefault((t.drive, t.target), []).append(t.spectator)

    out = Circuit(circuit.num_qubits)
    insertions = []
    cx_counter = 0
    for index, item in enumerate(sched.items):
        gate = item.gate
        if gate.kind != "CX":
            out.append(gate)
            continue
        control, target = gate.qubits
        edge = snapshot.edge(control, target)
        if (edge.drive, edge.target) != (control, target):
            raise ValueError(
                f"CX on ({control},{target}) opposes the native direction; run map_to_native first"
            )
        rng = stream(seed, "twirl", cx_counter)
        prefix = tuple(PAULI_LABELS[i] for i in rng.integers(0, 4, size=2))
        suffix = CX_TWIRL_SUFFIX[prefix]
        active = active_qubits(sched, item.start)
        spectator_paulis: dict[int, str] = {}
        for s in sorted(set(spectators_of.get((control, target), ()))):
            if s in active:
                spectator_paulis[s] = PAULI_LABELS[int(rng.integers(0, 4))]
        for local, q in enumerate((control, target)):
            if prefix[local] != "I":
                out.append(_pauli_gate(prefix[local], q))
        for s, p in sorted(spectator_paulis.items()):
            if p != "I":
                out.append(_pauli_gate(p, s))
        out.append(gate)
        for local, q in enumerate((control, target)):
            if suffix[local] != "I":
                out.append(_pauli_gate(suffix[local], q))
        for s, p in sorted(spectator_paulis.items()):
            if p != "I":
                out.append(_pauli_gate(p, s))
        insertions.append(
            TwirlInsertion(
                instruction_index=index,
                control=control,
                target=target,
                prefix=prefix,
                suffix=suffix,
                spectators=spectator_paulis,
            )
        )
        cx_counter += 1
    return out, TwirlRecord(seed=seed, insertions=tuple(insertions))
