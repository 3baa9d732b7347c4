"""Device topology, calibration data, and characterization planning.

Calibration snapshots are plain immutable records loaded from JSON.  On top
of them this module implements the planning steps of the characterization
pipeline: frequency-collision screening, extraction of (drive, target,
spectator) triplets, grouping of triplets into simultaneously runnable
batches, and enumeration of linear qubit chains for layout sweeps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Union

__all__ = [
    "CalibrationError",
    "QubitCalibration",
    "EdgeCalibration",
    "DeviceSnapshot",
    "Triplet",
    "Batch",
    "CollisionReport",
    "CollisionThresholds",
    "load_snapshot",
    "load_batches",
    "extract_triplets",
    "schedule_batches",
    "validate_batches",
    "enumerate_chains",
    "detect_collisions",
]


class CalibrationError(ValueError):
    """Raised when calibration data violates the snapshot schema or invariants."""


@dataclass(frozen=True)
class QubitCalibration:
    """Per-qubit calibration record.

    Frequencies are in GHz (anharmonicity = f12 - f01, negative for
    transmons), relaxation times in microseconds, durations in nanoseconds.
    """

    id: int
    frequency: float
    anharmonicity: float
    t1: float
    t2: float
    readout_p0_given_1: float
    readout_p1_given_0: float
    sq_error: float
    sq_duration: float

    def validate(self) -> None:
        if self.t1 <= 0:
            raise CalibrationError(f"qubit {self.id}: t1 must be positive, got {self.t1}")
        if not 0 < self.t2 <= 2 * self.t1:
            raise CalibrationError(
                f"qubit {self.id}: t2 must satisfy 0 < t2 <= 2*t1, got t2={self.t2}, t1={self.t1}"
            )
        for name in ("readout_p0_given_1", "readout_p1_given_0", "sq_error"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise CalibrationError(f"qubit {self.id}: {name} must lie in [0, 1], got {value}")
        if self.sq_duration < 0:
            raise CalibrationError(f"qubit {self.id}: sq_duration must be >= 0")

    @property
    def f12(self) -> float:
        """Frequency of the 1->2 transition in GHz."""
        return self.frequency + self.anharmonicity


@dataclass(frozen=True)
class EdgeCalibration:
    """Calibrated two-qubit gate on a coupled pair.

    `drive` is the qubit receiving the cross-resonance pulse; the native
    CNOT of the pair is controlled by it.
    """

    drive: int
    target: int
    cx_error: float
    cx_duration: float

    def validate(self) -> None:
        if self.drive == self.target:
            raise CalibrationError(f"edge ({self.drive},{self.target}): drive == target")
        if not 0.0 <= self.cx_error <= 1.0:
            raise CalibrationError(
                f"edge ({self.drive},{self.target}): cx_error must lie in [0, 1], got {self.cx_error}"
            )
        if self.cx_duration < 0:
            raise CalibrationError(f"edge ({self.drive},{self.target}): cx_duration must be >= 0")

    @property
    def pair(self) -> frozenset[int]:
        return frozenset((self.drive, self.target))


@dataclass(frozen=True)
class DeviceSnapshot:
    """Topology plus calibration of a device at one point in time."""

    qubits: tuple[QubitCalibration, ...]
    edges: tuple[EdgeCalibration, ...]
    name: str = ""
    timestamp: str = ""
    _adjacency: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        ids = [q.id for q in self.qubits]
        if len(ids) != len(set(ids)):
            raise CalibrationError("qubit ids are not unique")
        if not ids:
            raise CalibrationError("snapshot contains no qubits")
        for q in self.qubits:
            q.validate()
        known = set(ids)
        adjacency: dict[int, set[int]] = {i: set() for i in ids}
        seen_pairs = set()
        for e in self.edges:
            e.validate()
            if e.drive not in known or e.target not in known:
                raise CalibrationError(f"edge ({e.drive},{e.target}) references unknown qubit")
            if e.pair in seen_pairs:
                raise CalibrationError(f"duplicate edge ({e.drive},{e.target})")
            seen_pairs.add(e.pair)
            adjacency[e.drive].add(e.target)
            adjacency[e.target].add(e.drive)
        if len(ids) > 1:
            reached = {ids[0]}
            frontier = [ids[0]]
            while frontier:
                cur = frontier.pop()
                for nxt in adjacency[cur]:
                    if nxt not in reached:
                        reached.add(nxt)
                        frontier.append(nxt)
            if reached != known:
                raise CalibrationError("coupling graph is not connected")
        object.__setattr__(self, "_adjacency", {k: frozenset(v) for k, v in adjacency.items()})

    @property
    def num_qubits(self) -> int:
        return len(self.qubits)

    def qubit(self, qubit_id: int) -> QubitCalibration:
        for q in self.qubits:
            if q.id == qubit_id:
                return q
        raise KeyError(f"no qubit {qubit_id} in snapshot")

    def neighbors(self, qubit_id: int) -> frozenset[int]:
        return self._adjacency[qubit_id]

    def edge(self, a: int, b: int) -> EdgeCalibration:
        """Calibrated edge covering {a, b} in either orientation."""
        want = frozenset((a, b))
        for e in self.edges:
            if e.pair == want:
                return e
        raise KeyError(f"no edge between qubits {a} and {b}")

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adjacency.get(a, frozenset())

    def undirected_edges(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted((e.drive, e.target))) for e in self.edges)


@dataclass(frozen=True, order=True)
class Triplet:
    """A directed calibrated pair plus one spectator adjacent to the drive."""

    drive: int
    target: int
    spectator: int

    @property
    def qubits(self) -> frozenset[int]:
        return frozenset((self.drive, self.target, self.spectator))

    def validate(self, snapshot: DeviceSnapshot) -> None:
        edge = snapshot.edge(self.drive, self.target)
        if edge.drive != self.drive:
            raise CalibrationError(
                f"triplet {self}: calibrated drive of edge is {edge.drive}, not {self.drive}"
            )
        if self.spectator in (self.drive, self.target):
            raise CalibrationError(f"triplet {self}: spectator coincides with the pair")
        if self.spectator not in snapshot.neighbors(self.drive):
            raise CalibrationError(f"triplet {self}: spectator not adjacent to drive")

    def to_json(self) -> dict:
        return {"pair": [self.drive, self.target], "spectator": self.spectator}

    @classmethod
    def from_json(cls, obj: dict) -> "Triplet":
        (drive, target) = obj["pair"]
        return cls(drive=int(drive), target=int(target), spectator=int(obj["spectator"]))


@dataclass(frozen=True)
class Batch:
    """A set of triplets characterized simultaneously."""

    triplets: frozenset[Triplet]

    def sorted(self) -> list[Triplet]:
        return sorted(self.triplets)


@dataclass(frozen=True)
class CollisionReport:
    """A near-resonance between transition frequencies of related qubits."""

    rule_id: str
    qubits: tuple[int, ...]
    detuning: float

    def to_json(self) -> dict:
        return {"rule": self.rule_id, "qubits": list(self.qubits), "detuning_ghz": self.detuning}


@dataclass(frozen=True)
class CollisionThresholds:
    """Per-rule detuning bounds in GHz.

    No thresholds are reported with the calibration data, so a single
    configurable default is used for all four rules.
    """

    r1: float = 0.017
    r2: float = 0.017
    r3: float = 0.017
    r4: float = 0.017

    def validate(self) -> None:
        for name in ("r1", "r2", "r3", "r4"):
            if getattr(self, name) <= 0:
                raise ValueError(f"collision threshold {name} must be positive")

    @classmethod
    def from_json(cls, obj: dict) -> "CollisionThresholds":
        return cls(**{k: float(v) for k, v in obj.items() if k in ("r1", "r2", "r3", "r4")})


_QUBIT_KEYS = {
    "id": "id",
    "frequency_ghz": "frequency",
    "anharmonicity_ghz": "anharmonicity",
    "t1_us": "t1",
    "t2_us": "t2",
    "readout_p0_given_1": "readout_p0_given_1",
    "readout_p1_given_0": "readout_p1_given_0",
    "sq_error": "sq_error",
    "sq_duration_ns": "sq_duration",
}

_EDGE_KEYS = {
    "drive": "drive",
    "target": "target",
    "cx_error": "cx_error",
    "cx_duration_ns": "cx_duration",
}


def load_snapshot(source: Union[bytes, str, IO]) -> DeviceSnapshot:
    """Parse a calibration JSON document into a validated DeviceSnapshot.

    `source` may be a bytes/str payload or a readable file object.  Unknown
    fields are ignored; missing fields and invariant violations raise
    CalibrationError naming the offending field.
    """
    if hasattr(source, "read"):
        payload = source.read()
    else:
        payload = source
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise CalibrationError(f"calibration JSON does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise CalibrationError("calibration document must be a JSON object")

    def convert(obj, keymap, cls, what):
        kwargs = {}
        for key, attr in keymap.items():
            if key not in obj:
                raise CalibrationError(f"{what} is missing required field '{key}'")
            value = obj[key]
            kwargs[attr] = int(value) if attr in ("id", "drive", "target") else float(value)
        return cls(**kwargs)

    qubits = tuple(
        convert(q, _QUBIT_KEYS, QubitCalibration, f"qubit entry {i}")
        for i, q in enumerate(doc.get("qubits", []))
    )
    edges = tuple(
        convert(e, _EDGE_KEYS, EdgeCalibration, f"edge entry {i}")
        for i, e in enumerate(doc.get("edges", []))
    )
    return DeviceSnapshot(
        qubits=qubits,
        edges=edges,
        name=str(doc.get("name", "")),
        timestamp=str(doc.get("timestamp", "")),
    )


def load_batches(source: Union[bytes, str, IO]) -> list[Batch]:
    """Parse a batch-assignment JSON document (list of lists of triplets)."""
    if hasattr(source, "read"):
        payload = source.read()
    else:
        payload = source
    if isinstance(payload, bytes):
        payload = payload.decode("utf-8")
    doc = json.loads(payload)
    return [Batch(frozenset(Triplet.from_json(t) for t in group)) for group in doc]


def batches_to_json(batches: Iterable[Batch]) -> list:
    return [[t.to_json() for t in b.sorted()] for b in batches]


def extract_triplets(snapshot: DeviceSnapshot) -> list[Triplet]:
    """One triplet per (calibrated edge, spectator adjacent to its drive).

    Spectators range over the neighbors of the drive qubit excluding the
    target.  The result is sorted by (drive, target, spectator).
    """
    triplets = []
    for e in snapshot.edges:
        for spectator in snapshot.neighbors(e.drive):
            if spectator != e.target:
                triplets.append(Triplet(e.drive, e.target, spectator))
    return sorted(triplets)


def _conflict(a: Triplet, b: Triplet, snapshot: DeviceSnapshot, separated: bool) -> bool:
    qa, qb = a.qubits, b.qubits
    if qa & qb:
        return True
    if separated:
        for x in qa:
            if snapshot.neighbors(x) & qb:
                return True
    return False


def schedule_batches(
    triplets: list[Triplet],
    snapshot: DeviceSnapshot,
    *,
    separated: bool = True,
) -> list[Batch]:
    """Greedy smallest-index coloring of the triplet conflict graph.

    With `separated` (the default) two triplets conflict if they share a
    qubit or any of their qubits are adjacent on the topology; without it
    only qubit sharing conflicts.  Deterministic given the sorted triplet
    order.
    """
    for t in triplets:
        t.validate(snapshot)
    order = sorted(set(triplets))
    colors: list[list[Triplet]] = []
    for t in order:
        for group in colors:
            if not any(_conflict(t, other, snapshot, separated) for other in group):
                group.append(t)
                break
        else:
            colors.append([t])
    return [Batch(frozenset(group)) for group in colors]


def validate_batches(
    batches: list[Batch],
    snapshot: DeviceSnapshot,
    *,
    triplets: list[Triplet] | None = None,
    separated: bool = False,
) -> list[str]:
    """Check batch validity; returns a list of human-readable violations.

    Within a batch, sharing a qubit always violates; with `separated=True`
    adjacency between triplet qubit sets violates as well.  When `triplets`
    is given, the union of the batches must cover each exactly once.  An
    empty return value means the batches are valid.
    """
    violations = []
    seen: dict[Triplet, int] = {}
    for bi, batch in enumerate(batches):
        members = batch.sorted()
        for t in members:
            try:
                t.validate(snapshot)
            except (CalibrationError, KeyError) as exc:
                violations.append(f"batch {bi}: invalid triplet {t}: {exc}")
            if t in seen:
                violations.append(f"batch {bi}: triplet {t} already assigned to batch {seen[t]}")
            seen[t] = bi
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                a, b = members[i], members[j]
                shared = a.qubits & b.qubits
                if shared:
                    violations.append(
                        f"batch {bi}: triplets {a} and {b} share qubits {sorted(shared)}"
                    )
                elif separated and _conflict(a, b, snapshot, separated=True):
                    violations.append(f"batch {bi}: triplets {a} and {b} are adjacent")
    if triplets is not None:
        want = set(triplets)
        got = set(seen)
        for t in sorted(want - got):
            violations.append(f"coverage: triplet {t} not assigned to any batch")
        for t in sorted(got - want):
            violations.append(f"coverage: triplet {t} not among the input triplets")
    return violations


def enumerate_chains(
    snapshot: DeviceSnapshot,
    length: int,
    *,
    include_reversed: bool = True,
) -> list[tuple[int, ...]]:
    """All simple paths of `length` vertices in the coupling graph, sorted.

    By default both orientations of each chain are returned, matching the
    layout counting used for the benchmark sweeps.  With
    `include_reversed=False` reversal duplicates are removed by keeping the
    lexicographically smaller orientation.
    """
    if not 1 <= length <= snapshot.num_qubits:
        raise ValueError(f"chain length must lie in [1, {snapshot.num_qubits}], got {length}")
    found: set[tuple[int, ...]] = set()

    def extend(path: list[int], used: set[int]) -> None:
        if len(path) == length:
            chain = tuple(path)
            if include_reversed:
                found.add(chain)
            else:
                found.add(min(chain, tuple(reversed(chain))))
            return
        for nxt in snapshot.neighbors(path[-1]):
            if nxt not in used:
                path.append(nxt)
                used.add(nxt)
                extend(path, used)
                path.pop()
                used.remove(nxt)

    for q in snapshot._adjacency:
        extend([q], {q})
    return sorted(found)


def detect_collisions(
    snapshot: DeviceSnapshot,
    thresholds: CollisionThresholds | None = None,
) -> list[CollisionReport]:
    """Scan the snapshot for near-resonances between related qubits.

    R1: adjacent qubits with f01(A) ~ f01(B); reported once per unordered
        pair with qubits ordered by id and detuning f01(low) - f01(high).
    R2: adjacent qubits with f01(A) ~ f12(B); directed, reported per (A, B).
    R3: target and spectator of a calibrated edge (both adjacent to the
        drive) with f01(target) ~ f01(spectator).
    R4: same pairs with f01(target) ~ f12(spectator).
    """
    thresholds = thresholds or CollisionThresholds()
    thresholds.validate()
    cal = {q.id: q for q in snapshot.qubits}
    reports = []
    for a, b in snapshot.undirected_edges():
        d1 = cal[a].frequency - cal[b].frequency
        if abs(d1) < thresholds.r1:
            reports.append(CollisionReport("R1", (a, b), d1))
        for x, y in ((a, b), (b, a)):
            d2 = cal[x].frequency - cal[y].f12
            if abs(d2) < thresholds.r2:
                reports.append(CollisionReport("R2", (x, y), d2))
    for t in extract_triplets(snapshot):
        d3 = cal[t.target].frequency - cal[t.spectator].frequency
        if abs(d3) < thresholds.r3:
            reports.append(CollisionReport("R3", (t.target, t.spectator), d3))
        d4 = cal[t.target].frequency - cal[t.spectator].f12
        if abs(d4) < thresholds.r4:
            reports.append(CollisionReport("R4", (t.target, t.spectator), d4))
    reports.sort(key=lambda r: (r.rule_id, r.qubits))
    return reports
