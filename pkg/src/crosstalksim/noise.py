"""Kraus channels, calibration-matched noise models, and crosstalk handling.

Channel constructors follow the standard amplitude/phase-damping and
depolarizing forms.  Model builders attach, per gate, thermal relaxation
over the gate duration composed with a depolarizing channel whose strength
is solved so that the composite's average error rate equals the calibrated
rate; readout errors and idle-time relaxation complete the model.

The crosstalk-aware model is bound to one circuit's schedule: a CX whose
drive qubit has an active neighbor at gate time takes its error rate from
the simultaneously characterized table (largest over active spectators),
and each active spectator receives an identity slot carrying the table's
single-qubit rate.  A separate injection mechanism composes correlated
three-qubit depolarizing onto firing triplets and serves as the ground
truth of the virtual backend.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Schedule, active_qubits, schedule as make_schedule
from .device import DeviceSnapshot, Triplet

__all__ = [
    "KrausChannel",
    "ThermalRelaxationParams",
    "DepolarizingParams",
    "NoiseModel",
    "BoundNoiseModel",
    "CrosstalkTable",
    "CrosstalkInjection",
    "thermal_relaxation",
    "thermal_relaxation_params",
    "depolarizing",
    "rate_to_depol",
    "depol_to_rate",
    "average_error",
    "build_standard_model",
    "build_crosstalk_model",
    "bind_model",
    "inject_crosstalk",
]

CPTP_TOL = 1e-12


@dataclass(frozen=True)
class KrausChannel:
    """A CPTP map given by Kraus operators on `arity` qubits."""

    arity: int
    operators: tuple[np.ndarray, ...]
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        dim = 2**self.arity
        for op in self.operators:
            if op.shape != (dim, dim):
                raise ValueError(f"Kraus operator shape {op.shape} does not match arity {self.arity}")
        total = sum(op.conj().T @ op for op in self.operators)
        if np.abs(total - np.eye(dim)).max() > CPTP_TOL:
            raise ValueError("channel is not trace preserving (sum E^dag E != I)")

    def compose(self, after: "KrausChannel") -> "KrausChannel":
        """Channel equal to applying self first, then `after` (same qubits)."""
        if after.arity != self.arity:
            raise ValueError("cannot compose channels of different arity")
        ops = tuple(b @ a for a in self.operators for b in after.operators)
        return KrausChannel(self.arity, ops, label=f"{self.label}*{after.label}")

    def entanglement_fidelity(self) -> float:
        d = 2**self.arity
        return float(sum(abs(np.trace(op)) ** 2 for op in self.operators) / d**2)


def average_error(channel: KrausChannel) -> float:
    """Average gate error 1 - (d F_e + 1)/(d + 1) from the Kraus operators."""
    d = 2**channel.arity
    return 1.0 - (d * channel.entanglement_fidelity() + 1.0) / (d + 1.0)


@dataclass(frozen=True)
class ThermalRelaxationParams:
    """Decay probabilities for relaxation over `duration` (ns) with t1/t2 (us)."""

    t1: float
    t2: float
    duration: float
    p_ad: float
    p_pd: float
    gamma: float
    lam: float


def thermal_relaxation_params(t1: float, t2: float, duration: float) -> ThermalRelaxationParams:
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    if not 0 < t2 <= 2 * t1:
        raise ValueError("t2 must satisfy 0 < t2 <= 2*t1")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    t_us = duration * 1e-3
    p_ad = 1.0 - math.exp(-t_us / t1)
    # sqrt((1-p_ad)(1-p_pd)) = exp(-t/T2)
    p_pd = 1.0 - math.exp(t_us / t1 - 2.0 * t_us / t2)
    p_pd = min(max(p_pd, 0.0), 1.0)
    gamma = p_ad
    lam = (1.0 - p_ad) * p_pd
    return ThermalRelaxationParams(t1, t2, duration, p_ad, p_pd, gamma, lam)


def thermal_relaxation(t1: float, t2: float, duration: float) -> KrausChannel:
    """Single-qubit amplitude plus phase damping over `duration` nanoseconds.

    Kraus operators: diag(1, sqrt(1-gamma-lambda)), sqrt(gamma)|0><1|,
    sqrt(lambda)|1><1| with gamma = p_AD and lambda = (1-p_AD) p_PD.
    """
    p = thermal_relaxation_params(t1, t2, duration)
    e1 = np.array([[1.0, 0.0], [0.0, math.sqrt(max(1.0 - p.gamma - p.lam, 0.0))]], dtype=complex)
    e2 = np.array([[0.0, math.sqrt(p.gamma)], [0.0, 0.0]], dtype=complex)
    e3 = np.array([[0.0, 0.0], [0.0, math.sqrt(p.lam)]], dtype=complex)
    return KrausChannel(
        1,
        (e1, e2, e3),
        label="thermal_relaxation",
        params={"t1": t1, "t2": t2, "duration": duration, "gamma": p.gamma, "lambda": p.lam},
    )


@dataclass(frozen=True)
class DepolarizingParams:
    arity: int
    p: float
    lambda_total: float


_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def depolarizing(arity: int, p: float) -> KrausChannel:
    """Uniform Pauli channel: sqrt(1-(4^a-1)p) I plus sqrt(p) per nontrivial Pauli."""
    if arity < 1:
        raise ValueError("arity must be at least 1")
    if p < 0 or p * 4**arity > 1 + 1e-15:
        raise ValueError(f"per-Pauli probability {p} out of range for arity {arity}")
    p = min(p, 1.0 / 4**arity)
    ops = []
    for combo in itertools.product(range(4), repeat=arity):
        mat = np.array([[1.0 + 0j]])
        for c in reversed(combo):
            mat = np.kron(mat, _PAULI_1Q[c])
        if all(c == 0 for c in combo):
            ops.append(math.sqrt(max(1.0 - (4**arity - 1) * p, 0.0)) * mat)
        else:
            ops.append(math.sqrt(p) * mat)
    return KrausChannel(
        arity,
        tuple(ops),
        label="depolarizing",
        params={"p": p, "lambda_total": p * 4**arity},
    )


def rate_to_depol(r: float, arity: int) -> DepolarizingParams:
    """Per-Pauli probability whose channel has average error rate `r`."""
    d = 2**arity
    if not 0 <= r <= (d - 1) / d + 1e-15:
        raise ValueError(f"average error rate {r} out of range for dimension {d}")
    lambda_total = r * d / (d - 1)
    return DepolarizingParams(arity=arity, p=lambda_total / 4**arity, lambda_total=lambda_total)


def depol_to_rate(params: DepolarizingParams) -> float:
    d = 2**params.arity
    return params.lambda_total * (d - 1) / d


@dataclass(frozen=True)
class CrosstalkTable:
    """Simultaneously characterized error rates per triplet."""

    rates: dict[Triplet, tuple[float, float]]  # (cx_sim_error, sq_sim_error)

    def __post_init__(self):
        for t, (cx, sq) in self.rates.items():
            if not (0 <= cx <= 1 and 0 <= sq <= 1):
                raise ValueError(f"rates for {t} out of [0, 1]: ({cx}, {sq})")

    def get(self, triplet: Triplet) -> tuple[float, float] | None:
        return self.rates.get(triplet)

    def to_json(self) -> list:
        return [
            {
                "pair": [t.drive, t.target],
                "spectator": t.spectator,
                "cx_sim_error": cx,
                "sq_sim_error": sq,
            }
            for t, (cx, sq) in sorted(self.rates.items())
        ]

    @classmethod
    def from_json(cls, doc: list) -> "CrosstalkTable":
        rates = {}
        for row in doc:
            t = Triplet(int(row["pair"][0]), int(row["pair"][1]), int(row["spectator"]))
            rates[t] = (float(row["cx_sim_error"]), float(row["sq_sim_error"]))
        return cls(rates)


@dataclass(frozen=True)
class CrosstalkInjection:
    """Ground-truth correlated error weights for the virtual backend."""

    weights: dict[Triplet, float]

    def __post_init__(self):
        for t, w in self.weights.items():
            if not 0 <= w <= 1:
                raise ValueError(f"injection weight for {t} out of [0, 1]: {w}")

    def to_json(self) -> list:
        return [
            {"pair": [t.drive, t.target], "spectator": t.spectator, "weight": w}
            for t, w in sorted(self.weights.items())
        ]

    @classmethod
    def from_json(cls, doc: list) -> "CrosstalkInjection":
        return cls(
            {
                Triplet(int(r["pair"][0]), int(r["pair"][1]), int(r["spectator"])): float(r["weight"])
                for r in doc
            }
        )


def _solve_depol_weight(base_fidelity: float, target_rate: float, d: int) -> tuple[float, bool]:
    """lambda such that depol(lambda) after a channel of process fidelity
    `base_fidelity` has average error `target_rate`; clamped to [0, 1]."""
    f_target = ((d + 1) * (1.0 - target_rate) - 1.0) / d
    denom = base_fidelity - 1.0 / d**2
    if denom <= 0:
        return 0.0, True
    lam = (base_fidelity - f_target) / denom
    if lam < 0:
        return 0.0, True
    if lam > 1:
        return 1.0, True
    return lam, False


@dataclass(frozen=True)
class NoiseModel:
    """Circuit-independent gate noise: calibration-matched channels per gate."""

    snapshot: DeviceSnapshot
    sq_channels: dict[int, tuple[KrausChannel, ...]]
    cx_channels: dict[tuple[int, int], tuple[tuple[tuple[int, ...], KrausChannel], ...]]
    readout: dict[int, tuple[float, float]]
    idle_relaxation: bool = True
    warnings: tuple[str, ...] = ()

    def to_report(self) -> dict:
        report = {"idle_relaxation": self.idle_relaxation, "warnings": list(self.warnings)}
        report["single_qubit"] = {
            str(q): [
                {"label": ch.label, "params": {k: v for k, v in ch.params.items()}}
                for ch in chans
            ]
            for q, chans in sorted(self.sq_channels.items())
        }
        report["cx"] = {
            f"{d}-{t}": [
                {"qubits": list(qs), "label": ch.label, "params": dict(ch.params)}
                for qs, ch in chans
            ]
            for (d, t), chans in sorted(self.cx_channels.items())
        }
        report["readout"] = {
            str(q): {"p0_given_1": a, "p1_given_0": b} for q, (a, b) in sorted(self.readout.items())
        }
        return report


def build_standard_model(snapshot: DeviceSnapshot) -> NoiseModel:
    """Calibration-based model: relaxation plus matched depolarizing per gate.

    Per gate, thermal relaxation over the gate duration is composed with a
    depolarizing channel tuned so the composite average error equals the
    calibrated rate; if decoherence alone already exceeds the calibrated
    rate the depolarizing weight clamps at zero and a warning is recorded.
    """
    warnings = []
    sq_channels = {}
    for q in snapshot.qubits:
        relax = thermal_relaxation(q.t1, q.t2, q.sq_duration)
        lam, clamped = _solve_depol_weight(relax.entanglement_fidelity(), q.sq_error, 2)
        if clamped:
            warnings.append(
                f"qubit {q.id}: depolarizing weight clamped (sq_error {q.sq_error} vs decoherence floor)"
            )
        depol = depolarizing(1, lam / 4)
        sq_channels[q.id] = (relax, depol)
    cx_channels = {}
    for e in snapshot.edges:
        qd = snapshot.qubit(e.drive)
        qt = snapshot.qubit(e.target)
        relax_d = thermal_relaxation(qd.t1, qd.t2, e.cx_duration)
        relax_t = thermal_relaxation(qt.t1, qt.t2, e.cx_duration)
        base_fidelity = relax_d.entanglement_fidelity() * relax_t.entanglement_fidelity()
        lam, clamped = _solve_depol_weight(base_fidelity, e.cx_error, 4)
        if clamped:
            warnings.append(
                f"edge ({e.drive},{e.target}): depolarizing weight clamped "
                f"(cx_error {e.cx_error} vs decoherence floor)"
            )
        depol = depolarizing(2, lam / 16)
        cx_channels[(e.drive, e.target)] = (
            ((e.drive,), relax_d),
            ((e.target,), relax_t),
            ((e.drive, e.target), depol),
        )
    readout = {q.id: (q.readout_p0_given_1, q.readout_p1_given_0) for q in snapshot.qubits}
    return NoiseModel(
        snapshot=snapshot,
        sq_channels=sq_channels,
        cx_channels=cx_channels,
        readout=readout,
        idle_relaxation=True,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class BoundNoiseModel:
    """Noise attached to one circuit's schedule.

    `instruction_channels[i]` lists (qubits, channel) applied right after
    instruction i, in order.  Idle relaxation, if enabled, is applied by the
    executor over the scheduled idle gaps using the snapshot's T1/T2.
    """

    snapshot: DeviceSnapshot
    schedule: Schedule
    instruction_channels: dict[int, tuple[tuple[tuple[int, ...], KrausChannel], ...]]
    readout: dict[int, tuple[float, float]]
    idle_relaxation: bool
    warnings: tuple[str, ...] = ()

    def with_extra(self, extra: dict[int, list[tuple[tuple[int, ...], KrausChannel]]],
                   warnings: tuple[str, ...] = ()) -> "BoundNoiseModel":
        merged = {i: list(chans) for i, chans in self.instruction_channels.items()}
        for i, chans in extra.items():
            merged.setdefault(i, []).extend(chans)
        return BoundNoiseModel(
            snapshot=self.snapshot,
            schedule=self.schedule,
            instruction_channels={i: tuple(c) for i, c in merged.items()},
            readout=self.readout,
            idle_relaxation=self.idle_relaxation,
            warnings=self.warnings + warnings,
        )


def bind_model(model: NoiseModel, circuit: Circuit) -> BoundNoiseModel:
    """Attach a circuit-independent model to one circuit's schedule."""
    sched = make_schedule(circuit, model.snapshot)
    channels: dict[int, tuple] = {}
    for index, item in enumerate(sched.items):
        gate = item.gate
        if gate.virtual or gate.kind in ("BARRIER", "DELAY", "MEASURE", "RZ"):
            continue
        if gate.kind == "CX":
            key = tuple(gate.qubits)
            if key not in model.cx_channels:
                raise ValueError(
                    f"CX on {key} opposes the calibrated direction; run map_to_native first"
                )
            channels[index] = model.cx_channels[key]
        else:
            q = gate.qubits[0]
            channels[index] = tuple(((q,), ch) for ch in model.sq_channels[q])
    return BoundNoiseModel(
        snapshot=model.snapshot,
        schedule=sched,
        instruction_channels=channels,
        readout=dict(model.readout),
        idle_relaxation=model.idle_relaxation,
        warnings=model.warnings,
    )


def build_crosstalk_model(
    snapshot: DeviceSnapshot,
    table: CrosstalkTable,
    circuit: Circuit,
    *,
    triplets: list[Triplet] | None = None,
    standard: NoiseModel | None = None,
    table_scale: str = "per_clifford",
) -> BoundNoiseModel:
    """Crosstalk-aware model bound to this circuit's schedule.

    CX gates whose triplet spectators are active at gate time take the
    largest simultaneously characterized pair rate over those spectators,
    and each active spectator receives an identity slot with the table's
    single-qubit rate; CX gates with no active spectator keep calibration
    rates.  Triplets absent from the table fall back to snapshot rates.

    Characterization tables hold error per Clifford layer; with the default
    `table_scale="per_clifford"` the rates are rescaled to gate-equivalent
    strengths by the mean CX count of a two-qubit Clifford, putting them on
    the same footing as the calibration data.  Pass "per_gate" for tables
    already on the calibration scale.
    """
    from .device import extract_triplets
    from .tableau import average_cx_per_clifford

    if table_scale == "per_clifford":
        scale = 1.0 / average_cx_per_clifford(2)
    elif table_scale == "per_gate":
        scale = 1.0
    else:
        raise ValueError(f"unknown table scale {table_scale!r}")
    base = standard if standard is not None else build_standard_model(snapshot)
    bound = bind_model(base, circuit)
    if triplets is None:
        triplets = extract_triplets(snapshot)
    by_pair: dict[tuple[int, int], list[Triplet]] = {}
    for t in triplets:
        by_pair.setdefault((t.drive, t.target), []).append(t)

    channels = dict(bound.instruction_channels)
    warnings = list(bound.warnings)
    for index, item in enumerate(bound.schedule.items):
        gate = item.gate
        if gate.kind != "CX" or gate.virtual:
            continue
        pair = tuple(gate.qubits)
        active = active_qubits(bound.schedule, item.start)
        hot: list[tuple[Triplet, float, float]] = []
        for t in by_pair.get(pair, ()):  # type: ignore[arg-type]
            if t.spectator not in active:
                continue
            rates = table.get(t)
            if rates is None:
                rates = (
                    snapshot.edge(*pair).cx_error,
                    snapshot.qubit(t.spectator).sq_error,
                )
            else:
                rates = (rates[0] * scale, rates[1] * scale)
            hot.append((t, rates[0], rates[1]))
        if not hot:
            continue
        cx_rate = max(r for _, r, _ in hot)
        edge = snapshot.edge(*pair)
        qd = snapshot.qubit(edge.drive)
        qt = snapshot.qubit(edge.target)
        relax_d = thermal_relaxation(qd.t1, qd.t2, edge.cx_duration)
        relax_t = thermal_relaxation(qt.t1, qt.t2, edge.cx_duration)
        base_fid = relax_d.entanglement_fidelity() * relax_t.entanglement_fidelity()
        lam, clamped = _solve_depol_weight(base_fid, cx_rate, 4)
        if clamped:
            warnings.append(f"instruction {index}: crosstalk cx rate {cx_rate} clamped")
        entries = [
            ((edge.drive,), relax_d),
            ((edge.target,), relax_t),
            ((edge.drive, edge.target), depolarizing(2, lam / 16)),
        ]
        for t, _, sq_rate in hot:
            entries.append(((t.spectator,), depolarizing(1, rate_to_depol(sq_rate, 1).p)))
        channels[index] = tuple(entries)
    return BoundNoiseModel(
        snapshot=snapshot,
        schedule=bound.schedule,
        instruction_channels=channels,
        readout=bound.readout,
        idle_relaxation=bound.idle_relaxation,
        warnings=tuple(warnings),
    )


def inject_crosstalk(
    model: NoiseModel | BoundNoiseModel,
    injection: CrosstalkInjection,
    circuit: Circuit,
) -> BoundNoiseModel:
    """Compose ground-truth correlated depolarizing onto firing triplets.

    Whenever a CX fires on an injected triplet's pair while the triplet's
    spectator is active, a three-qubit depolarizing channel of the injected
    weight is appended on (drive, target, spectator).
    """
    bound = model if isinstance(model, BoundNoiseModel) else bind_model(model, circuit)
    by_pair: dict[tuple[int, int], list[tuple[Triplet, float]]] = {}
    for t, w in injection.weights.items():
        by_pair.setdefault((t.drive, t.target), []).append((t, w))
    extra: dict[int, list] = {}
    for index, item in enumerate(bound.schedule.items):
        gate = item.gate
        if gate.kind != "CX" or gate.virtual:
            continue
        pair = tuple(gate.qubits)
        if pair not in by_pair:
            continue
        active = active_qubits(bound.schedule, item.start)
        for t, w in by_pair[pair]:
            if w > 0 and t.spectator in active:
                extra.setdefault(index, []).append(
                    ((t.drive, t.target, t.spectator), depolarizing(3, w / 64))
                )
    return bound.with_extra(extra)
