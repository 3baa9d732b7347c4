"""Randomized benchmarking: sequence construction, decay fitting, and
simultaneous triplet characterization.

Sequences are uniform random Cliffords closed by the tableau-computed
inverse, with a barrier over the benchmarked qubits after every Clifford
layer.  Simultaneous circuits interleave two-qubit benchmarking on a
calibrated pair with single-qubit benchmarking on the spectator, barriered
over the whole triplet so the layers stay aligned; the spectator's short
layers are padded by the scheduler, which is what exposes idle decoherence.
Pair and spectator survivals are read from the same shots of the same
circuits, marginalized per subsystem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .backend import VirtualBackend
from .circuit import Circuit, Gate
from .device import Batch, Triplet
from .noise import CrosstalkTable
from .rng import stream
from . import tableau as _tableau

__all__ = [
    "RBConfig",
    "PAPER_CONFIG",
    "DESK_CONFIG",
    "RBPoint",
    "DecayFit",
    "FitError",
    "SampledClifford",
    "sample_clifford",
    "build_rb_circuits",
    "build_simultaneous_rb",
    "fit_decay",
    "run_rb",
    "characterize",
]


@dataclass(frozen=True)
class RBConfig:
    """Sequence lengths, repetitions per length, shots per circuit, seed."""

    lengths: tuple[int, ...]
    repetitions: int
    shots: int
    seed: int = 0

    def __post_init__(self):
        if not self.lengths or any(m < 1 for m in self.lengths):
            raise ValueError("lengths must be positive")
        if list(self.lengths) != sorted(set(self.lengths)):
            raise ValueError("lengths must be strictly increasing")
        if self.repetitions < 1 or self.shots < 1:
            raise ValueError("repetitions and shots must be positive")

    def replace(self, **kwargs) -> "RBConfig":
        data = {
            "lengths": self.lengths,
            "repetitions": self.repetitions,
            "shots": self.shots,
            "seed": self.seed,
        }
        data.update(kwargs)
        return RBConfig(**data)


PAPER_CONFIG = RBConfig(lengths=(1, 3, 10, 20, 40, 65, 95, 130, 175), repetitions=5, shots=10_000)
DESK_CONFIG = RBConfig(lengths=(1, 5, 20, 60), repetitions=3, shots=2000)


@dataclass(frozen=True)
class RBPoint:
    length: int
    survival: float
    stderr: float


@dataclass(frozen=True)
class DecayFit:
    """Parameters of survival(m) = A alpha^m + B and the derived error rate."""

    a: float
    b: float
    alpha: float
    r: float
    residual: float
    stderr_alpha: float = 0.0
    stderr_r: float = 0.0

    def to_json(self) -> dict:
        return {
            "A": self.a,
            "B": self.b,
            "alpha": self.alpha,
            "r": self.r,
            "residual": self.residual,
            "stderr_alpha": self.stderr_alpha,
            "stderr_r": self.stderr_r,
        }


class FitError(RuntimeError):
    """Raised when the decay fit does not converge."""


@dataclass(frozen=True)
class SampledClifford:
    tableau: _tableau.CliffordTableau
    gates: tuple[tuple[str, tuple[int, ...]], ...]


def sample_clifford(n: int, rng: np.random.Generator) -> SampledClifford:
    """Uniform Clifford on n qubits with its basis-gate decomposition."""
    tab = _tableau.random_clifford(n, rng)
    return SampledClifford(tableau=tab, gates=tuple(_tableau.decompose(tab)))


def _emit(circuit: Circuit, gates, qubit_map: tuple[int, ...]) -> None:
    for kind, local in gates:
        circuit.append(Gate(kind, tuple(qubit_map[q] for q in local)))


def _sequence_with_inverse(n: int, m: int, rng: np.random.Generator):
    samples = [sample_clifford(n, rng) for _ in range(m)]
    inverse = _tableau.clifford_inverse([s.tableau for s in samples])
    return samples, _tableau.decompose(inverse)


def build_rb_circuits(
    qubits: tuple[int, ...],
    config: RBConfig,
) -> list[tuple[int, int, Circuit]]:
    """Isolated benchmarking circuits on one qubit or one calibrated pair.

    Each circuit is m random Cliffords plus the inverse, a barrier over the
    targets after every layer, and terminal measurements; its noiseless
    output is all zeros with probability one.
    """
    n = len(qubits)
    if n not in (1, 2):
        raise ValueError("benchmarking targets one qubit or one pair")
    out = []
    num_qubits = max(qubits) + 1
    for m in config.lengths:
        for rep in range(config.repetitions):
            rng = stream(config.seed, "rb", n, *qubits, m, rep)
            samples, inverse_gates = _sequence_with_inverse(n, m, rng)
            circuit = Circuit(num_qubits)
            for s in samples:
                _emit(circuit, s.gates, qubits)
                circuit.barrier(*qubits)
            _emit(circuit, inverse_gates, qubits)
            circuit.barrier(*qubits)
            for q in qubits:
                circuit.measure(q)
            out.append((m, rep, circuit))
    return out


def _emit_simultaneous(circuit: Circuit, triplet: Triplet, m: int, rep: int, config: RBConfig) -> None:
    pair = (triplet.drive, triplet.target)
    spect = (triplet.spectator,)
    key = (triplet.drive, triplet.target, triplet.spectator)
    rng_pair = stream(config.seed, "simrb-pair", *key, m, rep)
    rng_spec = stream(config.seed, "simrb-spec", *key, m, rep)
    pair_samples, pair_inverse = _sequence_with_inverse(2, m, rng_pair)
    spec_samples, spec_inverse = _sequence_with_inverse(1, m, rng_spec)
    all_three = (triplet.drive, triplet.target, triplet.spectator)
    for layer in range(m):
        _emit(circuit, pair_samples[layer].gates, pair)
        _emit(circuit, spec_samples[layer].gates, spect)
        circuit.barrier(*all_three)
    _emit(circuit, pair_inverse, pair)
    _emit(circuit, spec_inverse, spect)
    circuit.barrier(*all_three)


def build_simultaneous_rb(
    triplet: Triplet,
    config: RBConfig,
) -> list[tuple[int, int, Circuit]]:
    """Simultaneous pair + spectator benchmarking circuits for one triplet.

    A length-m circuit contains m+1 barriers over the whole triplet, one
    per Clifford layer including the closing inverses; both subsequences
    independently invert to the identity.
    """
    out = []
    num_qubits = max(triplet.qubits) + 1
    for m in config.lengths:
        for rep in range(config.repetitions):
            circuit = Circuit(num_qubits)
            _emit_simultaneous(circuit, triplet, m, rep, config)
            for q in (triplet.drive, triplet.target, triplet.spectator):
                circuit.measure(q)
            out.append((m, rep, circuit))
    return out


def _decay(m, a, alpha, b):
    return a * np.power(alpha, m) + b


def fit_decay(points: list[RBPoint], d: int) -> DecayFit:
    """Least-squares fit of survival(m) = A alpha^m + B; r = (d-1)(1-alpha)/d.

    Initialization: B from the longest sequence, A from the span, alpha from
    a log-linear regression of (survival - B).  Plain unweighted least
    squares; point standard errors are reported but not used as weights.
    """
    if len({p.length for p in points}) < 3:
        raise ValueError("need at least three distinct lengths")
    pts = sorted(points, key=lambda p: p.length)
    m = np.array([p.length for p in pts], dtype=float)
    y = np.array([p.survival for p in pts], dtype=float)
    if np.ptp(y) < 1e-12:
        return DecayFit(a=0.0, b=float(y[0]), alpha=1.0, r=0.0, residual=0.0)
    b0 = float(y[-1])
    a0 = float(y[0] - b0)
    resid = y - b0
    mask = resid > max(1e-6, 1e-3 * abs(a0))
    if mask.sum() >= 2 and a0 > 0:
        slope = np.polyfit(m[mask], np.log(resid[mask]), 1)[0]
        alpha0 = float(np.clip(np.exp(slope), 1e-6, 1 - 1e-9))
    else:
        alpha0 = 0.95
    a0 = a0 if abs(a0) > 1e-6 else 0.5
    try:
        popt, pcov = curve_fit(
            _decay,
            m,
            y,
            p0=[a0, alpha0, b0],
            bounds=([-1.5, 0.0, 0.0], [1.5, 1.0, 1.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitError(
            f"decay fit diverged (p0=A{a0:.4f}/alpha{alpha0:.6f}/B{b0:.4f}): {exc}"
        ) from exc
    a, alpha, b = (float(v) for v in popt)
    residual = float(np.sqrt(np.mean((_decay(m, *popt) - y) ** 2)))
    sigmas = np.array([p.stderr for p in pts], dtype=float)
    if np.all(sigmas > 0):
        # propagate the per-point uncertainties through the linearized fit
        jac = np.column_stack(
            [
                np.power(alpha, m),
                a * m * np.power(alpha, np.maximum(m - 1, 0)),
                np.ones_like(m),
            ]
        )
        try:
            gram_inv = np.linalg.inv(jac.T @ jac)
            cov = gram_inv @ jac.T @ np.diag(sigmas**2) @ jac @ gram_inv
            var_alpha = max(float(cov[1, 1]), 0.0)
        except np.linalg.LinAlgError:
            var_alpha = float(pcov[1, 1]) if np.isfinite(pcov[1, 1]) else 0.0
    else:
        var_alpha = float(pcov[1, 1]) if np.isfinite(pcov[1, 1]) else 0.0
    stderr_alpha = float(np.sqrt(max(var_alpha, 0.0)))
    scale = (d - 1) / d
    return DecayFit(
        a=a,
        b=b,
        alpha=alpha,
        r=scale * (1.0 - alpha),
        residual=residual,
        stderr_alpha=stderr_alpha,
        stderr_r=scale * stderr_alpha,
    )


def _survival_points(survivals: dict[int, list[float]], shots: int) -> list[RBPoint]:
    points = []
    for m in sorted(survivals):
        values = np.array(survivals[m], dtype=float)
        mean = float(values.mean())
        reps = len(values)
        empirical = float(values.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
        binomial = float(np.sqrt(max(mean * (1.0 - mean), 1.0 / shots) / (shots * reps)))
        points.append(RBPoint(length=m, survival=mean, stderr=max(empirical, binomial)))
    return points


def run_rb(
    backend: VirtualBackend,
    qubits: tuple[int, ...],
    config: RBConfig,
) -> tuple[list[RBPoint], DecayFit]:
    """Isolated benchmarking of one target; returns points and the fit."""
    d = 2 ** len(qubits)
    survivals: dict[int, list[float]] = {m: [] for m in config.lengths}
    zeros = "0" * len(qubits)
    for m, rep, circuit in build_rb_circuits(qubits, config):
        counts = backend.run(circuit, config.shots, seed_key=("rb", *qubits, m, rep))
        survivals[m].append(counts.counts.get(zeros, 0) / counts.shots)
    points = _survival_points(survivals, config.shots)
    return points, fit_decay(points, d)


@dataclass
class TripletResult:
    triplet: Triplet
    pair_points: list[RBPoint]
    pair_fit: DecayFit | None
    spectator_points: list[RBPoint]
    spectator_fit: DecayFit | None
    warnings: list[str] = field(default_factory=list)


@dataclass
class CharacterizationResult:
    table: CrosstalkTable
    results: dict[Triplet, TripletResult]
    config: RBConfig
    metadata: dict

    def to_json(self) -> dict:
        out = {
            "config": {
                "lengths": list(self.config.lengths),
                "repetitions": self.config.repetitions,
                "shots": self.config.shots,
                "seed": self.config.seed,
            },
            "metadata": self.metadata,
            "triplets": [],
        }
        for t in sorted(self.results):
            r = self.results[t]
            out["triplets"].append(
                {
                    "pair": [t.drive, t.target],
                    "spectator": t.spectator,
                    "pair_points": [
                        {"length": p.length, "survival": p.survival, "stderr": p.stderr}
                        for p in r.pair_points
                    ],
                    "pair_fit": r.pair_fit.to_json() if r.pair_fit else None,
                    "spectator_points": [
                        {"length": p.length, "survival": p.survival, "stderr": p.stderr}
                        for p in r.spectator_points
                    ],
                    "spectator_fit": r.spectator_fit.to_json() if r.spectator_fit else None,
                    "warnings": r.warnings,
                }
            )
        return out


def characterize(
    backend: VirtualBackend,
    batches: list[Batch],
    config: RBConfig,
) -> CharacterizationResult:
    """Simultaneous benchmarking of every triplet, batch by batch.

    All triplets of a batch share each circuit: their layers are emitted
    into one program and executed together, so injected channels that
    couple neighboring triplets act physically.  Pair survivals are fitted
    with d = 4 and spectator survivals with d = 2; the resulting table maps
    each triplet to (cx_sim_error, sq_sim_error).
    """
    snapshot = backend.snapshot
    pair_survivals: dict[Triplet, dict[int, list[float]]] = {}
    spec_survivals: dict[Triplet, dict[int, list[float]]] = {}
    for batch_index, batch in enumerate(batches):
        members = batch.sorted()
        for t in members:
            t.validate(snapshot)
            pair_survivals.setdefault(t, {m: [] for m in config.lengths})
            spec_survivals.setdefault(t, {m: [] for m in config.lengths})
        for m in config.lengths:
            for rep in range(config.repetitions):
                circuit = Circuit(snapshot.num_qubits)
                for t in members:
                    _emit_simultaneous(circuit, t, m, rep, config)
                clbit = 0
                clbits: dict[Triplet, tuple[int, int, int]] = {}
                for t in members:
                    for q in (t.drive, t.target, t.spectator):
                        circuit.measure(q)
                    clbits[t] = (clbit, clbit + 1, clbit + 2)
                    clbit += 3
                counts = backend.run(
                    circuit, config.shots, seed_key=("char", batch_index, m, rep)
                )
                for t in members:
                    cd, ct, cs = clbits[t]
                    pair_counts = counts.marginal([cd, ct])
                    spec_counts = counts.marginal([cs])
                    pair_survivals[t][m].append(pair_counts.counts.get("00", 0) / counts.shots)
                    spec_survivals[t][m].append(spec_counts.counts.get("0", 0) / counts.shots)

    results: dict[Triplet, TripletResult] = {}
    rates: dict[Triplet, tuple[float, float]] = {}
    for t in sorted(pair_survivals):
        pair_points = _survival_points(pair_survivals[t], config.shots)
        spec_points = _survival_points(spec_survivals[t], config.shots)
        warnings = []
        pair_fit = spec_fit = None
        try:
            pair_fit = fit_decay(pair_points, d=4)
        except (FitError, ValueError) as exc:
            warnings.append(f"pair fit failed: {exc}")
        try:
            spec_fit = fit_decay(spec_points, d=2)
        except (FitError, ValueError) as exc:
            warnings.append(f"spectator fit failed: {exc}")
        results[t] = TripletResult(
            triplet=t,
            pair_points=pair_points,
            pair_fit=pair_fit,
            spectator_points=spec_points,
            spectator_fit=spec_fit,
            warnings=warnings,
        )
        rates[t] = (
            min(max(pair_fit.r, 0.0), 1.0) if pair_fit else 1.0,
            min(max(spec_fit.r, 0.0), 1.0) if spec_fit else 1.0,
        )
    metadata = {
        "survivals": "pair and spectator marginals taken from the same shots of the same circuits",
        "batches": len(batches),
    }
    return CharacterizationResult(
        table=CrosstalkTable(rates), results=results, config=config, metadata=metadata
    )
