"""Dense density-matrix evolution, exact distributions, and sampling.

Basis convention, used everywhere in the package: computational basis index
k encodes qubit i as bit (k >> i) & 1, i.e. qubit 0 is the least-significant
bit of outcome strings, and outcome strings print classical bit m-1 first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit
from .rng import stream
from .tableau import CliffordTableau, clifford_inverse  # noqa: F401  (re-exported)

__all__ = [
    "DensityMatrix",
    "Counts",
    "gate_matrix",
    "apply_gate",
    "apply_channel",
    "apply_unitary",
    "exact_distribution",
    "sample_counts",
    "apply_readout_to_distribution",
    "clifford_inverse",
    "CliffordTableau",
]

TOL_ALGEBRA = 1e-12
TOL_STATE = 1e-10
TOL_PSD = 1e-9

_SQRT2 = np.sqrt(2.0)

_FIXED_GATES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "SX": np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2,
    # qubits are (control, target); the first listed qubit is the low bit
    "CX": np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex),
}

_NON_UNITARY = frozenset({"MEASURE", "BARRIER", "DELAY"})


def gate_matrix(kind: str, theta: float | None = None) -> np.ndarray:
    """Unitary of a basis gate; index bit j belongs to the j-th gate qubit."""
    if kind == "RZ":
        if theta is None:
            raise ValueError("RZ needs an angle")
        return np.array([[1, 0], [0, np.exp(1j * theta)]], dtype=complex)
    if kind in _NON_UNITARY:
        raise ValueError(f"{kind} is not a unitary gate")
    try:
        return _FIXED_GATES[kind]
    except KeyError:
        raise ValueError(f"unknown gate kind {kind!r}") from None


def _contract_rows(tensor: np.ndarray, op: np.ndarray, axes: list[int], total_axes: int) -> np.ndarray:
    """Apply a 2^k x 2^k operator to the given axes of a (2,)*total tensor.

    `axes[j]` is the tensor axis carrying gate bit j; bit k-1 is the most
    significant bit of the operator's index.
    """
    k = len(axes)
    front = [axes[k - 1 - j] for j in range(k)]
    moved = np.moveaxis(tensor, front, range(k))
    shape = moved.shape
    flat = moved.reshape(2**k, -1)
    out = (op @ flat).reshape(shape)
    return np.moveaxis(out, range(k), front)


def _apply_unitary_dm(data: np.ndarray, op: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    t = data.reshape((2,) * (2 * n))
    row_axes = [n - 1 - q for q in qubits]
    col_axes = [2 * n - 1 - q for q in qubits]
    t = _contract_rows(t, op, row_axes, 2 * n)
    t = _contract_rows(t, op.conj(), col_axes, 2 * n)
    return t.reshape(data.shape)


def _apply_unitary_sv(vec: np.ndarray, op: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    t = vec.reshape((2,) * n)
    axes = [n - 1 - q for q in qubits]
    return _contract_rows(t, op, axes, n).reshape(vec.shape)


def _apply_superop(data: np.ndarray, sup: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a d^2 x d^2 superoperator to the (row, col) axes of the qubits."""
    k = len(qubits)
    dim = 2**k
    t = data.reshape((2,) * (2 * n))
    row_front = [n - 1 - qubits[k - 1 - j] for j in range(k)]
    col_front = [2 * n - 1 - qubits[k - 1 - j] for j in range(k)]
    moved = np.moveaxis(t, row_front + col_front, range(2 * k))
    shape = moved.shape
    flat = moved.reshape(dim * dim, -1)
    out = (sup @ flat).reshape(shape)
    out = np.moveaxis(out, range(2 * k), row_front + col_front)
    return np.ascontiguousarray(out).reshape(data.shape)


@dataclass
class DensityMatrix:
    """2^n x 2^n complex density operator."""

    n: int
    data: np.ndarray

    @classmethod
    def zero_state(cls, n: int) -> "DensityMatrix":
        dim = 2**n
        data = np.zeros((dim, dim), dtype=complex)
        data[0, 0] = 1.0
        return cls(n=n, data=data)

    @classmethod
    def from_statevector(cls, vec: np.ndarray) -> "DensityMatrix":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(np.log2(vec.size)))
        return cls(n=n, data=np.outer(vec, vec.conj()))

    def validate(self) -> None:
        if np.abs(self.data - self.data.conj().T).max() > TOL_STATE:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(self.data).real - 1.0) > TOL_STATE:
            raise ValueError("density matrix trace differs from 1")
        eigs = np.linalg.eigvalsh(self.data)
        if eigs.min() < -TOL_PSD:
            raise ValueError(f"density matrix not PSD (min eigenvalue {eigs.min():.3e})")

    def probabilities(self) -> np.ndarray:
        p = np.real(np.diag(self.data)).copy()
        p[p < 0] = 0.0
        total = p.sum()
        return p / total if total > 0 else p

    def marginal_probabilities(self, qubits: list[int]) -> np.ndarray:
        """Distribution over the listed qubits; bit j of the outcome = qubits[j]."""
        p = self.probabilities()
        m = len(qubits)
        out = np.zeros(2**m)
        for k, prob in enumerate(p):
            idx = 0
            for j, q in enumerate(qubits):
                idx |= ((k >> q) & 1) << j
            out[idx] += prob
        return out


def apply_gate(state: DensityMatrix, gate) -> DensityMatrix:
    """rho -> U rho U^dagger for a unitary instruction."""
    op = gate_matrix(gate.kind, getattr(gate, "theta", None))
    return apply_unitary(state, op, gate.qubits)


def apply_unitary(state: DensityMatrix, op: np.ndarray, qubits: tuple[int, ...]) -> DensityMatrix:
    if any(q >= state.n for q in qubits):
        raise ValueError(f"qubits {qubits} exceed register size {state.n}")
    return DensityMatrix(state.n, _apply_unitary_dm(state.data, op, tuple(qubits), state.n))


def _depolarize(data: np.ndarray, weight: float, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """(1-w) rho + w * (I/d on `qubits`) (x) Tr_qubits(rho), computed directly."""
    k = len(qubits)
    dim = 2**k
    t = data.reshape((2,) * (2 * n))
    row_front = [n - 1 - qubits[k - 1 - j] for j in range(k)]
    col_front = [2 * n - 1 - qubits[k - 1 - j] for j in range(k)]
    moved = np.moveaxis(t, row_front + col_front, range(2 * k))
    shape = moved.shape
    block = moved.reshape(dim, dim, -1)
    reduced = np.einsum("iik->k", block)
    out = (1.0 - weight) * block
    step = weight / dim
    for i in range(dim):
        out[i, i, :] += step * reduced
    out = np.moveaxis(out.reshape(shape), range(2 * k), row_front + col_front)
    return np.ascontiguousarray(out).reshape(data.shape)


def apply_channel(state: DensityMatrix, channel, qubits: tuple[int, ...]) -> DensityMatrix:
    """rho -> sum_k E_k rho E_k^dagger on the listed qubits.

    Channels labeled "depolarizing" take an analytic shortcut; the generic
    Kraus sum is used for everything else and serves as the oracle for the
    shortcut in the test suite.
    """
    qubits = tuple(qubits)
    if channel.arity != len(qubits):
        raise ValueError(f"channel arity {channel.arity} does not match qubits {qubits}")
    if any(q >= state.n for q in qubits):
        raise ValueError(f"qubits {qubits} exceed register size {state.n}")
    if getattr(channel, "label", "") == "depolarizing":
        weight = channel.params["lambda_total"]
        return DensityMatrix(state.n, _depolarize(state.data, weight, qubits, state.n))
    sup = getattr(channel, "_superop", None)
    if sup is None:
        dim = 2**channel.arity
        sup = np.zeros((dim * dim, dim * dim), dtype=complex)
        for op in channel.operators:
            sup += np.kron(op, op.conj())
        object.__setattr__(channel, "_superop", sup)
    return DensityMatrix(state.n, _apply_superop(state.data, sup, qubits, state.n))


def kraus_sum(state: DensityMatrix, channel, qubits: tuple[int, ...]) -> DensityMatrix:
    """Plain Kraus-sum application, bypassing any analytic shortcut."""
    out = np.zeros_like(state.data)
    for op in channel.operators:
        out += _apply_unitary_dm(state.data, op, tuple(qubits), state.n)
    return DensityMatrix(state.n, out)


MAX_DENSE_QUBITS = 14


def exact_distribution(circuit: Circuit) -> np.ndarray:
    """Noiseless outcome distribution of a circuit.

    Returns probabilities over the measured classical bits in measurement
    order, or over all qubits (bit i = qubit i) if the circuit has no
    MEASURE instructions.  Probabilities sum to one within 1e-12.
    """
    if circuit.num_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense limit is {MAX_DENSE_QUBITS} qubits, circuit has {circuit.num_qubits}")
    circuit.validate()
    n = circuit.num_qubits
    vec = np.zeros(2**n, dtype=complex)
    vec[0] = 1.0
    for gate in circuit.instructions:
        if gate.kind in _NON_UNITARY:
            continue
        vec = _apply_unitary_sv(vec, gate_matrix(gate.kind, gate.theta), gate.qubits, n)
    probs = np.abs(vec) ** 2
    measured = circuit.measured_qubits()
    if measured:
        m = len(measured)
        out = np.zeros(2**m)
        for k, p in enumerate(probs):
            idx = 0
            for j, q in enumerate(measured):
                idx |= ((k >> q) & 1) << j
            out[idx] += p
        probs = out
    return probs / probs.sum()


@dataclass
class Counts:
    """Histogram of outcome bitstrings (bit 0 printed rightmost)."""

    shots: int
    counts: dict[str, int]

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.shots:
            raise ValueError(f"counts sum to {total}, shots = {self.shots}")

    @property
    def num_bits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probability_vector(self, num_bits: int | None = None) -> np.ndarray:
        m = num_bits if num_bits is not None else self.num_bits
        out = np.zeros(2**m)
        for key, c in self.counts.items():
            out[int(key, 2)] += c
        return out / self.shots

    def marginal(self, bits: list[int]) -> "Counts":
        """Counts over the listed classical bits."""
        out: dict[str, int] = {}
        m = self.num_bits
        for key, c in self.counts.items():
            sub = "".join(key[m - 1 - b] for b in reversed(bits))
            out[sub] = out.get(sub, 0) + c
        return Counts(self.shots, out)

    def combine(self, other: "Counts") -> "Counts":
        merged = dict(self.counts)
        for key, c in other.counts.items():
            merged[key] = merged.get(key, 0) + c
        return Counts(self.shots + other.shots, merged)

    def to_json(self) -> dict:
        return {"shots": self.shots, "counts": dict(sorted(self.counts.items()))}

    @classmethod
    def from_json(cls, obj: dict) -> "Counts":
        return cls(shots=int(obj["shots"]), counts={k: int(v) for k, v in obj["counts"].items()})


def sample_bits(
    probs: np.ndarray,
    shots: int,
    readout: list[tuple[float, float]] | None,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample outcome integers from a distribution and apply readout flips.

    `readout[j]` is (p0_given_1, p1_given_0) for classical bit j.
    """
    m = int(round(np.log2(probs.size)))
    p = np.clip(probs, 0, None)
    p = p / p.sum()
    outcomes = rng.choice(probs.size, size=shots, p=p)
    if readout is not None:
        bits = ((outcomes[:, None] >> np.arange(m)[None, :]) & 1).astype(np.int8)
        for j, (p0_given_1, p1_given_0) in enumerate(readout):
            u = rng.random(shots)
            flip = np.where(bits[:, j] == 1, u < p0_given_1, u < p1_given_0)
            bits[:, j] ^= flip.astype(np.int8)
        outcomes = (bits * (1 << np.arange(m))[None, :]).sum(axis=1)
    return outcomes


def outcomes_to_counts(outcomes: np.ndarray, num_bits: int) -> Counts:
    values, freq = np.unique(outcomes, return_counts=True)
    counts = {format(int(v), f"0{num_bits}b"): int(c) for v, c in zip(values, freq)}
    return Counts(shots=int(outcomes.size), counts=counts)


def sample_counts(
    state: DensityMatrix,
    shots: int,
    readout: list[tuple[float, float]] | None = None,
    seed: int = 0,
) -> Counts:
    """Multinomial sampling of the state's diagonal with readout errors.

    Bit i of each outcome is qubit i; deterministic for a given seed.
    """
    if shots <= 0:
        raise ValueError("shots must be positive")
    rng = stream(seed, "sample")
    outcomes = sample_bits(state.probabilities(), shots, readout, rng)
    return outcomes_to_counts(outcomes, state.n)


def apply_readout_to_distribution(
    probs: np.ndarray, readout: list[tuple[float, float]]
) -> np.ndarray:
    """Push a distribution through per-bit classical readout-flip matrices."""
    m = int(round(np.log2(probs.size)))
    t = probs.reshape((2,) * m)
    for j, (p0_given_1, p1_given_0) in enumerate(readout):
        mat = np.array([[1 - p1_given_0, p0_given_1], [p1_given_0, 1 - p0_given_1]])
        axis = m - 1 - j
        t = np.moveaxis(np.tensordot(mat, t, axes=([1], [axis])), 0, axis)
    return t.reshape(probs.shape)
