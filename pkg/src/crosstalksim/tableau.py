"""Stabilizer tableau algebra for Clifford sequences.

A Clifford unitary is represented by the images of the generators X_i and
Z_i under conjugation, stored as Pauli terms i^phase * X^x Z^z with exact
phase tracking modulo 4.  This gives group composition, inversion, uniform
sampling and basis-gate decomposition without any floating-point phase
ambiguity, which is what randomized-benchmarking sequence inversion needs.

Sampling is uniform over (symplectic matrix, sign pattern): the symplectic
groups for one and two qubits are small (6 and 720 elements) and are
enumerated once, giving 24 single-qubit and 11520 two-qubit Cliffords.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "CliffordTableau",
    "PauliTerm",
    "gate_tableau",
    "random_clifford",
    "decompose",
    "sequence_product",
    "clifford_inverse",
    "num_cliffords",
]

_SQRT2 = np.sqrt(2.0)

# Dense matrices for tableau construction only; the simulator keeps its own set.
_GATE_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / _SQRT2,
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "SDG": np.array([[1, 0], [0, -1j]], dtype=complex),
    "SX": np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2,
    # local index 0 = control (least-significant bit of the 4x4 index)
    "CX": np.array(
        [[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex
    ),
}

_PAULI_1Q = {
    (0, 0): _GATE_MATS["I"],
    (1, 0): _GATE_MATS["X"],
    (0, 1): _GATE_MATS["Z"],
    (1, 1): _GATE_MATS["X"] @ _GATE_MATS["Z"],  # XZ = -iY; phase handled separately
}


@dataclass(frozen=True)
class PauliTerm:
    """i^phase * X^x Z^z with phase tracked modulo 4."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    phase: int

    def __mul__(self, other: "PauliTerm") -> "PauliTerm":
        # Z^b X^c = (-1)^(b.c) X^c Z^b
        swaps = sum(b & c for b, c in zip(self.z, other.x))
        x = tuple(a ^ c for a, c in zip(self.x, other.x))
        z = tuple(b ^ d for b, d in zip(self.z, other.z))
        return PauliTerm(x, z, (self.phase + other.phase + 2 * swaps) % 4)

    @property
    def weight_xz(self) -> int:
        return sum(a & b for a, b in zip(self.x, self.z))

    def is_hermitian(self) -> bool:
        return (self.phase - self.weight_xz) % 2 == 0

    def sign_bit(self) -> int:
        """0 for +, 1 for - relative to the Hermitian form i^(x.z) X^x Z^z."""
        delta = (self.phase - self.weight_xz) % 4
        if delta not in (0, 2):
            raise ValueError(f"Pauli term {self} is not Hermitian")
        return delta // 2

    @classmethod
    def identity(cls, n: int) -> "PauliTerm":
        return cls((0,) * n, (0,) * n, 0)

    @classmethod
    def single(cls, n: int, kind: str, qubit: int) -> "PauliTerm":
        x = [0] * n
        z = [0] * n
        phase = 0
        if kind == "X":
            x[qubit] = 1
        elif kind == "Z":
            z[qubit] = 1
        elif kind == "Y":
            x[qubit] = 1
            z[qubit] = 1
            phase = 1  # Y = i X Z
        else:
            raise ValueError(f"not a Pauli kind: {kind}")
        return cls(tuple(x), tuple(z), phase)

    def to_matrix(self) -> np.ndarray:
        n = len(self.x)
        out = np.array([[1.0 + 0j]])
        for q in reversed(range(n)):
            out = np.kron(out, _PAULI_1Q[(self.x[q], self.z[q])])
        return (1j ** self.phase) * out


class CliffordTableau:
    """Images of X_i (rows 0..n-1) and Z_i (rows n..2n-1) as PauliTerms."""

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: tuple[PauliTerm, ...]):
        self.n = n
        self.rows = rows

    @classmethod
    def identity(cls, n: int) -> "CliffordTableau":
        rows = tuple(PauliTerm.single(n, "X", i) for i in range(n)) + tuple(
            PauliTerm.single(n, "Z", i) for i in range(n)
        )
        return cls(n, rows)

    def evaluate(self, term: PauliTerm) -> PauliTerm:
        """Image of an arbitrary Pauli term under conjugation."""
        out = PauliTerm((0,) * self.n, (0,) * self.n, term.phase)
        for i in range(self.n):
            if term.x[i]:
                out = out * self.rows[i]
        for i in range(self.n):
            if term.z[i]:
                out = out * self.rows[self.n + i]
        return out

    def then(self, after: "CliffordTableau") -> "CliffordTableau":
        """Tableau of (after . self): apply self first, then `after`."""
        if after.n != self.n:
            raise ValueError("tableau size mismatch")
        return CliffordTableau(self.n, tuple(after.evaluate(r) for r in self.rows))

    def apply_gate(self, kind: str, qubits: tuple[int, ...], theta: float | None = None) -> "CliffordTableau":
        return self.then(gate_tableau(self.n, kind, tuple(qubits), theta))

    def symplectic(self) -> np.ndarray:
        """(2n x 2n) binary matrix; row i = (x | z) of the image of generator i."""
        m = np.zeros((2 * self.n, 2 * self.n), dtype=np.uint8)
        for i, r in enumerate(self.rows):
            m[i, : self.n] = r.x
            m[i, self.n :] = r.z
        return m

    def sign_bits(self) -> tuple[int, ...]:
        return tuple(r.sign_bit() for r in self.rows)

    def inverse(self) -> "CliffordTableau":
        n = self.n
        s = self.symplectic()
        lam = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        lam[:n, n:] = np.eye(n, dtype=np.uint8)
        lam[n:, :n] = np.eye(n, dtype=np.uint8)
        s_inv = (lam @ s.T @ lam) % 2
        rows = []
        for i in range(2 * n):
            x = tuple(int(v) for v in s_inv[i, :n])
            z = tuple(int(v) for v in s_inv[i, n:])
            cand = PauliTerm(x, z, sum(a & b for a, b in zip(x, z)) % 4)
            image = self.evaluate(cand)
            if image.sign_bit():
                cand = PauliTerm(cand.x, cand.z, (cand.phase + 2) % 4)
            rows.append(cand)
        return CliffordTableau(n, tuple(rows))

    def is_identity(self) -> bool:
        return self == CliffordTableau.identity(self.n)

    def key(self) -> bytes:
        return self.symplectic().tobytes() + bytes(self.sign_bits())

    def __eq__(self, other) -> bool:
        return isinstance(other, CliffordTableau) and self.n == other.n and self.key() == other.key()

    def __hash__(self) -> int:
        return hash((self.n, self.key()))

    def __repr__(self) -> str:
        return f"CliffordTableau(n={self.n}, rows={self.rows!r})"


def _embed(n: int, qubits: tuple[int, ...], term: PauliTerm) -> PauliTerm:
    x = [0] * n
    z = [0] * n
    for local, q in enumerate(qubits):
        x[q] = term.x[local]
        z[q] = term.z[local]
    return PauliTerm(tuple(x), tuple(z), term.phase)


def _match_pauli(mat: np.ndarray, k: int) -> PauliTerm:
    """Identify a matrix as i^p X^x Z^z on k qubits (exact up to 1e-9)."""
    for code in range(4**k):
        bits = [(code >> (2 * q)) & 3 for q in range(k)]
        x = tuple(b & 1 for b in bits)
        z = tuple((b >> 1) & 1 for b in bits)
        base = PauliTerm(x, z, 0).to_matrix()
        for phase in range(4):
            if np.allclose(mat, (1j**phase) * base, atol=1e-9):
                return PauliTerm(x, z, phase)
    raise ValueError("matrix is not a Pauli; gate is not Clifford")


@lru_cache(maxsize=None)
def _local_gate_tableau(kind: str, k: int) -> tuple[PauliTerm, ...]:
    mat = _GATE_MATS[kind]
    rows = []
    for gen_kind in ("X", "Z"):
        for q in range(k):
            p = PauliTerm.single(k, gen_kind, q)
            image = mat @ p.to_matrix() @ mat.conj().T
            rows.append(_match_pauli(image, k))
    return tuple(rows)


_RZ_CLIFFORD = {0: "I", 1: "S", 2: "Z", 3: "SDG"}


@lru_cache(maxsize=None)
def _gate_tableau_cached(n: int, kind: str, qubits: tuple[int, ...]) -> CliffordTableau:
    k = len(qubits)
    local = _local_gate_tableau(kind, k)
    tab = CliffordTableau.identity(n)
    rows = list(tab.rows)
    for gen_index in range(2 * k):
        local_term = local[gen_index]
        global_term = _embed(n, qubits, local_term)
        gen_kind, q = ("X", qubits[gen_index]) if gen_index < k else ("Z", qubits[gen_index - k])
        rows[(0 if gen_kind == "X" else n) + q] = global_term
    return CliffordTableau(n, tuple(rows))


def gate_tableau(n: int, kind: str, qubits: tuple[int, ...], theta: float | None = None) -> CliffordTableau:
    """Tableau of a basis gate embedded on `qubits` of an n-qubit register."""
    if kind == "RZ":
        if theta is None:
            raise ValueError("RZ needs an angle")
        quarter = theta / (np.pi / 2)
        nearest = round(quarter)
        if abs(quarter - nearest) > 1e-9:
            raise ValueError(f"RZ({theta}) is not a Clifford angle")
        kind = _RZ_CLIFFORD[nearest % 4]
    if kind in ("BARRIER", "DELAY", "MEASURE"):
        raise ValueError(f"{kind} has no tableau")
    if kind not in _GATE_MATS:
        raise ValueError(f"unknown gate kind {kind}")
    expected = 2 if kind == "CX" else 1
    if len(qubits) != expected:
        raise ValueError(f"{kind} expects {expected} qubits, got {len(qubits)}")
    return _gate_tableau_cached(n, kind, tuple(int(q) for q in qubits))


@lru_cache(maxsize=4)
def _symplectic_group(n: int) -> np.ndarray:
    """All 2n x 2n binary symplectic matrices (6 for n=1, 720 for n=2)."""
    dim = 2 * n
    lam = np.zeros((dim, dim), dtype=np.uint8)
    lam[:n, n:] = np.eye(n, dtype=np.uint8)
    lam[n:, :n] = np.eye(n, dtype=np.uint8)
    count = 2 ** (dim * dim)
    codes = np.arange(count, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(dim * dim)[None, :]) & 1).astype(np.uint8)
    mats = bits.reshape(count, dim, dim)
    prod = np.einsum("kij,jl,kml->kim", mats, lam, mats) % 2
    mask = (prod == lam[None, :, :]).all(axis=(1, 2))
    return mats[mask]


def num_cliffords(n: int) -> int:
    """Order of the n-qubit Clifford group modulo global phase."""
    return len(_symplectic_group(n)) * 4**n


def _tableau_from_parts(n: int, sym: np.ndarray, signs: np.ndarray) -> CliffordTableau:
    rows = []
    for i in range(2 * n):
        x = tuple(int(v) for v in sym[i, :n])
        z = tuple(int(v) for v in sym[i, n:])
        delta = sum(a & b for a, b in zip(x, z)) % 4
        rows.append(PauliTerm(x, z, (delta + 2 * int(signs[i])) % 4))
    return CliffordTableau(n, tuple(rows))


def random_clifford(n: int, rng: np.random.Generator) -> CliffordTableau:
    """Uniform sample over the n-qubit Clifford group (n = 1 or 2)."""
    if n not in (1, 2):
        raise ValueError("uniform sampling is implemented for 1 and 2 qubits")
    group = _symplectic_group(n)
    sym = group[int(rng.integers(len(group)))]
    signs = rng.integers(0, 2, size=2 * n)
    return _tableau_from_parts(n, sym, signs)


_GENERATORS = {
    1: (("H", (0,)), ("S", (0,))),
    2: (("H", (0,)), ("H", (1,)), ("S", (0,)), ("S", (1,)), ("CX", (0, 1))),
}


@lru_cache(maxsize=4)
def _word_table(n: int) -> dict[bytes, tuple[tuple[str, tuple[int, ...]], ...]]:
    """Cheapest gate word per symplectic class, minimizing (#CX, #1q gates).

    Covers the full symplectic group via Dijkstra over right multiplication
    by the generator set; every two-qubit class is reachable with at most
    three CX gates.
    """
    gens = []
    for kind, qubits in _GENERATORS[n]:
        tab = gate_tableau(n, kind, qubits)
        cost = (1, 0) if kind == "CX" else (0, 1)
        gens.append((kind, qubits, tab, cost))
    start = CliffordTableau.identity(n)
    start_key = start.symplectic().tobytes()
    best: dict[bytes, tuple[tuple[int, int], tuple]] = {start_key: ((0, 0), ())}
    heap = [((0, 0), 0, start_key, start, ())]
    counter = 1
    while heap:
        cost, _, key, tab, word = heapq.heappop(heap)
        if best[key][0] < cost:
            continue
        for kind, qubits, gtab, gcost in gens:
            new_tab = tab.then(gtab)
            new_key = new_tab.symplectic().tobytes()
            new_cost = (cost[0] + gcost[0], cost[1] + gcost[1])
            if new_key not in best or new_cost < best[new_key][0]:
                new_word = word + ((kind, qubits),)
                best[new_key] = (new_cost, new_word)
                heapq.heappush(heap, (new_cost, counter, new_key, new_tab, new_word))
                counter += 1
    assert len(best) == len(_symplectic_group(n))
    return {key: word for key, (cost, word) in best.items()}


def _gf2_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    a = np.concatenate([mat % 2, (rhs % 2)[:, None]], axis=1).astype(np.uint8)
    rows, cols = a.shape
    pivot_row = 0
    pivots = []
    for col in range(cols - 1):
        hit = None
        for r in range(pivot_row, rows):
            if a[r, col]:
                hit = r
                break
        if hit is None:
            continue
        a[[pivot_row, hit]] = a[[hit, pivot_row]]
        for r in range(rows):
            if r != pivot_row and a[r, col]:
                a[r] ^= a[pivot_row]
        pivots.append(col)
        pivot_row += 1
    x = np.zeros(cols - 1, dtype=np.uint8)
    for r, col in enumerate(pivots):
        x[col] = a[r, -1]
    if ((mat @ x) % 2 != rhs % 2).any():
        raise ValueError("GF(2) system is inconsistent")
    return x


_WORD_TABLEAUS: dict[tuple[int, bytes], CliffordTableau] = {}


def decompose(tableau: CliffordTableau) -> list[tuple[str, tuple[int, ...]]]:
    """Decompose into basis gates (H, S, CX plus a trailing Pauli layer).

    Gate qubit indices are local (0..n-1); the result applied in order
    reproduces the tableau exactly, hence the unitary up to global phase.
    """
    n = tableau.n
    words = _word_table(n)
    key = tableau.symplectic().tobytes()
    word = words[key]
    cache_key = (n, key)
    word_tab = _WORD_TABLEAUS.get(cache_key)
    if word_tab is None:
        word_tab = CliffordTableau.identity(n)
        for kind, qubits in word:
            word_tab = word_tab.then(gate_tableau(n, kind, qubits))
        _WORD_TABLEAUS[cache_key] = word_tab
    flips = np.array(
        [a ^ b for a, b in zip(tableau.sign_bits(), word_tab.sign_bits())], dtype=np.uint8
    )
    # Pauli layer L after the word flips row i iff L anticommutes with row i.
    rows = word_tab.rows
    mat = np.zeros((2 * n, 2 * n), dtype=np.uint8)
    for i, r in enumerate(rows):
        mat[i, :n] = r.z  # coefficient of L.x
        mat[i, n:] = r.x  # coefficient of L.z
    sol = _gf2_solve(mat, flips)
    gates = list(word)
    for q in range(n):
        xq, zq = int(sol[q]), int(sol[n + q])
        if xq and zq:
            gates.append(("Y", (q,)))
        elif xq:
            gates.append(("X", (q,)))
        elif zq:
            gates.append(("Z", (q,)))
    return gates


@lru_cache(maxsize=4)
def average_cx_per_clifford(n: int) -> float:
    """Mean CX count of a uniformly random n-qubit Clifford's decomposition."""
    words = _word_table(n)
    counts = [sum(1 for kind, _ in word if kind == "CX") for word in words.values()]
    return float(np.mean(counts))


def sequence_product(sequence: list[CliffordTableau]) -> CliffordTableau:
    """Tableau of the ordered product; sequence[0] is applied first."""
    if not sequence:
        raise ValueError("empty Clifford sequence")
    out = sequence[0]
    for tab in sequence[1:]:
        out = out.then(tab)
    return out


def clifford_inverse(sequence: list[CliffordTableau]) -> CliffordTableau:
    """The Clifford closing the sequence: inverse of the ordered product."""
    return sequence_product(sequence).inverse()
