import json
from importlib import resources

import pytest

from crosstalksim.device import (
    DeviceSnapshot,
    EdgeCalibration,
    QubitCalibration,
    load_batches,
    load_snapshot,
)


def fixture_bytes(name: str) -> bytes:
    return resources.files("crosstalksim.fixtures").joinpath(name).read_bytes()


@pytest.fixture(scope="session")
def ehningen() -> DeviceSnapshot:
    return load_snapshot(fixture_bytes("ehningen_topology.json"))


@pytest.fixture(scope="session")
def appendix_batches():
    return load_batches(fixture_bytes("appendix_b_batches.json"))


def make_qubit(i, **overrides) -> QubitCalibration:
    values = dict(
        id=i,
        frequency=4.8 + 0.07 * i,
        anharmonicity=-0.33,
        t1=120.0,
        t2=110.0,
        readout_p0_given_1=0.0,
        readout_p1_given_0=0.0,
        sq_error=0.0,
        sq_duration=35.0,
    )
    values.update(overrides)
    return QubitCalibration(**values)


def make_edge(drive, target, **overrides) -> EdgeCalibration:
    values = dict(drive=drive, target=target, cx_error=0.0, cx_duration=300.0)
    values.update(overrides)
    return EdgeCalibration(**values)


def chain_snapshot(n=3, **qubit_overrides) -> DeviceSnapshot:
    """Path topology 0-1-2-...; every edge driven from the lower qubit."""
    qubits = tuple(make_qubit(i, **qubit_overrides) for i in range(n))
    edges = tuple(make_edge(i, i + 1) for i in range(n - 1))
    return DeviceSnapshot(qubits=qubits, edges=edges, name="toy-chain")


@pytest.fixture
def toy3() -> DeviceSnapshot:
    return chain_snapshot(3)


def snapshot_to_json(snapshot: DeviceSnapshot) -> str:
    doc = {
        "name": snapshot.name,
        "timestamp": snapshot.timestamp,
        "qubits": [
            {
                "id": q.id,
                "frequency_ghz": q.frequency,
                "anharmonicity_ghz": q.anharmonicity,
                "t1_us": q.t1,
                "t2_us": q.t2,
                "readout_p0_given_1": q.readout_p0_given_1,
                "readout_p1_given_0": q.readout_p1_given_0,
                "sq_error": q.sq_error,
                "sq_duration_ns": q.sq_duration,
            }
            for q in snapshot.qubits
        ],
        "edges": [
            {
                "drive": e.drive,
                "target": e.target,
                "cx_error": e.cx_error,
                "cx_duration_ns": e.cx_duration,
            }
            for e in snapshot.edges
        ],
    }
    return json.dumps(doc)
