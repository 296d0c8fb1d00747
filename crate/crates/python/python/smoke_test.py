"""Smoke test for the pyqvirt extension.

    maturin develop -m crates/python/pyproject.toml
    python crates/python/python/smoke_test.py
"""
import math
import struct
import json

import pyqvirt

LISTING = """__qpu__ void QBCIRCUIT(qreg q) {
    OPENQASM 2.0;
    include "qelib1.inc";
    creg c[2];
    x q[1];
    ry(QBTHETA_0) q[0];
    cx q[1], q[0];
    measure q[0] -> c[0];
    measure q[1] -> c[1];
}"""


def circuits():
    c = pyqvirt.parse_qasm(LISTING)
    assert c.num_qubits == 2 and c.parameter_count == 1
    assert pyqvirt.Circuit.from_qasm(c.to_qasm()) == c
    assert pyqvirt.Circuit.from_json(c.to_json()) == c
    assert pyqvirt.run(c.bind([0.0]), 1000) == {"11": 1000}
    assert pyqvirt.run(c.bind([math.pi]), 1000) == {"01": 1000}

    bell = pyqvirt.Circuit(2)
    bell.append("h", [0])
    bell.append("cx", [0, 1])
    amps = pyqvirt.statevector(bell)
    assert abs(amps[0] - 2**-0.5) < 1e-12 and abs(amps[3] - 2**-0.5) < 1e-12


def observables():
    h = pyqvirt.PauliOperator("0.5 Z0\n0.5 Z1\n0.25 X0 X1")
    assert len(h) == 3
    psi = pyqvirt.Circuit(2)
    psi.append("ry", [0], angle=0.4)
    exact = h.expectation(psi)
    assert abs(exact - 0.5 * (math.cos(0.4) + 1.0)) < 1e-12
    sampled = h.expectation(psi, shots=20000, seed=1)
    assert abs(sampled - exact) < 0.05
    assert len(h.measurement_circuits(psi)) == 3
    assert abs(pyqvirt.distributed_energy(h, psi, workers=2) - exact) < 1e-12
    assert pyqvirt.shots_for_precision(0.01) == 10000

    energy, theta, history = pyqvirt.vqe(pyqvirt.PauliOperator("1.0 Z0"), ftol=1e-10)
    assert abs(energy + 1.0) < 1e-4 and len(theta) == 1 and history


def wire_frame():
    c = pyqvirt.parse_qasm(LISTING).bind([0.5])
    frame = pyqvirt.execute_frame(c, 1024, 7, job_id=3)
    (length,) = struct.unpack(">I", frame[:4])
    assert length == len(frame) - 4
    msg = json.loads(frame[4:])
    assert msg["type"] == "execute" and msg["job_id"] == 3 and msg["shots"] == 1024


def scan():
    workers = pyqvirt.LocalWorkers(4)
    session = pyqvirt.Session(workers.addresses)
    session.instring = LISTING
    thetas = [[math.pi * i / 99] for i in range(100)]
    session.set_parameters(thetas, 1024, seed=0)
    jobs = [session.run_async(0, j) for j in range(100)]
    for job in jobs:
        assert job.wait(60.0) == "complete", job.state()
    assert jobs[0].result()["11"] >= 1014
    per = {}
    for job in jobs:
        per[job.endpoint] = per.get(job.endpoint, 0) + 1
    assert sorted(per.values()) == [25, 25, 25, 25], per

    pool = pyqvirt.Pool(workers.addresses[:1])
    workers.kill(0)
    job = pool.submit(pyqvirt.parse_qasm(LISTING).bind([0.1]), 10)
    assert job.wait(10.0) == "failed"
    try:
        job.result()
    except pyqvirt.TransportError:
        pass
    else:
        raise AssertionError("failed job returned a result")


if __name__ == "__main__":
    for check in (circuits, observables, wire_frame, scan):
        check()
        print(f"ok {check.__name__}")
