from functools import reduce

import numpy as np
import pytest

from bethe_circuit.cba_core import MagnonSystem, SectorVector, cba_wavefunction
from bethe_circuit.circuit import (
    CircuitDescription,
    assemble_unitary,
    build_circuit,
    energy_variance,
    fidelity,
    gate_block,
    gate_span,
    gate_width,
    hamiltonian_apply,
    oracle_state,
    short_circuit_output,
    short_network_wavefunction,
    simulate,
    truncate,
    verify_unitarity,
)
from bethe_circuit.errors import DegenerateMomentaError, DomainError
from bethe_circuit.sectors import sector_basis
from bethe_circuit.unitarize import FactorChain, OverlapChain

from conftest import random_system

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def test_layout():
    assert gate_width(2, 3) == 3 and gate_width(3, 3) == 4
    assert gate_span(5, 7, 2) == (2, 3, 4)
    assert gate_span(1, 7, 2) == (6, 7)


def test_one_magnon_gate_closed_form():
    sys = MagnonSystem.from_momenta(6, [0.9 + 0.2j], 0.4)
    x = sys.x[0]
    C = lambda k: sum(abs(x) ** (2 * n) for n in range(k))  # noqa: E731
    for k in range(1, 6):
        U = assemble_unitary(k, sys)
        # input |10>: emitted magnon on local qubit 1, or the magnon moves to local qubit 2
        assert U[1, 1] == pytest.approx(1 / np.sqrt(C(k + 1)), rel=1e-12)
        assert U[2, 1] == pytest.approx(x * np.sqrt(C(k) / C(k + 1)), rel=1e-12)


@pytest.mark.parametrize("N,M,delta", [(3, 1, 0.0), (4, 2, 0.5), (5, 3, 1.0), (6, 2, 2.0), (7, 4, 1.0), (6, 5, 0.5)])
def test_fidelity_small(N, M, delta, rng):
    sys = random_system(rng, N, M, delta)
    circ = build_circuit(sys)
    assert 1 - fidelity(simulate(circ, check_leak=True), oracle_state(sys)) < 1e-12
    assert verify_unitarity(circ).passed


def test_literal_ansatz_matches_chain_blocks(rng):
    sys = random_system(rng, 6, 3, delta=0.5)
    overlaps, chain = OverlapChain(sys), FactorChain(sys)
    for k in range(1, 6):
        blocks = chain.gate_blocks(k)
        for (i, r), P in blocks.items():
            if P.shape[0] == 0:
                continue
            lit = gate_block(k, i, r, sys, overlaps).matrix
            np.testing.assert_allclose(P, lit[: P.shape[0], : P.shape[1]], atol=1e-10)
    with pytest.raises(DomainError):
        gate_block(0, 0, 1, sys)


def test_truncation_builds_shorter_state(rng):
    sys = random_system(rng, 8, 3, delta=1.0)
    circ = build_circuit(sys)
    for k in range(4, 9):
        part = simulate(truncate(circ, k))
        assert 1 - fidelity(part, oracle_state(sys.with_length(k))) < 1e-12
    with pytest.raises(DomainError):
        truncate(circ, 3)


def test_short_circuit_output_is_orthonormalised(rng):
    # the k-qubit short stage maps basis input a to sum_b B[b, a] Psi_b
    sys = random_system(rng, 6, 5, delta=0.5)
    overlaps, chain = OverlapChain(sys), FactorChain(sys)
    for k in range(1, 6):
        for r in range(k + 1):
            basis = sector_basis(r, k).order
            B = overlaps.factors(r, k).B
            phis = np.column_stack([cba_wavefunction(b, k, sys).amps for b in basis])
            for a, pos in enumerate(basis):
                got = short_circuit_output(pos, k, sys, chain).amps
                np.testing.assert_allclose(got, phis @ B[:, a], atol=1e-10)


def test_short_network_with_either_chain(rng):
    sys = random_system(rng, 5, 4, delta=2.0)
    fc, oc = FactorChain(sys), OverlapChain(sys)
    for k in range(1, 5):
        for r in range(k + 1):
            for pos in sector_basis(r, k).order:
                ref = cba_wavefunction(pos, k, sys).amps
                for chain in (fc, oc):
                    got = short_network_wavefunction(pos, k, sys, chain).amps
                    assert np.abs(got - ref).max() < 1e-10 * np.abs(ref).max()
    with pytest.raises(DomainError):
        short_network_wavefunction((1,), 5, sys)


def test_json_roundtrip(tmp_path, rng):
    sys = random_system(rng, 6, 2, delta=0.5)
    circ = build_circuit(sys)
    path = tmp_path / "c.json"
    circ.save(path)
    again = CircuitDescription.load(path)
    assert again.N == 6 and again.M == 2 and again.metadata == circ.metadata
    for g, h in zip(circ.gates, again.gates):
        assert g.qubits == h.qubits
        np.testing.assert_array_equal(g.unitary, h.unitary)
    assert fidelity(simulate(again), simulate(circ)) == pytest.approx(1.0, abs=1e-15)
    assert again.system().x == pytest.approx(sys.x)
    doc = circ.to_json()
    doc["version"] = 2
    with pytest.raises(DomainError):
        CircuitDescription.from_json(doc)


def test_build_errors():
    with pytest.raises(DomainError):
        build_circuit(MagnonSystem.from_momenta(2, [0.1, 0.2], 0.0))
    with pytest.raises(DegenerateMomentaError):
        build_circuit(MagnonSystem.from_momenta(4, [0.3, 0.3], 0.0))


def test_completion_is_canonical(rng):
    # completions depend only on the isometry, so rebuilding is bit-identical
    sys = random_system(rng, 5, 2, delta=1.0)
    a = build_circuit(sys).gates[3].unitary
    b = build_circuit(sys).gates[3].unitary
    np.testing.assert_array_equal(a, b)


def _dense_hamiltonian(N, delta):
    def op(site_ops):
        return reduce(np.kron, [site_ops.get(j, I2) for j in range(N)][::-1])

    H = np.zeros((2**N, 2**N), dtype=complex)
    for j in range(N):
        nb = (j + 1) % N
        for P, c in ((X, 1.0), (Y, 1.0), (Z, delta)):
            H += c * op({j: P, nb: P})
    return H


@pytest.mark.parametrize("N,r,delta", [(4, 2, 0.7), (5, 2, -1.3), (6, 3, 2.0)])
def test_hamiltonian_matches_pauli_sum(N, r, delta, rng):
    basis = sector_basis(r, N)
    amps = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    state = SectorVector(basis, amps)
    H = _dense_hamiltonian(N, delta)
    want = (H @ state.to_dense())[basis.masks()]
    np.testing.assert_allclose(hamiltonian_apply(state, delta).amps, want, atol=1e-12)


@pytest.mark.parametrize("N", [3, 5, 8])
def test_one_magnon_eigenstate(N):
    for m in range(N):
        sys = MagnonSystem.from_momenta(N, [2 * np.pi * m / N], 0.6)
        e, var = energy_variance(simulate(build_circuit(sys)), 0.6)
        assert var < 1e-10
        assert e == pytest.approx(4 * np.cos(2 * np.pi * m / N) + 0.6 * (N - 4), abs=1e-10)
