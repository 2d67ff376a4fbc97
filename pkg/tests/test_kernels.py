import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bethe_circuit import _kernels
from bethe_circuit.cba_core import _permutation_data
from bethe_circuit.sectors import binomial_table, positions_to_index, sector_masks

from conftest import random_system

needs_numba = pytest.mark.skipif(_kernels.permutation_sum_numba is None, reason="numba unavailable")


@needs_numba
@given(st.integers(0, 5), st.integers(0, 3), st.integers(0, 2**31))
def test_permutation_sum_paths_agree(r, extra, seed):
    rng = np.random.default_rng(seed)
    k = r + extra
    if k == 0:
        return
    y = np.exp(1j * rng.uniform(-3, 3, r))
    ypow = (y[:, None] ** np.arange(k)[None, :]).reshape(r, k)
    perms, signs = _permutation_data(r)
    weights = signs * (1 + 0.2 * rng.standard_normal(len(signs))) + 0j
    configs = np.array([sorted(rng.choice(k, r, replace=False)) for _ in range(4)], dtype=np.int64).reshape(4, r)
    a = _kernels.permutation_sum_numpy(ypow, perms, weights, configs)
    b = _kernels.permutation_sum_numba(ypow, perms, weights, configs)
    np.testing.assert_allclose(a, b, atol=1e-12)


@needs_numba
@given(st.integers(1, 10), st.integers(0, 2**31))
def test_minor_sweep_paths_agree(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n + 2)) + 1j * rng.standard_normal((n, n + 2))
    G = X @ X.conj().T
    G = np.hstack([G, rng.standard_normal((n, 2)) + 0j])
    out_np = _kernels.minor_sweep_numpy(G, 1e-12)
    out_nb = _kernels.minor_sweep_numba(np.ascontiguousarray(G), 1e-12)
    assert out_np[-1] == out_nb[-1]
    for a, b in zip(out_np[:-1], out_nb[:-1]):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_colex_rank_matches_closed_form():
    N = 9
    binom = binomial_table(N)
    for r in range(N + 1):
        masks = np.asarray(sector_masks(r, N), dtype=np.int64)
        ranks = _kernels.colex_rank_numpy(masks, N, binom)
        np.testing.assert_array_equal(ranks, np.arange(len(masks)))
    pos = (2, 5, 6)
    mask = sum(1 << (p - 1) for p in pos)
    assert _kernels.colex_rank_numpy(np.array([mask]), N, binom)[0] == positions_to_index(pos, N) - 1


@needs_numba
@pytest.mark.parametrize("w,q0", [(2, 0), (3, 2), (4, 3)])
def test_apply_gate_paths_agree(w, q0, rng):
    N, r = 8, 3
    masks = np.asarray(sector_masks(r, N), dtype=np.int64)
    binom = binomial_table(N)
    amps = rng.standard_normal(len(masks)) + 1j * rng.standard_normal(len(masks))
    # random gate that preserves the number of ones
    U = np.zeros((1 << w, 1 << w), dtype=complex)
    for c in range(w + 1):
        idx = [m for m in range(1 << w) if bin(m).count("1") == c]
        Z = rng.standard_normal((len(idx), len(idx))) + 1j * rng.standard_normal((len(idx), len(idx)))
        U[np.ix_(idx, idx)] = np.linalg.qr(Z)[0]
    a = _kernels.apply_gate_numpy(amps, masks, U, q0, w, N, binom)
    b = _kernels.apply_gate_numba(amps, masks, U, q0, w, N, binom)
    np.testing.assert_allclose(a, b, atol=1e-13)
    assert np.linalg.norm(a) == pytest.approx(np.linalg.norm(amps))


def test_dense_reference_for_apply_gate(rng):
    N, r, w, q0 = 5, 2, 3, 1
    masks = np.asarray(sector_masks(r, N), dtype=np.int64)
    amps = rng.standard_normal(len(masks)) + 0j
    U = np.eye(1 << w, dtype=complex)
    U[[1, 2]] = U[[2, 1]]  # swap local qubits 1 and 2 in the one-magnon block
    out = _kernels.apply_gate(amps, masks, U, q0, w, N, binomial_table(N))
    dense = np.zeros(1 << N, dtype=complex)
    dense[masks] = amps
    want = np.zeros_like(dense)
    for m in range(1 << N):
        loc = (m >> q0) & 7
        rest = m & ~(7 << q0)
        for new in range(8):
            want[rest | (new << q0)] += U[new, loc] * dense[m]
    np.testing.assert_allclose(out, want[masks], atol=1e-14)


def test_numpy_backend_end_to_end():
    code = (
        "import numpy as np\n"
        "from bethe_circuit import _kernels\n"
        "from bethe_circuit.cba_core import MagnonSystem\n"
        "from bethe_circuit.circuit import build_circuit, simulate, oracle_state, fidelity\n"
        "assert _kernels.backend() == 'numpy'\n"
        "s = MagnonSystem.from_momenta(6, [0.4+0.1j, -1.2, 2.5-0.2j], 1.0)\n"
        "print(1 - fidelity(simulate(build_circuit(s)), oracle_state(s)))\n"
    )
    env = dict(os.environ, BETHE_CIRCUIT_NUMBA="0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert float(out.stdout) < 1e-12


def test_backends_build_identical_states(rng):
    system = random_system(rng, 7, 3, delta=0.5)
    code = (
        "import sys, numpy as np\n"
        "from bethe_circuit.cba_core import MagnonSystem\n"
        "from bethe_circuit.circuit import build_circuit, simulate\n"
        f"s = MagnonSystem(7, {tuple(system.x)!r}, 0.5)\n"
        "np.save(sys.argv[1], simulate(build_circuit(s)).amps)\n"
    )
    states = []
    for flag in ("0", "1"):
        path = f"{os.environ.get('TMPDIR', '/tmp')}/state_{flag}_{os.getpid()}.npy"
        env = dict(os.environ, BETHE_CIRCUIT_NUMBA=flag)
        subprocess.run([sys.executable, "-c", code, path], env=env, check=True)
        states.append(np.load(path))
        os.remove(path)
    np.testing.assert_allclose(states[0], states[1], atol=1e-13)
