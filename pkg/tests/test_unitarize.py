import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bethe_circuit.cba_core import MagnonSystem
from bethe_circuit.errors import DomainError, NotPositiveDefiniteError, RankError
from bethe_circuit.sectors import sector_dim
from bethe_circuit.unitarize import (
    FactorChain,
    OverlapChain,
    cholesky_det,
    cholesky_standard,
    dump_factors,
    extended_from_plain,
    gram_matrix,
    gram_recursion_step,
    l_matrix,
)

from conftest import random_system


def _hpd(n, seed, shift=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return X.conj().T @ X + shift * n * np.eye(n)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_det_cholesky_matches_lapack(n, seed):
    C = _hpd(n, seed)
    pair = cholesky_det(C)
    A = pair.A
    assert np.allclose(np.tril(A, -1), 0)
    assert np.all(np.diag(A).real > 0) and np.allclose(np.diag(A).imag, 0)
    np.testing.assert_allclose(A, cholesky_standard(C), atol=1e-9 * np.abs(A).max())
    np.testing.assert_allclose(pair.B @ A, np.eye(n), atol=1e-9)


@given(arrays(np.float64, (4,), elements=st.floats(0.1, 10)))
def test_diagonal_input(d):
    pair = cholesky_det(np.diag(d).astype(complex))
    np.testing.assert_allclose(np.diag(pair.A).real, np.sqrt(d))
    np.testing.assert_allclose(pair.leading_minors, np.cumprod(d), rtol=1e-12)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_det(np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex))
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_standard(np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex))


def test_rank_deficient():
    rng = np.random.default_rng(3)
    V = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    C = V.conj().T @ V  # rank 2, 3x3
    pair = cholesky_det(C, rank=2)
    assert pair.A.shape == (2, 3)
    np.testing.assert_allclose(pair.A.conj().T @ pair.A, C, atol=1e-12)
    with pytest.raises(RankError):
        cholesky_det(np.diag([1.0, 1.0, 1.0]).astype(complex), rank=2)
    with pytest.raises(DomainError):
        cholesky_det(C, rank=4)


@pytest.mark.parametrize("M", [1, 2, 3, 4])
def test_recursion_matches_brute_force(M, rng):
    sys = random_system(rng, 8, M, delta=0.8)
    chain = OverlapChain(sys)
    for k in range(1, 9):
        for r in range(min(k, M) + 1):
            ref = gram_matrix(r, k, sys).entries
            got = chain.overlap(r, k).entries
            assert np.abs(got - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_recursion_step_short_variant(rng):
    # extended overlaps at k sites feed plain overlaps at k+1 sites for short gates
    sys = random_system(rng, 6, 4, delta=1.5)
    for k in range(1, 3):
        prev = {r: gram_matrix(r, k, sys, extended=True) for r in range(k + 2)}
        nxt = gram_recursion_step(prev, k, sys)
        for r, C in nxt.items():
            np.testing.assert_allclose(C.entries, gram_matrix(r, k + 1, sys).entries, atol=1e-11)
    with pytest.raises(DomainError):
        gram_recursion_step({0: np.ones((1, 1))}, 1, sys, width=5)


def test_extended_overlaps_from_l(rng):
    sys = random_system(rng, 6, 4, delta=0.3)
    for k in range(1, 4):
        for r in range(k + 1):
            L = l_matrix(r, k, sys)
            C = gram_matrix(r, k, sys)
            np.testing.assert_allclose(
                extended_from_plain(C, L).entries, gram_matrix(r, k, sys, extended=True).entries, atol=1e-10
            )


def test_l_closed_forms(rng):
    sys = random_system(rng, 5, 3, delta=0.9)
    x1, x2, x3 = sys.x
    s = sys.s
    np.testing.assert_allclose(l_matrix(1, 1, sys), [[1, 1]], rtol=1e-12)
    L21 = np.array([[1, 0, (x3 - x2) / (x1 - x2)], [0, 1, (x1 - x3) / (x1 - x2)]])
    np.testing.assert_allclose(l_matrix(1, 2, sys), L21, rtol=1e-12)
    den = s(2, 1) * x2 - s(1, 2) * x1
    L22 = np.array([[1, (s(3, 1) * x3 - s(1, 3) * x1) / den, (s(3, 2) * x3 - s(2, 3) * x2) / den]])
    np.testing.assert_allclose(l_matrix(2, 2, sys), L22, rtol=1e-12)
    with pytest.raises(DomainError):
        l_matrix(1, 3, sys)


def test_factor_chain_reproduces_overlaps(rng):
    sys = random_system(rng, 7, 3, delta=2.0)
    chain = FactorChain(sys)
    overlaps = OverlapChain(sys)
    for k in range(1, 8):
        for r in range(min(k, 3) + 1):
            F = chain.factor(r, k)
            G = overlaps.level(k)[r]
            np.testing.assert_allclose(F.conj().T @ F, G, atol=1e-10 * max(1, np.abs(G).max()))
    for k in range(1, 3):
        for r in range(k + 1):
            np.testing.assert_allclose(chain.l_matrix(r, k), overlaps.l_matrix(r, k), atol=1e-10)


def test_gate_blocks_are_orthonormal(rng):
    sys = random_system(rng, 6, 3, delta=0.5)
    chain = FactorChain(sys)
    for k in range(1, 6):
        blocks = chain.gate_blocks(k)
        for r in range(1, 4):
            if (0, r) not in blocks:
                continue
            Q = np.vstack([blocks[(0, r)], blocks[(1, r)]])
            np.testing.assert_allclose(Q.conj().T @ Q, np.eye(Q.shape[1]), atol=1e-13)
    with pytest.raises(DomainError):
        chain.gate_blocks(0)


def test_double_double_agrees_with_double(rng):
    sys = random_system(rng, 7, 4, delta=1.0)
    a, b = FactorChain(sys, "double"), FactorChain(sys, "dd")
    a.prepare(7)
    b.prepare(7)
    assert b.arithmetic == "dd"
    for r in range(5):
        np.testing.assert_allclose(a.factor(r, 7), b.factor(r, 7), atol=1e-11)
    with pytest.raises(DomainError):
        FactorChain(sys, "quad")


def test_dump_factors(tmp_path, rng):
    sys = random_system(rng, 4, 2, delta=0.5)
    out = dump_factors(sys, tmp_path / "f.json")
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc.keys() == out.keys()
    assert {"C/1/2", "A/1/2", "B/1/2", "Chat/1/1", "L/1/1"} <= set(doc)
    assert len(doc["L/1/1"]) == sector_dim(1, 1)
