"""Hot inner loops, each with a numba-compiled and a pure-numpy implementation.

The compiled path is used when numba imports and ``BETHE_CIRCUIT_NUMBA`` is not
set to ``0``/``false``/``off``.  Both paths are importable by name
(``*_numba`` / ``*_numpy``) so tests and the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_flag = os.environ.get("BETHE_CIRCUIT_NUMBA", "1").strip().lower()
USE_NUMBA = _HAVE_NUMBA and _flag not in {"0", "false", "off", "no"}


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def _jit(func):
    if _HAVE_NUMBA:
        return njit(cache=True, nogil=True)(func)
    return None


# ---------------------------------------------------------------------------
# Brute-force permutation sum for plane-wave superpositions.
#
#   amps[c] = sum_p weights[p] * prod_j ypow[perms[p, j], configs[c, j]]
#
# ``perms`` is in lexicographic (rank) order and the sum runs in that order, so
# both implementations reduce deterministically.
# ---------------------------------------------------------------------------


def permutation_sum_numpy(ypow, perms, weights, configs):
    d, r = configs.shape
    amps = np.zeros(d, dtype=np.complex128)
    if r == 0:
        amps[:] = weights.sum()
        return amps
    for c in range(d):
        terms = weights.copy()
        for j in range(r):
            terms *= ypow[perms[:, j], configs[c, j]]
        amps[c] = terms.sum()
    return amps


def _permutation_sum_py(ypow, perms, weights, configs):
    d, r = configs.shape
    n_perm = perms.shape[0]
    amps = np.zeros(d, dtype=np.complex128)
    for c in range(d):
        acc = 0j
        for p in range(n_perm):
            term = weights[p]
            for j in range(r):
                term *= ypow[perms[p, j], configs[c, j]]
            acc += term
        amps[c] = acc
    return amps


permutation_sum_numba = _jit(_permutation_sum_py)


# ---------------------------------------------------------------------------
# Gauss-Jordan sweep over a rectangular Hermitian-leading matrix.
#
# Input ``G`` is d x D (d <= D) whose leading d x d block is Hermitian positive
# definite.  After c columns have been eliminated, the top c rows hold the
# Cramer ratios det_c G_{a->b} / det_c G and the remaining rows hold Schur
# complements det_{c+1} G_{(c+1)->b} / det_c G.  We record:
#   pivots[c]      = det_{c+1} / det_c
#   upper[c, b]    = det_{c+1} G_{c->b} / det_c       (row c at pivot time)
#   cramer[a, c]   = det_c G_{a->c} / det_c  for a < c (column c before pivoting)
#   ratios         = final top rows, i.e. [I | C^{-1} G[:, d:]]
# status is -1 on success, otherwise the failing pivot index.
# ---------------------------------------------------------------------------


def _minor_sweep_py(G, rel_tol):
    d, D = G.shape
    work = G.copy()
    pivots = np.zeros(d, dtype=np.float64)
    upper = np.zeros((d, D), dtype=np.complex128)
    cramer = np.zeros((d, d), dtype=np.complex128)
    scale = 0.0
    for c in range(d):
        v = abs(G[c, c].real)
        if v > scale:
            scale = v
    status = -1
    for c in range(d):
        for a in range(c):
            cramer[a, c] = work[a, c]
        piv = work[c, c].real
        if not piv > rel_tol * scale:
            status = c
            break
        pivots[c] = piv
        for b in range(c, D):
            upper[c, b] = work[c, b]
        inv = 1.0 / piv
        for b in range(D):
            work[c, b] *= inv
        for a in range(d):
            if a == c:
                continue
            f = work[a, c]
            if f == 0:
                continue
            for b in range(D):
                work[a, b] -= f * work[c, b]
    return pivots, upper, cramer, work, status


def minor_sweep_numpy(G, rel_tol):
    d, D = G.shape
    work = np.array(G, dtype=np.complex128, copy=True)
    pivots = np.zeros(d)
    upper = np.zeros((d, D), dtype=np.complex128)
    cramer = np.zeros((d, d), dtype=np.complex128)
    scale = np.max(np.abs(np.real(np.diag(G[:, :d])))) if d else 0.0
    for c in range(d):
        cramer[:c, c] = work[:c, c]
        piv = work[c, c].real
        if not piv > rel_tol * scale:
            return pivots, upper, cramer, work, c
        pivots[c] = piv
        upper[c, c:] = work[c, c:]
        work[c, :] /= piv
        f = work[:, c].copy()
        f[c] = 0.0
        work -= np.outer(f, work[c, :])
    return pivots, upper, cramer, work, -1


minor_sweep_numba = _jit(_minor_sweep_py)


# ---------------------------------------------------------------------------
# Colexicographic ranking of bitmasks (0-based rank).
# ---------------------------------------------------------------------------


def colex_rank_numpy(masks, nbits, binom):
    masks = np.asarray(masks, dtype=np.int64)
    rank = np.zeros(masks.shape, dtype=np.int64)
    count = np.zeros(masks.shape, dtype=np.int64)
    for p in range(nbits):
        bit = (masks >> p) & 1
        count += bit
        rank += bit * binom[p, count]
    return rank


# ---------------------------------------------------------------------------
# Apply a dense w-qubit U(1)-preserving gate to a state stored in one sector.
#
# ``masks`` lists the sector's basis states (colex order), ``q0`` is the 0-based
# position of the gate's first qubit, ``groups``/``offsets`` list the local
# w-bit configurations grouped by popcount.
# ---------------------------------------------------------------------------


def _local_groups(w):
    locs = np.arange(1 << w, dtype=np.int64)
    pcs = np.array([bin(int(v)).count("1") for v in locs], dtype=np.int64)
    order = np.argsort(pcs, kind="stable")
    offsets = np.zeros(w + 2, dtype=np.int64)
    for c in range(w + 1):
        offsets[c + 1] = offsets[c] + np.count_nonzero(pcs == c)
    return locs[order], offsets


def apply_gate_numpy(amps, masks, U, q0, w, nbits, binom):
    groups, offsets = _local_groups(w)
    wmask = (1 << w) - 1
    local = (masks >> q0) & wmask
    outside = masks & ~(wmask << q0)
    pcs = np.zeros_like(local)
    for b in range(w):
        pcs += (local >> b) & 1
    out = np.zeros_like(amps)
    for c in range(w + 1):
        sel = np.nonzero(pcs == c)[0]
        if sel.size == 0:
            continue
        targets = groups[offsets[c] : offsets[c + 1]]
        dst = colex_rank_numpy(outside[sel][:, None] | (targets[None, :] << q0), nbits, binom)
        contrib = U[targets[None, :], local[sel][:, None]] * amps[sel][:, None]
        np.add.at(out, dst.ravel(), contrib.ravel())
    return out


def _apply_gate_py(amps, masks, U, q0, w, nbits, binom, groups, offsets):
    wmask = (1 << w) - 1
    out = np.zeros_like(amps)
    for s in range(masks.shape[0]):
        a = amps[s]
        if a == 0:
            continue
        mask = masks[s]
        local = (mask >> q0) & wmask
        outside = mask & ~(wmask << q0)
        pc = 0
        for b in range(w):
            pc += (local >> b) & 1
        for g in range(offsets[pc], offsets[pc + 1]):
            tl = groups[g]
            u = U[tl, local]
            if u == 0:
                continue
            t = outside | (tl << q0)
            rank = 0
            count = 0
            for p in range(nbits):
                if (t >> p) & 1:
                    count += 1
                    rank += binom[p, count]
            out[rank] += u * a
    return out


_apply_gate_compiled = _jit(_apply_gate_py)


def apply_gate_numba(amps, masks, U, q0, w, nbits, binom):
    groups, offsets = _local_groups(w)
    return _apply_gate_compiled(amps, masks, np.ascontiguousarray(U), q0, w, nbits, binom, groups, offsets)


# ---------------------------------------------------------------------------
# Dispatchers
# ---------------------------------------------------------------------------


def permutation_sum(ypow, perms, weights, configs):
    if USE_NUMBA:
        return permutation_sum_numba(ypow, perms, weights, configs)
    return permutation_sum_numpy(ypow, perms, weights, configs)


def minor_sweep(G, rel_tol):
    G = np.ascontiguousarray(G, dtype=np.complex128)
    if USE_NUMBA:
        return minor_sweep_numba(G, float(rel_tol))
    return minor_sweep_numpy(G, rel_tol)


def apply_gate(amps, masks, U, q0, w, nbits, binom):
    if USE_NUMBA:
        return apply_gate_numba(amps, masks, U, q0, w, nbits, binom)
    return apply_gate_numpy(amps, masks, U, q0, w, nbits, binom)
