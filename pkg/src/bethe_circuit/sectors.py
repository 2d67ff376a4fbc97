"""U(1) sector combinatorics.

A basis state of ``k`` qubits with ``r`` qubits in ``|1>`` is labelled either by
its occupied positions ``(n_1 < ... < n_r)`` (1-based, leftmost qubit is 1) or by
its rank ``a`` (1-based) in the list of all such states sorted by the integer key
``I = sum_j i_j 2**(j-1)``.  Sorting by ``I`` is colexicographic order on the
position tuples, so the rank has the closed form ``a = 1 + sum_j C(n_j - 1, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import DomainError

_INT64_MAX = 2**63 - 1


def sector_dim(r: int, k: int) -> int:
    """Number of ``k``-qubit basis states with exactly ``r`` ones."""
    if r < 0 or k < 0:
        raise DomainError(f"sector_dim needs non-negative arguments, got r={r}, k={k}")
    if r > k:
        raise DomainError(f"no {r}-magnon states on {k} qubits")
    d = comb(k, r)
    if d > _INT64_MAX:
        raise DomainError(f"sector dimension C({k},{r}) overflows 64 bits")
    return d


def _check_positions(positions: tuple[int, ...], k: int) -> None:
    prev = 0
    for n in positions:
        if not isinstance(n, (int, np.integer)):
            raise DomainError(f"positions must be integers, got {positions!r}")
        if n <= prev:
            raise DomainError(f"positions must be strictly increasing, got {positions!r}")
        if n > k:
            raise DomainError(f"position {n} outside 1..{k}")
        prev = n


def positions_to_index(positions: tuple[int, ...], k: int) -> int:
    """Rank ``a`` (1-based) of a position tuple among all ``r``-subsets of ``k``."""
    positions = tuple(positions)
    _check_positions(positions, k)
    return 1 + sum(comb(n - 1, j) for j, n in enumerate(positions, start=1))


def index_to_positions(a: int, r: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`positions_to_index`."""
    d = sector_dim(r, k)
    if not 1 <= a <= d:
        raise DomainError(f"index {a} outside 1..{d} for sector (r={r}, k={k})")
    rem = a - 1
    out = []
    upper = k
    for j in range(r, 0, -1):
        # largest n with C(n-1, j) <= rem
        n = upper
        while comb(n - 1, j) > rem:
            n -= 1
        out.append(n)
        rem -= comb(n - 1, j)
        upper = n - 1
    return tuple(reversed(out))


def drop_position(positions: tuple[int, ...], m: int) -> tuple[tuple[int, ...], int]:
    """Remove the ``m``-th occupied position; returns the shorter tuple and ``(-1)**(m+1)``."""
    positions = tuple(positions)
    if not 1 <= m <= len(positions):
        raise DomainError(f"m={m} outside 1..{len(positions)}")
    sign = 1 if m % 2 == 1 else -1
    return positions[: m - 1] + positions[m:], sign


def positions_to_mask(positions: tuple[int, ...]) -> int:
    """Integer key ``I`` of a position tuple."""
    return sum(1 << (n - 1) for n in positions)


def mask_to_positions(mask: int) -> tuple[int, ...]:
    out = []
    n = 1
    while mask:
        if mask & 1:
            out.append(n)
        mask >>= 1
        n += 1
    return tuple(out)


@dataclass(frozen=True)
class SectorBasis:
    """Ordered basis of the ``r``-magnon sector of ``k`` qubits."""

    r: int
    k: int
    order: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.order)

    @property
    def dim(self) -> int:
        return len(self.order)

    def index(self, positions: tuple[int, ...]) -> int:
        """1-based index of ``positions`` in this basis."""
        if len(positions) != self.r:
            raise DomainError(f"expected {self.r} positions, got {positions!r}")
        return positions_to_index(positions, self.k)

    def masks(self) -> np.ndarray:
        """Integer keys ``I`` of the basis states, increasing."""
        return sector_masks(self.r, self.k)


@lru_cache(maxsize=None)
def sector_basis(r: int, k: int) -> SectorBasis:
    d = sector_dim(r, k)
    return SectorBasis(r, k, tuple(index_to_positions(a, r, k) for a in range(1, d + 1)))


@lru_cache(maxsize=None)
def sector_masks(r: int, k: int) -> np.ndarray:
    masks = np.array([positions_to_mask(p) for p in sector_basis(r, k).order], dtype=np.int64)
    masks.flags.writeable = False
    return masks


@lru_cache(maxsize=None)
def binomial_table(kmax: int) -> np.ndarray:
    """``table[n, j] = C(n, j)`` for ``0 <= n, j <= kmax``; used by the compiled kernels."""
    table = np.zeros((kmax + 1, kmax + 1), dtype=np.int64)
    for n in range(kmax + 1):
        for j in range(n + 1):
            table[n, j] = comb(n, j)
    table.flags.writeable = False
    return table
