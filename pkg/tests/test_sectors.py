from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bethe_circuit.errors import DomainError
from bethe_circuit.sectors import (
    binomial_table,
    drop_position,
    index_to_positions,
    mask_to_positions,
    positions_to_index,
    positions_to_mask,
    sector_basis,
    sector_dim,
    sector_masks,
)


@st.composite
def subsets(draw, kmax=14):
    k = draw(st.integers(1, kmax))
    r = draw(st.integers(0, k))
    pos = draw(st.lists(st.integers(1, k), min_size=r, max_size=r, unique=True))
    return tuple(sorted(pos)), k


def test_dims():
    assert sector_dim(0, 0) == 1
    assert sector_dim(2, 4) == 6
    assert [sector_dim(r, 5) for r in range(6)] == [1, 5, 10, 10, 5, 1]
    with pytest.raises(DomainError):
        sector_dim(3, 2)
    with pytest.raises(DomainError):
        sector_dim(-1, 2)


def test_small_ranks():
    # order by the integer key: |1100> < |1010> < |0110> < |1001> ...
    assert sector_basis(2, 4).order == ((1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4))
    assert positions_to_index((2, 3), 4) == 3
    assert index_to_positions(4, 2, 4) == (1, 4)


@given(subsets())
def test_rank_roundtrip(case):
    pos, k = case
    a = positions_to_index(pos, k)
    assert 1 <= a <= comb(k, len(pos))
    assert index_to_positions(a, len(pos), k) == pos
    assert mask_to_positions(positions_to_mask(pos)) == pos


@given(subsets(kmax=10))
def test_rank_ignores_trailing_sites(case):
    # a state supported on the first k sites has the same rank in any wider register
    pos, k = case
    assert positions_to_index(pos, k) == positions_to_index(pos, k + 3)


@given(st.integers(1, 10), st.data())
def test_masks_sorted(k, data):
    r = data.draw(st.integers(0, k))
    masks = sector_masks(r, k)
    assert np.all(np.diff(masks) > 0)
    assert all(bin(int(m)).count("1") == r for m in masks)


def test_drop_position():
    assert drop_position((2, 5, 7), 1) == ((5, 7), 1)
    assert drop_position((2, 5, 7), 2) == ((2, 7), -1)
    with pytest.raises(DomainError):
        drop_position((1,), 2)


def test_bad_positions():
    for bad in [(2, 1), (1, 1), (0, 2), (1, 9)]:
        with pytest.raises(DomainError):
            positions_to_index(bad, 4)
    with pytest.raises(DomainError):
        index_to_positions(7, 2, 4)


def test_binomial_table():
    t = binomial_table(8)
    assert t[8, 3] == 56 and t[3, 5] == 0
