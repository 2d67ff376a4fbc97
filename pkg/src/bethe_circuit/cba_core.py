"""Scattering amplitudes, coordinate Bethe wavefunctions and the Lambda tensors.

Two independent routes build the same (unnormalised) Bethe wavefunction:

* :func:`cba_wavefunction` sums over all momentum permutations with signs from
  inversion counting (the brute-force oracle, optionally regrouped by subsets);
* :func:`network_wavefunction` runs the Lambda transfer network site by site,
  where signs enter only through the ``(-1)**(m+1)`` factors of Lambda^1.
"""

from __future__ import annotations

import cmath
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from . import _dd, _kernels
from .errors import DegenerateMomentaError, DomainError
from .sectors import SectorBasis, drop_position, sector_basis, sector_dim

DEGENERACY_TOL = 1e-12

ScatteringFn = Callable[[complex, complex, float], complex]


def scattering_amplitude(x1: complex, x2: complex, delta: float) -> complex:
    """XXZ amplitude ``s_12 = 1 + x1 x2 - 2 delta x2``."""
    return 1 + x1 * x2 - 2 * delta * x2


def unit_scattering(x1: complex, x2: complex, delta: float) -> complex:
    """Constant amplitude ``s = 1``; the free-fermion wavefunction without its prefactor."""
    return 1.0 + 0j


def s_matrix(x1: complex, x2: complex, delta: float, scattering: ScatteringFn = scattering_amplitude) -> complex:
    """Two-magnon S matrix ``-s_12 / s_21``."""
    return -scattering(x1, x2, delta) / scattering(x2, x1, delta)


@dataclass(frozen=True)
class MagnonSystem:
    """Chain length, momentum variables ``x_a = exp(i p_a)`` and anisotropy.

    ``scattering`` defaults to the XXZ amplitude; any callable
    ``s(x_a, x_b, delta)`` is accepted.
    """

    N: int
    x: tuple[complex, ...]
    delta: float = 0.0
    scattering: ScatteringFn = field(default=scattering_amplitude, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(complex(v) for v in self.x))
        object.__setattr__(self, "delta", float(self.delta))
        if self.N < 0:
            raise DomainError(f"N must be non-negative, got {self.N}")
        if self.M > self.N:
            raise DomainError(f"M={self.M} magnons do not fit on N={self.N} qubits")
        for a, v in enumerate(self.x, start=1):
            if v == 0 or not cmath.isfinite(v):
                raise DomainError(f"x_{a} must be finite and nonzero, got {v}")

    @property
    def M(self) -> int:
        return len(self.x)

    @property
    def x_array(self) -> np.ndarray:
        return np.array(self.x, dtype=np.complex128)

    @classmethod
    def from_momenta(cls, N: int, momenta, delta: float = 0.0, scattering: ScatteringFn = scattering_amplitude):
        return cls(N, tuple(cmath.exp(1j * complex(p)) for p in momenta), delta, scattering)

    def with_scattering(self, scattering: ScatteringFn) -> MagnonSystem:
        return MagnonSystem(self.N, self.x, self.delta, scattering)

    def with_length(self, N: int) -> MagnonSystem:
        return MagnonSystem(N, self.x, self.delta, self.scattering)

    def s(self, a: int, b: int) -> complex:
        """``s_{ab}`` for 1-based momentum labels."""
        return self.scattering(self.x[a - 1], self.x[b - 1], self.delta)

    def check_nondegenerate(self, labels=None) -> None:
        check_nondegenerate([self.x[n - 1] for n in labels] if labels is not None else self.x)

    # JSON ------------------------------------------------------------------

    @classmethod
    def from_json(cls, doc) -> MagnonSystem:
        """Build from a dict, a JSON string or a path.

        Exactly one of ``"momenta"`` (the p_a) and ``"x"`` must be present.
        Complex entries may be ``{"re":..,"im":..}``, ``[re, im]`` or plain numbers.
        """
        if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
            doc = json.loads(Path(doc).read_text())
        elif isinstance(doc, str):
            doc = json.loads(doc)
        has_p, has_x = "momenta" in doc, "x" in doc
        if has_p == has_x:
            raise DomainError('system JSON needs exactly one of "momenta" and "x"')
        values = [_complex_from_json(v) for v in doc["momenta" if has_p else "x"]]
        if "M" in doc and int(doc["M"]) != len(values):
            raise DomainError(f'"M"={doc["M"]} but {len(values)} momenta given')
        delta = float(doc.get("delta", 0.0))
        if has_p:
            return cls.from_momenta(int(doc["N"]), values, delta)
        return cls(int(doc["N"]), tuple(values), delta)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "M": self.M,
            "delta": self.delta,
            "x": [{"re": v.real, "im": v.imag} for v in self.x],
        }


def _complex_from_json(v) -> complex:
    if isinstance(v, dict):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise DomainError(f"complex pair must have two entries, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def check_nondegenerate(xs) -> None:
    xs = [complex(v) for v in xs]
    for a in range(len(xs)):
        for b in range(a + 1, len(xs)):
            scale = max(abs(xs[a]), abs(xs[b]))
            if abs(xs[a] - xs[b]) < DEGENERACY_TOL * scale:
                raise DegenerateMomentaError(
                    f"degenerate momenta: x_{a + 1} and x_{b + 1} coincide ({xs[a]:.6g})"
                )


@dataclass(frozen=True)
class SectorVector:
    """Amplitudes of a state restricted to one U(1) sector; not normalised."""

    basis: SectorBasis
    amps: np.ndarray

    def __post_init__(self):
        if len(self.amps) != self.basis.dim:
            raise DomainError(f"{len(self.amps)} amplitudes for a basis of dimension {self.basis.dim}")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amps, dtype=dtype)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> SectorVector:
        return SectorVector(self.basis, self.amps / self.norm())

    def amplitude(self, positions: tuple[int, ...]) -> complex:
        return complex(self.amps[self.basis.index(tuple(positions)) - 1])

    def to_dense(self) -> np.ndarray:
        """Full ``2**k`` vector indexed by the integer key ``I``."""
        out = np.zeros(1 << self.basis.k, dtype=np.complex128)
        out[self.basis.masks()] = self.amps
        return out


@dataclass(frozen=True)
class LambdaBlock:
    """Sector-restricted Lambda map ``Lambda^{(i,r)}`` of width ``w``."""

    i: int
    r: int
    w: int
    matrix: np.ndarray


def collective_momentum(positions: tuple[int, ...], sys: MagnonSystem) -> complex:
    """Product ``x_{n_1} ... x_{n_r}``; the empty product is 1."""
    out = 1 + 0j
    for n in positions:
        out *= sys.x[n - 1]
    return out


def scattering_table(sys: MagnonSystem) -> np.ndarray:
    """``table[a-1, b-1] = s_{ab}`` for all momentum labels."""
    M = sys.M
    table = np.empty((M, M), dtype=np.complex128)
    for a in range(M):
        for b in range(M):
            table[a, b] = sys.scattering(sys.x[a], sys.x[b], sys.delta)
    return table


@lru_cache(maxsize=8192)
def _lambda_matrix(i: int, r: int, w: int, sys: MagnonSystem) -> np.ndarray:
    cols = sector_basis(r, w).order
    if i == 0:
        mat = np.diag([collective_momentum(p, sys) for p in cols]).astype(np.complex128)
    else:
        out_basis = sector_basis(r - 1, w)
        mat = np.zeros((out_basis.dim, len(cols)), dtype=np.complex128)
        for col, pos in enumerate(cols):
            for m in range(1, r + 1):
                reduced, sign = drop_position(pos, m)
                nm = pos[m - 1]
                val = sign * collective_momentum(reduced, sys)
                for j, nj in enumerate(pos, start=1):
                    if j != m:
                        val *= sys.s(nj, nm)
                mat[out_basis.index(reduced) - 1, col] = val
    mat.flags.writeable = False
    return mat


def lambda_block(i: int, r: int, w: int, sys: MagnonSystem) -> LambdaBlock:
    """``Lambda^{(i,r)}`` on ``w`` slots: diagonal shift factors (i=0) or one-magnon emission (i=1)."""
    if i not in (0, 1):
        raise DomainError(f"output bit must be 0 or 1, got {i}")
    if not 0 <= r <= w:
        raise DomainError(f"sector r={r} outside 0..{w}")
    if i > r:
        raise DomainError("Lambda^(1,0) does not exist: no magnon to emit")
    if w > sys.M:
        raise DomainError(f"width {w} exceeds the number of momenta M={sys.M}")
    return LambdaBlock(i, r, w, _lambda_matrix(i, r, w, sys))


def sector_offsets(w: int) -> list[int]:
    """Start of each sector in the sector-blocked ordering of ``2**w`` states."""
    offs = [0]
    for r in range(w + 1):
        offs.append(offs[-1] + sector_dim(r, w))
    return offs


def lambda_full(i: int, w: int, sys: MagnonSystem) -> np.ndarray:
    """Block matrix ``Lambda^i`` over all sectors, rows/columns in sector-blocked order."""
    offs = sector_offsets(w)
    out = np.zeros((1 << w, 1 << w), dtype=np.complex128)
    for r in range(i, w + 1):
        blk = lambda_block(i, r, w, sys).matrix
        out[offs[r - i] : offs[r - i + 1], offs[r] : offs[r + 1]] = blk
    return out


@lru_cache(maxsize=None)
def _permutation_data(r: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(r))), dtype=np.int64).reshape(-1 if r else 1, r)
    inversions = np.zeros(len(perms), dtype=np.int64)
    for p in range(r):
        for q in range(p + 1, r):
            inversions += perms[:, p] > perms[:, q]
    signs = np.where(inversions % 2 == 0, 1.0, -1.0)
    perms.flags.writeable = False
    signs.flags.writeable = False
    return perms, signs


def plane_wave_sum(ys, k: int, sigma: np.ndarray) -> np.ndarray:
    """Unnormalised Bethe amplitudes on the ``(len(ys), k)`` sector.

    ``sigma[a, b]`` is the scattering amplitude between ``ys[a]`` and ``ys[b]``.
    No degeneracy check is made.
    """
    ys = np.asarray(ys, dtype=np.complex128)
    r = len(ys)
    perms, signs = _permutation_data(r)
    weights = signs.astype(np.complex128)
    for p in range(r):
        for q in range(p):
            weights = weights * sigma[perms[:, p], perms[:, q]]
    order = sector_basis(r, k).order
    configs = np.array(order, dtype=np.int64).reshape(len(order), r) - 1
    ypow = np.ones((r, max(k, 1)), dtype=np.complex128)
    for m in range(1, k):
        ypow[:, m] = ypow[:, m - 1] * ys
    return _kernels.permutation_sum(ypow, perms, np.ascontiguousarray(weights), configs)


def scattering_table_dd(ys, sys: MagnonSystem) -> _dd.CDD:
    """Scattering amplitudes among ``ys`` in double-double.

    The two built-in amplitudes are evaluated in extended precision from the
    double inputs; any other callable is evaluated in double and promoted.
    """
    r = len(ys)
    if sys.scattering is unit_scattering:
        return _dd.CDD.ones((r, r))
    if sys.scattering is not scattering_amplitude:
        table = np.array([[sys.scattering(a, b, sys.delta) for b in ys] for a in ys], dtype=np.complex128)
        return _dd.CDD.from_complex(table.reshape(r, r))
    x = _dd.CDD.from_complex(np.asarray(ys, dtype=np.complex128))
    xa = x.map(lambda p: np.repeat(p[:, None], r, axis=1))
    xb = x.map(lambda p: np.repeat(p[None, :], r, axis=0))
    two_delta = _dd.CDD.from_complex(np.full((r, r), -2.0 * sys.delta))
    return _dd.CDD.ones((r, r)) + xa * xb + two_delta * xb


def _powers_dd(ys, k: int) -> _dd.CDD:
    """``out[m, n] = ys[m]**n`` for ``n < k`` in double-double."""
    r = len(ys)
    out = _dd.CDD.ones((r, max(k, 1)))
    x = _dd.CDD.from_complex(np.asarray(ys, dtype=np.complex128).reshape(r))
    for n in range(1, k):
        out[:, n] = out[:, n - 1] * x
    return out


def subset_sum_dd(ys, k: int, sigma: _dd.CDD) -> np.ndarray:
    """Plane-wave superposition regrouped by the set of momenta already placed.

    Reading magnons left to right, the factor picked up when momentum ``m`` is
    placed after the set ``S`` is ``prod_{a in S} s_{m a}`` times the sign
    ``(-1)**#{a in S : a > m}``; both depend only on ``(S, m)``.  Summing over
    permutations therefore collapses to a walk over subsets, ``O(2**r r)`` terms
    per configuration instead of ``O(r!)``, evaluated in double-double to
    survive the heavy cancellation between terms.
    """
    r = len(ys)
    order = sector_basis(r, k).order
    d = len(order)
    if r == 0:
        return np.ones(d, dtype=np.complex128)
    configs = np.array(order, dtype=np.int64).reshape(d, r) - 1
    full = 1 << r
    # G[S, m] = prod_{a in S} sigma[m, a]
    G = _dd.CDD.ones((full, r))
    for S in range(1, full):
        a = (S & -S).bit_length() - 1
        G[S] = G[S & (S - 1)] * sigma[:, a]
    popcount = np.array([bin(S).count("1") for S in range(full)])
    ypow = _powers_dd(ys, k)
    f = _dd.CDD.zeros((full, d))
    f.rh[0] = 1.0
    for t in range(r):
        layer = np.nonzero(popcount == t)[0]
        cols = configs[:, t]
        for m in range(r):
            Ss = layer[(layer >> m) & 1 == 0]
            if Ss.size == 0:
                continue
            above = np.array([bin(S >> (m + 1)).count("1") for S in Ss])
            coef = G[Ss, m]
            coef = coef.map(lambda p, neg=(above % 2 == 1): np.where(neg, -p, p))
            term = f[Ss] * coef.map(lambda p: p[:, None]) * ypow[m, cols].map(lambda p: p[None, :])
            f[Ss | (1 << m)] = f[Ss | (1 << m)] + term
    return f[full - 1].to_complex()


def cba_wavefunction(
    positions: tuple[int, ...], k: int, sys: MagnonSystem, *, check: bool = True, method: str = "subsets"
) -> SectorVector:
    """Bethe wavefunction on ``k`` qubits for the momentum subset ``positions``.

    ``method="permutations"`` evaluates the literal signed sum over all ``r!``
    orderings in double precision; the default ``"subsets"`` evaluates the same
    sum regrouped by placed-momentum sets in double-double (see
    :func:`subset_sum_dd`), which stays accurate when the terms cancel heavily.
    """
    positions = tuple(positions)
    r = len(positions)
    if r > k:
        raise DomainError(f"{r} magnons do not fit on {k} qubits")
    if any(not 1 <= n <= sys.M for n in positions) or list(positions) != sorted(set(positions)):
        raise DomainError(f"momentum labels {positions!r} must be increasing within 1..{sys.M}")
    ys = [sys.x[n - 1] for n in positions]
    if check:
        check_nondegenerate(ys)
    if method == "subsets":
        return SectorVector(sector_basis(r, k), subset_sum_dd(ys, k, scattering_table_dd(ys, sys)))
    if method != "permutations":
        raise DomainError(f"unknown method {method!r}")
    sigma = np.empty((r, r), dtype=np.complex128)
    for a in range(r):
        for b in range(r):
            sigma[a, b] = sys.scattering(ys[a], ys[b], sys.delta)
    return SectorVector(sector_basis(r, k), plane_wave_sum(ys, k, sigma))


def lambda_dd(r: int, w: int, sys: MagnonSystem):
    """Double-double Lambda entries on ``w`` slots for sector ``r``.

    Returns the diagonal of ``Lambda^{(0,r)}`` and, when ``r >= 1``, the
    column-sparse ``Lambda^{(1,r)}`` as ``(rows, vals)``: column ``b`` has entry
    ``vals[b, m]`` in row ``rows[b, m]`` (0-based) for each dropped slot ``m``.
    """
    cols = sector_basis(r, w).order
    d = len(cols)
    ys = list(sys.x[:w])
    xd = _dd.CDD.from_complex(np.asarray(ys, dtype=np.complex128).reshape(w))
    sig = scattering_table_dd(ys, sys)
    cfg = np.array(cols, dtype=np.int64).reshape(d, r) - 1
    diag = _dd.CDD.ones((d,))
    for j in range(r):
        diag = diag * xd[cfg[:, j]]
    if r == 0:
        return diag, None
    out_basis = sector_basis(r - 1, w)
    rows = np.empty((d, r), dtype=np.int64)
    vals = _dd.CDD.zeros((d, r))
    for m in range(r):
        v = _dd.CDD.ones((d,))
        for j in range(r):
            if j == m:
                continue
            v = v * sig[cfg[:, j], cfg[:, m]] * xd[cfg[:, j]]
        if m % 2:
            v = -v
        vals[:, m] = v
        rows[:, m] = [out_basis.index(p[:m] + p[m + 1 :]) - 1 for p in cols]
    return diag, (rows, vals)


def network_wavefunction(positions: tuple[int, ...], k: int, sys: MagnonSystem, *, check: bool = True) -> SectorVector:
    """Same state as :func:`cba_wavefunction`, built by the Lambda transfer network.

    The auxiliary register holds ``M`` slots, starts at ``|n_1 ... n_r>`` and at
    each of the ``k`` levels emits one physical bit through ``Lambda^0`` or
    ``Lambda^1``; the result is read off on the empty auxiliary state.
    """
    positions = tuple(positions)
    r = len(positions)
    if r > k:
        raise DomainError(f"{r} magnons do not fit on {k} qubits")
    if check:
        sys.check_nondegenerate(positions)
    M = sys.M
    offs = sector_offsets(M)
    lam = (lambda_full(0, M, sys), lambda_full(1, M, sys))
    start = np.zeros(1 << M, dtype=np.complex128)
    start[offs[r] + sector_basis(r, M).index(positions) - 1] = 1.0
    # physical prefix mask -> auxiliary vector
    layer = {0: start}
    for level in range(k):
        nxt: dict[int, np.ndarray] = {}
        for prefix, vec in layer.items():
            for i in (0, 1):
                out = lam[i] @ vec
                if not out.any():
                    continue
                key = prefix | (i << level)
                if key in nxt:
                    nxt[key] = nxt[key] + out
                else:
                    nxt[key] = out
        layer = nxt
    basis = sector_basis(r, k)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    lookup = {int(m): a for a, m in enumerate(basis.masks())}
    for prefix, vec in layer.items():
        if prefix in lookup:
            amps[lookup[prefix]] = vec[0]
    return SectorVector(basis, amps)


def one_magnon_norm(k: int, x: complex) -> float:
    """``C_k = sum_{n<k} |x|^{2n}``, the squared norm of the one-magnon plane wave."""
    if k < 1:
        raise DomainError(f"k must be at least 1, got {k}")
    q = abs(x) ** 2
    return float(sum(q**n for n in range(k)))
