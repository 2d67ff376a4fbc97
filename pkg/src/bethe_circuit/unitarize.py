"""Overlap matrices of partial Bethe wavefunctions and their Cholesky factors.

The overlap of the states produced from inputs ``a`` and ``b`` is
``C_ab = <Psi_a|Psi_b>``.  Two routes compute it:

* :func:`gram_matrix` takes inner products of brute-force wavefunctions;
* :func:`gram_recursion_step` / :class:`OverlapChain` apply
  ``C_{k+1} = sum_i Lambda^{(i)+} C_k Lambda^{(i)}`` site by site.

Because sector bases are in colexicographic order, the states whose momentum
labels lie in ``1..w`` come first.  A single chain over ``M`` labels therefore
contains every overlap the construction needs as a leading block: the long
``C_k`` (all ``M`` labels), the short ``C_k`` (labels ``1..k``) and the
extended ``C^_k`` (labels ``1..k+1``).

Cholesky factors use the determinant closed forms.  Every minor they need
comes out of one Gauss-Jordan sweep (see ``_kernels.minor_sweep``), which
costs ``O(d^2 D)`` rather than one determinant per entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from . import _dd, _kernels
from .cba_core import MagnonSystem, cba_wavefunction, lambda_block, lambda_dd
from .errors import DomainError, NotPositiveDefiniteError, RankError
from .sectors import sector_basis, sector_dim

PIVOT_TOL = 1e-10
RANK_RESIDUAL_TOL = 1e-8

Kind = Literal["plain", "extended"]


@dataclass(frozen=True)
class OverlapMatrix:
    """Gram matrix of one sector; ``kind='extended'`` is the overcomplete ``C^``."""

    r: int
    k: int
    kind: str
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CholeskyPair:
    """Upper factor ``A`` (``A^+ A = C``) and ``B``, the inverse of its leading square block.

    ``L = B A`` is the identity for square factors and the bridging matrix for
    rectangular (semidefinite) ones.
    """

    A: np.ndarray
    B: np.ndarray
    L: np.ndarray
    pivots: np.ndarray
    r: int = -1
    k: int = -1

    @property
    def leading_minors(self) -> np.ndarray:
        """``det_a C`` for ``a = 1..d``."""
        return np.cumprod(self.pivots)


def _width(k: int, M: int, extended: bool) -> int:
    if k >= M:
        if extended:
            raise DomainError(f"extended overlaps only exist for short gates (k={k} < M={M} fails)")
        return M
    return k + 1 if extended else k


def gram_matrix(r: int, k: int, sys: MagnonSystem, extended: bool = False) -> OverlapMatrix:
    """Overlap matrix by inner products of brute-force wavefunctions (reference path)."""
    w = _width(k, sys.M, extended)
    if not 0 <= r <= w:
        raise DomainError(f"sector r={r} outside 0..{w}")
    basis = sector_basis(r, w)
    if r > k:
        entries = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    else:
        states = np.column_stack([cba_wavefunction(p, k, sys).amps for p in basis.order])
        entries = states.conj().T @ states
    return OverlapMatrix(r, k, "extended" if extended else "plain", entries)


def gram_recursion_step(C_prev, k: int, sys: MagnonSystem, width: int | None = None) -> dict[int, OverlapMatrix]:
    """Advance overlaps from ``k`` to ``k+1`` sites.

    ``C_prev`` maps each sector ``r`` to the overlaps at ``k`` sites, on momentum
    labels ``1..width``.  By default ``width`` is ``M`` for ``k >= M`` (plain
    overlaps in, plain out) and ``k+1`` otherwise (extended in, plain out).
    """
    M = sys.M
    w = width if width is not None else (M if k >= M else k + 1)
    if w > M:
        raise DomainError(f"width {w} exceeds M={M}")
    mats = {r: np.asarray(getattr(c, "entries", c)) for r, c in C_prev.items()}
    out = {}
    for r in range(w + 1):
        d = sector_dim(r, w)
        if r not in mats or mats[r].shape != (d, d):
            raise DomainError(f"sector {r} needs a {d}x{d} overlap at width {w}")
        lam0 = lambda_block(0, r, w, sys).matrix
        acc = lam0.conj().T @ mats[r] @ lam0
        if r >= 1:
            lam1 = lambda_block(1, r, w, sys).matrix
            acc = acc + lam1.conj().T @ mats[r - 1] @ lam1
        acc = 0.5 * (acc + acc.conj().T)
        if w == min(k + 1, M) or (w == M and k + 1 >= M):
            kind = "plain"
        elif w == k + 2:
            kind = "extended"
        else:
            kind = "general"
        out[r] = OverlapMatrix(r, k + 1, kind, acc)
    return out


def extended_from_plain(C: OverlapMatrix, L: np.ndarray) -> OverlapMatrix:
    """``C^ = L^+ C L``."""
    L = np.asarray(L)
    ent = L.conj().T @ C.entries @ L
    return OverlapMatrix(C.r, C.k, "extended", 0.5 * (ent + ent.conj().T))


class OverlapChain:
    """Overlaps on all ``M`` momentum labels for ``k = 0, 1, ...`` sites, with cached factors."""

    def __init__(self, sys: MagnonSystem):
        self.sys = sys
        M = sys.M
        base = {}
        for r in range(M + 1):
            d = sector_dim(r, M)
            base[r] = np.zeros((d, d), dtype=np.complex128)
        base[0][0, 0] = 1.0
        self._levels: list[dict[int, np.ndarray]] = [base]
        self._factors: dict[tuple, CholeskyPair] = {}

    def level(self, k: int) -> dict[int, np.ndarray]:
        while len(self._levels) <= k:
            kk = len(self._levels) - 1
            step = gram_recursion_step(self._levels[kk], kk, self.sys, width=self.sys.M)
            self._levels.append({r: m.entries for r, m in step.items()})
        return self._levels[k]

    def overlap(self, r: int, k: int, extended: bool = False) -> OverlapMatrix:
        w = _width(k, self.sys.M, extended)
        d = sector_dim(r, w)
        return OverlapMatrix(r, k, "extended" if extended else "plain", self.level(k)[r][:d, :d].copy())

    def factors(self, r: int, k: int, extended: bool = False) -> CholeskyPair:
        key = (r, k, extended)
        if key not in self._factors:
            C = self.overlap(r, k, extended)
            rank = sector_dim(r, k) if r <= k else 0
            self._factors[key] = cholesky_det(C, rank=rank if extended else None)
        return self._factors[key]

    def l_matrix(self, r: int, k: int) -> np.ndarray:
        return self.factors(r, k, extended=True).L


def cholesky_det(C, rank: int | None = None, *, pivot_tol: float = PIVOT_TOL) -> CholeskyPair:
    """Cholesky factor from the determinant closed forms.

    ``A_ab = det_a C_{a->b} / sqrt(det_{a-1} C det_a C)`` and
    ``B_ab = -det_{b-1} C_{a->b} / sqrt(det_{b-1} C det_b C)`` (``a < b``),
    ``B_aa = sqrt(det_{a-1} C / det_a C)``, where ``C_{a->b}`` has column ``a``
    replaced by column ``b``.  With ``rank=d`` smaller than the dimension the
    matrix is treated as semidefinite of that rank: ``A`` has ``d`` rows and
    its columns run over the full dimension.
    """
    entries = np.asarray(getattr(C, "entries", C), dtype=np.complex128)
    r, k = getattr(C, "r", -1), getattr(C, "k", -1)
    D = entries.shape[0]
    if entries.shape != (D, D):
        raise DomainError(f"overlap matrix must be square, got {entries.shape}")
    d = D if rank is None else int(rank)
    if not 0 <= d <= D:
        raise DomainError(f"rank {d} outside 0..{D}")
    if d == 0:
        empty = np.zeros((0, D), dtype=np.complex128)
        return CholeskyPair(empty, np.zeros((0, 0), dtype=np.complex128), empty, np.zeros(0), r, k)
    pivots, upper, cramer, ratios, status = _kernels.minor_sweep(entries[:d, :], pivot_tol)
    if status >= 0:
        cls = RankError if d < D else NotPositiveDefiniteError
        raise cls(
            f"leading minor {status + 1} of the sector r={r}, k={k} overlap is not positive "
            f"(pivot {pivots[status] if status < len(pivots) else float('nan'):.3g})",
            sector=r,
            k=k,
        )
    root = np.sqrt(pivots)
    A = upper / root[:, None]
    B = -cramer / root[None, :]
    B[np.diag_indices(d)] = 1.0 / root
    pair = CholeskyPair(A, B, ratios, pivots, r, k)
    if d < D:
        resid = np.max(np.abs(A.conj().T @ A - entries))
        if resid > RANK_RESIDUAL_TOL * max(1.0, np.max(np.abs(entries))):
            raise RankError(
                f"sector r={r}, k={k}: overlap is not of rank {d} (residual {resid:.3g})", sector=r, k=k
            )
    return pair


def cholesky_standard(C) -> np.ndarray:
    """Upper Cholesky factor via LAPACK; the independent cross-check for :func:`cholesky_det`."""
    entries = np.asarray(getattr(C, "entries", C), dtype=np.complex128)
    try:
        lower = np.linalg.cholesky(entries)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return lower.conj().T


def l_matrix(r: int, k: int, sys: MagnonSystem, chain: OverlapChain | None = None) -> np.ndarray:
    """Bridging matrix ``L_ab = det C_{a->b} / det C`` (``d_{r,k} x d_{r,k+1}``) for short gates."""
    M = sys.M
    if k >= M:
        raise DomainError(f"L is defined for short gates only (k={k} >= M={M})")
    if not 0 <= r <= k:
        raise DomainError(f"sector r={r} outside 0..{k}")
    chain = chain or OverlapChain(sys)
    return chain.l_matrix(r, k)


def _pairs(mat: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.atleast_2d(mat)]


def dump_factors(sys: MagnonSystem, path, k_max: int | None = None) -> dict:
    """Write every C, C^, A, B and L to a JSON file keyed ``"<name>/<r>/<k>"``."""
    chain = OverlapChain(sys)
    k_max = sys.N if k_max is None else k_max
    out = {}
    for k in range(1, k_max + 1):
        for r in range(0, min(k, sys.M) + 1):
            C = chain.overlap(r, k)
            out[f"C/{r}/{k}"] = _pairs(C.entries)
            pair = chain.factors(r, k)
            out[f"A/{r}/{k}"] = _pairs(pair.A)
            out[f"B/{r}/{k}"] = _pairs(pair.B)
        if k < sys.M:
            for r in range(0, k + 2):
                out[f"Chat/{r}/{k}"] = _pairs(chain.overlap(r, k, extended=True).entries)
                ext = chain.factors(r, k, extended=True)
                if ext.A.shape[0]:
                    out[f"Ahat/{r}/{k}"] = _pairs(ext.A)
                    out[f"L/{r}/{k}"] = _pairs(ext.L)
    Path(path).write_text(json.dumps(out, indent=1))
    return out


QR_RANK_TOL = 0.0
EXTENDED_SWITCH = 1e-10


def _fix_phase(Q, R, diag):
    mags = np.abs(diag)
    phase = np.where(mags > 0, diag / np.where(mags > 0, mags, 1.0), 1.0)
    return Q * phase[None, :], R * phase.conj()[:, None]


class FactorChain:
    """Triangular factors propagated by QR, never forming an overlap matrix.

    ``F_k^{(r)}`` has ``d_{r, min(k, M)}`` rows and ``d_{r,M}`` columns, is upper
    trapezoidal with positive diagonal and satisfies ``F^+ F = G_k^{(r)}``, the
    overlaps on all ``M`` momentum labels.  Its leading columns are therefore
    the Cholesky factor ``A_k`` (long) or the rectangular ``A_k`` of the
    extended overlap (short).  One step stacks ``F_k^{(r-i)} Lambda^{(i,r)}``
    over ``i`` and factors the result as ``Q R``: ``R`` is ``F_{k+1}^{(r)}`` and
    ``Q`` holds the gate blocks ``P_k^{(i,r)} = A_k Lambda B_{k+1}``, orthonormal
    to rounding error however ill-conditioned the overlaps are.

    Only an exact zero (or non-finite value) on the diagonal of ``R`` counts as
    singular.  The smallest diagonal ratio seen is kept in ``min_diag_ratio``.
    When it falls below ``EXTENDED_SWITCH`` the gates become sensitive to the
    last bits of the Lambda entries, so with ``precision="auto"`` the whole
    chain is recomputed in double-double (Lambda entries included) and the
    gates are rounded to double at the end.  ``"double"`` and ``"dd"`` force
    one arithmetic.
    """

    def __init__(self, sys: MagnonSystem, precision: str = "auto", rank_tol: float = QR_RANK_TOL):
        if precision not in ("auto", "double", "dd"):
            raise DomainError(f"precision must be auto, double or dd, got {precision!r}")
        self.sys = sys
        self.rank_tol = rank_tol
        self.requested = precision
        self._reset("dd" if precision == "dd" else "double")

    def _reset(self, arithmetic: str) -> None:
        M = self.sys.M
        self.arithmetic = arithmetic
        if arithmetic == "dd":
            base = {r: _dd.CDD.zeros((0, sector_dim(r, M))) for r in range(M + 1)}
            base[0] = _dd.CDD.ones((1, 1))
            self._lam = {r: lambda_dd(r, M, self.sys) for r in range(M + 1)}
        else:
            base = {r: np.zeros((0, sector_dim(r, M)), dtype=np.complex128) for r in range(M + 1)}
            base[0] = np.ones((1, 1), dtype=np.complex128)
        self._F: list[dict] = [base]
        self._Q: list[dict[int, np.ndarray]] = []
        self.min_diag_ratio = 1.0

    def _check(self, diag, r: int, k: int) -> None:
        mags = np.abs(diag)
        ratio = mags.min() / mags.max() if mags.max() > 0 else 0.0
        self.min_diag_ratio = min(self.min_diag_ratio, ratio)
        if not np.isfinite(ratio) or ratio <= self.rank_tol:
            raise NotPositiveDefiniteError(
                f"sector r={r}, k={k}: overlap is singular at row {int(np.argmin(mags)) + 1}", sector=r, k=k
            )

    def _step_double(self, F, k: int):
        M = self.sys.M
        nxt, qs = {}, {}
        for r in range(M + 1):
            parts = [F[r] @ lambda_block(0, r, M, self.sys).matrix]
            if r >= 1:
                parts.append(F[r - 1] @ lambda_block(1, r, M, self.sys).matrix)
            W = np.vstack(parts)
            if W.shape[0] == 0:
                nxt[r], qs[r] = W, np.zeros((0, 0), dtype=np.complex128)
                continue
            Q, R = np.linalg.qr(W, mode="reduced")
            diag = np.diag(R).copy()
            self._check(diag, r, k + 1)
            qs[r], nxt[r] = _fix_phase(Q, R, diag)
        return nxt, qs

    def _step_dd(self, F, k: int):
        M = self.sys.M
        nxt, qs = {}, {}
        for r in range(M + 1):
            diag0, sparse = self._lam[r]
            top = F[r] * diag0.map(lambda p: p[None, :])
            if r >= 1 and F[r - 1].shape[0]:
                rows, vals = sparse
                bottom = None
                for m in range(r):
                    term = F[r - 1][:, rows[:, m]] * vals[:, m].map(lambda p: p[None, :])
                    bottom = term if bottom is None else bottom + term
                W = _dd.CDD(*(np.concatenate([a, b]) for a, b in zip(_dd._parts(top), _dd._parts(bottom))))
            else:
                W = top
            if W.shape[0] == 0:
                nxt[r], qs[r] = W, np.zeros((0, 0), dtype=np.complex128)
                continue
            Q, R, diag = _dd.gram_schmidt(W)
            self._check(diag, r, k + 1)
            nxt[r], qs[r] = R, Q.to_complex()
        return nxt, qs

    def _advance(self) -> None:
        k = len(self._F) - 1
        step = self._step_dd if self.arithmetic == "dd" else self._step_double
        nxt, qs = step(self._F[k], k)
        self._F.append(nxt)
        self._Q.append(qs)

    def prepare(self, k_max: int) -> None:
        """Advance to ``k_max`` sites, switching to double-double if ``precision='auto'`` calls for it."""
        while len(self._F) <= k_max:
            self._advance()
        if self.requested == "auto" and self.arithmetic == "double" and self.min_diag_ratio < EXTENDED_SWITCH:
            self._reset("dd")
            while len(self._F) <= k_max:
                self._advance()

    def factor(self, r: int, k: int) -> np.ndarray:
        """``F_k^{(r)}`` as complex doubles."""
        self.prepare(k)
        F = self._F[k][r]
        return F.to_complex() if isinstance(F, _dd.CDD) else F

    def l_matrix(self, r: int, k: int) -> np.ndarray:
        """``L = A^{-1} A^`` from the leading blocks of ``F_k^{(r)}`` (short gates only)."""
        M = self.sys.M
        if not (k < M and 0 <= r <= k):
            raise DomainError(f"L needs k < M and 0 <= r <= k (k={k}, r={r}, M={M})")
        F = self.factor(r, k)
        d, dd = sector_dim(r, k), sector_dim(r, k + 1)
        return np.linalg.solve(F[:, :d], F[:, :dd])

    def gate_blocks(self, k: int) -> dict[tuple[int, int], np.ndarray]:
        """``{(i, r): P_k^{(i,r)}}`` for every sector the gate touches."""
        if k < 1:
            raise DomainError(f"gate index must be at least 1, got {k}")
        self.prepare(k + 1)
        out = {}
        for r, Q in self._Q[k].items():
            if Q.shape[1] == 0:
                continue
            n0 = self._F[k][r].shape[0]
            out[(0, r)] = Q[:n0]
            if r >= 1:
                out[(1, r)] = Q[n0:]
        return out
