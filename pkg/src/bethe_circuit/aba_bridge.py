"""Algebraic Bethe ansatz tensors and their gauge relation to Lambda.

The ABA state is an MPS whose tensor ``Gamma`` comes from a column of ``M``
R matrices, one per magnon.  ``Gamma`` and ``Lambda`` generate the same states,
so ``Gamma^i = X^{-1} Lambda^i X`` for a site-independent ``X = D X^0``:
``X^0`` (unit upper triangular) diagonalises ``Gamma^0`` and the diagonal ``D``
is then overdetermined by the ``i = 1`` equation.  Solvability of that system
is the integrability condition.

All matrices here use the sector-blocked auxiliary basis of ``lambda_full``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .cba_core import MagnonSystem, lambda_full
from .errors import DegenerateMomentaError, DomainError
from .sectors import positions_to_mask, sector_basis


def integrable_y(x: complex, delta: float) -> complex:
    """Principal branch of ``y = sqrt(1 + x^2 - 2 delta x)``."""
    return cmath.sqrt(1 + x * x - 2 * delta * x)


@dataclass(frozen=True)
class RMatrix:
    """``R = rho [[1,0,0,0],[0,y,x,0],[0,x,y,0],[0,0,0,1]]`` with ``rho = 1``."""

    x: complex
    y: complex
    rho: float = 1.0

    @classmethod
    def integrable(cls, x: complex, delta: float) -> RMatrix:
        return cls(complex(x), integrable_y(complex(x), delta))

    @property
    def entries(self) -> np.ndarray:
        x, y = self.x, self.y
        return self.rho * np.array(
            [[1, 0, 0, 0], [0, y, x, 0], [0, x, y, 0], [0, 0, 0, 1]], dtype=np.complex128
        )

    def integrability_defect(self, delta: float) -> complex:
        return self.y * self.y - (1 + self.x * self.x - 2 * delta * self.x)


def _blocked_masks(M: int) -> list[int]:
    out = []
    for r in range(M + 1):
        out.extend(positions_to_mask(p) for p in sector_basis(r, M).order)
    return out


def r_matrices(sys: MagnonSystem, ys=None) -> list[RMatrix]:
    if ys is None:
        return [RMatrix.integrable(x, sys.delta) for x in sys.x]
    if len(ys) != sys.M:
        raise DomainError(f"need {sys.M} values of y, got {len(ys)}")
    return [RMatrix(complex(x), complex(y)) for x, y in zip(sys.x, ys)]


def gamma_tensor(i: int, sys: MagnonSystem, ys=None) -> np.ndarray:
    """``Gamma^i`` (rows: outgoing auxiliary state, columns: incoming).

    The physical line enters in ``|0>``, crosses ``R_M`` first and ``R_1``
    last, and leaves in ``|i>``.  At each crossing equal bits pass with
    amplitude 1; unequal bits either keep their lines (amplitude ``x_a``) or
    exchange them (amplitude ``y_a``).
    """
    if i not in (0, 1):
        raise DomainError(f"output bit must be 0 or 1, got {i}")
    M = sys.M
    rs = r_matrices(sys, ys)
    masks = _blocked_masks(M)
    pos = {m: n for n, m in enumerate(masks)}
    out = np.zeros((len(masks), len(masks)), dtype=np.complex128)
    for col, beta in enumerate(masks):
        paths = {(beta, 0): 1.0 + 0j}
        for a in range(M - 1, -1, -1):
            nxt: dict[tuple[int, int], complex] = {}
            for (aux, phys), amp in paths.items():
                bit = (aux >> a) & 1
                if bit == phys:
                    moves = [((aux, phys), amp)]
                else:
                    swapped = (aux ^ (1 << a), bit)
                    moves = [((aux, phys), amp * rs[a].x), (swapped, amp * rs[a].y)]
                for key, val in moves:
                    nxt[key] = nxt.get(key, 0j) + val * rs[a].rho
            paths = nxt
        for (aux, phys), amp in paths.items():
            if phys == i:
                out[pos[aux], col] += amp
    return out


@dataclass(frozen=True)
class GaugeTransform:
    """``X = D X^0``; ``residual`` is the least-squares defect of the ``D`` equations."""

    X0: np.ndarray
    D: np.ndarray
    residual: float
    branch: str = "principal"

    @property
    def X(self) -> np.ndarray:
        return np.diag(self.D) @ self.X0


def diagonalising_gauge(gamma0: np.ndarray, eigen: np.ndarray) -> np.ndarray:
    """Unit upper triangular ``X^0`` with ``X^0 Gamma^0 = diag(eigen) X^0``."""
    n = len(eigen)
    X0 = np.eye(n, dtype=np.complex128)
    for b in range(n):
        for a in range(b):
            acc = X0[a, :b] @ gamma0[:b, b]
            if acc == 0:
                continue
            gap = eigen[a] - eigen[b]
            if abs(gap) < 1e-14 * max(1.0, abs(eigen[a])):
                raise DegenerateMomentaError(f"Gamma^0 has repeated eigenvalue {eigen[a]:.6g}; gauge is singular")
            X0[a, b] = acc / gap
    return X0


def solve_gauge(sys: MagnonSystem, ys=None) -> GaugeTransform:
    """Find ``X = D X^0`` relating ``Gamma`` to ``Lambda``.

    ``D`` (with ``D_0 = 1``) solves ``D Y = Lambda^1 D`` for
    ``Y = X^0 Gamma^1 (X^0)^{-1}`` in the least-squares sense; the returned
    residual is zero exactly when the overdetermined system is consistent.
    """
    M = sys.M
    sys.check_nondegenerate()
    g0, g1 = gamma_tensor(0, sys, ys), gamma_tensor(1, sys, ys)
    lam0, lam1 = lambda_full(0, M, sys), lambda_full(1, M, sys)
    eigen = np.diag(lam0).copy()
    if np.max(np.abs(np.tril(g0, -1))) > 0:
        raise DomainError("Gamma^0 is not upper triangular in the sector-blocked basis")
    X0 = diagonalising_gauge(g0, eigen)
    Y = X0 @ g1 @ np.linalg.inv(X0)
    n = len(eigen)
    rows, rhs = [], []
    for a in range(n):
        for b in range(n):
            if Y[a, b] == 0 and lam1[a, b] == 0:
                continue
            row = np.zeros(n, dtype=np.complex128)
            row[a] += Y[a, b]
            row[b] -= lam1[a, b]
            rows.append(row)
    A = np.array(rows).reshape(-1, n)
    # fix d_0 = 1 and move its column to the right-hand side
    b_vec = -A[:, 0]
    sol, *_ = np.linalg.lstsq(A[:, 1:], b_vec, rcond=None)
    D = np.concatenate([[1.0 + 0j], sol])
    scale = np.max(np.abs(A)) * max(1.0, np.max(np.abs(D)))
    residual = float(np.max(np.abs(A @ D)) / scale) if A.size else 0.0
    return GaugeTransform(X0, D, residual, "principal" if ys is None else "user")


def consistency_ratio(sys: MagnonSystem, ys=None) -> tuple[complex, complex]:
    """Both sides of the two-magnon solvability condition for ``D``.

    Returns ``(s_21 / s_12, (x_1 y_1^2 - x_1^2 (x_1 - x_2)) / (x_2 y_1^2 + x_1 - x_2))``.
    """
    if sys.M < 2:
        raise DomainError("the consistency ratio needs at least two magnons")
    x1, x2 = sys.x[0], sys.x[1]
    y1 = r_matrices(sys, ys)[0].y
    lhs = sys.s(2, 1) / sys.s(1, 2)
    rhs = (x1 * y1**2 - x1**2 * (x1 - x2)) / (x2 * y1**2 + x1 - x2)
    return lhs, rhs


@dataclass
class EquivalenceReport:
    residual_gamma0: float
    residual_gamma1: float
    gauge_residual: float
    ratio_lhs: complex | None
    ratio_rhs: complex | None
    tol: float
    branch: str

    @property
    def ratio_error(self) -> float | None:
        if self.ratio_lhs is None:
            return None
        return abs(self.ratio_lhs - self.ratio_rhs) / max(abs(self.ratio_lhs), 1e-300)

    @property
    def gauge_ok(self) -> bool:
        return max(self.residual_gamma0, self.residual_gamma1) < self.tol

    @property
    def ratio_ok(self) -> bool | None:
        err = self.ratio_error
        return None if err is None else err < self.tol

    @property
    def passed(self) -> bool:
        return self.gauge_ok and self.ratio_ok is not False

    def to_json(self) -> dict:
        pair = lambda z: None if z is None else [z.real, z.imag]  # noqa: E731
        return {
            "residual_gamma0": self.residual_gamma0,
            "residual_gamma1": self.residual_gamma1,
            "gauge_residual": self.gauge_residual,
            "ratio_lhs": pair(self.ratio_lhs),
            "ratio_rhs": pair(self.ratio_rhs),
            "ratio_error": self.ratio_error,
            "branch": self.branch,
            "tol": self.tol,
            "passed": self.passed,
        }


def verify_equivalence(sys: MagnonSystem, tol: float = 1e-9, ys=None) -> EquivalenceReport:
    """Residuals of ``Gamma^i = X^{-1} Lambda^i X`` (relative to ``max |Gamma^i|``) plus the ratio check."""
    gauge = solve_gauge(sys, ys)
    X = gauge.X
    Xinv = np.linalg.inv(X)
    res = []
    for i in (0, 1):
        g = gamma_tensor(i, sys, ys)
        lam = lambda_full(i, sys.M, sys)
        res.append(float(np.max(np.abs(g - Xinv @ lam @ X)) / max(1.0, np.max(np.abs(g)))))
    lhs = rhs = None
    if sys.M >= 2:
        lhs, rhs = consistency_ratio(sys, ys)
    return EquivalenceReport(res[0], res[1], gauge.residual, lhs, rhs, tol, gauge.branch)
