"""Free-fermion (``delta = 0``) gates as a single layer of two-qubit matchgates.

At ``delta = 0`` the scattering factors are symmetric and drop out of the
state, so both routes here use ``s = 1`` (:func:`unit_scattering`).  The
one-magnon block of each gate fixes the parameters ``(u_j, v_j)`` of the
matchgates

    F_j = [[1, 0, 0, 0], [0, u, v*, 0], [0, v, -u*, 0], [0, 0, 0, -1]]

acting on local qubits ``(j, j+1)`` (basis index ``b_j + 2 b_{j+1}``).  The
layer is ``F_1 F_2 ... F_M`` (``F_M`` acts first); short gates add a phase on
their last qubit, applied before the matchgates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cba_core import MagnonSystem, unit_scattering
from .circuit import assemble_unitary, gate_width
from .errors import ConstructionError, DomainError
from .sectors import sector_basis
from .unitarize import FactorChain, OverlapMatrix

VANISHING_V = 1e-12
# amplitude of |11>: two adjacent magnons pick up the exchange sign
PAIR_SIGN = -1


@dataclass(frozen=True)
class MatchgateLayer:
    k: int
    u: tuple[complex, ...]
    v: tuple[complex, ...]
    tail_phase: complex | None = None

    def matchgate(self, j: int) -> np.ndarray:
        """``F_j`` (1-based) in the ``b_j + 2 b_{j+1}`` basis."""
        u, v = self.u[j - 1], self.v[j - 1]
        return np.array(
            [[1, 0, 0, 0], [0, u, np.conj(v), 0], [0, v, -np.conj(u), 0], [0, 0, 0, PAIR_SIGN]], dtype=np.complex128
        )

    def norms(self) -> np.ndarray:
        """``|u_j|^2 + |v_j|^2`` for every matchgate."""
        return np.abs(np.array(self.u)) ** 2 + np.abs(np.array(self.v)) ** 2

    def to_json(self) -> dict:
        pair = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "k": self.k,
            "matchgates": [{"j": j, "u": pair(u), "v": pair(v)} for j, (u, v) in enumerate(zip(self.u, self.v), 1)],
            "tail_phase": None if self.tail_phase is None else pair(self.tail_phase),
        }

    @classmethod
    def from_json(cls, doc) -> MatchgateLayer:
        if isinstance(doc, str):
            doc = json.loads(doc)
        gates = sorted(doc["matchgates"], key=lambda g: g["j"])
        u = tuple(complex(*g["u"]) for g in gates)
        v = tuple(complex(*g["v"]) for g in gates)
        tail = doc.get("tail_phase")
        return cls(int(doc["k"]), u, v, None if tail is None else complex(*tail))


def free_system(sys: MagnonSystem) -> MagnonSystem:
    """The same momenta with ``s = 1``; requires ``delta = 0``."""
    if sys.delta != 0:
        raise DomainError(f"matchgate decomposition needs delta = 0, got {sys.delta}")
    return sys.with_scattering(unit_scattering)


def one_magnon_block(U: np.ndarray, width: int, n_inputs: int) -> np.ndarray:
    """Rows: output magnon on local qubit ``1..width``; columns: input magnon on ``1..n_inputs``."""
    idx = [1 << q for q in range(width)]
    return U[np.ix_(idx, idx[:n_inputs])]


def extract_params(block: np.ndarray, k: int, short: bool) -> MatchgateLayer:
    """Read ``(u_j, v_j)`` off the nested one-magnon block ``P_k^{(1)}``.

    ``block`` has the emitted-magnon row first and one column per input
    position; a short gate has one more column than matchgates and its last
    ``u`` is returned as ``tail_phase``.
    """
    n_rows, n_cols = block.shape
    n_gates = n_rows - 1
    if n_cols != n_gates + (1 if short else 0):
        raise DomainError(f"block shape {block.shape} does not match a {'short' if short else 'long'} gate")
    u, v = [], []
    prod = 1.0 + 0j
    for j in range(n_cols):
        if abs(prod) < VANISHING_V:
            raise ConstructionError(f"gate k={k}: v_{j} vanishes; parameters cannot be extracted")
        uj = block[0, j] / prod
        u.append(uj)
        if j < n_gates:
            vj = block[j + 1, j]
            v.append(vj)
            prod *= np.conj(vj)
    tail = u.pop() if short else None
    return MatchgateLayer(k, tuple(u), tuple(v), tail)


def _embed_two(F: np.ndarray, j: int, width: int) -> np.ndarray:
    """Dense ``2**width`` matrix of a two-qubit gate on local qubits ``(j, j+1)``."""
    dim = 1 << width
    out = np.zeros((dim, dim), dtype=np.complex128)
    shift = j - 1
    for col in range(dim):
        loc = (col >> shift) & 3
        rest = col & ~(3 << shift)
        for new in range(4):
            amp = F[new, loc]
            if amp != 0:
                out[rest | (new << shift), col] += amp
    return out


def compose_layer(layer: MatchgateLayer, width: int) -> np.ndarray:
    """Dense unitary ``F_1 F_2 ... F_n U`` on ``width`` local qubits."""
    n = len(layer.u)
    if n + 1 != width:
        raise DomainError(f"{n} matchgates span {n + 1} qubits, not {width}")
    dim = 1 << width
    U = np.eye(dim, dtype=np.complex128)
    if layer.tail_phase is not None:
        top = 1 << (width - 1)
        diag = np.where(np.arange(dim) & top, layer.tail_phase, 1.0)
        U = np.diag(diag).astype(np.complex128)
    for j in range(n, 0, -1):
        U = _embed_two(layer.matchgate(j), j, width) @ U
    return U


def decompose(sys: MagnonSystem, chain: FactorChain | None = None) -> list[MatchgateLayer]:
    """Matchgate layers for every gate ``P_1 .. P_{N-1}`` of the free system."""
    free = free_system(sys)
    chain = chain or FactorChain(free)
    chain.prepare(sys.N)
    M = sys.M
    layers = []
    for k in range(1, sys.N):
        w = gate_width(k, M)
        U = assemble_unitary(k, free, chain)
        short = k < M
        layers.append(extract_params(one_magnon_block(U, w, w if short else M), k, short))
    return layers


@dataclass
class MatchgateComparison:
    k: int
    residual: float
    columns: str


def compare_layers(sys: MagnonSystem, chain: FactorChain | None = None) -> list[MatchgateComparison]:
    """Residual between each composed layer and the general gate.

    Long gates are compared on the columns with the ancilla in ``|0>`` only;
    the rest of their unitary is a completion without physical content.
    """
    free = free_system(sys)
    chain = chain or FactorChain(free)
    chain.prepare(sys.N)
    M = sys.M
    out = []
    for layer in decompose(sys, chain):
        k = layer.k
        w = gate_width(k, M)
        U = assemble_unitary(k, free, chain)
        V = compose_layer(layer, w)
        if k >= M:
            cols = np.array([c for c in range(1 << w) if not (c >> M) & 1])
            res, scope = np.max(np.abs(U[:, cols] - V[:, cols])), "isometry"
        else:
            res, scope = np.max(np.abs(U - V)), "full"
        out.append(MatchgateComparison(k, float(res), scope))
    return out


def one_magnon_overlaps(k: int, xs) -> np.ndarray:
    """``C[n, m] = sum_{l<k} conj(x_n)^l x_m^l``."""
    xs = np.asarray(xs, dtype=np.complex128)
    powers = xs[None, :] ** np.arange(k)[:, None]
    return powers.conj().T @ powers


def wick_overlap(r: int, k: int, sys: MagnonSystem, extended: bool = False) -> OverlapMatrix:
    """Free-fermion overlaps as determinants of one-magnon overlaps."""
    if sys.delta != 0:
        raise DomainError(f"the determinant formula needs delta = 0, got {sys.delta}")
    M = sys.M
    if k >= M:
        if extended:
            raise DomainError("extended overlaps only exist for short gates")
        w = M
    else:
        w = k + 1 if extended else k
    if not 0 <= r <= w:
        raise DomainError(f"sector r={r} outside 0..{w}")
    basis = sector_basis(r, w).order
    one = one_magnon_overlaps(k, sys.x[:w])
    d = len(basis)
    out = np.empty((d, d), dtype=np.complex128)
    for a, pa in enumerate(basis):
        ia = np.array(pa, dtype=int) - 1
        for b, pb in enumerate(basis):
            ib = np.array(pb, dtype=int) - 1
            out[a, b] = np.linalg.det(one[np.ix_(ia, ib)]) if r else 1.0
    return OverlapMatrix(r, k, "extended" if extended else "plain", out)
