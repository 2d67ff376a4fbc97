"""Gate assembly, the staircase circuit and a sector-restricted simulator.

Layout used throughout (qubits 1-based, leftmost qubit has bit weight 1):

* gate ``P_k`` acts on qubits ``N-k .. N-k+min(k, M)``;
* gates run in time order ``P_{N-1}, P_{N-2}, ..., P_1`` on ``|1_M 0_{N-M}>``;
* the first (leftmost) qubit a gate touches is final once it has acted.

A long gate (``k >= M``) reads the ``M``-qubit configuration on its first
``M`` local qubits, expects ``|0>`` on its last local qubit and writes the
emitted bit ``i`` to local qubit 1 with the remaining ``M``-qubit configuration
on local qubits ``2..M+1``.  A short gate (``k < M``) does the same on ``k+1``
local qubits with no ancilla.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _kernels
from .cba_core import MagnonSystem, SectorVector, cba_wavefunction, lambda_block
from .errors import ConstructionError, DomainError
from .sectors import binomial_table, positions_to_mask, sector_basis, sector_dim, sector_masks
from .unitarize import FactorChain, OverlapChain

ISOMETRY_TOL = 1e-9
_COMPLETION_FLOOR = 1e-6


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


@dataclass(frozen=True)
class GateBlock:
    """Sector block ``P_k^{(i,r)}``: rows index the emitted configuration, columns the input."""

    k: int
    i: int
    r: int
    matrix: np.ndarray


def _is_long(k: int, M: int) -> bool:
    return k >= M


def gate_width(k: int, M: int) -> int:
    """Number of qubits gate ``P_k`` acts on."""
    return M + 1 if _is_long(k, M) else k + 1


def gate_span(k: int, N: int, M: int) -> tuple[int, ...]:
    first = N - k
    return tuple(range(first, first + gate_width(k, M)))


def gate_block(k: int, i: int, r: int, sys: MagnonSystem, chain: OverlapChain | None = None) -> GateBlock:
    """``P_k^{(i,r)} = A_k^{(r-i)} Lambda^{(i,r)} B_{k+1}^{(r)}``.

    Long gates use Cholesky factors of the full ``M``-label overlaps; short gates
    use the rectangular factor of the extended overlap for ``A`` and labels
    ``1..k+1`` for ``Lambda`` and ``B``.
    """
    M = sys.M
    if k < 1:
        raise DomainError(f"gate index must be at least 1, got {k}")
    if i not in (0, 1):
        raise DomainError(f"emitted bit must be 0 or 1, got {i}")
    w = M if _is_long(k, M) else k + 1
    if not i <= r <= w:
        raise DomainError(f"sector r={r} not available for i={i} at width {w}")
    if not _is_long(k, M) and r - i > k:
        raise DomainError(f"short gate k={k} has no output sector {r - i}")
    if r == 0:
        return GateBlock(k, i, r, np.ones((1, 1), dtype=np.complex128))
    chain = chain or OverlapChain(sys)
    if _is_long(k, M):
        A = chain.factors(r - i, k).A
    else:
        A = chain.factors(r - i, k, extended=True).A
    lam = lambda_block(i, r, w, sys).matrix
    B = chain.factors(r, k + 1).B
    return GateBlock(k, i, r, A @ lam @ B)


def _complete_columns(iso: np.ndarray, n_extra: int, context: str) -> np.ndarray:
    """Append ``n_extra`` orthonormal columns to an isometry, drawn from canonical vectors in order."""
    dim, n_iso = iso.shape
    Q = np.zeros((dim, n_iso + n_extra), dtype=np.complex128)
    Q[:, :n_iso] = iso
    filled = n_iso
    for e in range(dim):
        if filled == n_iso + n_extra:
            break
        v = np.zeros(dim, dtype=np.complex128)
        v[e] = 1.0
        basis = Q[:, :filled]
        for _ in range(2):
            v -= basis @ (basis.conj().T @ v)
        nv = np.linalg.norm(v)
        if nv > _COMPLETION_FLOOR:
            Q[:, filled] = v / nv
            filled += 1
    if filled != n_iso + n_extra:
        raise ConstructionError(f"{context}: could not complete the isometry")
    return Q


def assemble_unitary(k: int, sys: MagnonSystem, chain: FactorChain | None = None) -> np.ndarray:
    """Dense unitary of gate ``P_k`` in the local computational basis.

    Blocks come from :class:`FactorChain`; long gates are completed sector by
    sector from canonical basis vectors taken in index order.
    """
    M = sys.M
    chain = chain or FactorChain(sys)
    long = _is_long(k, M)
    w = gate_width(k, M)
    blocks = chain.gate_blocks(k)
    U = np.zeros((1 << w, 1 << w), dtype=np.complex128)
    for r in range(w + 1):
        rows = np.asarray(sector_masks(r, w), dtype=np.int64)
        in_masks = [int(m) for m in rows if not (long and (m >> M) & 1)]
        block = np.zeros((len(rows), len(in_masks)), dtype=np.complex128)
        row_pos = {int(m): n for n, m in enumerate(rows)}
        for i in (0, 1):
            P = blocks.get((i, r))
            if P is None or P.shape[0] == 0:
                continue
            out_cfg = np.asarray(sector_masks(r - i, w - 1), dtype=np.int64)[: P.shape[0]]
            for a, om in enumerate(out_cfg):
                block[row_pos[int(i | (om << 1))], : P.shape[1]] += P[a]
        resid = np.max(np.abs(block.conj().T @ block - np.eye(block.shape[1]))) if block.size else 0.0
        if resid > ISOMETRY_TOL:
            raise ConstructionError(f"gate k={k}, sector r={r}: columns not orthonormal (residual {resid:.3g})")
        if long:
            extra_inputs = [int(m) for m in rows if (m >> M) & 1]
            full = _complete_columns(block, len(extra_inputs), f"gate k={k}, sector r={r}")
            cols = in_masks + extra_inputs
        else:
            full, cols = block, in_masks
        U[np.ix_(rows, cols)] = full
    return U


@dataclass
class Gate:
    k: int
    qubits: tuple[int, ...]
    unitary: np.ndarray


@dataclass
class CircuitDescription:
    """Gates ``P_1 .. P_{N-1}`` (listed by increasing ``k``) with their spans."""

    N: int
    M: int
    delta: float
    x: tuple[complex, ...]
    gates: list[Gate]
    metadata: dict = field(default_factory=dict)

    def gate(self, k: int) -> Gate:
        return self.gates[k - 1]

    def to_json(self) -> dict:
        momenta = [-1j * np.log(complex(v)) for v in self.x]
        return {
            "version": 1,
            "N": self.N,
            "M": self.M,
            "delta": self.delta,
            "momenta": [[float(p.real), float(p.imag)] for p in momenta],
            "x": [[float(v.real), float(v.imag)] for v in self.x],
            "metadata": self.metadata,
            "gates": [
                {
                    "k": g.k,
                    "qubits": list(g.qubits),
                    "unitary": {
                        "dim": int(g.unitary.shape[0]),
                        "rows": [[[float(v.real), float(v.imag)] for v in row] for row in g.unitary],
                    },
                }
                for g in self.gates
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, doc) -> CircuitDescription:
        if isinstance(doc, (str, Path)) and not str(doc).lstrip().startswith("{"):
            doc = Path(doc).read_text()
        if isinstance(doc, str):
            doc = json.loads(doc)
        if doc.get("version") != 1:
            raise DomainError(f"unsupported circuit version {doc.get('version')!r}")
        if "x" in doc:
            x = tuple(complex(a, b) for a, b in doc["x"])
        else:
            x = tuple(complex(np.exp(1j * complex(*p) if isinstance(p, list) else 1j * p)) for p in doc["momenta"])
        gates = []
        for g in doc["gates"]:
            rows = np.array(g["unitary"]["rows"], dtype=np.float64)
            U = rows[..., 0] + 1j * rows[..., 1]
            if U.shape != (g["unitary"]["dim"],) * 2:
                raise DomainError(f"gate {g['k']}: unitary shape {U.shape} does not match dim")
            gates.append(Gate(int(g["k"]), tuple(int(q) for q in g["qubits"]), U))
        return cls(int(doc["N"]), int(doc["M"]), float(doc["delta"]), x, gates, doc.get("metadata", {}))

    @classmethod
    def load(cls, path) -> CircuitDescription:
        return cls.from_json(Path(path).read_text())

    def system(self) -> MagnonSystem:
        return MagnonSystem(self.N, self.x, self.delta)


def build_circuit(sys: MagnonSystem, chain: FactorChain | None = None) -> CircuitDescription:
    N, M = sys.N, sys.M
    if M < 1:
        raise DomainError("need at least one magnon")
    if N <= M:
        raise DomainError(f"the circuit needs N > M (got N={N}, M={M})")
    sys.check_nondegenerate()
    chain = chain or FactorChain(sys)
    chain.prepare(N)
    gates = [Gate(k, gate_span(k, N, M), assemble_unitary(k, sys, chain)) for k in range(1, N)]
    meta = {"isometry_tol": ISOMETRY_TOL, "library_version": _version()}
    return CircuitDescription(N, M, float(sys.delta), tuple(complex(v) for v in sys.x), gates, meta)


def truncate(circ: CircuitDescription, k: int) -> CircuitDescription:
    """The circuit on the last ``k`` qubits made of ``P_1 .. P_{k-1}``.

    Gates do not depend on ``N``, so this equals the circuit built for ``k`` sites.
    """
    if not circ.M < k <= circ.N:
        raise DomainError(f"truncation length must be in {circ.M + 1}..{circ.N}")
    shift = circ.N - k
    gates = [Gate(g.k, tuple(q - shift for q in g.qubits), g.unitary) for g in circ.gates if g.k < k]
    return CircuitDescription(k, circ.M, circ.delta, circ.x, gates, dict(circ.metadata))


def _run(gates, N: int, r: int, start_mask: int) -> SectorVector:
    basis = sector_basis(r, N)
    masks = np.asarray(sector_masks(r, N), dtype=np.int64)
    binom = binomial_table(N)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[int(_kernels.colex_rank_numpy(np.array([start_mask]), N, binom)[0])] = 1.0
    for g in sorted(gates, key=lambda g: -g.k):
        w = len(g.qubits)
        if 1 << w != g.unitary.shape[0]:
            raise DomainError(f"gate {g.k}: span of {w} qubits does not match a {g.unitary.shape[0]}-dim unitary")
        amps = _kernels.apply_gate(amps, masks, g.unitary, g.qubits[0] - 1, w, N, binom)
    return SectorVector(basis, amps)


def simulate(circ: CircuitDescription, check_leak: bool = False) -> SectorVector:
    """Run the circuit on ``|1_M 0_{N-M}>`` inside the ``M``-magnon sector.

    With ``check_leak`` every gate is also checked to preserve the magnon number.
    """
    if check_leak:
        for g in circ.gates:
            w = len(g.qubits)
            pc = np.array([bin(v).count("1") for v in range(1 << w)])
            if np.any(np.abs(g.unitary[pc[:, None] != pc[None, :]]) > ISOMETRY_TOL):
                raise ConstructionError(f"gate {g.k} mixes magnon numbers")
    return _run(circ.gates, circ.N, circ.M, (1 << circ.M) - 1)


def oracle_state(sys: MagnonSystem) -> SectorVector:
    """Normalised Bethe wavefunction on ``N`` sites with all ``M`` momenta."""
    return cba_wavefunction(tuple(range(1, sys.M + 1)), sys.N, sys).normalized()


def fidelity(a: SectorVector, b: SectorVector) -> float:
    return float(abs(np.vdot(np.asarray(a.amps), np.asarray(b.amps))))


@dataclass
class UnitarityReport:
    tol: float
    residuals: dict[tuple[int, int], float]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol

    def failures(self) -> list[tuple[int, int]]:
        return [key for key, v in self.residuals.items() if not v < self.tol]


def verify_unitarity(circ: CircuitDescription, tol: float = 1e-10) -> UnitarityReport:
    """Residual ``max |U_r^+ U_r - 1|`` for every gate ``k`` and magnon sector ``r`` of its unitary."""
    res = {}
    for g in circ.gates:
        w = len(g.qubits)
        for r in range(w + 1):
            idx = np.asarray(sector_masks(r, w), dtype=np.int64)
            cols = g.unitary[:, idx]
            res[(g.k, r)] = float(np.max(np.abs(cols.conj().T @ cols - np.eye(len(idx)))))
    return UnitarityReport(tol, res)


def hamiltonian_apply(state: SectorVector, delta: float, periodic: bool = True) -> SectorVector:
    """``H = sum_j (X_j X_{j+1} + Y_j Y_{j+1} + delta Z_j Z_{j+1})`` restricted to the state's sector."""
    basis = state.basis
    N, r = basis.k, basis.r
    masks = np.asarray(sector_masks(r, N), dtype=np.int64)
    amps = np.asarray(state.amps)
    binom = binomial_table(N)
    bonds = [(j, j + 1) for j in range(N - 1)]
    if periodic and N > 2:
        bonds.append((N - 1, 0))
    elif periodic and N == 2:
        bonds.append((1, 0))
    out = np.zeros_like(amps)
    diag = np.zeros(len(masks))
    for a, b in bonds:
        differ = ((masks >> a) ^ (masks >> b)) & 1
        diag += 1 - 2 * differ
        sel = np.nonzero(differ)[0]
        if sel.size:
            flipped = masks[sel] ^ ((1 << a) | (1 << b))
            dst = _kernels.colex_rank_numpy(flipped, N, binom)
            np.add.at(out, dst, 2.0 * amps[sel])
    out += delta * diag * amps
    return SectorVector(basis, out)


def energy_variance(state: SectorVector, delta: float, periodic: bool = True) -> tuple[float, float]:
    """Mean energy and variance of a normalised copy of ``state``."""
    psi = state.normalized()
    h = hamiltonian_apply(psi, delta, periodic)
    e = np.vdot(psi.amps, h.amps).real
    e2 = np.vdot(h.amps, h.amps).real
    return float(e), float(max(e2 - e * e, 0.0))


def short_network_wavefunction(
    positions: tuple[int, ...], k: int, sys: MagnonSystem, chain: FactorChain | OverlapChain | None = None
) -> SectorVector:
    """Bethe state on ``k < M+1`` sites from the narrowing network.

    Level by level the auxiliary register only keeps momentum labels
    ``1..m`` for ``m`` sites still to come; after each ``Lambda`` of width ``m``
    the coefficients are carried to width ``m-1`` with ``L``.  ``L`` comes
    from whichever chain is passed: QR factors by default, determinant
    formulas with an :class:`OverlapChain`.
    """
    positions = tuple(positions)
    r = len(positions)
    if k > sys.M:
        raise DomainError(f"the narrowing network needs k <= M (k={k}, M={sys.M})")
    chain = chain or FactorChain(sys)
    start = np.zeros(sector_dim(r, k), dtype=np.complex128)
    start[sector_basis(r, k).index(positions) - 1] = 1.0
    layer = {(0, r): start}  # (prefix mask, aux sector) -> coefficients at the current width
    for level in range(k):
        m = k - level
        nxt: dict[tuple[int, int], np.ndarray] = {}
        for (prefix, rr), vec in layer.items():
            for i in (0, 1):
                if rr - i < 0 or rr - i > m - 1:
                    continue
                out = lambda_block(i, rr, m, sys).matrix @ vec
                if m - 1 > 0:
                    out = chain.l_matrix(rr - i, m - 1) @ out if rr - i <= m - 1 else out[:0]
                key = (prefix | (i << level), rr - i)
                nxt[key] = nxt[key] + out if key in nxt else out
        layer = nxt
    basis = sector_basis(r, k)
    amps = np.zeros(basis.dim, dtype=np.complex128)
    lookup = {int(msk): a for a, msk in enumerate(basis.masks())}
    for (prefix, rr), vec in layer.items():
        if rr == 0 and prefix in lookup:
            amps[lookup[prefix]] += vec[0]
    return SectorVector(basis, amps)


def short_circuit_output(positions: tuple[int, ...], k: int, sys: MagnonSystem, chain: FactorChain | None = None):
    """Short gates ``P_{k-1} .. P_1`` on ``k`` qubits applied to the basis input ``positions``."""
    if not 1 <= k <= sys.M:
        raise DomainError(f"short stage exists for 1 <= k <= M (k={k}, M={sys.M})")
    chain = chain or FactorChain(sys)
    gates = [Gate(j, tuple(range(k - j, k + 1)), assemble_unitary(j, sys, chain)) for j in range(1, k)]
    return _run(gates, k, len(positions), positions_to_mask(positions))
