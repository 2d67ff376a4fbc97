"""Deterministic staircase circuits that prepare Bethe wavefunctions of the XXZ chain."""

from .aba_bridge import EquivalenceReport, GaugeTransform, RMatrix, gamma_tensor, solve_gauge, verify_equivalence
from .cba_core import (
    MagnonSystem,
    SectorVector,
    cba_wavefunction,
    lambda_block,
    lambda_full,
    network_wavefunction,
    scattering_amplitude,
    unit_scattering,
)
from .circuit import (
    CircuitDescription,
    Gate,
    assemble_unitary,
    build_circuit,
    energy_variance,
    fidelity,
    gate_block,
    hamiltonian_apply,
    oracle_state,
    short_network_wavefunction,
    simulate,
    truncate,
    verify_unitarity,
)
from .errors import (
    BetheCircuitError,
    ConstructionError,
    DegenerateMomentaError,
    DomainError,
    NotPositiveDefiniteError,
    RankError,
)
from .sectors import SectorBasis, index_to_positions, positions_to_index, sector_basis, sector_dim
from .unitarize import (
    CholeskyPair,
    FactorChain,
    OverlapChain,
    OverlapMatrix,
    cholesky_det,
    cholesky_standard,
    gram_matrix,
    gram_recursion_step,
    l_matrix,
)
from .xx_matchgate import MatchgateLayer, compare_layers, compose_layer, decompose, wick_overlap

__all__ = [name for name in dir() if not name.startswith("_")]
