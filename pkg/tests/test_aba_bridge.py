import numpy as np
import pytest

from bethe_circuit.aba_bridge import (
    RMatrix,
    consistency_ratio,
    gamma_tensor,
    integrable_y,
    r_matrices,
    solve_gauge,
    verify_equivalence,
)
from bethe_circuit.cba_core import MagnonSystem, lambda_full
from bethe_circuit.errors import DomainError

from conftest import random_system


@pytest.fixture
def two_magnons():
    return MagnonSystem.from_momenta(3, [0.8 + 0.1j, -1.9 + 0.05j], 0.4)


def test_r_matrix(two_magnons):
    R = RMatrix.integrable(two_magnons.x[0], 0.4)
    assert abs(R.integrability_defect(0.4)) < 1e-14
    assert R.entries[1, 2] == R.x and R.entries[1, 1] == R.y
    with pytest.raises(DomainError):
        r_matrices(two_magnons, ys=[1.0])


def test_two_magnon_tensors(two_magnons):
    sys = two_magnons
    x1, x2 = sys.x
    y1, y2 = (integrable_y(x, sys.delta) for x in sys.x)
    s = sys.s
    g0 = np.array([[1, 0, 0, 0], [0, x1, y1 * y2, 0], [0, 0, x2, 0], [0, 0, 0, x1 * x2]])
    g1 = np.array([[0, y1, x1 * y2, 0], [0, 0, 0, y2], [0, 0, 0, x2 * y1], [0, 0, 0, 0]])
    lam1 = np.array([[0, 1, 1, 0], [0, 0, 0, -s(1, 2) * x1], [0, 0, 0, s(2, 1) * x2], [0, 0, 0, 0]])
    np.testing.assert_allclose(gamma_tensor(0, sys), g0, rtol=1e-14)
    np.testing.assert_allclose(gamma_tensor(1, sys), g1, rtol=1e-14)
    np.testing.assert_allclose(lambda_full(0, 2, sys), np.diag([1, x1, x2, x1 * x2]), rtol=1e-14)
    np.testing.assert_allclose(lambda_full(1, 2, sys), lam1, rtol=1e-14)

    gauge = solve_gauge(sys)
    X0 = np.eye(4, dtype=complex)
    X0[1, 2] = y1 * y2 / (x1 - x2)
    np.testing.assert_allclose(gauge.X0, X0, rtol=1e-13)
    D = [1, y1, s(2, 1) * y2 / (x2 - x1), y1 * y2 / (x2 - x1)]
    np.testing.assert_allclose(gauge.D, D, rtol=1e-12)


@pytest.mark.parametrize("M", [1, 2, 3, 4])
@pytest.mark.parametrize("delta", [0.0, 0.5, 1.0, 2.0])
def test_gauge_equivalence(M, delta, rng):
    report = verify_equivalence(random_system(rng, M + 1, M, delta))
    assert report.passed, report.to_json()


def test_non_integrable_amplitude_breaks_ratio(two_magnons):
    bad = two_magnons.with_scattering(lambda a, b, d: 1 + a * b - 2 * d * b + 0.1 * a)
    report = verify_equivalence(bad)
    assert not report.ratio_ok and not report.passed
    assert report.ratio_error > 1e-3


def test_symmetric_factor_is_harmless(two_magnons):
    sym = two_magnons.with_scattering(lambda a, b, d: (1 + a * b - 2 * d * b) * (a + b + 3))
    assert verify_equivalence(sym).passed


def test_off_shell_y_is_flagged(two_magnons):
    y1, y2 = (integrable_y(x, two_magnons.delta) for x in two_magnons.x)
    report = verify_equivalence(two_magnons, ys=[1.1 * y1, y2])
    assert not report.passed and report.branch == "user"


def test_ratio_sides_swap_inverse(two_magnons):
    lhs, rhs = consistency_ratio(two_magnons)
    assert lhs == pytest.approx(rhs, rel=1e-12)
    with pytest.raises(DomainError):
        consistency_ratio(MagnonSystem.from_momenta(2, [0.3], 0.0))
