import math

import pytest

from biphoton.calibration import (
    REFERENCE_WAVEPACKET,
    REFERENCE_WINDOW,
    InfeasibleTargetsError,
    fit_imperfections,
    imperfections_from_fraction,
    reference_calibration,
    scenario_state,
)
from biphoton.entanglement import concurrence, purity
from biphoton.wavepacket import NO_MODULATION, ModulationSpec, angular_frequency


@pytest.fixture(scope="module")
def calibrated():
    return reference_calibration()


def test_perfect_targets_give_ideal_parameters():
    fit = fit_imperfections(1.0, 1.0)
    assert fit.epsilon == pytest.approx(0.0, abs=1e-6)
    assert fit.imperfections.split_ratio == pytest.approx(0.5, abs=1e-6)
    assert fit.imperfections.basis_error == (0.0, 0.0)


def test_infeasible_targets():
    with pytest.raises(InfeasibleTargetsError):
        fit_imperfections(1.0, 0.3)
    with pytest.raises(InfeasibleTargetsError):
        fit_imperfections(0.5, 0.1)


def test_degenerate_targets_reproduced():
    fit = fit_imperfections(0.71, 0.81)
    state = scenario_state(fit.imperfections)
    assert concurrence(state) == pytest.approx(0.71, abs=0.02)
    assert purity(state) == pytest.approx(0.81, abs=0.02)


def test_fraction_model_round_trip():
    imp = imperfections_from_fraction(0.2, 0.6)
    assert imp.epsilon(REFERENCE_WINDOW, REFERENCE_WAVEPACKET) == pytest.approx(0.2, rel=1e-12)
    with pytest.raises(ValueError):
        imperfections_from_fraction(1.0)


def test_reference_calibration_scenarios(calibrated):
    imp = calibrated.imperfections
    deg = scenario_state(imp)
    assert concurrence(deg) == pytest.approx(0.71, abs=0.02)
    assert purity(deg) == pytest.approx(0.81, abs=0.02)
    for mhz in (50, 100):
        st = scenario_state(imp, delta_omega=angular_frequency(mhz))
        assert concurrence(st) == 0.0
        assert purity(st) == pytest.approx(0.45, abs=0.05)
    tri = scenario_state(imp, mod=ModulationSpec.square(), delta_omega=angular_frequency(50))
    cos = scenario_state(imp, mod=ModulationSpec.cosinusoidal(), delta_omega=angular_frequency(100))
    assert 0.25 <= concurrence(tri) <= 0.35
    assert 0.25 <= concurrence(cos) <= 0.35


def test_calibration_residuals_within_tolerance(calibrated):
    for r, tol in zip(calibrated.residuals, calibrated.tolerances):
        assert abs(r) <= tol
    assert 0 < calibrated.epsilon < 0.5
    assert 0.5 <= calibrated.imperfections.split_ratio < 1


def test_longer_window_adds_accidentals(calibrated):
    imp = calibrated.imperfections
    short = scenario_state(imp, window=20.0)
    long = scenario_state(imp, window=REFERENCE_WINDOW)
    assert concurrence(short) > concurrence(long)
    assert imp.epsilon(20.0, REFERENCE_WAVEPACKET, NO_MODULATION) < imp.epsilon(100.0, REFERENCE_WAVEPACKET)
    assert math.isfinite(purity(short))
