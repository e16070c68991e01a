import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biphoton.calibration import REFERENCE_WAVEPACKET, reference_calibration
from biphoton.coherence import interference_fidelity, zeta_cosinusoidal, zeta_numeric
from biphoton.entanglement import IDEAL
from biphoton.interference import (
    Histogram,
    WindowSweep,
    beat_histogram,
    beat_intensity,
    chsh_at_window,
    chsh_vs_window,
    histogram_minima,
    hom_coincidence,
)
from biphoton.wavepacket import (
    NO_MODULATION,
    BiphotonWavepacket,
    ModulationSpec,
    angular_frequency,
    eval_biphoton_amplitude,
)

SYM = BiphotonWavepacket.symmetric(22.5)
SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def calibrated():
    return reference_calibration().imperfections


def test_hom_examples():
    assert hom_coincidence(SYM, NO_MODULATION, 0.0) == 0.0
    assert hom_coincidence(SYM, NO_MODULATION, 7.0686 / 22.5) == pytest.approx(0.4902, abs=1e-4)
    assert hom_coincidence(SYM, ModulationSpec.sinc2(100), 100 / 22.5) == pytest.approx(0.005, abs=1e-4)


@given(st.floats(0.0, 50.0))
@settings(max_examples=30)
def test_hom_is_complement_of_fidelity(theta):
    for mod in (NO_MODULATION, ModulationSpec.square(), ModulationSpec.cosinusoidal()):
        p = hom_coincidence(BiphotonWavepacket.symmetric(1.0), mod, theta)
        assert p == pytest.approx((1 - interference_fidelity(theta, mod)) / 2, abs=1e-12)


def test_histogram_validation():
    with pytest.raises(ValueError):
        Histogram([0.0, 1.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Histogram([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        Histogram([0.0, 1.0], [-1.0])
    with pytest.raises(ValueError):
        beat_histogram(SYM, 0.1, [0.0, 2.0, 1.0])
    with pytest.raises(ValueError):
        beat_histogram(SYM, -0.1, [0.0, 1.0])


def test_degenerate_beat_has_no_oscillation():
    tau = np.linspace(-200, 200, 801)
    np.testing.assert_allclose(beat_intensity(SYM, tau, 0.0), 4 * np.exp(-np.abs(tau) / 22.5), rtol=1e-14)
    h = beat_histogram(SYM, 0.0, np.linspace(-200, 200, 81))
    left, right = h.counts[:40], h.counts[40:]
    assert np.all(np.diff(left) > 0) and np.all(np.diff(right) < 0)
    assert histogram_minima(h).size == 0


def test_beat_period_at_43_mhz():
    h = beat_histogram(REFERENCE_WAVEPACKET, angular_frequency(43), np.arange(-150.0, 150.0 + 1e-9, 0.5))
    gaps = np.diff(histogram_minima(h))
    assert gaps.size >= 4
    assert np.all(np.abs(gaps - 1e3 / 43) < 0.1)


def test_beat_pointwise_oracle():
    wp = REFERENCE_WAVEPACKET
    dw = angular_frequency(43)
    for tau in (math.pi / dw, -math.pi / dw, 3 * math.pi / dw):
        hv = eval_biphoton_amplitude(wp, "HV", tau)
        vh = eval_biphoton_amplitude(wp, "VH", tau)
        assert beat_intensity(wp, tau, dw) == pytest.approx((hv - vh) ** 2, rel=1e-12, abs=1e-300)
    tau = 7.3
    direct = abs(eval_biphoton_amplitude(wp, "HV", tau)
                 + complex(math.cos(dw * tau), math.sin(dw * tau)) * eval_biphoton_amplitude(wp, "VH", tau)) ** 2
    assert beat_intensity(wp, tau, dw) == pytest.approx(direct, rel=1e-14)


@pytest.mark.parametrize("mhz", [0, 13, 43, 100])
def test_beat_total_mass(mhz):
    wp = REFERENCE_WAVEPACKET
    dw = angular_frequency(mhz)
    h = beat_histogram(wp, dw, np.linspace(-1500, 1500, 301))
    z = zeta_numeric(wp.with_detuning(dw), NO_MODULATION).real
    assert h.total == pytest.approx(2 * wp.norm * (1 + 2 * z), rel=1e-9)


def test_beat_mass_over_whole_periods_tends_to_incoherent_sum():
    wp = REFERENCE_WAVEPACKET
    masses = [beat_histogram(wp, angular_frequency(f), np.linspace(-1500, 1500, 3)).total for f in (200, 400, 800)]
    np.testing.assert_allclose(masses, 2 * wp.norm, rtol=2e-3)


def test_window_sweep_validation_and_crossing():
    with pytest.raises(ValueError):
        WindowSweep([1.0, 2.0], [2.5], 0.0)
    with pytest.raises(ValueError):
        WindowSweep([2.0, 1.0], [2.5, 1.0], 0.0)
    sweep = WindowSweep([1.0, 2.0, 3.0], [2.5, 2.2, 1.8], 0.02)
    assert sweep.crossing() == pytest.approx(2.5)
    assert WindowSweep([1.0, 2.0], [2.5, 2.4], 0.0).crossing() is None
    with pytest.raises(ValueError):
        chsh_vs_window(SYM, windows=[0.0, 1.0])


def test_degenerate_ideal_is_flat():
    sweep = chsh_vs_window(SYM, windows=np.linspace(1, 100, 12))
    np.testing.assert_allclose(sweep.s_values, 2 * SQRT2, atol=1e-9)


def test_unmodulated_ideal_decreases_within_first_half_beat():
    dw = angular_frequency(20)
    sweep = chsh_vs_window(REFERENCE_WAVEPACKET, delta_omega=dw, windows=np.linspace(0.5, math.pi / dw, 40))
    assert np.all(np.diff(sweep.s_values) < 0)
    assert sweep.s_values[0] == pytest.approx(2 * SQRT2, abs=1e-3)


def test_calibrated_unmodulated_crossing_bracket(calibrated):
    sweep = chsh_vs_window(REFERENCE_WAVEPACKET, delta_omega=angular_frequency(20), imperfections=calibrated,
                           windows=np.arange(1.0, 101.0))
    w_star = sweep.crossing()
    assert w_star is not None and 10 < w_star < 30
    assert sweep.frequency_difference == pytest.approx(0.02)


@pytest.mark.parametrize("mhz", [20, 50, 100])
def test_revival_at_long_window(mhz):
    dw = angular_frequency(mhz)
    mod = chsh_vs_window(REFERENCE_WAVEPACKET, ModulationSpec.cosinusoidal(), dw, windows=[100.0])
    unmod = chsh_vs_window(REFERENCE_WAVEPACKET, NO_MODULATION, dw, windows=[100.0])
    assert mod.s_values[0] > unmod.s_values[0] + 0.1
    tri = chsh_vs_window(REFERENCE_WAVEPACKET, ModulationSpec.square(), dw, windows=[100.0])
    assert tri.s_values[0] > unmod.s_values[0] + 0.1


def test_matched_modulation_violates_at_every_window():
    dw = angular_frequency(20)
    sweep = chsh_vs_window(REFERENCE_WAVEPACKET, ModulationSpec.cosinusoidal(), dw, windows=np.linspace(1, 100, 34))
    assert np.all(sweep.s_values > 2.0)


def test_long_window_limit_matches_closed_form():
    wp = BiphotonWavepacket.symmetric(22.5)
    dw = angular_frequency(20)
    s = chsh_at_window(wp.with_detuning(dw), ModulationSpec.cosinusoidal(), 1e4)
    assert s == pytest.approx(SQRT2 * (1 + 2 * zeta_cosinusoidal(dw * 22.5)), abs=1e-7)


def test_parallel_sweep_matches_serial(calibrated):
    windows = np.linspace(2, 100, 9)
    args = (REFERENCE_WAVEPACKET, ModulationSpec.square(), angular_frequency(50), calibrated, windows)
    serial = chsh_vs_window(*args)
    parallel = chsh_vs_window(*args, workers=3)
    np.testing.assert_array_equal(serial.s_values, parallel.s_values)
    assert chsh_at_window(SYM, NO_MODULATION, 50.0, IDEAL) == pytest.approx(2 * SQRT2, abs=1e-9)
