"""Polarization entanglement of frequency-detuned biphotons and its revival
by wavepacket modulation: coherence, concurrence, CHSH, tomography and an
event-level Monte Carlo."""
from .coherence import (
    QuadratureError,
    interference_fidelity,
    zeta,
    zeta_closed_form,
    zeta_cosinusoidal,
    zeta_numeric,
    zeta_sinc2,
    zeta_triangular,
    zeta_unmodulated,
)
from .entanglement import (
    IDEAL,
    ImperfectionModel,
    TwoQubitState,
    bell_state,
    build_state,
    chsh_fixed,
    chsh_optimal,
    concurrence,
    purity,
)
from .wavepacket import (
    NO_MODULATION,
    BiphotonWavepacket,
    Modulation,
    ModulationSpec,
    angular_frequency,
    eval_biphoton_amplitude,
    eval_envelope,
    theta,
)

__version__ = "0.1.0"

__all__ = [
    "QuadratureError",
    "interference_fidelity",
    "zeta",
    "zeta_closed_form",
    "zeta_cosinusoidal",
    "zeta_numeric",
    "zeta_sinc2",
    "zeta_triangular",
    "zeta_unmodulated",
    "IDEAL",
    "ImperfectionModel",
    "TwoQubitState",
    "bell_state",
    "build_state",
    "chsh_fixed",
    "chsh_optimal",
    "concurrence",
    "purity",
    "NO_MODULATION",
    "BiphotonWavepacket",
    "Modulation",
    "ModulationSpec",
    "angular_frequency",
    "eval_biphoton_amplitude",
    "eval_envelope",
    "theta",
]
