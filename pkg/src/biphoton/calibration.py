"""Fitting imperfection parameters to measured concurrence and purity.

The instrument parameters behind the reported tomography numbers are not
known, so they are inferred: the accidental fraction at a reference window
and the beamsplitter transmissivity are adjusted until the forward model
reproduces the target concurrence/purity pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .coherence import zeta_numeric
from .entanglement import ImperfectionModel, TwoQubitState, build_state, concurrence, pair_fraction, purity
from .wavepacket import NO_MODULATION, BiphotonWavepacket, ModulationSpec, angular_frequency

__all__ = [
    "REFERENCE_WAVEPACKET",
    "REFERENCE_WINDOW",
    "InfeasibleTargetsError",
    "FitResult",
    "scenario_state",
    "imperfections_from_fraction",
    "fit_imperfections",
    "reference_calibration",
]

REFERENCE_WAVEPACKET = BiphotonWavepacket(21.0, 24.0)
#: coincidence window (ns half-width) at which the tomography targets apply
REFERENCE_WINDOW = 100.0


class InfeasibleTargetsError(ValueError):
    """No parameter set reproduces the targets within tolerance."""


def scenario_state(imperfections: ImperfectionModel, wp: BiphotonWavepacket = REFERENCE_WAVEPACKET,
                   mod: ModulationSpec = NO_MODULATION, delta_omega: float = 0.0,
                   window: float = REFERENCE_WINDOW) -> TwoQubitState:
    """Post-selected state for one experimental scenario."""
    wp = wp.with_detuning(delta_omega)
    zeta = zeta_numeric(wp, mod, window)
    eps = imperfections.epsilon(window, wp, mod)
    return build_state(zeta, imperfections, epsilon=eps)


def imperfections_from_fraction(epsilon: float, split_ratio: float = 0.5,
                                basis_error: Tuple[float, float] = (0.0, 0.0),
                                wp: BiphotonWavepacket = REFERENCE_WAVEPACKET,
                                window: float = REFERENCE_WINDOW,
                                pair_rate: float = 1.0) -> ImperfectionModel:
    """Rate-based model whose unmodulated accidental fraction at ``window`` is ``epsilon``."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    f = pair_fraction(wp, window)
    rate = epsilon / (1.0 - epsilon) * pair_rate * f / (2.0 * window)
    return ImperfectionModel(accidental_rate=rate, pair_rate=pair_rate,
                             split_ratio=split_ratio, basis_error=basis_error)


@dataclass(frozen=True)
class FitResult:
    imperfections: ImperfectionModel
    epsilon: float
    achieved: Tuple[float, ...]
    targets: Tuple[float, ...]
    tolerances: Tuple[float, ...]

    @property
    def residuals(self):
        return tuple(a - t for a, t in zip(self.achieved, self.targets))


def fit_imperfections(concurrence_target: float, purity_target: float,
                      purity_nondegenerate: Optional[float] = None,
                      nondegenerate_mhz: float = 50.0,
                      wp: BiphotonWavepacket = REFERENCE_WAVEPACKET,
                      window: float = REFERENCE_WINDOW,
                      basis_error: Tuple[float, float] = (0.0, 0.0),
                      tolerances: Sequence[float] = (0.02, 0.02, 0.05)) -> FitResult:
    """Weighted least-squares fit of (accidental fraction, split ratio).

    Targets are the degenerate unmodulated concurrence and purity and,
    optionally, the purity of the unmodulated state at ``nondegenerate_mhz``.
    Residuals are weighted by ``1/tolerance``.  Raises
    :class:`InfeasibleTargetsError` if any target misses its tolerance.
    """
    if not (0 <= concurrence_target <= 1 and 0.25 <= purity_target <= 1):
        raise InfeasibleTargetsError("targets outside the physical range")
    targets = [concurrence_target, purity_target]
    if purity_nondegenerate is not None:
        targets.append(purity_nondegenerate)
    tol = np.asarray(tolerances[: len(targets)], dtype=float)
    z0 = zeta_numeric(wp, NO_MODULATION, window)
    znd = zeta_numeric(wp.with_detuning(angular_frequency(nondegenerate_mhz)), NO_MODULATION, window)

    def observables(x):
        eps, t2 = x
        imp = ImperfectionModel(accidental_fraction=eps, split_ratio=t2)
        rho = build_state(z0, imp)
        out = [concurrence(rho), purity(rho)]
        if purity_nondegenerate is not None:
            out.append(purity(build_state(znd, imp)))
        return np.array(out)

    def residual(x):
        return (observables(x) - targets) / tol

    best = None
    for start in ((0.05, 0.55), (0.15, 0.6), (0.3, 0.75)):
        sol = least_squares(residual, start, bounds=([0.0, 0.5], [0.99, 0.999]),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    achieved = observables(best.x)
    if np.any(np.abs(achieved - targets) > tol):
        raise InfeasibleTargetsError(
            f"best fit {np.round(achieved, 4).tolist()} misses targets {targets}")
    eps, t2 = (float(v) for v in best.x)
    imp = imperfections_from_fraction(eps, t2, basis_error, wp, window)
    return FitResult(imp, eps, tuple(float(a) for a in achieved), tuple(targets), tuple(tol))


def reference_calibration() -> FitResult:
    """Fit to the degenerate (C, purity) = (0.71, 0.81) and the 0.45 purity
    measured without modulation at 50 MHz."""
    return fit_imperfections(0.71, 0.81, purity_nondegenerate=0.45)
