"""Biphoton temporal wavepackets and amplitude-modulation envelopes.

Units: time in ns, angular frequency in rad/ns, modulation frequency in
cycles/ns (GHz).  Use :func:`angular_frequency` to convert a detuning given
in MHz.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "BiphotonWavepacket",
    "Modulation",
    "ModulationSpec",
    "NO_MODULATION",
    "angular_frequency",
    "theta",
    "eval_biphoton_amplitude",
    "eval_envelope",
    "envelope_period",
    "envelope_kinks",
    "mean_envelope",
    "square_wave_intensity",
    "square_wave_envelope_numeric",
]


def angular_frequency(mhz: float) -> float:
    """Convert a frequency difference in MHz to an angular frequency in rad/ns."""
    return 2.0 * math.pi * mhz * 1e-3


def theta(delta_omega: float, tau0: float) -> float:
    """Dimensionless detuning ``delta_omega * tau0``."""
    return delta_omega * tau0


@dataclass(frozen=True)
class BiphotonWavepacket:
    """Double-exponential two-photon amplitude.

    ``tau_left`` and ``tau_right`` are the intensity decay constants of
    ``|phi_HV(tau)|**2`` for negative and positive delays respectively.
    The carrier frequencies only matter through ``delta_omega``.
    """

    tau_left: float = 21.0
    tau_right: float = 24.0
    delta_omega: float = 0.0
    omega_s: Optional[float] = None
    omega_i: Optional[float] = None

    def __post_init__(self):
        if not (self.tau_left > 0 and self.tau_right > 0):
            raise ValueError("decay constants must be positive")
        if not math.isfinite(self.delta_omega):
            raise ValueError("delta_omega must be finite")
        if self.omega_s is not None and self.omega_i is not None:
            if not math.isclose(self.omega_s - self.omega_i, self.delta_omega,
                                rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError("delta_omega must equal omega_s - omega_i")

    @classmethod
    def symmetric(cls, tau0: float = 22.5, delta_omega: float = 0.0) -> "BiphotonWavepacket":
        return cls(tau_left=tau0, tau_right=tau0, delta_omega=delta_omega)

    @property
    def is_symmetric(self) -> bool:
        return self.tau_left == self.tau_right

    @property
    def tau0(self) -> float:
        """Effective correlation time of the cross term ``phi_HV * phi_VH``."""
        return 2.0 / (1.0 / self.tau_left + 1.0 / self.tau_right)

    @property
    def theta(self) -> float:
        return self.delta_omega * self.tau0

    @property
    def norm(self) -> float:
        """Integral of ``|phi_HV|**2`` over all delays."""
        return self.tau_left + self.tau_right

    def with_detuning(self, delta_omega: float) -> "BiphotonWavepacket":
        return BiphotonWavepacket(self.tau_left, self.tau_right, delta_omega)

    def intensity(self, tau):
        """Normalized delay density ``(|phi_HV|**2 + |phi_VH|**2) / (2 * norm)``."""
        hv = np.abs(eval_biphoton_amplitude(self, "HV", tau)) ** 2
        vh = np.abs(eval_biphoton_amplitude(self, "VH", tau)) ** 2
        return (hv + vh) / (2.0 * self.norm)


def eval_biphoton_amplitude(wp: BiphotonWavepacket, ordering: str, tau):
    """Two-photon amplitude ``phi_HV(tau)`` or ``phi_VH(tau) = phi_HV(-tau)``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    if ordering == "HV":
        t = np.asarray(tau, dtype=float)
    elif ordering == "VH":
        t = -np.asarray(tau, dtype=float)
    else:
        raise ValueError(f"ordering must be 'HV' or 'VH', got {ordering!r}")
    out = np.where(t >= 0,
                   np.exp(-np.abs(t) / (2.0 * wp.tau_right)),
                   np.exp(-np.abs(t) / (2.0 * wp.tau_left)))
    return float(out) if out.ndim == 0 else out


class Modulation(enum.Enum):
    NONE = "none"
    SQUARE_WAVE = "square"
    COSINUSOIDAL = "cosinusoidal"
    PERIODIC_SINC2 = "sinc2"


@dataclass(frozen=True)
class ModulationSpec:
    """Periodic amplitude modulation applied to the photons.

    ``frequency`` is in cycles/ns.  For ``SQUARE_WAVE`` it is the per-photon
    drive frequency ``f``; the intensity gate ``|S(t)|**2`` and the induced
    biphoton envelope both repeat every ``1/(2f)``.  For ``COSINUSOIDAL``
    and ``PERIODIC_SINC2`` it is the envelope frequency.  ``None`` means
    matched to the pair detuning (``f = delta_omega / 4pi`` for the square
    wave, ``delta_omega / 2pi`` otherwise).

    ``offset`` (ns) is a relative timing offset between the two photons'
    modulation; it shifts the envelope to ``M(tau + offset)``.
    """

    kind: Modulation = Modulation.NONE
    frequency: Optional[float] = None
    duty: float = 0.5
    terms: int = 100
    conditional: Optional[bool] = None
    offset: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, Modulation):
            object.__setattr__(self, "kind", Modulation(self.kind))
        if not (0.0 < self.duty <= 1.0):
            raise ValueError(f"duty must lie in (0, 1], got {self.duty}")
        if self.kind is Modulation.PERIODIC_SINC2 and self.terms < 2:
            raise ValueError(f"sinc^2 modulation needs terms >= 2, got {self.terms}")
        if self.frequency is not None and not self.frequency > 0:
            raise ValueError("modulation frequency must be positive")
        if self.conditional is None:
            object.__setattr__(self, "conditional", self.kind in (
                Modulation.COSINUSOIDAL, Modulation.PERIODIC_SINC2))
        if not self.conditional and self.kind in (
                Modulation.COSINUSOIDAL, Modulation.PERIODIC_SINC2):
            raise ValueError(f"{self.kind.value} modulation is only defined "
                             "as a conditional envelope")

    @classmethod
    def square(cls, frequency=None, duty=0.5, conditional=False, offset=0.0):
        return cls(Modulation.SQUARE_WAVE, frequency, duty=duty,
                   conditional=conditional, offset=offset)

    @classmethod
    def cosinusoidal(cls, frequency=None, offset=0.0):
        return cls(Modulation.COSINUSOIDAL, frequency, offset=offset)

    @classmethod
    def sinc2(cls, terms=100, frequency=None, offset=0.0):
        return cls(Modulation.PERIODIC_SINC2, frequency, terms=terms, offset=offset)

    @property
    def is_none(self) -> bool:
        return self.kind is Modulation.NONE

    def is_matched(self) -> bool:
        return self.frequency is None

    def gate_period(self, delta_omega: float) -> float:
        """Period of the per-photon square-wave intensity gate (ns)."""
        if self.kind is not Modulation.SQUARE_WAVE:
            raise ValueError("only square-wave modulation has a per-photon gate")
        return envelope_period(self, delta_omega)


NO_MODULATION = ModulationSpec()


def envelope_period(mod: ModulationSpec, delta_omega: float) -> float:
    """Period of the biphoton envelope M(tau); ``inf`` if constant."""
    if mod.kind is Modulation.NONE:
        return math.inf
    if mod.kind is Modulation.SQUARE_WAVE:
        f = mod.frequency if mod.frequency is not None else delta_omega / (4.0 * math.pi)
        return math.inf if f == 0 else 1.0 / (2.0 * f)
    w = 2.0 * math.pi * mod.frequency if mod.frequency is not None else delta_omega
    return math.inf if w == 0 else 2.0 * math.pi / w


def _square_overlap(u, duty):
    # overlap fraction of two periodic gates shifted by u periods
    u = np.mod(u, 1.0)
    u = np.minimum(u, 1.0 - u)
    return np.maximum(0.0, duty - u) + np.maximum(0.0, duty - 1.0 + u)


def eval_envelope(mod: ModulationSpec, delta_omega: float, tau):
    """Biphoton envelope ``M(tau)`` in [0, 1].

    * none: 1
    * square wave: self-overlap ``(1/T) int |S(t)|^2 |S(t+tau)|^2 dt`` of the
      intensity gate, a triangular wave peaking at ``duty`` for duty <= 1/2
    * cosinusoidal: ``|(1 + exp(i w tau)) / 2|^2``
    * periodic sinc^2: ``|(1/s) sum_{n=1..s} exp(i n w tau)|^2``
    """
    t = np.asarray(tau, dtype=float) + mod.offset
    if mod.kind is Modulation.NONE:
        out = np.ones_like(t)
    elif mod.kind is Modulation.SQUARE_WAVE:
        period = envelope_period(mod, delta_omega)
        out = (np.full_like(t, mod.duty) if math.isinf(period)
               else _square_overlap(t / period, mod.duty))
    else:
        w = 2.0 * math.pi / envelope_period(mod, delta_omega)
        x = w * t
        if mod.kind is Modulation.COSINUSOIDAL:
            out = 0.5 * (1.0 + np.cos(x))
        else:
            s = mod.terms
            # M is 2pi-periodic in x; reduce first so sin(s x / 2) keeps its digits
            xr = np.mod(x + math.pi, 2.0 * math.pi) - math.pi
            half = np.sin(0.5 * xr)
            small = np.abs(xr) < 1e-6
            safe = np.where(small, 1.0, half)
            out = np.where(small, 1.0 - (s * s - 1.0) * xr * xr / 12.0,
                           (np.sin(0.5 * s * xr) / (s * safe)) ** 2)
    return float(out) if out.ndim == 0 else out


def envelope_kinks(mod: ModulationSpec, delta_omega: float, lo: float, hi: float) -> np.ndarray:
    """Delays in ``[lo, hi]`` where M(tau) is not smooth."""
    if mod.kind is not Modulation.SQUARE_WAVE:
        return np.empty(0)
    period = envelope_period(mod, delta_omega)
    if math.isinf(period):
        return np.empty(0)
    base = np.array(sorted({0.0, mod.duty % 1.0, (1.0 - mod.duty) % 1.0})) * period
    k0 = math.floor((lo + mod.offset) / period) - 1
    k1 = math.ceil((hi + mod.offset) / period) + 1
    ks = np.arange(k0, k1 + 1)
    pts = (ks[:, None] * period + base[None, :]).ravel() - mod.offset
    return np.unique(pts[(pts >= lo) & (pts <= hi)])


def mean_envelope(mod: ModulationSpec) -> float:
    """Time average of M(tau): the fraction of uncorrelated coincidences kept."""
    if mod.kind is Modulation.NONE:
        return 1.0
    if mod.kind is Modulation.SQUARE_WAVE:
        return mod.duty ** 2
    if mod.kind is Modulation.COSINUSOIDAL:
        return 0.5
    return 1.0 / mod.terms


def square_wave_intensity(mod: ModulationSpec, delta_omega: float, t):
    """Per-photon gate ``|S(t)|^2``: 1 during the first ``duty`` of each period."""
    period = mod.gate_period(delta_omega)
    phase = np.mod(np.asarray(t, dtype=float) / period, 1.0)
    return (phase < mod.duty).astype(float)


def square_wave_envelope_numeric(mod: ModulationSpec, delta_omega: float, tau):
    """Envelope of a square-wave modulation by explicit time-average of the
    product of two gates over one period.

    The gates are piecewise constant, so the average is evaluated exactly by
    splitting the period at every switching instant of both gates.
    """
    period = mod.gate_period(delta_omega)
    taus = np.atleast_1d(np.asarray(tau, dtype=float)) + mod.offset
    out = np.empty_like(taus)
    d = mod.duty * period
    for k, tk in enumerate(taus):
        cuts = np.array([0.0, d, period, (-tk) % period, (d - tk) % period])
        cuts = np.unique(np.clip(cuts, 0.0, period))
        mid = 0.5 * (cuts[1:] + cuts[:-1])
        prod = (square_wave_intensity(mod, delta_omega, mid)
                * square_wave_intensity(mod, delta_omega, mid + tk))
        out[k] = np.sum(prod * np.diff(cuts)) / period
    return float(out[0]) if np.ndim(tau) == 0 else out
