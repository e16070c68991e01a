"""Coherence of the post-selected polarization state.

``zeta`` is the HV/VH off-diagonal element of the two-qubit density matrix.
It is available in closed form for symmetric wavepackets and the four
matched modulation schemes, and by direct quadrature (:func:`zeta_numeric`)
for any wavepacket, modulation and coincidence window.  The quadrature only
uses the envelope definitions in :mod:`biphoton.wavepacket`, so it serves as
an independent check on the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._quadrature import QuadratureError, integrate
from .wavepacket import (
    NO_MODULATION,
    BiphotonWavepacket,
    Modulation,
    ModulationSpec,
    envelope_kinks,
    envelope_period,
    eval_envelope,
)

__all__ = [
    "CoherenceParams",
    "QuadratureError",
    "zeta_unmodulated",
    "zeta_triangular",
    "zeta_cosinusoidal",
    "zeta_sinc2",
    "zeta_closed_form",
    "zeta",
    "zeta_numeric",
    "windowed_weight",
    "envelope_integral",
    "coherence",
    "interference_fidelity",
]

# e^-45 ~ 3e-20: anything beyond is below double precision of the result
_DECAY_CUTOFF = 45.0


@dataclass(frozen=True)
class CoherenceParams:
    theta: float
    window: float = math.inf
    modulation: ModulationSpec = field(default_factory=ModulationSpec)

    def __post_init__(self):
        if not self.theta >= 0:
            raise ValueError("theta must be non-negative")
        if not self.window > 0:
            raise ValueError("window must be positive or infinite")


def zeta_unmodulated(theta):
    """Unmodulated coherence ``1 / (2 (1 + theta^2))``."""
    theta = np.asarray(theta, dtype=float)
    out = 0.5 / (1.0 + theta * theta)
    return float(out) if out.ndim == 0 else out


def _zeta_triangular_scalar(t):
    if t == 0:
        return 0.5
    if math.isinf(t):
        return 2.0 / math.pi ** 2
    x = math.tanh(math.pi / (2.0 * t))
    num = math.pi * x - t + math.pi * x * t * t + t ** 3
    den = 2.0 * x * (math.pi - x * t) * (1.0 + t * t) ** 2
    return num / den


def zeta_triangular(theta):
    """Coherence under synchronous 50%-duty square-wave modulation of both
    photons, i.e. a triangular biphoton envelope at the beat frequency."""
    if np.ndim(theta) == 0:
        return _zeta_triangular_scalar(float(theta))
    return np.array([_zeta_triangular_scalar(float(t)) for t in np.ravel(theta)]).reshape(np.shape(theta))


def zeta_cosinusoidal(theta):
    """Coherence under the conditional envelope ``|(1 + e^{i dw tau}) / 2|^2``."""
    t2 = np.asarray(theta, dtype=float) ** 2
    with np.errstate(invalid="ignore"):
        out = (2.0 + 7.0 * t2 + 2.0 * t2 * t2) / (2.0 * (2.0 + t2) * (1.0 + 4.0 * t2))
    out = np.where(np.isinf(t2), 0.25, out)
    return float(out) if out.ndim == 0 else out


def _zeta_sinc2_scalar(t, s):
    if math.isinf(t):
        return (s - 1) / (2.0 * s)
    ks = range(-(s - 1), s)
    num = math.fsum((s - abs(k)) / (1.0 + ((k - 1) * t) ** 2) for k in ks)
    den = math.fsum((s - abs(k)) / (1.0 + (k * t) ** 2) for k in ks)
    return num / (2.0 * den)


def zeta_sinc2(theta, s=100):
    """Coherence under the periodic sinc^2 envelope with ``s`` terms.

    Expands ``M_s(tau) = s^-2 sum_k (s - |k|) e^{i k dw tau}`` so that both
    integrals become finite sums of Lorentzians.
    """
    s = int(s)
    if s < 2:
        raise ValueError(f"sinc^2 modulation needs s >= 2, got {s}")
    if np.ndim(theta) == 0:
        return _zeta_sinc2_scalar(float(theta), s)
    return np.array([_zeta_sinc2_scalar(float(t), s) for t in np.ravel(theta)]).reshape(np.shape(theta))


def zeta_closed_form(theta, mod: ModulationSpec):
    """Dispatch to the closed form for ``mod``, or raise ``ValueError`` if the
    modulation has none (non-matched frequency, duty != 1/2, timing offset)."""
    if mod.frequency is not None or mod.offset != 0.0:
        raise ValueError("closed forms assume modulation matched to the detuning")
    if mod.kind is Modulation.NONE:
        return zeta_unmodulated(theta)
    if mod.kind is Modulation.SQUARE_WAVE:
        if mod.duty != 0.5:
            raise ValueError("closed form only for 50% duty square waves")
        return zeta_triangular(theta)
    if mod.kind is Modulation.COSINUSOIDAL:
        return zeta_cosinusoidal(theta)
    return zeta_sinc2(theta, mod.terms)


def zeta(theta, mod: ModulationSpec = NO_MODULATION):
    """Coherence at dimensionless detuning ``theta`` for a symmetric wavepacket.

    Falls back to quadrature (with ``tau0 = 1``) when no closed form exists.
    """
    try:
        return zeta_closed_form(theta, mod)
    except ValueError:
        if mod.frequency is not None:
            raise
    if np.ndim(theta):
        return np.array([zeta(float(t), mod) for t in np.ravel(theta)]).reshape(np.shape(theta))
    return zeta_numeric(BiphotonWavepacket.symmetric(1.0, float(theta)), mod).real


# ---------------------------------------------------------------------------
# quadrature oracle


def _common_period(p1, p2):
    if math.isinf(p1):
        return p2
    if math.isinf(p2):
        return p1
    big, small = max(p1, p2), min(p1, p2)
    k = round(big / small)
    if k >= 1 and abs(big - k * small) <= 1e-12 * big:
        return big
    return math.inf


def _panels(f, lo, hi, kinks, h, rtol):
    """Integrate ``f`` over ``[lo, hi]`` on panels no longer than ``h`` that
    never straddle a kink."""
    pts = np.unique(np.concatenate([[lo, hi], kinks(lo, hi)]))
    n = np.maximum(1, np.ceil(np.diff(pts) / h).astype(int))
    edges = np.concatenate(
        [np.linspace(p, q, k + 1)[:-1] for p, q, k in zip(pts[:-1], pts[1:], n)] + [[hi]])
    return integrate(f, edges, rtol=rtol)


def _side_integral(g, decay, length, period, kinks, omega_max, rtol):
    """``int_0^length g(u) exp(-u/decay) du`` for a ``period``-periodic ``g``.

    Whole periods are summed as a geometric series, so only one period (plus a
    remainder) is ever integrated numerically.
    """
    cutoff = _DECAY_CUTOFF * decay
    reach = min(length, cutoff)
    h = decay
    if omega_max > 0:
        h = min(h, 4.0 * math.pi / omega_max)

    def integrand(u):
        return g(u) * np.exp(-u / decay)

    def piece(lo, hi):
        return _panels(integrand, lo, hi, kinks, h, rtol)

    if math.isinf(period) or period >= reach:
        return piece(0.0, reach)

    one = piece(0.0, period)
    ratio = period / decay
    if math.isinf(length) or length >= cutoff:
        return one / -math.expm1(-ratio)
    full = math.floor(length / period)
    rest = length - full * period
    total = one * (-math.expm1(-full * ratio)) / -math.expm1(-ratio)
    if rest > 0:
        total += math.exp(-full * ratio) * piece(0.0, rest)
    return total


def _envelope_bandwidth(mod: ModulationSpec, dw: float) -> float:
    period = envelope_period(mod, dw)
    if math.isinf(period):
        return 0.0
    if mod.kind is Modulation.COSINUSOIDAL:
        return 2.0 * math.pi / period
    if mod.kind is Modulation.PERIODIC_SINC2:
        return (mod.terms - 1) * 2.0 * math.pi / period
    return 0.0  # square-wave envelopes are piecewise linear


def _kinks_on_side(mod, dw, sign):
    def kinks(lo, hi):
        if sign > 0:
            return envelope_kinks(mod, dw, lo, hi)
        return -envelope_kinks(mod, dw, -hi, -lo)[::-1]
    return kinks


def envelope_integral(mod: ModulationSpec, delta_omega: float, window: float,
                      rtol: float = 1e-9) -> float:
    """``int_{-W}^{W} M(tau) dtau``: the effective window width seen by
    uncorrelated coincidences (``2W`` without modulation)."""
    if not 0 < window < math.inf:
        raise ValueError("window must be positive and finite")
    if mod.kind is Modulation.NONE:
        return 2.0 * window
    period = envelope_period(mod, delta_omega)
    band = _envelope_bandwidth(mod, delta_omega)
    h = 4.0 * math.pi / band if band > 0 else window
    total = 0.0
    for sign in (1.0, -1.0):
        def g(u, sign=sign):
            return eval_envelope(mod, delta_omega, sign * u)

        kinks = _kinks_on_side(mod, delta_omega, sign)
        if math.isinf(period) or period >= window:
            total += _panels(g, 0.0, window, kinks, h, rtol).real
        else:
            full = math.floor(window / period)
            rest = window - full * period
            total += full * _panels(g, 0.0, period, kinks, h, rtol).real
            if rest > 0:
                total += _panels(g, 0.0, rest, kinks, h, rtol).real
    return total


def windowed_weight(wp: BiphotonWavepacket, mod: ModulationSpec = NO_MODULATION,
                    window: float = math.inf, rtol: float = 1e-9) -> float:
    """``int_{-W}^{W} M(tau) (|phi_HV|^2 + |phi_VH|^2) / 2 dtau``."""
    dw = wp.delta_omega
    period = envelope_period(mod, dw)
    band = _envelope_bandwidth(mod, dw)
    total = 0.0
    for sign in (1.0, -1.0):
        def g(u, sign=sign):
            return eval_envelope(mod, dw, sign * u)

        for decay in (wp.tau_left, wp.tau_right):
            total += 0.5 * _side_integral(g, decay, window, period,
                                          _kinks_on_side(mod, dw, sign), band, rtol).real
    return total


def zeta_numeric(wp: BiphotonWavepacket, mod: ModulationSpec = NO_MODULATION,
                 window: float = math.inf, rtol: float = 1e-9) -> complex:
    """Coherence by direct quadrature over the symmetric window ``[-W, W]``.

    ``zeta_W = int M phi_HV phi_VH e^{-i dw tau} / (2 int M |phi|^2)`` where
    ``|phi|^2`` is the mean of the HV and VH intensities.  Returns a complex
    number; it is real whenever the envelope is even in ``tau``.

    Raises :class:`QuadratureError` if ``rtol`` cannot be reached.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    dw = wp.delta_omega
    p_beat = math.inf if dw == 0 else 2.0 * math.pi / abs(dw)
    period = _common_period(envelope_period(mod, dw), p_beat)
    band = _envelope_bandwidth(mod, dw) + abs(dw)
    num = 0j
    for sign in (1.0, -1.0):
        def g(u, sign=sign):
            tau = sign * u
            return eval_envelope(mod, dw, tau) * np.exp(-1j * dw * tau)

        num += _side_integral(g, wp.tau0, window, period,
                              _kinks_on_side(mod, dw, sign), band, rtol)
    return num / (2.0 * windowed_weight(wp, mod, window, rtol))


def coherence(wp: BiphotonWavepacket, mod: ModulationSpec = NO_MODULATION,
              window: float = math.inf) -> complex:
    """Coherence for ``wp``: closed form when one applies, quadrature otherwise."""
    if wp.is_symmetric and math.isinf(window):
        try:
            return complex(zeta_closed_form(abs(wp.theta), mod))
        except ValueError:
            pass
    return zeta_numeric(wp, mod, window)


def interference_fidelity(theta, mod: ModulationSpec = NO_MODULATION):
    """Normalized overlap ``2 zeta`` of the two interfering two-photon
    wavefunctions; 1 means fully indistinguishable."""
    return 2.0 * zeta(theta, mod)
