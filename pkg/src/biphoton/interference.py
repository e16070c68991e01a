"""Two-photon interference observables: HOM coincidence probability,
time-resolved beat histograms and CHSH value against coincidence window."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coherence import coherence, zeta_numeric
from .entanglement import CANONICAL_ANGLES, IDEAL, ImperfectionModel, build_state, chsh_fixed
from .wavepacket import NO_MODULATION, BiphotonWavepacket, ModulationSpec, eval_biphoton_amplitude

__all__ = [
    "Histogram",
    "WindowSweep",
    "hom_coincidence",
    "beat_intensity",
    "beat_histogram",
    "histogram_minima",
    "chsh_at_window",
    "chsh_vs_window",
]


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if counts.shape != (edges.size - 1,):
            raise ValueError("counts must have one entry per bin")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total(self) -> float:
        return float(math.fsum(self.counts))


@dataclass(frozen=True)
class WindowSweep:
    windows: np.ndarray
    s_values: np.ndarray
    frequency_difference: float  # GHz (cycles/ns)
    modulation: ModulationSpec = field(default_factory=ModulationSpec)

    def __post_init__(self):
        w = np.asarray(self.windows, dtype=float)
        s = np.asarray(self.s_values, dtype=float)
        if w.shape != s.shape:
            raise ValueError("windows and s_values must have equal length")
        if np.any(np.diff(w) <= 0):
            raise ValueError("windows must be strictly increasing")
        object.__setattr__(self, "windows", w)
        object.__setattr__(self, "s_values", s)

    def crossing(self, level: float = 2.0) -> Optional[float]:
        """First window where ``S`` drops to ``level``, by linear interpolation."""
        above = self.s_values > level
        idx = np.flatnonzero(above[:-1] & ~above[1:])
        if idx.size == 0:
            return None
        i = idx[0]
        w0, w1 = self.windows[i], self.windows[i + 1]
        s0, s1 = self.s_values[i], self.s_values[i + 1]
        return float(w0 + (s0 - level) * (w1 - w0) / (s0 - s1))


def hom_coincidence(wp: BiphotonWavepacket, mod: ModulationSpec = NO_MODULATION,
                    delta_omega: Optional[float] = None) -> float:
    """Coincidence probability behind the beamsplitter, ``(1 - 2 Re zeta) / 2``.

    0 is a full HOM dip, 1/2 the distinguishable-photon baseline.
    """
    if delta_omega is not None:
        wp = wp.with_detuning(delta_omega)
    return 0.5 * (1.0 - 2.0 * coherence(wp, mod).real)


def beat_intensity(wp: BiphotonWavepacket, tau, delta_omega: Optional[float] = None):
    """``G(tau) = |phi_HV(tau) + e^{i dw tau} phi_VH(tau)|^2``."""
    dw = wp.delta_omega if delta_omega is None else delta_omega
    tau = np.asarray(tau, dtype=float)
    amp = (eval_biphoton_amplitude(wp, "HV", tau)
           + np.exp(1j * dw * tau) * eval_biphoton_amplitude(wp, "VH", tau))
    return np.abs(amp) ** 2


def beat_histogram(wp: BiphotonWavepacket, delta_omega: float, edges) -> Histogram:
    """Noiseless time-resolved interference histogram: ``G`` integrated over
    each bin (Gauss-Legendre, split at tau = 0 where ``G`` has a kink)."""
    if delta_omega < 0:
        raise ValueError("delta_omega must be non-negative")
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    x, w = np.polynomial.legendre.leggauss(24)
    counts = np.empty(edges.size - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        pieces = [(lo, 0.0), (0.0, hi)] if lo < 0.0 < hi else [(lo, hi)]
        acc = 0.0
        for a, b in pieces:
            n = max(1, int(math.ceil((b - a) * max(delta_omega, 1e-9) / math.pi)))
            sub = np.linspace(a, b, n + 1)
            mid = 0.5 * (sub[1:] + sub[:-1])
            half = 0.5 * np.diff(sub)
            nodes = mid[:, None] + half[:, None] * x[None, :]
            acc += float(np.sum(half * (beat_intensity(wp, nodes, delta_omega) @ w)))
        counts[i] = acc
    return Histogram(edges, counts)


def histogram_minima(hist: Histogram) -> np.ndarray:
    """Local minima of a histogram, refined by a parabola through each
    minimum bin and its neighbours."""
    c = hist.counts
    centers = hist.centers
    idx = np.flatnonzero((c[1:-1] < c[:-2]) & (c[1:-1] <= c[2:])) + 1
    out = []
    for i in idx:
        y0, y1, y2 = c[i - 1], c[i], c[i + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom > 0 else 0.0
        h = centers[i + 1] - centers[i]
        out.append(centers[i] + shift * h)
    return np.array(out)


def chsh_at_window(wp: BiphotonWavepacket, mod: ModulationSpec, window: float,
                   imperfections: ImperfectionModel = IDEAL,
                   angles: Sequence[float] = CANONICAL_ANGLES) -> float:
    """``|S|`` at canonical (or given) angles for coincidence window ``[-W, W]``."""
    zeta = zeta_numeric(wp, mod, window)
    eps = imperfections.epsilon(window, wp, mod)
    state = build_state(zeta, imperfections, epsilon=eps)
    return abs(chsh_fixed(state, angles, imperfections.basis_error))


def chsh_vs_window(wp: BiphotonWavepacket, mod: ModulationSpec = NO_MODULATION,
                   delta_omega: Optional[float] = None,
                   imperfections: ImperfectionModel = IDEAL,
                   windows: Sequence[float] = tuple(np.linspace(1.0, 100.0, 100)),
                   angles: Sequence[float] = CANONICAL_ANGLES,
                   workers: int = 1) -> WindowSweep:
    """``|S|`` for each coincidence window half-width in ``windows`` (ns).

    Window points are independent, so ``workers > 1`` evaluates them in a
    thread pool; the result does not depend on the evaluation order.
    """
    if delta_omega is not None:
        wp = wp.with_detuning(delta_omega)
    windows = np.asarray(windows, dtype=float)
    if np.any(windows <= 0):
        raise ValueError("windows must be positive")

    def one(w):
        return chsh_at_window(wp, mod, float(w), imperfections, angles)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            s = list(pool.map(one, windows))
    else:
        s = [one(w) for w in windows]
    return WindowSweep(windows, np.array(s), wp.delta_omega / (2 * math.pi), mod)
