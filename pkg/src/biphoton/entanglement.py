"""Two-qubit polarization states and their entanglement figures of merit.

Basis order is (HH, HV, VH, VV), first qubit = arm 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .coherence import envelope_integral, windowed_weight
from .wavepacket import NO_MODULATION, BiphotonWavepacket, ModulationSpec

__all__ = [
    "TwoQubitState",
    "ImperfectionModel",
    "CANONICAL_ANGLES",
    "PAULI",
    "bell_state",
    "build_state",
    "concurrence",
    "purity",
    "linear_polarizer",
    "correlation",
    "chsh_fixed",
    "chsh_optimal",
    "correlation_matrix",
    "pair_fraction",
    "IDEAL",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z)
_YY = np.kron(SIGMA_Y, SIGMA_Y)

#: a, a', b, b' (radians) for linear polarizers
CANONICAL_ANGLES = (0.0, math.pi / 4, -math.pi / 8, math.pi / 8)

_EIG_FLOOR = -1e-10


@dataclass(frozen=True)
class TwoQubitState:
    """Validated 4x4 density matrix.

    Tiny negative eigenvalues (down to -1e-10) are clamped to zero; anything
    more negative is treated as a construction bug and rejected.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, rtol=0, atol=1e-12):
            raise ValueError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        vals, vecs = np.linalg.eigh(m)
        if vals[0] < _EIG_FLOOR:
            raise ValueError(f"density matrix has eigenvalue {vals[0]:.3g} < 0")
        if vals[0] < 0:
            vals = np.clip(vals, 0.0, None)
            m = (vecs * vals) @ vecs.conj().T
            m /= np.trace(m).real
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def eigenvalues(self) -> np.ndarray:
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)

    def transform(self, unitary) -> "TwoQubitState":
        u = np.asarray(unitary)
        return TwoQubitState(u @ self.matrix @ u.conj().T)

    @classmethod
    def from_ket(cls, ket) -> "TwoQubitState":
        v = np.asarray(ket, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4) / 4)


def bell_state() -> TwoQubitState:
    """(|HV> + |VH>) / sqrt(2): the post-selected state at degeneracy."""
    return TwoQubitState.from_ket([0, 1, 1, 0])


def pair_fraction(wp: BiphotonWavepacket, window: float,
                  mod: ModulationSpec = NO_MODULATION) -> float:
    """Fraction of emitted pairs that pass the modulation and fall inside ``[-W, W]``."""
    return windowed_weight(wp, mod, window) / wp.norm


@dataclass(frozen=True)
class ImperfectionModel:
    """Experimental imperfections of the post-selected source.

    Accidentals are given either as a fixed fraction ``accidental_fraction``
    or through rates: ``accidental_rate`` is the uncorrelated coincidence
    rate per ns of full window width (the singles-rate product ``r1 * r2``)
    and ``pair_rate`` the rate of post-selected pairs (1/ns).  The window
    dependent fraction is then

        eps(W) = r_acc A(W) / (r_acc A(W) + pair_rate * f(W))

    with ``f(W)`` the fraction of pairs in the window and
    ``A(W) = int_{-W}^{W} M(u) du`` the window width weighted by the
    modulation envelope (``2W`` without modulation): modulators attenuate
    background light too, depending on its relative delay.

    ``split_ratio`` is the beamsplitter transmissivity ``t^2``;
    ``basis_error`` holds analyzer-angle offsets (radians) for the two arms.
    """

    accidental_fraction: Optional[float] = None
    accidental_rate: float = 0.0
    pair_rate: float = 1.0
    split_ratio: float = 0.5
    basis_error: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.accidental_fraction is not None and not 0.0 <= self.accidental_fraction < 1.0:
            raise ValueError("accidental_fraction must lie in [0, 1)")
        if self.accidental_rate < 0 or self.pair_rate <= 0:
            raise ValueError("rates must be non-negative (pair_rate positive)")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        object.__setattr__(self, "basis_error", tuple(float(x) for x in self.basis_error))
        if len(self.basis_error) != 2:
            raise ValueError("basis_error needs one angle per arm")

    @property
    def reflectivity(self) -> float:
        return 1.0 - self.split_ratio

    def epsilon(self, window: float = math.inf, wp: Optional[BiphotonWavepacket] = None,
                mod: ModulationSpec = NO_MODULATION) -> float:
        """Accidental fraction ``eps(W)`` of coincidences inside the window."""
        if self.accidental_fraction is not None:
            return self.accidental_fraction
        if self.accidental_rate == 0:
            return 0.0
        if math.isinf(window):
            return 1.0
        if wp is None:
            raise ValueError("rate-based accidentals need the wavepacket")
        acc = self.accidental_rate * envelope_integral(mod, wp.delta_omega, window)
        true = self.pair_rate * pair_fraction(wp, window, mod)
        return acc / (acc + true)


IDEAL = ImperfectionModel()


def build_state(zeta: complex, imperfections: Optional[ImperfectionModel] = None,
                epsilon: Optional[float] = None) -> TwoQubitState:
    """Post-selected density matrix with HV/VH coherence ``zeta``.

    The beamsplitter weights the HV and VH exit amplitudes by ``t^2`` and
    ``r^2``, giving populations ``t^4, r^4`` (renormalized) and coherence
    ``t^2 r^2 2 zeta / (t^4 + r^4)``; at ``t^2 = 1/2`` this reduces to the
    ideal matrix with populations 1/2 and coherence ``zeta``.  Accidentals
    mix in white noise: ``(1 - eps) rho + eps I/4``.  ``epsilon`` overrides
    the model's fraction (used for window-dependent accidentals).  Basis
    errors act on the analyzers, not here.
    """
    zeta = complex(zeta)
    if abs(zeta) > 0.5 + 1e-12:
        raise ValueError(f"|zeta| must not exceed 1/2, got {abs(zeta)}")
    imp = imperfections or IDEAL
    t2, r2 = imp.split_ratio, imp.reflectivity
    norm = t2 * t2 + r2 * r2
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = t2 * t2 / norm
    rho[2, 2] = r2 * r2 / norm
    rho[1, 2] = t2 * r2 * 2.0 * zeta / norm
    rho[2, 1] = np.conj(rho[1, 2])
    if epsilon is None:
        if imp.accidental_fraction is None and imp.accidental_rate > 0:
            raise ValueError("rate-based accidentals need an explicit epsilon(W)")
        epsilon = imp.epsilon()
    eps = epsilon
    if eps:
        rho = (1.0 - eps) * rho + eps * np.eye(4) / 4
    return TwoQubitState(rho)


def _as_matrix(state):
    return state.matrix if isinstance(state, TwoQubitState) else np.asarray(state, dtype=complex)


def concurrence(state) -> float:
    """Wootters concurrence ``max(0, l1 - l2 - l3 - l4)``.

    ``l_i`` are the square roots, in descending order, of the eigenvalues of
    ``rho (Y x Y) rho* (Y x Y)``.  They are obtained as the singular values
    of ``W^T (Y x Y) W`` with ``rho = W W^dagger`` (subnormalized
    eigenvectors), which keeps near-pure states accurate: eigenvalue
    round-off enters only at second order instead of under a square root.
    """
    rho = _as_matrix(state)
    vals, vecs = np.linalg.eigh(rho)
    w = vecs * np.sqrt(np.clip(vals, 0.0, None))
    lam = np.linalg.svd(w.T @ _YY @ w, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def purity(state) -> float:
    rho = _as_matrix(state)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def linear_polarizer(angle: float) -> np.ndarray:
    """Jones vector transmitted by a linear polarizer at ``angle`` from H."""
    return np.array([math.cos(angle), math.sin(angle)], dtype=complex)


def _orthogonal(v):
    return np.array([-np.conj(v[1]), np.conj(v[0])])


def correlation(state, va, vb) -> float:
    """``E = P(++) + P(--) - P(+-) - P(-+)`` for projective analyzers that pass
    Jones vectors ``va`` (arm 1) and ``vb`` (arm 2)."""
    rho = _as_matrix(state)
    total = 0.0
    for sa, a in ((1, va), (-1, _orthogonal(va))):
        for sb, b in ((1, vb), (-1, _orthogonal(vb))):
            v = np.kron(a, b)
            total += sa * sb * np.real(v.conj() @ rho @ v)
    return float(total)


def chsh_fixed(state, angles: Sequence[float] = CANONICAL_ANGLES,
               basis_error: Tuple[float, float] = (0.0, 0.0)) -> float:
    """CHSH value ``E(a,b) + E(a,b') + E(a',b) - E(a',b')`` for linear
    polarizers at ``angles = (a, a', b, b')``.

    The sign is kept; for the anti-correlated HV/VH states at the canonical
    angles it is negative, so compare ``abs(S)`` against 2.  ``basis_error``
    rotates every analyzer of arm 1 / arm 2 by a fixed offset.
    """
    a, a2, b, b2 = angles
    da, db = basis_error

    def E(x, y):
        return correlation(state, linear_polarizer(x + da), linear_polarizer(y + db))

    return E(a, b) + E(a, b2) + E(a2, b) - E(a2, b2)


def correlation_matrix(state) -> np.ndarray:
    """``T_ij = Tr[rho sigma_i x sigma_j]`` for i, j in x, y, z."""
    rho = _as_matrix(state)
    sig = PAULI[1:]
    return np.array([[np.real(np.trace(rho @ np.kron(si, sj))) for sj in sig] for si in sig])


def chsh_optimal(state) -> float:
    """Largest CHSH value over all analyzer settings: ``2 sqrt(m1 + m2)`` with
    ``m1, m2`` the two largest eigenvalues of ``T^T T``."""
    t = correlation_matrix(state)
    m = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2.0 * math.sqrt(max(0.0, m[0] + m[1])))
