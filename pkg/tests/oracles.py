"""Reference implementations written directly from the defining formulas.

They share no code with the package: integrals use ``scipy.integrate.quad``
one envelope period at a time, concurrence uses the non-Hermitian
eigenproblem, CHSH optima use a brute-force angle search.
"""
import math

import numpy as np
from scipy.integrate import quad

YY = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)


def tri_envelope(x):
    """Self-overlap of a 50% duty square gate, ``x`` in periods."""
    u = x % 1.0
    return 0.5 - min(u, 1.0 - u)


def cos_envelope(phase):
    return abs((1 + np.exp(1j * phase)) / 2) ** 2


def sinc2_envelope(phase, s):
    return abs(sum(np.exp(1j * n * phase) for n in range(1, s + 1)) / s) ** 2


def envelope(kind, theta, u, s=100):
    """Envelope at ``u = tau / tau0`` for detuning ``theta``."""
    phase = theta * u
    if kind == "none":
        return 1.0
    if kind == "tri":
        return tri_envelope(phase / (2 * math.pi))
    if kind == "cos":
        return cos_envelope(phase)
    return sinc2_envelope(phase, s)


def zeta_oracle(kind, theta, s=100, window=math.inf):
    """``zeta`` for a symmetric packet (tau0 = 1) by period-wise quad.

    Integrand is even in u for these envelopes, so only u >= 0 is needed."""
    period = 2 * math.pi / theta if theta > 0 else 50.0
    reach = min(window, 60.0)
    edges = np.arange(0.0, reach, period / 4 if kind == "sinc2" else period / 2)
    edges = np.append(edges, reach)
    if kind == "sinc2":
        # resolve the narrow peaks of the s-term envelope
        edges = np.unique(np.concatenate([np.linspace(a, b, 9) for a, b in zip(edges[:-1], edges[1:])]))
    num = den = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        num += quad(lambda u: envelope(kind, theta, u, s) * math.exp(-u) * math.cos(theta * u), a, b,
                    epsabs=0, epsrel=1e-12, limit=200)[0]
        den += quad(lambda u: envelope(kind, theta, u, s) * math.exp(-u), a, b,
                    epsabs=0, epsrel=1e-12, limit=200)[0]
    return num / (2 * den)


def concurrence_oracle(rho):
    """Wootters' formula with square roots of the (non-Hermitian)
    ``rho (Y x Y) rho* (Y x Y)`` eigenvalues."""
    rho = np.asarray(rho)
    r = rho @ YY @ rho.conj() @ YY
    lam = np.sort(np.sqrt(np.clip(np.linalg.eigvals(r).real, 0, None)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def ideal_state(zeta):
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = rho[2, 2] = 0.5
    rho[1, 2] = zeta
    rho[2, 1] = np.conj(zeta)
    return rho


def correlation_oracle(rho, a, b):
    """``E(a, b)`` for linear polarizers by explicit 4-outcome projectors."""
    def vec(t):
        return np.array([math.cos(t), math.sin(t)])
    e = 0.0
    for sa, ta in ((1, a), (-1, a + math.pi / 2)):
        for sb, tb in ((1, b), (-1, b + math.pi / 2)):
            v = np.kron(vec(ta), vec(tb))
            e += sa * sb * float(np.real(v @ rho @ v))
    return e


def chsh_grid_oracle(rho, n=73):
    """Largest |S| over real linear-polarizer angles on an ``n``-point grid
    (enough for states whose optimum lies in the x-z plane)."""
    angles = np.linspace(0, math.pi, n, endpoint=False)
    e = np.array([[correlation_oracle(rho, a, b) for b in angles] for a in angles])
    best = 0.0
    for i in range(n):
        for j in range(n):
            # S = E(a,b) + E(a,b') + E(a',b) - E(a',b'): maximize over b' for each (a, a', b)
            s = e[i][:, None] + e[i][None, :] + e[j][:, None] - e[j][None, :]
            best = max(best, float(np.max(np.abs(s))))
    return best
