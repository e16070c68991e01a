"""Two-qubit polarization tomography: simulated coincidence counts, linear
inversion and maximum-likelihood reconstruction."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .entanglement import PAULI, TwoQubitState

__all__ = [
    "MeasurementSetting",
    "CountRecord",
    "MLEInfo",
    "SingularMeasurementError",
    "ConvergenceWarning",
    "jones",
    "standard_settings",
    "measurement_matrix",
    "simulate_counts",
    "linear_inversion",
    "mle_reconstruct",
    "log_likelihood",
    "trace_distance",
    "bootstrap",
    "BootstrapResult",
    "records_to_csv",
    "records_from_csv",
]


class SingularMeasurementError(np.linalg.LinAlgError):
    """The measurement settings are not informationally complete."""


class ConvergenceWarning(UserWarning):
    pass


def jones(theta: float, phi: float = 0.0) -> np.ndarray:
    """Polarization ``cos(theta)|H> + e^{i phi} sin(theta)|V>``."""
    return np.array([math.cos(theta), np.exp(1j * phi) * math.sin(theta)], dtype=complex)


_BASIS = {
    "H": (0.0, 0.0),
    "V": (math.pi / 2, 0.0),
    "D": (math.pi / 4, 0.0),
    "R": (math.pi / 4, math.pi / 2),
}


@dataclass(frozen=True)
class MeasurementSetting:
    """Pair of single-photon projectors, each given by its Jones angles."""

    label: str
    angles_a: tuple
    angles_b: tuple

    @classmethod
    def from_labels(cls, a: str, b: str) -> "MeasurementSetting":
        return cls(a + b, _BASIS[a], _BASIS[b])

    @property
    def jones_a(self) -> np.ndarray:
        return jones(*self.angles_a)

    @property
    def jones_b(self) -> np.ndarray:
        return jones(*self.angles_b)

    @property
    def projector(self) -> np.ndarray:
        v = np.kron(self.jones_a, self.jones_b)
        return np.outer(v, v.conj())

    def probability(self, state) -> float:
        rho = state.matrix if isinstance(state, TwoQubitState) else np.asarray(state)
        v = np.kron(self.jones_a, self.jones_b)
        return float(np.real(v.conj() @ rho @ v))


def standard_settings() -> List[MeasurementSetting]:
    """The 16 settings {H, V, D, R} x {H, V, D, R}."""
    return [MeasurementSetting.from_labels(a, b) for a in "HVDR" for b in "HVDR"]


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    counts: int
    integration: int

    def __post_init__(self):
        if self.counts < 0 or self.integration <= 0 or self.counts > self.integration:
            raise ValueError("need 0 <= counts <= integration and integration > 0")

    @property
    def setting_id(self) -> str:
        return self.setting.label

    @property
    def frequency(self) -> float:
        return self.counts / self.integration


def measurement_matrix(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    """Real matrix mapping Pauli coefficients ``r_mn`` (with
    ``rho = sum r_mn s_m x s_n / 4``) to outcome probabilities."""
    paulis = [np.kron(a, b) for a in PAULI for b in PAULI]
    return np.array([[np.real(np.trace(s.projector @ p)) / 4 for p in paulis] for s in settings])


def simulate_counts(state, settings: Optional[Sequence[MeasurementSetting]] = None,
                    pairs_per_setting: int = 10 ** 6, seed=None) -> List[CountRecord]:
    """Binomial coincidence counts with success probability ``Tr[rho Pi]``."""
    if pairs_per_setting < 1:
        raise ValueError("pairs_per_setting must be >= 1")
    settings = standard_settings() if settings is None else list(settings)
    rng = np.random.default_rng(seed)
    probs = np.clip([s.probability(state) for s in settings], 0.0, 1.0)
    counts = rng.binomial(pairs_per_setting, probs)
    return [CountRecord(s, int(c), int(pairs_per_setting)) for s, c in zip(settings, counts)]


def linear_inversion(records: Sequence[CountRecord]) -> np.ndarray:
    """Least-squares inverse of the measurement map.

    Returns a Hermitian, unit-trace matrix that may have negative
    eigenvalues (hence a plain array, not a :class:`TwoQubitState`).
    """
    a = measurement_matrix([r.setting for r in records])
    if np.linalg.matrix_rank(a, tol=1e-10) < 16:
        raise SingularMeasurementError("measurement map is rank deficient")
    f = np.array([r.frequency for r in records])
    coeffs, *_ = np.linalg.lstsq(a, f, rcond=None)
    paulis = [np.kron(x, y) for x in PAULI for y in PAULI]
    rho = sum(c * p for c, p in zip(coeffs, paulis)) / 4
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _arrays(records):
    proj = np.array([r.setting.projector for r in records])
    n = np.array([r.counts for r in records], dtype=float)
    big_n = np.array([r.integration for r in records], dtype=float)
    return proj, n, big_n


def log_likelihood(state, records: Sequence[CountRecord]) -> float:
    """Binomial log-likelihood of ``records``, measured from the saturated
    model (so it is <= 0 and equals minus the deviance / 2)."""
    proj, n, big_n = _arrays(records)
    rho = state.matrix if isinstance(state, TwoQubitState) else np.asarray(state)
    return -_kl_total(rho, proj, n, big_n)


_PMIN = 1e-300


def _xlogy_ratio(x, a, b):
    # x * log(a / b), with 0 * log(...) = 0
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = x[nz] * (np.log(a[nz]) - np.log(b[nz]))
    return out


def _kl_total(rho, proj, n, big_n):
    p = np.clip(np.einsum("kij,ji->k", proj, rho).real, _PMIN, 1.0 - 1e-16)
    f = n / big_n
    return float(np.sum(_xlogy_ratio(n, f, p) + _xlogy_ratio(big_n - n, 1.0 - f, 1.0 - p)))


@dataclass
class MLEInfo:
    converged: bool
    iterations: int
    history: List[float] = field(default_factory=list)


def _closest_physical(rho, floor=0.02):
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    vals = np.clip(vals, 0.0, None)
    vals = vals / vals.sum() if vals.sum() > 0 else np.full(4, 0.25)
    vals = (1 - floor) * vals + floor / 4
    return (vecs * vals) @ vecs.conj().T


def mle_reconstruct(records: Sequence[CountRecord], max_iter: int = 10 ** 4, tol: float = 1e-10,
                    full_output: bool = False):
    """Maximum-likelihood state with ``rho = G^H G / Tr[G^H G]``.

    Quasi-Newton (L-BFGS) ascent on the real and imaginary parts of ``G``
    with a line search, started from the linear-inversion estimate.  The
    objective is the total binomial log-likelihood measured from the
    saturated model, which is O(1) near the optimum, so ``tol`` is an
    absolute bound on the per-iteration gain.  Every accepted step increases
    the likelihood; iteration stops once the gain falls below ``tol`` or
    after ``max_iter`` iterations.  On non-convergence a
    :class:`ConvergenceWarning` is issued and the best iterate is returned.
    """
    if not records:
        raise ValueError("no count records")
    proj, n, big_n = _arrays(records)
    try:
        start = linear_inversion(records)
    except SingularMeasurementError:
        start = np.eye(4) / 4
    g0 = np.linalg.cholesky(_closest_physical(start)).conj().T

    def unpack(x):
        return (x[:16] + 1j * x[16:]).reshape(4, 4)

    def state_of(g):
        a = g.conj().T @ g
        return a / np.trace(a).real

    def objective(x):
        g = unpack(x)
        a = g.conj().T @ g
        t = np.trace(a).real
        rho = a / t
        p = np.clip(np.einsum("kij,ji->k", proj, rho).real, _PMIN, 1.0 - 1e-16)
        ll = -_kl_total(rho, proj, n, big_n)
        coef = n / p - (big_n - n) / (1.0 - p)
        r = np.einsum("k,kij->ij", coef, proj)
        k = (r - np.real(np.trace(r @ rho)) * np.eye(4)) / t
        grad = 2.0 * (g @ k)
        return -ll, -np.concatenate([grad.real.ravel(), grad.imag.ravel()])

    history = [-objective(np.concatenate([g0.real.ravel(), g0.imag.ravel()]))[0]]

    def record(intermediate_result):
        history.append(-float(intermediate_result.fun))

    x0 = np.concatenate([g0.real.ravel(), g0.imag.ravel()])
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", callback=record,
                   options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-300, "maxcor": 30})
    converged = bool(res.success) or res.nit < max_iter
    if not converged:
        warnings.warn(f"MLE did not converge in {max_iter} iterations", ConvergenceWarning)
    rho = state_of(unpack(res.x))
    state = TwoQubitState(0.5 * (rho + rho.conj().T))
    if full_output:
        return state, MLEInfo(converged, int(res.nit), history)
    return state


def trace_distance(a, b) -> float:
    ma = a.matrix if isinstance(a, TwoQubitState) else np.asarray(a)
    mb = b.matrix if isinstance(b, TwoQubitState) else np.asarray(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(ma - mb))))


@dataclass(frozen=True)
class BootstrapResult:
    estimate: float
    stderr: float
    bias: float

    @property
    def corrected(self) -> float:
        """Bias-corrected estimate ``estimate - bias`` (meaningful when the
        replicates were drawn from the fitted state)."""
        return self.estimate - self.bias

    @property
    def replicate_mean(self) -> float:
        return self.estimate + self.bias


def bootstrap(records: Sequence[CountRecord], statistic, replicates: int = 30,
              seed=None, state=None) -> BootstrapResult:
    """``statistic`` of the MLE state with a parametric bootstrap.

    Counts are resampled at the recorded integrations from the fitted state
    (or from ``state`` when given) and reconstructed again; the spread of
    the replicates gives the standard error and their mean offset from the
    estimate the bias.

    Near the boundary of the state space (concurrence close to zero) the
    spread around the fitted state underestimates the sampling error.  To
    test a model state, pass it as ``state``: the replicates then sample the
    estimator's distribution under that model, and ``replicate_mean`` is
    the expected estimate.
    """
    est = mle_reconstruct(records)
    source = est if state is None else state
    rng = np.random.default_rng(seed)
    settings = [r.setting for r in records]
    probs = np.clip([s.probability(source) for s in settings], 0.0, 1.0)
    big_n = np.array([r.integration for r in records])
    values = []
    for _ in range(replicates):
        counts = rng.binomial(big_n, probs)
        fake = [CountRecord(s, int(c), int(n)) for s, c, n in zip(settings, counts, big_n)]
        values.append(statistic(mle_reconstruct(fake)))
    center = float(statistic(est))
    return BootstrapResult(center, float(np.std(values, ddof=1)), float(np.mean(values)) - center)


_CSV_FIELDS = ("setting_id", "projector_angles", "counts", "integration")


def records_to_csv(records: Iterable[CountRecord], fh=None) -> Optional[str]:
    """Write records as CSV.  ``projector_angles`` holds the Jones angles
    ``theta_a;phi_a;theta_b;phi_b`` in radians."""
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for r in records:
        angles = ";".join(repr(float(x)) for x in (*r.setting.angles_a, *r.setting.angles_b))
        w.writerow([r.setting_id, angles, r.counts, r.integration])
    return fh.getvalue() if own else None


def records_from_csv(fh) -> List[CountRecord]:
    text = fh if isinstance(fh, str) else fh.read()
    rows = csv.DictReader(io.StringIO(text))
    if tuple(rows.fieldnames or ()) != _CSV_FIELDS:
        raise ValueError(f"expected columns {_CSV_FIELDS}, got {rows.fieldnames}")
    out = []
    for row in rows:
        ta, pa, tb, pb = (float(x) for x in row["projector_angles"].split(";"))
        setting = MeasurementSetting(row["setting_id"], (ta, pa), (tb, pb))
        out.append(CountRecord(setting, int(row["counts"]), int(row["integration"])))
    return out
