"""Event-level simulation of the post-selected biphoton source.

Pipeline: :func:`generate_pairs` draws pair emissions and per-pair analyzer
outcomes, :func:`inject_accidentals` adds uncorrelated background in each
arm, and :func:`thin_by_modulation` removes photons blocked by the
modulators.  :func:`coincidence_analysis` and :func:`estimate_chsh` then
treat the streams like detector timestamps, never looking at the origin
tags.

Conventions: ``tau = t1 - t2`` (arm 1 minus arm 2).  A pair with delay
``tau`` carries the polarization state

    t^2 phi_HV(tau) |HV> + r^2 exp(i dw tau) phi_VH(tau) |VH>

(normalized), and ``tau`` is drawn from the matching mixture of
``|phi_HV|^2`` and ``|phi_VH|^2``.

Randomness: every draw comes from ``SeedSequence(seed, spawn_key=substream +
(purpose, ...))`` so each purpose (emission, delay, outcomes, background per
arm, thinning per arm) has its own stream.  Emission and background are
generated in fixed-length time blocks, so sharding the blocks across
workers gives bit-identical output.

Binary event format (little-endian): an 16-byte header ``b"BPEV"``,
``version: u16``, ``record_size: u16``, ``count: u64``, followed by
``count`` records of ``arm: u1, time_ns: f8, outcome: u1, origin: u1``
(11 bytes).  Outcome 1 = pass, 0 = reject; origin 0 = pair,
1 = accidental.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .coherence import zeta_numeric
from .entanglement import (
    CANONICAL_ANGLES,
    ImperfectionModel,
    TwoQubitState,
    build_state,
    chsh_fixed,
)
from .tomography import CountRecord, MeasurementSetting, jones, standard_settings
from .wavepacket import (
    NO_MODULATION,
    BiphotonWavepacket,
    Modulation,
    ModulationSpec,
    envelope_period,
    eval_biphoton_amplitude,
    eval_envelope,
    mean_envelope,
    square_wave_intensity,
)

__all__ = [
    "Outcome",
    "Origin",
    "DetectionEvent",
    "EventStream",
    "RunConfig",
    "SettingCounts",
    "ChshEstimate",
    "InsufficientCountsError",
    "pair_outcome_probabilities",
    "generate_pairs",
    "inject_accidentals",
    "thin_by_modulation",
    "simulate_stream",
    "match_coincidences",
    "coincidence_analysis",
    "chsh_schedule",
    "tomography_schedule",
    "simulate_settings",
    "measure_settings",
    "estimate_chsh",
    "simulate_chsh",
    "simulate_tomography",
    "analytic_state",
    "analytic_chsh",
]

_MAGIC = b"BPEV"
_VERSION = 1
_HEADER = np.dtype([("magic", "S4"), ("version", "<u2"), ("record_size", "<u2"), ("count", "<u8")])
_RECORD = np.dtype([("arm", "u1"), ("time", "<f8"), ("outcome", "u1"), ("origin", "u1")])

# seed-sequence purposes
_EMIT, _DELAY, _OUTCOME, _BACKGROUND, _BACKGROUND_OUTCOME, _THIN = range(6)


class Outcome(enum.IntEnum):
    REJECT = 0
    PASS = 1


class Origin(enum.IntEnum):
    PAIR = 0
    ACCIDENTAL = 1


class InsufficientCountsError(ValueError):
    """Too few coincidences for a meaningful correlation estimate."""


@dataclass(frozen=True)
class DetectionEvent:
    arm: int
    time: float
    outcome: Outcome
    origin: Origin

    def __post_init__(self):
        if self.arm not in (1, 2):
            raise ValueError("arm must be 1 or 2")
        if not self.time >= 0:
            raise ValueError("event time must be non-negative")
        object.__setattr__(self, "outcome", Outcome(self.outcome))
        object.__setattr__(self, "origin", Origin(self.origin))


Analyzer = Union[float, Tuple[float, float]]


def _analyzer_angles(a: Analyzer) -> Tuple[float, float]:
    # a bare number is a linear polarizer angle
    if np.ndim(a) == 0:
        return float(a), 0.0
    theta, phi = a
    return float(theta), float(phi)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one simulated measurement run.

    ``accidental_rate`` is the background singles rate of each arm (1/ns),
    either one number for both arms or a pair.  ``analyzer_angles`` gives the
    analyzer of each arm, as a linear polarizer angle or Jones angles
    ``(theta, phi)``.  ``basis_error`` offsets both analyzer angles
    ``theta``.  ``substream`` (a tuple of ints) selects an independent family
    of random streams for the same ``seed``; the settings of one measurement
    each get their own.  ``block_duration`` (ns) is the generation shard length;
    by default it holds about 10^5 pairs.
    """

    pair_rate: float
    duration: float
    wavepacket: BiphotonWavepacket = field(default_factory=BiphotonWavepacket)
    modulation: ModulationSpec = NO_MODULATION
    analyzer_angles: Tuple[Analyzer, Analyzer] = (0.0, 0.0)
    accidental_rate: Union[float, Tuple[float, float]] = 0.0
    seed: int = 0
    split_ratio: float = 0.5
    basis_error: Tuple[float, float] = (0.0, 0.0)
    substream: Tuple[int, ...] = ()
    block_duration: Optional[float] = None

    def __post_init__(self):
        if self.pair_rate < 0:
            raise ValueError("pair_rate must be non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        rates = self.accidental_rates
        if min(rates) < 0:
            raise ValueError("accidental rates must be non-negative")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must lie in (0, 1)")
        if self.block_duration is not None and not self.block_duration > 0:
            raise ValueError("block_duration must be positive")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        a, b = self.analyzer_angles
        object.__setattr__(self, "analyzer_angles", (_analyzer_angles(a), _analyzer_angles(b)))
        object.__setattr__(self, "basis_error", tuple(float(x) for x in self.basis_error))
        object.__setattr__(self, "substream", tuple(int(x) for x in np.atleast_1d(self.substream)))

    @property
    def accidental_rates(self) -> Tuple[float, float]:
        r = self.accidental_rate
        if np.ndim(r) == 0:
            return float(r), float(r)
        return float(r[0]), float(r[1])

    @property
    def blocks(self) -> Tuple[float, int]:
        """Block length (ns) and number of blocks covering the duration."""
        total = self.pair_rate + sum(self.accidental_rates)
        length = self.block_duration
        if length is None:
            length = self.duration if total == 0 else min(self.duration, 1e5 / total)
        return length, int(math.ceil(self.duration / length))

    def analyzer_vectors(self) -> Tuple[np.ndarray, np.ndarray]:
        (ta, pa), (tb, pb) = self.analyzer_angles
        da, db = self.basis_error
        return jones(ta + da, pa), jones(tb + db, pb)

    def imperfections(self) -> ImperfectionModel:
        """Analytic counterpart of this run.

        The uncorrelated coincidence rate is the product of the background
        rates.  This neglects pair photons whose partner misses the window
        (relative size ``pair_rate / background``) and true partners taken
        first by a background event under greedy matching (relative size
        ``background * W``); keep both small when comparing the two.
        """
        r1, r2 = self.accidental_rates
        return ImperfectionModel(accidental_rate=r1 * r2, pair_rate=max(self.pair_rate, 1e-300),
                                 split_ratio=self.split_ratio, basis_error=self.basis_error)


def _rng(config: RunConfig, *key) -> np.random.Generator:
    ss = np.random.SeedSequence(int(config.seed), spawn_key=config.substream + tuple(key))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class EventStream:
    """Time-sorted detection events as parallel arrays.

    ``ident`` links the two photons of a pair (``pair_id``) or numbers the
    background events of one arm; like ``origin`` it is bookkeeping for the
    simulation and diagnostics.  Streams read from files have ``ident = -1``.
    """

    arm: np.ndarray
    time: np.ndarray
    outcome: np.ndarray
    origin: np.ndarray
    ident: Optional[np.ndarray] = None
    delta_omega: float = 0.0
    seed_key: Tuple[int, ...] = (0,)

    def __post_init__(self):
        arm = np.asarray(self.arm, dtype=np.uint8)
        time = np.asarray(self.time, dtype=float)
        outcome = np.asarray(self.outcome, dtype=np.uint8)
        origin = np.asarray(self.origin, dtype=np.uint8)
        ident = (np.full(arm.shape, -1, dtype=np.int64) if self.ident is None
                 else np.asarray(self.ident, dtype=np.int64))
        n = arm.shape
        if not all(x.shape == n and x.ndim == 1 for x in (time, outcome, origin, ident)):
            raise ValueError("event columns must be 1-d arrays of equal length")
        if n[0]:
            if not np.all((arm == 1) | (arm == 2)):
                raise ValueError("arm must be 1 or 2")
            if time.min() < 0:
                raise ValueError("event times must be non-negative")
            if np.any(np.diff(time) < 0):
                raise ValueError("events must be sorted by time")
            if outcome.max() > 1 or origin.max() > 1:
                raise ValueError("outcome and origin are 0/1 flags")
        for name, value in zip(_COLUMNS, (arm, time, outcome, origin, ident)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return int(self.arm.size)

    def events(self):
        for a, t, o, g in zip(self.arm, self.time, self.outcome, self.origin):
            yield DetectionEvent(int(a), float(t), Outcome(int(o)), Origin(int(g)))

    def select(self, mask) -> "EventStream":
        mask = np.asarray(mask, dtype=bool)
        return replace(self, arm=self.arm[mask], time=self.time[mask], outcome=self.outcome[mask],
                       origin=self.origin[mask], ident=self.ident[mask])

    @classmethod
    def merge(cls, parts: Sequence["EventStream"], **meta) -> "EventStream":
        """Merge streams into one, ordered by time; ties keep input order."""
        cols = [np.concatenate([getattr(p, c) for p in parts]) if parts else np.empty(0)
                for c in _COLUMNS]
        order = np.argsort(cols[1], kind="stable")
        if parts and not meta:
            meta = dict(delta_omega=parts[0].delta_omega, seed_key=parts[0].seed_key)
        return cls(*(c[order] for c in cols), **meta)

    def with_ids(self) -> bool:
        return bool(self.ident.size == 0 or self.ident.min() >= 0)

    # -- serialization ---------------------------------------------------
    def to_csv(self, fh=None) -> Optional[str]:
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("arm", "time_ns", "outcome", "origin"))
        for a, t, o, g in zip(self.arm, self.time, self.outcome, self.origin):
            w.writerow((int(a), repr(float(t)), Outcome(int(o)).name.lower(), Origin(int(g)).name.lower()))
        return fh.getvalue() if own else None

    @classmethod
    def from_csv(cls, fh) -> "EventStream":
        text = fh if isinstance(fh, str) else fh.read()
        rows = csv.DictReader(io.StringIO(text))
        if tuple(rows.fieldnames or ()) != ("arm", "time_ns", "outcome", "origin"):
            raise ValueError(f"unexpected CSV columns {rows.fieldnames}")
        arm, time, outcome, origin = [], [], [], []
        for row in rows:
            arm.append(int(row["arm"]))
            time.append(float(row["time_ns"]))
            outcome.append(Outcome[row["outcome"].upper()])
            origin.append(Origin[row["origin"].upper()])
        return cls(np.array(arm, dtype=np.uint8), np.array(time), np.array(outcome, dtype=np.uint8),
                   np.array(origin, dtype=np.uint8))

    def to_bytes(self) -> bytes:
        header = np.array([(_MAGIC, _VERSION, _RECORD.itemsize, len(self))], dtype=_HEADER)
        rec = np.empty(len(self), dtype=_RECORD)
        rec["arm"], rec["time"], rec["outcome"], rec["origin"] = self.arm, self.time, self.outcome, self.origin
        return header.tobytes() + rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "EventStream":
        if len(data) < _HEADER.itemsize:
            raise ValueError("truncated event file header")
        head = np.frombuffer(data, dtype=_HEADER, count=1)[0]
        if head["magic"] != _MAGIC:
            raise ValueError("not a biphoton event file")
        if head["version"] != _VERSION or head["record_size"] != _RECORD.itemsize:
            raise ValueError(f"unsupported event format version {head['version']}")
        count = int(head["count"])
        body = data[_HEADER.itemsize:]
        if len(body) != count * _RECORD.itemsize:
            raise ValueError("event file length does not match its record count")
        rec = np.frombuffer(body, dtype=_RECORD, count=count)
        return cls(rec["arm"].copy(), rec["time"].copy(), rec["outcome"].copy(), rec["origin"].copy())

    def write_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def read_binary(cls, path) -> "EventStream":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# ---------------------------------------------------------------------------
# generation


def pair_outcome_probabilities(config: RunConfig, tau) -> np.ndarray:
    """Joint outcome probabilities ``[pp, pr, rp, rr]`` (p = pass, r = reject)
    of a pair with delay ``tau``, by the Born rule at the configured analyzers.
    Shape ``(len(tau), 4)``."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    wp = config.wavepacket
    t2 = config.split_ratio
    a_hv = t2 * eval_biphoton_amplitude(wp, "HV", tau)
    a_vh = (1.0 - t2) * np.exp(1j * wp.delta_omega * tau) * eval_biphoton_amplitude(wp, "VH", tau)
    norm = np.sqrt(np.abs(a_hv) ** 2 + np.abs(a_vh) ** 2)
    a_hv, a_vh = a_hv / norm, a_vh / norm
    va, vb = config.analyzer_vectors()
    out = np.empty((tau.size, 4))
    k = 0
    for x in (va, _orthogonal(va)):
        for y in (vb, _orthogonal(vb)):
            amp = np.conj(x[0]) * np.conj(y[1]) * a_hv + np.conj(x[1]) * np.conj(y[0]) * a_vh
            out[:, k] = np.abs(amp) ** 2
            k += 1
    return out


def _orthogonal(v):
    return np.array([-np.conj(v[1]), np.conj(v[0])])


def _sample_delays(config: RunConfig, u_branch, u_side, u_exp):
    wp = config.wavepacket
    t4, r4 = config.split_ratio ** 2, (1.0 - config.split_ratio) ** 2
    vh = u_branch < r4 / (t4 + r4)
    right = u_side < wp.tau_right / (wp.tau_left + wp.tau_right)
    e = -np.log1p(-u_exp)  # inverse CDF of Exp(1)
    tau = np.where(right, wp.tau_right * e, -wp.tau_left * e)
    return np.where(vh, -tau, tau)


def _pair_block(config: RunConfig, block: int, start: float, length: float):
    rng = _rng(config, _EMIT, block)
    n = rng.poisson(config.pair_rate * length)
    emit = start + np.sort(rng.random(n)) * length
    u = _rng(config, _DELAY, block).random((3, n))
    tau = _sample_delays(config, *u)
    probs = pair_outcome_probabilities(config, tau)
    draw = _rng(config, _OUTCOME, block).random(n)
    k = np.minimum((draw[:, None] > np.cumsum(probs, axis=1)).sum(axis=1), 3)
    o1 = (k < 2).astype(np.uint8)      # pp, pr -> arm 1 passes
    o2 = (k % 2 == 0).astype(np.uint8)  # pp, rp -> arm 2 passes
    t1 = emit + np.maximum(tau, 0.0)
    t2 = emit + np.maximum(-tau, 0.0)
    return t1, t2, o1, o2


def _run_blocks(config: RunConfig, fn, workers: int):
    length, nblocks = config.blocks
    jobs = [(b, b * length, min(length, config.duration - b * length)) for b in range(nblocks)]
    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda j: fn(config, *j), jobs))
    return [fn(config, *j) for j in jobs]


def generate_pairs(config: RunConfig, workers: int = 1) -> EventStream:
    """Photon pairs emitted at ``pair_rate`` (Poisson) over ``duration``.

    The earlier photon of each pair is detected at the emission time, the
    later one ``|tau|`` after it.  Output does not depend on ``workers``.
    """
    parts = _run_blocks(config, _pair_block, workers)
    t1, t2, o1, o2 = (np.concatenate([p[i] for p in parts]) for i in range(4))
    n = t1.size
    ids = np.arange(n, dtype=np.int64)
    return _assemble(config, [
        (np.ones(n, np.uint8), t1, o1, np.zeros(n, np.uint8), ids),
        (np.full(n, 2, np.uint8), t2, o2, np.zeros(n, np.uint8), ids),
    ])


_COLUMNS = ("arm", "time", "outcome", "origin", "ident")


def _assemble(config, columns, base: Optional[EventStream] = None) -> EventStream:
    parts = list(columns)
    if base is not None:
        parts.insert(0, tuple(getattr(base, c) for c in _COLUMNS))
    # stable sort of a fixed concatenation order: ties resolve the same way every run
    order = np.argsort(np.concatenate([p[1] for p in parts]), kind="stable")
    cols = [np.concatenate([p[i] for p in parts])[order] for i in range(5)]
    return EventStream(*cols, delta_omega=config.wavepacket.delta_omega,
                       seed_key=(int(config.seed),) + config.substream)


def _background_block(config: RunConfig, block: int, start: float, length: float):
    out = []
    for arm, rate in zip((1, 2), config.accidental_rates):
        rng = _rng(config, _BACKGROUND, arm, block)
        n = rng.poisson(rate * length)
        t = start + np.sort(rng.random(n)) * length
        o = (_rng(config, _BACKGROUND_OUTCOME, arm, block).random(n) < 0.5).astype(np.uint8)
        out.append((t, o))
    return out


def inject_accidentals(stream: EventStream, config: RunConfig, workers: int = 1) -> EventStream:
    """Add Poisson background to each arm at ``config.accidental_rates``,
    with pass/reject equally likely at any analyzer."""
    if max(config.accidental_rates) == 0:
        return stream
    parts = _run_blocks(config, _background_block, workers)
    cols = []
    for k, arm in enumerate((1, 2)):
        t = np.concatenate([p[k][0] for p in parts])
        o = np.concatenate([p[k][1] for p in parts])
        n = t.size
        cols.append((np.full(n, arm, np.uint8), t, o, np.ones(n, np.uint8), np.arange(n, dtype=np.int64)))
    return _assemble(config, cols, base=stream)


def _uniform_by_id(stream: EventStream, purpose_key, mask):
    """One uniform per event, indexed by the event's id so that a decision
    does not shift when unrelated events are added or removed."""
    ids = stream.ident[mask]
    if ids.size == 0:
        return np.empty(0)
    seed, sub = stream.seed_key[0], stream.seed_key[1:]
    ss = np.random.SeedSequence(seed, spawn_key=sub + (_THIN,) + tuple(purpose_key))
    return np.random.default_rng(ss).random(int(ids.max()) + 1)[ids]


def thin_by_modulation(stream: EventStream, modulation: ModulationSpec) -> EventStream:
    """Remove events blocked by the modulators.

    Synchronous (per-photon square-wave gates): every event survives with
    the gate transmission ``|S(t)|^2`` of its arm at its absolute time; the
    arm-2 gate is delayed by ``modulation.offset``.  Conditional envelopes:
    a pair's arm-1 photon survives with ``M(tau)`` at the pair delay, and an
    arm-1 background event with ``M`` at its delay from the nearest arm-2
    detection.  Matched modulation at
    zero detuning has no period and leaves the stream unchanged.
    """
    dw = stream.delta_omega
    if modulation.kind is Modulation.NONE or math.isinf(envelope_period(modulation, dw)):
        return stream
    if not stream.with_ids():
        raise ValueError("thinning needs the event ids of a simulated stream")
    keep = np.ones(len(stream), dtype=bool)
    if not modulation.conditional:
        for arm, shift in ((1, 0.0), (2, modulation.offset)):
            for origin in (Origin.PAIR, Origin.ACCIDENTAL):
                m = (stream.arm == arm) & (stream.origin == origin)
                u = _uniform_by_id(stream, (arm, int(origin)), m)
                p = square_wave_intensity(modulation, dw, stream.time[m] - shift)
                keep[m] = u < p
        return stream.select(keep)

    pair1 = np.flatnonzero((stream.arm == 1) & (stream.origin == Origin.PAIR))
    pair2 = np.flatnonzero((stream.arm == 2) & (stream.origin == Origin.PAIR))
    partner = np.full(int(stream.ident.max()) + 1 if len(stream) else 0, -1, dtype=np.int64)
    partner[stream.ident[pair2]] = pair2
    j = partner[stream.ident[pair1]]
    has = j >= 0
    tau = stream.time[pair1[has]] - stream.time[j[has]]
    m1 = np.zeros(len(stream), dtype=bool)
    m1[pair1[has]] = True
    # pair1 is in stream order, so u, tau and pair1[has] line up
    u = _uniform_by_id(stream, (1, int(Origin.PAIR), 1), m1)
    keep[pair1[has]] = u < eval_envelope(modulation, dw, tau)
    # the modulator is timed against arm 2: background sees M at its delay
    # from the nearest arm-2 detection
    bg = (stream.arm == 1) & (stream.origin == Origin.ACCIDENTAL)
    u = _uniform_by_id(stream, (1, int(Origin.ACCIDENTAL), 1), bg)
    t2 = stream.time[stream.arm == 2]
    tb = stream.time[bg]
    if t2.size:
        k = np.clip(np.searchsorted(t2, tb), 1, t2.size) - 1
        k2 = np.minimum(k + 1, t2.size - 1)
        near = np.where(np.abs(tb - t2[k]) <= np.abs(tb - t2[k2]), t2[k], t2[k2])
        p = eval_envelope(modulation, dw, tb - near)
    else:
        p = np.full(tb.size, mean_envelope(modulation))
    keep[bg] = u < p
    return stream.select(keep)


def simulate_stream(config: RunConfig, workers: int = 1) -> EventStream:
    """Pairs, then background, then modulation."""
    stream = generate_pairs(config, workers)
    stream = inject_accidentals(stream, config, workers)
    return thin_by_modulation(stream, config.modulation)


# ---------------------------------------------------------------------------
# analysis


def match_coincidences(stream: EventStream, window: float) -> Tuple[np.ndarray, np.ndarray]:
    """Indices ``(i1, i2)`` of matched arm-1/arm-2 events with ``|t1 - t2| <= W``.

    Arm-1 events are taken in time order and each claims the nearest unused
    arm-2 event inside the window (earlier one on a tie).  Events more than
    ``W`` from all others cannot interact, so the stream is cut into such
    clusters; the common one-photon-per-arm cluster is handled in bulk.
    """
    if not window > 0:
        raise ValueError("window must be positive")
    n = len(stream)
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    t, arm = stream.time, stream.arm
    starts = np.flatnonzero(np.concatenate([[True], np.diff(t) > window]))
    size = np.diff(np.append(starts, n))
    s2 = starts[size == 2]
    s2 = s2[arm[s2] != arm[s2 + 1]]
    first = arm[s2] == 1
    i1 = [np.where(first, s2, s2 + 1)]
    i2 = [np.where(first, s2 + 1, s2)]
    for s, k in zip(starts[size > 2], size[size > 2]):
        a, b = _match_cluster(t[s:s + k], arm[s:s + k], window)
        i1.append(a + s)
        i2.append(b + s)
    i1, i2 = np.concatenate(i1), np.concatenate(i2)
    order = np.argsort(i1, kind="stable")
    return i1[order].astype(np.int64), i2[order].astype(np.int64)


def _match_cluster(t, arm, window):
    pos1 = np.flatnonzero(arm == 1)
    pos2 = np.flatnonzero(arm == 2)
    t2 = t[pos2]
    used = np.zeros(pos2.size, dtype=bool)
    out1, out2 = [], []
    for p in pos1:
        lo = np.searchsorted(t2, t[p] - window, "left")
        hi = np.searchsorted(t2, t[p] + window, "right")
        best, dist = -1, math.inf
        for j in range(lo, hi):
            d = abs(t2[j] - t[p])
            if not used[j] and d < dist:
                best, dist = j, d
        if best >= 0:
            used[best] = True
            out1.append(p)
            out2.append(pos2[best])
    return np.array(out1, dtype=np.int64), np.array(out2, dtype=np.int64)


@dataclass(frozen=True)
class SettingCounts:
    """Coincidences at one analyzer setting, split by the joint outcome."""

    analyzers: Tuple[Tuple[float, float], Tuple[float, float]]
    pp: int
    pr: int
    rp: int
    rr: int

    @property
    def total(self) -> int:
        return self.pp + self.pr + self.rp + self.rr

    @property
    def correlation(self) -> float:
        """``E = (pp + rr - pr - rp) / N``."""
        if self.total == 0:
            raise InsufficientCountsError("no coincidences")
        return (self.pp + self.rr - self.pr - self.rp) / self.total

    @property
    def pass_fraction(self) -> float:
        if self.total == 0:
            raise InsufficientCountsError("no coincidences")
        return self.pp / self.total


def coincidence_analysis(streams, window: float, schedule) -> List[SettingCounts]:
    """Coincidence counts per analyzer setting.

    ``streams[k]`` holds the detections recorded with analyzers
    ``schedule[k]`` (a pair of per-arm analyzers, as in :class:`RunConfig`).
    A single stream with a one-entry schedule is accepted as well.
    """
    if isinstance(streams, EventStream):
        streams = [streams]
    schedule = list(schedule)
    if len(streams) != len(schedule):
        raise ValueError("need one stream per scheduled setting")
    out = []
    for stream, (a, b) in zip(streams, schedule):
        i1, i2 = match_coincidences(stream, window)
        o1, o2 = stream.outcome[i1].astype(bool), stream.outcome[i2].astype(bool)
        out.append(SettingCounts(
            (_analyzer_angles(a), _analyzer_angles(b)),
            int(np.sum(o1 & o2)), int(np.sum(o1 & ~o2)), int(np.sum(~o1 & o2)), int(np.sum(~o1 & ~o2))))
    return out


def chsh_schedule(angles: Sequence[float] = CANONICAL_ANGLES):
    """The four linear-polarizer settings (a,b), (a,b'), (a',b), (a',b')."""
    a, a2, b, b2 = angles
    return [((x, 0.0), (y, 0.0)) for x, y in ((a, b), (a, b2), (a2, b), (a2, b2))]


def tomography_schedule():
    """The 16 {H, V, D, R}^2 settings as Jones angles."""
    return [(s.angles_a, s.angles_b) for s in standard_settings()]


def simulate_settings(config: RunConfig, schedule, workers: int = 1) -> List[EventStream]:
    """One simulated run per analyzer setting, each with its own random
    substreams (``config.substream + (k,)`` for setting ``k``)."""
    return [simulate_stream(replace(config, analyzer_angles=setting,
                                    substream=config.substream + (k,)), workers)
            for k, setting in enumerate(schedule)]


def measure_settings(config: RunConfig, schedule, window: float, workers: int = 1) -> List[SettingCounts]:
    """Simulate every setting of ``schedule`` and count coincidences."""
    schedule = list(schedule)
    return coincidence_analysis(simulate_settings(config, schedule, workers), window, schedule)


@dataclass(frozen=True)
class ChshEstimate:
    value: float
    stderr: float
    correlations: Tuple[float, float, float, float]
    counts: Tuple[SettingCounts, ...]


def estimate_chsh(data, window: Optional[float] = None, min_counts: int = 100) -> ChshEstimate:
    """``S = E(a,b) + E(a,b') + E(a',b) - E(a',b')`` with its standard error.

    ``data`` is four :class:`SettingCounts` in :func:`chsh_schedule` order,
    or four event streams recorded at those settings (then ``window`` is
    required).  Each ``E`` is an average of +-1 outcomes, so its variance is
    ``(1 - E^2) / N``.
    """
    data = list(data)
    if len(data) != 4:
        raise ValueError("CHSH needs exactly four settings")
    if isinstance(data[0], EventStream):
        if window is None:
            raise ValueError("window is required when passing event streams")
        data = coincidence_analysis(data, window, [((0.0, 0.0), (0.0, 0.0))] * 4)
    for c in data:
        if c.total < min_counts:
            raise InsufficientCountsError(f"only {c.total} coincidences at a setting (< {min_counts})")
    e = [c.correlation for c in data]
    value = e[0] + e[1] + e[2] - e[3]
    var = sum((1.0 - x * x) / c.total for x, c in zip(e, data))
    return ChshEstimate(value, math.sqrt(var), tuple(e), tuple(data))


def simulate_chsh(config: RunConfig, window: float, angles: Sequence[float] = CANONICAL_ANGLES,
                  workers: int = 1) -> ChshEstimate:
    return estimate_chsh(measure_settings(config, chsh_schedule(angles), window, workers))


def simulate_tomography(config: RunConfig, window: float, workers: int = 1) -> List[CountRecord]:
    """Tomography records: projector hits (both pass) out of all coincidences."""
    counts = measure_settings(config, tomography_schedule(), window, workers)
    out = []
    for s, c in zip(standard_settings(), counts):
        if c.total == 0:
            raise InsufficientCountsError(f"no coincidences at setting {s.label}")
        out.append(CountRecord(MeasurementSetting(s.label, s.angles_a, s.angles_b), c.pp, c.total))
    return out


def analytic_state(config: RunConfig, window: float) -> TwoQubitState:
    """State the analytic modules predict for coincidences of this run."""
    wp, mod = config.wavepacket, config.modulation
    if math.isinf(envelope_period(mod, wp.delta_omega)):
        mod = NO_MODULATION
    imp = config.imperfections()
    zeta = zeta_numeric(wp, mod, window)
    return build_state(zeta, imp, epsilon=imp.epsilon(window, wp, mod))


def analytic_chsh(config: RunConfig, window: float, angles: Sequence[float] = CANONICAL_ANGLES) -> float:
    """Signed ``S`` the analytic modules predict for :func:`simulate_chsh`."""
    return chsh_fixed(analytic_state(config, window), angles, config.basis_error)
