import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biphoton.entanglement import TwoQubitState, bell_state, build_state, concurrence
from biphoton.tomography import (
    CountRecord,
    MeasurementSetting,
    SingularMeasurementError,
    bootstrap,
    linear_inversion,
    log_likelihood,
    measurement_matrix,
    mle_reconstruct,
    records_from_csv,
    records_to_csv,
    simulate_counts,
    standard_settings,
    trace_distance,
)


def random_state(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    return TwoQubitState(rho / np.trace(rho).real)


def exact_records(state, n=10 ** 6):
    """Noiseless 'counts' (rounded expectations)."""
    return [CountRecord(s, int(round(n * s.probability(state))), n) for s in standard_settings()]


def test_standard_settings():
    ss = standard_settings()
    assert len(ss) == 16
    hh = ss[0]
    assert hh.label == "HH"
    np.testing.assert_allclose(hh.projector, np.diag([1, 0, 0, 0]), atol=1e-15)
    assert np.linalg.matrix_rank(measurement_matrix(ss)) == 16


@pytest.mark.parametrize("setting", standard_settings(), ids=lambda s: s.label)
def test_projectors_are_pure(setting):
    for v in (setting.jones_a, setting.jones_b):
        p = np.outer(v, v.conj())
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p, p.conj().T, atol=1e-12)
        assert np.trace(p).real == pytest.approx(1.0, abs=1e-12)


def test_count_record_validation():
    s = standard_settings()[0]
    with pytest.raises(ValueError):
        CountRecord(s, 5, 4)
    with pytest.raises(ValueError):
        CountRecord(s, -1, 4)
    with pytest.raises(ValueError):
        CountRecord(s, 0, 0)
    assert CountRecord(s, 1, 4).frequency == 0.25


def test_simulated_count_examples():
    bell = bell_state()
    recs = {r.setting_id: r for r in simulate_counts(bell, pairs_per_setting=10 ** 6, seed=1)}
    assert recs["HH"].counts == 0
    assert abs(recs["HV"].counts - 500000) <= 3 * 500
    mixed = simulate_counts(TwoQubitState.maximally_mixed(), pairs_per_setting=10 ** 6, seed=2)
    c = np.array([r.counts for r in mixed])
    assert abs(c.mean() - 250000) <= 3 * math.sqrt(10 ** 6 * 0.25 * 0.75 / 16)
    with pytest.raises(ValueError):
        simulate_counts(bell, pairs_per_setting=0)


def test_simulation_is_deterministic_per_seed():
    a = simulate_counts(random_state(0), seed=42)
    b = simulate_counts(random_state(0), seed=42)
    assert [r.counts for r in a] == [r.counts for r in b]


@pytest.mark.parametrize("state", [bell_state(), build_state(0.25), random_state(7)],
                         ids=["bell", "zeta025", "random"])
def test_linear_inversion_round_trip(state):
    records = [CountRecord(s, 0, 1) for s in standard_settings()]
    # exact probabilities through a large integration with fractional counts avoided:
    # feed the measurement map directly instead
    a = measurement_matrix([r.setting for r in records])
    probs = np.array([s.probability(state) for s in standard_settings()])
    assert np.allclose(a @ np.linalg.lstsq(a, probs, rcond=None)[0], probs)
    n = 10 ** 15
    exact = [CountRecord(s, int(round(p * n)), n) for s, p in zip(standard_settings(), probs)]
    rho = linear_inversion(exact)
    np.testing.assert_allclose(rho, state.matrix, atol=1e-10)


def test_linear_inversion_rejects_incomplete_sets():
    recs = simulate_counts(bell_state(), pairs_per_setting=1000, seed=0)[:12]
    with pytest.raises(SingularMeasurementError):
        linear_inversion(recs)


def test_linear_inversion_may_be_unphysical():
    recs = simulate_counts(bell_state(), pairs_per_setting=200, seed=3)
    rho = linear_inversion(recs)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho).min() < 0


def test_mle_examples():
    bell = mle_reconstruct(exact_records(bell_state()))
    assert concurrence(bell) == pytest.approx(1.0, abs=1e-6)
    noisy = mle_reconstruct(simulate_counts(build_state(0.25), pairs_per_setting=10 ** 6, seed=11))
    assert concurrence(noisy) == pytest.approx(0.5, abs=0.02)
    mixed = mle_reconstruct(exact_records(TwoQubitState.maximally_mixed()))
    assert concurrence(mixed) == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(ValueError):
        mle_reconstruct([])


def test_mle_likelihood_never_decreases():
    recs = simulate_counts(random_state(5), pairs_per_setting=10 ** 5, seed=5)
    state, info = mle_reconstruct(recs, full_output=True)
    assert info.converged
    assert np.all(np.diff(info.history) >= -1e-12)
    assert log_likelihood(state, recs) == pytest.approx(info.history[-1], abs=1e-9)
    assert log_likelihood(state, recs) >= log_likelihood(linear_inversion_physical(recs), recs)


def linear_inversion_physical(recs):
    rho = linear_inversion(recs)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0, None)
    return TwoQubitState((vecs * (vals / vals.sum())) @ vecs.conj().T)


def test_mle_stops_at_iteration_budget():
    recs = simulate_counts(random_state(6), pairs_per_setting=10 ** 5, seed=6)
    with pytest.warns(UserWarning):
        state, info = mle_reconstruct(recs, max_iter=2, full_output=True)
    assert not info.converged
    assert isinstance(state, TwoQubitState)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10, deadline=None)
def test_mle_output_is_physical(seed):
    recs = simulate_counts(random_state(seed), pairs_per_setting=500, seed=seed)
    m = mle_reconstruct(recs).matrix
    assert np.trace(m).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(m).min() >= -1e-12
    np.testing.assert_allclose(m, m.conj().T, atol=1e-14)


@pytest.mark.parametrize("seed", range(4))
def test_mle_round_trip_random_states(seed):
    state = random_state(100 + seed)
    recs = simulate_counts(state, pairs_per_setting=10 ** 7, seed=seed)
    assert trace_distance(mle_reconstruct(recs), state) <= 5e-3


def test_mle_insensitive_to_seed_noise():
    state = random_state(1)
    a = mle_reconstruct(simulate_counts(state, pairs_per_setting=10 ** 6, seed=1))
    b = mle_reconstruct(simulate_counts(state, pairs_per_setting=10 ** 6, seed=2))
    assert trace_distance(a, b) <= 1e-2
    assert trace_distance(a, state) <= 5e-3


def test_trace_distance():
    assert trace_distance(bell_state(), bell_state()) == pytest.approx(0.0, abs=1e-15)
    assert trace_distance(np.diag([1, 0, 0, 0]), np.diag([0, 1, 0, 0])) == pytest.approx(1.0)


def test_bootstrap_error_matches_binomial_spread():
    state = build_state(0.3)
    n = 2 * 10 ** 4
    recs = simulate_counts(state, pairs_per_setting=n, seed=9)
    # independent repetitions give the reference spread
    reps = [concurrence(mle_reconstruct(simulate_counts(state, pairs_per_setting=n, seed=s)))
            for s in range(100, 130)]
    spread = np.std(reps, ddof=1)
    assert abs(np.mean(reps) - 0.6) < 3 * spread / math.sqrt(len(reps))
    model = bootstrap(recs, concurrence, replicates=30, seed=1, state=state)
    assert 0.6 < model.stderr / spread < 1.6
    assert abs(model.estimate - 0.6) < 3 * spread
    assert abs(model.replicate_mean - np.mean(reps)) < 3 * spread / math.sqrt(15)
    fitted = bootstrap(recs, concurrence, replicates=10, seed=1)
    assert fitted.estimate == model.estimate
    assert 0 < fitted.stderr < 2 * spread
    assert fitted.corrected == pytest.approx(2 * fitted.estimate - fitted.replicate_mean)


def test_csv_round_trip():
    recs = simulate_counts(random_state(2), pairs_per_setting=1000, seed=4)
    text = records_to_csv(recs)
    assert text.splitlines()[0] == "setting_id,projector_angles,counts,integration"
    back = records_from_csv(text)
    assert [(r.setting_id, r.counts, r.integration) for r in back] == \
        [(r.setting_id, r.counts, r.integration) for r in recs]
    for a, b in zip(back, recs):
        np.testing.assert_array_equal(a.setting.projector, b.setting.projector)
    with pytest.raises(ValueError):
        records_from_csv("a,b\n1,2\n")


def test_custom_setting_probability():
    s = MeasurementSetting("x", (0.3, 0.1), (1.1, -0.4))
    rho = random_state(8).matrix
    assert s.probability(rho) == pytest.approx(np.real(np.trace(rho @ s.projector)), abs=1e-14)
