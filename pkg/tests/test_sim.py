import math

import numpy as np
import pytest

from pairtomo import TETRA, ensemble_state, sample_counts, seed_sequence
from pairtomo.cli import ExperimentConfig
from pairtomo.recon import DegenerateInputError
from pairtomo.sim import (GENERATOR_ID, STREAM_COUNTS, STREAM_OPTIMIZER,
                          STREAM_PRIOR, run_experiment, simulate_run,
                          stream_generator)


def _config(**over):
    base = {
        "povm": "tetra",
        "source": {"theta": [0.6, 1.0, 1.2, 4.0, 0.9]},
        "n_schedule": [50, 120, 400],
        "runs": 3,
        "estimators": ["li-xi"],
        "master_seed": 42,
    }
    base.update(over)
    return ExperimentConfig.from_dict(base)


def test_sample_counts_validation():
    with pytest.raises(ValueError):
        sample_counts(np.full((2, 2), 0.25), 10, 0)
    with pytest.raises(ValueError):
        sample_counts(np.array([0.5, 0.6]), 10, 0)
    with pytest.raises(ValueError):
        sample_counts(np.array([1.5, -0.5]), 10, 0)
    with pytest.raises(ValueError):
        sample_counts(np.array([0.5, 0.5]), -1, 0)
    zero = sample_counts(np.array([0.5, 0.5]), 0, 0)
    assert zero.dtype == np.int64 and (zero == 0).all()


def test_sample_counts_deterministic_and_complete():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    a = sample_counts(probs, 1000, 7)
    b = sample_counts(probs, 1000, 7)
    assert (a == b).all()
    assert a.sum() == 1000
    assert (sample_counts(probs, 1, 7).sum()) == 1


def test_sample_counts_first_two_moments():
    # 300 replicas: sample mean within 4 sigma of N q, ditto the variance
    probs = np.array([0.05, 0.1, 0.15, 0.2, 0.5])
    n, reps = 500, 300
    g = stream_generator(123, STREAM_COUNTS, 0)
    draws = np.array([sample_counts(probs, n, g) for _ in range(reps)])
    mean = draws.mean(axis=0)
    se_mean = np.sqrt(n * probs * (1 - probs) / reps)
    assert (np.abs(mean - n * probs) < 4 * se_mean).all()
    var = draws.var(axis=0, ddof=1)
    target = n * probs * (1 - probs)
    # variance of the sample variance, normal approximation
    se_var = target * math.sqrt(2 / (reps - 1))
    assert (np.abs(var - target) < 4 * se_var).all()


def test_stream_generators_are_independent():
    a = stream_generator(5, STREAM_COUNTS, 0).random(4)
    b = stream_generator(5, STREAM_COUNTS, 1).random(4)
    c = stream_generator(5, STREAM_OPTIMIZER, 0).random(4)
    d = stream_generator(5, STREAM_COUNTS, 0).random(4)
    assert (a == d).all()
    assert not (a == b).all() and not (a == c).all()
    ss = seed_sequence(5, STREAM_PRIOR, 2)
    assert ss.spawn_key == (STREAM_PRIOR, 2)


def test_run_records_are_ordered_and_cumulative():
    cfg = _config()
    records = run_experiment(cfg)
    keys = [(r.run_index, r.n_total) for r in records]
    assert keys == [(r, n) for r in range(3) for n in (50, 120, 400)]
    probs = TETRA.probabilities(ensemble_state(cfg.source))
    for run in range(3):
        g = stream_generator(42, STREAM_COUNTS, run)
        acc = np.zeros(10, dtype=np.int64)
        prev = 0
        for n in (50, 120, 400):
            acc = acc + sample_counts(probs, n - prev, g)
            prev = n
            rec = next(r for r in records
                       if (r.run_index, r.n_total) == (run, n))
            assert (rec.counts == acc).all()
            assert rec.counts.sum() == n
            assert rec.generator_id == GENERATOR_ID
            assert rec.master_seed == 42


def test_estimator_failure_carries_run_context():
    # at this seed the N=50 inversion lands outside the physical region
    # for the moments route; the error must say which checkpoint broke
    cfg = _config(estimators=["li-moments"])
    with pytest.raises(DegenerateInputError,
                       match=r"run 1, N=50, estimator li-moments"):
        run_experiment(cfg, workers=1)


def test_worker_count_does_not_change_results():
    # N=50 is below the moments route's noise floor at this seed
    cfg = _config(estimators=["li-xi", "li-moments"], n_schedule=[120, 400])
    serial = run_experiment(cfg, workers=1)
    parallel = run_experiment(cfg, workers=2)
    assert len(serial) == len(parallel)
    for a, b in zip(serial, parallel):
        assert (a.run_index, a.n_total) == (b.run_index, b.n_total)
        assert (a.counts == b.counts).all()
        for ea, eb in zip(a.estimates, b.estimates):
            assert ea.estimator == eb.estimator
            assert ea.err0_ppm == eb.err0_ppm
            assert ea.err1_ppm == eb.err1_ppm
            assert ea.p_err == eb.p_err


def test_ml_estimates_are_seeded_per_checkpoint():
    cfg = _config(runs=1, estimators=["ml"],
                  optimizer={"max_evaluations": 4000},
                  n_schedule=[60, 200])
    first = run_experiment(cfg)
    second = run_experiment(cfg)
    for a, b in zip(first, second):
        ea, eb = a.estimates[0], b.estimates[0]
        assert ea.objective == eb.objective
        assert ea.converged in (True, False)
        assert ea.fidelity0 == eb.fidelity0


def test_plausibility_attaches_to_requested_checkpoints():
    cfg = _config(runs=1, estimators=["ml"],
                  optimizer={"max_evaluations": 4000},
                  plausibility={"enabled": True, "m": 30_000,
                                "checkpoints": [120, 400]})
    records = run_experiment(cfg)
    by_n = {r.n_total: r.estimates[0] for r in records}
    assert by_n[50].lambda_pl is None
    for n in (120, 400):
        est = by_n[n]
        assert 0 < est.lambda_pl < 1
        assert 0 <= est.size_pl <= 1
        assert 0 < est.credibility_pl <= 1
        assert est.truth_plausible in (True, False)


def test_single_run_sweep_parallelism_is_invariant():
    cfg = _config(runs=1, estimators=["ml"],
                  optimizer={"max_evaluations": 4000},
                  n_schedule=[200],
                  plausibility={"enabled": True, "m": 60_000})
    a = run_experiment(cfg, workers=1)[0].estimates[0]
    b = run_experiment(cfg, workers=3)[0].estimates[0]
    assert (a.lambda_pl, a.size_pl, a.credibility_pl) == \
           (b.lambda_pl, b.size_pl, b.credibility_pl)


def test_simulate_run_matches_run_experiment():
    cfg = _config()
    records = run_experiment(cfg)
    solo = simulate_run(cfg, 1)
    expected = [r for r in records if r.run_index == 1]
    for a, b in zip(solo, expected):
        assert (a.counts == b.counts).all()
        assert a.estimates[0].err0_ppm == b.estimates[0].err0_ppm
