import json

import numpy as np
import pytest

from invbo import acquisition as acq
from invbo.errors import DataError, InvalidArgumentError
from invbo.loop import (
    Learner,
    LoopAborted,
    LoopConfig,
    NoPendingProposalError,
    PendingProposalError,
    Strategy,
    Trace,
    benchmark,
    derive_seed,
    iterations_to_threshold,
    log_regret,
    regret_curve,
    run,
    simple_regret,
    synthetic_trial,
)
from invbo.mogp import FitOptions, Posterior, predict_batch

FAST = FitOptions(n_starts=2, maxiter=100)


def _setup(kind="triangle", seed=3, pool_size=15, noise_var=1e-4):
    return synthetic_trial(kind, seed, pool_size=pool_size, init_size=2, noise_var=noise_var)


def _config(setup, strategy, budget=5, **kw):
    kw.setdefault("fit_options", FAST)
    return LoopConfig(strategy=strategy, budget=budget, pool=setup.pool,
                      initial_indices=setup.initial_indices, seed=setup.seed, **kw)


# -- configuration ------------------------------------------------------------

@pytest.mark.parametrize("kw", [
    {"initial_indices": ()},
    {"initial_indices": (0, 0)},
    {"initial_indices": (0, 99)},
    {"budget": 0},
    {"refit_every": 0},
    {"ei_method": "gauss"},
])
def test_config_validation(kw):
    base = dict(strategy="ei", budget=3, pool=np.linspace(0, 1, 5), initial_indices=(0,))
    base.update(kw)
    with pytest.raises(InvalidArgumentError):
        LoopConfig(**base)


def test_config_dict_round_trip():
    s = _setup()
    c = _config(s, Strategy.PI, refit_every=2, include_noise=False, normalize_inputs=True)
    c2 = LoopConfig.from_dict(json.loads(json.dumps(c.to_dict())))
    assert c2.to_dict() == c.to_dict()
    np.testing.assert_array_equal(c2.pool, c.pool)


def test_synthetic_trial_target_outside_initial_design():
    for seed in range(10):
        s = synthetic_trial("sphere", seed)
        assert s.target_index not in s.initial_indices
        assert len(s.initial_indices) == 2 and s.pool.shape == (100, 1)
        np.testing.assert_array_equal(s.target.values, s.oracle.evaluate(s.pool[s.target_index, 0]))


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, k) for k in range(100)}) == 100


# -- runs ---------------------------------------------------------------------

@pytest.mark.parametrize("strategy", list(Strategy))
def test_run_invariants(strategy):
    s = _setup()
    trace = run(_config(s, strategy), s.oracle, s.target)
    assert len(trace.records) == 5
    queried = trace.queried_indices()
    assert len(set(queried)) == len(queried)
    inc = [trace.initial_incumbent] + [r.incumbent_value for r in trace.records]
    assert np.all(np.diff(inc) <= 0)
    for r in trace.records:
        assert r.incumbent_index in queried[: len(s.initial_indices) + r.iteration]
        assert r.lml_after >= r.lml_before - 1e-12
        assert (r.acquisition is None) == (strategy is Strategy.RANDOM)
    np.testing.assert_array_equal(simple_regret(trace), inc[1:])


def test_random_exhaustive_search_finds_pool_minimum():
    s = _setup(pool_size=8, noise_var=0.0)
    trace = run(_config(s, Strategy.RANDOM, budget=20), s.oracle, s.target)
    assert trace.exhausted and len(trace.records) == 6
    L = [acq.squared_error(s.oracle.evaluate(x), s.target) for x in s.pool[:, 0]]
    assert simple_regret(trace)[-1] == min(L) == 0.0


def test_exact_target_gives_zero_regret_thereafter():
    s = _setup(noise_var=0.0)
    trace = run(_config(s, Strategy.EI, budget=8), s.oracle, s.target)
    hit = [r.iteration for r in trace.records if r.index == s.target_index]
    assert hit, "EI never queried the target point"
    assert all(r.incumbent_value == 0.0 for r in trace.records if r.iteration >= hit[0])


def test_mean_mse_picks_closest_predicted_mean():
    s = _setup()
    learner = Learner(_config(s, Strategy.MEAN_MSE), s.target,
                      [s.oracle.evaluate(s.pool[i, 0]) for i in s.initial_indices])
    cand = learner.candidates()
    mean, _ = predict_batch(learner.model, s.pool[cand], include_noise=True)
    expected = cand[np.argmin(((mean - s.target.values) ** 2).sum(axis=1))]
    assert learner.propose().index == expected


def test_ei_choice_is_argmax():
    s = _setup(kind="sphere")
    learner = Learner(_config(s, Strategy.EI), s.target,
                      [s.oracle.evaluate(s.pool[i, 0]) for i in s.initial_indices])
    cand = learner.candidates()
    mean, cov = predict_batch(learner.model, s.pool[cand])
    scores = [acq.ei_score(Posterior(m, c), s.target, learner.incumbent_value)
              for m, c in zip(mean, cov)]
    p = learner.propose()
    assert p.acquisition == max(scores)
    assert p.index == cand[int(np.argmax(scores))]


def test_runs_are_bitwise_deterministic():
    s = _setup(kind="sphere")
    for strategy in (Strategy.EI, Strategy.RANDOM):
        a = run(_config(s, strategy), s.oracle, s.target)
        b = run(_config(s, strategy), s.oracle, s.target)
        assert a.to_jsonl() == b.to_jsonl()


def test_refit_schedule():
    s = _setup()
    trace = run(_config(s, Strategy.PI, refit_every=2), s.oracle, s.target)
    assert [r.refit for r in trace.records] == [False, True, False, True, False]
    for r in trace.records:
        if not r.refit:
            assert r.lml_before == r.lml_after


def test_normalized_inputs_run():
    s = _setup()
    trace = run(_config(s, Strategy.EI, normalize_inputs=True), s.oracle, s.target)
    assert len(trace.records) == 5


def test_oracle_failure_aborts_with_partial_trace():
    s = _setup()
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] > 4:  # 2 initial + 2 iterations
            raise RuntimeError("instrument offline")
        return s.oracle.evaluate(x[0])

    with pytest.raises(LoopAborted) as info:
        run(_config(s, Strategy.RANDOM), flaky, s.target)
    assert len(info.value.trace.records) == 2
    assert isinstance(info.value.cause, RuntimeError)


def test_callable_oracle_with_given_initial_observations():
    s = _setup(noise_var=0.0)
    Y0 = [s.oracle.evaluate(s.pool[i, 0]) for i in s.initial_indices]
    a = run(_config(s, Strategy.MEAN_MSE), lambda x: s.oracle.evaluate(x[0]), s.target, Y0)
    b = run(_config(s, Strategy.MEAN_MSE), s.oracle, s.target)
    assert a.to_jsonl() == b.to_jsonl()


# -- learner state machine ----------------------------------------------------

def _learner(strategy=Strategy.EI):
    s = _setup()
    Y0 = [s.oracle.evaluate(s.pool[i, 0]) for i in s.initial_indices]
    return s, Learner(_config(s, strategy), s.target, Y0)


def test_propose_twice_fails_and_tell_requires_proposal():
    s, learner = _learner()
    with pytest.raises(NoPendingProposalError):
        learner.tell(np.zeros(12))
    learner.propose()
    with pytest.raises(PendingProposalError):
        learner.propose()


def test_bad_tell_leaves_state_unchanged():
    s, learner = _learner()
    learner.propose()
    before = json.dumps(learner.state_dict(), sort_keys=True)
    for bad in (np.zeros(11), np.full(12, np.nan)):
        with pytest.raises(InvalidArgumentError):
            learner.tell(bad)
    assert json.dumps(learner.state_dict(), sort_keys=True) == before


def test_state_dict_round_trip_continues_identically():
    s, a = _learner(Strategy.PI)
    for _ in range(2):
        p = a.propose()
        a.tell(s.oracle.evaluate(p.x[0]))
    a.propose()
    b = Learner.from_state_dict(json.loads(json.dumps(a.state_dict())))
    assert json.dumps(b.state_dict(), sort_keys=True) == json.dumps(a.state_dict(), sort_keys=True)
    for learner in (a, b):
        learner.tell(s.oracle.evaluate(learner.pending.x[0]))
    assert a.propose() == b.propose()


def test_ask_tell_replay_equals_autonomous_run():
    s = _setup(kind="sphere")
    cfg = _config(s, Strategy.EI)
    trace = run(cfg, s.oracle, s.target)
    from invbo.loop import noise_rng
    from invbo.oracles import observe
    Y0 = [observe(s.oracle, s.pool[i, 0], noise_rng(cfg.seed, 0)) for i in s.initial_indices]
    learner = Learner(cfg, s.target, Y0)
    for rec in trace.records:
        state = json.loads(json.dumps(learner.state_dict()))
        learner = Learner.from_state_dict(state)
        assert learner.propose().index == rec.index
        learner = Learner.from_state_dict(json.loads(json.dumps(learner.state_dict())))
        learner.tell(rec.y)
    assert learner.trace.to_jsonl() == trace.to_jsonl()


def test_state_dict_rejects_inconsistent_iteration():
    s, learner = _learner()
    d = learner.state_dict()
    d["iteration"] = 3
    with pytest.raises(DataError):
        Learner.from_state_dict(d)


# -- traces and summaries -------------------------------------------------------

def test_trace_jsonl_round_trip():
    s = _setup()
    trace = run(_config(s, Strategy.EI), s.oracle, s.target)
    text = trace.to_jsonl()
    assert len(text.splitlines()) == 5 + 2
    assert Trace.from_jsonl(text).to_jsonl() == text
    assert "wall_time" not in text
    assert "wall_time" in trace.to_jsonl(include_timing=True)


@pytest.mark.parametrize("mutate,line", [
    (lambda lines: lines[:-1], 6),
    (lambda lines: lines[1:], 1),
    (lambda lines: [lines[0], "{not json"] + lines[1:], 2),
    (lambda lines: [], 0),
])
def test_trace_parse_errors_name_lines(mutate, line):
    s = _setup()
    lines = run(_config(s, Strategy.RANDOM), s.oracle, s.target).to_jsonl().splitlines()
    with pytest.raises(DataError) as info:
        Trace.from_jsonl("\n".join(mutate(lines)))
    assert info.value.line == line


def test_simple_regret_single_iteration():
    s = _setup()
    trace = run(_config(s, Strategy.RANDOM, budget=1), s.oracle, s.target)
    r = simple_regret(trace)
    assert r.shape == (1,)
    assert r[0] == min(trace.initial_incumbent, trace.records[0].objective)


def test_regret_curve_holds_after_exhaustion():
    s = _setup(pool_size=5)
    trace = run(_config(s, Strategy.RANDOM, budget=6), s.oracle, s.target)
    c = regret_curve(trace, 6)
    assert c.shape == (7,) and np.all(c[3:] == c[3])


def test_benchmark_single_trial_has_zero_std():
    res = benchmark(["random"], lambda seed: _setup(seed=seed), 1, 4, base_seed=1,
                    config_overrides={"fit_options": FAST})
    s = Strategy.RANDOM
    np.testing.assert_array_equal(res.std[s], 0.0)
    np.testing.assert_array_equal(res.mean[s], log_regret(regret_curve(res.traces[s][0], 4)))
    rows = list(res.rows())
    assert len(rows) == 5 and rows[0][:2] == ("random", 0)


def test_benchmark_is_deterministic_and_paired():
    args = (["random", "mean-mse"], lambda seed: _setup(seed=seed), 2, 3)
    kw = dict(base_seed=4, config_overrides={"fit_options": FAST})
    a = benchmark(*args, **kw)
    b = benchmark(*args, **kw)
    for s in a.strategies:
        np.testing.assert_array_equal(a.mean[s], b.mean[s])
    for k in range(2):
        assert (a.traces[Strategy.RANDOM][k].initial_indices
                == a.traces[Strategy.MEAN_MSE][k].initial_indices)


def test_iterations_to_threshold():
    s = _setup(noise_var=0.0)
    trace = run(_config(s, Strategy.EI, budget=8), s.oracle, s.target)
    k = iterations_to_threshold(trace)
    assert trace.records[k - 1].incumbent_value <= 1e-2 * trace.initial_incumbent
    assert all(r.incumbent_value > 1e-2 * trace.initial_incumbent for r in trace.records[: k - 1])
