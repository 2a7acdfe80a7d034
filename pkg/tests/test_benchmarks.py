"""Readout, scoring, rule machinery, and the benchmark tasks."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infomax_reservoir import (
    BenchmarkPhases,
    BooleanRule,
    ConfigurationError,
    boolean_capacity,
    determination_coefficient,
    enumerate_rules,
    evaluate_tasks,
    init_network,
    memory_capacity,
    rule_from_id,
    rule_target,
    run_benchmark_phases,
    train_readout,
    truth_table_separable,
)


# ---------------------------------------------------------------------------
# readout training

def _random_binary(rng, t, n):
    return (rng.random((t, n)) < 0.5).astype(float)


def test_exact_regressor_recovers_unit_vector():
    rng = np.random.default_rng(3)
    x = _random_binary(rng, 300, 8)
    y = x[:, 3].copy()
    model = train_readout(x, y)
    expect = np.zeros(8)
    expect[3] = 1.0
    np.testing.assert_allclose(model.weights, expect, atol=1e-9)
    # pure linear map, no intercept column anywhere
    np.testing.assert_allclose(model.predict(x), y, atol=1e-9)


def test_duplicate_columns_split_weight_min_norm():
    rng = np.random.default_rng(4)
    x = _random_binary(rng, 400, 6)
    x[:, 1] = x[:, 0]
    y = x[:, 0].copy()
    model = train_readout(x, y)
    assert model.weights[0] == pytest.approx(0.5, abs=1e-9)
    assert model.weights[1] == pytest.approx(0.5, abs=1e-9)
    assert determination_coefficient(model.predict(x), y) == pytest.approx(1.0)


def test_centered_slope_ignores_state_mean_offset():
    # constant shifts of the regressors must not disturb the slope
    rng = np.random.default_rng(5)
    x = _random_binary(rng, 500, 5)
    y = rng.random(500)
    w0 = train_readout(x, y).weights
    w1 = train_readout(x + 3.0, y).weights
    np.testing.assert_allclose(w0, w1, atol=1e-8)


def test_readout_shape_validation():
    with pytest.raises(ConfigurationError):
        train_readout(np.zeros(5), np.zeros(5))
    with pytest.raises(ConfigurationError):
        train_readout(np.zeros((5, 2)), np.zeros(4))
    with pytest.raises(ConfigurationError):
        train_readout(np.zeros((1, 2)), np.zeros(1))


def test_small_recall_signal_survives_the_fit():
    # weak input trace buried in binary noise: the fitted readout must
    # recover roughly the per-unit signal-to-variance sum, which a fit
    # that also has to reproduce the target mean from unit means cannot
    rng = np.random.default_rng(6)
    t, n = 30_000, 30
    u = (rng.random(t) < 0.5).astype(float)
    gain = rng.normal(0.0, 0.02, n)
    p = 0.1 + gain * (u[:, None] - 0.5)
    x = (rng.random((t, n)) < p).astype(float)
    d = x[u == 1].mean(axis=0) - x[u == 0].mean(axis=0)
    marginal = float((d * d * 0.25 / x.var(axis=0)).sum())
    half = t // 2
    model = train_readout(x[:half], u[:half])
    got = determination_coefficient(model.predict(x[half:]), u[half:])
    assert got > 0.5 * marginal


# ---------------------------------------------------------------------------
# determination coefficient

def test_det_coeff_perfect_affine():
    rng = np.random.default_rng(7)
    y = rng.random(200)
    assert determination_coefficient(-2.0 * y + 7.0, y) == pytest.approx(1.0, abs=1e-12)


def test_det_coeff_null_is_small():
    rng = np.random.default_rng(8)
    z = rng.normal(size=5000)
    y = rng.normal(size=5000)
    assert determination_coefficient(z, y) < 0.01


def test_det_coeff_flat_series_scores_zero():
    y = np.arange(10, dtype=float)
    assert determination_coefficient(np.zeros(10), y) == 0.0
    assert determination_coefficient(y, np.full(10, 3.3)) == 0.0


def test_det_coeff_validation():
    with pytest.raises(ConfigurationError):
        determination_coefficient(np.zeros(3), np.zeros(4))
    with pytest.raises(ConfigurationError):
        determination_coefficient(np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(ConfigurationError):
        determination_coefficient(np.zeros(1), np.zeros(1))


# ---------------------------------------------------------------------------
# rule machinery

def test_rule_counts_arity_2():
    rules = enumerate_rules(2)
    assert len(rules) == 14
    nonsep = sorted(r.rule_id for r in rules if not r.separable)
    assert nonsep == [6, 9]


def test_rule_counts_arity_3():
    rules = enumerate_rules(3)
    assert len(rules) == 254
    assert sum(r.separable for r in rules) == 102


def test_separable_count_including_constants():
    # classic count of threshold functions of 3 variables
    total = sum(truth_table_separable([(rid >> k) & 1 for k in range(8)])
                for rid in range(256))
    assert total == 104


def test_identity_rule_is_12():
    rule = rule_from_id(2, 12)
    # table index packs the newest bit most significant
    assert rule.truth_table.tolist() == [0, 0, 1, 1]
    assert rule.separable


def test_not_previous_rule_is_5():
    rule = rule_from_id(2, 5)
    assert rule.truth_table.tolist() == [1, 0, 1, 0]
    # newest=1, older=1 maps to index 3 and outputs 0
    assert rule.truth_table[3] == 0
    assert rule.separable


def test_xor_and_xnor_tables():
    assert rule_from_id(2, 6).truth_table.tolist() == [0, 1, 1, 0]
    assert rule_from_id(2, 9).truth_table.tolist() == [1, 0, 0, 1]
    assert not rule_from_id(2, 6).separable
    assert not rule_from_id(2, 9).separable


def test_constant_rules_rejected():
    with pytest.raises(ConfigurationError):
        rule_from_id(2, 0)
    with pytest.raises(ConfigurationError):
        rule_from_id(2, 15)
    with pytest.raises(ConfigurationError):
        BooleanRule(arity=2, truth_table=[1, 1, 1, 1], rule_id=15, separable=True)


def test_enumerate_rules_arity_validation():
    with pytest.raises(ConfigurationError):
        enumerate_rules(4)


def test_rule_target_identity_is_delayed_input():
    rng = np.random.default_rng(9)
    u = (rng.random(100) < 0.5).astype(np.uint8)
    ident = rule_from_id(2, 12)
    for tau in (1, 3):
        got = rule_target(ident, u, tau)
        lead = tau + 1
        np.testing.assert_array_equal(got, u[lead - tau:len(u) - tau])


def test_rule_target_xor_hand_values():
    u = np.array([1, 0, 0, 1, 1, 0], dtype=np.uint8)
    xor = rule_from_id(2, 6)
    # t runs from lead=2; output = u(t-1) ^ u(t-2)
    got = rule_target(xor, u, 1)
    expect = u[1:-1] ^ u[:-2]
    np.testing.assert_array_equal(got, expect)


def test_rule_target_lookback_validation():
    u = np.zeros(4, dtype=np.uint8)
    with pytest.raises(ConfigurationError):
        rule_target(rule_from_id(2, 6), u, 0)
    with pytest.raises(ConfigurationError):
        rule_target(rule_from_id(3, 7), u, 2)   # lead 4 needs length > 4


def _apply_perm_and_flips(table, perm, flips):
    n = int(round(np.log2(len(table))))
    out = np.zeros(len(table), dtype=np.uint8)
    for idx in range(len(table)):
        bits = [(idx >> (n - 1 - m)) & 1 for m in range(n)]
        src = [bits[perm[m]] ^ flips[m] for m in range(n)]
        j = 0
        for b in src:
            j = (j << 1) | b
        out[idx] = table[j]
    return out


@settings(max_examples=60, deadline=None)
@given(rid=st.integers(min_value=1, max_value=254),
       perm=st.permutations(range(3)),
       flips=st.tuples(st.booleans(), st.booleans(), st.booleans()),
       negate=st.booleans())
def test_separability_invariant_under_input_symmetries(rid, perm, flips, negate):
    table = np.array([(rid >> k) & 1 for k in range(8)], dtype=np.uint8)
    moved = _apply_perm_and_flips(table, list(perm), [int(f) for f in flips])
    if negate:
        moved = 1 - moved
    assert truth_table_separable(moved) == truth_table_separable(table)


# ---------------------------------------------------------------------------
# benchmark tasks

DELAY_N = 20


def _delay_line_params():
    n = DELAY_N
    w = np.zeros((n, n))
    w[np.arange(1, n), np.arange(n - 1)] = 20.0
    w_in = np.zeros(n)
    w_in[0] = 20.0
    params = init_network(n, rng=np.random.default_rng(0))
    return dataclasses.replace(params, w_recurrent=w, w_input=w_in,
                               bias=np.zeros(n))


def test_delay_line_memory_is_perfect():
    params = _delay_line_params()
    phases = BenchmarkPhases(washout=200, learning=1500, testing=1500)
    score = memory_capacity(params, phases, tau_max=DELAY_N,
                            rng=np.random.default_rng(5), deterministic=True)
    assert score.per_delay.min() > 0.999
    assert score.total == pytest.approx(DELAY_N, abs=1e-6)


def test_delay_line_beyond_depth_scores_nothing():
    params = _delay_line_params()
    phases = BenchmarkPhases(washout=200, learning=1500, testing=1500)
    score = memory_capacity(params, phases, tau_max=DELAY_N + 5,
                            rng=np.random.default_rng(5), deterministic=True)
    assert score.per_delay[DELAY_N:].max() < 0.02


def test_boolean_identity_rule_equals_memory_task():
    params = init_network(25, rng=np.random.default_rng(11))
    phases = BenchmarkPhases(washout=2000, learning=1200, testing=1200)
    run = run_benchmark_phases(params, phases, np.random.default_rng(12))
    mc = memory_capacity(params, phases, tau_max=8, run=run)
    bc, per_rule = boolean_capacity(params, phases, [rule_from_id(2, 12)],
                                    tau_max=8, run=run)
    np.testing.assert_allclose(bc.per_delay, mc.per_delay, atol=1e-12)
    assert per_rule[0].rule_id == 12


def test_scores_lie_in_unit_interval():
    params = init_network(15, rng=np.random.default_rng(13))
    phases = BenchmarkPhases(washout=1000, learning=800, testing=800)
    report = evaluate_tasks(params, phases, ["memory", "bool2"], tau_max=6,
                            rng=np.random.default_rng(14))
    for score in report.scores.values():
        assert np.all(score.per_delay >= 0.0)
        assert np.all(score.per_delay <= 1.0)
    assert set(report.rules) == {"bool2"}
    assert len(report.rules["bool2"]) == 14


def test_random_network_capacity_stays_small():
    # unoptimized baseline at production width; exact value is seed-pinned
    params = init_network(100, rng=np.random.default_rng(15))
    phases = BenchmarkPhases(washout=20_000, learning=1500, testing=1500)
    score = memory_capacity(params, phases, tau_max=50,
                            rng=np.random.default_rng(16))
    assert score.total < 5.0


def test_same_seed_reproduces_scores_exactly():
    params = init_network(12, rng=np.random.default_rng(17))
    phases = BenchmarkPhases(washout=500, learning=400, testing=400)
    a = memory_capacity(params, phases, tau_max=5, rng=np.random.default_rng(18))
    b = memory_capacity(params, phases, tau_max=5, rng=np.random.default_rng(18))
    np.testing.assert_array_equal(a.per_delay, b.per_delay)


def test_evaluation_does_not_touch_caller_params():
    params = init_network(12, rng=np.random.default_rng(19))
    before = (params.w_recurrent.copy(), params.bias.copy())
    phases = BenchmarkPhases(washout=500, learning=300, testing=300)
    memory_capacity(params, phases, tau_max=3, rng=np.random.default_rng(20))
    np.testing.assert_array_equal(params.w_recurrent, before[0])
    np.testing.assert_array_equal(params.bias, before[1])


def test_washout_too_short_for_lookback():
    params = init_network(8, rng=np.random.default_rng(21))
    phases = BenchmarkPhases(washout=3, learning=200, testing=200)
    with pytest.raises(ConfigurationError):
        memory_capacity(params, phases, tau_max=10,
                        rng=np.random.default_rng(22))


def test_boolean_capacity_validation():
    params = init_network(8, rng=np.random.default_rng(23))
    phases = BenchmarkPhases(washout=100, learning=100, testing=100)
    run = run_benchmark_phases(params, phases, np.random.default_rng(24))
    with pytest.raises(ConfigurationError):
        boolean_capacity(params, phases, [], tau_max=2, run=run)
    mixed = [rule_from_id(2, 6), rule_from_id(3, 7)]
    with pytest.raises(ConfigurationError):
        boolean_capacity(params, phases, mixed, tau_max=2, run=run)
    with pytest.raises(ConfigurationError):
        memory_capacity(params, phases, tau_max=0, run=run)


def test_unknown_task_rejected():
    params = init_network(8, rng=np.random.default_rng(25))
    with pytest.raises(ConfigurationError):
        evaluate_tasks(params, BenchmarkPhases(), ["narma"], rng=None)


def test_phase_rows_are_disjoint_and_contiguous():
    params = init_network(6, rng=np.random.default_rng(26))
    phases = BenchmarkPhases(washout=50, learning=40, testing=30)
    run = run_benchmark_phases(params, phases, np.random.default_rng(27))
    assert run.learn_rows[0] == 50
    assert run.test_rows[0] == run.learn_rows[-1] + 1
    assert len(run.inputs) == phases.total
    assert run.x_learn.shape == (40, 6)
    assert run.x_test.shape == (30, 6)
