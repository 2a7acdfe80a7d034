import numpy as np
import pytest

from infomax_reservoir import (
    ConfigurationError,
    NetworkParams,
    NetworkState,
    firing_probability,
    init_network,
    membrane_potential,
    run_phase,
    step,
    update_bias,
    zero_state,
)


def small_params(n=4, seed=0, **kw):
    return init_network(n, rng=np.random.default_rng(seed), **kw)


class TestInit:
    def test_sample_variance_matches_requested(self):
        p = init_network(100, sigma2=0.01, rng=np.random.default_rng(3))
        v = p.w_recurrent.var()
        assert 0.008 < v < 0.012
        assert abs(p.w_recurrent.mean()) < 0.005

    def test_degenerate_variance(self):
        p = init_network(1, sigma2=1e-20, rng=np.random.default_rng(0))
        assert abs(p.w_recurrent[0, 0]) < 1e-8
        assert abs(p.w_input[0]) < 1e-8
        assert p.bias[0] == 0.0

    def test_same_seed_bit_identical(self):
        a = init_network(7, rng=np.random.default_rng(11))
        b = init_network(7, rng=np.random.default_rng(11))
        assert np.array_equal(a.w_recurrent, b.w_recurrent)
        assert np.array_equal(a.w_input, b.w_input)
        assert np.array_equal(a.bias, b.bias)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ConfigurationError):
            init_network(0, rng=np.random.default_rng(0))
        with pytest.raises(ConfigurationError):
            init_network(3, sigma2=0.0, rng=np.random.default_rng(0))

    def test_params_validation(self):
        with pytest.raises(ConfigurationError):
            NetworkParams(w_recurrent=np.zeros((2, 3)), w_input=np.zeros(2),
                          bias=np.zeros(2))
        with pytest.raises(ConfigurationError):
            NetworkParams(w_recurrent=np.zeros((2, 2)), w_input=np.zeros(3),
                          bias=np.zeros(2))
        with pytest.raises(ConfigurationError):
            NetworkParams(w_recurrent=np.full((2, 2), np.nan),
                          w_input=np.zeros(2), bias=np.zeros(2))
        with pytest.raises(ConfigurationError):
            NetworkParams(w_recurrent=np.zeros((2, 2)), w_input=np.zeros(2),
                          bias=np.zeros(2), p_max=1.5)


class TestPotentialAndProbability:
    def test_zero_weights_give_zero_potential(self):
        p = NetworkParams(w_recurrent=np.zeros((3, 3)), w_input=np.zeros(3),
                          bias=np.zeros(3))
        st = NetworkState(x=np.array([1, 0, 1]))
        np.testing.assert_array_equal(membrane_potential(p, st, 1),
                                      np.zeros(3))

    def test_hand_value(self):
        # one unit: W=[[2]], Win=[1], h=[0.5], x=[1], u=0
        # U = 2*(1-0.1) + 1*(0-0.5) - 0.5 = 0.8
        p = NetworkParams(w_recurrent=np.array([[2.0]]),
                          w_input=np.array([1.0]), bias=np.array([0.5]))
        st = NetworkState(x=np.array([1]))
        np.testing.assert_allclose(membrane_potential(p, st, 0), [0.8],
                                   atol=1e-12)

    def test_zero_weights_reduce_to_bias(self):
        # with all couplings zero the potential is -h for any binary state
        h = np.array([0.3, -1.2, 0.0])
        p = NetworkParams(w_recurrent=np.zeros((3, 3)), w_input=np.zeros(3),
                          bias=h)
        for x in ([0, 0, 0], [1, 1, 1], [1, 0, 1]):
            st = NetworkState(x=np.array(x))
            np.testing.assert_array_equal(membrane_potential(p, st, 1), -h)

    def test_probability_at_zero_potential(self):
        p = small_params(3)
        np.testing.assert_allclose(firing_probability(p, np.zeros(3)),
                                   np.full(3, 0.4), rtol=1e-15)

    def test_probability_limits(self):
        p = small_params(2)
        probs = firing_probability(p, np.array([40.0, -40.0]))
        np.testing.assert_allclose(probs[0], 0.8, atol=1e-12)
        assert probs[1] < 1e-12

    def test_probability_bounds(self):
        p = small_params(200, seed=5)
        u = np.random.default_rng(1).normal(0, 10, 200)
        probs = firing_probability(p, u)
        assert np.all(probs >= 0.0) and np.all(probs <= p.p_max)

    def test_monte_carlo_rate_at_zero_potential(self):
        # zero couplings pin U=0, so every unit fires at exactly 0.4
        n, steps = 3, 100_000
        p = NetworkParams(w_recurrent=np.zeros((n, n)), w_input=np.zeros(n),
                          bias=np.zeros(n), epsilon=0.0)
        rng = np.random.default_rng(8)
        trace, _ = run_phase(p, zero_state(n), steps, rng, adapt_bias=False)
        rates = trace.states.mean(axis=0)
        se = np.sqrt(0.4 * 0.6 / steps)
        assert np.all(np.abs(rates - 0.4) < 0.01)
        assert np.all(np.abs(rates - 0.4) < 3 * se)


class TestBiasUpdate:
    def test_silent_unit_decrement(self):
        p = NetworkParams(w_recurrent=np.zeros((1, 1)), w_input=np.zeros(1),
                          bias=np.zeros(1))
        update_bias(p, NetworkState(x=np.array([0])))
        np.testing.assert_allclose(p.bias, [-0.001], atol=1e-15)

    def test_homeostasis_band(self):
        p = init_network(30, rng=np.random.default_rng(17))
        rng = np.random.default_rng(99)
        trace, _ = run_phase(p, zero_state(30), 50_000, rng, adapt_bias=True)
        rates = trace.states[25_000:].mean(axis=0)
        assert np.all(rates > 0.08) and np.all(rates < 0.12)


class TestRunPhase:
    def test_rejects_zero_steps(self):
        p = small_params()
        with pytest.raises(ConfigurationError):
            run_phase(p, zero_state(4), 0, np.random.default_rng(0))

    def test_single_step_trace(self):
        p = small_params()
        trace, st = run_phase(p, zero_state(4), 1, np.random.default_rng(0))
        assert len(trace) == 1 and trace.states.shape == (1, 4)
        assert st.t == 1 and np.array_equal(st.x, trace.states[0])

    def test_default_input_rate(self):
        p = small_params()
        trace, _ = run_phase(p, zero_state(4), 50_000,
                             np.random.default_rng(2))
        assert abs(trace.inputs.mean() - 0.5) < 0.01

    def test_deterministic_given_seed(self):
        p = small_params(6, seed=3)
        t1, s1 = run_phase(p.copy(), zero_state(6), 500,
                           np.random.default_rng(42))
        t2, s2 = run_phase(p.copy(), zero_state(6), 500,
                           np.random.default_rng(42))
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.inputs, t2.inputs)
        assert np.array_equal(s1.x, s2.x)

    def test_replayed_inputs_reproduce_trace(self):
        # recorded input bits against the same noise seed give the same run
        p = small_params(6, seed=3)
        t1, _ = run_phase(p.copy(), zero_state(6), 500,
                          np.random.default_rng(42))
        t2, _ = run_phase(p.copy(), zero_state(6), 500,
                          np.random.default_rng(42), input_source=t1.inputs)
        assert np.array_equal(t1.states, t2.states)

    def test_input_validation(self):
        p = small_params()
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigurationError):
            run_phase(p, zero_state(4), 10, rng, input_source=np.ones(5))
        with pytest.raises(ConfigurationError):
            run_phase(p, zero_state(4), 4, rng,
                      input_source=np.array([0, 1, 2, 1]))

    def test_frozen_bias_stays_put(self):
        p = small_params(5, seed=9)
        before = p.bias.copy()
        run_phase(p, zero_state(5), 300, np.random.default_rng(1),
                  adapt_bias=False)
        assert np.array_equal(p.bias, before)

    def test_trace_rows_align_with_inputs(self):
        # a single strongly input-driven unit copies the input bit, so row s
        # must hold the state produced by inputs[s]
        p = NetworkParams(w_recurrent=np.zeros((1, 1)),
                          w_input=np.array([100.0]), bias=np.zeros(1),
                          epsilon=0.0)
        trace, _ = run_phase(p, zero_state(1), 200, np.random.default_rng(0),
                             deterministic=True)
        assert np.array_equal(trace.states[:, 0], trace.inputs)

    def test_chunk_boundary_continuity(self):
        # crossing the internal noise-chunk boundary must not change draws
        p = small_params(3, seed=1)
        long, _ = run_phase(p.copy(), zero_state(3), 5000,
                            np.random.default_rng(5))
        again, _ = run_phase(p.copy(), zero_state(3), 5000,
                             np.random.default_rng(5))
        assert np.array_equal(long.states, again.states)


class TestStepEquivariance:
    def test_permutation_relabels_deterministic_step(self):
        n = 6
        p = small_params(n, seed=4)
        p.bias = np.random.default_rng(7).normal(0, 0.3, n)
        perm = np.random.default_rng(8).permutation(n)
        p2 = NetworkParams(w_recurrent=p.w_recurrent[perm][:, perm],
                           w_input=p.w_input[perm], bias=p.bias[perm],
                           p_bar=p.p_bar[perm])
        x = np.random.default_rng(9).integers(0, 2, n, dtype=np.uint8)
        for u in (0, 1):
            s1 = step(p, NetworkState(x=x), u, deterministic=True)
            s2 = step(p2, NetworkState(x=x[perm]), u, deterministic=True)
            assert np.array_equal(s1.x[perm], s2.x)

    def test_permutation_relabels_probabilities(self):
        n = 5
        p = small_params(n, seed=14)
        perm = np.random.default_rng(2).permutation(n)
        p2 = NetworkParams(w_recurrent=p.w_recurrent[perm][:, perm],
                           w_input=p.w_input[perm], bias=p.bias[perm],
                           p_bar=p.p_bar[perm])
        x = np.array([1, 0, 0, 1, 1], dtype=np.uint8)
        pot1 = membrane_potential(p, NetworkState(x=x), 1)
        pot2 = membrane_potential(p2, NetworkState(x=x[perm]), 1)
        np.testing.assert_allclose(firing_probability(p, pot1)[perm],
                                   firing_probability(p2, pot2), rtol=1e-12)

    def test_stochastic_step_consumes_one_draw_per_unit(self):
        p = small_params(4, seed=6)
        st = NetworkState(x=np.array([0, 1, 0, 1], dtype=np.uint8))
        r1 = np.random.default_rng(3)
        s1 = step(p, st, 1, r1)
        r2 = np.random.default_rng(3)
        unif = r2.random(4)
        pot = membrane_potential(p, st, 1)
        expect = (unif < firing_probability(p, pot)).astype(np.uint8)
        assert np.array_equal(s1.x, expect)
