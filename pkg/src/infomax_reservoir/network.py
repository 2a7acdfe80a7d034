"""Stochastic binary recurrent network with homeostatic excitability control.

Units are binary and updated synchronously.  Unit i fires at time t+1 with
probability  p_max * sigmoid(U_i(t))  where the potential

    U_i(t) = sum_j W_ij (x_j(t) - pbar_j) + Win_i (u(t) - pbar_0) - h_i(t)

is driven by mean-subtracted recurrent activity and a shared binary input
stream u.  After every step each threshold h_i integrates the deviation of
the unit from its target rate, h_i <- h_i + eps * (x_i - pbar_i), which
clamps long-run firing rates near pbar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError

DEFAULT_P_MAX = 0.8
DEFAULT_P_BAR = 0.1
DEFAULT_INPUT_RATE = 0.5
DEFAULT_EPSILON = 0.01
DEFAULT_INIT_SIGMA2 = 0.01

# uniform draws are pre-generated in chunks of this many steps; chunked
# generation consumes the PCG64 stream exactly like per-step draws do
_NOISE_CHUNK = 4096


@dataclass
class NetworkParams:
    """Connection weights, thresholds and rate constants of one network."""

    w_recurrent: np.ndarray      # (N, N), W[i, j] couples j -> i
    w_input: np.ndarray          # (N,)
    bias: np.ndarray             # (N,) homeostatic thresholds h
    p_max: float = DEFAULT_P_MAX
    p_bar: np.ndarray = None     # (N,) target rates
    input_rate: float = DEFAULT_INPUT_RATE
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        self.w_recurrent = np.asarray(self.w_recurrent, dtype=float)
        self.w_input = np.asarray(self.w_input, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        n = self.w_recurrent.shape[0]
        if self.p_bar is None:
            self.p_bar = np.full(n, DEFAULT_P_BAR)
        self.p_bar = np.asarray(self.p_bar, dtype=float)
        self.validate()

    @property
    def n_neurons(self) -> int:
        return self.w_recurrent.shape[0]

    def validate(self):
        n = self.w_recurrent.shape[0]
        if self.w_recurrent.ndim != 2 or self.w_recurrent.shape != (n, n):
            raise ConfigurationError("w_recurrent must be square")
        if self.w_input.shape != (n,):
            raise ConfigurationError("w_input must have one entry per unit")
        if self.bias.shape != (n,):
            raise ConfigurationError("bias must have one entry per unit")
        if self.p_bar.shape != (n,):
            raise ConfigurationError("p_bar must have one entry per unit")
        if not (0.0 < self.p_max <= 1.0):
            raise ConfigurationError("p_max must lie in (0, 1]")
        if np.any(self.p_bar <= 0.0) or np.any(self.p_bar >= self.p_max):
            raise ConfigurationError("target rates must lie in (0, p_max)")
        if not (0.0 < self.input_rate < 1.0):
            raise ConfigurationError("input_rate must lie in (0, 1)")
        if self.epsilon < 0.0:
            raise ConfigurationError("epsilon must be non-negative")
        for name in ("w_recurrent", "w_input", "bias"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigurationError(f"{name} contains non-finite values")

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            w_recurrent=self.w_recurrent.copy(),
            w_input=self.w_input.copy(),
            bias=self.bias.copy(),
            p_max=self.p_max,
            p_bar=self.p_bar.copy(),
            input_rate=self.input_rate,
            epsilon=self.epsilon,
        )

    def rate_vector(self) -> np.ndarray:
        """Target rates of all observed variables: input first, then units."""
        return np.concatenate(([self.input_rate], self.p_bar))


@dataclass
class NetworkState:
    """Instantaneous binary state and step counter."""

    x: np.ndarray                # (N,) uint8
    t: int = 0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.uint8)

    def copy(self) -> "NetworkState":
        return NetworkState(x=self.x.copy(), t=self.t)


@dataclass
class StateTrace:
    """Aligned input/state recording of one simulated phase.

    Row s holds the input consumed at step s and the state it produced,
    i.e. states[s] = x(t_start + s + 1) and inputs[s] = u(t_start + s).
    """

    inputs: np.ndarray           # (T,) uint8
    states: np.ndarray           # (T, N) uint8
    t_start: int = 0

    def __len__(self):
        return self.inputs.shape[0]


def zero_state(n_neurons: int) -> NetworkState:
    return NetworkState(x=np.zeros(n_neurons, dtype=np.uint8), t=0)


def init_network(n_neurons: int, sigma2: float = DEFAULT_INIT_SIGMA2,
                 rng=None, **kwargs) -> NetworkParams:
    """Draw initial Gaussian weights with zero mean and variance sigma2.

    The recurrent matrix is drawn first, then the input weights, so a
    given bit-generator state always yields the same network.  Thresholds
    start at zero.  Extra keyword arguments override the rate constants.
    """
    if n_neurons < 1:
        raise ConfigurationError("need at least one unit")
    if sigma2 <= 0.0:
        raise ConfigurationError("sigma2 must be positive")
    rng = np.random.default_rng(rng)
    sd = float(np.sqrt(sigma2))
    w = rng.normal(0.0, sd, size=(n_neurons, n_neurons))
    w_in = rng.normal(0.0, sd, size=n_neurons)
    return NetworkParams(w_recurrent=w, w_input=w_in,
                         bias=np.zeros(n_neurons), **kwargs)


def membrane_potential(params: NetworkParams, state: NetworkState,
                       u: int) -> np.ndarray:
    """Potential vector U(t) given the current state and input bit."""
    centered = state.x - params.p_bar
    return (params.w_recurrent @ centered
            + params.w_input * (u - params.input_rate)
            - params.bias)


def firing_probability(params: NetworkParams,
                       potential: np.ndarray) -> np.ndarray:
    return params.p_max * expit(potential)


def step(params: NetworkParams, state: NetworkState, u: int, rng=None,
         deterministic: bool = False) -> NetworkState:
    """Advance the network one step.

    Stochastic mode thresholds one uniform draw per unit against the firing
    probability.  Deterministic mode fires every unit whose probability is
    at least 1/2 and consumes no randomness, so interleaving deterministic
    steps does not perturb a seeded stochastic run.
    """
    p = firing_probability(params, membrane_potential(params, state, u))
    if deterministic:
        x_new = (p >= 0.5).astype(np.uint8)
    else:
        x_new = (rng.random(params.n_neurons) < p).astype(np.uint8)
    return NetworkState(x=x_new, t=state.t + 1)


def update_bias(params: NetworkParams, new_state: NetworkState) -> NetworkParams:
    """Homeostatic threshold update, in place: h += eps * (x - pbar)."""
    params.bias += params.epsilon * (new_state.x - params.p_bar)
    return params


def _resolve_inputs(n_steps, input_source, rng):
    if input_source is None:
        # child stream: drawing the input bits must not consume anything
        # from the noise stream, or replaying a recorded input sequence
        # would desynchronise the unit noise
        child = rng.spawn(1)[0]
        return child.integers(0, 2, size=n_steps, dtype=np.uint8)
    if isinstance(input_source, np.random.Generator):
        return input_source.integers(0, 2, size=n_steps, dtype=np.uint8)
    arr = np.asarray(input_source)
    if arr.ndim != 1 or arr.shape[0] < n_steps:
        raise ConfigurationError(
            f"input array too short: need {n_steps}, got {arr.shape[0]}")
    if not np.isin(arr[:n_steps], (0, 1)).all():
        raise ConfigurationError("input stream must be binary")
    return arr[:n_steps].astype(np.uint8)


def run_phase(params: NetworkParams, state: NetworkState, n_steps: int,
              rng=None, input_source=None, adapt_bias: bool = True,
              deterministic: bool = False):
    """Simulate n_steps and return (StateTrace, final NetworkState).

    params.bias is updated in place when adapt_bias is set; weights are
    never touched.  input_source may be None (fresh Bernoulli(1/2) bits
    from a child of rng), a Generator, or a binary array of length at
    least n_steps.
    """
    if n_steps < 1:
        raise ConfigurationError("n_steps must be positive")
    n = params.n_neurons
    inputs = _resolve_inputs(n_steps, input_source, rng)
    states = np.empty((n_steps, n), dtype=np.uint8)

    x = state.x.astype(float)
    h = params.bias
    w = params.w_recurrent
    w_in = params.w_input
    p_bar = params.p_bar
    p_max = params.p_max
    eps = params.epsilon
    u_off = params.input_rate

    t = 0
    while t < n_steps:
        stop = min(t + _NOISE_CHUNK, n_steps)
        if not deterministic:
            unif = rng.random((stop - t, n))
        for k in range(t, stop):
            pot = w @ (x - p_bar) + w_in * (inputs[k] - u_off) - h
            p = p_max * expit(pot)
            if deterministic:
                x = (p >= 0.5).astype(float)
            else:
                x = (unif[k - t] < p).astype(float)
            states[k] = x
            if adapt_bias:
                h += eps * (x - p_bar)
        t = stop

    trace = StateTrace(inputs=inputs, states=states, t_start=state.t)
    final = NetworkState(x=states[-1].copy(), t=state.t + n_steps)
    return trace, final
