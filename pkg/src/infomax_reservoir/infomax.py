"""Recurrent infomax: Gaussian mutual-information objective and weight updates.

The objective is the mutual information between consecutive joint states of
the (input, units) vector, estimated under a Gaussian approximation from
second moments of the binary trace.  The joint state at step t is the
centered vector c(t) with c_0 = u(t) - pbar_0 and c_i = x_i(t) - pbar_i,
where u(t) is the input acting on the t -> t+1 transition.  That phase
matters: every unit computes x_i(t+1) from the time-t values of its
presynaptic variables, the input included, so variable 0 enters the
dynamics exactly like a recurrent unit and one gradient formula covers
all weight columns.  With

    C = E[c(t)   c(t)^T ]          same-time covariance, (N+1)^2
    F = E[c(t)   c(t+1)^T]         lagged cross-covariance
    G = E[c(t+1) c(t+1)^T]
    D = [[C, F], [F^T, G]]         joint covariance over (c(t), c(t+1))

the per-step information is  I = log det C - (1/2) log det D  in nats
(stationarity makes the two marginal terms equal, hence the single C term).

Weights ascend the gradient of I.  The gradient used here treats the
stationary moments as driven by the one-step linear response of each unit
around its target rate, slope g_i = pbar_i (1 - pbar_i / p_max), giving

    dI/dW_ij = g_i [ (B^T C)_ij + 2 (A F^T)_ij - 2 A_ii F^T_ij ]

with sensitivities A = C^{-1} - (Dinv_TL + Dinv_BR)/2 and B = -Dinv_TR
(TL/TR/BR are the (N+1)^2 blocks of D^{-1}).  Column j = 0 is the input
weight; when one input line is shared by K independent readout copies the
input column of the update is scaled by K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, DegenerateStatsError
from .network import NetworkParams, NetworkState, StateTrace, run_phase

# absolute diagonal jitter ladder tried in order when a Cholesky fails
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass
class BlockStats:
    """Second moments of one measurement window, mergeable across windows.

    Moments are averages over the T = len(window) - 2 consecutive pairs of
    joint states in the window, taken around the fixed target rates (not
    empirical means).  Index 0 is the input variable.
    """

    e_same: np.ndarray        # (M, M)  E[c(t) c(t)^T], M = N + 1
    e_same_next: np.ndarray   # (M, M)  E[c(t) c(t+1)^T]
    e_next_next: np.ndarray   # (M, M)  E[c(t+1) c(t+1)^T]
    n_samples: int            # number of pairs averaged

    @property
    def n_vars(self) -> int:
        return self.e_same.shape[0]


def accumulate_stats(trace: StateTrace, rates: np.ndarray) -> BlockStats:
    """Second moments of a trace around the fixed rate vector.

    rates[0] is the input rate, rates[1:] the unit target rates.  Trace row
    s stores the input consumed at step s next to the state it produced, so
    the joint state pairs states[s] with inputs[s + 1], the input about to
    act on it.  A window of L rows therefore yields L - 1 joint states and
    L - 2 lagged pairs; windows shorter than 3 rows carry no pair and are
    rejected.
    """
    rows = len(trace)
    if rows < 3:
        raise ConfigurationError("need at least three rows to form a lagged pair")
    rates = np.asarray(rates, dtype=float)
    if rates.shape[0] != trace.states.shape[1] + 1:
        raise ConfigurationError("rate vector must cover input plus units")
    z = np.empty((rows - 1, rates.shape[0]))
    z[:, 0] = trace.inputs[1:] - rates[0]
    z[:, 1:] = trace.states[:-1] - rates[1:]
    zp, zf = z[:-1], z[1:]
    t = rows - 2
    e_same = zp.T @ zp / t
    e_same_next = zp.T @ zf / t
    e_next_next = zf.T @ zf / t
    return BlockStats(e_same=e_same, e_same_next=e_same_next,
                      e_next_next=e_next_next, n_samples=t)


def merge_stats(a: BlockStats, b: BlockStats) -> BlockStats:
    """Pair-count weighted pooling of two windows.

    Equals the stats of the concatenated trace except for the one boundary
    pair that concatenation would add.
    """
    if a.n_vars != b.n_vars:
        raise ConfigurationError("cannot merge stats of different sizes")
    n = a.n_samples + b.n_samples
    wa, wb = a.n_samples / n, b.n_samples / n
    return BlockStats(
        e_same=wa * a.e_same + wb * b.e_same,
        e_same_next=wa * a.e_same_next + wb * b.e_same_next,
        e_next_next=wa * a.e_next_next + wb * b.e_next_next,
        n_samples=n,
    )


@dataclass
class MiReport:
    mi_nats: float
    logdet_c: float
    logdet_d: float
    jitter_applied: float


def _sym(a):
    return 0.5 * (a + a.T)


def _chol_logdet(a, name):
    """(logdet, cho_factor, jitter) via Cholesky, climbing the jitter ladder."""
    eye = np.eye(a.shape[0])
    for jit in JITTER_LADDER:
        try:
            cf = cho_factor(a + jit * eye, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        diag = np.diag(cf[0])
        if np.all(diag > 0.0):
            return 2.0 * float(np.sum(np.log(diag))), cf, jit
    raise DegenerateStatsError(name, f"jitter up to {JITTER_LADDER[-1]:g} failed")


def _joint_matrix(stats):
    c = _sym(stats.e_same)
    g = _sym(stats.e_next_next)
    f = stats.e_same_next
    return c, np.block([[c, f], [f.T, g]])


def gaussian_mi(stats: BlockStats) -> MiReport:
    """Gaussian MI between consecutive joint states, in nats."""
    c, d = _joint_matrix(stats)
    ld_c, _, jit_c = _chol_logdet(c, "C")
    ld_d, _, jit_d = _chol_logdet(d, "D")
    return MiReport(mi_nats=ld_c - 0.5 * ld_d, logdet_c=ld_c, logdet_d=ld_d,
                    jitter_applied=max(jit_c, jit_d))


def mi_gradient(stats: BlockStats, rates: np.ndarray,
                p_max: float = 0.8) -> np.ndarray:
    """Gradient of the Gaussian MI with respect to incoming weights.

    Returns an (N, N+1) array: row i is unit i, column 0 the input weight,
    column j >= 1 the recurrent weight from unit j.  rates is the full
    rate vector (input first) and p_max the firing ceiling; together they
    set the response slope g_i = pbar_i (1 - pbar_i / p_max).
    """
    m = stats.n_vars
    rates = np.asarray(rates, dtype=float)
    if rates.shape[0] != m:
        raise ConfigurationError("rate vector must cover input plus units")
    c, d = _joint_matrix(stats)
    _, cf_c, _ = _chol_logdet(c, "C")
    _, cf_d, _ = _chol_logdet(d, "D")
    c_inv = cho_solve(cf_c, np.eye(m), check_finite=False)
    d_inv = cho_solve(cf_d, np.eye(2 * m), check_finite=False)

    a = c_inv - 0.5 * (d_inv[:m, :m] + d_inv[m:, m:])
    b = -d_inv[:m, m:]
    f = stats.e_same_next

    slope = rates * (1.0 - rates / p_max)
    full = b.T @ c + 2.0 * (a @ f.T) - 2.0 * np.diag(a)[:, None] * f.T
    return slope[1:, None] * full[1:, :]


@dataclass
class RIConfig:
    """Schedule and learning constants of one infomax run."""

    eta: float = 0.2
    input_multiplicity: int = 1
    block_steps: int = 100_000
    settle_fraction: float = 0.5
    n_blocks: int = 1500

    def __post_init__(self):
        self.validate()

    @property
    def settle_steps(self) -> int:
        return int(self.block_steps * self.settle_fraction)

    @property
    def measure_steps(self) -> int:
        return self.block_steps - self.settle_steps

    def validate(self):
        if self.eta < 0.0:
            raise ConfigurationError("eta must be non-negative")
        if not (1 <= self.input_multiplicity <= 35):
            raise ConfigurationError("input multiplicity must lie in [1, 35]")
        if self.block_steps < 3 or not (0.0 <= self.settle_fraction < 1.0):
            raise ConfigurationError("block must keep at least three measured steps")
        if self.measure_steps < 3:
            raise ConfigurationError("block must keep at least three measured steps")
        if self.n_blocks < 0:
            raise ConfigurationError("n_blocks must be non-negative")


def apply_ri_update(params: NetworkParams, grad: np.ndarray,
                    cfg: RIConfig) -> NetworkParams:
    """Steepest-ascent step, in place.  Thresholds are untouched.

    The input column moves with an effective rate eta * K because the K
    input copies share one weight and each contributes the same gradient.
    """
    n = params.n_neurons
    if grad.shape != (n, n + 1):
        raise ConfigurationError("gradient shape does not match network")
    if not np.all(np.isfinite(grad)):
        raise ConfigurationError("gradient contains non-finite values")
    params.w_recurrent += cfg.eta * grad[:, 1:]
    params.w_input += cfg.eta * cfg.input_multiplicity * grad[:, 0]
    return params


@dataclass
class BlockResult:
    params: NetworkParams
    state: NetworkState
    report: MiReport
    stats: BlockStats


def run_ri_block(params: NetworkParams, state: NetworkState, cfg: RIConfig,
                 rng, input_source=None) -> BlockResult:
    """One infomax block: settle, measure, then update the weights in place.

    The settle half of the block lets the homeostatic thresholds track the
    current weights; only the second half enters the moment estimates.
    Degenerate statistics raise and leave the weights unmodified.
    """
    settle_src = measure_src = input_source
    if input_source is not None and not isinstance(input_source, np.random.Generator):
        arr = np.asarray(input_source)
        settle_src = arr[:cfg.settle_steps]
        measure_src = arr[cfg.settle_steps:cfg.block_steps]
    if cfg.settle_steps:
        _, state = run_phase(params, state, cfg.settle_steps, rng,
                             input_source=settle_src)
    trace, state = run_phase(params, state, cfg.measure_steps, rng,
                             input_source=measure_src)
    stats = accumulate_stats(trace, params.rate_vector())
    report = gaussian_mi(stats)
    grad = mi_gradient(stats, params.rate_vector(), p_max=params.p_max)
    params = apply_ri_update(params, grad, cfg)
    return BlockResult(params=params, state=state, report=report, stats=stats)
