"""Readout benchmarks: memory capacity and Boolean-function capacity.

A trained network is evaluated by simulating one washout / learning /
testing split, fitting linear readouts on the learning phase by ordinary
least squares, and scoring each readout on the testing phase with the
squared correlation (coefficient of determination between readout and
target,  MF = cov^2(z, y) / (var(z) var(y)) ).  Memory capacity sums MF
over delays 1..tau_max for the delayed-input target; Boolean capacity
averages the same sum over a set of Boolean functions of n consecutive
input bits.

Alignment convention: trace row s holds the state produced by input s,
so the delay-tau target at row s is inputs[s + 1 - tau] and the m-th bit
entering a Boolean rule is inputs[s + 1 - tau - m].
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError
from .network import NetworkParams, run_phase, zero_state

VAR_FLOOR = 1e-12


@dataclass
class BenchmarkPhases:
    """Lengths of the washout / learning / testing phases, in steps.

    Thresholds adapt during washout only; weights never change here.
    """

    washout: int = 50_000
    learning: int = 1500
    testing: int = 1500

    def __post_init__(self):
        if self.washout < 0:
            raise ConfigurationError("washout must be non-negative")
        if self.learning < 2 or self.testing < 2:
            raise ConfigurationError("learning and testing need >= 2 steps")

    @property
    def total(self) -> int:
        return self.washout + self.learning + self.testing


@dataclass
class ReadoutModel:
    """Linear readout z(t) = weights . x(t)."""

    weights: np.ndarray

    def predict(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(states, dtype=float) @ self.weights


@dataclass
class TaskScore:
    """Per-delay test scores and their sum (the capacity)."""

    per_delay: np.ndarray     # (tau_max,), index 0 is delay 1
    total: float


@dataclass
class BooleanRule:
    """Truth table over the n most recent delayed input bits.

    Table index packs the bits with the most recent bit (u(t - tau)) most
    significant; rule_id packs the table entries with entry k weighted
    2^k, so e.g. at arity 2 the identity rule u(t - tau) has id 12 and
    NOT u(t - tau - 1) has id 5.  Constant tables are rejected.
    """

    arity: int
    truth_table: np.ndarray
    rule_id: int
    separable: bool

    def __post_init__(self):
        self.truth_table = np.asarray(self.truth_table, dtype=np.uint8)
        if self.truth_table.shape != (2 ** self.arity,):
            raise ConfigurationError("truth table length must be 2**arity")
        s = int(self.truth_table.sum())
        if s == 0 or s == self.truth_table.shape[0]:
            raise ConfigurationError("constant rules carry no information")


@dataclass
class RuleResult:
    rule_id: int
    arity: int
    separable: bool
    per_delay_train: np.ndarray
    per_delay_test: np.ndarray
    total_test: float


@dataclass
class EvalReport:
    """Scores of one benchmark evaluation, keyed by task name."""

    scores: dict            # task -> TaskScore (testing phase)
    train_per_delay: dict   # task -> (tau_max,) training-phase scores
    rules: dict             # task -> list[RuleResult] (Boolean tasks only)


def train_readout(states: np.ndarray, target: np.ndarray) -> ReadoutModel:
    """Minimum-norm OLS fit of target on states (rank-deficient safe).

    The slope is solved on mean-centered data: scoring is a squared
    correlation, and the centered slope is what maximizes it.  Fitting the
    raw binary states instead would force the readout to synthesize the
    target mean out of state means, polluting the prediction with
    population-activity noise and crushing small recall signals.  The
    model is still applied as a pure linear map z = w.x; the dropped
    offset cannot move an offset-invariant score.
    """
    x = np.asarray(states, dtype=float)
    y = np.asarray(target, dtype=float)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ConfigurationError("states must be (T, N) and target (T,)")
    if x.shape[0] < 2:
        raise ConfigurationError("need at least two samples to fit")
    w = np.linalg.lstsq(x - x.mean(axis=0), y - y.mean(), rcond=None)[0]
    return ReadoutModel(weights=w)


def determination_coefficient(z: np.ndarray, y: np.ndarray) -> float:
    """Squared correlation cov^2 / (var var); 0 when either side is flat."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if z.shape != y.shape or z.ndim != 1 or z.shape[0] < 2:
        raise ConfigurationError("series must share a length of at least 2")
    zc = z - z.mean()
    yc = y - y.mean()
    vz = float(zc @ zc) / z.shape[0]
    vy = float(yc @ yc) / y.shape[0]
    if vz < VAR_FLOOR or vy < VAR_FLOOR:
        return 0.0
    cov = float(zc @ yc) / z.shape[0]
    return float(np.clip(cov * cov / (vz * vy), 0.0, 1.0))


def _det_coeff_columns(z, y):
    """Column-wise determination coefficient for (T, m) prediction/target."""
    zc = z - z.mean(axis=0)
    yc = y - y.mean(axis=0)
    vz = np.einsum("ij,ij->j", zc, zc) / z.shape[0]
    vy = np.einsum("ij,ij->j", yc, yc) / y.shape[0]
    cov = np.einsum("ij,ij->j", zc, yc) / z.shape[0]
    denom = vz * vy
    ok = (vz >= VAR_FLOOR) & (vy >= VAR_FLOOR)
    out = np.zeros(z.shape[1])
    out[ok] = np.clip(cov[ok] ** 2 / denom[ok], 0.0, 1.0)
    return out


# ---------------------------------------------------------------------------
# Boolean rules

def rule_from_id(arity: int, rule_id: int) -> BooleanRule:
    size = 2 ** (2 ** arity)
    if not (0 < rule_id < size - 1):
        raise ConfigurationError(f"rule id {rule_id} is constant or out of range")
    table = np.array([(rule_id >> k) & 1 for k in range(2 ** arity)],
                     dtype=np.uint8)
    return BooleanRule(arity=arity, truth_table=table, rule_id=rule_id,
                       separable=truth_table_separable(table))


@lru_cache(maxsize=None)
def _enumerate_rules_cached(arity):
    size = 2 ** (2 ** arity)
    return tuple(rule_from_id(arity, rid) for rid in range(1, size - 1))


def enumerate_rules(arity: int):
    """All non-constant Boolean rules of the given arity (2 or 3)."""
    if arity not in (2, 3):
        raise ConfigurationError("rule enumeration supports arity 2 and 3 only")
    return list(_enumerate_rules_cached(arity))


def truth_table_separable(table) -> bool:
    """Exact linear-separability test for a truth table of any constancy.

    Decides feasibility of  sign_v (w . v - theta) >= 1  over all input
    vertices v by Fourier-Motzkin elimination in exact rational
    arithmetic, so no tolerance enters the answer.
    """
    table = np.asarray(table)
    n = int(round(np.log2(table.shape[0])))
    if 2 ** n != table.shape[0]:
        raise ConfigurationError("table length must be a power of two")
    one = Fraction(1)
    cons = []
    for idx in range(table.shape[0]):
        v = [(idx >> (n - 1 - m)) & 1 for m in range(n)]
        sign = 1 if table[idx] else -1
        coeffs = tuple(Fraction(sign * b) for b in v) + (Fraction(-sign),)
        cons.append((coeffs, one))
    for var in range(n + 1):
        cons = _fm_eliminate(cons, var)
    return all(b <= 0 for _, b in cons)


def _fm_eliminate(cons, var):
    pos, neg, rest = [], [], []
    for a, b in cons:
        if a[var] > 0:
            pos.append((a, b))
        elif a[var] < 0:
            neg.append((a, b))
        else:
            rest.append((a, b))
    out = {c for c in rest}
    for ap, bp in pos:
        sp = ap[var]
        for an, bn in neg:
            sn = -an[var]
            a = tuple(x / sp + y / sn for x, y in zip(ap, an))
            b = bp / sp + bn / sn
            scale = max((abs(x) for x in a), default=Fraction(0))
            if scale > 0:
                a = tuple(x / scale for x in a)
                b = b / scale
            elif b <= 0:
                continue            # vacuous 0 >= b
            out.add((a, b))
    return list(out)


def is_linearly_separable(rule: BooleanRule) -> bool:
    return truth_table_separable(rule.truth_table)


def rule_target(rule: BooleanRule, inputs: np.ndarray, tau: int) -> np.ndarray:
    """Rule output f(u(t - tau), ..., u(t - tau - arity + 1)) over valid t.

    Entry k of the result is the output at t = k + tau + arity - 1 (the
    first step with full lookback), so the identity rule returns a slice
    of the input stream itself.
    """
    inputs = np.asarray(inputs)
    if tau < 1:
        raise ConfigurationError("delay must be at least 1")
    lead = tau + rule.arity - 1
    if inputs.shape[0] <= lead:
        raise ConfigurationError("input stream too short for the lookback")
    t = np.arange(lead, inputs.shape[0])
    return _rule_values(rule, inputs, t - tau)


def _rule_values(rule, inputs, newest_index):
    """Table lookup with the newest bit at newest_index (most significant)."""
    idx = np.zeros(newest_index.shape[0], dtype=np.int64)
    for m in range(rule.arity):
        idx |= inputs[newest_index - m].astype(np.int64) << (rule.arity - 1 - m)
    return rule.truth_table[idx]


# ---------------------------------------------------------------------------
# Shared benchmark simulation

@dataclass
class BenchmarkRun:
    """One simulated washout/learning/testing split plus its readout solver."""

    inputs: np.ndarray        # (total,) the full input stream
    x_learn: np.ndarray       # (learning, N) float
    x_test: np.ndarray        # (testing, N) float
    learn_rows: np.ndarray    # global row indices of the learning phase
    test_rows: np.ndarray
    pinv_learn: np.ndarray    # (N, learning), pinv of the centered states


def run_benchmark_phases(params: NetworkParams, phases: BenchmarkPhases,
                         rng, input_source=None,
                         deterministic: bool = False) -> BenchmarkRun:
    """Simulate the three phases once; thresholds adapt in washout only.

    Works on a copy, so evaluating never perturbs the caller's network.
    """
    p = params.copy()
    state = zero_state(p.n_neurons)
    if input_source is not None:
        input_source = np.asarray(input_source)
        wash_src = input_source[:phases.washout]
        rest_src = input_source[phases.washout:phases.total]
    else:
        wash_src = rest_src = None
    wash_inputs = np.empty(0, dtype=np.uint8)
    if phases.washout:
        tr_wash, state = run_phase(p, state, phases.washout, rng,
                                   input_source=wash_src, adapt_bias=True,
                                   deterministic=deterministic)
        wash_inputs = tr_wash.inputs
    tr_eval, _ = run_phase(p, state, phases.learning + phases.testing, rng,
                           input_source=rest_src, adapt_bias=False,
                           deterministic=deterministic)
    inputs = np.concatenate([wash_inputs, tr_eval.inputs])
    learn_rows = np.arange(phases.washout, phases.washout + phases.learning)
    test_rows = np.arange(phases.washout + phases.learning, phases.total)
    x_learn = tr_eval.states[:phases.learning].astype(float)
    x_test = tr_eval.states[phases.learning:].astype(float)
    # centered pinv: 1_T is orthogonal to the centered column space, so
    # pinv @ y centers the targets for free and yields the corr-optimal slope
    return BenchmarkRun(inputs=inputs, x_learn=x_learn, x_test=x_test,
                        learn_rows=learn_rows, test_rows=test_rows,
                        pinv_learn=np.linalg.pinv(x_learn - x_learn.mean(axis=0)))


def _check_lookback(run, max_lead):
    if int(run.learn_rows[0]) + 1 - max_lead < 0:
        raise ConfigurationError(
            f"washout {run.learn_rows[0]} too short for lookback {max_lead}")


def _memory_targets(run, tau_max):
    """(learn, test) target matrices, one column per delay 1..tau_max."""
    _check_lookback(run, tau_max)
    taus = np.arange(1, tau_max + 1)
    y_learn = run.inputs[run.learn_rows[:, None] + 1 - taus[None, :]]
    y_test = run.inputs[run.test_rows[:, None] + 1 - taus[None, :]]
    return y_learn.astype(float), y_test.astype(float)


def _rule_targets(run, rules, tau_max):
    """Target matrices with columns ordered (rule, tau), rule-major."""
    arity = rules[0].arity
    _check_lookback(run, tau_max + arity - 1)
    cols_l, cols_t = [], []
    for rule in rules:
        for tau in range(1, tau_max + 1):
            cols_l.append(_rule_values(rule, run.inputs, run.learn_rows + 1 - tau))
            cols_t.append(_rule_values(rule, run.inputs, run.test_rows + 1 - tau))
    return (np.stack(cols_l, axis=1).astype(float),
            np.stack(cols_t, axis=1).astype(float))


def _score_targets(run, y_learn, y_test):
    w = run.pinv_learn @ y_learn
    train = _det_coeff_columns(run.x_learn @ w, y_learn)
    test = _det_coeff_columns(run.x_test @ w, y_test)
    return train, test


def memory_capacity(params: NetworkParams, phases: BenchmarkPhases,
                    tau_max: int = 50, rng=None, run: BenchmarkRun = None,
                    deterministic: bool = False) -> TaskScore:
    """MC = sum over delays 1..tau_max of the test-phase recall score."""
    if tau_max < 1:
        raise ConfigurationError("tau_max must be at least 1")
    if run is None:
        run = run_benchmark_phases(params, phases, rng,
                                   deterministic=deterministic)
    y_learn, y_test = _memory_targets(run, tau_max)
    _, test = _score_targets(run, y_learn, y_test)
    return TaskScore(per_delay=test, total=float(test.sum()))


def boolean_capacity(params: NetworkParams, phases: BenchmarkPhases,
                     rules, tau_max: int = 50, rng=None,
                     run: BenchmarkRun = None, deterministic: bool = False):
    """Rule-averaged capacity plus the per-rule score table.

    BC = (1/|rules|) sum_rules sum_tau score; TaskScore.per_delay holds the
    rule-averaged per-delay scores so that BC == TaskScore.total.
    """
    rules = list(rules)
    if not rules:
        raise ConfigurationError("need at least one rule")
    if len({r.arity for r in rules}) != 1:
        raise ConfigurationError("rules in one evaluation must share arity")
    if tau_max < 1:
        raise ConfigurationError("tau_max must be at least 1")
    if run is None:
        run = run_benchmark_phases(params, phases, rng,
                                   deterministic=deterministic)
    y_learn, y_test = _rule_targets(run, rules, tau_max)
    train, test = _score_targets(run, y_learn, y_test)
    per_rule = []
    for k, rule in enumerate(rules):
        sl = slice(k * tau_max, (k + 1) * tau_max)
        per_rule.append(RuleResult(
            rule_id=rule.rule_id, arity=rule.arity, separable=rule.separable,
            per_delay_train=train[sl], per_delay_test=test[sl],
            total_test=float(test[sl].sum())))
    mean_delay = test.reshape(len(rules), tau_max).mean(axis=0)
    score = TaskScore(per_delay=mean_delay, total=float(mean_delay.sum()))
    return score, per_rule


TASK_NAMES = ("memory", "bool2", "bool3")


def evaluate_tasks(params: NetworkParams, phases: BenchmarkPhases, tasks,
                   tau_max: int = 50, rng=None,
                   deterministic: bool = False) -> EvalReport:
    """Run the shared simulation once and score every requested task."""
    tasks = list(tasks)
    for t in tasks:
        if t not in TASK_NAMES:
            raise ConfigurationError(f"unknown task {t!r}")
    run = run_benchmark_phases(params, phases, rng, deterministic=deterministic)
    scores, train_pd, rule_tables = {}, {}, {}
    for t in tasks:
        if t == "memory":
            y_learn, y_test = _memory_targets(run, tau_max)
            train, test = _score_targets(run, y_learn, y_test)
            scores[t] = TaskScore(per_delay=test, total=float(test.sum()))
            train_pd[t] = train
        else:
            rules = enumerate_rules(2 if t == "bool2" else 3)
            score, per_rule = boolean_capacity(params, phases, rules,
                                               tau_max=tau_max, run=run)
            scores[t] = score
            rule_tables[t] = per_rule
            n = len(rules)
            train_pd[t] = np.stack(
                [r.per_delay_train for r in per_rule]).mean(axis=0)
    return EvalReport(scores=scores, train_per_delay=train_pd,
                      rules=rule_tables)
