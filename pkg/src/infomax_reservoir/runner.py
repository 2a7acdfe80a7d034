"""Experiment harness: RI training sweeps with periodic benchmark evaluation.

Directory layout under out_dir:

    K{K:02d}/trial{t:02d}/ri_trace.csv        one row per training block
                          /benchmark.csv      task scores at evaluation blocks
                          /analysis.csv       structural stats at eval blocks
                          /checkpoints/block{b:06d}/   weight snapshots
    report/                                   sweep aggregates (sweep_report)

Randomness is derived per (trial, block, purpose) from the master seed, so
any block of any trial can be recomputed in isolation and the input
multiplicity K never enters the stream derivation: all K arms of a sweep
see identical initial networks, noise, inputs and evaluation streams, and
resuming an interrupted run reproduces the uninterrupted files byte for
byte.  Evaluation at block b sees the parameters entering block b, i.e.
before that block's weight update; the final evaluation at block n_blocks
sees the fully trained network.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import neuron_input_mi, top_connections, weight_summary
from .benchmarks import (BenchmarkPhases, EvalReport, evaluate_tasks,
                         TASK_NAMES)
from .errors import ConfigurationError, DegenerateStatsError
from .infomax import (RIConfig, accumulate_stats, apply_ri_update,
                      gaussian_mi, mi_gradient)
from .io import append_csv, load_snapshot, read_csv, save_snapshot, write_csv
from .network import init_network, run_phase, zero_state

log = logging.getLogger(__name__)

# purpose tags for stream derivation (master_seed, trial, block, purpose)
PURPOSE_INIT = 0
PURPOSE_NOISE = 1
PURPOSE_INPUT = 2
PURPOSE_EVAL = 3
PURPOSE_ANALYSIS = 4

RI_TRACE_HEADER = ("block", "mi_nats", "logdet_c", "logdet_d", "jitter",
                   "mean_abs_w_internal_top50", "mean_abs_w_input")
BENCHMARK_HEADER = ("block", "task", "K_multiplicity", "rule_id", "separable",
                    "tau", "score_train", "score_test")
ANALYSIS_HEADER = ("block", "stat", "neuron_or_edge", "value")


def derive_rng(master_seed, *path):
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=tuple(path)))


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one sweep."""

    out_dir: Path
    master_seed: int = 1
    n_neurons: int = 100
    sigma2_init: float = 0.01
    p_max: float = 0.8
    p_bar: float = 0.1
    input_rate: float = 0.5
    epsilon: float = 0.01
    eta: float = 0.2
    block_steps: int = 100_000
    settle_fraction: float = 0.5
    n_blocks: int = 1500
    k_sweep: tuple = (1,)
    n_trials: int = 10
    eval_every: int = 100
    washout: int = 50_000
    learning: int = 1500
    testing: int = 1500
    tau_max: int = 50
    tasks: tuple = ("memory",)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        self.k_sweep = tuple(int(k) for k in self.k_sweep)
        self.tasks = tuple(self.tasks)
        self.validate()

    def validate(self):
        if self.n_trials < 1:
            raise ConfigurationError("n_trials must be at least 1")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be at least 1")
        if not self.k_sweep:
            raise ConfigurationError("k_sweep must not be empty")
        for k in self.k_sweep:
            if not (1 <= k <= 35):
                raise ConfigurationError("input multiplicities must lie in [1, 35]")
        if len(set(self.k_sweep)) != len(self.k_sweep):
            raise ConfigurationError("k_sweep has duplicates")
        for t in self.tasks:
            if t not in TASK_NAMES:
                raise ConfigurationError(f"unknown task {t!r}")
        if not self.tasks:
            raise ConfigurationError("need at least one task")
        if self.tau_max < 1:
            raise ConfigurationError("tau_max must be at least 1")
        arity = max([1] + [2 if t == "bool2" else 3
                           for t in self.tasks if t != "memory"])
        if self.washout < self.tau_max + arity - 1:
            raise ConfigurationError("washout too short for the requested lookback")
        # delegate range checks on the shared constants
        self.ri_config(self.k_sweep[0])
        self.phases()

    def ri_config(self, k) -> RIConfig:
        return RIConfig(eta=self.eta, input_multiplicity=k,
                        block_steps=self.block_steps,
                        settle_fraction=self.settle_fraction,
                        n_blocks=self.n_blocks)

    def phases(self) -> BenchmarkPhases:
        return BenchmarkPhases(washout=self.washout, learning=self.learning,
                               testing=self.testing)

    def eval_blocks(self):
        blocks = {b for b in range(0, self.n_blocks, self.eval_every)}
        blocks.add(self.n_blocks)
        return sorted(blocks)

    def trial_dir(self, k, trial) -> Path:
        return self.out_dir / f"K{k:02d}" / f"trial{trial:02d}"


def full_profile(out_dir, **overrides) -> ExperimentConfig:
    """Full-scale schedule (slow: hours per trial)."""
    base = dict(out_dir=out_dir, n_neurons=100, block_steps=100_000,
                n_blocks=1500, n_trials=10, eval_every=100, tau_max=50,
                washout=50_000, k_sweep=(1, 5, 30),
                tasks=("memory", "bool2", "bool3"))
    base.update(overrides)
    return ExperimentConfig(**base)


def reduced_profile(out_dir, **overrides) -> ExperimentConfig:
    """Scaled-down schedule that preserves the qualitative effects."""
    base = dict(out_dir=out_dir, n_neurons=30, block_steps=20_000,
                n_blocks=150, n_trials=5, eval_every=25, tau_max=20,
                washout=50_000, k_sweep=(1, 5, 30),
                tasks=("memory", "bool2"))
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass
class TrialTrace:
    k: int
    trial: int
    trial_dir: Path
    blocks: list = field(default_factory=list)
    mi: list = field(default_factory=list)
    eval_reports: dict = field(default_factory=dict)   # block -> EvalReport
    skipped_blocks: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)    # block -> Path


@dataclass
class RunTrace:
    config: ExperimentConfig
    trials: dict = field(default_factory=dict)         # (k, trial) -> TrialTrace


def _benchmark_rows(block, k, report: EvalReport):
    rows = []
    for task, score in report.scores.items():
        if task == "memory":
            train = report.train_per_delay[task]
            for i, tau in enumerate(range(1, score.per_delay.shape[0] + 1)):
                rows.append((block, task, k, -1, -1, tau,
                             float(train[i]), float(score.per_delay[i])))
        else:
            for rr in report.rules[task]:
                for i, tau in enumerate(range(1, rr.per_delay_test.shape[0] + 1)):
                    rows.append((block, task, k, rr.rule_id, int(rr.separable),
                                 tau, float(rr.per_delay_train[i]),
                                 float(rr.per_delay_test[i])))
    return rows


def _analysis_rows(block, params, mi_per_unit):
    rows = []
    for i, v in enumerate(mi_per_unit):
        rows.append((block, "neuron_input_mi", str(i + 1), float(v)))
    summ = weight_summary(params, block=block)
    rows.append((block, "mean_abs_w_internal_top50", "-",
                 summ.mean_abs_internal_top))
    rows.append((block, "mean_abs_w_input", "-", summ.mean_abs_input))
    rows.append((block, "mean_abs_w_internal_all", "-",
                 summ.mean_abs_internal_all))
    n = params.n_neurons
    for rec in top_connections(params, k=min(50, n * n + n)):
        rows.append((block, "top_connection", f"{rec.src}->{rec.dst}",
                     rec.weight))
    return rows


def _evaluate_block(cfg, k, trial, block, params):
    """Benchmark scores plus unit/input MI for the parameters entering block."""
    eval_rng = derive_rng(cfg.master_seed, trial, block, PURPOSE_EVAL)
    report = evaluate_tasks(params, cfg.phases(), cfg.tasks,
                            tau_max=cfg.tau_max, rng=eval_rng)
    ana_rng = derive_rng(cfg.master_seed, trial, block, PURPOSE_ANALYSIS)
    p = params.copy()
    ri = cfg.ri_config(k)
    st = zero_state(p.n_neurons)
    if ri.settle_steps:
        _, st = run_phase(p, st, ri.settle_steps, ana_rng)
    trace, _ = run_phase(p, st, ri.measure_steps, ana_rng)
    return report, neuron_input_mi(trace)


_CKPT_RE = re.compile(r"^block(\d{6})$")


def _existing_checkpoints(trial_dir):
    ckdir = trial_dir / "checkpoints"
    found = {}
    if ckdir.is_dir():
        for child in ckdir.iterdir():
            m = _CKPT_RE.match(child.name)
            if m and (child / "manifest.json").exists():
                found[int(m.group(1))] = child
    return found


def _truncate_csv(path, header, keep_below):
    """Drop rows at or past the resume block; keep only cleanly parsed rows."""
    if not path.exists():
        return
    _, rows = read_csv(path)
    kept = []
    for row in rows:
        try:
            if int(row[0]) < keep_below:
                kept.append(row)
        except (ValueError, IndexError):
            continue
    write_csv(path, header, kept)


def run_trial(cfg: ExperimentConfig, k: int, trial: int,
              stop_before_block=None, resume: bool = True) -> TrialTrace:
    """Train one network for n_blocks, evaluating and checkpointing on the way.

    With resume=True an existing trial directory is continued from its last
    complete checkpoint; the regenerated files match an uninterrupted run.
    Blocks whose statistics are degenerate keep their trace row (MI columns
    nan) but skip the weight update.  stop_before_block ends the invocation
    just before simulating that block (a deliberately partial run).
    """
    tdir = cfg.trial_dir(k, trial)
    ri = cfg.ri_config(k)
    eval_blocks = set(cfg.eval_blocks())
    out = TrialTrace(k=k, trial=trial, trial_dir=tdir)

    start_block = 0
    params = None
    state = None
    if resume:
        ckpts = _existing_checkpoints(tdir)
        usable = [b for b in ckpts if b <= cfg.n_blocks]
        if usable:
            start_block = max(usable)
            params, state, manifest = load_snapshot(ckpts[start_block])
            out.skipped_blocks = list(manifest.get("skipped_blocks", []))
            log.info("K=%d trial=%d resuming at block %d", k, trial, start_block)
    if params is None:
        tdir.mkdir(parents=True, exist_ok=True)
        init_rng = derive_rng(cfg.master_seed, trial, PURPOSE_INIT)
        params = init_network(cfg.n_neurons, sigma2=cfg.sigma2_init,
                              rng=init_rng, p_max=cfg.p_max,
                              p_bar=np.full(cfg.n_neurons, cfg.p_bar),
                              input_rate=cfg.input_rate, epsilon=cfg.epsilon)
        state = zero_state(cfg.n_neurons)

    for name, header in (("ri_trace.csv", RI_TRACE_HEADER),
                         ("benchmark.csv", BENCHMARK_HEADER),
                         ("analysis.csv", ANALYSIS_HEADER)):
        _truncate_csv(tdir / name, header, start_block)

    rates = params.rate_vector()
    for block in range(start_block, cfg.n_blocks + 1):
        if block in eval_blocks:
            ck = tdir / "checkpoints" / f"block{block:06d}"
            save_snapshot(ck, params, state, {
                "block": block, "k_multiplicity": k, "trial": trial,
                "master_seed": cfg.master_seed,
                "skipped_blocks": out.skipped_blocks,
            })
            out.checkpoints[block] = ck
            report, unit_mi = _evaluate_block(cfg, k, trial, block, params)
            out.eval_reports[block] = report
            append_csv(tdir / "benchmark.csv", BENCHMARK_HEADER,
                       _benchmark_rows(block, k, report))
            append_csv(tdir / "analysis.csv", ANALYSIS_HEADER,
                       _analysis_rows(block, params, unit_mi))
            log.info("K=%d trial=%d block=%d eval %s", k, trial, block,
                     {t: round(s.total, 3) for t, s in report.scores.items()})
        if block == cfg.n_blocks:
            break
        if stop_before_block is not None and block >= stop_before_block:
            return out

        summ = weight_summary(params, block=block)
        noise_rng = derive_rng(cfg.master_seed, trial, block, PURPOSE_NOISE)
        input_rng = derive_rng(cfg.master_seed, trial, block, PURPOSE_INPUT)
        if ri.settle_steps:
            _, state = run_phase(params, state, ri.settle_steps, noise_rng,
                                 input_source=input_rng)
        trace, state = run_phase(params, state, ri.measure_steps, noise_rng,
                                 input_source=input_rng)
        stats = accumulate_stats(trace, rates)
        mi_vals = (float("nan"),) * 4
        try:
            rep = gaussian_mi(stats)
            mi_vals = (rep.mi_nats, rep.logdet_c, rep.logdet_d,
                       rep.jitter_applied)
            grad = mi_gradient(stats, rates, p_max=params.p_max)
            apply_ri_update(params, grad, ri)
        except DegenerateStatsError as err:
            out.skipped_blocks.append(block)
            log.warning("K=%d trial=%d block=%d degenerate stats, update "
                        "skipped: %s", k, trial, block, err)
        out.blocks.append(block)
        out.mi.append(mi_vals[0])
        append_csv(tdir / "ri_trace.csv", RI_TRACE_HEADER,
                   [(block,) + mi_vals
                    + (summ.mean_abs_internal_top, summ.mean_abs_input)])
    return out


def run_experiment(cfg: ExperimentConfig, stop_before_block=None,
                   resume: bool = True) -> RunTrace:
    """Run every (K, trial) job of the sweep; see run_trial for one job."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with open(cfg.out_dir / "run_config.json", "w") as fh:
        d = dataclasses.asdict(cfg)
        d["out_dir"] = str(d["out_dir"])
        json.dump(d, fh, indent=2, sort_keys=True)
        fh.write("\n")
    trace = RunTrace(config=cfg)
    for k in cfg.k_sweep:
        for trial in range(cfg.n_trials):
            trace.trials[(k, trial)] = run_trial(
                cfg, k, trial, stop_before_block=stop_before_block,
                resume=resume)
    return trace


def evaluate_checkpoint(snapshot_dir, tasks=("memory",), phases=None,
                        tau_max: int = 50, seed: int = 0) -> EvalReport:
    """Standalone benchmark evaluation of a saved snapshot."""
    params, _, _ = load_snapshot(snapshot_dir)
    if phases is None:
        phases = BenchmarkPhases()
    rng = np.random.default_rng(seed)
    return evaluate_tasks(params, phases, tasks, tau_max=tau_max, rng=rng)


# ---------------------------------------------------------------------------
# sweep aggregation

def _iter_trial_dirs(run_dir):
    run_dir = Path(run_dir)
    for kdir in sorted(run_dir.glob("K*")):
        m = re.match(r"^K(\d+)$", kdir.name)
        if not m:
            continue
        for tdir in sorted(kdir.glob("trial*")):
            t = re.match(r"^trial(\d+)$", tdir.name)
            if t:
                yield int(m.group(1)), int(t.group(1)), tdir


def _mean_sd(values):
    a = np.asarray(values, dtype=float)
    sd = float(a.std(ddof=1)) if a.shape[0] > 1 else 0.0
    return float(a.mean()), sd


def sweep_report(run_dir):
    """Aggregate every trial's CSVs into report/ tables; returns the tables.

    Emits MI and capacity learning curves (mean and sd over trials),
    final-block per-delay profiles, final-block per-rule totals, weight
    summaries, and the final-block per-unit input MI values.
    """
    run_dir = Path(run_dir)
    mi_curves = {}      # (k, block) -> [mi per trial]
    weight_curves = {}  # (k, block) -> [(top50, input)]
    cap_curves = {}     # (k, task, block) -> [total per trial]
    per_delay = {}      # (k, task, block, tau) -> [score per trial]
    rule_totals = {}    # (k, task, block, rule_id, sep) -> [total per trial]
    unit_mi = []        # rows (k, trial, block, unit, value)
    final_blocks = {}   # (k, task) -> max block seen in benchmark.csv
    n_trials = 0

    for k, trial, tdir in _iter_trial_dirs(run_dir):
        n_trials += 1
        _, rows = read_csv(tdir / "ri_trace.csv")
        for row in rows:
            b = int(row[0])
            mi_curves.setdefault((k, b), []).append(float(row[1]))
            weight_curves.setdefault((k, b), []).append(
                (float(row[5]), float(row[6])))
        _, rows = read_csv(tdir / "benchmark.csv")
        per_trial_rule = {}
        for row in rows:
            b, task = int(row[0]), row[1]
            rule_id, sep, tau = int(row[3]), int(row[4]), int(row[5])
            test = float(row[7])
            final_blocks[(k, task)] = max(final_blocks.get((k, task), 0), b)
            per_delay.setdefault((k, task, b, tau), []).append(test)
            key = (k, task, b, rule_id, sep)
            per_trial_rule.setdefault(key, {}).setdefault(trial, 0.0)
            per_trial_rule[key][trial] += test
        for key, trials in per_trial_rule.items():
            k_, task, b, rule_id, sep = key
            if task == "memory":
                cap_curves.setdefault((k_, task, b), []).extend(trials.values())
            else:
                rule_totals.setdefault(key, []).extend(trials.values())
        _, rows = read_csv(tdir / "analysis.csv")
        last_block = max((int(r[0]) for r in rows), default=0)
        for row in rows:
            if row[1] == "neuron_input_mi" and int(row[0]) == last_block:
                unit_mi.append((k, trial, last_block, int(row[2]),
                                float(row[3])))

    if n_trials == 0:
        raise ConfigurationError(f"no trial directories under {run_dir}")

    # Boolean capacity = rule-mean of the per-rule totals, per trial
    bool_tmp = {}
    for (k, task, b, rule_id, sep), vals in rule_totals.items():
        bool_tmp.setdefault((k, task, b), []).append(vals)
    for key, lists in bool_tmp.items():
        arr = np.asarray(lists)          # (n_rules, n_trials)
        cap_curves[key] = list(arr.mean(axis=0))

    rep_dir = run_dir / "report"
    rep_dir.mkdir(exist_ok=True)
    tables = {}

    rows = [(k, b) + _mean_sd(v) + (len(v),)
            for (k, b), v in sorted(mi_curves.items())]
    tables["mi_vs_block"] = rows
    write_csv(rep_dir / "mi_vs_block.csv",
              ("K_multiplicity", "block", "mean_mi", "sd_mi", "n_trials"), rows)

    rows = [(k, task, b) + _mean_sd(v) + (len(v),)
            for (k, task, b), v in sorted(cap_curves.items())]
    tables["capacity_vs_block"] = rows
    write_csv(rep_dir / "capacity_vs_block.csv",
              ("K_multiplicity", "task", "block", "mean_total", "sd_total",
               "n_trials"), rows)

    rows = []
    for (k, task, b, tau), v in sorted(per_delay.items()):
        if b == final_blocks.get((k, task)):
            rows.append((k, task, tau) + _mean_sd(v))
    tables["per_delay_final"] = rows
    write_csv(rep_dir / "per_delay_final.csv",
              ("K_multiplicity", "task", "tau", "mean_score_test", "sd"), rows)

    rows = []
    for (k, task, b, rule_id, sep), v in sorted(rule_totals.items()):
        if b == final_blocks.get((k, task)):
            rows.append((k, task, rule_id, sep) + _mean_sd(v))
    tables["rules_final"] = rows
    write_csv(rep_dir / "rules_final.csv",
              ("K_multiplicity", "task", "rule_id", "separable",
               "mean_total_test", "sd"), rows)

    rows = [(k, b, _mean_sd([p[0] for p in v])[0],
             _mean_sd([p[1] for p in v])[0])
            for (k, b), v in sorted(weight_curves.items())]
    tables["weights_vs_block"] = rows
    write_csv(rep_dir / "weights_vs_block.csv",
              ("K_multiplicity", "block", "mean_abs_w_internal_top50",
               "mean_abs_w_input"), rows)

    tables["neuron_input_mi_final"] = sorted(unit_mi)
    write_csv(rep_dir / "neuron_input_mi_final.csv",
              ("K_multiplicity", "trial", "block", "unit", "value"),
              sorted(unit_mi))
    return tables
